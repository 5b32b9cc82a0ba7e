//! Preference-loss numerics: the pairwise logistic (DPO) objective over
//! policy-vs-reference log-probability margins, its analytic gradient with
//! respect to the policy log-probs, and preference-pair construction from
//! MCQ manifests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{Manifest, ManifestKind};
use crate::error::{Error, Result};
use crate::nn::{neg_log_sigmoid, sigmoid};
use crate::seeded::rng_for;

pub const DEFAULT_BETA: f64 = 0.1;

/// One preference comparison: log-probabilities of the chosen and rejected
/// responses under the trainable policy and the frozen reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreferenceTriple {
    pub id: String,
    pub policy_chosen_logp: f64,
    pub policy_rejected_logp: f64,
    pub reference_chosen_logp: f64,
    pub reference_rejected_logp: f64,
}

impl PreferenceTriple {
    /// The margin `s`: how much more the policy prefers the chosen response,
    /// relative to the reference policy's preference.
    pub fn margin(&self) -> f64 {
        (self.policy_chosen_logp - self.policy_rejected_logp)
            - (self.reference_chosen_logp - self.reference_rejected_logp)
    }
}

/// A batch of preference triples with the preference-strength temperature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreferenceBatch {
    pub triples: Vec<PreferenceTriple>,
    pub beta: f64,
}

impl PreferenceBatch {
    pub fn new(triples: Vec<PreferenceTriple>) -> Self {
        PreferenceBatch { triples, beta: DEFAULT_BETA }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta <= 0.0 || !self.beta.is_finite() {
            return Err(Error::invalid("beta must be positive"));
        }
        if self.triples.is_empty() {
            return Err(Error::invalid("preference batch must be non-empty"));
        }
        for t in &self.triples {
            let values = [
                t.policy_chosen_logp,
                t.policy_rejected_logp,
                t.reference_chosen_logp,
                t.reference_rejected_logp,
            ];
            if values.iter().any(|v| !v.is_finite() || *v > 0.0) {
                return Err(Error::invalid(format!(
                    "triple {}: log-probabilities must be finite and <= 0",
                    t.id
                )));
            }
        }
        Ok(())
    }
}

/// Gradient of the batch loss with respect to each triple's policy
/// log-probabilities.
#[derive(Debug, Clone)]
pub struct DpoGradient {
    pub wrt_policy_chosen: Vec<f64>,
    pub wrt_policy_rejected: Vec<f64>,
}

/// Mean pairwise logistic loss `-log sigmoid(beta * s)` over the batch and
/// its analytic gradient:
///
/// d/d lp_chosen = -beta * sigmoid(-beta s) / n
/// d/d lp_rejected = +beta * sigmoid(-beta s) / n
pub fn dpo_loss(batch: &PreferenceBatch) -> Result<(f64, DpoGradient)> {
    batch.validate()?;
    let n = batch.triples.len() as f64;
    let mut loss = 0.0;
    let mut wrt_chosen = Vec::with_capacity(batch.triples.len());
    let mut wrt_rejected = Vec::with_capacity(batch.triples.len());
    for triple in &batch.triples {
        let s = triple.margin();
        loss += neg_log_sigmoid(batch.beta * s);
        let slope = batch.beta * sigmoid(-batch.beta * s) / n;
        wrt_chosen.push(-slope);
        wrt_rejected.push(slope);
    }
    Ok((loss / n, DpoGradient { wrt_policy_chosen: wrt_chosen, wrt_policy_rejected: wrt_rejected }))
}

/// Compare the analytic gradient against central finite differences over
/// seeded random batches; returns the worst relative error observed.
pub fn gradient_check_max_rel_err(n_batches: u64, seed: u64) -> Result<f64> {
    let step = 1e-5;
    let mut max_rel_err = 0.0f64;
    for b in 0..n_batches {
        let mut rng = rng_for(seed, &["dpo", "gradcheck", &b.to_string()]);
        let n = rng.gen_range(1..=8usize);
        let triples: Vec<PreferenceTriple> = (0..n)
            .map(|i| PreferenceTriple {
                id: format!("t{i}"),
                policy_chosen_logp: -rng.gen_range(0.0..5.0),
                policy_rejected_logp: -rng.gen_range(0.0..5.0),
                reference_chosen_logp: -rng.gen_range(0.0..5.0),
                reference_rejected_logp: -rng.gen_range(0.0..5.0),
            })
            .collect();
        let batch = PreferenceBatch::new(triples);
        let (_, grad) = dpo_loss(&batch)?;
        for i in 0..n {
            for chosen in [true, false] {
                let mut plus = batch.clone();
                let mut minus = batch.clone();
                if chosen {
                    plus.triples[i].policy_chosen_logp += step;
                    minus.triples[i].policy_chosen_logp -= step;
                } else {
                    plus.triples[i].policy_rejected_logp += step;
                    minus.triples[i].policy_rejected_logp -= step;
                }
                let (lp, _) = dpo_loss(&plus)?;
                let (lm, _) = dpo_loss(&minus)?;
                let numeric = (lp - lm) / (2.0 * step);
                let analytic =
                    if chosen { grad.wrt_policy_chosen[i] } else { grad.wrt_policy_rejected[i] };
                let rel =
                    (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-12);
                max_rel_err = max_rel_err.max(rel);
            }
        }
    }
    Ok(max_rel_err)
}

/// One training pair drawn from an MCQ item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub item_id: String,
    pub question: String,
    pub chosen: String,
    pub rejected: String,
}

/// Build preference pairs: chosen is the true option's text, rejected is
/// sampled uniformly from the remaining options, deterministically in
/// `seed`. Evaluation-benchmark manifests are refused unless
/// `allow_benchmark` is set: the adversarial benchmark must never be trained
/// on.
pub fn build_preference_pairs(
    manifest: &Manifest,
    seed: u64,
    allow_benchmark: bool,
) -> Result<Vec<PreferencePair>> {
    if manifest.header.kind == ManifestKind::EvalBenchmark && !allow_benchmark {
        return Err(Error::PolicyViolation(
            "refusing to build preference pairs from an evaluation benchmark manifest \
             (pass the explicit override to proceed)"
                .into(),
        ));
    }
    let mut pairs = Vec::with_capacity(manifest.items.len());
    for item in &manifest.items {
        if item.choices.len() < 2 {
            return Err(Error::invalid(format!(
                "item {} has fewer than 2 choices",
                item.item_id
            )));
        }
        let wrong: Vec<&String> = item
            .choices
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != item.y_true)
            .map(|(_, c)| c)
            .collect();
        let mut rng = rng_for(seed, &["preference", &item.item_id]);
        let rejected = wrong[rng.gen_range(0..wrong.len())].clone();
        pairs.push(PreferencePair {
            item_id: item.item_id.clone(),
            question: item.question.clone(),
            chosen: item.true_choice().to_string(),
            rejected,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{ManifestHeader, McqItem, Provenance, MANIFEST_SCHEMA_VERSION};
    use crate::task::TaskKind;

    fn triple(id: &str, pc: f64, pr: f64, rc: f64, rr: f64) -> PreferenceTriple {
        PreferenceTriple {
            id: id.into(),
            policy_chosen_logp: pc,
            policy_rejected_logp: pr,
            reference_chosen_logp: rc,
            reference_rejected_logp: rr,
        }
    }

    #[test]
    fn zero_margin_batch_loss_is_ln_two() {
        let batch = PreferenceBatch::new(vec![
            triple("a", -1.0, -2.0, -1.0, -2.0),
            triple("b", -0.5, -0.5, -3.0, -3.0),
        ]);
        let (loss, _) = dpo_loss(&batch).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-9, "loss {loss}");
    }

    #[test]
    fn raising_the_chosen_logp_strictly_lowers_the_loss() {
        let mut batch = PreferenceBatch::new(vec![triple("a", -1.0, -2.0, -1.5, -1.5)]);
        let (before, _) = dpo_loss(&batch).unwrap();
        batch.triples[0].policy_chosen_logp += 1e-3;
        let (after, _) = dpo_loss(&batch).unwrap();
        assert!(after < before);
    }

    #[test]
    fn loss_is_invariant_to_shifting_both_policy_logps() {
        let base = PreferenceBatch::new(vec![triple("a", -1.0, -2.5, -0.5, -0.25)]);
        let (l0, _) = dpo_loss(&base).unwrap();
        let shifted = PreferenceBatch::new(vec![triple("a", -1.0 - 0.7, -2.5 - 0.7, -0.5, -0.25)]);
        let (l1, _) = dpo_loss(&shifted).unwrap();
        assert!((l0 - l1).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let max_rel_err = gradient_check_max_rel_err(100, 2024).unwrap();
        assert!(max_rel_err <= 1e-4, "max relative error {max_rel_err}");
    }

    #[test]
    fn invalid_batches_are_rejected() {
        assert!(dpo_loss(&PreferenceBatch::new(vec![])).is_err());
        let bad_beta = PreferenceBatch::new(vec![triple("a", -1.0, -1.0, -1.0, -1.0)]).with_beta(0.0);
        assert!(dpo_loss(&bad_beta).is_err());
        let positive = PreferenceBatch::new(vec![triple("a", 0.5, -1.0, -1.0, -1.0)]);
        assert!(dpo_loss(&positive).is_err());
    }

    fn manifest(kind: ManifestKind, choices: &[&str]) -> Manifest {
        let items = (0..3)
            .map(|i| McqItem {
                item_id: format!("it-{i}"),
                task: TaskKind::Age,
                audio_path: format!("audio/it-{i}.wav"),
                transcript: "t".into(),
                question: "q".into(),
                choices: choices.iter().map(|c| c.to_string()).collect(),
                y_true: 0,
                y_adv: (choices.len() > 1).then_some(1),
                provenance: Provenance::default(),
            })
            .collect();
        Manifest::new(
            ManifestHeader {
                schema_version: MANIFEST_SCHEMA_VERSION,
                kind,
                global_seed: 7,
                build_config: serde_json::json!({}),
            },
            items,
        )
        .unwrap()
    }

    #[test]
    fn benchmark_manifests_are_refused_without_override() {
        let m = manifest(ManifestKind::EvalBenchmark, &["a", "b", "c"]);
        assert!(matches!(
            build_preference_pairs(&m, 1, false),
            Err(Error::PolicyViolation(_))
        ));
        assert!(build_preference_pairs(&m, 1, true).is_ok());
        let t = manifest(ManifestKind::Training, &["a", "b", "c"]);
        assert!(build_preference_pairs(&t, 1, false).is_ok());
    }

    #[test]
    fn two_choice_items_force_the_unique_wrong_option() {
        let m = manifest(ManifestKind::Training, &["right", "wrong"]);
        let pairs = build_preference_pairs(&m, 9, false).unwrap();
        assert!(pairs.iter().all(|p| p.chosen == "right" && p.rejected == "wrong"));
    }

    #[test]
    fn rejected_sampling_is_deterministic_and_never_equals_chosen() {
        let m = manifest(ManifestKind::Training, &["a", "b", "c", "d"]);
        let p1 = build_preference_pairs(&m, 42, false).unwrap();
        let p2 = build_preference_pairs(&m, 42, false).unwrap();
        assert_eq!(p1, p2);
        assert!(p1.iter().all(|p| p.chosen != p.rejected));
    }

    #[test]
    fn rejected_distribution_is_uniform_over_wrong_options() {
        // 10k draws over a 4-choice item: each wrong option should appear
        // ~3333 times; allow 3 sigma of binomial(10000, 1/3)
        let m = manifest(ManifestKind::Training, &["a", "b", "c", "d"]);
        let mut counts = std::collections::BTreeMap::new();
        for seed in 0..10_000u64 {
            let pairs = build_preference_pairs(&m, seed, false).unwrap();
            *counts.entry(pairs[0].rejected.clone()).or_insert(0usize) += 1;
        }
        let expected = 10_000.0 / 3.0;
        let sigma = (10_000.0_f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for (option, count) in counts {
            assert!(
                (count as f64 - expected).abs() <= 3.0 * sigma,
                "option {option} drawn {count} times"
            );
        }
    }
}
