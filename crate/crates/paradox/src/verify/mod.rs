//! Dataset verification gates: the exact-transcript ASR gate (WER = 0 after
//! normalization), the lexical contradiction check, and the reversed-audio
//! emotion referee. A provider outage is recorded as *inconclusive*, distinct
//! from *fail*, so transient outages never silently shrink a dataset.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{reverse, wav};
use crate::bench::{resolve_audio_path, Manifest, McqItem};
use crate::error::{Error, Result};
use crate::providers::{AsrClient, EmotionClient};
use crate::task::TaskKind;
use crate::text;

/// Word-level alignment counts against a reference transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_word_count: usize,
    pub wer: f64,
}

/// Word error rate from one minimal-cost Levenshtein alignment with unit
/// costs. Both strings are normalized first (lowercase, punctuation stripped,
/// whitespace collapsed); the reference must be non-empty afterwards.
pub fn wer(reference: &str, hypothesis: &str) -> Result<WerReport> {
    let r = text::tokens(reference);
    let h = text::tokens(hypothesis);
    if r.is_empty() {
        return Err(Error::invalid("reference transcript is empty after normalization"));
    }
    let (m, n) = (r.len(), h.len());

    #[derive(Clone, Copy, PartialEq)]
    enum Step {
        Start,
        Keep,
        Sub,
        Del,
        Ins,
    }

    let mut cost = vec![vec![0usize; n + 1]; m + 1];
    let mut back = vec![vec![Step::Start; n + 1]; m + 1];
    for i in 1..=m {
        cost[i][0] = i;
        back[i][0] = Step::Del;
    }
    for j in 1..=n {
        cost[0][j] = j;
        back[0][j] = Step::Ins;
    }
    for i in 1..=m {
        for j in 1..=n {
            let (diag_cost, diag_step) = if r[i - 1] == h[j - 1] {
                (cost[i - 1][j - 1], Step::Keep)
            } else {
                (cost[i - 1][j - 1] + 1, Step::Sub)
            };
            let del_cost = cost[i - 1][j] + 1;
            let ins_cost = cost[i][j - 1] + 1;
            // fixed tie-break (diagonal, deletion, insertion) so counts are
            // deterministic even when several alignments are minimal
            let mut best = (diag_cost, diag_step);
            if del_cost < best.0 {
                best = (del_cost, Step::Del);
            }
            if ins_cost < best.0 {
                best = (ins_cost, Step::Ins);
            }
            cost[i][j] = best.0;
            back[i][j] = best.1;
        }
    }

    let (mut i, mut j) = (m, n);
    let (mut subs, mut dels, mut inss) = (0usize, 0usize, 0usize);
    while i > 0 || j > 0 {
        match back[i][j] {
            Step::Keep => {
                i -= 1;
                j -= 1;
            }
            Step::Sub => {
                subs += 1;
                i -= 1;
                j -= 1;
            }
            Step::Del => {
                dels += 1;
                i -= 1;
            }
            Step::Ins => {
                inss += 1;
                j -= 1;
            }
            Step::Start => unreachable!("reached the origin with steps remaining"),
        }
    }

    Ok(WerReport {
        substitutions: subs,
        deletions: dels,
        insertions: inss,
        reference_word_count: m,
        wer: (subs + dels + inss) as f64 / m as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    TranscriptGate,
    LexicalGate,
    EmotionReferee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    Pass,
    Fail,
    /// The gate could not run to completion (provider outage, unreadable
    /// audio). The item is held, not rejected.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateResult {
    pub gate: GateKind,
    pub decision: GateDecision,
    pub detail: String,
}

impl GateResult {
    fn pass(gate: GateKind) -> Self {
        GateResult { gate, decision: GateDecision::Pass, detail: String::new() }
    }

    fn fail(gate: GateKind, detail: impl Into<String>) -> Self {
        GateResult { gate, decision: GateDecision::Fail, detail: detail.into() }
    }

    fn inconclusive(gate: GateKind, detail: impl Into<String>) -> Self {
        GateResult { gate, decision: GateDecision::Inconclusive, detail: detail.into() }
    }
}

/// Per-item verification record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub item_id: String,
    pub passed: bool,
    pub failed_gates: Vec<GateKind>,
    pub inconclusive_gates: Vec<GateKind>,
    pub gates: Vec<GateResult>,
}

impl VerificationOutcome {
    fn from_gates(item_id: String, gates: Vec<GateResult>) -> Self {
        let failed_gates: Vec<GateKind> = gates
            .iter()
            .filter(|g| g.decision == GateDecision::Fail)
            .map(|g| g.gate)
            .collect();
        let inconclusive_gates: Vec<GateKind> = gates
            .iter()
            .filter(|g| g.decision == GateDecision::Inconclusive)
            .map(|g| g.gate)
            .collect();
        VerificationOutcome {
            item_id,
            passed: failed_gates.is_empty() && inconclusive_gates.is_empty(),
            failed_gates,
            inconclusive_gates,
            gates,
        }
    }
}

/// Which gates to run and the referee's ambiguity cutoff.
#[derive(Debug, Clone)]
pub struct VerifyPolicy {
    pub transcript_gate: bool,
    pub lexical_gate: bool,
    pub emotion_referee: bool,
    /// Referee predictions below this confidence count as ambiguous -> fail.
    pub referee_min_confidence: f64,
}

impl Default for VerifyPolicy {
    fn default() -> Self {
        VerifyPolicy {
            transcript_gate: true,
            lexical_gate: true,
            emotion_referee: true,
            referee_min_confidence: 0.5,
        }
    }
}

/// Optional synonym lists per label for the lexical gate. A label not in the
/// map matches itself.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TermLexicon {
    pub per_label: BTreeMap<String, Vec<String>>,
}

impl TermLexicon {
    pub fn terms_for(&self, label: &str) -> Vec<String> {
        self.per_label.get(label).cloned().unwrap_or_else(|| vec![label.to_string()])
    }
}

/// Exact-transcript gate: every raw synthesized segment of the item must
/// transcribe back to its script with WER 0 after normalization.
pub fn transcript_gate(item: &McqItem, manifest_path: &Path, asr: &dyn AsrClient) -> GateResult {
    let kind = GateKind::TranscriptGate;
    for segment in &item.provenance.segments {
        let path = resolve_audio_path(manifest_path, &segment.path);
        let audio = match wav::read_wav(&path) {
            Ok(a) => a,
            Err(e) => return GateResult::inconclusive(kind, format!("unreadable segment: {e}")),
        };
        let hypothesis = match asr.transcribe(&audio) {
            Ok(r) => r.hypothesis,
            Err(e) => return GateResult::inconclusive(kind, format!("asr unavailable: {e}")),
        };
        match wer(&segment.transcript, &hypothesis) {
            Ok(report) if report.wer == 0.0 => {}
            Ok(report) => {
                return GateResult::fail(
                    kind,
                    format!(
                        "wer {:.3} (S={} D={} I={}) for '{}' vs '{}'",
                        report.wer,
                        report.substitutions,
                        report.deletions,
                        report.insertions,
                        segment.transcript,
                        hypothesis
                    ),
                );
            }
            Err(e) => return GateResult::fail(kind, format!("unusable reference: {e}")),
        }
    }
    GateResult::pass(kind)
}

fn lexical_terms(item: &McqItem, lexicon: &TermLexicon) -> Result<(Vec<String>, Vec<String>)> {
    match item.task {
        TaskKind::Age | TaskKind::Gender | TaskKind::Emotion | TaskKind::Intonation => {
            let adv = item
                .adv_choice()
                .ok_or_else(|| Error::invalid("attribute item lacks a misleading label"))?;
            Ok((lexicon.terms_for(adv), lexicon.terms_for(item.true_choice())))
        }
        TaskKind::Pitch | TaskKind::Volume | TaskKind::Speed | TaskKind::Range => {
            let adv_level = item
                .provenance
                .transform_params
                .get("adv_level")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::invalid("comparison item lacks adv_level provenance"))?;
            // the seed utterance is the medium segment, so "medium" is the
            // level the script must not claim
            Ok((lexicon.terms_for(adv_level), lexicon.terms_for("medium")))
        }
        other => Err(Error::invalid(format!("no lexical term lists for task {other}"))),
    }
}

/// Lexical contradiction gate: the transcript must contain at least one
/// misleading term and none of the true-label terms.
pub fn lexical_gate(item: &McqItem, lexicon: &TermLexicon) -> Result<GateResult> {
    let kind = GateKind::LexicalGate;
    let (include, exclude) = lexical_terms(item, lexicon)?;
    let has_adv = include.iter().any(|t| text::contains_term(&item.transcript, t));
    let has_true = exclude.iter().any(|t| text::contains_term(&item.transcript, t));
    Ok(if has_adv && !has_true {
        GateResult::pass(kind)
    } else if !has_adv {
        GateResult::fail(kind, format!("transcript asserts none of {include:?}"))
    } else {
        GateResult::fail(kind, format!("transcript mentions a true-label term from {exclude:?}"))
    })
}

/// Reversed-audio emotion referee: the classifier sees only the time-reversed
/// clip and must report the true label unambiguously.
pub fn emotion_referee(
    item: &McqItem,
    manifest_path: &Path,
    clf: &dyn EmotionClient,
    min_confidence: f64,
) -> GateResult {
    let kind = GateKind::EmotionReferee;
    if item.task != TaskKind::Emotion {
        return GateResult::pass(kind);
    }
    let path = resolve_audio_path(manifest_path, &item.audio_path);
    let audio = match wav::read_wav(&path) {
        Ok(a) => a,
        Err(e) => return GateResult::inconclusive(kind, format!("unreadable audio: {e}")),
    };
    let reversed = reverse(&audio);
    let result = match clf.classify(&reversed) {
        Ok(r) => r,
        Err(e) => return GateResult::inconclusive(kind, format!("classifier unavailable: {e}")),
    };
    let expected = item.true_choice();
    if !result.top1_label.eq_ignore_ascii_case(expected) {
        GateResult::fail(
            kind,
            format!("referee predicted '{}' but the item conveys '{expected}'", result.top1_label),
        )
    } else if result.confidence < min_confidence {
        GateResult::fail(
            kind,
            format!("referee confidence {:.2} below {min_confidence:.2}", result.confidence),
        )
    } else {
        GateResult::pass(kind)
    }
}

/// Everything `verify_manifest` needs to reach providers.
pub struct VerifyClients<'a> {
    pub asr: &'a dyn AsrClient,
    pub emotion: &'a dyn EmotionClient,
}

/// Result of verifying a manifest: the kept manifest (original order), plus
/// per-item outcomes split into rejected and held.
pub struct VerifyOutput {
    pub kept: Manifest,
    pub outcomes: Vec<VerificationOutcome>,
}

impl VerifyOutput {
    pub fn rejected(&self) -> impl Iterator<Item = &VerificationOutcome> {
        self.outcomes.iter().filter(|o| !o.failed_gates.is_empty())
    }

    pub fn held(&self) -> impl Iterator<Item = &VerificationOutcome> {
        self.outcomes
            .iter()
            .filter(|o| o.failed_gates.is_empty() && !o.inconclusive_gates.is_empty())
    }
}

/// Run every applicable gate over every item. Gates run per item in
/// parallel; outcome order follows manifest order regardless of scheduling.
pub fn verify_manifest(
    manifest: &Manifest,
    manifest_path: &Path,
    clients: &VerifyClients<'_>,
    policy: &VerifyPolicy,
    lexicon: &TermLexicon,
) -> Result<VerifyOutput> {
    let outcomes: Vec<VerificationOutcome> = manifest
        .items
        .par_iter()
        .map(|item| {
            let mut gates = Vec::new();
            if policy.transcript_gate {
                gates.push(transcript_gate(item, manifest_path, clients.asr));
            }
            if policy.lexical_gate && lexical_gate_applies(item.task) {
                match lexical_gate(item, lexicon) {
                    Ok(g) => gates.push(g),
                    Err(e) => gates.push(GateResult::inconclusive(
                        GateKind::LexicalGate,
                        format!("gate misconfigured: {e}"),
                    )),
                }
            }
            if policy.emotion_referee && item.task == TaskKind::Emotion {
                gates.push(emotion_referee(
                    item,
                    manifest_path,
                    clients.emotion,
                    policy.referee_min_confidence,
                ));
            }
            VerificationOutcome::from_gates(item.item_id.clone(), gates)
        })
        .collect();

    let kept_items: Vec<McqItem> = manifest
        .items
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| o.passed)
        .map(|(item, _)| item.clone())
        .collect();
    let kept = Manifest::new(manifest.header.clone(), kept_items)?;
    Ok(VerifyOutput { kept, outcomes })
}

pub fn lexical_gate_applies(task: TaskKind) -> bool {
    !matches!(task, TaskKind::SpeakerId | TaskKind::SpeakerCount)
}
