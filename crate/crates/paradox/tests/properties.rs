//! Property tests over the library-level invariants that benefit from random
//! inputs rather than fixed fixtures.

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use paradox::audio::{self, Waveform, CANONICAL_SAMPLE_RATE};
use paradox::bench::{Manifest, ManifestHeader, ManifestKind, McqItem, Provenance};
use paradox::eval::{parse_answer, score, ModelResponse, Parsed, Prediction};
use paradox::mixer::dpo::{dpo_loss, PreferenceBatch, PreferenceTriple};
use paradox::probe::mean_pool;
use paradox::verify::wer;
use paradox::TaskKind;

fn waveform_strategy(max_len: usize) -> impl Strategy<Value = Waveform> {
    prop::collection::vec(-1.0f32..=1.0, 1..max_len)
        .prop_map(|samples| Waveform::new(samples, CANONICAL_SAMPLE_RATE).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reverse_is_always_an_involution(w in waveform_strategy(512)) {
        let back = audio::reverse(&audio::reverse(&w));
        prop_assert_eq!(back.samples(), w.samples());
    }

    #[test]
    fn concat_singleton_is_identity(w in waveform_strategy(256), gap in 0.0f64..2.0) {
        let out = audio::concat(std::slice::from_ref(&w), gap).unwrap();
        prop_assert_eq!(out.samples(), w.samples());
    }

    #[test]
    fn gain_composes_additively_when_no_normalization(
        w in waveform_strategy(256),
        g1 in -6.0f64..6.0,
        g2 in -6.0f64..6.0,
    ) {
        // keep headroom so the normalization path cannot trigger
        let quiet_samples: Vec<f32> = w.samples().iter().map(|s| s * 0.05).collect();
        let quiet = Waveform::new(quiet_samples, w.sample_rate_hz()).unwrap();
        let chained = audio::apply_gain(&audio::apply_gain(&quiet, g1).unwrap().waveform, g2).unwrap();
        let single = audio::apply_gain(&quiet, g1 + g2).unwrap();
        prop_assert!(!chained.normalized && !single.normalized);
        for (a, b) in chained.waveform.samples().iter().zip(single.waveform.samples()) {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn wer_is_zero_exactly_on_normalized_equality(
        a in prop::collection::vec("[abc]{1,4}", 1..6),
        b in prop::collection::vec("[abc]{1,4}", 0..6),
    ) {
        let ra = a.join(" ");
        let rb = b.join(" ");
        let self_report = wer(&ra, &ra).unwrap();
        prop_assert_eq!(self_report.wer, 0.0);
        let cross = wer(&ra, &rb).unwrap();
        prop_assert_eq!(cross.wer == 0.0, paradox::text::tokens(&ra) == paradox::text::tokens(&rb));
    }

    #[test]
    fn mean_pool_is_permutation_invariant(
        rows in 1usize..8,
        cols in 1usize..6,
        seed in any::<u64>(),
        rotation in 0usize..8,
    ) {
        let mut rng = paradox::rng_for(seed, &["prop", "pool"]);
        use rand::Rng;
        let m = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1e6f64..1e6));
        let pooled = mean_pool(&m).unwrap();
        let mut rotated = Array2::zeros((rows, cols));
        for i in 0..rows {
            rotated.row_mut(i).assign(&m.row((i + rotation) % rows));
        }
        prop_assert_eq!(mean_pool(&rotated).unwrap(), pooled);
    }

    #[test]
    fn dpo_loss_is_invariant_to_shifting_policy_logps(
        pc in -8.0f64..0.0,
        pr in -8.0f64..0.0,
        rc in -8.0f64..0.0,
        rr in -8.0f64..0.0,
        shift in 0.0f64..4.0,
    ) {
        let base = PreferenceBatch::new(vec![PreferenceTriple {
            id: "p".into(),
            policy_chosen_logp: pc,
            policy_rejected_logp: pr,
            reference_chosen_logp: rc,
            reference_rejected_logp: rr,
        }]);
        // shift both policy log-probs down (staying <= 0)
        let shifted = PreferenceBatch::new(vec![PreferenceTriple {
            id: "p".into(),
            policy_chosen_logp: pc - shift,
            policy_rejected_logp: pr - shift,
            reference_chosen_logp: rc,
            reference_rejected_logp: rr,
        }]);
        let (l0, _) = dpo_loss(&base).unwrap();
        let (l1, _) = dpo_loss(&shifted).unwrap();
        prop_assert!((l0 - l1).abs() < 1e-9);
    }

    #[test]
    fn softmax_weights_always_sum_to_one(logits in prop::collection::vec(-30.0f64..30.0, 2..8)) {
        let alpha = paradox::mixer::softmax(&Array1::from(logits));
        prop_assert!((alpha.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(alpha.iter().all(|a| *a > 0.0));
    }

    #[test]
    fn parse_answer_is_total_and_deterministic(raw in ".{0,60}") {
        let item = McqItem {
            item_id: "p-0".into(),
            task: TaskKind::Gender,
            audio_path: "audio/p-0.wav".into(),
            transcript: "t".into(),
            question: "q".into(),
            choices: vec!["male".into(), "female".into()],
            y_true: 0,
            y_adv: Some(1),
            provenance: Provenance::default(),
        };
        let resp = ModelResponse {
            item_id: "p-0".into(),
            raw_text: raw.clone(),
            model_id: None,
            latency_ms: None,
        };
        let a = parse_answer(&resp, &item);
        let b = parse_answer(&resp, &item);
        prop_assert_eq!(a.parsed, b.parsed);
        if let Parsed::Choice(idx) = a.parsed {
            prop_assert!(idx < item.choices.len());
        }
    }

    #[test]
    fn acc_plus_ala_never_exceeds_one_without_parse_failures(
        answers in prop::collection::vec(0usize..2, 1..40),
    ) {
        let items: Vec<McqItem> = (0..answers.len())
            .map(|i| McqItem {
                item_id: format!("p-{i}"),
                task: TaskKind::Age,
                audio_path: format!("audio/p-{i}.wav"),
                transcript: "t".into(),
                question: "q".into(),
                choices: vec!["young".into(), "old".into()],
                y_true: 0,
                y_adv: Some(1),
                provenance: Provenance::default(),
            })
            .collect();
        let manifest = Manifest::new(
            ManifestHeader {
                schema_version: paradox::bench::MANIFEST_SCHEMA_VERSION,
                kind: ManifestKind::EvalBenchmark,
                global_seed: 0,
                build_config: serde_json::json!({}),
            },
            items,
        )
        .unwrap();
        let predictions: Vec<Prediction> = answers
            .iter()
            .enumerate()
            .map(|(i, a)| Prediction { item_id: format!("p-{i}"), parsed: Parsed::Choice(*a) })
            .collect();
        let board = score(&manifest, &predictions).unwrap();
        let t = &board.per_task[&TaskKind::Age];
        prop_assert!(t.acc_gt + t.ala.unwrap() <= 1.0 + 1e-12);
    }
}
