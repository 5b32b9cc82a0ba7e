//! Preference-loss numerics: the zero-margin loss is exactly ln 2, the
//! analytic gradient survives a finite-difference audit, preference pairs
//! come only from training manifests, and the toy mixer fit migrates its
//! mixing weights onto the layer that carries the label.
//!
//!     cargo run --example dpo_numerics

use paradox::bench::read_manifest;
use paradox::config::PipelineConfig;
use paradox::mixer::dpo::{
    build_preference_pairs, dpo_loss, gradient_check_max_rel_err, PreferenceBatch,
    PreferenceTriple,
};
use paradox::mixer::fit::{synth_mix_dataset, toy_mixer_fit, SynthStackSpec, ToyFitConfig};
use paradox::mixer::{default_layer_set, LayerId};
use paradox::pipeline::cmd_build;

fn main() -> paradox::Result<()> {
    // policy identical to the reference: every margin is zero
    let batch = PreferenceBatch::new(
        (0..8)
            .map(|i| PreferenceTriple {
                id: format!("t{i}"),
                policy_chosen_logp: -1.5,
                policy_rejected_logp: -2.5,
                reference_chosen_logp: -1.5,
                reference_rejected_logp: -2.5,
            })
            .collect(),
    );
    let (loss, grad) = dpo_loss(&batch)?;
    println!("zero-margin loss: {loss:.10} (ln 2 = {:.10})", std::f64::consts::LN_2);
    println!("gradient on the first chosen log-prob: {:+.6}", grad.wrt_policy_chosen[0]);

    let max_rel_err = gradient_check_max_rel_err(100, 0)?;
    println!("analytic vs finite-difference gradient, 100 batches: max rel err {max_rel_err:.2e}");

    // preference pairs only from training data
    let mut config = PipelineConfig::stub_default();
    config.items_per_task = 2;
    config.tasks = vec!["age".into(), "speaker_count".into()];
    config.purpose = "training".into();
    let out = std::env::temp_dir().join("paradox-example-dpo");
    let _ = std::fs::remove_dir_all(&out);
    let manifest = read_manifest(&cmd_build(&config, &out)?)?;
    let pairs = build_preference_pairs(&manifest, 9, false)?;
    for pair in pairs.iter().take(3) {
        println!("pair [{}]: chosen '{}' over '{}'", pair.item_id, pair.chosen, pair.rejected);
    }

    // toy mixer fit against a frozen readout
    let spec = SynthStackSpec::new(240, default_layer_set(), LayerId::Numbered(5), 3);
    let dataset = synth_mix_dataset(&spec)?;
    let report = toy_mixer_fit(&dataset, &ToyFitConfig { epochs: 120, seed: 3, ..Default::default() })?;
    println!(
        "toy fit: mean alpha {:?} -> argmax layer {}, held-out accuracy {:.3}",
        report.mean_alpha.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        report.alpha_argmax,
        report.holdout_accuracy
    );
    Ok(())
}
