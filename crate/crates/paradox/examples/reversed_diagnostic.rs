//! The reversed-audio diagnostic. A reader that parrots the transcript scores
//! ALA = 1 on the forward dataset; reverse every clip (labels of temporally
//! dependent tasks flip with the audio) and the transcript shortcut is gone,
//! so the same reader collapses to chance while an acoustic listener is
//! unaffected.
//!
//!     cargo run --example reversed_diagnostic

use rand::Rng;

use paradox::bench::{read_manifest, Manifest};
use paradox::config::PipelineConfig;
use paradox::eval::{score_with_model, Parsed, Prediction};
use paradox::pipeline::{cmd_build, cmd_reverse};

fn reader_predictions(manifest: &Manifest, can_read: bool, seed: u64) -> Vec<Prediction> {
    manifest
        .items
        .iter()
        .map(|item| {
            let choice = if can_read {
                item.y_adv.unwrap_or(item.y_true)
            } else {
                // the reversed speech is unintelligible: guess
                let mut rng = paradox::rng_for(seed, &["reader", &item.item_id]);
                rng.gen_range(0..item.choices.len())
            };
            Prediction { item_id: item.item_id.clone(), parsed: Parsed::Choice(choice) }
        })
        .collect()
}

fn main() -> paradox::Result<()> {
    let mut config = PipelineConfig::stub_default();
    config.seed = 11;
    config.items_per_task = 5;

    let out = std::env::temp_dir().join("paradox-example-reversed");
    let _ = std::fs::remove_dir_all(&out);
    let manifest_path = cmd_build(&config, &out)?;
    let forward = read_manifest(&manifest_path)?;

    let reversed_path = cmd_reverse(&manifest_path, &out.join("reversed"))?;
    let reversed = read_manifest(&reversed_path)?;

    let fwd_board =
        score_with_model(&forward, &reader_predictions(&forward, true, 1), "reader")?;
    let rev_board =
        score_with_model(&reversed, &reader_predictions(&reversed, false, 1), "reader")?;

    println!("transcript-following reader:");
    println!(
        "  forward : acc_gt {:.3}  ala {:.3}",
        fwd_board.macro_acc_gt,
        fwd_board.macro_ala.unwrap_or(f64::NAN)
    );
    println!(
        "  reversed: acc_gt {:.3}  ala {:.3}",
        rev_board.macro_acc_gt,
        rev_board.macro_ala.unwrap_or(f64::NAN)
    );
    println!("reversing the audio removes the lexical shortcut: ALA drops to chance.");
    Ok(())
}
