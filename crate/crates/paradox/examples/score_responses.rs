//! Score two simulated responders against a benchmark: one that always
//! follows the transcript (high adversarial-label agreement) and one that
//! always answers the acoustic truth. Prints the per-task table for each.
//!
//!     cargo run --example score_responses

use paradox::bench::read_manifest;
use paradox::config::PipelineConfig;
use paradox::eval::{emit_report, score_with_model, Parsed, Prediction, ReportFormat};
use paradox::pipeline::cmd_build;

fn main() -> paradox::Result<()> {
    let mut config = PipelineConfig::stub_default();
    config.seed = 42;
    config.items_per_task = 4;

    let out = std::env::temp_dir().join("paradox-example-score");
    let _ = std::fs::remove_dir_all(&out);
    let manifest_path = cmd_build(&config, &out)?;
    let manifest = read_manifest(&manifest_path)?;

    let transcript_follower: Vec<Prediction> = manifest
        .items
        .iter()
        .map(|item| Prediction {
            item_id: item.item_id.clone(),
            parsed: Parsed::Choice(item.y_adv.unwrap_or(item.y_true)),
        })
        .collect();
    let listener: Vec<Prediction> = manifest
        .items
        .iter()
        .map(|item| Prediction { item_id: item.item_id.clone(), parsed: Parsed::Choice(item.y_true) })
        .collect();

    for (name, predictions) in
        [("transcript-follower", &transcript_follower), ("acoustic-listener", &listener)]
    {
        let board = score_with_model(&manifest, predictions, name)?;
        println!("\n== {name} ==");
        print!("{}", String::from_utf8_lossy(&emit_report(&board, ReportFormat::Table)?));
    }
    Ok(())
}
