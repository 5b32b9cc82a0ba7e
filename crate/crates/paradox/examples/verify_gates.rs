//! Run the verification gates (exact-transcript ASR, lexical contradiction,
//! reversed-audio emotion referee) over a freshly built dataset, then plant a
//! transcript mismatch and watch the gate catch it.
//!
//!     cargo run --example verify_gates

use paradox::bench::{emit_manifest, read_manifest};
use paradox::config::PipelineConfig;
use paradox::pipeline::{cmd_build, cmd_verify};

fn main() -> paradox::Result<()> {
    let mut config = PipelineConfig::stub_default();
    config.seed = 7;
    config.items_per_task = 2;
    config.tasks = vec!["age".into(), "emotion".into(), "speaker_count".into()];

    let out = std::env::temp_dir().join("paradox-example-verify");
    let _ = std::fs::remove_dir_all(&out);
    let manifest_path = cmd_build(&config, &out)?;

    let clean = cmd_verify(&manifest_path, &config)?;
    println!("clean dataset: kept {} rejected {} held {}", clean.kept, clean.rejected, clean.held);

    // claim one clip says something it does not; the ASR gate must reject it
    let mut manifest = read_manifest(&manifest_path)?;
    manifest.items[0].provenance.segments[0].transcript = "entirely different words".into();
    let tampered_path = out.join("tampered.jsonl");
    emit_manifest(&manifest, &tampered_path)?;

    let tampered = cmd_verify(&tampered_path, &config)?;
    println!(
        "tampered dataset: kept {} rejected {} held {} (reports: {})",
        tampered.kept,
        tampered.rejected,
        tampered.held,
        tampered.rejected_path.display()
    );
    Ok(())
}
