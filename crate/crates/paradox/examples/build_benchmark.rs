//! Build a small benchmark offline with the stub providers and print what
//! came out. Everything is seeded: run it twice and the dataset directory is
//! byte-identical.
//!
//!     cargo run --example build_benchmark

use paradox::bench::read_manifest;
use paradox::config::PipelineConfig;
use paradox::pipeline::cmd_build;

fn main() -> paradox::Result<()> {
    let mut config = PipelineConfig::stub_default();
    config.seed = 42;
    config.items_per_task = 3;

    let out = std::env::temp_dir().join("paradox-example-build");
    let _ = std::fs::remove_dir_all(&out);
    let manifest_path = cmd_build(&config, &out)?;
    let manifest = read_manifest(&manifest_path)?;

    println!("built {} items -> {}", manifest.items.len(), manifest_path.display());
    for item in manifest.items.iter().take(6) {
        println!(
            "\n[{}] {}\n  transcript: {}\n  choices: {:?}\n  true: {}  misleading: {}",
            item.task,
            item.question,
            item.transcript,
            item.choices,
            item.true_choice(),
            item.adv_choice().unwrap_or("-")
        );
    }
    Ok(())
}
