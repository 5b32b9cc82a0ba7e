//! Layer-wise probing on a synthetic feature dump: the label signal is
//! planted at exactly one layer, so the probe-accuracy curve should peak
//! there and sit at chance everywhere else, at every probe depth. An
//! end-to-end accuracy marker below the peak exposes a utilization gap.
//!
//!     cargo run --example layer_probing

use paradox::probe::{layer_curve, synth_dump, ProbeConfig, SynthDumpSpec};

fn main() -> paradox::Result<()> {
    let mut dump = synth_dump(&SynthDumpSpec::new(200, vec![0, 2, 4, 6, 8, 10], 4, 0.5, 5))?;
    // pretend the full model only reaches 55% end to end
    dump.end_to_end_accuracy = Some(0.55);

    for depth in [1usize, 3, 5] {
        let cfg = ProbeConfig {
            depth,
            hidden_dim: 64,
            folds: 10,
            seed: 5,
            epochs: 60,
            learning_rate: 1e-2,
            batch_size: 32,
        };
        let curve = layer_curve(&dump, &cfg)?;
        println!("\nprobe depth {depth}:");
        for (i, entry) in curve.entries.iter().enumerate() {
            let marker = if i == curve.boundary_index { "  <- encoder/LLM interface" } else { "" };
            println!(
                "  layer {:>2}: {:.3} ± {:.3}{marker}",
                entry.layer_id, entry.mean_accuracy, entry.std_accuracy
            );
        }
        println!(
            "  end-to-end {:.3}, utilization gap {:.3}",
            curve.end_to_end_accuracy.unwrap(),
            curve.utilization_gap().unwrap()
        );
    }
    Ok(())
}
