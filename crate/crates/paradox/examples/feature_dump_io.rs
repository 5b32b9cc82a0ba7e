//! Write and read the binary feature-dump container that external
//! extraction jobs use to hand per-layer token representations to the
//! probing lab.
//!
//!     cargo run --example feature_dump_io

use paradox::probe::dumpfile::{read_dump, write_dump};
use paradox::probe::{synth_dump, SynthDumpSpec};

fn main() -> paradox::Result<()> {
    let mut dump = synth_dump(&SynthDumpSpec::new(24, vec![0, 2, 4], 2, 0.5, 17))?;
    dump.end_to_end_accuracy = Some(0.61);

    let path = std::env::temp_dir().join("paradox-example-features.dump");
    write_dump(&path, &dump)?;
    let size = std::fs::metadata(&path)?.len();
    let back = read_dump(&path)?;

    println!("wrote {} ({size} bytes)", path.display());
    println!(
        "layers {:?}, boundary at index {}, {} examples, end-to-end {:?}",
        back.layer_ids,
        back.boundary_index,
        back.n_examples(),
        back.end_to_end_accuracy
    );
    println!(
        "first example at layer {} holds a {}x{} token matrix",
        back.layer_ids[0],
        back.features[0][0].nrows(),
        back.features[0][0].ncols()
    );
    Ok(())
}
