//! Generate a small synthetic cohort, print per-member statistics, and
//! save it to disk in the layout the pipeline's directory input expects.
//!
//!     cargo run --example phantom_cohort

use thermokit::pipeline::{generate_cohort, write_phantom_cohort, PhantomTemplate};
use thermokit::seqio::roi_spatial_variance;

fn main() -> Result<(), thermokit::Error> {
    let template = PhantomTemplate::default();
    let members = generate_cohort(5, 5, &template, 42)?;

    println!("{:<14} {:>6} {:>12}", "id", "label", "roi variance");
    for m in &members {
        println!(
            "{:<14} {:>6} {:>12.5}",
            m.id,
            m.label,
            roi_spatial_variance(&m.seq)
        );
    }

    let out = std::path::Path::new("target/examples/phantom_cohort");
    let written = write_phantom_cohort(5, 5, &template, 42, out)?;
    println!("\n{} sequences written under {}", written.len(), out.display());
    Ok(())
}
