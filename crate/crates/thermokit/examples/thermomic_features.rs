//! Extract the 32-feature thermomic catalog from one healthy and one
//! abnormal phantom and print them side by side.
//!
//!     cargo run --example thermomic_features

use thermokit::embedding::{embed, EmbeddingParams};
use thermokit::factorize::{pct, FactorizeConfig};
use thermokit::pipeline::PhantomTemplate;
use thermokit::seqio::{build_heat_matrix, generate_phantom, normalize_by_reference, PhantomLabel};
use thermokit::thermomics::extract_features;

fn features_for(label: PhantomLabel, seed: u64) -> Result<Vec<f64>, thermokit::Error> {
    let spec = PhantomTemplate::default().member_spec(label, seed);
    let seq = generate_phantom(&spec)?;
    let normalized = normalize_by_reference(&seq);
    let heat = build_heat_matrix(&normalized)?;
    let basis = pct(&heat, &FactorizeConfig::default())?.basis;
    let img = embed(&basis, &normalized.roi, &EmbeddingParams::default())?;
    Ok(extract_features(&img, &normalized.roi, 32)?.values)
}

fn main() -> Result<(), thermokit::Error> {
    let healthy = features_for(PhantomLabel::Healthy, 1)?;
    let abnormal = features_for(PhantomLabel::Abnormal, 1)?;

    println!("{:<28} {:>14} {:>14}", "feature", "healthy", "abnormal");
    for (name, (h, a)) in thermokit::thermomics::FEATURE_NAMES
        .iter()
        .zip(healthy.iter().zip(&abnormal))
    {
        println!("{name:<28} {h:>14.6} {a:>14.6}");
    }
    Ok(())
}
