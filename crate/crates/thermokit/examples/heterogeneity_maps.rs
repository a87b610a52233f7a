//! Fuse a phantom's low-rank basis into heterogeneity maps with all
//! three membership functions and write them as PGM images.
//!
//!     cargo run --example heterogeneity_maps

use std::fs;
use std::path::Path;

use thermokit::embedding::{embed, write_pgm, EmbeddingKind, EmbeddingParams};
use thermokit::factorize::{pct, FactorizeConfig};
use thermokit::pipeline::PhantomTemplate;
use thermokit::seqio::{build_heat_matrix, generate_phantom, normalize_by_reference, PhantomLabel};

fn main() -> Result<(), thermokit::Error> {
    let spec = PhantomTemplate::default().member_spec(PhantomLabel::Abnormal, 5);
    let seq = generate_phantom(&spec)?;
    let normalized = normalize_by_reference(&seq);
    let heat = build_heat_matrix(&normalized)?;
    let basis = pct(&heat, &FactorizeConfig::default())?.basis;

    let out = Path::new("target/examples/heterogeneity_maps");
    fs::create_dir_all(out)?;
    for kind in EmbeddingKind::ALL {
        let params = EmbeddingParams {
            kind,
            ..EmbeddingParams::default()
        };
        let img = embed(&basis, &normalized.roi, &params)?;
        let path = out.join(format!("{}.pgm", kind.name()));
        write_pgm(&img, &normalized.roi, &path)?;
        let peak = img.values.amax();
        println!("{:<9} peak membership {:.4} -> {}", kind.name(), peak, path.display());
    }
    Ok(())
}
