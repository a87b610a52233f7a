//! Cross-validate the three classifier families on the same reduced
//! feature set and print median accuracy, kappa, and AUC.
//!
//!     cargo run --example classifier_benchmark

use nalgebra::DMatrix;

use thermokit::classify::{cross_validate, ClassifierSpec, Dataset};
use thermokit::embedding::{embed, EmbeddingParams};
use thermokit::factorize::{pct, FactorizeConfig};
use thermokit::pipeline::{generate_cohort, PhantomTemplate};
use thermokit::seqio::{build_heat_matrix, normalize_by_reference};
use thermokit::thermomics::{extract_features, spectral_embed, FEATURE_NAMES};

fn main() -> Result<(), thermokit::Error> {
    let members = generate_cohort(15, 15, &PhantomTemplate::default(), 7)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for m in &members {
        let normalized = normalize_by_reference(&m.seq);
        let heat = build_heat_matrix(&normalized)?;
        let basis = pct(&heat, &FactorizeConfig::default())?.basis;
        let img = embed(&basis, &normalized.roi, &EmbeddingParams::default())?;
        rows.push(extract_features(&img, &normalized.roi, 32)?.values);
        labels.push(m.label);
        ids.push(m.id.clone());
    }
    let features = DMatrix::from_fn(rows.len(), FEATURE_NAMES.len(), |r, c| rows[r][c]);
    let reduced = spectral_embed(&features, 5, 10)?;
    let ds = Dataset::new(reduced.matrix, labels, ids)?;

    let specs = [
        ClassifierSpec::default(),
        ClassifierSpec::Knn {
            k_grid: vec![1, 3, 5],
        },
        ClassifierSpec::NaiveBayes,
    ];
    println!(
        "{:<14} {:>10} {:>10} {:>8}  chosen",
        "classifier", "accuracy", "kappa", "auc"
    );
    for spec in specs {
        let report = cross_validate(&ds, &spec, 5, 3, 7)?;
        println!(
            "{:<14} {:>10.3} {:>10.3} {:>8.3}  {}",
            report.classifier,
            report.accuracy_median,
            report.kappa_median,
            report.auc,
            report.best_params
        );
    }
    Ok(())
}
