//! The whole workflow in one call: phantoms -> normalization -> PCT ->
//! shrinkage -> Weibull embedding -> thermomics -> spectral reduction ->
//! cross-validated random forest, with all artifacts on disk.
//!
//!     cargo run --example full_pipeline

use thermokit::pipeline::{run_pipeline, InputSpec, PhantomTemplate, PipelineConfig};

fn main() -> Result<(), thermokit::Error> {
    let cfg = PipelineConfig {
        input: InputSpec::PhantomCohort {
            healthy: 15,
            abnormal: 15,
            template: PhantomTemplate::default(),
        },
        output_dir: "target/examples/full_pipeline".into(),
        master_seed: 7,
        ..PipelineConfig::default()
    };

    let outcome = run_pipeline(&cfg)?;
    let report = &outcome.report;
    println!(
        "accuracy median {:.3} (IQR {:.3}..{:.3})",
        report.accuracy_median, report.accuracy_iqr.0, report.accuracy_iqr.1
    );
    println!(
        "kappa median {:.3} (IQR {:.3}..{:.3}), AUC {:.3}",
        report.kappa_median, report.kappa_iqr.0, report.kappa_iqr.1, report.auc
    );
    println!("chosen hyperparameters: {}", report.best_params);
    println!("artifacts: {}", outcome.manifest_path.display());
    Ok(())
}
