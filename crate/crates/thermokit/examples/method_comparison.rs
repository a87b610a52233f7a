//! The Cartesian factorization x embedding experiment on a shared
//! cohort with shared cross-validation folds, printed as a table.
//!
//!     cargo run --example method_comparison

use thermokit::classify::ClassifierSpec;
use thermokit::embedding::EmbeddingKind;
use thermokit::factorize::FactorizeConfig;
use thermokit::pipeline::{
    comparison_methods, run_comparison, ClassifierSettings, FactorizationSettings,
    FeatureSettings, InputSpec, PhantomTemplate, PipelineConfig,
};

fn main() -> Result<(), thermokit::Error> {
    // A deliberately small cohort so all 21 cells finish quickly.
    let cfg = PipelineConfig {
        input: InputSpec::PhantomCohort {
            healthy: 10,
            abnormal: 10,
            template: PhantomTemplate {
                height: 16,
                width: 16,
                frames: 12,
                ..PhantomTemplate::default()
            },
        },
        factorization: FactorizationSettings {
            config: FactorizeConfig {
                max_iters: 100,
                layer_dims: vec![8, 5],
                ..FactorizeConfig::default()
            },
            ..FactorizationSettings::default()
        },
        features: FeatureSettings {
            levels: 16,
            spectral_d: 3,
            graph_k: 6,
        },
        classifier: ClassifierSettings {
            spec: ClassifierSpec::RandomForest {
                n_trees_grid: vec![50],
                max_depth_grid: vec![Some(4)],
            },
            folds: 4,
            repeats: 1,
        },
        output_dir: "target/examples/method_comparison".into(),
        master_seed: 7,
        ..PipelineConfig::default()
    };

    let (rows, path) = run_comparison(&cfg, &comparison_methods(), &EmbeddingKind::ALL)?;
    println!(
        "{:<14} {:<9} {:>9} {:>8} {:>7} {:>9}",
        "method", "embedding", "accuracy", "kappa", "auc", "seconds"
    );
    for row in &rows {
        println!(
            "{:<14} {:<9} {:>9.3} {:>8.3} {:>7.3} {:>9.2}",
            row.method, row.embedding, row.accuracy_median, row.kappa_median, row.auc,
            row.wall_clock_s
        );
    }
    println!("\nfull table: {}", path.display());
    Ok(())
}
