//! Acceptance gate: one test per release criterion. Each test name is
//! the criterion it certifies, so the per-test pass/fail line in the
//! runner output is the acceptance record.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use thermokit::classify::{cohen_kappa, roc_curve, ClassifierSpec, Confusion};
use thermokit::embedding::{
    bell_membership, gaussian_membership, weibull_density, EmbeddedImage, EmbeddingKind,
    EmbeddingParams, RoiStats,
};
use thermokit::factorize::{
    convex_nmf, nmf, pct, reconstruction_error, sparse_nmf, FactorizeConfig, Method,
};
use thermokit::jse::{js_mean, jse_shrink, run_spiked_trials, sample_cov_spectrum};
use thermokit::pipeline::{
    comparison_methods, run_comparison, run_pipeline, ClassifierSettings, FeatureSettings,
    InputSpec, PhantomTemplate, PipelineConfig,
};
use thermokit::seqio::{HeatMatrix, Mask};
use thermokit::thermomics::{extract_features, quantize_roi, GLCM_OFFSETS};

fn heat(data: DMatrix<f64>) -> HeatMatrix {
    HeatMatrix {
        height: data.nrows(),
        width: 1,
        data,
        provenance: "acceptance".into(),
    }
}

/// Criterion 1: the shrinkage quantities match a from-scratch evaluation
/// of the closed-form recipe on a seeded p=4, n=6 spiked draw.
#[test]
fn criterion_01_jse_formula_oracle() {
    let start = Instant::now();
    let (p, n) = (4usize, 6usize);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let spike = DVector::from_fn(p, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        g.abs()
    })
    .normalize();
    let mut data = DMatrix::zeros(p, n);
    for j in 0..n {
        let strength: f64 = StandardNormal.sample(&mut rng);
        for i in 0..p {
            let noise: f64 = StandardNormal.sample(&mut rng);
            data[(i, j)] = 3.0 * strength * spike[i] + noise;
        }
    }

    let spec = sample_cov_spectrum(&data).unwrap();
    let result = jse_shrink(&spec).unwrap();

    // Independent evaluation: plain covariance, plain eigensolver, and
    // the formulas written out longhand.
    let mut centered = data.clone();
    for i in 0..p {
        let mean = centered.row(i).sum() / n as f64;
        for j in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let s_mat = &centered * centered.transpose() / (n as f64 - 1.0);
    let eig = s_mat.clone().symmetric_eigen();
    let top = (0..p)
        .max_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap())
        .unwrap();
    let lambda2 = eig.eigenvalues[top];
    let mut b = eig.eigenvectors.column(top).into_owned();
    if b.dot(&spec.leading_eigenvector) < 0.0 {
        b = -b;
    }
    let lambda = lambda2.sqrt();
    let m_b = b.sum() / p as f64;
    let s2 = b.iter().map(|&bi| (lambda * bi - lambda * m_b).powi(2)).sum::<f64>() / p as f64;
    let trace = (0..p).map(|i| s_mat[(i, i)]).sum::<f64>();
    let nu2 = (trace - lambda2) / (p as f64 * (n as f64 - 1.0));
    let c = (1.0 - nu2 / s2).clamp(0.0, 1.0);
    let ones = DVector::from_element(p, 1.0);
    let b_jse = (&ones * m_b + (&b - &ones * m_b) * c).normalize();

    assert!((result.s2 - s2).abs() < 1e-10, "s2 {} vs {}", result.s2, s2);
    assert!((result.nu2 - nu2).abs() < 1e-10, "nu2 {} vs {}", result.nu2, nu2);
    assert!((result.c_jse - c).abs() < 1e-10, "c {} vs {}", result.c_jse, c);
    assert!(
        (&result.b_jse - &b_jse).norm() < 1e-10,
        "b_jse deviates by {}",
        (&result.b_jse - &b_jse).norm()
    );
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

/// Criterion 2: the positive-part James-Stein mean dominates the raw
/// observation in mean squared error at p=10 with unit noise.
#[test]
fn criterion_02_js_mean_dominance() {
    let start = Instant::now();
    let p = 10;
    let theta = DVector::from_fn(p, |i, _| 0.2 * i as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mse_raw = 0.0;
    let mut mse_js = 0.0;
    let trials = 5000;
    for _ in 0..trials {
        let z = DVector::from_fn(p, |i, _| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            theta[i] + noise
        });
        let shrunk = js_mean(&z, 1.0).unwrap();
        mse_raw += (&z - &theta).norm_squared();
        mse_js += (&shrunk - &theta).norm_squared();
    }
    let ratio = mse_js / mse_raw;
    assert!(ratio < 0.95, "MSE ratio {ratio} not well below 1");
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

/// Criterion 3: the shrunk eigenvector is angularly closer to the truth
/// than the raw sample eigenvector in at least 80% of spiked trials at
/// p=200, n=20, spike strength 5.
#[test]
fn criterion_03_jse_angular_improvement() {
    let start = Instant::now();
    let (trials, aggregate) = run_spiked_trials(200, 20, 5.0, 500, 0).unwrap();
    assert_eq!(trials.len(), 500);
    assert!(
        aggregate.improved_fraction >= 0.80,
        "improved in only {:.1}% of trials",
        100.0 * aggregate.improved_fraction
    );
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

/// Criterion 4: PCT reconstructs exactly at full rank with singular
/// values matching a Gram-matrix eigensolver; the multiplicative NMF
/// family descends monotonically and stays exactly non-negative.
#[test]
fn criterion_04_factorization_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    for trial in 0..10 {
        let x = heat(DMatrix::from_fn(64, 23, |_, _| rng.gen::<f64>()));

        // Full-rank PCT: lossless reconstruction, oracle spectrum.
        let full = FactorizeConfig {
            p: 23,
            ..FactorizeConfig::default()
        };
        let res = pct(&x, &full).unwrap();
        let err = reconstruction_error(&x, &res).unwrap();
        assert!(err <= 1e-8, "trial {trial}: full-rank error {err}");

        let gram = x.data.transpose() * &x.data;
        let mut oracle: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in res.singular_values.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-8, "sv {got} vs {want}");
        }

        // Multiplicative methods: monotone objective, exact sign bounds.
        let iter_cfg = FactorizeConfig {
            p: 5,
            max_iters: 500,
            tol: 0.0,
            ..FactorizeConfig::default()
        };
        for (name, result) in [
            ("nmf", nmf(&x, &iter_cfg).unwrap()),
            ("sparse_nmf", sparse_nmf(&x, &iter_cfg).unwrap()),
            ("convex_nmf", convex_nmf(&x, &iter_cfg).unwrap()),
        ] {
            for w in result.objective_trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "{name} trial {trial}: objective rose {} -> {}",
                    w[0],
                    w[1]
                );
            }
            assert!(
                result.coeffs.iter().all(|&v| v >= 0.0),
                "{name}: negative coefficient"
            );
            assert!(
                result.basis.iter().all(|&v| v >= 0.0),
                "{name}: negative basis entry"
            );
            if let Some(w) = &result.mixing {
                assert!(w.iter().all(|&v| v >= 0.0), "{name}: negative mixing");
            }
        }
    }
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

/// Criterion 5: membership functions hit their tabulated values.
#[test]
fn criterion_05_embedding_formulas() {
    let stats = RoiStats { mu: 0.4, sigma: 0.2 };

    let eta = gaussian_membership(&DVector::from_vec(vec![stats.mu + stats.sigma]), stats);
    assert!((eta[0] - 1f64.exp()).abs() < 1e-12, "eta {}", eta[0]);

    for b in [0.5, 1.0, 2.5] {
        for side in [-1.0, 1.0] {
            let xi = bell_membership(
                &DVector::from_vec(vec![stats.mu + side * stats.sigma]),
                stats,
                b,
            );
            assert!((xi[0] - 0.5).abs() < 1e-12, "xi {}", xi[0]);
        }
    }

    // k=2, lambda=1 => b = 1, w(1) = 2 e^{-1}.
    let w = weibull_density(1.0, 2.0, 1.0);
    assert!((w - 2.0 * (-1f64).exp()).abs() < 1e-12, "w {w}");
}

/// Criterion 6: the 12 co-occurrence features equal brute-force counting
/// on 100 random 8x8 images at 32 levels.
#[test]
fn criterion_06_glcm_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let side = 8;
    let levels = 32;
    let roi = Mask::new(side, side, vec![true; side * side]);

    for trial in 0..100 {
        let values = DMatrix::from_fn(side, side, |_, _| rng.gen::<f64>());
        let img = EmbeddedImage {
            values: values.clone(),
            kind: EmbeddingKind::Weibull,
            params: EmbeddingParams::default(),
        };
        let features = extract_features(&img, &roi, levels).unwrap();
        let got = &features.values[20..32];

        // Brute force: count symmetric level pairs, normalize, apply the
        // textbook statistics, aggregate mean and range per statistic.
        let grid = quantize_roi(&values, &roi, levels);
        let mut per_offset = Vec::new();
        for &(dr, dc) in &GLCM_OFFSETS {
            let mut counts = vec![vec![0.0f64; levels]; levels];
            let mut total = 0.0;
            for r in 0..side as isize {
                for c in 0..side as isize {
                    let (r2, c2) = (r + dr, c + dc);
                    if r2 < 0 || c2 < 0 || r2 >= side as isize || c2 >= side as isize {
                        continue;
                    }
                    let a = grid[r as usize][c as usize];
                    let b = grid[r2 as usize][c2 as usize];
                    if let (Some(a), Some(b)) = (a, b) {
                        counts[a][b] += 1.0;
                        counts[b][a] += 1.0;
                        total += 2.0;
                    }
                }
            }
            let p = |i: usize, j: usize| counts[i][j] / total;
            let mut contrast = 0.0;
            let mut dissimilarity = 0.0;
            let mut homogeneity = 0.0;
            let mut asm = 0.0;
            let mut entropy = 0.0;
            let mut mu_i = 0.0;
            for i in 0..levels {
                for j in 0..levels {
                    let pij = p(i, j);
                    let d = i as f64 - j as f64;
                    contrast += pij * d * d;
                    dissimilarity += pij * d.abs();
                    homogeneity += pij / (1.0 + d * d);
                    asm += pij * pij;
                    if pij > 0.0 {
                        entropy -= pij * pij.log2();
                    }
                    mu_i += i as f64 * pij;
                }
            }
            let mut var_i = 0.0;
            for i in 0..levels {
                for j in 0..levels {
                    var_i += (i as f64 - mu_i).powi(2) * p(i, j);
                }
            }
            let mut correlation = 0.0;
            if var_i > 0.0 {
                for i in 0..levels {
                    for j in 0..levels {
                        correlation +=
                            (i as f64 - mu_i) * (j as f64 - mu_i) * p(i, j) / var_i;
                    }
                }
            }
            per_offset.push([contrast, dissimilarity, homogeneity, asm, entropy, correlation]);
        }

        for stat in 0..6 {
            let vals: Vec<f64> = per_offset.iter().map(|o| o[stat]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let range = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - vals.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                (got[2 * stat] - mean).abs() < 1e-10,
                "trial {trial} stat {stat} mean: {} vs {mean}",
                got[2 * stat]
            );
            assert!(
                (got[2 * stat + 1] - range).abs() < 1e-10,
                "trial {trial} stat {stat} range: {} vs {range}",
                got[2 * stat + 1]
            );
        }
    }
}

/// Criterion 7: AUC is the Mann-Whitney pairwise statistic; the worked
/// kappa example lands exactly on 0.6.
#[test]
fn criterion_07_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let n = rng.gen_range(4..60);
        let scores: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 10.0).round() / 10.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
        if !labels.contains(&0) {
            labels[0] = 0;
        }
        if !labels.contains(&1) {
            labels[n - 1] = 1;
        }
        let (_, auc) = roc_curve(&scores, &labels).unwrap();

        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            if labels[i] != 1 {
                continue;
            }
            for j in 0..n {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        assert!((auc - wins / pairs).abs() < 1e-12, "auc {auc} vs {}", wins / pairs);
    }

    let kappa = cohen_kappa(&Confusion {
        tp: 40,
        tn: 40,
        fp: 10,
        fn_: 10,
    });
    assert!((kappa - 0.6).abs() < 1e-15, "kappa {kappa}");
}

/// Criterion 8: the full phantom study reaches accuracy >= 0.90 and
/// kappa >= 0.7 with a byte-identical report on rerun, inside 120 s.
#[test]
fn criterion_08_end_to_end_phantom_study() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        output_dir: dir.path().join("run_a"),
        ..PipelineConfig::default()
    };
    let outcome = run_pipeline(&cfg).unwrap();
    assert!(
        outcome.report.accuracy_median >= 0.90,
        "accuracy_median {}",
        outcome.report.accuracy_median
    );
    assert!(
        outcome.report.kappa_median >= 0.7,
        "kappa_median {}",
        outcome.report.kappa_median
    );

    let rerun_cfg = PipelineConfig {
        output_dir: dir.path().join("run_b"),
        ..PipelineConfig::default()
    };
    let rerun = run_pipeline(&rerun_cfg).unwrap();
    assert_eq!(
        std::fs::read(&outcome.report_path).unwrap(),
        std::fs::read(&rerun.report_path).unwrap(),
        "report not byte-identical on rerun"
    );
    assert!(
        start.elapsed().as_secs_f64() < 120.0,
        "took {:.1} s",
        start.elapsed().as_secs_f64()
    );
}

/// Criterion 9: the comparison harness emits the complete 7x3 table on a
/// shared phantom cohort with identical fold assignments per cell and
/// the documented CSV schema. Method ranking is cohort-dependent and
/// deliberately not asserted.
#[test]
fn criterion_09_method_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
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
        factorization: thermokit::pipeline::FactorizationSettings {
            method: Method::Pct,
            config: FactorizeConfig {
                max_iters: 100,
                layer_dims: vec![8, 5],
                ..FactorizeConfig::default()
            },
        },
        features: FeatureSettings {
            levels: 16,
            spectral_d: 3,
            graph_k: 6,
        },
        classifier: ClassifierSettings {
            spec: ClassifierSpec::RandomForest {
                n_trees_grid: vec![25],
                max_depth_grid: vec![Some(3)],
            },
            folds: 4,
            repeats: 1,
        },
        output_dir: dir.path().to_path_buf(),
        master_seed: 7,
        ..PipelineConfig::default()
    };

    let methods = comparison_methods();
    assert_eq!(methods.len(), 7);
    let (rows, path) = run_comparison(&cfg, &methods, &EmbeddingKind::ALL).unwrap();
    assert_eq!(rows.len(), 21, "expected the full 7x3 table");

    let hash = &rows[0].fold_assignment_sha256;
    assert!(rows.iter().all(|r| &r.fold_assignment_sha256 == hash));

    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,embedding,accuracy_median,accuracy_q25,accuracy_q75,\
         kappa_median,kappa_q25,kappa_q75,auc,wall_clock_s,fold_assignment_sha256"
    );
    assert_eq!(lines.count(), 21);
    for row in &rows {
        assert!(row.accuracy_median >= 0.0 && row.accuracy_median <= 1.0);
        assert!(row.auc >= 0.0 && row.auc <= 1.0);
        assert!(row.wall_clock_s >= 0.0);
    }
}
