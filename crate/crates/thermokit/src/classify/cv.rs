//! Stratified repeated k-fold cross-validation with grid search nested
//! inside each training fold.
//!
//! The outer loop never lets hyperparameter selection see the held-out
//! fold: `select_hyperparams` runs its own 3-fold split on the training
//! samples only. Fold seeds are pre-assigned from the master seed so the
//! report is deterministic.

use serde::Serialize;

use super::metrics::{cohen_kappa, roc_curve, Confusion};
use super::{train, ClassifierSpec, Dataset, HyperParams};
use crate::error::{Error, Result};

const SEED_STRIDE: u64 = 0x9e37_79b9_7f4a_7c15;

/// Aggregated cross-validation results, median (q25, q75) convention.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub classifier: String,
    pub folds: usize,
    pub repeats: usize,
    pub fold_accuracies: Vec<f64>,
    pub accuracy_median: f64,
    pub accuracy_iqr: (f64, f64),
    pub fold_kappas: Vec<f64>,
    pub kappa_median: f64,
    pub kappa_iqr: (f64, f64),
    /// Pooled over every held-out score across repeats.
    pub roc_points: Vec<(f64, f64)>,
    pub auc: f64,
    /// Held-out predictions pooled over all folds and repeats.
    pub pooled_confusion: Confusion,
    /// Modal grid cell over all outer folds.
    pub best_params: String,
    pub fold_params: Vec<String>,
}

/// Per-repeat fold labels: `out[r][i]` is the fold index of sample `i`
/// in repeat `r`. Each class is shuffled independently and dealt
/// round-robin, so per-fold class counts stay within one sample of the
/// cohort ratio.
pub fn stratified_fold_assignments(
    y: &[u8],
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if folds < 2 {
        return Err(Error::ClassifierConfig(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if repeats == 0 {
        return Err(Error::ClassifierConfig("need at least 1 repeat".into()));
    }
    for class in [0u8, 1] {
        let count = y.iter().filter(|&&l| l == class).count();
        if count < folds {
            return Err(Error::Dataset(format!(
                "class {class} has {count} samples, fewer than {folds} folds"
            )));
        }
    }

    let mut out = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
            seed.wrapping_add((r as u64).wrapping_mul(SEED_STRIDE)),
        );
        let mut assignment = vec![0usize; y.len()];
        for class in [0u8, 1] {
            let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
            members.shuffle(&mut rng);
            for (pos, &i) in members.iter().enumerate() {
                assignment[i] = pos % folds;
            }
        }
        out.push(assignment);
    }
    Ok(out)
}

/// Pick the grid cell with the best mean accuracy over an internal
/// 3-fold split of the training samples. Ties keep the earlier cell.
/// Cells that cannot be trained on the inner folds (e.g. k >= n for
/// kNN) are skipped.
pub fn select_hyperparams(
    train_ds: &Dataset,
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<HyperParams> {
    let grid = spec.grid();
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let min_class = [0u8, 1]
        .iter()
        .map(|&c| train_ds.y.iter().filter(|&&l| l == c).count())
        .min()
        .unwrap();
    let inner_folds = 3.min(min_class);
    if inner_folds < 2 {
        return Ok(grid[0]);
    }

    let assignment = &stratified_fold_assignments(&train_ds.y, inner_folds, 1, seed)?[0];
    let mut best: Option<(f64, HyperParams)> = None;
    for &cell in &grid {
        let mut correct = 0usize;
        let mut total = 0usize;
        let mut feasible = true;
        for f in 0..inner_folds {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..train_ds.len()).partition(|&i| assignment[i] == f);
            let inner = train_ds.subset(&train_idx);
            let model = match train(&inner, cell, seed) {
                Ok(m) => m,
                Err(_) => {
                    feasible = false;
                    break;
                }
            };
            for &i in &test_idx {
                total += 1;
                if model.predict(&train_ds.row(i)) == train_ds.y[i] {
                    correct += 1;
                }
            }
        }
        if !feasible {
            continue;
        }
        let acc = correct as f64 / total as f64;
        if best.map_or(true, |(b, _)| acc > b) {
            best = Some((acc, cell));
        }
    }
    best.map(|(_, cell)| cell)
        .ok_or_else(|| Error::ClassifierConfig("no feasible grid cell".into()))
}

/// Repeated stratified k-fold cross-validation with nested grid search.
pub fn cross_validate(
    ds: &Dataset,
    spec: &ClassifierSpec,
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<ClassificationReport> {
    let assignments = stratified_fold_assignments(&ds.y, folds, repeats, seed)?;
    cross_validate_with_folds(ds, spec, &assignments, seed)
}

/// Same as `cross_validate` but with externally supplied fold
/// assignments, so independent runs (e.g. a method comparison) can share
/// identical splits.
pub fn cross_validate_with_folds(
    ds: &Dataset,
    spec: &ClassifierSpec,
    assignments: &[Vec<usize>],
    seed: u64,
) -> Result<ClassificationReport> {
    if assignments.is_empty() {
        return Err(Error::ClassifierConfig("no fold assignments".into()));
    }
    for a in assignments {
        if a.len() != ds.len() {
            return Err(Error::ClassifierConfig(
                "fold assignment length does not match dataset".into(),
            ));
        }
    }
    let folds = assignments[0].iter().max().map_or(0, |m| m + 1);
    if folds < 2 {
        return Err(Error::ClassifierConfig("need at least 2 folds".into()));
    }

    let mut fold_accuracies = Vec::new();
    let mut fold_kappas = Vec::new();
    let mut fold_params = Vec::new();
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    let mut pooled_predicted = Vec::new();

    for (r, assignment) in assignments.iter().enumerate() {
        for f in 0..folds {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..ds.len()).partition(|&i| assignment[i] == f);
            if test_idx.is_empty() {
                return Err(Error::ClassifierConfig(format!(
                    "fold {f} of repeat {r} is empty"
                )));
            }
            let train_ds = ds.subset(&train_idx);
            if !train_ds.y.contains(&0) || !train_ds.y.contains(&1) {
                return Err(Error::Dataset(
                    "training fold lost one of the classes".into(),
                ));
            }
            let fold_seed = seed.wrapping_add(
                ((r * folds + f) as u64 + 1).wrapping_mul(SEED_STRIDE),
            );
            let params = select_hyperparams(&train_ds, spec, fold_seed)?;
            let model = train(&train_ds, params, fold_seed)?;

            let mut predicted = Vec::with_capacity(test_idx.len());
            let mut actual = Vec::with_capacity(test_idx.len());
            for &i in &test_idx {
                let row = ds.row(i);
                predicted.push(model.predict(&row));
                actual.push(ds.y[i]);
                pooled_scores.push(model.score(&row));
                pooled_labels.push(ds.y[i]);
            }
            let confusion = Confusion::from_predictions(&predicted, &actual);
            fold_accuracies.push(confusion.accuracy());
            fold_kappas.push(cohen_kappa(&confusion));
            fold_params.push(params.describe());
            pooled_predicted.extend_from_slice(&predicted);
        }
    }

    let (roc_points, auc) = roc_curve(&pooled_scores, &pooled_labels)?;
    let pooled_confusion = Confusion::from_predictions(&pooled_predicted, &pooled_labels);
    let best_params = modal_string(&fold_params);

    Ok(ClassificationReport {
        classifier: spec.name().to_string(),
        folds,
        repeats: assignments.len(),
        accuracy_median: quantile(&fold_accuracies, 0.5),
        accuracy_iqr: (quantile(&fold_accuracies, 0.25), quantile(&fold_accuracies, 0.75)),
        kappa_median: quantile(&fold_kappas, 0.5),
        kappa_iqr: (quantile(&fold_kappas, 0.25), quantile(&fold_kappas, 0.75)),
        fold_accuracies,
        fold_kappas,
        roc_points,
        auc,
        pooled_confusion,
        best_params,
        fold_params,
    })
}

/// Linearly interpolated quantile of an unsorted slice.
fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Most frequent string; ties broken by first appearance.
fn modal_string(items: &[String]) -> String {
    let mut best = items[0].clone();
    let mut best_count = 0;
    for item in items {
        let count = items.iter().filter(|x| *x == item).count();
        if count > best_count {
            best_count = count;
            best = item.clone();
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    /// 60 healthy / 40 abnormal with identical features: every model
    /// degenerates to the prior, i.e. a constant majority-class
    /// predictor.
    fn constant_feature_dataset() -> Dataset {
        let n = 100;
        let x = DMatrix::zeros(n, 3);
        let y: Vec<u8> = (0..n).map(|i| u8::from(i >= 60)).collect();
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        Dataset::new(x, y, ids).unwrap()
    }

    #[test]
    fn majority_predictor_hits_chance_level() {
        let ds = constant_feature_dataset();
        let report =
            cross_validate(&ds, &ClassifierSpec::NaiveBayes, 5, 3, 11).unwrap();
        assert_abs_diff_eq!(report.accuracy_median, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(report.kappa_median, 0.0, epsilon = 1e-12);
        // All pooled scores tie, so the ROC is the diagonal.
        assert_abs_diff_eq!(report.auc, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let ds = super::super::tests::blobs(25, 8.0, 3);
        let spec = ClassifierSpec::Knn { k_grid: vec![1, 3] };
        let report = cross_validate(&ds, &spec, 5, 3, 2).unwrap();
        assert_abs_diff_eq!(report.accuracy_median, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.kappa_median, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.auc, 1.0, epsilon = 1e-12);
        assert_eq!(report.fold_accuracies.len(), 15);
    }

    #[test]
    fn stratification_preserves_class_ratio_within_one() {
        let y: Vec<u8> = (0..83).map(|i| u8::from(i % 3 == 0)).collect();
        let assignments = stratified_fold_assignments(&y, 5, 2, 42).unwrap();
        for assignment in &assignments {
            for f in 0..5 {
                for class in [0u8, 1] {
                    let class_total = y.iter().filter(|&&l| l == class).count();
                    let in_fold = (0..y.len())
                        .filter(|&i| assignment[i] == f && y[i] == class)
                        .count();
                    let ideal = class_total as f64 / 5.0;
                    assert!(
                        (in_fold as f64 - ideal).abs() <= 1.0,
                        "fold {f} class {class}: {in_fold} vs ideal {ideal}"
                    );
                }
            }
        }
    }

    #[test]
    fn too_few_samples_per_class_rejected() {
        let y = vec![0, 0, 0, 0, 1, 1];
        assert!(stratified_fold_assignments(&y, 3, 1, 0).is_err());
        assert!(stratified_fold_assignments(&y, 1, 1, 0).is_err());
    }

    #[test]
    fn report_is_deterministic() {
        let ds = super::super::tests::blobs(20, 1.5, 7);
        let spec = ClassifierSpec::RandomForest {
            n_trees_grid: vec![10, 25],
            max_depth_grid: vec![Some(2), Some(4)],
        };
        let a = cross_validate(&ds, &spec, 4, 2, 5).unwrap();
        let b = cross_validate(&ds, &spec, 4, 2, 5).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    /// Poisoning a held-out fold's labels must not change the
    /// hyperparameters chosen for that fold — grid search may only see
    /// the training samples.
    #[test]
    fn grid_search_never_sees_the_test_fold() {
        let ds = super::super::tests::blobs(20, 1.0, 13);
        let spec = ClassifierSpec::RandomForest {
            n_trees_grid: vec![5, 15],
            max_depth_grid: vec![Some(1), Some(3)],
        };
        let assignments = stratified_fold_assignments(&ds.y, 4, 1, 21).unwrap();
        let clean = cross_validate_with_folds(&ds, &spec, &assignments, 21).unwrap();

        for target_fold in 0..4 {
            let mut poisoned = ds.clone();
            for i in 0..poisoned.len() {
                if assignments[0][i] == target_fold {
                    poisoned.y[i] = 1 - poisoned.y[i];
                }
            }
            let dirty =
                cross_validate_with_folds(&poisoned, &spec, &assignments, 21).unwrap();
            assert_eq!(
                clean.fold_params[target_fold], dirty.fold_params[target_fold],
                "fold {target_fold} hyperparameters moved when its labels were poisoned"
            );
        }
    }

    #[test]
    fn quantiles_match_hand_computation() {
        let vals = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(quantile(&vals, 0.5), 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(quantile(&vals, 0.25), 1.75, epsilon = 1e-15);
        assert_abs_diff_eq!(quantile(&vals, 0.75), 3.25, epsilon = 1e-15);
        assert_abs_diff_eq!(quantile(&[7.0], 0.5), 7.0, epsilon = 1e-15);
    }

    #[test]
    fn modal_string_prefers_earliest_on_tie() {
        let items = vec!["b".to_string(), "a".to_string()];
        assert_eq!(modal_string(&items), "b");
        let items = vec!["a".to_string(), "b".to_string(), "b".to_string()];
        assert_eq!(modal_string(&items), "b");
    }
}
