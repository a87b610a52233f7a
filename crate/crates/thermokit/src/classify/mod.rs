//! Diagnostic classifiers and their evaluation: random forest, k-nearest
//! neighbors, Gaussian naive Bayes, stratified cross-validation with
//! internal grid search, Cohen's kappa, and ROC/AUC.

mod cv;
mod forest;
mod metrics;

pub use cv::{
    cross_validate, cross_validate_with_folds, select_hyperparams, stratified_fold_assignments,
    ClassificationReport,
};
pub use forest::{DecisionTree, RandomForest, RfConfig};
pub use metrics::{cohen_kappa, roc_curve, Confusion};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary-labeled samples: healthy = 0, abnormal = 1.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// n x d feature matrix.
    pub x: DMatrix<f64>,
    pub y: Vec<u8>,
    pub ids: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<u8>, ids: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() || x.nrows() != ids.len() {
            return Err(Error::Dataset("row/label/id count mismatch".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dataset("non-finite feature value".into()));
        }
        if !y.iter().any(|&l| l == 0) || !y.iter().any(|&l| l == 1) {
            return Err(Error::Dataset("both classes must be present".into()));
        }
        if y.iter().any(|&l| l > 1) {
            return Err(Error::Dataset("labels must be 0 or 1".into()));
        }
        Ok(Dataset { x, y, ids })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Subset by sample indices, keeping order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.dims();
        let x = DMatrix::from_fn(indices.len(), d, |r, c| self.x[(indices[r], c)]);
        Dataset {
            x,
            y: indices.iter().map(|&i| self.y[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }
}

/// Classifier family plus its hyperparameter grid. Grid search runs
/// inside each training fold.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    RandomForest {
        n_trees_grid: Vec<usize>,
        /// None = unlimited depth.
        max_depth_grid: Vec<Option<usize>>,
    },
    Knn {
        k_grid: Vec<usize>,
    },
    NaiveBayes,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::RandomForest {
            n_trees_grid: vec![50, 100, 200],
            max_depth_grid: vec![Some(3), Some(5), Some(8), None],
        }
    }
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::RandomForest { .. } => "random_forest",
            ClassifierSpec::Knn { .. } => "knn",
            ClassifierSpec::NaiveBayes => "naive_bayes",
        }
    }

    /// Enumerate the grid cells in a stable order.
    pub fn grid(&self) -> Vec<HyperParams> {
        match self {
            ClassifierSpec::RandomForest {
                n_trees_grid,
                max_depth_grid,
            } => {
                let mut cells = Vec::new();
                for &n_trees in n_trees_grid {
                    for &max_depth in max_depth_grid {
                        cells.push(HyperParams::Rf { n_trees, max_depth });
                    }
                }
                cells
            }
            ClassifierSpec::Knn { k_grid } => {
                k_grid.iter().map(|&k| HyperParams::Knn { k }).collect()
            }
            ClassifierSpec::NaiveBayes => vec![HyperParams::Nb],
        }
    }
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HyperParams {
    Rf {
        n_trees: usize,
        max_depth: Option<usize>,
    },
    Knn {
        k: usize,
    },
    Nb,
}

impl HyperParams {
    pub fn describe(&self) -> String {
        match self {
            HyperParams::Rf { n_trees, max_depth } => match max_depth {
                Some(d) => format!("rf(n_trees={n_trees}, max_depth={d})"),
                None => format!("rf(n_trees={n_trees}, max_depth=none)"),
            },
            HyperParams::Knn { k } => format!("knn(k={k})"),
            HyperParams::Nb => "naive_bayes".to_string(),
        }
    }
}

/// A fitted model of any of the three families.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Forest(RandomForest),
    Knn(KnnModel),
    NaiveBayes(NbModel),
}

impl TrainedModel {
    /// Probability-like score for the abnormal class.
    pub fn score(&self, row: &[f64]) -> f64 {
        match self {
            TrainedModel::Forest(f) => f.vote_fraction(row),
            TrainedModel::Knn(k) => k.score(row),
            TrainedModel::NaiveBayes(nb) => nb.posterior(row),
        }
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        match self {
            TrainedModel::Knn(k) => k.predict(row),
            _ => u8::from(self.score(row) >= 0.5),
        }
    }
}

/// Train a model for one grid cell with a fixed seed.
pub fn train(ds: &Dataset, params: HyperParams, seed: u64) -> Result<TrainedModel> {
    match params {
        HyperParams::Rf { n_trees, max_depth } => {
            let cfg = RfConfig {
                n_trees,
                max_depth,
                seed,
            };
            Ok(TrainedModel::Forest(forest::train_random_forest(ds, &cfg)?))
        }
        HyperParams::Knn { k } => Ok(TrainedModel::Knn(train_knn(ds, k)?)),
        HyperParams::Nb => Ok(TrainedModel::NaiveBayes(train_naive_bayes(ds)?)),
    }
}

/// k-nearest-neighbor model: Euclidean distance, majority vote,
/// distance ties broken by lower sample index.
#[derive(Debug, Clone)]
pub struct KnnModel {
    x: DMatrix<f64>,
    y: Vec<u8>,
    pub k: usize,
}

pub fn train_knn(ds: &Dataset, k: usize) -> Result<KnnModel> {
    if k == 0 || k >= ds.len() {
        return Err(Error::ClassifierConfig(format!(
            "knn requires 1 <= k < n, got k={k}, n={}",
            ds.len()
        )));
    }
    Ok(KnnModel {
        x: ds.x.clone(),
        y: ds.y.clone(),
        k,
    })
}

impl KnnModel {
    fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let n = self.x.nrows();
        let mut order: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let d: f64 = (0..self.x.ncols())
                    .map(|j| (self.x[(i, j)] - row[j]).powi(2))
                    .sum();
                (d, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        order.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let nb = self.neighbors(row);
        nb.iter().filter(|&&i| self.y[i] == 1).count() as f64 / self.k as f64
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        let nb = self.neighbors(row);
        let ones = nb.iter().filter(|&&i| self.y[i] == 1).count();
        let zeros = self.k - ones;
        if ones > zeros {
            1
        } else if zeros > ones {
            0
        } else {
            // Even-k tie: defer to the single nearest neighbor.
            self.y[nb[0]]
        }
    }
}

/// Gaussian naive Bayes with a variance floor and log-likelihood scoring.
#[derive(Debug, Clone)]
pub struct NbModel {
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

const VAR_FLOOR: f64 = 1e-9;

pub fn train_naive_bayes(ds: &Dataset) -> Result<NbModel> {
    let d = ds.dims();
    let mut mean = [vec![0.0; d], vec![0.0; d]];
    let mut var = [vec![0.0; d], vec![0.0; d]];
    let mut count = [0usize; 2];
    for i in 0..ds.len() {
        let c = ds.y[i] as usize;
        count[c] += 1;
        for j in 0..d {
            mean[c][j] += ds.x[(i, j)];
        }
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(Error::Dataset("both classes must be present".into()));
    }
    for c in 0..2 {
        for j in 0..d {
            mean[c][j] /= count[c] as f64;
        }
    }
    for i in 0..ds.len() {
        let c = ds.y[i] as usize;
        for j in 0..d {
            var[c][j] += (ds.x[(i, j)] - mean[c][j]).powi(2);
        }
    }
    for c in 0..2 {
        for j in 0..d {
            var[c][j] = (var[c][j] / count[c] as f64).max(VAR_FLOOR);
        }
    }
    let n = ds.len() as f64;
    Ok(NbModel {
        log_prior: [
            (count[0] as f64 / n).ln(),
            (count[1] as f64 / n).ln(),
        ],
        mean,
        var,
    })
}

impl NbModel {
    fn log_likelihood(&self, row: &[f64], c: usize) -> f64 {
        let mut ll = self.log_prior[c];
        for (j, &v) in row.iter().enumerate() {
            let var = self.var[c][j];
            ll += -0.5 * ((v - self.mean[c][j]).powi(2) / var)
                - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
        }
        ll
    }

    /// Posterior probability of the abnormal class.
    pub fn posterior(&self, row: &[f64]) -> f64 {
        let l0 = self.log_likelihood(row, 0);
        let l1 = self.log_likelihood(row, 1);
        let m = l0.max(l1);
        let e0 = (l0 - m).exp();
        let e1 = (l1 - m).exp();
        e1 / (e0 + e1)
    }
}
