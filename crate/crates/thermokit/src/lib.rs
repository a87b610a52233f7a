//! Dynamic thermography analysis toolkit.
//!
//! The pipeline turns a sequence of thermal frames into a single
//! heterogeneity map and a cross-validated abnormality classifier:
//!
//! 1. [`seqio`] — ingest or synthesize sequences and stack them into a
//!    pixels-by-frames heat matrix.
//! 2. [`factorize`] — low-rank decompositions of the heat matrix
//!    (PCT/SVD, incremental PCA, sparse PCA, and the NMF family).
//! 3. [`jse`] — James-Stein shrinkage of the leading basis vector for
//!    the high-dimension / low-sample regime.
//! 4. [`embedding`] — fuse the top-p basis vectors into one image via
//!    Gaussian, Bell, or Weibull membership functions.
//! 5. [`thermomics`] — first-order, shape, and co-occurrence texture
//!    features over the ROI, reduced by Laplacian-eigenmap spectral
//!    embedding.
//! 6. [`classify`] — random forest, kNN, and Gaussian naive Bayes with
//!    stratified cross-validation, Cohen's kappa, and ROC/AUC.
//!
//! [`pipeline`] wires the stages together behind a JSON config; the
//! `thermokit` binary exposes it as `run` / `compare` / `phantom` /
//! `jse-mc` subcommands. See the crate examples for one runnable
//! program per stage.

pub mod classify;
pub mod embedding;
pub mod error;
pub mod factorize;
pub mod jse;
pub mod pipeline;
pub mod seqio;
pub mod thermomics;

pub use error::{Error, Result};
