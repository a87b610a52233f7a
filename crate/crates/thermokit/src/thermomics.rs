//! Quantitative imaging features over the ROI and spectral reduction.
//!
//! The catalog is fixed at 32 features: 16 first-order statistics, 4
//! shape descriptors of the ROI mask, and 12 gray-level co-occurrence
//! statistics (6 stats x {mean, range} over the four symmetric offsets
//! (0,1), (1,0), (1,1), (1,-1)). Intensities are quantized uniformly
//! over the ROI min-max into `levels` bins; each co-occurrence matrix is
//! symmetrized and normalized to sum 1.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::embedding::EmbeddedImage;
use crate::error::{Error, Result};
use crate::seqio::Mask;

pub const FEATURE_COUNT: usize = 32;

/// Fixed, ordered feature identifiers.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "fo_mean",
    "fo_median",
    "fo_std",
    "fo_variance",
    "fo_skewness",
    "fo_kurtosis",
    "fo_min",
    "fo_max",
    "fo_range",
    "fo_p10",
    "fo_p90",
    "fo_iqr",
    "fo_energy",
    "fo_rms",
    "fo_entropy",
    "fo_uniformity",
    "shape_area",
    "shape_perimeter",
    "shape_compactness",
    "shape_elongation",
    "glcm_contrast_mean",
    "glcm_contrast_range",
    "glcm_dissimilarity_mean",
    "glcm_dissimilarity_range",
    "glcm_homogeneity_mean",
    "glcm_homogeneity_range",
    "glcm_asm_mean",
    "glcm_asm_range",
    "glcm_entropy_mean",
    "glcm_entropy_range",
    "glcm_correlation_mean",
    "glcm_correlation_range",
];

/// The four symmetric co-occurrence offsets (row delta, col delta).
pub const GLCM_OFFSETS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

#[derive(Debug, Clone, Serialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Embedding kind + factorization method tag.
    pub source: String,
}

#[derive(Debug, Clone)]
pub struct ReducedFeatures {
    /// n_samples x d reduced coordinates, columns ordered by Laplacian
    /// eigenvalue.
    pub matrix: DMatrix<f64>,
    pub graph_k: usize,
    /// Heat-kernel bandwidth actually used.
    pub sigma: f64,
}

/// Extract the 32-feature catalog from an embedded image over the ROI.
pub fn extract_features(
    img: &EmbeddedImage,
    roi: &Mask,
    levels: usize,
) -> Result<FeatureVector> {
    let px = roi.indices();
    if px.len() < 16 {
        return Err(Error::RoiTooSmall {
            got: px.len(),
            need: 16,
        });
    }
    if levels < 2 {
        return Err(Error::ClassifierConfig("levels must be >= 2".into()));
    }
    let vals: Vec<f64> = px.iter().map(|&(r, c)| img.values[(r, c)]).collect();

    let mut values = Vec::with_capacity(FEATURE_COUNT);
    values.extend(first_order(&vals, levels));
    values.extend(shape_features(roi));
    values.extend(glcm_features(&img.values, roi, levels));

    debug_assert_eq!(values.len(), FEATURE_COUNT);
    Ok(FeatureVector {
        names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
        source: img.kind.name().to_string(),
    })
}

fn first_order(vals: &[f64], levels: usize) -> Vec<f64> {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let m2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = vals.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let std = m2.sqrt();
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };

    let mut sorted = vals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min = sorted[0];
    let max = *sorted.last().unwrap();
    let median = percentile_sorted(&sorted, 50.0);
    let p10 = percentile_sorted(&sorted, 10.0);
    let p90 = percentile_sorted(&sorted, 90.0);
    let iqr = percentile_sorted(&sorted, 75.0) - percentile_sorted(&sorted, 25.0);

    let energy = vals.iter().map(|v| v * v).sum::<f64>();
    let rms = (energy / n).sqrt();

    let hist = histogram(vals, min, max, levels);
    let mut entropy = 0.0;
    let mut uniformity = 0.0;
    for &count in &hist {
        if count > 0 {
            let p = count as f64 / n;
            entropy -= p * p.log2();
            uniformity += p * p;
        }
    }

    vec![
        mean, median, std, m2, skewness, kurtosis, min, max, max - min, p10, p90, iqr, energy,
        rms, entropy, uniformity,
    ]
}

/// Linear-interpolation percentile of pre-sorted values.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn histogram(vals: &[f64], min: f64, max: f64, levels: usize) -> Vec<usize> {
    let mut hist = vec![0usize; levels];
    let range = max - min;
    for &v in vals {
        let bin = if range > 0.0 {
            (((v - min) / range) * levels as f64).floor() as usize
        } else {
            0
        };
        hist[bin.min(levels - 1)] += 1;
    }
    hist
}

/// Area, 4-connectivity boundary pixel count, compactness, and the
/// minor/major axis ratio from the mask's second moments.
fn shape_features(roi: &Mask) -> Vec<f64> {
    let px = roi.indices();
    let area = px.len() as f64;

    let mut perimeter = 0.0;
    for &(r, c) in &px {
        let boundary = [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
            .iter()
            .any(|&(dr, dc)| {
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                nr < 0
                    || nc < 0
                    || nr >= roi.rows as isize
                    || nc >= roi.cols as isize
                    || !roi.get(nr as usize, nc as usize)
            });
        if boundary {
            perimeter += 1.0;
        }
    }

    let compactness = if perimeter > 0.0 {
        4.0 * std::f64::consts::PI * area / (perimeter * perimeter)
    } else {
        0.0
    };

    // Second moments of the pixel coordinates.
    let mr = px.iter().map(|&(r, _)| r as f64).sum::<f64>() / area;
    let mc = px.iter().map(|&(_, c)| c as f64).sum::<f64>() / area;
    let mut srr = 0.0;
    let mut scc = 0.0;
    let mut src = 0.0;
    for &(r, c) in &px {
        let dr = r as f64 - mr;
        let dc = c as f64 - mc;
        srr += dr * dr;
        scc += dc * dc;
        src += dr * dc;
    }
    srr /= area;
    scc /= area;
    src /= area;
    // Eigenvalues of the 2x2 covariance of coordinates.
    let tr = srr + scc;
    let det = srr * scc - src * src;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l_major = tr / 2.0 + disc;
    let l_minor = (tr / 2.0 - disc).max(0.0);
    let elongation = if l_major > 0.0 {
        (l_minor / l_major).sqrt()
    } else {
        0.0
    };

    vec![area, perimeter, compactness, elongation]
}

/// Quantize ROI intensities into `levels` bins over the ROI min-max.
pub fn quantize_roi(img: &DMatrix<f64>, roi: &Mask, levels: usize) -> Vec<Vec<Option<usize>>> {
    let px = roi.indices();
    let vals: Vec<f64> = px.iter().map(|&(r, c)| img[(r, c)]).collect();
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let mut grid = vec![vec![None; roi.cols]; roi.rows];
    for &(r, c) in &px {
        let bin = if range > 0.0 {
            ((((img[(r, c)] - min) / range) * levels as f64).floor() as usize).min(levels - 1)
        } else {
            0
        };
        grid[r][c] = Some(bin);
    }
    grid
}

/// Symmetrized, normalized co-occurrence matrix for one offset. Only
/// pixel pairs entirely inside the ROI are counted. Returns None when
/// no pair exists for the offset.
pub fn cooccurrence_matrix(
    grid: &[Vec<Option<usize>>],
    levels: usize,
    offset: (isize, isize),
) -> Option<DMatrix<f64>> {
    let rows = grid.len() as isize;
    let cols = grid[0].len() as isize;
    let mut counts = DMatrix::<f64>::zeros(levels, levels);
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let Some(a) = grid[r as usize][c as usize] else {
                continue;
            };
            let nr = r + offset.0;
            let nc = c + offset.1;
            if nr < 0 || nc < 0 || nr >= rows || nc >= cols {
                continue;
            }
            let Some(b) = grid[nr as usize][nc as usize] else {
                continue;
            };
            counts[(a, b)] += 1.0;
            counts[(b, a)] += 1.0;
            total += 2.0;
        }
    }
    if total == 0.0 {
        return None;
    }
    Some(counts / total)
}

/// The six co-occurrence statistics of a normalized symmetric matrix.
pub fn glcm_stats(p: &DMatrix<f64>) -> [f64; 6] {
    let levels = p.nrows();
    let mut contrast = 0.0;
    let mut dissimilarity = 0.0;
    let mut homogeneity = 0.0;
    let mut asm = 0.0;
    let mut entropy = 0.0;
    let mut mean_i = 0.0;
    for i in 0..levels {
        for j in 0..levels {
            let v = p[(i, j)];
            let d = i as f64 - j as f64;
            contrast += v * d * d;
            dissimilarity += v * d.abs();
            homogeneity += v / (1.0 + d * d);
            asm += v * v;
            if v > 0.0 {
                entropy -= v * v.log2();
            }
            mean_i += v * i as f64;
        }
    }
    // Marginals are equal by symmetry.
    let mut var_i = 0.0;
    let mut cross = 0.0;
    for i in 0..levels {
        for j in 0..levels {
            let v = p[(i, j)];
            var_i += v * (i as f64 - mean_i).powi(2);
            cross += v * (i as f64 - mean_i) * (j as f64 - mean_i);
        }
    }
    let correlation = if var_i > 0.0 { cross / var_i } else { 0.0 };
    [contrast, dissimilarity, homogeneity, asm, entropy, correlation]
}

fn glcm_features(img: &DMatrix<f64>, roi: &Mask, levels: usize) -> Vec<f64> {
    let grid = quantize_roi(img, roi, levels);
    let mut per_offset: Vec<[f64; 6]> = Vec::with_capacity(4);
    for &offset in &GLCM_OFFSETS {
        match cooccurrence_matrix(&grid, levels, offset) {
            Some(p) => per_offset.push(glcm_stats(&p)),
            None => per_offset.push([0.0, 0.0, 1.0, 1.0, 0.0, 0.0]),
        }
    }
    let mut out = Vec::with_capacity(12);
    for s in 0..6 {
        let vals: Vec<f64> = per_offset.iter().map(|row| row[s]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let range = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(mean);
        out.push(range);
    }
    out
}

/// Laplacian-eigenmaps reduction of a feature matrix: columns are
/// standardized (constants dropped), a symmetric kNN graph with
/// heat-kernel weights is built, and the eigenvectors 2..d+1 of the
/// symmetric normalized Laplacian are returned scaled by inverse
/// square-root degree.
pub fn spectral_embed(features: &DMatrix<f64>, d: usize, k: usize) -> Result<ReducedFeatures> {
    let n = features.nrows();
    if d == 0 || d >= n {
        return Err(Error::SpectralEmbed(format!(
            "need 1 <= d < n_samples, got d={d}, n={n}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::SpectralEmbed(format!(
            "need 1 <= k < n_samples, got k={k}, n={n}"
        )));
    }

    // Standardize columns, dropping constants.
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..features.ncols() {
        let col = features.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if var > 1e-24 {
            let sd = var.sqrt();
            cols.push(DVector::from_fn(n, |i, _| (col[i] - mean) / sd));
        }
    }
    if cols.is_empty() {
        return Err(Error::SpectralEmbed("all feature columns constant".into()));
    }
    let z = DMatrix::from_columns(&cols);

    // k nearest neighbors per sample, symmetric union.
    let mut dist = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = (z.row(i) - z.row(j)).norm();
            dist[(i, j)] = dij;
            dist[(j, i)] = dij;
        }
    }
    let mut adj = vec![vec![false; n]; n];
    let mut knn_dists = Vec::new();
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            dist[(i, a)]
                .partial_cmp(&dist[(i, b)])
                .unwrap()
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k) {
            adj[i][j] = true;
            adj[j][i] = true;
            knn_dists.push(dist[(i, j)]);
        }
    }
    knn_dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sigma = {
        let m = knn_dists.len();
        let med = if m % 2 == 1 {
            knn_dists[m / 2]
        } else {
            0.5 * (knn_dists[m / 2 - 1] + knn_dists[m / 2])
        };
        if med > 0.0 {
            med
        } else {
            1.0
        }
    };

    // Connectivity check.
    let components = count_components(&adj);
    if components > 1 {
        return Err(Error::DisconnectedGraph { components });
    }

    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if adj[i][j] {
                let dij = dist[(i, j)];
                w[(i, j)] = (-dij * dij / (sigma * sigma)).exp();
            }
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let mut lap = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if w[(i, j)] > 0.0 {
                lap[(i, j)] -= w[(i, j)] / (degrees[i] * degrees[j]).sqrt();
            }
        }
    }
    // Symmetrize against rounding before the eigensolve.
    let lap = (&lap + lap.transpose()) * 0.5;

    let (_eigvals, vecs) = crate::factorize::sym_eig_desc(&lap);
    // Ascending order: smallest eigenvalue last after the descending sort.
    let mut matrix = DMatrix::zeros(n, d);
    for out_col in 0..d {
        // Skip the trivial constant eigenvector (smallest eigenvalue).
        let src = n - 2 - out_col;
        let mut col = vecs.column(src).into_owned();
        // Deterministic sign.
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &e in col.iter() {
            if e.abs() > best {
                best = e.abs();
                sign = if e >= 0.0 { 1.0 } else { -1.0 };
            }
        }
        col *= sign;
        for i in 0..n {
            matrix[(i, out_col)] = col[i] / degrees[i].sqrt();
        }
    }

    Ok(ReducedFeatures {
        matrix,
        graph_k: k,
        sigma,
    })
}

fn count_components(adj: &[Vec<bool>]) -> usize {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if adj[i][j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    components
}
