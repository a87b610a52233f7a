//! Membership embeddings: fuse the top-p basis vectors into a single
//! heterogeneity image.
//!
//! Gaussian: eta = exp((beta - mu)/sigma), fused as sum_i beta_i .* eta_i.
//! Bell:     xi  = 1 / (1 + |(beta - mu)/sigma|^(2b)), fused likewise.
//! Weibull:  w(x) = b k x^(k-1) exp(-b x^k) with b = lambda^(-k) and
//!           w = 0 for x < 0; fused as sum_i w_i, without the elementwise
//!           product by beta_i that the other two use. Basis vectors are
//!           min-max rescaled to [0, 1] over the ROI before Weibull
//!           evaluation, since factorization bases carry arbitrary sign
//!           and scale and the density lives on x >= 0.
//!
//! mu and sigma are per-basis-vector statistics over ROI pixels.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqio::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Gaussian,
    Bell,
    Weibull,
}

impl EmbeddingKind {
    pub const ALL: [EmbeddingKind; 3] =
        [EmbeddingKind::Gaussian, EmbeddingKind::Bell, EmbeddingKind::Weibull];

    pub fn name(&self) -> &'static str {
        match self {
            EmbeddingKind::Gaussian => "gaussian",
            EmbeddingKind::Bell => "bell",
            EmbeddingKind::Weibull => "weibull",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbeddingParams {
    pub kind: EmbeddingKind,
    /// Bell exponent coefficient.
    pub bell_b: f64,
    /// Weibull shape.
    pub weibull_k: f64,
    /// Weibull scale parameter lambda; the density scale is
    /// b = lambda^(-k), always derived.
    pub weibull_lambda: f64,
    /// Number of basis vectors to fuse.
    pub p: usize,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            kind: EmbeddingKind::Weibull,
            bell_b: 1.0,
            weibull_k: 2.0,
            weibull_lambda: 1.0,
            p: 5,
        }
    }
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        if self.bell_b <= 0.0 {
            return Err(Error::EmbeddingParams("bell_b must be > 0".into()));
        }
        if self.weibull_k <= 0.0 || self.weibull_lambda <= 0.0 {
            return Err(Error::EmbeddingParams(
                "weibull shape and scale must be > 0".into(),
            ));
        }
        if self.p == 0 {
            return Err(Error::EmbeddingParams("p must be >= 1".into()));
        }
        Ok(())
    }

    /// Derived Weibull density scale b = lambda^(-k).
    pub fn weibull_b(&self) -> f64 {
        self.weibull_lambda.powf(-self.weibull_k)
    }
}

/// Mean / standard deviation of a basis vector over ROI pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiStats {
    pub mu: f64,
    pub sigma: f64,
}

impl RoiStats {
    /// Population statistics of `values`.
    pub fn from_values(values: &[f64]) -> RoiStats {
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        RoiStats {
            mu,
            sigma: var.sqrt(),
        }
    }
}

/// Fused heterogeneity map, zero outside the ROI.
#[derive(Debug, Clone)]
pub struct EmbeddedImage {
    pub values: DMatrix<f64>,
    pub kind: EmbeddingKind,
    pub params: EmbeddingParams,
}

/// Gaussian membership eta = exp((beta - mu)/sigma); a constant vector
/// (sigma = 0) maps to the neutral membership 1.
pub fn gaussian_membership(beta: &DVector<f64>, stats: RoiStats) -> DVector<f64> {
    if stats.sigma == 0.0 {
        return DVector::from_element(beta.len(), 1.0);
    }
    beta.map(|v| ((v - stats.mu) / stats.sigma).exp())
}

/// Bell membership xi = 1 / (1 + |(beta - mu)/sigma|^(2b)).
pub fn bell_membership(beta: &DVector<f64>, stats: RoiStats, b: f64) -> DVector<f64> {
    if stats.sigma == 0.0 {
        return DVector::from_element(beta.len(), 1.0);
    }
    beta.map(|v| {
        let z = ((v - stats.mu) / stats.sigma).abs();
        1.0 / (1.0 + z.powf(2.0 * b))
    })
}

/// Weibull density membership for pre-rescaled values:
/// w(x) = b k x^(k-1) exp(-b x^k) for x >= 0, else 0.
pub fn weibull_membership(beta: &DVector<f64>, params: &EmbeddingParams) -> Result<DVector<f64>> {
    params.validate()?;
    let k = params.weibull_k;
    let b = params.weibull_b();
    Ok(beta.map(|x| weibull_density(x, k, b)))
}

#[inline]
pub fn weibull_density(x: f64, k: f64, b: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    // 0^0 = 1 so k = 1 reduces to the exponential density b*exp(-b*x).
    b * k * x.powf(k - 1.0) * (-b * x.powf(k)).exp()
}

/// Fuse the first `params.p` columns of the basis into one image over
/// the ROI; pixels outside the ROI are exactly zero.
pub fn embed(basis: &DMatrix<f64>, roi: &Mask, params: &EmbeddingParams) -> Result<EmbeddedImage> {
    params.validate()?;
    if basis.ncols() < params.p {
        return Err(Error::EmbeddingParams(format!(
            "basis has {} columns, need {}",
            basis.ncols(),
            params.p
        )));
    }
    let (m, n) = (roi.rows, roi.cols);
    if basis.nrows() != m * n {
        return Err(Error::EmbeddingParams(format!(
            "basis rows {} != {}x{} pixels",
            basis.nrows(),
            m,
            n
        )));
    }
    let roi_px = roi.indices();
    if roi_px.is_empty() {
        return Err(Error::EmbeddingParams("roi is empty".into()));
    }

    let mut fused = DVector::zeros(m * n);
    for i in 0..params.p {
        let beta = basis.column(i).into_owned();
        let roi_vals: Vec<f64> = roi_px.iter().map(|&(r, c)| beta[r * n + c]).collect();
        match params.kind {
            EmbeddingKind::Gaussian => {
                let stats = RoiStats::from_values(&roi_vals);
                let eta = gaussian_membership(&beta, stats);
                fused += beta.component_mul(&eta);
            }
            EmbeddingKind::Bell => {
                let stats = RoiStats::from_values(&roi_vals);
                let xi = bell_membership(&beta, stats, params.bell_b);
                fused += beta.component_mul(&xi);
            }
            EmbeddingKind::Weibull => {
                let rescaled = rescale_over_roi(&beta, &roi_vals);
                // Memberships are summed directly, with no elementwise
                // product by beta.
                fused += weibull_membership(&rescaled, params)?;
            }
        }
    }

    let mut values = DMatrix::zeros(m, n);
    for &(r, c) in &roi_px {
        values[(r, c)] = fused[r * n + c];
    }
    Ok(EmbeddedImage {
        values,
        kind: params.kind,
        params: params.clone(),
    })
}

/// Min-max rescale a basis vector to [0, 1] using the ROI extremes; a
/// constant vector maps to all zeros.
fn rescale_over_roi(beta: &DVector<f64>, roi_vals: &[f64]) -> DVector<f64> {
    let lo = roi_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = roi_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        return DVector::zeros(beta.len());
    }
    beta.map(|v| (v - lo) / range)
}

/// Write the image as CSV (one row per pixel row).
pub fn write_csv(img: &EmbeddedImage, path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in 0..img.values.nrows() {
        let row: Vec<String> = (0..img.values.ncols())
            .map(|c| format!("{}", img.values[(r, c)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write the image as a 16-bit grayscale PGM, min-max mapped to
/// [0, 65535] inside the ROI, plus a JSON sidecar recording the mapping.
pub fn write_pgm(img: &EmbeddedImage, roi: &Mask, path: &Path) -> Result<()> {
    let px = roi.indices();
    let vals: Vec<f64> = px.iter().map(|&(r, c)| img.values[(r, c)]).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };

    let (m, n) = (img.values.nrows(), img.values.ncols());
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "P5")?;
    writeln!(file, "{n} {m}")?;
    writeln!(file, "65535")?;
    for r in 0..m {
        for c in 0..n {
            let v = if roi.get(r, c) {
                (((img.values[(r, c)] - lo) / range) * 65535.0).round() as u16
            } else {
                0
            };
            file.write_all(&v.to_be_bytes())?;
        }
    }
    file.flush()?;

    let sidecar = serde_json::json!({
        "min": lo,
        "max": hi,
        "levels": 65535,
        "kind": img.kind.name(),
    });
    let sidecar_path = path.with_extension("json");
    std::fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}
