//! Low-rank decompositions of the heat matrix, X ~ B * A.
//!
//! All methods share [`FactorizeConfig`] and return a
//! [`FactorizationResult`] with the basis B ((M*N) x p), coefficients A
//! (p x tau), and a per-iteration objective trace. Update rules are the
//! canonical published schemes: thin SVD for PCT, candid covariance-free
//! incremental PCA, penalized matrix decomposition for sparse PCT,
//! Lee-Seung multiplicative updates for NMF, and Ding-style updates for
//! the semi/convex variants. Deep semi-NMF greedily pretrains each layer
//! and then fine-tunes all of them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqio::HeatMatrix;

/// Guard added to multiplicative-update denominators.
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pct,
    Ccipct,
    SparsePct,
    Nmf,
    SparseNmf,
    SemiNmf,
    ConvexNmf,
    DeepSemiNmf,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Pct,
        Method::Ccipct,
        Method::SparsePct,
        Method::Nmf,
        Method::SparseNmf,
        Method::SemiNmf,
        Method::ConvexNmf,
        Method::DeepSemiNmf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Pct => "pct",
            Method::Ccipct => "ccipct",
            Method::SparsePct => "sparse_pct",
            Method::Nmf => "nmf",
            Method::SparseNmf => "sparse_nmf",
            Method::SemiNmf => "semi_nmf",
            Method::ConvexNmf => "convex_nmf",
            Method::DeepSemiNmf => "deep_semi_nmf",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FactorizeConfig {
    /// Target rank.
    pub p: usize,
    pub max_iters: usize,
    /// Relative objective-change stopping threshold.
    pub tol: f64,
    /// L1 level for the sparse variants.
    pub l1_penalty: f64,
    /// Layer widths for deep semi-NMF; must be strictly decreasing and
    /// end at `p`.
    pub layer_dims: Vec<usize>,
    /// Amnesic parameter for the incremental method.
    pub amnesic: f64,
    pub seed: u64,
}

impl Default for FactorizeConfig {
    fn default() -> Self {
        FactorizeConfig {
            p: 5,
            max_iters: 500,
            tol: 1e-6,
            // Normalized sequences live in [0, 1]; a penalty much above
            // this zeroes the deflated trailing components outright.
            l1_penalty: 0.01,
            layer_dims: vec![12, 5],
            amnesic: 2.0,
            seed: 0,
        }
    }
}

impl FactorizeConfig {
    pub fn validate(&self, tau: usize) -> Result<()> {
        if self.p == 0 {
            return Err(Error::FactorizeConfig("p must be >= 1".into()));
        }
        if self.p > tau {
            return Err(Error::RankTooLarge { p: self.p, tau });
        }
        if self.max_iters == 0 {
            return Err(Error::FactorizeConfig("max_iters must be >= 1".into()));
        }
        if self.l1_penalty < 0.0 {
            return Err(Error::FactorizeConfig("l1_penalty must be >= 0".into()));
        }
        if self.amnesic < 0.0 {
            return Err(Error::FactorizeConfig("amnesic must be >= 0".into()));
        }
        Ok(())
    }

    fn validate_layers(&self) -> Result<()> {
        if self.layer_dims.is_empty() {
            return Err(Error::FactorizeConfig("layer_dims empty".into()));
        }
        if *self.layer_dims.last().unwrap() != self.p {
            return Err(Error::FactorizeConfig(format!(
                "layer_dims must end at p={}, got {:?}",
                self.p, self.layer_dims
            )));
        }
        if self.layer_dims.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::FactorizeConfig(format!(
                "layer_dims must be strictly decreasing, got {:?}",
                self.layer_dims
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FactorizationResult {
    /// (M*N) x p basis matrix, basis vectors as columns.
    pub basis: DMatrix<f64>,
    /// p x tau coefficient matrix.
    pub coeffs: DMatrix<f64>,
    /// Non-increasing singular values; populated by the SVD route, empty
    /// for iterative methods.
    pub singular_values: Vec<f64>,
    /// Per-iteration value of the method's own objective.
    pub objective_trace: Vec<f64>,
    pub method: Method,
    pub iterations_run: usize,
    /// Convex NMF mixing weights (basis = X * W), when applicable.
    pub mixing: Option<DMatrix<f64>>,
}

impl FactorizationResult {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.basis * &self.coeffs
    }

    /// Leading basis vector (first column of B).
    pub fn leading_basis(&self) -> DVector<f64> {
        self.basis.column(0).into_owned()
    }
}

/// Relative Frobenius reconstruction error ||X - B*A||_F / ||X||_F.
pub fn reconstruction_error(x: &HeatMatrix, result: &FactorizationResult) -> Result<f64> {
    let norm = x.data.norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((&x.data - result.reconstruct()).norm() / norm)
}

/// Principal component thermography: thin SVD of X via the tau x tau
/// Gram matrix, keeping the leading p components.
pub fn pct(x: &HeatMatrix, cfg: &FactorizeConfig) -> Result<FactorizationResult> {
    cfg.validate(x.frames())?;
    let tau = x.frames();
    let gram = x.data.tr_mul(&x.data); // X^T X, tau x tau
    let (eigvals, eigvecs) = sym_eig_desc(&gram);
    let singular_values: Vec<f64> = eigvals.iter().map(|&l| l.max(0.0).sqrt()).collect();

    let mut basis = DMatrix::zeros(x.pixels(), cfg.p);
    let mut coeffs = DMatrix::zeros(cfg.p, tau);
    for k in 0..cfg.p {
        let sigma = singular_values[k];
        let v = eigvecs.column(k).into_owned();
        let mut u = if sigma > 1e-300 {
            (&x.data * &v) / sigma
        } else {
            DVector::zeros(x.pixels())
        };
        let mut vk = v;
        let flip = sign_of_largest(&u);
        if flip < 0.0 {
            u.neg_mut();
            vk.neg_mut();
        }
        basis.set_column(k, &u);
        for t in 0..tau {
            coeffs[(k, t)] = sigma * vk[t];
        }
    }

    let objective = (&x.data - &basis * &coeffs).norm();
    Ok(FactorizationResult {
        basis,
        coeffs,
        singular_values,
        objective_trace: vec![objective],
        method: Method::Pct,
        iterations_run: 1,
        mixing: None,
    })
}

/// Candid covariance-free incremental PCA. Columns of X are streamed
/// repeatedly (epochs) and each candidate eigenvector is updated with
/// the amnesic rule
/// `v <- ((n-1-l)/n) v + ((1+l)/n) x (x^T v)/||v||`,
/// deflating the sample by previously found components.
pub fn ccipct(x: &HeatMatrix, cfg: &FactorizeConfig) -> Result<FactorizationResult> {
    cfg.validate(x.frames())?;
    let tau = x.frames();
    let pixels = x.pixels();
    let ell = cfg.amnesic;

    let mut vs: Vec<Option<DVector<f64>>> = vec![None; cfg.p];
    let mut n: f64 = 0.0;
    let mut trace = Vec::new();
    let mut prev_obj = f64::INFINITY;
    let mut epochs = 0;

    for _epoch in 0..cfg.max_iters {
        epochs += 1;
        for t in 0..tau {
            n += 1.0;
            let mut xk = x.data.column(t).into_owned();
            for slot in vs.iter_mut() {
                match slot {
                    None => {
                        if xk.norm() > 0.0 {
                            *slot = Some(xk.clone());
                        }
                        break;
                    }
                    Some(v) => {
                        let vnorm = v.norm();
                        if vnorm > 0.0 {
                            let proj = xk.dot(v) / vnorm;
                            *v = v.clone() * ((n - 1.0 - ell) / n) + &xk * (proj * (1.0 + ell) / n);
                        }
                        let vn = v.norm();
                        if vn > 0.0 {
                            let u = v.clone() / vn;
                            let coef = xk.dot(&u);
                            xk -= u * coef;
                        }
                    }
                }
            }
        }

        let basis = normalized_basis(&vs, pixels, cfg.p);
        let coeffs = basis.tr_mul(&x.data);
        let obj = (&x.data - &basis * &coeffs).norm();
        trace.push(obj);
        if prev_obj.is_finite() {
            let rel = (prev_obj - obj).abs() / prev_obj.max(EPS);
            if rel < cfg.tol {
                break;
            }
        }
        prev_obj = obj;
    }

    let mut basis = normalized_basis(&vs, pixels, cfg.p);
    for k in 0..cfg.p {
        let mut col = basis.column(k).into_owned();
        if sign_of_largest(&col) < 0.0 {
            col.neg_mut();
            basis.set_column(k, &col);
        }
    }
    let coeffs = basis.tr_mul(&x.data);
    Ok(FactorizationResult {
        basis,
        coeffs,
        singular_values: Vec::new(),
        objective_trace: trace,
        method: Method::Ccipct,
        iterations_run: epochs,
        mixing: None,
    })
}

fn normalized_basis(vs: &[Option<DVector<f64>>], pixels: usize, p: usize) -> DMatrix<f64> {
    let mut basis = DMatrix::zeros(pixels, p);
    for (k, slot) in vs.iter().enumerate() {
        if let Some(v) = slot {
            let norm = v.norm();
            if norm > 0.0 {
                basis.set_column(k, &(v / norm));
            }
        }
    }
    basis
}

/// Sparse PCT via penalized matrix decomposition: rank-one alternating
/// power steps with soft-thresholding of the basis vector, deflating X
/// between components. Basis columns have unit norm.
pub fn sparse_pct(x: &HeatMatrix, cfg: &FactorizeConfig) -> Result<FactorizationResult> {
    cfg.validate(x.frames())?;
    let tau = x.frames();
    let mut deflated = x.data.clone();
    let mut basis = DMatrix::zeros(x.pixels(), cfg.p);
    let mut coeffs = DMatrix::zeros(cfg.p, tau);
    let mut trace = Vec::new();
    let mut total_iters = 0;

    for k in 0..cfg.p {
        // Deterministic start: power iterations on the Gram matrix.
        let gram = deflated.tr_mul(&deflated);
        let mut v = DVector::from_element(tau, 1.0 / (tau as f64).sqrt());
        for _ in 0..30 {
            let w = &gram * &v;
            let n = w.norm();
            if n == 0.0 {
                break;
            }
            v = w / n;
        }

        let mut u = DVector::zeros(x.pixels());
        for iter in 0..cfg.max_iters {
            total_iters += 1;
            let mut u_raw = &deflated * &v;
            u_raw.apply(|e| *e = soft_threshold(*e, cfg.l1_penalty));
            let un = u_raw.norm();
            if un == 0.0 {
                return Err(Error::AllZeroBasis);
            }
            let u_new = u_raw / un;
            let vt = deflated.tr_mul(&u_new);
            let vn = vt.norm();
            let v_new = if vn > 0.0 { vt / vn } else { v.clone() };
            let delta = (&u_new - &u).norm();
            u = u_new;
            v = v_new;
            if iter > 0 && delta < cfg.tol {
                break;
            }
        }

        let mut d = u.dot(&(&deflated * &v));
        if sign_of_largest(&u) < 0.0 {
            u.neg_mut();
            v.neg_mut();
            // d = u^T X v is invariant under the joint flip.
        }
        if d < 0.0 {
            v.neg_mut();
            d = -d;
        }
        basis.set_column(k, &u);
        for t in 0..tau {
            coeffs[(k, t)] = d * v[t];
        }
        deflated -= (&u * v.transpose()) * d;
        trace.push((&x.data - &basis * &coeffs).norm());
    }

    Ok(FactorizationResult {
        basis,
        coeffs,
        singular_values: Vec::new(),
        objective_trace: trace,
        method: Method::SparsePct,
        iterations_run: total_iters,
        mixing: None,
    })
}

/// Standard multiplicative-update NMF (Frobenius objective, B and A
/// non-negative).
pub fn nmf(x: &HeatMatrix, cfg: &FactorizeConfig) -> Result<FactorizationResult> {
    nmf_inner(x, cfg, 0.0, Method::Nmf)
}

/// NMF with an extra l1 penalty on the coefficients; the penalty enters
/// the A-update denominator. The recorded objective is the penalized one.
pub fn sparse_nmf(x: &HeatMatrix, cfg: &FactorizeConfig) -> Result<FactorizationResult> {
    nmf_inner(x, cfg, cfg.l1_penalty, Method::SparseNmf)
}

fn nmf_inner(
    x: &HeatMatrix,
    cfg: &FactorizeConfig,
    l1: f64,
    method: Method,
) -> Result<FactorizationResult> {
    cfg.validate(x.frames())?;
    if x.data.iter().any(|&v| v < 0.0) {
        return Err(Error::NegativeInput);
    }
    let tau = x.frames();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut b = DMatrix::from_fn(x.pixels(), cfg.p, |_, _| rng.gen::<f64>());
    let mut a = DMatrix::from_fn(cfg.p, tau, |_, _| rng.gen::<f64>());

    let objective = |b: &DMatrix<f64>, a: &DMatrix<f64>| -> f64 {
        let fro = fro_sq_compensated(&(&x.data - b * a));
        fro + l1 * a.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut prev = objective(&b, &a);
    let mut iters = 0;
    for _ in 0..cfg.max_iters {
        iters += 1;
        // A <- A .* (B^T X) ./ (B^T B A + l1 + eps)
        let num_a = b.tr_mul(&x.data);
        let den_a = b.tr_mul(&b) * &a;
        for i in 0..cfg.p {
            for j in 0..tau {
                a[(i, j)] *= num_a[(i, j)] / (den_a[(i, j)] + l1 + EPS);
            }
        }
        // B <- B .* (X A^T) ./ (B A A^T + eps)
        let num_b = &x.data * a.transpose();
        let den_b = &b * (&a * a.transpose());
        for i in 0..x.pixels() {
            for j in 0..cfg.p {
                b[(i, j)] *= num_b[(i, j)] / (den_b[(i, j)] + EPS);
            }
        }
        let obj = objective(&b, &a);
        trace.push(obj);
        let rel = (prev - obj).abs() / prev.max(EPS);
        prev = obj;
        if rel < cfg.tol {
            break;
        }
    }

    Ok(FactorizationResult {
        basis: b,
        coeffs: a,
        singular_values: Vec::new(),
        objective_trace: trace,
        method,
        iterations_run: iters,
        mixing: None,
    })
}

/// Semi-NMF: unconstrained basis solved by least squares, non-negative
/// coefficients updated multiplicatively (Ding et al. scheme).
pub fn semi_nmf(x: &HeatMatrix, cfg: &FactorizeConfig) -> Result<FactorizationResult> {
    cfg.validate(x.frames())?;
    let (b, a, trace, iters) = semi_nmf_core(&x.data, cfg.p, cfg.max_iters, cfg.tol, cfg.seed)?;
    Ok(FactorizationResult {
        basis: b,
        coeffs: a,
        singular_values: Vec::new(),
        objective_trace: trace,
        method: Method::SemiNmf,
        iterations_run: iters,
        mixing: None,
    })
}

/// Core semi-NMF loop on an arbitrary matrix; returns (B, A, trace, iters)
/// with X ~ B * A and A >= 0.
fn semi_nmf_core(
    x: &DMatrix<f64>,
    p: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>, usize)> {
    let tau = x.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A seeded non-negative, B from least squares against it.
    let mut a = DMatrix::from_fn(p, tau, |_, _| rng.gen::<f64>() + 0.1);
    let mut b = least_squares_basis(x, &a);

    let mut trace = Vec::with_capacity(max_iters);
    let mut prev = (x - &b * &a).norm();
    let mut iters = 0;
    for _ in 0..max_iters {
        iters += 1;
        b = least_squares_basis(x, &a);
        semi_nmf_coeff_update(x, &b, &mut a);
        let obj = (x - &b * &a).norm();
        trace.push(obj);
        let rel = (prev - obj).abs() / prev.max(EPS);
        prev = obj;
        if rel < tol {
            break;
        }
    }
    Ok((b, a, trace, iters))
}

/// B = X A^T (A A^T)^+.
fn least_squares_basis(x: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let aat = a * a.transpose();
    let pinv = pseudo_inverse(&aat);
    x * a.transpose() * pinv
}

/// Multiplicative update of A (>= 0) for X ~ B A with B free:
/// A <- A .* sqrt( ((B^T X)^+ + (B^T B)^- A) ./ ((B^T X)^- + (B^T B)^+ A) ).
fn semi_nmf_coeff_update(x: &DMatrix<f64>, b: &DMatrix<f64>, a: &mut DMatrix<f64>) {
    let btx = b.tr_mul(x);
    let btb = b.tr_mul(b);
    let (btx_p, btx_n) = split_signs(&btx);
    let (btb_p, btb_n) = split_signs(&btb);
    let num = &btx_p + &btb_n * &*a;
    let den = &btx_n + &btb_p * &*a;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            a[(i, j)] *= (num[(i, j)] / (den[(i, j)] + EPS)).sqrt();
        }
    }
}

/// Convex NMF: basis constrained to B = X W with W >= 0 and A >= 0,
/// multiplicative updates on W and G = A^T (Ding et al.).
pub fn convex_nmf(x: &HeatMatrix, cfg: &FactorizeConfig) -> Result<FactorizationResult> {
    cfg.validate(x.frames())?;
    let tau = x.frames();
    let p = cfg.p;
    let y = x.data.tr_mul(&x.data); // tau x tau
    let (y_p, y_n) = split_signs(&y);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = DMatrix::from_fn(tau, p, |_, _| rng.gen::<f64>() + 0.1);
    let mut g = DMatrix::from_fn(tau, p, |_, _| rng.gen::<f64>() + 0.1);

    let objective = |w: &DMatrix<f64>, g: &DMatrix<f64>| -> f64 {
        fro_sq_compensated(&(&x.data - (&x.data * w) * g.transpose()))
    };

    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut prev = objective(&w, &g);
    let mut iters = 0;
    for _ in 0..cfg.max_iters {
        iters += 1;
        // G update.
        let num = &y_p * &w + &g * (w.tr_mul(&(&y_n * &w)));
        let den = &y_n * &w + &g * (w.tr_mul(&(&y_p * &w)));
        for i in 0..tau {
            for j in 0..p {
                g[(i, j)] *= (num[(i, j)] / (den[(i, j)] + EPS)).sqrt();
            }
        }
        // W update.
        let gtg = g.tr_mul(&g);
        let num = &y_p * &g + &y_n * &w * &gtg;
        let den = &y_n * &g + &y_p * &w * &gtg;
        for i in 0..tau {
            for j in 0..p {
                w[(i, j)] *= (num[(i, j)] / (den[(i, j)] + EPS)).sqrt();
            }
        }
        let obj = objective(&w, &g);
        trace.push(obj);
        let rel = (prev - obj).abs() / prev.max(EPS);
        prev = obj;
        if rel < cfg.tol {
            break;
        }
    }

    let basis = &x.data * &w;
    let coeffs = g.transpose();
    Ok(FactorizationResult {
        basis,
        coeffs,
        singular_values: Vec::new(),
        objective_trace: trace,
        method: Method::ConvexNmf,
        iterations_run: iters,
        mixing: Some(w),
    })
}

/// Deep semi-NMF: X ~ B1 B2 ... BL * AL, pretrained layer by layer as a
/// stack of semi-NMFs and then fine-tuned. The exposed basis is the
/// product B1...BL. A single layer degenerates to plain semi-NMF.
pub fn deep_semi_nmf(x: &HeatMatrix, cfg: &FactorizeConfig) -> Result<FactorizationResult> {
    cfg.validate(x.frames())?;
    cfg.validate_layers()?;

    if cfg.layer_dims.len() == 1 {
        let mut res = semi_nmf(x, cfg)?;
        res.method = Method::DeepSemiNmf;
        return Ok(res);
    }

    // Greedy pretraining.
    let mut bases: Vec<DMatrix<f64>> = Vec::with_capacity(cfg.layer_dims.len());
    let mut h = x.data.clone();
    let mut trace = Vec::new();
    for (idx, &dim) in cfg.layer_dims.iter().enumerate() {
        let (b, a, _, _) =
            semi_nmf_core(&h, dim, cfg.max_iters, cfg.tol, cfg.seed.wrapping_add(idx as u64))?;
        bases.push(b);
        h = a;
    }
    let mut coeffs = h; // AL >= 0 from the last semi-NMF

    let effective = |bases: &[DMatrix<f64>]| -> DMatrix<f64> {
        let mut psi = bases[0].clone();
        for b in &bases[1..] {
            psi = psi * b;
        }
        psi
    };
    trace.push((&x.data - effective(&bases) * &coeffs).norm());

    // Fine-tuning: each basis layer re-solved by least squares given the
    // others, then a multiplicative step on the top coefficients. Every
    // step minimizes (or never increases) the global objective.
    let num_layers = cfg.layer_dims.len();
    let mut prev = trace[0];
    let mut iters = 0;
    for _ in 0..cfg.max_iters {
        iters += 1;
        for i in 0..num_layers {
            // Psi = B1..B_{i-1}, Hi = B_{i+1}..BL * AL
            let mut left: Option<DMatrix<f64>> = None;
            for b in &bases[..i] {
                left = Some(match left {
                    Some(l) => l * b,
                    None => b.clone(),
                });
            }
            let mut right = coeffs.clone();
            for b in bases[i + 1..].iter().rev() {
                right = b * right;
            }
            let lhs = match &left {
                Some(l) => pseudo_inverse_tall(l) * &x.data,
                None => x.data.clone(),
            };
            bases[i] = lhs * pseudo_inverse_wide(&right);
        }
        let psi = effective(&bases);
        semi_nmf_coeff_update(&x.data, &psi, &mut coeffs);
        let obj = (&x.data - &psi * &coeffs).norm();
        trace.push(obj);
        let rel = (prev - obj).abs() / prev.max(EPS);
        prev = obj;
        if rel < cfg.tol {
            break;
        }
    }

    Ok(FactorizationResult {
        basis: effective(&bases),
        coeffs,
        singular_values: Vec::new(),
        objective_trace: trace,
        method: Method::DeepSemiNmf,
        iterations_run: iters,
        mixing: None,
    })
}

/// Dispatch helper used by the pipeline.
pub fn factorize(method: Method, x: &HeatMatrix, cfg: &FactorizeConfig) -> Result<FactorizationResult> {
    match method {
        Method::Pct => pct(x, cfg),
        Method::Ccipct => ccipct(x, cfg),
        Method::SparsePct => sparse_pct(x, cfg),
        Method::Nmf => nmf(x, cfg),
        Method::SparseNmf => sparse_nmf(x, cfg),
        Method::SemiNmf => semi_nmf(x, cfg),
        Method::ConvexNmf => convex_nmf(x, cfg),
        Method::DeepSemiNmf => deep_semi_nmf(x, cfg),
    }
}

// ---- shared numeric helpers ----

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
pub fn sym_eig_desc(mat: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(mat.clone());
    let n = mat.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

fn sign_of_largest(v: &DVector<f64>) -> f64 {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &e in v.iter() {
        if e.abs() > best {
            best = e.abs();
            sign = if e >= 0.0 { 1.0 } else { -1.0 };
        }
    }
    sign
}

fn soft_threshold(v: f64, level: f64) -> f64 {
    if v > level {
        v - level
    } else if v < -level {
        v + level
    } else {
        0.0
    }
}

/// Kahan-compensated squared Frobenius norm; keeps objective traces
/// accurate enough to check per-step monotonicity.
fn fro_sq_compensated(m: &DMatrix<f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in m.iter() {
        let term = v * v - comp;
        let t = sum + term;
        comp = (t - sum) - term;
        sum = t;
    }
    sum
}

fn split_signs(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let pos = m.map(|v| if v > 0.0 { v } else { 0.0 });
    let neg = m.map(|v| if v < 0.0 { -v } else { 0.0 });
    (pos, neg)
}

/// Moore-Penrose pseudo-inverse of a small square symmetric-ish matrix.
fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone()
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .expect("svd requested u and v_t")
}

/// Pseudo-inverse for a tall matrix (returns cols x rows).
fn pseudo_inverse_tall(m: &DMatrix<f64>) -> DMatrix<f64> {
    pseudo_inverse(m)
}

/// Pseudo-inverse for a wide matrix (returns cols x rows).
fn pseudo_inverse_wide(m: &DMatrix<f64>) -> DMatrix<f64> {
    pseudo_inverse(m)
}
