//! Lewis-type bases of subspaces of `S_p^m`.
//!
//! A basis `T_1..T_k` is a Lewis basis when, with `M = sum_i T_i^T T_i`,
//!
//! ```text
//! trace[ (T_i^T T_j + T_j^T T_i)/2 * M^{p/2 - 1} ] = delta_ij .
//! ```
//!
//! It is obtained from a maximizer `B` of `det(A)` over `psi(A) = 1`, where
//! `psi(A) = trace[Lambda(A)^p]`, `Lambda(A) = (sum_j S_j(A)^T S_j(A))^{1/2}` and
//! `S_j(A) = sum_u a_ju W_u` for a fixed starting basis `W`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::matrix_io::MatrixJson;
use crate::random::{gaussian, gaussian_matrix, seeded, GeoRng};
use crate::spectral::{schatten_norm, singular_values, DenseMatrix, PsdMatrix};

/// Eigenvalue-gap guard: smallest nonzero eigenvalue of `Lambda^2` relative to
/// the largest.
const GAP_GUARD: f64 = 1e-10;
const MAX_RESTARTS: usize = 5;
const INIT_PERTURBATION: f64 = 1e-3;

/// Ordered, linearly independent `m x m` matrices spanning `X` in `S_p^m`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    p: f64,
    m: usize,
    elements: Vec<DenseMatrix>,
}

impl SubspaceBasis {
    pub fn new(p: f64, elements: Vec<DenseMatrix>) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(GeoError::InvalidExponent(format!(
                "p must lie in (0, inf), got {p}"
            )));
        }
        let first = elements
            .first()
            .ok_or_else(|| GeoError::DegenerateBasis("empty basis".into()))?;
        let m = first.nrows();
        if elements.iter().any(|w| w.shape() != (m, m)) {
            return Err(GeoError::DimensionMismatch(format!(
                "all basis elements must be {m}x{m}"
            )));
        }
        let k = elements.len();
        if k > m * m {
            return Err(GeoError::DegenerateBasis(format!(
                "{k} elements cannot be independent in dimension {}",
                m * m
            )));
        }
        let stacked = DenseMatrix::from_fn(k, m * m, |u, idx| elements[u][(idx / m, idx % m)]);
        let s = singular_values(&stacked)?;
        let (top, low) = (s[0], s[s.len() - 1]);
        if top == 0.0 || low < 1e-8 * top {
            return Err(GeoError::DegenerateBasis(format!(
                "stacked singular values {low:e} / {top:e}"
            )));
        }
        Ok(Self { p, m, elements })
    }

    /// Matrix units `E_11, ..., E_kk` in `S_p^k`: the diagonal copy of `l_p^k`.
    pub fn diagonal(k: usize, p: f64) -> Result<Self> {
        let elements = (0..k)
            .map(|i| {
                let mut e = DenseMatrix::zeros(k, k);
                e[(i, i)] = 1.0;
                e
            })
            .collect();
        Self::new(p, elements)
    }

    /// `k` Gaussian `m x m` matrices.
    pub fn random(k: usize, m: usize, p: f64, rng: &mut GeoRng) -> Result<Self> {
        Self::new(p, (0..k).map(|_| gaussian_matrix(m, rng)).collect())
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[DenseMatrix] {
        &self.elements
    }

    /// `sum_u c_u W_u`.
    pub fn combine(&self, coeffs: &[f64]) -> DenseMatrix {
        combine(&self.elements, coeffs)
    }

    /// Same elements, different exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(p, self.elements.clone())
    }
}

pub(crate) fn combine(elements: &[DenseMatrix], coeffs: &[f64]) -> DenseMatrix {
    let m = elements[0].nrows();
    let mut out = DenseMatrix::zeros(m, m);
    for (w, c) in elements.iter().zip(coeffs) {
        out += w * *c;
    }
    out
}

/// Least-squares coordinates of `a` in the span of `elements`, with the
/// Frobenius norm of the residual.
pub fn span_coordinates(elements: &[DenseMatrix], a: &DenseMatrix) -> Result<(DVector<f64>, f64)> {
    let m = elements[0].nrows();
    if a.shape() != (m, m) {
        return Err(GeoError::DimensionMismatch(format!(
            "expected {m}x{m}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let k = elements.len();
    let design = DenseMatrix::from_fn(m * m, k, |idx, u| elements[u][(idx / m, idx % m)]);
    let target = DVector::from_fn(m * m, |idx, _| a[(idx / m, idx % m)]);
    // Householder QR: nalgebra's SVD vectors lose accuracy near repeated
    // singular values, which shows up as a spurious residual.
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(GeoError::DegenerateBasis(
            "span elements are linearly dependent".into(),
        ));
    }
    let coords = r
        .solve_upper_triangular(&(qr.q().transpose() * &target))
        .ok_or_else(|| GeoError::DegenerateBasis("singular triangular factor".into()))?;
    let residual = (&design * &coords - target).norm();
    Ok((coords, residual))
}

/// The optimization variable `A = (a_ju)`, a `k x k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(pub DenseMatrix);

impl CoefficientMatrix {
    pub fn identity(k: usize) -> Self {
        Self(DenseMatrix::identity(k, k))
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }
}

fn check_coefficients(a: &CoefficientMatrix, basis: &SubspaceBasis) -> Result<()> {
    if a.0.shape() != (basis.k(), basis.k()) {
        return Err(GeoError::DimensionMismatch(format!(
            "coefficient matrix must be {k}x{k}",
            k = basis.k()
        )));
    }
    Ok(())
}

/// `S_j(A) = sum_u a_ju W_u` for every row `j`.
pub fn combinations(a: &CoefficientMatrix, basis: &SubspaceBasis) -> Vec<DenseMatrix> {
    let k = basis.k();
    (0..k)
        .map(|j| {
            let row: Vec<f64> = (0..k).map(|u| a.0[(j, u)]).collect();
            basis.combine(&row)
        })
        .collect()
}

/// `Lambda(A) = (sum_j S_j(A)^T S_j(A))^{1/2}`.
pub fn lambda_of(a: &CoefficientMatrix, basis: &SubspaceBasis) -> Result<PsdMatrix> {
    check_coefficients(a, basis)?;
    PsdMatrix::gram_root(&combinations(a, basis))
}

/// `psi(A) = trace[Lambda(A)^p]`.
pub fn psi(a: &CoefficientMatrix, basis: &SubspaceBasis) -> Result<f64> {
    Ok(lambda_of(a, basis)?.trace_power(basis.p()))
}

fn check_invertible(b: &DenseMatrix) -> Result<()> {
    let s = singular_values(b)?;
    let top = s.first().copied().unwrap_or(0.0);
    let low = s.last().copied().unwrap_or(0.0);
    if top == 0.0 || low <= 1e-12 * top {
        return Err(GeoError::SingularCoefficient);
    }
    Ok(())
}

fn grad_from_parts(
    combos: &[DenseMatrix],
    basis: &SubspaceBasis,
    lambda: &PsdMatrix,
) -> DenseMatrix {
    let p = basis.p();
    let k = basis.k();
    let weight = lambda.power(p - 2.0);
    let weighted: Vec<DenseMatrix> = combos.iter().map(|s| s * weight.matrix()).collect();
    DenseMatrix::from_fn(k, k, |u, t| p * weighted[u].dot(&basis.elements()[t]))
}

/// Gradient of `psi` at an invertible `B`:
/// `(p/2) trace[(S_u^T W_t + W_t^T S_u) Lambda^{p-2}]`, which by symmetry of
/// `Lambda` equals `p <S_u Lambda^{p-2}, W_t>_F`.
pub fn grad_psi(b: &CoefficientMatrix, basis: &SubspaceBasis) -> Result<DenseMatrix> {
    check_coefficients(b, basis)?;
    check_invertible(&b.0)?;
    let combos = combinations(b, basis);
    let lambda = PsdMatrix::gram_root(&combos)?;
    Ok(grad_from_parts(&combos, basis, &lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    FixedPoint,
    GradientAscent,
}

impl std::str::FromStr for SolverMode {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_point" => Ok(Self::FixedPoint),
            "gradient_ascent" => Ok(Self::GradientAscent),
            other => Err(GeoError::Parse(format!("unknown solver mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FixedPoint => "fixed_point",
            Self::GradientAscent => "gradient_ascent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub mode: SolverMode,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 10_000,
            mode: SolverMode::FixedPoint,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iters == 0 {
            return Err(GeoError::Parse(format!(
                "solver needs tol > 0 and max_iters >= 1, got tol = {}, max_iters = {}",
                self.tol, self.max_iters
            )));
        }
        Ok(())
    }
}

/// A solved Lewis basis with its normalization residuals.
#[derive(Debug, Clone)]
pub struct LewisCertificate {
    pub p: f64,
    /// `T_1..T_k`.
    pub basis: Vec<DenseMatrix>,
    /// `T = coefficients * W` row-wise; `det > 0`.
    pub coefficients: DenseMatrix,
    /// `M = sum_i T_i^T T_i`.
    pub m_matrix: PsdMatrix,
    pub gram_residual: f64,
    pub trace_residual: f64,
    pub iters: usize,
    pub mode: SolverMode,
    pub seed: u64,
}

impl LewisCertificate {
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn m(&self) -> usize {
        self.m_matrix.dim()
    }

    /// `sum_i a_i T_i`.
    pub fn element(&self, coeffs: &[f64]) -> DenseMatrix {
        combine(&self.basis, coeffs)
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            p: self.p,
            k: self.k(),
            m: self.m(),
            t: self.basis.iter().map(MatrixJson::from).collect(),
            m_matrix: MatrixJson::from(self.m_matrix.matrix()),
            gram_residual: self.gram_residual,
            trace_residual: self.trace_residual,
            iters: self.iters,
            mode: self.mode,
            seed: self.seed,
        }
    }

    /// Rebuilds a certificate from its serialized form. Residuals are taken
    /// as stored; run `certify_lewis` to re-derive them.
    pub fn from_json(j: &CertificateJson) -> Result<Self> {
        let basis: Vec<DenseMatrix> =
            j.t.iter()
                .map(DenseMatrix::try_from)
                .collect::<Result<_>>()?;
        let m_matrix = PsdMatrix::new(DenseMatrix::try_from(&j.m_matrix)?)?;
        if basis.len() != j.k || basis.iter().any(|t| t.shape() != (j.m, j.m)) {
            return Err(GeoError::Parse(
                "certificate dimensions are inconsistent".into(),
            ));
        }
        Ok(Self {
            p: j.p,
            coefficients: DenseMatrix::identity(j.k, j.k),
            basis,
            m_matrix,
            gram_residual: j.gram_residual,
            trace_residual: j.trace_residual,
            iters: j.iters,
            mode: j.mode,
            seed: j.seed,
        })
    }
}

/// Serialized certificate: `{p, k, m, T, M, gram_residual, trace_residual, iters, mode, seed}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateJson {
    pub p: f64,
    pub k: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub t: Vec<MatrixJson>,
    #[serde(rename = "M")]
    pub m_matrix: MatrixJson,
    pub gram_residual: f64,
    pub trace_residual: f64,
    pub iters: usize,
    pub mode: SolverMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LewisResiduals {
    pub gram_residual: f64,
    pub trace_residual: f64,
}

/// Recomputes `M` and both residuals directly from the stored `T_i`.
pub fn certify_lewis(cert: &LewisCertificate, p: f64) -> LewisResiduals {
    let ts = &cert.basis;
    let k = ts.len();
    let m = ts[0].nrows();
    let mut sum = DenseMatrix::zeros(m, m);
    for t in ts {
        sum += t.transpose() * t;
    }
    let sum = (&sum + sum.transpose()) * 0.5;
    let m_psd = match PsdMatrix::new(sum) {
        Ok(v) => v,
        Err(_) => {
            return LewisResiduals {
                gram_residual: f64::INFINITY,
                trace_residual: f64::INFINITY,
            }
        }
    };
    let weight = m_psd.power(p / 2.0 - 1.0);
    let mut gram_residual: f64 = 0.0;
    for i in 0..k {
        for j in i..k {
            let sym = (ts[i].transpose() * &ts[j] + ts[j].transpose() * &ts[i]) * 0.5;
            let g = (sym * weight.matrix()).trace();
            let target = if i == j { 1.0 } else { 0.0 };
            gram_residual = gram_residual.max((g - target).abs());
        }
    }
    let trace_residual = (m_psd.trace_power(p / 2.0) - k as f64).abs();
    LewisResiduals {
        gram_residual,
        trace_residual,
    }
}

/// Weighted Gram matrix `G_ij = trace[T_i^T T_j M^{p/2-1}]` with `M` given by
/// its square root.
fn lewis_gram(ts: &[DenseMatrix], root: &PsdMatrix, p: f64) -> DenseMatrix {
    let k = ts.len();
    let weight = root.power(p - 2.0);
    let weighted: Vec<DenseMatrix> = ts.iter().map(|t| t * weight.matrix()).collect();
    let mut g = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = 0.5 * (weighted[i].dot(&ts[j]) + weighted[j].dot(&ts[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

struct IterateState {
    ts: Vec<DenseMatrix>,
    root: PsdMatrix,
    gram: DenseMatrix,
    gram_residual: f64,
    trace_residual: f64,
}

impl IterateState {
    fn new(ts: Vec<DenseMatrix>, p: f64) -> Result<Self> {
        let root = PsdMatrix::gram_root(&ts)?;
        let gram = lewis_gram(&ts, &root, p);
        let k = ts.len();
        let gram_residual = (&gram - DenseMatrix::identity(k, k)).amax();
        let trace_residual = (root.trace_power(p) - k as f64).abs();
        Ok(Self {
            ts,
            root,
            gram,
            gram_residual,
            trace_residual,
        })
    }

    fn residual(&self) -> f64 {
        self.gram_residual.max(self.trace_residual)
    }

    fn gap_ok(&self) -> bool {
        match self.root.spectral_gap_ratio() {
            Some(r) => r * r >= GAP_GUARD,
            None => false,
        }
    }
}

fn perturbed_identity(k: usize, rng: &mut GeoRng) -> DenseMatrix {
    DenseMatrix::from_fn(k, k, |i, j| {
        let base = if i == j { 1.0 } else { 0.0 };
        base + INIT_PERTURBATION * gaussian(rng)
    })
}

enum Attempt {
    Solved(LewisCertificate),
    Restart { iters: usize, best: f64 },
    Exhausted { iters: usize, best: f64 },
}

/// Computes a Lewis basis of `span(basis)`.
///
/// Deterministic for a fixed `(basis, config.seed)`.
pub fn solve_lewis(basis: &SubspaceBasis, config: &SolverConfig) -> Result<LewisCertificate> {
    config.validate()?;
    let mut rng = seeded(config.seed);
    let mut total_iters = 0;
    let mut best = f64::INFINITY;
    for _ in 0..=MAX_RESTARTS {
        let start = perturbed_identity(basis.k(), &mut rng);
        let attempt = match config.mode {
            SolverMode::FixedPoint => fixed_point(basis, config, start)?,
            SolverMode::GradientAscent => gradient_ascent(basis, config, start)?,
        };
        match attempt {
            Attempt::Solved(mut cert) => {
                cert.iters += total_iters;
                return Ok(cert);
            }
            Attempt::Restart { iters, best: b } => {
                total_iters += iters;
                best = best.min(b);
            }
            Attempt::Exhausted { iters, best: b } => {
                return Err(GeoError::NoConvergence {
                    iters: total_iters + iters,
                    best_residual: best.min(b),
                })
            }
        }
    }
    Err(GeoError::NoConvergence {
        iters: total_iters,
        best_residual: best,
    })
}

fn finish(
    basis: &SubspaceBasis,
    config: &SolverConfig,
    state: IterateState,
    coefficients: DenseMatrix,
    iters: usize,
) -> LewisCertificate {
    let m_matrix = state.root.power(2.0);
    LewisCertificate {
        p: basis.p(),
        basis: state.ts,
        coefficients,
        m_matrix,
        gram_residual: state.gram_residual,
        trace_residual: state.trace_residual,
        iters,
        mode: config.mode,
        seed: config.seed,
    }
}

/// `T <- G^{-1/2} T`, the normalization identities read as a fixed point,
/// followed by the scalar rescale that makes `trace[M^{p/2}] = k`.
///
/// Without the rescale the overall scale contracts only by `|1 - p/2|` per
/// pass and oscillates for `p >= 4`.
fn fixed_point(
    basis: &SubspaceBasis,
    config: &SolverConfig,
    start: DenseMatrix,
) -> Result<Attempt> {
    let p = basis.p();
    let mut coeffs = start;
    let mut best = f64::INFINITY;
    let k = basis.k() as f64;
    for iter in 0..config.max_iters {
        let psi_val = psi(&CoefficientMatrix(coeffs.clone()), basis)?;
        if !(psi_val > 0.0 && psi_val.is_finite()) {
            return Ok(Attempt::Restart { iters: iter, best });
        }
        coeffs *= (k / psi_val).powf(1.0 / p);
        let ts = combinations(&CoefficientMatrix(coeffs.clone()), basis);
        let state = IterateState::new(ts, p)?;
        if !state.gap_ok() {
            return Ok(Attempt::Restart { iters: iter, best });
        }
        best = best.min(state.residual());
        if state.gram_residual <= config.tol && state.trace_residual <= config.tol {
            return Ok(Attempt::Solved(finish(basis, config, state, coeffs, iter)));
        }
        let g = PsdMatrix::new(state.gram.clone());
        let step = match g {
            Ok(g) if g.rank() == basis.k() => g.power(-0.5),
            _ => return Ok(Attempt::Restart { iters: iter, best }),
        };
        coeffs = step.matrix() * coeffs;
    }
    Ok(Attempt::Exhausted {
        iters: config.max_iters,
        best,
    })
}

/// Scale-free objective `log det A - (k/p) log psi(A)`; equals `log det A`
/// on the constraint surface `psi = 1`.
fn log_det_objective(a: &DenseMatrix, basis: &SubspaceBasis) -> Option<f64> {
    let det = a.determinant();
    if det.is_nan() || det <= 0.0 {
        return None;
    }
    let psi_val = psi(&CoefficientMatrix(a.clone()), basis).ok()?;
    if psi_val.is_nan() || psi_val <= 0.0 {
        return None;
    }
    Some(det.ln() - basis.k() as f64 / basis.p() * psi_val.ln())
}

fn normalize_to_constraint(a: DenseMatrix, basis: &SubspaceBasis) -> Result<DenseMatrix> {
    let psi_val = psi(&CoefficientMatrix(a.clone()), basis)?;
    Ok(a / psi_val.powf(1.0 / basis.p()))
}

/// Projected gradient ascent of `log det` on `psi = 1`.
///
/// The ascent direction is the Euclidean gradient of the scale-free objective
/// right-multiplied by `A^T A`, followed by Armijo backtracking (factor 0.5,
/// initial step 1.0) and a rescale back onto the constraint surface.
fn gradient_ascent(
    basis: &SubspaceBasis,
    config: &SolverConfig,
    start: DenseMatrix,
) -> Result<Attempt> {
    let p = basis.p();
    let k = basis.k() as f64;
    let mut a = normalize_to_constraint(start, basis)?;
    let mut best = f64::INFINITY;
    for iter in 0..config.max_iters {
        let coeff = CoefficientMatrix(a.clone());
        let combos = combinations(&coeff, basis);
        let lambda = PsdMatrix::gram_root(&combos)?;
        let psi_val = lambda.trace_power(p);
        // T_j = (lambda p / det B)^{1/p} S_j(B) where the multiplier satisfies
        // lambda p = k det(B) / psi(B) by homogeneity
        let scale = (k / psi_val).powf(1.0 / p);
        let ts: Vec<DenseMatrix> = combos.iter().map(|s| s * scale).collect();
        let state = IterateState::new(ts, p)?;
        if !state.gap_ok() {
            return Ok(Attempt::Restart { iters: iter, best });
        }
        best = best.min(state.residual());
        if state.gram_residual <= config.tol && state.trace_residual <= config.tol {
            return Ok(Attempt::Solved(finish(
                basis,
                config,
                state,
                &a * scale,
                iter,
            )));
        }
        let grad_psi = grad_from_parts(&combos, basis, &lambda);
        let inv_t = match a.clone().try_inverse() {
            Some(inv) => inv.transpose(),
            None => return Ok(Attempt::Restart { iters: iter, best }),
        };
        let grad = inv_t - grad_psi * (k / (p * psi_val));
        let direction = &grad * a.transpose() * &a;
        let slope = grad.dot(&direction);
        let f0 = log_det_objective(&a, basis).unwrap_or(f64::NEG_INFINITY);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &a + &direction * step;
            if let Some(f1) = log_det_objective(&trial, basis) {
                if f1 >= f0 + 1e-4 * step * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some(trial) => a = normalize_to_constraint(trial, basis)?,
            // no ascent possible at working precision
            None => return Ok(Attempt::Exhausted { iters: iter, best }),
        }
    }
    Ok(Attempt::Exhausted {
        iters: config.max_iters,
        best,
    })
}

/// `||W||_{S_p}` based closed form for one-dimensional subspaces.
pub fn rank_one_lewis(w: &DenseMatrix, p: f64) -> Result<DenseMatrix> {
    Ok(w / schatten_norm(w, p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, random_orthogonal};

    fn random_invertible(k: usize, rng: &mut GeoRng) -> CoefficientMatrix {
        loop {
            let b = gaussian_matrix(k, rng);
            if b.determinant().abs() > 0.1 {
                return CoefficientMatrix(b);
            }
        }
    }

    #[test]
    fn lambda_zero_and_rank_one() {
        let basis = SubspaceBasis::diagonal(2, 1.0).unwrap();
        let zero = CoefficientMatrix(DenseMatrix::zeros(2, 2));
        assert_eq!(lambda_of(&zero, &basis).unwrap().matrix().norm(), 0.0);
        assert_eq!(psi(&zero, &basis).unwrap(), 0.0);

        let w = DenseMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]));
        let basis = SubspaceBasis::new(1.5, vec![w.clone()]).unwrap();
        let l = lambda_of(&CoefficientMatrix::identity(1), &basis).unwrap();
        assert!((l.matrix() - &w).norm() < 1e-12);
    }

    #[test]
    fn lambda_squared_matches_double_sum() {
        let mut rng = seeded(21);
        let basis = SubspaceBasis::random(3, 4, 1.0, &mut rng).unwrap();
        let a = gaussian_matrix(3, &mut rng);
        let l = lambda_of(&CoefficientMatrix(a.clone()), &basis).unwrap();
        let mut oracle = DenseMatrix::zeros(4, 4);
        for j in 0..3 {
            for al in 0..3 {
                for be in 0..3 {
                    oracle += basis.elements()[al].transpose()
                        * &basis.elements()[be]
                        * (a[(j, al)] * a[(j, be)]);
                }
            }
        }
        let sq = l.matrix() * l.matrix();
        assert!((sq - oracle).norm() <= 1e-10 * (1.0 + l.matrix().norm().powi(2)));
    }

    #[test]
    fn psi_scalar_and_frobenius_oracles() {
        let mut rng = seeded(22);
        let w = gaussian_matrix(3, &mut rng);
        for p in [0.5, 1.0, 2.5] {
            let basis = SubspaceBasis::new(p, vec![w.clone()]).unwrap();
            let a = CoefficientMatrix(DenseMatrix::from_element(1, 1, -1.7));
            let c = schatten_norm(&w, p).unwrap();
            let expected = 1.7_f64.powf(p) * c.powf(p);
            assert!((psi(&a, &basis).unwrap() - expected).abs() <= 1e-10 * expected);
        }
        let basis = SubspaceBasis::random(3, 4, 2.0, &mut rng).unwrap();
        let a = CoefficientMatrix(gaussian_matrix(3, &mut rng));
        let oracle: f64 = combinations(&a, &basis)
            .iter()
            .map(|s| s.norm_squared())
            .sum();
        assert!((psi(&a, &basis).unwrap() - oracle).abs() <= 1e-10 * oracle);
    }

    #[test]
    fn psi_is_p_homogeneous() {
        let mut rng = seeded(23);
        for p in [0.7, 1.0, 1.5, 3.0] {
            let basis = SubspaceBasis::random(3, 4, p, &mut rng).unwrap();
            let a = CoefficientMatrix(gaussian_matrix(3, &mut rng));
            let base = psi(&a, &basis).unwrap();
            for c in [-2.0, 0.3, 5.0] {
                let scaled = psi(&CoefficientMatrix(&a.0 * c), &basis).unwrap();
                let expected = f64::abs(c).powf(p) * base;
                assert!((scaled - expected).abs() <= 1e-10 * expected);
            }
        }
    }

    #[test]
    fn grad_psi_matches_finite_differences() {
        let mut rng = seeded(24);
        for p in [1.0, 1.5, 3.0] {
            for _ in 0..5 {
                let basis = SubspaceBasis::random(3, 4, p, &mut rng).unwrap();
                let b = random_invertible(3, &mut rng);
                let g = grad_psi(&b, &basis).unwrap();
                let h = 1e-5;
                for u in 0..3 {
                    for t in 0..3 {
                        let mut plus = b.0.clone();
                        plus[(u, t)] += h;
                        let mut minus = b.0.clone();
                        minus[(u, t)] -= h;
                        let fd = (psi(&CoefficientMatrix(plus), &basis).unwrap()
                            - psi(&CoefficientMatrix(minus), &basis).unwrap())
                            / (2.0 * h);
                        let scale = g.amax().max(1e-12);
                        assert!(
                            (fd - g[(u, t)]).abs() <= 1e-4 * scale.max(fd.abs()),
                            "p={p} fd={fd} g={}",
                            g[(u, t)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn grad_psi_scalar_and_euler_identity() {
        let mut w = DenseMatrix::zeros(2, 2);
        w[(0, 1)] = 0.6;
        w[(1, 0)] = 0.8;
        let basis = SubspaceBasis::new(2.0, vec![w]).unwrap();
        let g = grad_psi(
            &CoefficientMatrix(DenseMatrix::from_element(1, 1, 1.3)),
            &basis,
        )
        .unwrap();
        assert!((g[(0, 0)] - 2.6).abs() < 1e-12);

        let mut rng = seeded(25);
        for p in [1.0, 1.5, 3.0] {
            let basis = SubspaceBasis::random(3, 4, p, &mut rng).unwrap();
            let b = random_invertible(3, &mut rng);
            let g = grad_psi(&b, &basis).unwrap();
            let euler = b.0.dot(&g);
            let target = p * psi(&b, &basis).unwrap();
            assert!((euler - target).abs() <= 1e-8 * (1.0 + target));
        }
    }

    #[test]
    fn grad_psi_rejects_singular() {
        let basis = SubspaceBasis::diagonal(2, 1.0).unwrap();
        let b = CoefficientMatrix(DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert!(matches!(
            grad_psi(&b, &basis),
            Err(GeoError::SingularCoefficient)
        ));
    }

    #[test]
    fn basis_validation() {
        let e = DenseMatrix::identity(2, 2);
        assert!(matches!(
            SubspaceBasis::new(1.0, vec![e.clone(), e.clone() * 2.0]),
            Err(GeoError::DegenerateBasis(_))
        ));
        assert!(matches!(
            SubspaceBasis::new(0.0, vec![e.clone()]),
            Err(GeoError::InvalidExponent(_))
        ));
        assert!(SubspaceBasis::new(1.0, vec![]).is_err());
    }

    #[test]
    fn diagonal_closed_form_is_lewis() {
        for p in [0.5, 1.0, 1.5, 3.0] {
            let basis = SubspaceBasis::diagonal(4, p).unwrap();
            let cert = LewisCertificate {
                p,
                basis: basis.elements().to_vec(),
                coefficients: DenseMatrix::identity(4, 4),
                m_matrix: PsdMatrix::identity(4),
                gram_residual: 0.0,
                trace_residual: 0.0,
                iters: 0,
                mode: SolverMode::FixedPoint,
                seed: 0,
            };
            let r = certify_lewis(&cert, p);
            assert!(r.gram_residual <= 1e-12 && r.trace_residual <= 1e-12);

            let mut corrupted = cert.clone();
            corrupted.basis[0] *= 2.0;
            // G_11 becomes 2^p, so the defect is at least 1 once p >= 1
            let defect = certify_lewis(&corrupted, p).gram_residual;
            assert!((defect - (2f64.powf(p) - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn solver_on_diagonal_subspace() {
        for mode in [SolverMode::FixedPoint, SolverMode::GradientAscent] {
            for p in [1.0, 1.5, 3.0] {
                let basis = SubspaceBasis::diagonal(3, p).unwrap();
                let config = SolverConfig {
                    mode,
                    ..SolverConfig::default()
                };
                let cert = solve_lewis(&basis, &config).unwrap();
                assert!(
                    (cert.m_matrix.matrix() - DenseMatrix::identity(3, 3)).norm() < 1e-6,
                    "{mode} p={p}"
                );
                // T_i = sum_j O_ij E_jj with O orthogonal
                let o = &cert.coefficients;
                assert!((o * o.transpose() - DenseMatrix::identity(3, 3)).norm() < 1e-6);
                assert!(cert.coefficients.determinant() > 0.0);
                let r = certify_lewis(&cert, p);
                assert!(r.gram_residual <= 1e-8 && r.trace_residual <= 1e-8);
            }
        }
    }

    #[test]
    fn solver_rank_one() {
        let mut rng = seeded(26);
        let w = gaussian_matrix(3, &mut rng);
        for p in [1.0, 2.5] {
            let basis = SubspaceBasis::new(p, vec![w.clone()]).unwrap();
            let cert = solve_lewis(&basis, &SolverConfig::default()).unwrap();
            let expected = rank_one_lewis(&w, p).unwrap();
            assert!((&cert.basis[0] - &expected).norm() < 1e-8);
            let mm = expected.transpose() * &expected;
            assert!((cert.m_matrix.matrix() - mm).norm() < 1e-8);
            let r = certify_lewis(&cert, p).trace_residual;
            assert!(r < 1e-10, "{r:e}");
        }
    }

    #[test]
    fn solver_random_nuclear() {
        let mut rng = seeded(27);
        let basis = SubspaceBasis::random(3, 4, 1.0, &mut rng).unwrap();
        for mode in [SolverMode::FixedPoint, SolverMode::GradientAscent] {
            let config = SolverConfig {
                mode,
                seed: 4,
                ..SolverConfig::default()
            };
            let cert = solve_lewis(&basis, &config).unwrap();
            let r = certify_lewis(&cert, 1.0);
            assert!(r.gram_residual <= 1e-6 && r.trace_residual <= 1e-6);
            assert!((cert.m_matrix.trace_power(0.5) - 3.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn solver_modes_agree_and_are_basis_independent() {
        let mut rng = seeded(28);
        for p in [1.0, 1.5, 3.0] {
            let basis = SubspaceBasis::random(3, 3, p, &mut rng).unwrap();
            let fixed = solve_lewis(&basis, &SolverConfig::default()).unwrap();
            let grad = solve_lewis(
                &basis,
                &SolverConfig {
                    mode: SolverMode::GradientAscent,
                    ..SolverConfig::default()
                },
            )
            .unwrap();
            assert!(
                (fixed.m_matrix.matrix() - grad.m_matrix.matrix()).norm() < 1e-6,
                "p={p}"
            );

            let change = random_invertible(3, &mut rng).0;
            let rebased: Vec<DenseMatrix> = (0..3)
                .map(|j| {
                    combine(
                        basis.elements(),
                        &change.row(j).iter().cloned().collect::<Vec<_>>(),
                    )
                })
                .collect();
            let other = solve_lewis(
                &SubspaceBasis::new(p, rebased).unwrap(),
                &SolverConfig::default(),
            )
            .unwrap();
            assert!(
                (fixed.m_matrix.matrix() - other.m_matrix.matrix()).norm() < 1e-6,
                "p={p}"
            );
        }
    }

    #[test]
    fn orthogonal_conjugation_transforms_m() {
        let mut rng = seeded(29);
        let basis = SubspaceBasis::random(2, 3, 1.0, &mut rng).unwrap();
        let u = random_orthogonal(3, &mut rng);
        let v = random_orthogonal(3, &mut rng);
        let rotated: Vec<DenseMatrix> = basis.elements().iter().map(|w| &u * w * &v).collect();
        let a = solve_lewis(&basis, &SolverConfig::default()).unwrap();
        let b = solve_lewis(
            &SubspaceBasis::new(1.0, rotated).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        let expected = v.transpose() * a.m_matrix.matrix() * &v;
        assert!((b.m_matrix.matrix() - expected).norm() < 1e-6);
    }

    #[test]
    fn solver_is_deterministic_and_serializes() {
        let mut rng = seeded(30);
        let basis = SubspaceBasis::random(2, 3, 1.5, &mut rng).unwrap();
        let config = SolverConfig {
            seed: 9,
            ..SolverConfig::default()
        };
        let a = serde_json::to_string(&solve_lewis(&basis, &config).unwrap().to_json()).unwrap();
        let b = serde_json::to_string(&solve_lewis(&basis, &config).unwrap().to_json()).unwrap();
        assert_eq!(a, b);
        let parsed: CertificateJson = serde_json::from_str(&a).unwrap();
        let cert = LewisCertificate::from_json(&parsed).unwrap();
        assert!(certify_lewis(&cert, 1.5).gram_residual < 1e-8);
    }

    #[test]
    fn small_p_is_certified() {
        let mut rng = seeded(31);
        let basis = SubspaceBasis::random(2, 3, 0.5, &mut rng).unwrap();
        let cert = solve_lewis(&basis, &SolverConfig::default()).unwrap();
        let r = certify_lewis(&cert, 0.5);
        assert!(r.gram_residual <= 1e-8 && r.trace_residual <= 1e-8);
    }
}
