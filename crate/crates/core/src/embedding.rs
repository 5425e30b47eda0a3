//! The linear embedding `Phi(A) = J(A) M^{(p-q)/(2q)}` of a subspace of `S_p`
//! into `S_q^m`, with its two-sided bounds.
//!
//! `J` compresses the ambient `N x N` matrices onto a subspace `V` carrying the
//! sampled elements of `X` up to a small `S_p` tail, and `M` comes from a Lewis
//! basis of `J(X)`.

use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::lewis::{solve_lewis, span_coordinates, LewisCertificate, SolverConfig, SubspaceBasis};
use crate::random::{gaussian_vector, seeded};
use crate::spectral::{
    operator_norm, psd_leq, schatten_norm, svd, DenseMatrix, InequalityCheck, PsdMatrix,
};

/// Bound-check slack, relative to `1 + |rhs|`.
const BOUND_SLACK: f64 = 1e-8;
const SPAN_TOL: f64 = 1e-8;
/// Relative cutoff on the singular values of the collected (weighted)
/// singular vectors; directions below it are numerical noise.
const COLUMN_RANK_TOL: f64 = 1e-6;
/// Largest `k` for which every hypercube difference `{0,+-1}^k` is probed.
const MAX_STRUCTURED_K: usize = 10;

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p >= 1.0 && q > p && p.is_finite()) {
        return Err(GeoError::InvalidExponents { p, q });
    }
    Ok(())
}

/// `max{k^{(p-2)/2 (1/p - 1/q)}, 1}`.
pub fn upper_constant(p: f64, q: f64, k: usize) -> f64 {
    (k as f64)
        .powf((p - 2.0) / 2.0 * (1.0 / p - 1.0 / q))
        .max(1.0)
}

/// `k^{1/p - 1/q}`.
pub fn lower_constant(p: f64, q: f64, k: usize) -> f64 {
    (k as f64).powf(1.0 / p - 1.0 / q)
}

/// Distortion bound of `Phi`: `k^{1/p-1/q}` for `p` in `[1,2]`, otherwise
/// `k^{(p/2)(1/p-1/q)}`.
pub fn theorem_bound(p: f64, q: f64, k: usize) -> Result<f64> {
    check_exponents(p, q)?;
    Ok(upper_constant(p, q, k) * lower_constant(p, q, k))
}

/// Orthonormal `N x m` basis `Q` of `V`; `J(A) = Q^T A Q`.
#[derive(Debug, Clone)]
pub struct Compression {
    pub basis: DenseMatrix,
}

impl Compression {
    pub fn identity(n: usize) -> Self {
        Self {
            basis: DenseMatrix::identity(n, n),
        }
    }

    pub fn m(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_identity(&self) -> bool {
        self.basis.nrows() == self.basis.ncols()
    }

    pub fn apply(&self, a: &DenseMatrix) -> DenseMatrix {
        if self.is_identity() {
            return a.clone();
        }
        self.basis.transpose() * a * &self.basis
    }
}

#[derive(Debug, Clone)]
pub struct Truncation {
    pub compression: Compression,
    pub worst_defect: f64,
    pub sample_size: usize,
    /// `worst_defect <= eps`.
    pub holds: bool,
}

impl Truncation {
    pub fn m(&self) -> usize {
        self.compression.m()
    }
}

/// Smallest `r` with `(sum_{j>r} sigma_j^p)^{1/p} <= cutoff`.
fn tail_rank(singulars: &[f64], p: f64, cutoff: f64) -> usize {
    let mut tail = 0.0;
    for r in (0..singulars.len()).rev() {
        tail += singulars[r].powf(p);
        if tail.powf(1.0 / p) > cutoff {
            return r + 1;
        }
    }
    0
}

/// Compresses `span(basis)` onto the joint top singular subspaces of the basis
/// elements and of `sample_size` seeded random unit-sphere elements.
///
/// Each sampled unit vector `A` contributes its top `r` left and right
/// singular vectors, with `r` the smallest rank leaving an `S_p` tail of at
/// most `eps/4`; on the sample this bounds the defect by `eps/2`.
pub fn truncate_subspace(
    basis: &SubspaceBasis,
    eps: f64,
    sample_size: usize,
    seed: u64,
) -> Result<Truncation> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(GeoError::Parse(format!("eps must lie in (0,1), got {eps}")));
    }
    let k = basis.k();
    if sample_size < k {
        return Err(GeoError::SampleTooSmall { sample_size, k });
    }
    let p = basis.p();
    let n = basis.m();
    let sample = unit_sample(basis, sample_size, seed)?;

    let mut columns: Vec<nalgebra::DVector<f64>> = Vec::new();
    for a in &sample {
        let form = svd(a)?;
        let r = tail_rank(&form.singulars, p, eps / 4.0);
        for j in 0..r {
            let s = form.singulars[j];
            columns.push(form.left.column(j) * s);
            columns.push(form.right.row(j).transpose() * s);
        }
    }
    let compression = orthonormal_span(&columns, n)?;

    let mut worst_defect: f64 = 0.0;
    if !compression.is_identity() {
        for a in &sample {
            let defect = 1.0 - schatten_norm(&compression.apply(a), p)? / schatten_norm(a, p)?;
            worst_defect = worst_defect.max(defect);
        }
    }
    Ok(Truncation {
        compression,
        worst_defect,
        sample_size: sample.len(),
        holds: worst_defect <= eps,
    })
}

/// Basis elements plus `extra` Gaussian coefficient vectors, all scaled to
/// unit `S_p` norm.
fn unit_sample(basis: &SubspaceBasis, extra: usize, seed: u64) -> Result<Vec<DenseMatrix>> {
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(basis.k() + extra);
    for w in basis.elements() {
        out.push(w / schatten_norm(w, basis.p())?);
    }
    for _ in 0..extra {
        let c = gaussian_vector(basis.k(), &mut rng);
        let a = basis.combine(c.as_slice());
        let norm = schatten_norm(&a, basis.p())?;
        if norm > 0.0 {
            out.push(a / norm);
        }
    }
    Ok(out)
}

fn orthonormal_span(columns: &[nalgebra::DVector<f64>], n: usize) -> Result<Compression> {
    if columns.is_empty() {
        return Err(GeoError::DegenerateBasis(
            "no singular directions retained".into(),
        ));
    }
    let stacked = DenseMatrix::from_columns(columns);
    let decomposition = stacked.svd(true, false);
    let left = decomposition.u.expect("left singular vectors requested");
    let values = decomposition.singular_values;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
    let top = values[order[0]];
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|j| values[*j] > COLUMN_RANK_TOL * top)
        .collect();
    if kept.len() >= n {
        return Ok(Compression::identity(n));
    }
    let cols: Vec<_> = kept.iter().map(|j| left.column(*j).into_owned()).collect();
    Ok(Compression {
        basis: DenseMatrix::from_columns(&cols),
    })
}

/// `Phi(A) = J(A) M^{(p-q)/(2q)}` on `span(W)`.
#[derive(Debug, Clone)]
pub struct EmbeddingMap {
    pub p: f64,
    pub q: f64,
    pub k: usize,
    pub compression: Compression,
    /// `M^{(p-q)/(2q)}` under the pseudo-power convention.
    pub weight: PsdMatrix,
    /// Lewis basis of `J(X)` inside `S_p^m`.
    pub lewis: LewisCertificate,
    source_basis: Vec<DenseMatrix>,
}

impl EmbeddingMap {
    pub fn m(&self) -> usize {
        self.compression.m()
    }

    pub fn apply(&self, a: &DenseMatrix) -> DenseMatrix {
        self.compression.apply(a) * self.weight.matrix()
    }

    /// `sum_u c_u W_u` for the basis the map was built from.
    pub fn element(&self, coeffs: &[f64]) -> DenseMatrix {
        crate::lewis::combine(&self.source_basis, coeffs)
    }

    /// `(||A||_{S_p}, ||Phi A||_{S_q})` for `A = sum_u c_u W_u`.
    pub fn norm_pair(&self, coeffs: &[f64]) -> Result<(f64, f64)> {
        let a = self.element(coeffs);
        Ok((
            schatten_norm(&a, self.p)?,
            schatten_norm(&self.apply(&a), self.q)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CheckCount {
    pub total: usize,
    pub violations: usize,
}

impl CheckCount {
    fn record(&mut self, holds: bool) {
        self.total += 1;
        if !holds {
            self.violations += 1;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionCertificate {
    pub upper_const: f64,
    pub lower_const: f64,
    /// `upper_const * lower_const / (1 - eps)` when a truncation was applied.
    pub certified_bound: f64,
    pub empirical_distortion: f64,
    pub sample_size: usize,
    pub violations: usize,
    pub lower_checks: CheckCount,
    pub upper_checks: CheckCount,
    pub worst_defect: f64,
    pub eps: f64,
}

impl DistortionCertificate {
    pub fn within_bound(&self) -> bool {
        self.empirical_distortion <= self.certified_bound * (1.0 + 1e-6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedOptions {
    pub eps: f64,
    /// Random unit-sphere elements used to choose `V`.
    pub truncation_sample: usize,
    /// Seeded random coefficient vectors used for the empirical distortion.
    pub random_probes: usize,
    pub seed: u64,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            eps: 0.01,
            truncation_sample: 500,
            random_probes: 10_000,
            seed: 0,
        }
    }
}

/// Running maxima of `||Phi A||/||A||` and `||A||/||Phi A||`.
#[derive(Debug, Clone, Copy)]
struct RatioRange {
    expand: f64,
    contract: f64,
}

impl RatioRange {
    fn new() -> Self {
        Self {
            expand: 0.0,
            contract: 0.0,
        }
    }

    fn record(&mut self, source: f64, image: f64) {
        if source > 0.0 {
            self.expand = self.expand.max(image / source);
            self.contract = self.contract.max(source / image);
        }
    }

    fn distortion(&self) -> f64 {
        self.expand * self.contract
    }
}

/// Sign vectors `{0, +1, -1}^k` up to global sign, excluding zero: the
/// directions `(eps - eps')/2` of all hypercube pairs.
pub fn hypercube_differences(k: usize) -> Vec<Vec<f64>> {
    let total = 3usize.pow(k as u32);
    let mut out = Vec::with_capacity(total / 2);
    for code in 1..total {
        let mut digits = Vec::with_capacity(k);
        let mut c = code;
        for _ in 0..k {
            digits.push(match c % 3 {
                0 => 0.0,
                1 => 1.0,
                _ => -1.0,
            });
            c /= 3;
        }
        // keep one representative of each +-pair: first nonzero digit is +1
        if digits.iter().find(|d| **d != 0.0) == Some(&1.0) {
            out.push(digits);
        }
    }
    out
}

/// Exhaustive distortion of `Phi` over all pairwise differences of the
/// hypercube `{-1,1}^k` written in the source basis.
pub fn hypercube_distortion(map: &EmbeddingMap) -> Result<f64> {
    if map.k > MAX_STRUCTURED_K {
        return Err(GeoError::TooLarge(format!(
            "hypercube probes need k <= {MAX_STRUCTURED_K}, got {}",
            map.k
        )));
    }
    let mut range = RatioRange::new();
    for d in hypercube_differences(map.k) {
        let (s, i) = map.norm_pair(&d)?;
        range.record(s, i);
    }
    Ok(range.distortion())
}

/// Builds `Phi` for `span(basis)` and certifies its distortion on structured
/// and random probes.
pub fn build_embedding(
    basis: &SubspaceBasis,
    q: f64,
    solver: &SolverConfig,
    options: &EmbedOptions,
) -> Result<(EmbeddingMap, DistortionCertificate)> {
    let p = basis.p();
    check_exponents(p, q)?;
    let k = basis.k();
    let truncation = if k * k < basis.m() * basis.m() && basis.m() > k {
        Some(truncate_subspace(
            basis,
            options.eps,
            options.truncation_sample,
            options.seed,
        )?)
    } else {
        None
    };
    let compression = truncation
        .as_ref()
        .map(|t| t.compression.clone())
        .unwrap_or_else(|| Compression::identity(basis.m()));
    let worst_defect = truncation.as_ref().map(|t| t.worst_defect).unwrap_or(0.0);
    let truncated = !compression.is_identity();

    let compressed = if truncated {
        SubspaceBasis::new(
            p,
            basis
                .elements()
                .iter()
                .map(|w| compression.apply(w))
                .collect(),
        )?
    } else {
        basis.clone()
    };
    let lewis = solve_lewis(&compressed, solver)?;
    let weight = lewis.m_matrix.power((p - q) / (2.0 * q));
    let map = EmbeddingMap {
        p,
        q,
        k,
        compression,
        weight,
        lewis,
        source_basis: basis.elements().to_vec(),
    };

    let eps = if truncated { options.eps } else { 0.0 };
    let upper_const = upper_constant(p, q, k);
    let lower_const = lower_constant(p, q, k);
    let mut probes: Vec<Vec<f64>> = if k <= MAX_STRUCTURED_K {
        hypercube_differences(k)
    } else {
        Vec::new()
    };
    let mut rng = seeded(options.seed ^ 0x9e37_79b9_7f4a_7c15);
    for _ in 0..options.random_probes {
        let c = gaussian_vector(k, &mut rng);
        probes.push((&c / c.norm()).as_slice().to_vec());
    }

    let mut range = RatioRange::new();
    let mut lower_checks = CheckCount {
        total: 0,
        violations: 0,
    };
    let mut upper_checks = CheckCount {
        total: 0,
        violations: 0,
    };
    for c in &probes {
        let (source, image) = map.norm_pair(c)?;
        range.record(source, image);
        lower_checks.record(
            InequalityCheck::leq((1.0 - eps) * source, lower_const * image, BOUND_SLACK).holds,
        );
        upper_checks.record(InequalityCheck::leq(image, upper_const * source, BOUND_SLACK).holds);
    }
    let certified_bound = upper_const * lower_const / (1.0 - eps);
    let cert = DistortionCertificate {
        upper_const,
        lower_const,
        certified_bound,
        empirical_distortion: range.distortion(),
        sample_size: probes.len(),
        violations: lower_checks.violations + upper_checks.violations,
        lower_checks,
        upper_checks,
        worst_defect,
        eps,
    };
    Ok((map, cert))
}

/// JSON report of one embedding build.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub p: f64,
    pub q: f64,
    pub k: usize,
    pub m: usize,
    pub theorem_bound: f64,
    pub empirical_distortion: f64,
    pub lower_checks: CheckCount,
    pub upper_checks: CheckCount,
    pub worst_defect: f64,
    pub seed: u64,
}

impl EmbeddingReport {
    pub fn new(map: &EmbeddingMap, cert: &DistortionCertificate, seed: u64) -> Self {
        Self {
            p: map.p,
            q: map.q,
            k: map.k,
            m: map.m(),
            theorem_bound: upper_constant(map.p, map.q, map.k)
                * lower_constant(map.p, map.q, map.k),
            empirical_distortion: cert.empirical_distortion,
            lower_checks: cert.lower_checks,
            upper_checks: cert.upper_checks,
            worst_defect: cert.worst_defect,
            seed,
        }
    }
}

/// A checked inequality with `slack = rhs - lhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            lhs,
            rhs,
            slack: rhs - lhs,
            holds: InequalityCheck::leq(lhs, rhs, tol).holds,
        }
    }
}

/// Coordinates of `A` in the Lewis basis, rejecting matrices off the span.
pub fn lewis_coordinates(a: &DenseMatrix, cert: &LewisCertificate) -> Result<Vec<f64>> {
    let (coords, residual) = span_coordinates(&cert.basis, a)?;
    if residual > SPAN_TOL * (1.0 + a.norm()) {
        return Err(GeoError::NotInSubspace { residual });
    }
    Ok(coords.as_slice().to_vec())
}

fn weighted(a: &DenseMatrix, cert: &LewisCertificate, p: f64, q: f64) -> DenseMatrix {
    a * cert.m_matrix.power((p - q) / (2.0 * q)).matrix()
}

/// `||A||_{S_p} <= k^{1/p-1/q} ||A M^{(p-q)/(2q)}||_{S_q}`.
pub fn certify_lower(
    a: &DenseMatrix,
    cert: &LewisCertificate,
    p: f64,
    q: f64,
) -> Result<BoundCheck> {
    if !(p > 0.0 && q > p) {
        return Err(GeoError::InvalidExponents { p, q });
    }
    lewis_coordinates(a, cert)?;
    let lhs = schatten_norm(a, p)?;
    let rhs = lower_constant(p, q, cert.k()) * schatten_norm(&weighted(a, cert, p, q), q)?;
    Ok(BoundCheck::new(lhs, rhs, BOUND_SLACK))
}

/// `||A M^{(p-q)/(2q)}||_{S_q} <= max{k^{(p-2)/2 (1/p-1/q)}, 1} ||A||_{S_p}`.
pub fn certify_upper(
    a: &DenseMatrix,
    cert: &LewisCertificate,
    p: f64,
    q: f64,
) -> Result<BoundCheck> {
    if p < 1.0 {
        return Err(GeoError::InvalidExponent(format!(
            "the upper bound needs p >= 1, got {p}"
        )));
    }
    check_exponents(p, q)?;
    lewis_coordinates(a, cert)?;
    let lhs = schatten_norm(&weighted(a, cert, p, q), q)?;
    let rhs = upper_constant(p, q, cert.k()) * schatten_norm(a, p)?;
    Ok(BoundCheck::new(lhs, rhs, BOUND_SLACK))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `A^T A <= (sum a_i^2) M` in the PSD order.
    pub order_holds: bool,
}

/// `||(A^T A)^beta M^{-beta}||_{S_inf} <= (trace[A^T A M^{p/2-1}])^beta`.
pub fn beta_bound_check(
    a: &DenseMatrix,
    cert: &LewisCertificate,
    p: f64,
    beta: f64,
) -> Result<BetaCheck> {
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(GeoError::InvalidExponent(format!(
            "beta must lie in (0, 1/2], got {beta}"
        )));
    }
    let coords = lewis_coordinates(a, cert)?;
    let ata = PsdMatrix::gram(a)?;
    let m = &cert.m_matrix;
    let lhs = operator_norm(&(ata.power(beta).matrix() * m.power(-beta).matrix()))?;
    let rhs = (ata.matrix() * m.power(p / 2.0 - 1.0).matrix())
        .trace()
        .max(0.0)
        .powf(beta);
    let sum_sq: f64 = coords.iter().map(|c| c * c).sum();
    let scaled_m = PsdMatrix::new(m.matrix() * sum_sq)?;
    let order_holds = psd_leq(&ata, &scaled_m, 1e-9)?;
    Ok(BetaCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9 * (1.0 + rhs),
        order_holds,
    })
}
