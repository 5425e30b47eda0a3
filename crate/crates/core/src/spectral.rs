//! Spectral decompositions, Schatten norms and PSD functional calculus.
//!
//! Negative powers of a positive semidefinite matrix follow the kernel
//! convention: eigenvalues that are (numerically) zero map to zero for every
//! exponent, so `T^b * T^-b` is the orthogonal projection onto `range(T)`.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::error::{GeoError, Result};

/// Real square matrix; the operand of every routine in the crate.
pub type DenseMatrix = DMatrix<f64>;

/// Singular values and eigenvalues below this fraction of the largest one are
/// treated as exact zeros.
pub const SPECTRAL_CLAMP: f64 = 1e-12;

/// Tolerance used when validating symmetry and nonnegativity of PSD inputs.
pub const PSD_TOL: f64 = 1e-10;

pub fn check_finite(t: &DenseMatrix) -> Result<()> {
    if t.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GeoError::NonFiniteInput)
    }
}

fn check_square(t: &DenseMatrix) -> Result<()> {
    if t.is_square() {
        Ok(())
    } else {
        Err(GeoError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            t.nrows(),
            t.ncols()
        )))
    }
}

pub(crate) fn check_same_shape(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(GeoError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )))
    }
}

/// `T = left * diag(singulars) * right`, singular values nonincreasing.
#[derive(Debug, Clone)]
pub struct SpectralForm {
    pub left: DenseMatrix,
    pub singulars: Vec<f64>,
    pub right: DenseMatrix,
}

impl SpectralForm {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut scaled = self.left.clone();
        for (j, s) in self.singulars.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * &self.right
    }

    /// Number of nonzero (post-clamp) singular values.
    pub fn rank(&self) -> usize {
        self.singulars.iter().filter(|s| **s > 0.0).count()
    }
}

fn clamp_spectrum(values: &mut [f64]) {
    let top = values.iter().cloned().fold(0.0_f64, f64::max);
    let floor = SPECTRAL_CLAMP * top;
    for v in values.iter_mut() {
        if *v <= floor {
            *v = 0.0;
        }
    }
}

/// Full singular value decomposition of a square matrix.
pub fn svd(t: &DenseMatrix) -> Result<SpectralForm> {
    check_finite(t)?;
    check_square(t)?;
    let m = t.nrows();
    if t.iter().all(|x| *x == 0.0) {
        return Ok(SpectralForm {
            left: DenseMatrix::identity(m, m),
            singulars: vec![0.0; m],
            right: DenseMatrix::identity(m, m),
        });
    }
    let dec = SVD::new(t.clone(), true, true);
    let u = dec.u.expect("left singular vectors requested");
    let v_t = dec.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));

    let mut left = DenseMatrix::zeros(m, m);
    let mut right = DenseMatrix::zeros(m, m);
    let mut singulars = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        left.set_column(dst, &u.column(src));
        right.set_row(dst, &v_t.row(src));
        singulars.push(dec.singular_values[src]);
    }
    clamp_spectrum(&mut singulars);
    Ok(SpectralForm {
        left,
        singulars,
        right,
    })
}

/// Singular values only, nonincreasing and clamped. Works for rectangular input.
pub fn singular_values(t: &DenseMatrix) -> Result<Vec<f64>> {
    check_finite(t)?;
    if t.is_empty() {
        return Ok(Vec::new());
    }
    let mut s: Vec<f64> = t.clone().singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    clamp_spectrum(&mut s);
    Ok(s)
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p <= 0.0 {
        Err(GeoError::InvalidExponent(format!(
            "Schatten exponent must lie in (0, inf], got {p}"
        )))
    } else {
        Ok(())
    }
}

/// `(sum sigma_j^p)^(1/p)` from a nonincreasing list, `sigma_1` for `p = inf`.
pub fn schatten_from_singulars(singulars: &[f64], p: f64) -> f64 {
    let top = singulars.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return top;
    }
    let sum: f64 = singulars.iter().map(|s| (s / top).powf(p)).sum();
    top * sum.powf(1.0 / p)
}

/// Schatten-von Neumann `p`-norm (a quasi-norm for `p < 1`).
pub fn schatten_norm(t: &DenseMatrix, p: f64) -> Result<f64> {
    check_exponent(p)?;
    check_square(t)?;
    Ok(schatten_from_singulars(&singular_values(t)?, p))
}

/// `||T||_{S_p}^p = trace[(T^T T)^{p/2}]` for finite `p`.
pub fn schatten_pow(t: &DenseMatrix, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Err(GeoError::InvalidExponent(
            "p-th power of the operator norm is undefined for p = inf".into(),
        ));
    }
    Ok(singular_values(t)?.iter().map(|s| s.powf(p)).sum())
}

pub fn operator_norm(t: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(t)?.first().copied().unwrap_or(0.0))
}

/// Symmetric positive semidefinite matrix together with its eigendecomposition.
///
/// Eigenvalues are stored nonincreasing; values below `SPECTRAL_CLAMP` times
/// the largest one (including small negative round-off) are stored as zero.
#[derive(Debug, Clone)]
pub struct PsdMatrix {
    base: DenseMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: DenseMatrix,
}

impl PsdMatrix {
    /// Validates symmetry and nonnegativity within `PSD_TOL` (relative).
    pub fn new(t: DenseMatrix) -> Result<Self> {
        check_finite(&t)?;
        check_square(&t)?;
        let scale = 1.0 + t.norm();
        let asym = (&t - t.transpose()).norm();
        if asym > PSD_TOL * scale {
            return Err(GeoError::NotPsd(format!("asymmetry {asym:e}")));
        }
        let sym = (&t + t.transpose()) * 0.5;
        let (raw, vectors) = sorted_eigen(&sym);
        let top = raw.first().copied().unwrap_or(0.0).max(0.0);
        if let Some(&low) = raw.last() {
            if low < -PSD_TOL * (1.0 + top) {
                return Err(GeoError::NotPsd(format!("eigenvalue {low:e}")));
            }
        }
        let mut eigenvalues: Vec<f64> = raw.iter().map(|x| x.max(0.0)).collect();
        clamp_spectrum(&mut eigenvalues);
        Ok(Self {
            base: sym,
            eigenvalues,
            eigenvectors: vectors,
        })
    }

    /// `A^T A`, built without the PSD validation round trip.
    pub fn gram(a: &DenseMatrix) -> Result<Self> {
        check_finite(a)?;
        let g = a.transpose() * a;
        Self::new((&g + g.transpose()) * 0.5)
    }

    pub fn identity(m: usize) -> Self {
        Self {
            base: DenseMatrix::identity(m, m),
            eigenvalues: vec![1.0; m],
            eigenvectors: DenseMatrix::identity(m, m),
        }
    }

    fn from_spectrum(eigenvalues: Vec<f64>, eigenvectors: DenseMatrix) -> Self {
        let mut scaled = eigenvectors.clone();
        for (j, l) in eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*l);
        }
        let base = &scaled * eigenvectors.transpose();
        let base = (&base + base.transpose()) * 0.5;
        Self {
            base,
            eigenvalues,
            eigenvectors,
        }
    }

    /// `(sum_i A_i^T A_i)^{1/2}` from the SVD of the vertically stacked `A_i`.
    ///
    /// The eigenvalues of the root are the singular values of the stack, so
    /// the kernel clamp acts at relative level `SPECTRAL_CLAMP` on the root
    /// rather than on its square.
    pub fn gram_root(stack: &[DenseMatrix]) -> Result<Self> {
        let first = stack
            .first()
            .ok_or_else(|| GeoError::DimensionMismatch("empty matrix stack".into()))?;
        let (r, c) = first.shape();
        let mut tall = DenseMatrix::zeros(r * stack.len(), c);
        for (i, a) in stack.iter().enumerate() {
            check_finite(a)?;
            check_same_shape(first, a)?;
            tall.view_mut((i * r, 0), (r, c)).copy_from(a);
        }
        if tall.iter().all(|x| *x == 0.0) {
            return Ok(Self::from_spectrum(
                vec![0.0; c],
                DenseMatrix::identity(c, c),
            ));
        }
        let dec = SVD::new(tall, false, true);
        let v_t = dec.v_t.expect("right singular vectors requested");
        let n = dec.singular_values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));
        let mut vectors = DenseMatrix::zeros(c, c);
        let mut values = vec![0.0; c];
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &v_t.row(src).transpose());
            values[dst] = dec.singular_values[src];
        }
        if n < c {
            // fewer stacked rows than columns: complete the basis of the kernel
            let basis = complete_orthonormal(&vectors.columns(0, n).into_owned(), c);
            vectors = basis;
        }
        clamp_spectrum(&mut values);
        Ok(Self::from_spectrum(values, vectors))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.base
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DenseMatrix {
        &self.eigenvectors
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|l| **l > 0.0).count()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `trace[T^beta]` under the kernel convention.
    pub fn trace_power(&self, beta: f64) -> f64 {
        self.eigenvalues
            .iter()
            .filter(|l| **l > 0.0)
            .map(|l| l.powf(beta))
            .sum()
    }

    /// `T^beta`; zero eigenvalues stay zero for every sign of `beta`.
    pub fn power(&self, beta: f64) -> PsdMatrix {
        let mapped = self
            .eigenvalues
            .iter()
            .map(|&l| if l > 0.0 { l.powf(beta) } else { 0.0 })
            .collect();
        Self::from_spectrum(mapped, self.eigenvectors.clone())
    }

    /// Orthogonal projection onto `range(T)`.
    pub fn range_projection(&self) -> DenseMatrix {
        let mapped = self
            .eigenvalues
            .iter()
            .map(|&l| if l > 0.0 { 1.0 } else { 0.0 })
            .collect();
        Self::from_spectrum(mapped, self.eigenvectors.clone()).base
    }

    /// Smallest nonzero eigenvalue divided by the largest, `None` when zero.
    pub fn spectral_gap_ratio(&self) -> Option<f64> {
        let top = self.max_eigenvalue();
        if top <= 0.0 {
            return None;
        }
        self.eigenvalues
            .iter()
            .rev()
            .find(|l| **l > 0.0)
            .map(|l| l / top)
    }
}

/// Eigenvalues (nonincreasing) and matching eigenvectors of a symmetric matrix.
fn sorted_eigen(sym: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let m = sym.nrows();
    let dec = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| dec.eigenvalues[j].total_cmp(&dec.eigenvalues[i]));
    let mut vectors = DenseMatrix::zeros(m, m);
    let mut values = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &dec.eigenvectors.column(src));
        values.push(dec.eigenvalues[src]);
    }
    (values, vectors)
}

/// Extends orthonormal columns `q` (c x n) to an orthonormal basis of R^c.
fn complete_orthonormal(q: &DenseMatrix, c: usize) -> DenseMatrix {
    let mut cols: Vec<nalgebra::DVector<f64>> = q.column_iter().map(|v| v.into_owned()).collect();
    for e in 0..c {
        if cols.len() == c {
            break;
        }
        let mut v = nalgebra::DVector::zeros(c);
        v[e] = 1.0;
        for u in &cols {
            let d = u.dot(&v);
            v.axpy(-d, u, 1.0);
        }
        let n = v.norm();
        if n > 1e-8 {
            cols.push(v / n);
        }
    }
    DenseMatrix::from_columns(&cols)
}

pub fn min_eigenvalue(sym: &DenseMatrix) -> f64 {
    let sym = (sym + sym.transpose()) * 0.5;
    sorted_eigen(&sym).0.last().copied().unwrap_or(0.0)
}

/// `T^beta` for a PSD matrix.
pub fn sym_power(t: &PsdMatrix, beta: f64) -> Result<PsdMatrix> {
    if !beta.is_finite() {
        return Err(GeoError::InvalidExponent(format!(
            "power must be finite, got {beta}"
        )));
    }
    Ok(t.power(beta))
}

/// `(A^T A)^beta` computed from the singular values of `A` so that the kernel
/// clamp acts on `sigma` rather than on `sigma^2`.
pub fn gram_power(a: &DenseMatrix, beta: f64) -> Result<PsdMatrix> {
    let form = svd(a)?;
    let mapped: Vec<f64> = form
        .singulars
        .iter()
        .map(|&s| if s > 0.0 { s.powf(2.0 * beta) } else { 0.0 })
        .collect();
    Ok(PsdMatrix::from_spectrum(mapped, form.right.transpose()))
}

/// `S <= T` in the PSD order, up to `tol * (1 + ||T||_inf)`.
pub fn psd_leq(s: &PsdMatrix, t: &PsdMatrix, tol: f64) -> Result<bool> {
    if s.dim() != t.dim() {
        return Err(GeoError::DimensionMismatch(format!(
            "{} vs {}",
            s.dim(),
            t.dim()
        )));
    }
    let gap = min_eigenvalue(&(t.matrix() - s.matrix()));
    Ok(gap >= -tol * (1.0 + t.max_eigenvalue()))
}

/// Outcome of evaluating one side-by-side inequality.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    /// `lhs <= rhs` with relative slack `tol * (1 + |rhs|)`.
    pub fn leq(lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + tol * (1.0 + rhs.abs()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ContractionCheck {
    pub value: f64,
    pub holds: bool,
}

/// `||S^beta T^-beta||_inf`, which is at most one whenever `S <= T` and
/// `beta <= 1/2` (Loewner-Heinz).
pub fn loewner_contraction_check(
    s: &PsdMatrix,
    t: &PsdMatrix,
    beta: f64,
) -> Result<ContractionCheck> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(GeoError::InvalidExponent(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if !psd_leq(s, t, PSD_TOL)? {
        return Err(GeoError::OrderViolated {
            min_eigenvalue: min_eigenvalue(&(t.matrix() - s.matrix())),
        });
    }
    let product = s.power(beta).matrix() * t.power(-beta).matrix();
    let value = operator_norm(&product)?;
    Ok(ContractionCheck {
        value,
        holds: value <= 1.0 + 1e-9,
    })
}

/// `trace(ST) <= sum_j sigma_j(S) sigma_j(T)`.
pub fn von_neumann_check(s: &DenseMatrix, t: &DenseMatrix) -> Result<InequalityCheck> {
    check_same_shape(s, t)?;
    let lhs = (s * t).trace();
    let rhs = singular_values(s)?
        .iter()
        .zip(singular_values(t)?.iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(InequalityCheck::leq(lhs, rhs, 1e-9))
}

fn reciprocal(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// `||AB||_{S_c} <= ||A||_{S_a} ||B||_{S_b}` with `1/c = 1/a + 1/b`.
pub fn holder_check(a: &DenseMatrix, b: &DenseMatrix, ea: f64, eb: f64) -> Result<InequalityCheck> {
    for e in [ea, eb] {
        if e.is_nan() || e < 1.0 {
            return Err(GeoError::InvalidExponent(format!(
                "Hoelder exponents must lie in [1, inf], got {e}"
            )));
        }
    }
    check_same_shape(a, b)?;
    let inv_c = reciprocal(ea) + reciprocal(eb);
    let c = if inv_c == 0.0 {
        f64::INFINITY
    } else {
        1.0 / inv_c
    };
    let lhs = schatten_norm(&(a * b), c)?;
    let rhs = schatten_norm(a, ea)? * schatten_norm(b, eb)?;
    Ok(InequalityCheck::leq(lhs, rhs, 1e-9))
}
