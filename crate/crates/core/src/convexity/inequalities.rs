//! Geometric inequalities of `S_q`, `1 <= q <= 2`, checked on concrete data.
//!
//! Hypercube maps `{-1,1}^k -> S_q` are slices indexed by bitmask: bit `j` set
//! means `eps_j = -1`, so `-eps` is `mask ^ (2^k - 1)`.

use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::graphs::{distortion_between, hypercube_metric, FiniteMetric, MAX_HYPERCUBE_K};
use crate::spectral::{
    check_same_shape, schatten_norm, schatten_pow, DenseMatrix, InequalityCheck,
};

const REL_TOL: f64 = 1e-9;
const MARTINGALE_TOL: f64 = 1e-10;

fn check_q_closed(q: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&q) {
        return Err(GeoError::InvalidExponent(format!(
            "q must lie in [1, 2], got {q}"
        )));
    }
    Ok(())
}

fn check_q_open(q: f64) -> Result<()> {
    if !(q > 1.0 && q <= 2.0) {
        return Err(GeoError::InvalidExponent(format!(
            "q must lie in (1, 2], got {q}"
        )));
    }
    Ok(())
}

fn cube_dimension(f: &[DenseMatrix]) -> Result<usize> {
    let n = f.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(GeoError::DimensionMismatch(format!(
            "a hypercube map needs 2^k images, got {n}"
        )));
    }
    let k = n.trailing_zeros() as usize;
    if k > MAX_HYPERCUBE_K {
        return Err(GeoError::TooLarge(format!(
            "hypercube dimension {k} exceeds {MAX_HYPERCUBE_K}"
        )));
    }
    for a in f {
        check_same_shape(&f[0], a)?;
    }
    Ok(k)
}

fn dist_pow(a: &DenseMatrix, b: &DenseMatrix, q: f64) -> Result<f64> {
    schatten_pow(&(a - b), q)
}

/// `(antipodal sum, edge sum)` of `||f(eps) - f(eps')||_{S_q}^q`.
fn enflo_sums(f: &[DenseMatrix], q: f64, k: usize) -> Result<(f64, f64)> {
    let full = (1usize << k) - 1;
    let mut antipodal = 0.0;
    let mut edges = 0.0;
    for mask in 0..f.len() {
        antipodal += dist_pow(&f[mask], &f[mask ^ full], q)?;
        for j in 0..k {
            edges += dist_pow(&f[mask], &f[mask ^ (1 << j)], q)?;
        }
    }
    Ok((antipodal, edges))
}

/// `sum ||f(eps) - f(-eps)||^q <= sum_j sum ||f(eps) - f(eps with j flipped)||^q`.
pub fn enflo_type_check(q: f64, f: &[DenseMatrix]) -> Result<InequalityCheck> {
    check_q_closed(q)?;
    let k = cube_dimension(f)?;
    let (lhs, rhs) = enflo_sums(f, q, k)?;
    Ok(InequalityCheck::leq(lhs, rhs, REL_TOL))
}

/// Diagonals versus sides of the quadrilateral `C1 C2 C3 C4`:
/// `||C1-C3||^q + ||C2-C4||^q <= ||C1-C2||^q + ||C2-C3||^q + ||C3-C4||^q + ||C4-C1||^q`.
pub fn roundness_check(q: f64, c: [&DenseMatrix; 4]) -> Result<InequalityCheck> {
    check_q_closed(q)?;
    for x in &c[1..] {
        check_same_shape(c[0], x)?;
    }
    let sides = dist_pow(c[0], c[1], q)?
        + dist_pow(c[1], c[2], q)?
        + dist_pow(c[2], c[3], q)?
        + dist_pow(c[3], c[0], q)?;
    let diagonals = dist_pow(c[0], c[2], q)? + dist_pow(c[1], c[3], q)?;
    Ok(InequalityCheck::leq(diagonals, sides, REL_TOL))
}

/// `(||A+B||^q + ||A-B||^q)/2 <= ||A||^q + ||B||^q`.
pub fn clarkson_check(q: f64, a: &DenseMatrix, b: &DenseMatrix) -> Result<InequalityCheck> {
    check_q_closed(q)?;
    check_same_shape(a, b)?;
    let lhs = (schatten_pow(&(a + b), q)? + schatten_pow(&(a - b), q)?) / 2.0;
    let rhs = schatten_pow(a, q)? + schatten_pow(b, q)?;
    Ok(InequalityCheck::leq(lhs, rhs, REL_TOL))
}

/// `2||x||^2 + 2(q-1)||y||^2 <= ||x+y||^2 + ||x-y||^2`.
pub fn ball_convexity_check(q: f64, x: &DenseMatrix, y: &DenseMatrix) -> Result<InequalityCheck> {
    check_q_open(q)?;
    check_same_shape(x, y)?;
    let sq = |m: &DenseMatrix| schatten_norm(m, q).map(|v| v * v);
    let lhs = 2.0 * sq(x)? + 2.0 * (q - 1.0) * sq(y)?;
    let rhs = sq(&(x + y))? + sq(&(x - y))?;
    Ok(InequalityCheck::leq(lhs, rhs, REL_TOL))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleCheck {
    pub lhs: f64,
    pub rhs_bound: f64,
    pub holds: bool,
}

/// Martingale cotype 2 with constant `1/sqrt(q-1)` for a dyadic martingale.
///
/// `stages[k]` holds `2^k` values indexed by the first `k` signs (bit `j` of
/// the index is sign `j`), so the two children of entry `i` of stage `k` are
/// `i` and `i | 2^k` of stage `k+1`.
pub fn martingale_cotype_check(q: f64, stages: &[Vec<DenseMatrix>]) -> Result<MartingaleCheck> {
    check_q_open(q)?;
    if stages.is_empty() {
        return Err(GeoError::NotAMartingale("no stages".into()));
    }
    let shape = stages[0]
        .first()
        .ok_or_else(|| GeoError::NotAMartingale("empty stage 0".into()))?
        .shape();
    for (k, stage) in stages.iter().enumerate() {
        if stage.len() != 1 << k {
            return Err(GeoError::NotAMartingale(format!(
                "stage {k} has {} values, expected {}",
                stage.len(),
                1usize << k
            )));
        }
        if stage.iter().any(|m| m.shape() != shape) {
            return Err(GeoError::DimensionMismatch(
                "martingale values differ in shape".into(),
            ));
        }
    }
    let sq = |m: &DenseMatrix| schatten_norm(m, q).map(|v| v * v);
    let mut lhs = 0.0;
    let mut sup: f64 = 0.0;
    for k in 0..stages.len() {
        let mean_sq: f64 = stages[k].iter().map(sq).sum::<Result<f64>>()? / stages[k].len() as f64;
        sup = sup.max(mean_sq);
        if k + 1 == stages.len() {
            break;
        }
        let next = &stages[k + 1];
        let mut increments = 0.0;
        for (i, parent) in stages[k].iter().enumerate() {
            let (left, right) = (&next[i], &next[i | (1 << k)]);
            let average = (left + right) * 0.5;
            let gap = (&average - parent).norm();
            if gap > MARTINGALE_TOL * (1.0 + parent.norm()) {
                return Err(GeoError::NotAMartingale(format!(
                    "stage {} does not average to stage {k} at index {i} (gap {gap:e})",
                    k + 1
                )));
            }
            increments += sq(&(left - parent))? + sq(&(right - parent))?;
        }
        lhs += increments / next.len() as f64;
    }
    let rhs_bound = sup / (q - 1.0);
    Ok(MartingaleCheck {
        lhs,
        rhs_bound,
        holds: lhs <= rhs_bound * (1.0 + 1e-6),
    })
}

/// Distortion lower bounds for `f: ({-1,1}^k, l_p) -> S_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypercubeBound {
    /// `k^{1/p - 1/q}`: what Enflo type `q` forces on any such map.
    pub implied: f64,
    /// The same argument run on `f`'s own pair norms: the `q`-power mean of
    /// the edge ratios over the `q`-power mean of the antipodal ratios.
    pub witnessed: f64,
    /// Exact distortion of `f` over all pairs.
    pub actual: f64,
}

pub fn hypercube_lower_bound(f: &[DenseMatrix], p: f64, q: f64) -> Result<HypercubeBound> {
    check_q_closed(q)?;
    if !(p >= 1.0 && q > p) {
        return Err(GeoError::InvalidExponents { p, q });
    }
    let k = cube_dimension(f)?;
    let source = hypercube_metric(k, p)?;
    let target = FiniteMetric::from_fn(f.len(), |i, j| {
        schatten_norm(&(&f[i] - &f[j]), q).unwrap_or(f64::NAN)
    });
    let actual = distortion_between(&source, &target)?.value;
    let kf = k as f64;
    let (antipodal, edges) = enflo_sums(f, q, k)?;
    let points = f.len() as f64;
    // ratios ||f(eps) - f(eps')|| / ||eps - eps'||_p with ||edge||_p = 2 and
    // ||antipode||_p = 2 k^{1/p}
    let edge_mean = (edges / (kf * points)).powf(1.0 / q) / 2.0;
    let antipodal_mean = (antipodal / points).powf(1.0 / q) / (2.0 * kf.powf(1.0 / p));
    Ok(HypercubeBound {
        implied: kf.powf(1.0 / p - 1.0 / q),
        witnessed: edge_mean / antipodal_mean,
        actual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_cube(k: usize) -> Vec<DenseMatrix> {
        (0..1usize << k)
            .map(|mask| {
                DenseMatrix::from_fn(k, k, |i, j| {
                    if i != j {
                        0.0
                    } else if mask >> i & 1 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                })
            })
            .collect()
    }

    #[test]
    fn enflo_equality_on_diagonal_cube() {
        for q in [1.0, 1.5, 2.0] {
            let k = 4;
            let r = enflo_type_check(q, &diag_cube(k)).unwrap();
            let expected = 16.0 * 2f64.powf(q) * 4.0;
            assert!((r.lhs - expected).abs() < 1e-9 && (r.rhs - expected).abs() < 1e-9);
            assert!(r.holds);
        }
        let constant = vec![DenseMatrix::identity(2, 2); 8];
        let r = enflo_type_check(1.5, &constant).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(matches!(
            enflo_type_check(2.5, &constant),
            Err(GeoError::InvalidExponent(_))
        ));
    }

    #[test]
    fn roundness_degenerate_cases() {
        let x = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let same = roundness_check(1.5, [&x, &x, &x, &x]).unwrap();
        assert!(same.holds && same.lhs == 0.0);
        let pts: Vec<DenseMatrix> = (1..=4).map(|i| &x * i as f64).collect();
        let line = roundness_check(1.5, [&pts[0], &pts[1], &pts[2], &pts[3]]).unwrap();
        let n = schatten_norm(&x, 1.5).unwrap().powf(1.5);
        // sides 1 + 1 + 1 + 3^q, diagonals 2^q + 2^q
        assert!((line.rhs - n * (3.0 + 3f64.powf(1.5))).abs() < 1e-9);
        assert!((line.lhs - n * 2.0 * 2f64.powf(1.5)).abs() < 1e-9);
        assert!(line.holds);
    }

    #[test]
    fn clarkson_and_ball_equalities() {
        let a = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]);
        let zero = DenseMatrix::zeros(2, 2);
        let r = clarkson_check(1.25, &a, &zero).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12);
        let r = clarkson_check(1.25, &a, &a).unwrap();
        assert!(
            r.holds && (r.lhs - 2f64.powf(0.25) * schatten_pow(&a, 1.25).unwrap()).abs() < 1e-9
        );
        let b = DenseMatrix::from_row_slice(2, 2, &[0.3, -1.0, 2.0, 0.1]);
        let r = ball_convexity_check(2.0, &a, &b).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-9);
        let r = ball_convexity_check(1.5, &a, &zero).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-9);
        assert!(ball_convexity_check(1.0, &a, &b).is_err());
    }

    #[test]
    fn martingale_examples() {
        let x = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]);
        let zero = DenseMatrix::zeros(2, 2);
        let one_step = vec![vec![zero.clone()], vec![x.clone(), -&x]];
        let r = martingale_cotype_check(1.5, &one_step).unwrap();
        let nx = schatten_norm(&x, 1.5).unwrap().powi(2);
        assert!((r.lhs - nx).abs() < 1e-12 && (r.rhs_bound - nx / 0.5).abs() < 1e-12);
        assert!(r.holds);
        let constant = vec![vec![x.clone()], vec![x.clone(), x.clone()]];
        let r = martingale_cotype_check(1.25, &constant).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds);
        let broken = vec![vec![zero], vec![x.clone(), x]];
        assert!(matches!(
            martingale_cotype_check(1.5, &broken),
            Err(GeoError::NotAMartingale(_))
        ));
    }

    #[test]
    fn hypercube_bound_on_diagonal_cube() {
        let r = hypercube_lower_bound(&diag_cube(4), 1.0, 2.0).unwrap();
        assert!((r.implied - 2.0).abs() < 1e-12);
        assert!((r.actual - 2.0).abs() < 1e-9);
        assert!((r.witnessed - 2.0).abs() < 1e-9);
        let r1 = hypercube_lower_bound(&diag_cube(1), 1.0, 2.0).unwrap();
        assert_eq!(r1.implied, 1.0);
        let collapsed = vec![DenseMatrix::identity(2, 2); 4];
        assert!(matches!(
            hypercube_lower_bound(&collapsed, 1.0, 2.0),
            Err(GeoError::CollapsedPair(_, _))
        ));
    }
}
