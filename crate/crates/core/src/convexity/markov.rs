//! Exact evaluation of the Markov 2-convexity ratio
//!
//! ```text
//! sum_{k'>=1} sum_t 4^{-k'} E d(f(chi~_t(t - 2^k')), f(chi_t))^2
//!     / sum_t E d(f(chi_t), f(chi_{t-1}))^2
//! ```
//!
//! for a finite chain that sits at its initial law for `t <= 0`, moves at times
//! `1..=T` and is frozen afterwards. Forking at `s` and running two copies to
//! `t` is therefore the same as forking at `s' = clamp(s, 0, T)` and taking
//! `n = min(t, T) - s'` steps, so every term is one entry of the table
//!
//! ```text
//! D(s', n) = sum_w Pr[chi_{s'} = w] * q_w^T D2 q_w,   q_w = row w of P^n,
//! ```
//!
//! with `D2` the matrix of squared distances. Scales with `2^k' >= T` all see
//! the same table entries and collapse to `C1 + (2^k' - T) D(0, T)`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::graphs::{distances_from, laakso, FiniteMetric, LevelGraph};

const STOCHASTIC_TOL: f64 = 1e-12;
/// Extra scales beyond `ceil(log2 T)` in the default truncation.
const SCALE_CAP_MARGIN: usize = 16;

/// `ceil(log2 T) + 16`.
pub fn default_scale_cap(horizon: usize) -> usize {
    ceil_log2(horizon) + SCALE_CAP_MARGIN
}

fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Row-stochastic chain with initial law and horizon.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    n_states: usize,
    /// Sparse rows `(target, probability)` with positive probabilities.
    rows: Vec<Vec<(usize, f64)>>,
    initial: Vec<f64>,
    horizon: usize,
    scale_cap: usize,
}

impl ChainSpec {
    pub fn from_rows(
        rows: Vec<Vec<(usize, f64)>>,
        initial: Vec<f64>,
        horizon: usize,
        scale_cap: usize,
    ) -> Result<Self> {
        let n = rows.len();
        if n == 0 || initial.len() != n {
            return Err(GeoError::InvalidChain(format!(
                "{n} transition rows but an initial law of length {}",
                initial.len()
            )));
        }
        if horizon == 0 || scale_cap == 0 {
            return Err(GeoError::InvalidChain(
                "horizon and scale_cap must be positive".into(),
            ));
        }
        let mut clean = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            let mut total = 0.0;
            let mut kept = Vec::with_capacity(row.len());
            for (j, pr) in row {
                if j >= n || !pr.is_finite() || pr < 0.0 {
                    return Err(GeoError::InvalidChain(format!(
                        "bad entry ({i}, {j}) = {pr}"
                    )));
                }
                total += pr;
                if pr > 0.0 {
                    kept.push((j, pr));
                }
            }
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(GeoError::InvalidChain(format!("row {i} sums to {total}")));
            }
            clean.push(kept);
        }
        let mass: f64 = initial.iter().sum();
        if initial.iter().any(|x| !x.is_finite() || *x < 0.0) || (mass - 1.0).abs() > STOCHASTIC_TOL
        {
            return Err(GeoError::InvalidChain(format!(
                "initial law sums to {mass}"
            )));
        }
        Ok(Self {
            n_states: n,
            rows: clean,
            initial,
            horizon,
            scale_cap,
        })
    }

    /// Dense `P` given row by row.
    pub fn from_dense(
        p: &[Vec<f64>],
        initial: Vec<f64>,
        horizon: usize,
        scale_cap: usize,
    ) -> Result<Self> {
        let rows = p
            .iter()
            .map(|row| row.iter().copied().enumerate().collect())
            .collect();
        Self::from_rows(rows, initial, horizon, scale_cap)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn scale_cap(&self) -> usize {
        self.scale_cap
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn with_scale_cap(mut self, scale_cap: usize) -> Result<Self> {
        if scale_cap == 0 {
            return Err(GeoError::InvalidChain("scale_cap must be positive".into()));
        }
        self.scale_cap = scale_cap;
        Ok(self)
    }

    fn step(&self, dist: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        for (i, &mass) in dist.iter().enumerate() {
            if mass != 0.0 {
                for &(j, pr) in &self.rows[i] {
                    out[j] += mass * pr;
                }
            }
        }
        out
    }

    /// Laws of `chi_0, ..., chi_T`.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut laws = Vec::with_capacity(self.horizon + 1);
        laws.push(self.initial.clone());
        for s in 0..self.horizon {
            let next = self.step(&laws[s]);
            laws.push(next);
        }
        laws
    }
}

/// State `i` is sent to point `images[i]` of a metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointMap {
    pub images: Vec<usize>,
}

impl PointMap {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn constant(n: usize, point: usize) -> Self {
        Self {
            images: vec![point; n],
        }
    }

    fn check(&self, n_states: usize, metric: &FiniteMetric) -> Result<()> {
        if self.images.len() != n_states {
            return Err(GeoError::DimensionMismatch(format!(
                "point map covers {} states, chain has {n_states}",
                self.images.len()
            )));
        }
        if let Some(bad) = self.images.iter().find(|i| **i >= metric.n()) {
            return Err(GeoError::DimensionMismatch(format!(
                "image {bad} is outside a metric on {} points",
                metric.n()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pi2_lower: f64,
    pub truncation_error_bound: f64,
    pub scale_cap_used: usize,
}

/// `Q[w][n] = q^T D2 q` for `q` the law of `chi_n` started at `w`, `n <= T`.
fn fork_spread_table(
    chain: &ChainSpec,
    sq: &(dyn Fn(usize, usize) -> f64 + Sync),
) -> Vec<Vec<f64>> {
    let t_max = chain.horizon;
    (0..chain.n_states)
        .into_par_iter()
        .map(|w| {
            let mut row = Vec::with_capacity(t_max + 1);
            row.push(0.0);
            let mut dist = vec![0.0; chain.n_states];
            dist[w] = 1.0;
            for _ in 0..t_max {
                dist = chain.step(&dist);
                let support: Vec<usize> = (0..chain.n_states).filter(|&u| dist[u] != 0.0).collect();
                let mut acc = Compensated::default();
                for (a, &u) in support.iter().enumerate() {
                    for &v in &support[a + 1..] {
                        acc.add(2.0 * dist[u] * dist[v] * sq(u, v));
                    }
                }
                row.push(acc.value());
            }
            row
        })
        .collect()
}

/// Exact Markov 2-convexity lower bound of `f` along `chain`.
pub fn markov_convexity_ratio(
    chain: &ChainSpec,
    f: &PointMap,
    metric: &FiniteMetric,
) -> Result<ConvexityReport> {
    f.check(chain.n_states, metric)?;
    let big_t = chain.horizon;
    let sq = |u: usize, v: usize| {
        let d = metric.get(f.images[u], f.images[v]);
        d * d
    };
    let laws = chain.marginals();
    let spread = fork_spread_table(chain, &sq);
    let table = |s: usize, n: usize| -> f64 {
        let mut acc = Compensated::default();
        for (w, &mass) in laws[s].iter().enumerate() {
            if mass != 0.0 {
                acc.add(mass * spread[w][n]);
            }
        }
        acc.value()
    };

    let mut rhs = Compensated::default();
    for law in &laws[..big_t] {
        for (w, &mass) in law.iter().enumerate() {
            if mass != 0.0 {
                for &(u, pr) in chain.row(w) {
                    rhs.add(mass * pr * sq(w, u));
                }
            }
        }
    }
    let rhs = rhs.value();

    // scales with 2^k' >= T share these two quantities
    let mut c1 = Compensated::default();
    for t in 1..=big_t {
        c1.add(table(0, t));
    }
    for s in 1..big_t {
        c1.add(table(s, big_t - s));
    }
    let c1 = c1.value();
    let d_full = table(0, big_t);

    let cap = chain.scale_cap;
    let mut lhs = Compensated::default();
    for kp in 1..=cap {
        let weight = 0.25f64.powi(kp as i32);
        let h = 2f64.powi(kp as i32);
        let term = if h >= big_t as f64 {
            c1 + (h - big_t as f64) * d_full
        } else {
            let h = 1usize << kp;
            let mut acc = Compensated::default();
            for t in 1..=h {
                acc.add(table(0, t));
            }
            for s in 1..=(big_t - h) {
                acc.add(table(s, h));
            }
            for s in (big_t - h + 1)..big_t {
                acc.add(table(s, big_t - s));
            }
            acc.value()
        };
        lhs.add(weight * term);
    }
    let lhs = lhs.value();

    let tail = if 1usize
        .checked_shl(cap as u32 + 1)
        .is_none_or(|h| h >= big_t)
    {
        // every omitted scale has 2^k' >= T
        c1 * 0.25f64.powi(cap as i32) / 3.0 + d_full * 0.5f64.powi(cap as i32)
    } else {
        let diam = (0..chain.n_states)
            .flat_map(|u| (0..chain.n_states).map(move |v| (u, v)))
            .map(|(u, v)| sq(u, v))
            .fold(0.0, f64::max);
        diam * (big_t as f64 * 0.25f64.powi(cap as i32) / 3.0 + 0.5f64.powi(cap as i32))
    };
    let pi2_lower = if rhs > 0.0 { (lhs / rhs).sqrt() } else { 0.0 };
    Ok(ConvexityReport {
        lhs,
        rhs,
        pi2_lower,
        truncation_error_bound: tail,
        scale_cap_used: cap,
    })
}

/// Uniform forward walk on `L_k` from the source: each step moves to a uniformly
/// random neighbour strictly farther from the source; the sink is absorbing.
pub fn laakso_canonical_chain(k: usize) -> Result<(ChainSpec, PointMap, LevelGraph)> {
    if k < 2 {
        return Err(GeoError::InvalidChain(format!(
            "canonical chain needs k >= 2, got {k}"
        )));
    }
    let g = laakso(k)?;
    let depth = distances_from(&g, g.source)?;
    let adj = g.adjacency();
    let rows = (0..g.n_vertices)
        .map(|w| {
            if w == g.sink {
                return vec![(w, 1.0)];
            }
            let forward: Vec<usize> = adj[w]
                .iter()
                .copied()
                .filter(|&u| depth[u] > depth[w])
                .collect();
            let pr = 1.0 / forward.len() as f64;
            forward.into_iter().map(|u| (u, pr)).collect()
        })
        .collect();
    let mut initial = vec![0.0; g.n_vertices];
    initial[g.source] = 1.0;
    let horizon = depth[g.sink];
    let chain = ChainSpec::from_rows(rows, initial, horizon, default_scale_cap(horizon))?;
    Ok((chain, PointMap::identity(g.n_vertices), g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiamondRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Anti-edge versus edge squared distances. Any graph with recorded
/// anti-edges is accepted.
pub fn diamond_convexity_ratio(
    f: &PointMap,
    g: &LevelGraph,
    metric: &FiniteMetric,
) -> Result<DiamondRatio> {
    f.check(g.n_vertices, metric)?;
    let sq = |u: usize, v: usize| {
        let d = metric.get(f.images[u], f.images[v]);
        d * d
    };
    let mut lhs = Compensated::default();
    for e in g.all_anti_edges() {
        lhs.add(sq(e.a, e.b));
    }
    let mut rhs = Compensated::default();
    for &(u, v) in &g.edges {
        rhs.add(sq(u, v));
    }
    let (lhs, rhs) = (lhs.value(), rhs.value());
    Ok(DiamondRatio {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}

/// `k,n,lhs,rhs,pi2_lower,error_bound` table.
pub fn reports_to_csv(rows: &[(usize, usize, ConvexityReport)]) -> String {
    let mut out = String::from("k,n,lhs,rhs,pi2_lower,error_bound\n");
    for (k, n, r) in rows {
        let _ = writeln!(
            out,
            "{k},{n},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.lhs, r.rhs, r.pi2_lower, r.truncation_error_bound
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::shortest_path_metric;

    fn line_metric(n: usize) -> FiniteMetric {
        FiniteMetric::from_fn(n, |i, j| (i as f64 - j as f64).abs())
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(default_scale_cap(64), 22);
    }

    #[test]
    fn chain_validation() {
        assert!(matches!(
            ChainSpec::from_dense(&[vec![0.5, 0.4], vec![0.0, 1.0]], vec![1.0, 0.0], 2, 3),
            Err(GeoError::InvalidChain(_))
        ));
        assert!(matches!(
            ChainSpec::from_dense(&[vec![1.0]], vec![0.9], 2, 3),
            Err(GeoError::InvalidChain(_))
        ));
        assert!(
            ChainSpec::from_dense(&[vec![0.0, 1.0], vec![0.0, 1.0]], vec![1.0, 0.0], 2, 3).is_ok()
        );
    }

    #[test]
    fn constant_map_gives_zero() {
        let (chain, _, g) = laakso_canonical_chain(2).unwrap();
        let metric = shortest_path_metric(&g).unwrap();
        let r =
            markov_convexity_ratio(&chain, &PointMap::constant(g.n_vertices, 0), &metric).unwrap();
        assert_eq!((r.lhs, r.rhs, r.pi2_lower), (0.0, 0.0, 0.0));
    }

    #[test]
    fn deterministic_chain_gives_zero_lhs() {
        let n = 6;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if j == (i + 1).min(n - 1) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let mut init = vec![0.0; n];
        init[0] = 1.0;
        let chain = ChainSpec::from_dense(&rows, init, 5, 8).unwrap();
        let r = markov_convexity_ratio(&chain, &PointMap::identity(n), &line_metric(n)).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 5.0);
    }

    /// Two-state coin with a hand-computable answer: states 0, 1 at distance 1,
    /// each step resamples uniformly, horizon 1.
    #[test]
    fn one_step_coin_closed_form() {
        let chain =
            ChainSpec::from_dense(&[vec![0.5, 0.5], vec![0.5, 0.5]], vec![1.0, 0.0], 1, 3).unwrap();
        let r = markov_convexity_ratio(&chain, &PointMap::identity(2), &line_metric(2)).unwrap();
        // at scale k' the fork time t - 2^k' is <= 0 for t in [1, 2^k'], and each
        // such t sees two independent one-step copies: 2^k' terms of 1/2
        let expected: f64 = (1..=3)
            .map(|kp| 0.25f64.powi(kp) * 2f64.powi(kp) * 0.5)
            .sum();
        assert!((r.lhs - expected).abs() < 1e-15);
        assert!((r.rhs - 0.5).abs() < 1e-15);
        // the omitted scales really add 1/16; the bound adds the C1 part on top
        assert!(
            (r.truncation_error_bound - (0.25f64.powi(3) / 3.0 * 0.5 + 0.125 * 0.5)).abs() < 1e-15
        );
    }

    #[test]
    fn canonical_chain_shape() {
        let (chain, _, g) = laakso_canonical_chain(2).unwrap();
        assert_eq!(chain.horizon(), 4);
        assert_eq!(chain.scale_cap(), 2 + SCALE_CAP_MARGIN);
        let branching: Vec<_> = (0..g.n_vertices)
            .filter(|&w| chain.row(w).len() == 2)
            .collect();
        assert_eq!(branching.len(), 1);
        for &(_, pr) in chain.row(branching[0]) {
            assert_eq!(pr, 0.5);
        }
        for k in 2..=4 {
            let (chain, _, _) = laakso_canonical_chain(k).unwrap();
            for w in 0..chain.n_states() {
                let s: f64 = chain.row(w).iter().map(|e| e.1).sum();
                assert_eq!(s, 1.0);
            }
        }
        assert!(laakso_canonical_chain(1).is_err());
    }

    #[test]
    fn scale_invariance() {
        let (chain, f, g) = laakso_canonical_chain(3).unwrap();
        let metric = shortest_path_metric(&g).unwrap();
        let a = markov_convexity_ratio(&chain, &f, &metric).unwrap();
        let b = markov_convexity_ratio(&chain, &f, &metric.scaled(3.0)).unwrap();
        assert!((b.lhs - 9.0 * a.lhs).abs() <= 1e-10 * b.lhs);
        assert!((b.rhs - 9.0 * a.rhs).abs() <= 1e-10 * b.rhs);
        assert!((a.pi2_lower - b.pi2_lower).abs() <= 1e-10);
    }

    #[test]
    fn diamond_d2_identity() {
        let g = crate::graphs::diamond(2).unwrap();
        let metric = shortest_path_metric(&g).unwrap();
        let r = diamond_convexity_ratio(&PointMap::identity(4), &g, &metric).unwrap();
        assert_eq!((r.lhs, r.rhs, r.ratio), (4.0, 4.0, 1.0));
        let c = diamond_convexity_ratio(&PointMap::constant(4, 0), &g, &metric).unwrap();
        assert_eq!(c.ratio, 0.0);
    }

    #[test]
    fn csv_has_header() {
        assert_eq!(reports_to_csv(&[]), "k,n,lhs,rhs,pi2_lower,error_bound\n");
    }
}
