//! Dimension lower bounds for subspaces of `S_1` that contain a Lipschitz
//! quotient copy of the embedded Laakso graph.
//!
//! With `pi` a certified lower bound on the Markov 2-convexity of
//! `C_k = l1_embed(L_k)` and `Pi_2(X) <= kappa * C(d) * sqrt(ln d)` for every
//! `d`-dimensional `X` in `S_1`, where `C(d) = exp(1 / (1 + 1/ln d)) <= e`
//! comes from taking `q = 1 + 1/ln d`, any `X` with `qs_X(C_k) <= alpha` has
//!
//! ```text
//! ln dim X >= (pi / (C alpha kappa))^2,   i.e.   dim X >= n^{c / alpha^2}
//! ```
//!
//! with `n = |C_k|` and `c = pi^2 / (C^2 kappa^2 ln n)`.

use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::graphs::{distortion, l1_embed, shortest_path_metric, GraphKind, LevelGraph};

use super::markov::{laakso_canonical_chain, markov_convexity_ratio, PointMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateOptions {
    /// Comparability constant between Markov convexity and martingale cotype
    /// of `S_q`; not determined numerically, so it is a parameter.
    pub kappa: f64,
    pub budget_edges: usize,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            budget_edges: crate::graphs::DEFAULT_EDGE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpossibilityCertificate {
    pub k: usize,
    pub alpha: f64,
    /// `|C_k| = |V(L_k)|`.
    pub n: usize,
    /// Markov 2-convexity lower bound of `C_k` in its `l_1` metric.
    pub pi2_lower: f64,
    /// Same chain with `L_k` in its own shortest-path metric.
    pub pi2_lower_graph: f64,
    pub embedding_distortion: f64,
    pub truncation_error_bound: f64,
    /// `C` used numerically: the supremum `e` of `C(d)`.
    pub constant_c: f64,
    pub kappa: f64,
    /// `(pi / (C alpha kappa))^2`.
    pub log_dim_lower: f64,
    /// `ln d` solving `kappa C(d) sqrt(ln d) = pi / alpha` exactly.
    pub log_dim_lower_sharp: f64,
    /// `dim X >= n^{n_exponent}`.
    pub n_exponent: f64,
    /// `n_exponent * alpha^2`.
    pub c_universal: f64,
    pub statement: String,
}

/// `(pi / (c alpha kappa))^2`.
pub fn exp_log_bound(pi: f64, alpha: f64, c: f64, kappa: f64) -> f64 {
    (pi / (c * alpha * kappa)).powi(2)
}

/// Root `L > 0` of `sqrt(L) exp(L / (L + 1)) = target`, by bisection.
fn sharp_log_dim(target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let g = |l: f64| l.sqrt() * (l / (l + 1.0)).exp();
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn impossibility_certificate(
    k: usize,
    alpha: f64,
    options: &CertificateOptions,
) -> Result<ImpossibilityCertificate> {
    if alpha.is_nan() || alpha < 1.0 {
        return Err(GeoError::Parse(format!(
            "alpha must be at least 1, got {alpha}"
        )));
    }
    if options.kappa.is_nan() || options.kappa <= 0.0 {
        return Err(GeoError::Parse(format!(
            "kappa must be positive, got {}",
            options.kappa
        )));
    }
    LevelGraph::build(GraphKind::Laakso, k.max(1), options.budget_edges)?;
    let (chain, identity, g) = laakso_canonical_chain(k)?;
    let graph_metric = shortest_path_metric(&g)?;
    let embedding = l1_embed(&g)?;
    let l1_metric = embedding.target_metric()?;
    let embedding_distortion = distortion(&embedding, &graph_metric)?.value;

    let through_embedding = markov_convexity_ratio(&chain, &identity, &l1_metric)?;
    let on_graph =
        markov_convexity_ratio(&chain, &PointMap::identity(g.n_vertices), &graph_metric)?;
    let pi = through_embedding.pi2_lower;
    let c = std::f64::consts::E;
    let log_dim_lower = exp_log_bound(pi, alpha, c, options.kappa);
    let n = g.n_vertices;
    let ln_n = (n as f64).ln();
    let n_exponent = log_dim_lower / ln_n;
    let statement = format!(
        "Every linear subspace X of S_1 with qs_X(C_{k}) <= {alpha} satisfies \
         C*kappa*sqrt(ln dim X) >= pi/alpha = {:.6}, where pi = {pi:.6} is the certified \
         Markov 2-convexity lower bound of C_{k}, the l1 image of L_{k} with n = {n} points. \
         With C = e and kappa = {}: dim X >= exp({log_dim_lower:.6}) = n^({n_exponent:.6}) = n^(c/alpha^2) \
         with c = {:.6}.",
        pi / alpha,
        options.kappa,
        n_exponent * alpha * alpha
    );
    Ok(ImpossibilityCertificate {
        k,
        alpha,
        n,
        pi2_lower: pi,
        pi2_lower_graph: on_graph.pi2_lower,
        embedding_distortion,
        truncation_error_bound: through_embedding.truncation_error_bound,
        constant_c: c,
        kappa: options.kappa,
        log_dim_lower,
        log_dim_lower_sharp: sharp_log_dim(pi / (alpha * options.kappa)),
        n_exponent,
        c_universal: n_exponent * alpha * alpha,
        statement,
    })
}
