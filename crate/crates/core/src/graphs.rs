//! Diamond and Laakso graphs, their shortest-path metrics and explicit `l_1`
//! embeddings.
//!
//! Both families start from a single edge `source -> sink`. A diamond step
//! replaces each edge `u -> v` by the two paths `u a v` and `u b v`. A Laakso
//! step subdivides `u -> v` into `u x1 . x3 v` and replaces the middle two edges
//! by the parallel paths `x1 a x3` and `x1 b x3`. New vertex ids are handed out
//! in edge order, level by level, so every construction is reproducible.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::spectral::{schatten_norm, DenseMatrix};

pub const DEFAULT_EDGE_BUDGET: usize = 1_000_000;
pub const MAX_METRIC_POINTS: usize = 5000;
pub const MAX_HYPERCUBE_K: usize = 12;
/// Cap on `|V| * (number of cuts)` for `l1_embed`.
const MAX_EMBED_ENTRIES: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Diamond,
    Laakso,
}

impl GraphKind {
    /// Edges created per edge in one refinement step.
    fn branching(self) -> usize {
        match self {
            Self::Diamond => 4,
            Self::Laakso => 6,
        }
    }
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Diamond => "diamond",
            Self::Laakso => "laakso",
        })
    }
}

impl std::str::FromStr for GraphKind {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diamond" => Ok(Self::Diamond),
            "laakso" => Ok(Self::Laakso),
            other => Err(GeoError::Parse(format!("unknown graph kind {other:?}"))),
        }
    }
}

/// The midpoints `{a, b}` of two parallel length-2 paths between `u` and `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AntiEdge {
    pub a: usize,
    pub b: usize,
    pub u: usize,
    pub v: usize,
}

#[derive(Debug, Clone)]
pub struct LevelGraph {
    pub kind: GraphKind,
    pub level: usize,
    pub n_vertices: usize,
    /// Unit-length edges oriented away from the source.
    pub edges: Vec<(usize, usize)>,
    pub source: usize,
    pub sink: usize,
    /// `anti_edges[j]` holds the pairs created when passing to level `j`;
    /// entries 0 and 1 are empty.
    pub anti_edges: Vec<Vec<AntiEdge>>,
    /// Level at which each vertex was created.
    pub provenance: Vec<usize>,
}

/// New vertices created from one edge `u -> v` by a refinement step.
#[derive(Debug, Clone, Copy)]
enum Expansion {
    Diamond {
        a: usize,
        b: usize,
    },
    Laakso {
        x1: usize,
        a: usize,
        b: usize,
        x3: usize,
    },
}

fn check_budget(kind: GraphKind, k: usize, budget: usize) -> Result<()> {
    if k == 0 {
        return Err(GeoError::Parse("graph level must be at least 1".into()));
    }
    let mut edges: usize = 1;
    for _ in 1..k {
        edges = edges
            .checked_mul(kind.branching())
            .filter(|e| *e <= budget)
            .ok_or_else(|| {
                GeoError::TooLarge(format!("{kind} level {k} exceeds the edge budget {budget}"))
            })?;
    }
    if edges > budget {
        return Err(GeoError::TooLarge(format!(
            "{kind} level {k} exceeds the edge budget {budget}"
        )));
    }
    Ok(())
}

impl LevelGraph {
    fn single_edge(kind: GraphKind) -> Self {
        Self {
            kind,
            level: 1,
            n_vertices: 2,
            edges: vec![(0, 1)],
            source: 0,
            sink: 1,
            anti_edges: vec![Vec::new(), Vec::new()],
            provenance: vec![1, 1],
        }
    }

    /// Advances one level; returns the expansion of every old edge in order.
    fn refine(&mut self) -> Vec<Expansion> {
        let level = self.level + 1;
        let mut next = self.n_vertices;
        let mut fresh = || {
            next += 1;
            next - 1
        };
        let mut edges = Vec::with_capacity(self.edges.len() * self.kind.branching());
        let mut expansions = Vec::with_capacity(self.edges.len());
        let mut anti = Vec::with_capacity(self.edges.len());
        for &(u, v) in &self.edges {
            match self.kind {
                GraphKind::Diamond => {
                    let (a, b) = (fresh(), fresh());
                    edges.extend([(u, a), (a, v), (u, b), (b, v)]);
                    anti.push(AntiEdge { a, b, u, v });
                    expansions.push(Expansion::Diamond { a, b });
                }
                GraphKind::Laakso => {
                    let (x1, a, b, x3) = (fresh(), fresh(), fresh(), fresh());
                    edges.extend([(u, x1), (x1, a), (a, x3), (x1, b), (b, x3), (x3, v)]);
                    anti.push(AntiEdge { a, b, u: x1, v: x3 });
                    expansions.push(Expansion::Laakso { x1, a, b, x3 });
                }
            }
        }
        self.provenance.resize(next, level);
        self.n_vertices = next;
        self.edges = edges;
        self.anti_edges.push(anti);
        self.level = level;
        expansions
    }

    pub fn build(kind: GraphKind, k: usize, budget: usize) -> Result<Self> {
        check_budget(kind, k, budget)?;
        let mut g = Self::single_edge(kind);
        while g.level < k {
            g.refine();
        }
        Ok(g)
    }

    /// All anti-edges of levels `2..=k`.
    pub fn all_anti_edges(&self) -> impl Iterator<Item = &AntiEdge> {
        self.anti_edges.iter().flatten()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Edge list with header `# kind k |V| |E|`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!(
            "# {} {} {} {}\n",
            self.kind,
            self.level,
            self.n_vertices,
            self.edges.len()
        );
        for (u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    /// Two-terminal series-parallel test: repeatedly merge parallel edges and
    /// contract internal degree-2 vertices; succeeds iff a single
    /// `source - sink` edge remains.
    pub fn is_series_parallel(&self) -> bool {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.n_vertices];
        for &(u, v) in &self.edges {
            if u == v {
                return false;
            }
            // parallel copies collapse immediately
            adj[u].insert(v);
            adj[v].insert(u);
        }
        let mut queue: VecDeque<usize> = (0..self.n_vertices).collect();
        while let Some(x) = queue.pop_front() {
            if x == self.source || x == self.sink || adj[x].len() != 2 {
                continue;
            }
            let nbrs: Vec<usize> = adj[x].iter().copied().collect();
            let (y, z) = (nbrs[0], nbrs[1]);
            adj[x].clear();
            adj[y].remove(&x);
            adj[z].remove(&x);
            adj[y].insert(z);
            adj[z].insert(y);
            queue.push_back(y);
            queue.push_back(z);
        }
        let live_edges: usize = adj.iter().map(|n| n.len()).sum::<usize>() / 2;
        live_edges == 1 && adj[self.source].contains(&self.sink)
    }
}

pub fn diamond(k: usize) -> Result<LevelGraph> {
    LevelGraph::build(GraphKind::Diamond, k, DEFAULT_EDGE_BUDGET)
}

pub fn laakso(k: usize) -> Result<LevelGraph> {
    LevelGraph::build(GraphKind::Laakso, k, DEFAULT_EDGE_BUDGET)
}

/// A symmetric distance matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetric {
    n: usize,
    dist: Vec<f64>,
}

impl FiniteMetric {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self { n, dist }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            n: self.n,
            dist: self.dist.iter().map(|d| d * lambda).collect(),
        }
    }

    /// Largest violation `d(i,k) - d(i,j) - d(j,k)` over all triples.
    pub fn triangle_defect(&self) -> f64 {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut worst: f64 = f64::NEG_INFINITY;
                for j in 0..n {
                    let dij = self.get(i, j);
                    for k in 0..n {
                        worst = worst.max(self.get(i, k) - dij - self.get(j, k));
                    }
                }
                worst
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
}

fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(x) = queue.pop_front() {
        let d = dist[x].expect("queued vertices are labelled");
        for &y in &adj[x] {
            if dist[y].is_none() {
                dist[y] = Some(d + 1);
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Hop distances from `source`.
pub fn distances_from(g: &LevelGraph, source: usize) -> Result<Vec<usize>> {
    bfs(&g.adjacency(), source)
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or(GeoError::Disconnected)
}

/// All-pairs unit-weight BFS, one source per task.
pub fn shortest_path_metric(g: &LevelGraph) -> Result<FiniteMetric> {
    let n = g.n_vertices;
    if n > MAX_METRIC_POINTS {
        return Err(GeoError::TooLarge(format!(
            "all-pairs metric on {n} points exceeds {MAX_METRIC_POINTS}"
        )));
    }
    let adj = g.adjacency();
    let rows: Vec<Option<Vec<usize>>> = (0..n)
        .into_par_iter()
        .map(|s| bfs(&adj, s).into_iter().collect())
        .collect();
    let mut dist = Vec::with_capacity(n * n);
    for row in rows {
        let row = row.ok_or(GeoError::Disconnected)?;
        dist.extend(row.into_iter().map(|d| d as f64));
    }
    Ok(FiniteMetric { n, dist })
}

/// `{-1,1}^k` with the `l_p` distance `2 * hamming^{1/p}`. Point `i` has
/// coordinate `j` equal to `-1` iff bit `j` of `i` is set.
pub fn hypercube_metric(k: usize, p: f64) -> Result<FiniteMetric> {
    if k > MAX_HYPERCUBE_K {
        return Err(GeoError::TooLarge(format!(
            "hypercube dimension {k} exceeds {MAX_HYPERCUBE_K}"
        )));
    }
    if p.is_nan() || p <= 0.0 {
        return Err(GeoError::InvalidExponent(format!(
            "p must be positive, got {p}"
        )));
    }
    Ok(FiniteMetric::from_fn(1 << k, |i, j| {
        2.0 * ((i ^ j).count_ones() as f64).powf(1.0 / p)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TargetNorm {
    L1,
    Schatten(f64),
}

#[derive(Debug, Clone)]
pub enum Images {
    Vectors(Vec<Vec<f64>>),
    Matrices(Vec<DenseMatrix>),
}

#[derive(Debug, Clone)]
pub struct CoordinateEmbedding {
    pub target_norm: TargetNorm,
    pub images: Images,
    pub scale: f64,
}

impl CoordinateEmbedding {
    pub fn l1(vectors: Vec<Vec<f64>>) -> Self {
        Self {
            target_norm: TargetNorm::L1,
            images: Images::Vectors(vectors),
            scale: 1.0,
        }
    }

    pub fn schatten(q: f64, matrices: Vec<DenseMatrix>) -> Self {
        Self {
            target_norm: TargetNorm::Schatten(q),
            images: Images::Matrices(matrices),
            scale: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        match &self.images {
            Images::Vectors(v) => v.len(),
            Images::Matrices(m) => m.len(),
        }
    }

    pub fn image_distance(&self, i: usize, j: usize) -> Result<f64> {
        let raw = match (&self.images, self.target_norm) {
            (Images::Vectors(v), TargetNorm::L1) => {
                v[i].iter().zip(&v[j]).map(|(a, b)| (a - b).abs()).sum()
            }
            (Images::Vectors(v), TargetNorm::Schatten(q)) => {
                // vectors read as diagonal matrices
                let s: f64 = v[i]
                    .iter()
                    .zip(&v[j])
                    .map(|(a, b)| (a - b).abs().powf(q))
                    .sum();
                s.powf(1.0 / q)
            }
            (Images::Matrices(m), TargetNorm::Schatten(q)) => schatten_norm(&(&m[i] - &m[j]), q)?,
            (Images::Matrices(m), TargetNorm::L1) => schatten_norm(&(&m[i] - &m[j]), 1.0)?,
        };
        Ok(raw * self.scale)
    }

    /// Pairwise image distances as a metric.
    pub fn target_metric(&self) -> Result<FiniteMetric> {
        let n = self.n();
        let rows: Vec<Result<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.image_distance(i, j)).collect())
            .collect();
        let mut dist = Vec::with_capacity(n * n);
        for row in rows {
            dist.extend(row?);
        }
        Ok(FiniteMetric { n, dist })
    }

    /// `{"vertex": [coords]}` for vector images.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        match &self.images {
            Images::Vectors(v) => {
                for (i, coords) in v.iter().enumerate() {
                    map.insert(i.to_string(), serde_json::json!(coords));
                }
            }
            Images::Matrices(m) => {
                for (i, a) in m.iter().enumerate() {
                    map.insert(
                        i.to_string(),
                        serde_json::json!(crate::matrix_io::MatrixJson::from(a)),
                    );
                }
            }
        }
        serde_json::Value::Object(map)
    }
}

/// Distortion of a fixed map with the best scaling: the product of the
/// largest expansion and the largest contraction ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionReport {
    pub value: f64,
    pub argmax_expand: (usize, usize),
    pub argmax_contract: (usize, usize),
}

pub fn distortion(f: &CoordinateEmbedding, source: &FiniteMetric) -> Result<DistortionReport> {
    let n = source.n();
    if f.n() != n {
        return Err(GeoError::DimensionMismatch(format!(
            "{} images for {n} points",
            f.n()
        )));
    }
    let target = f.target_metric()?;
    distortion_between(source, &target)
}

/// Distortion of the identity map between two metrics on the same points.
pub fn distortion_between(
    source: &FiniteMetric,
    target: &FiniteMetric,
) -> Result<DistortionReport> {
    let n = source.n();
    if target.n() != n {
        return Err(GeoError::DimensionMismatch(format!(
            "metrics on {n} and {} points",
            target.n()
        )));
    }
    let mut expand = (0.0, (0, 0));
    let mut contract = (0.0, (0, 0));
    for i in 0..n {
        for j in (i + 1)..n {
            let (ds, dt) = (source.get(i, j), target.get(i, j));
            if ds == 0.0 {
                continue;
            }
            if dt == 0.0 {
                return Err(GeoError::CollapsedPair(i, j));
            }
            if dt / ds > expand.0 {
                expand = (dt / ds, (i, j));
            }
            if ds / dt > contract.0 {
                contract = (ds / dt, (i, j));
            }
        }
    }
    let value = if n < 2 { 1.0 } else { expand.0 * contract.0 };
    Ok(DistortionReport {
        value,
        argmax_expand: expand.1,
        argmax_contract: contract.1,
    })
}

/// Cut embedding into `l_1` with 0/1 coordinates, one per cut.
///
/// The level-1 cut is `{source}`. A diamond step splits every cut `S` in two:
/// for each edge `u -> v` crossing `S` the first copy adds the new midpoint `a`
/// and the second adds `b`; edges inside `S` bring both midpoints along. A
/// Laakso step splits every cut in four; for a crossing edge with near
/// pendant `x` (adjacent to the endpoint in `S`) and far pendant `y` the copies
/// add nothing, `{x, a, b, y}`, `{x, a}` and `{x, b}`. Source and sink stay
/// separated by every cut, so source-sink distances are preserved.
pub fn l1_embed(g: &LevelGraph) -> Result<CoordinateEmbedding> {
    let copies = match g.kind {
        GraphKind::Diamond => 2,
        GraphKind::Laakso => 4,
    };
    let cuts_final = (1..g.level).fold(1usize, |c, _| c.saturating_mul(copies));
    if g.n_vertices.saturating_mul(cuts_final) > MAX_EMBED_ENTRIES {
        return Err(GeoError::TooLarge(format!(
            "l1 embedding of {} vertices with {cuts_final} cuts",
            g.n_vertices
        )));
    }
    let mut h = LevelGraph::single_edge(g.kind);
    let mut cuts: Vec<Vec<bool>> = vec![vec![true, false]];
    while h.level < g.level {
        let old_edges = h.edges.clone();
        let expansions = h.refine();
        let n = h.n_vertices;
        let mut next = Vec::with_capacity(cuts.len() * copies);
        for cut in &cuts {
            for rule in 0..copies {
                let mut s = cut.clone();
                s.resize(n, false);
                for (&(u, v), exp) in old_edges.iter().zip(&expansions) {
                    let (iu, iv) = (cut[u], cut[v]);
                    match *exp {
                        Expansion::Diamond { a, b } => {
                            if iu && iv {
                                s[a] = true;
                                s[b] = true;
                            } else if iu != iv {
                                s[if rule == 0 { a } else { b }] = true;
                            }
                        }
                        Expansion::Laakso { x1, a, b, x3 } => {
                            if iu && iv {
                                for w in [x1, a, b, x3] {
                                    s[w] = true;
                                }
                            } else if iu != iv {
                                let (near, far) = if iu { (x1, x3) } else { (x3, x1) };
                                let added: &[usize] = match rule {
                                    0 => &[],
                                    1 => &[near, a, b, far],
                                    2 => &[near, a],
                                    _ => &[near, b],
                                };
                                for &w in added {
                                    s[w] = true;
                                }
                            }
                        }
                    }
                }
                next.push(s);
            }
        }
        cuts = next;
    }
    let n = h.n_vertices;
    let vectors = (0..n)
        .map(|v| cuts.iter().map(|c| if c[v] { 1.0 } else { 0.0 }).collect())
        .collect();
    Ok(CoordinateEmbedding::l1(vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_diamonds() {
        let d1 = diamond(1).unwrap();
        assert_eq!((d1.n_vertices, d1.edges.len()), (2, 1));
        assert_eq!(d1.all_anti_edges().count(), 0);
        let d2 = diamond(2).unwrap();
        assert_eq!((d2.n_vertices, d2.edges.len()), (4, 4));
        assert_eq!(d2.all_anti_edges().count(), 1);
        let d3 = diamond(3).unwrap();
        assert_eq!((d3.n_vertices, d3.edges.len()), (12, 16));
        assert_eq!((d3.anti_edges[2].len(), d3.anti_edges[3].len()), (1, 4));
    }

    #[test]
    fn small_laakso() {
        let l2 = laakso(2).unwrap();
        assert_eq!((l2.n_vertices, l2.edges.len()), (6, 6));
        let l3 = laakso(3).unwrap();
        assert_eq!((l3.n_vertices, l3.edges.len()), (30, 36));
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(diamond(11), Err(GeoError::TooLarge(_))));
        assert!(diamond(10).is_ok());
        assert!(matches!(laakso(9), Err(GeoError::TooLarge(_))));
        assert!(matches!(
            LevelGraph::build(GraphKind::Laakso, 3, 35),
            Err(GeoError::TooLarge(_))
        ));
    }

    #[test]
    fn series_parallel_reduction() {
        for k in 1..=4 {
            assert!(diamond(k).unwrap().is_series_parallel());
            assert!(laakso(k).unwrap().is_series_parallel());
        }
        // K4 with terminals 0 and 1 is not series-parallel
        let k4 = LevelGraph {
            kind: GraphKind::Diamond,
            level: 2,
            n_vertices: 4,
            edges: vec![(0, 2), (0, 3), (2, 3), (2, 1), (3, 1), (0, 1)],
            source: 0,
            sink: 1,
            anti_edges: vec![Vec::new(); 3],
            provenance: vec![1, 1, 2, 2],
        };
        assert!(!k4.is_series_parallel());
    }

    #[test]
    fn source_sink_distances() {
        for k in 1..=5 {
            let d = distances_from(&diamond(k).unwrap(), 0).unwrap();
            assert_eq!(d[1], 1 << (k - 1));
        }
        for k in 1..=4 {
            let d = distances_from(&laakso(k).unwrap(), 0).unwrap();
            assert_eq!(d[1], 1 << (2 * (k - 1)));
        }
    }

    #[test]
    fn anti_edge_geometry() {
        for k in 2..=4 {
            let g = diamond(k).unwrap();
            let metric = shortest_path_metric(&g).unwrap();
            for e in g.all_anti_edges() {
                assert_eq!(metric.get(e.a, e.b), 2.0 * metric.get(e.a, e.u));
            }
        }
    }

    #[test]
    fn metrics_are_metrics() {
        let m = shortest_path_metric(&laakso(3).unwrap()).unwrap();
        assert!(m.triangle_defect() <= 0.0);
        let h = hypercube_metric(3, 1.5).unwrap();
        assert!((h.get(0, 7) - 2.0 * 3f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(hypercube_metric(1, 1.0).unwrap().get(0, 1), 2.0);
        assert!(matches!(
            hypercube_metric(13, 1.0),
            Err(GeoError::TooLarge(_))
        ));
    }

    #[test]
    fn distortion_basics() {
        let m = shortest_path_metric(&diamond(3).unwrap()).unwrap();
        assert_eq!(distortion_between(&m, &m).unwrap().value, 1.0);
        assert_eq!(distortion_between(&m, &m.scaled(3.5)).unwrap().value, 1.0);
        let collapsed = FiniteMetric::from_fn(3, |i, j| if i + j == 1 { 0.0 } else { 1.0 });
        let base = FiniteMetric::from_fn(3, |_, _| 1.0);
        assert!(matches!(
            distortion_between(&base, &collapsed),
            Err(GeoError::CollapsedPair(0, 1))
        ));
    }

    #[test]
    fn l1_embedding_small_cases() {
        let d1 = diamond(1).unwrap();
        let e = l1_embed(&d1).unwrap();
        let r = distortion(&e, &shortest_path_metric(&d1).unwrap()).unwrap();
        assert_eq!(r.value, 1.0);
        for g in [
            diamond(2).unwrap(),
            diamond(3).unwrap(),
            laakso(2).unwrap(),
            laakso(3).unwrap(),
        ] {
            let e = l1_embed(&g).unwrap();
            let r = distortion(&e, &shortest_path_metric(&g).unwrap()).unwrap();
            assert!(r.value <= 2.0 + 1e-9, "{} {}: {}", g.kind, g.level, r.value);
        }
    }

    #[test]
    fn edge_list_header() {
        let text = diamond(2).unwrap().to_edge_list();
        assert!(text.starts_with("# diamond 2 4 4\n0 2\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
