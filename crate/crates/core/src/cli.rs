//! The `geolab` command line: `lewis`, `embed`, `convexity` and `certificate`.
//!
//! Parameters come from built-in defaults, then an optional `--config` file of
//! `key=value` lines, then flags. Exit codes: 0 success, 1 a check failed,
//! 2 usage error, 3 resource budget exceeded.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::convexity::{
    diamond_convexity_ratio, impossibility_certificate, laakso_canonical_chain,
    markov_convexity_ratio, reports_to_csv, CertificateOptions, ConvexityReport, DiamondRatio,
    PointMap,
};
use crate::embedding::{build_embedding, DistortionCertificate, EmbedOptions, EmbeddingReport};
use crate::error::{GeoError, Result};
use crate::graphs::{diamond, shortest_path_metric, GraphKind, LevelGraph, DEFAULT_EDGE_BUDGET};
use crate::lewis::{certify_lewis, solve_lewis, SolverConfig, SolverMode, SubspaceBasis};
use crate::matrix_io::MatrixJson;
use crate::random::seeded;
use crate::reports::{line_plot, write_atomic, CheckTally, RunManifest, Series};
use crate::spectral::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Svg => "svg",
        })
    }
}

impl FromStr for Format {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        <Self as ValueEnum>::from_str(s.trim(), true)
            .map_err(|_| GeoError::Parse(format!("unknown format {s:?}")))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "geolab",
    version,
    about = "Lewis bases, Schatten embeddings and Markov convexity certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for a Lewis basis and write its certificate.
    Lewis(LewisArgs),
    /// Build S_p -> S_q embeddings over a sweep of q.
    Embed(EmbedArgs),
    /// Markov convexity of Laakso graphs and anti-edge ratios of diamond graphs.
    Convexity(ConvexityArgs),
    /// Dimension lower bound for subspaces containing the embedded Laakso graph.
    Certificate(CertificateArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of json,csv,svg.
    #[arg(long, value_delimiter = ',')]
    format: Vec<Format>,
    #[arg(long)]
    budget_edges: Option<usize>,
    /// Omit wall-clock fields from the manifest.
    #[arg(long)]
    no_timestamp: bool,
    /// `key=value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LewisArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// JSON array of `{rows, cols, data}` matrices.
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Use the matrix units `E_11..E_kk` instead of a random subspace.
    #[arg(long)]
    diagonal: bool,
    #[arg(long)]
    mode: Option<SolverMode>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    diagonal: bool,
    /// Comma-separated target exponents.
    #[arg(long, value_delimiter = ',')]
    q: Vec<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    probes: Option<usize>,
}

#[derive(Args, Debug)]
struct ConvexityArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    kmax: Option<usize>,
    /// laakso, diamond or both.
    #[arg(long)]
    kind: Option<String>,
}

#[derive(Args, Debug)]
struct CertificateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

/// Layered parameter store: config file values overwritten by flags.
struct Settings {
    values: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl Settings {
    fn load(config: Option<&Path>) -> Result<Self> {
        let values = match config {
            Some(path) => crate::reports::parse_config(&std::fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        Ok(Self {
            values,
            used: BTreeMap::new(),
        })
    }

    fn flag<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    fn list_flag<T: Display>(&mut self, key: &str, values: &[T]) {
        if !values.is_empty() {
            let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            self.values.insert(key.to_string(), joined.join(","));
        }
    }

    fn switch(&mut self, key: &str, on: bool) {
        if on {
            self.values.insert(key.to_string(), "true".into());
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.values.remove(key)?;
        self.used.insert(key.to_string(), v.clone());
        Some(v)
    }

    fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
        v.trim()
            .parse()
            .map_err(|_| GeoError::Parse(format!("invalid value {v:?} for {key}")))
    }

    fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            Some(v) => Self::parse(key, &v),
            None => {
                self.used.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self
            .raw(key)
            .ok_or_else(|| GeoError::Parse(format!("missing required parameter {key}")))?;
        Self::parse(key, &v)
    }

    fn optional<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.raw(key).map(|v| Self::parse(key, &v)).transpose()
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| v.split(',').map(|s| Self::parse(key, s)).collect())
            .transpose()
    }

    fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(key) = self.values.keys().next() {
            return Err(GeoError::Parse(format!("unknown parameter {key}")));
        }
        Ok(self.used)
    }
}

/// Shared output settings.
#[derive(Debug, Clone, Serialize)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
    pub timestamp: bool,
}

impl OutputOptions {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            formats: vec![Format::Json, Format::Csv, Format::Svg],
            timestamp: false,
        }
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Files written by one command, relative to the output directory, and the
/// tally of its checks. The manifest is always the last entry.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<String>,
    pub checks: CheckTally,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.checks.all_passed() {
            0
        } else {
            1
        }
    }
}

struct Run<'a> {
    out: &'a OutputOptions,
    files: Vec<String>,
    checks: CheckTally,
    started: Instant,
}

impl<'a> Run<'a> {
    fn new(out: &'a OutputOptions) -> Self {
        Self {
            out,
            files: Vec::new(),
            checks: CheckTally::default(),
            started: Instant::now(),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.out.dir, name, contents.as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn finish(
        mut self,
        command: &str,
        config: BTreeMap<String, String>,
        seed: u64,
    ) -> Result<Outcome> {
        let (started_unix, wall_time_seconds) = if self.out.timestamp {
            let now = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            (Some(now), Some(self.started.elapsed().as_secs_f64()))
        } else {
            (None, None)
        };
        let name = format!("manifest_{command}.json");
        let manifest = RunManifest {
            tool: "geolab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seed,
            started_unix,
            wall_time_seconds,
            files: self.files.clone(),
            checks: self.checks,
        };
        self.write_json(&name, &manifest)?;
        Ok(Outcome {
            files: self.files,
            checks: self.checks,
        })
    }
}

/// Solver tolerance used by the commands; tighter than the library default so
/// that emitted residuals sit near rounding level.
pub const CLI_SOLVER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct LewisConfig {
    pub p: f64,
    pub k: usize,
    pub m: usize,
    pub basis: Option<PathBuf>,
    pub diagonal: bool,
    pub mode: SolverMode,
    pub tol: f64,
    /// Residual threshold for the pass/fail checks.
    pub check_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for LewisConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        Self {
            p: 1.0,
            k: 3,
            m: 4,
            basis: None,
            diagonal: false,
            mode: solver.mode,
            tol: CLI_SOLVER_TOL,
            check_tol: 1e-6,
            max_iters: solver.max_iters,
            seed: 0,
        }
    }
}

impl LewisConfig {
    fn load_basis(&self) -> Result<SubspaceBasis> {
        if let Some(path) = &self.basis {
            let mats: Vec<MatrixJson> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let elements = mats
                .iter()
                .map(DenseMatrix::try_from)
                .collect::<Result<Vec<_>>>()?;
            SubspaceBasis::new(self.p, elements)
        } else if self.diagonal {
            SubspaceBasis::diagonal(self.k, self.p)
        } else {
            SubspaceBasis::random(self.k, self.m, self.p, &mut seeded(self.seed))
        }
    }
}

pub fn cmd_lewis(cfg: &LewisConfig, out: &OutputOptions) -> Result<Outcome> {
    let config = echo(cfg)?;
    cmd_lewis_inner(cfg, out, config)
}

fn cmd_lewis_inner(
    cfg: &LewisConfig,
    out: &OutputOptions,
    config: BTreeMap<String, String>,
) -> Result<Outcome> {
    let basis = cfg.load_basis()?;
    let solver = SolverConfig {
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        mode: cfg.mode,
        seed: cfg.seed,
    };
    let cert = solve_lewis(&basis, &solver)?;
    let recomputed = certify_lewis(&cert, cfg.p);
    let mut run = Run::new(out);
    run.checks.record(recomputed.gram_residual <= cfg.check_tol);
    run.checks
        .record(recomputed.trace_residual <= cfg.check_tol);
    if out.wants(Format::Json) {
        run.write_json("lewis_certificate.json", &cert.to_json())?;
    }
    run.finish("lewis", config, cfg.seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbedConfig {
    pub p: f64,
    pub k: usize,
    pub m: usize,
    pub diagonal: bool,
    pub q_values: Vec<f64>,
    pub eps: f64,
    pub probes: usize,
    pub tol: f64,
    pub seed: u64,
}

/// `1.1, 1.2, ..., 2.0`.
pub fn default_q_sweep() -> Vec<f64> {
    (11..=20).map(|i| i as f64 / 10.0).collect()
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            k: 4,
            m: 4,
            diagonal: true,
            q_values: default_q_sweep(),
            eps: EmbedOptions::default().eps,
            probes: EmbedOptions::default().random_probes,
            tol: CLI_SOLVER_TOL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct EmbedPoint {
    #[serde(flatten)]
    report: EmbeddingReport,
    certified_bound: f64,
    violations: usize,
    within_bound: bool,
}

pub fn cmd_embed(cfg: &EmbedConfig, out: &OutputOptions) -> Result<Outcome> {
    let config = echo(cfg)?;
    cmd_embed_inner(cfg, out, config)
}

fn cmd_embed_inner(
    cfg: &EmbedConfig,
    out: &OutputOptions,
    config: BTreeMap<String, String>,
) -> Result<Outcome> {
    if cfg.q_values.is_empty() {
        return Err(GeoError::Parse("empty q sweep".into()));
    }
    for &q in &cfg.q_values {
        if !(cfg.p >= 1.0 && q > cfg.p && q.is_finite()) {
            return Err(GeoError::InvalidExponents { p: cfg.p, q });
        }
    }
    let basis = if cfg.diagonal {
        SubspaceBasis::diagonal(cfg.k, cfg.p)?
    } else {
        SubspaceBasis::random(cfg.k, cfg.m, cfg.p, &mut seeded(cfg.seed))?
    };
    let solver = SolverConfig {
        tol: cfg.tol,
        seed: cfg.seed,
        ..SolverConfig::default()
    };
    let options = EmbedOptions {
        eps: cfg.eps,
        random_probes: cfg.probes,
        seed: cfg.seed,
        ..EmbedOptions::default()
    };
    let points: Vec<EmbedPoint> = cfg
        .q_values
        .par_iter()
        .map(|&q| {
            let (map, cert): (_, DistortionCertificate) =
                build_embedding(&basis, q, &solver, &options)?;
            Ok(EmbedPoint {
                report: EmbeddingReport::new(&map, &cert, cfg.seed),
                certified_bound: cert.certified_bound,
                violations: cert.violations,
                within_bound: cert.within_bound(),
            })
        })
        .collect::<Result<_>>()?;

    let mut run = Run::new(out);
    for pt in &points {
        run.checks.record(pt.violations == 0);
        run.checks.record(pt.within_bound);
    }
    if out.wants(Format::Json) {
        run.write_json("embed_report.json", &points)?;
    }
    if out.wants(Format::Csv) {
        let mut csv = String::from("q,empirical_distortion,theorem_bound,certified_bound\n");
        for pt in &points {
            let _ = writeln!(
                csv,
                "{},{:.17e},{:.17e},{:.17e}",
                pt.report.q,
                pt.report.empirical_distortion,
                pt.report.theorem_bound,
                pt.certified_bound
            );
        }
        run.write("embed_sweep.csv", &csv)?;
    }
    if out.wants(Format::Svg) {
        let svg = line_plot(
            &format!("S_{} to S_q distortion, k = {}", cfg.p, cfg.k),
            "q",
            "distortion",
            &[
                Series {
                    name: "empirical",
                    points: points
                        .iter()
                        .map(|p| (p.report.q, p.report.empirical_distortion))
                        .collect(),
                },
                Series {
                    name: "bound",
                    points: points
                        .iter()
                        .map(|p| (p.report.q, p.certified_bound))
                        .collect(),
                },
            ],
        );
        run.write("embed_sweep.svg", &svg)?;
    }
    run.finish("embed", config, cfg.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindSelection {
    Laakso,
    Diamond,
    Both,
}

impl Display for KindSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Laakso => "laakso",
            Self::Diamond => "diamond",
            Self::Both => "both",
        })
    }
}

impl FromStr for KindSelection {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Self::Both),
            other => Ok(match other.parse::<GraphKind>()? {
                GraphKind::Laakso => Self::Laakso,
                GraphKind::Diamond => Self::Diamond,
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityConfig {
    pub kmax: usize,
    pub kind: KindSelection,
    pub budget_edges: usize,
    /// Largest admissible `truncation_error_bound / lhs`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for ConvexityConfig {
    fn default() -> Self {
        Self {
            kmax: 4,
            kind: KindSelection::Both,
            budget_edges: DEFAULT_EDGE_BUDGET,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct LaaksoRow {
    k: usize,
    n: usize,
    #[serde(flatten)]
    report: ConvexityReport,
}

#[derive(Debug, Clone, Serialize)]
struct DiamondRow {
    k: usize,
    n: usize,
    #[serde(flatten)]
    ratio: DiamondRatio,
}

#[derive(Debug, Clone, Serialize)]
struct ConvexitySummary {
    laakso: Vec<LaaksoRow>,
    diamond: Vec<DiamondRow>,
}

pub fn cmd_convexity(cfg: &ConvexityConfig, out: &OutputOptions) -> Result<Outcome> {
    let config = echo(cfg)?;
    cmd_convexity_inner(cfg, out, config)
}

fn cmd_convexity_inner(
    cfg: &ConvexityConfig,
    out: &OutputOptions,
    config: BTreeMap<String, String>,
) -> Result<Outcome> {
    let do_laakso = cfg.kind != KindSelection::Diamond;
    let do_diamond = cfg.kind != KindSelection::Laakso;
    if cfg.kmax >= 2 {
        if do_laakso {
            LevelGraph::build(GraphKind::Laakso, cfg.kmax, cfg.budget_edges)?;
        }
        if do_diamond {
            LevelGraph::build(GraphKind::Diamond, cfg.kmax, cfg.budget_edges)?;
        }
    }
    let ks: Vec<usize> = (2..=cfg.kmax).collect();
    let mut summary = ConvexitySummary {
        laakso: Vec::new(),
        diamond: Vec::new(),
    };
    if do_laakso {
        for &k in &ks {
            let (chain, map, g) = laakso_canonical_chain(k)?;
            let metric = shortest_path_metric(&g)?;
            let report = markov_convexity_ratio(&chain, &map, &metric)?;
            summary.laakso.push(LaaksoRow {
                k,
                n: g.n_vertices,
                report,
            });
        }
    }
    if do_diamond {
        for &k in &ks {
            let g = diamond(k)?;
            let metric = shortest_path_metric(&g)?;
            let ratio = diamond_convexity_ratio(&PointMap::identity(g.n_vertices), &g, &metric)?;
            summary.diamond.push(DiamondRow {
                k,
                n: g.n_vertices,
                ratio,
            });
        }
    }

    let mut run = Run::new(out);
    for row in &summary.laakso {
        let r = &row.report;
        run.checks
            .record(r.pi2_lower.is_finite() && r.truncation_error_bound <= cfg.tol * r.lhs);
    }
    if out.wants(Format::Json) {
        run.write_json("convexity.json", &summary)?;
    }
    if out.wants(Format::Csv) {
        if do_laakso {
            let rows: Vec<_> = summary
                .laakso
                .iter()
                .map(|r| (r.k, r.n, r.report))
                .collect();
            run.write("laakso_convexity.csv", &reports_to_csv(&rows))?;
        }
        if do_diamond {
            let mut csv = String::from("k,n,lhs,rhs,ratio\n");
            for r in &summary.diamond {
                let _ = writeln!(
                    csv,
                    "{},{},{:.17e},{:.17e},{:.17e}",
                    r.k, r.n, r.ratio.lhs, r.ratio.rhs, r.ratio.ratio
                );
            }
            run.write("diamond_ratio.csv", &csv)?;
        }
    }
    if out.wants(Format::Svg) && do_laakso {
        let svg = line_plot(
            "Markov 2-convexity lower bound of L_k",
            "sqrt(k)",
            "pi2_lower",
            &[Series {
                name: "pi2_lower",
                points: summary
                    .laakso
                    .iter()
                    .map(|r| ((r.k as f64).sqrt(), r.report.pi2_lower))
                    .collect(),
            }],
        );
        run.write("laakso_convexity.svg", &svg)?;
    }
    run.finish("convexity", config, cfg.seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateConfig {
    pub k: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub budget_edges: usize,
    pub seed: u64,
}

impl CertificateConfig {
    pub fn new(k: usize, alpha: f64) -> Self {
        Self {
            k,
            alpha,
            kappa: CertificateOptions::default().kappa,
            budget_edges: DEFAULT_EDGE_BUDGET,
            seed: 0,
        }
    }
}

pub fn cmd_certificate(cfg: &CertificateConfig, out: &OutputOptions) -> Result<Outcome> {
    let config = echo(cfg)?;
    cmd_certificate_inner(cfg, out, config)
}

fn cmd_certificate_inner(
    cfg: &CertificateConfig,
    out: &OutputOptions,
    config: BTreeMap<String, String>,
) -> Result<Outcome> {
    let options = CertificateOptions {
        kappa: cfg.kappa,
        budget_edges: cfg.budget_edges,
    };
    let cert = impossibility_certificate(cfg.k, cfg.alpha, &options)?;
    let mut run = Run::new(out);
    run.checks
        .record(cert.pi2_lower.is_finite() && cert.log_dim_lower.is_finite());
    let mut text = String::new();
    let _ = writeln!(
        text,
        "Dimension certificate for C_{} (alpha = {})",
        cert.k, cert.alpha
    );
    let _ = writeln!(text);
    let _ = writeln!(text, "points n                     {}", cert.n);
    let _ = writeln!(text, "pi2 lower bound (l1 image)   {:.12}", cert.pi2_lower);
    let _ = writeln!(
        text,
        "pi2 lower bound (graph)      {:.12}",
        cert.pi2_lower_graph
    );
    let _ = writeln!(
        text,
        "l1 embedding distortion      {:.12}",
        cert.embedding_distortion
    );
    let _ = writeln!(
        text,
        "truncation error bound       {:.6e}",
        cert.truncation_error_bound
    );
    let _ = writeln!(
        text,
        "C, kappa                     {:.12}, {}",
        cert.constant_c, cert.kappa
    );
    let _ = writeln!(
        text,
        "ln dim X >=                  {:.12}",
        cert.log_dim_lower
    );
    let _ = writeln!(
        text,
        "ln dim X >= (sharp C(d))     {:.12}",
        cert.log_dim_lower_sharp
    );
    let _ = writeln!(text, "dim X >= n^e with e =        {:.12}", cert.n_exponent);
    let _ = writeln!(
        text,
        "c = e * alpha^2              {:.12}",
        cert.c_universal
    );
    let _ = writeln!(text);
    let _ = writeln!(text, "{}", cert.statement);
    run.write("certificate.txt", &text)?;
    if out.wants(Format::Json) {
        run.write_json("certificate.json", &cert)?;
    }
    run.finish("certificate", config, cfg.seed)
}

/// Flat `key -> value` view of a config struct for the manifest.
fn echo<T: Serialize>(cfg: &T) -> Result<BTreeMap<String, String>> {
    let value = serde_json::to_value(cfg)?;
    let mut out = BTreeMap::new();
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            let s = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Null => continue,
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            out.insert(k, s);
        }
    }
    Ok(out)
}

/// Maps an error to the documented exit code.
pub fn error_exit_code(e: &GeoError) -> u8 {
    match e {
        GeoError::TooLarge(_) => 3,
        GeoError::Parse(_)
        | GeoError::InvalidExponent(_)
        | GeoError::InvalidExponents { .. }
        | GeoError::DimensionMismatch(_)
        | GeoError::NonFiniteInput
        | GeoError::DegenerateBasis(_)
        | GeoError::SampleTooSmall { .. }
        | GeoError::InvalidChain(_)
        | GeoError::Io(_)
        | GeoError::Json(_) => 2,
        _ => 1,
    }
}

fn common_settings(common: &CommonArgs) -> Result<(Settings, OutputOptions)> {
    let mut s = Settings::load(common.config.as_deref())?;
    s.flag("seed", common.seed);
    s.flag("tol", common.tol);
    s.flag("budget_edges", common.budget_edges);
    s.flag("out", common.out.as_ref().map(|p| p.display().to_string()));
    s.list_flag("format", &common.format);
    s.switch("no_timestamp", common.no_timestamp);
    let dir: String = s.get("out", ".".to_string())?;
    let formats = s
        .list::<Format>("format")?
        .unwrap_or_else(|| vec![Format::Json, Format::Csv, Format::Svg]);
    let no_timestamp: bool = s.get("no_timestamp", false)?;
    // The output location and format are not part of the experiment echo.
    s.used.remove("out");
    s.used.remove("no_timestamp");
    let out = OutputOptions {
        dir: PathBuf::from(dir),
        formats,
        timestamp: !no_timestamp,
    };
    Ok((s, out))
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Lewis(a) => {
            let (mut s, out) = common_settings(&a.common)?;
            let d = LewisConfig::default();
            s.flag("p", a.p);
            s.flag("k", a.k);
            s.flag("m", a.m);
            s.flag("basis", a.basis.as_ref().map(|p| p.display().to_string()));
            s.switch("diagonal", a.diagonal);
            s.flag("mode", a.mode);
            s.flag("max_iters", a.max_iters);
            let cfg = LewisConfig {
                p: s.get("p", d.p)?,
                k: s.get("k", d.k)?,
                m: s.get("m", d.m)?,
                basis: s.optional::<String>("basis")?.map(PathBuf::from),
                diagonal: s.get("diagonal", d.diagonal)?,
                mode: s.get("mode", d.mode)?,
                tol: s.get("tol", d.tol)?,
                check_tol: s.get("check_tol", d.check_tol)?,
                max_iters: s.get("max_iters", d.max_iters)?,
                seed: s.get("seed", d.seed)?,
            };
            s.get("budget_edges", DEFAULT_EDGE_BUDGET)?;
            s.used.remove("budget_edges");
            cmd_lewis_inner(&cfg, &out, s.finish()?)
        }
        Command::Embed(a) => {
            let (mut s, out) = common_settings(&a.common)?;
            let d = EmbedConfig::default();
            s.flag("p", a.p);
            s.flag("k", a.k);
            s.flag("m", a.m);
            s.switch("diagonal", a.diagonal);
            s.list_flag("q", &a.q);
            s.flag("eps", a.eps);
            s.flag("probes", a.probes);
            let cfg = EmbedConfig {
                p: s.get("p", d.p)?,
                k: s.get("k", d.k)?,
                m: s.get("m", d.m)?,
                diagonal: s.get("diagonal", d.diagonal)?,
                q_values: match s.list("q")? {
                    Some(q) => q,
                    None => {
                        s.used.insert("q".into(), "1.1,1.2,...,2.0".into());
                        d.q_values
                    }
                },
                eps: s.get("eps", d.eps)?,
                probes: s.get("probes", d.probes)?,
                tol: s.get("tol", d.tol)?,
                seed: s.get("seed", d.seed)?,
            };
            s.get("budget_edges", DEFAULT_EDGE_BUDGET)?;
            s.used.remove("budget_edges");
            cmd_embed_inner(&cfg, &out, s.finish()?)
        }
        Command::Convexity(a) => {
            let (mut s, out) = common_settings(&a.common)?;
            let d = ConvexityConfig::default();
            s.flag("kmax", a.kmax);
            s.flag("kind", a.kind);
            let cfg = ConvexityConfig {
                kmax: s.get("kmax", d.kmax)?,
                kind: match s.optional::<String>("kind")? {
                    Some(v) => v.parse()?,
                    None => {
                        s.used.insert("kind".into(), d.kind.to_string());
                        d.kind
                    }
                },
                budget_edges: s.get("budget_edges", d.budget_edges)?,
                tol: s.get("tol", d.tol)?,
                seed: s.get("seed", d.seed)?,
            };
            cmd_convexity_inner(&cfg, &out, s.finish()?)
        }
        Command::Certificate(a) => {
            let (mut s, out) = common_settings(&a.common)?;
            s.flag("k", a.k);
            s.flag("alpha", a.alpha);
            s.flag("kappa", a.kappa);
            let d = CertificateConfig::new(0, 1.0);
            let cfg = CertificateConfig {
                k: s.require("k")?,
                alpha: s.get("alpha", d.alpha)?,
                kappa: s.get("kappa", d.kappa)?,
                budget_edges: s.get("budget_edges", d.budget_edges)?,
                seed: s.get("seed", d.seed)?,
            };
            s.get("tol", 0.0)?;
            s.used.remove("tol");
            cmd_certificate_inner(&cfg, &out, s.finish()?)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GEOLAB_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            GeoError::Parse(format!(
                "GEOLAB_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        // A pool that is already initialized keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.exit_code() {
                0 => 0,
                _ => 2,
            };
        }
    };
    let result = configure_threads().and_then(|_| dispatch(cli.command));
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{f}");
            }
            if !outcome.checks.all_passed() {
                eprintln!(
                    "CheckFailed: {} of {} checks failed",
                    outcome.checks.failed,
                    outcome.checks.failed + outcome.checks.passed
                );
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}
