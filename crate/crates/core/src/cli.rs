//! Command-line front end.
//!
//! Every command writes one CSV table. Lines starting with `#` carry the
//! artifact version, schema version, command, seed and the fully resolved
//! configuration; no timestamps or host data are written, so identical
//! inputs give byte-identical files.
//!
//! Settings are resolved as: command-line flag, then `--config` file, then
//! built-in default. The config file holds `key = value` lines whose keys
//! are the long flag names (`sigma-x2 = 2`); list-valued keys (`alpha`, `c`)
//! take comma-separated values. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::closedrisk::{c_opt, risk_affine, risk_identity, risk_kl_plugin, risk_truncated};
use crate::cutoffs::{
    cutoff_affine, cutoff_general, cutoff_general_lower_bound, cutoff_kl_exact, cutoff_truncated,
    CutoffResult,
};
use crate::error::Error;
use crate::estimators::{linspace, moment_bounds, Estimator, ParameterSpace};
use crate::figures::{generate, FigureName, FigureOptions, DEFAULT_SEED};
use crate::model::{AlphaLoss, Model};
use crate::montecarlo::{
    dominance_scan, empirical_cutoff, mc_epsilon_profile, mc_risk, mc_risk_ratio, EmpiricalCutoffOptions,
    EpsilonOptions,
};
use crate::verify::{run_all, VerifyOptions};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "varexp", version, about = "Alpha-divergence risks and variance-expansion cut-offs")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for Monte Carlo (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub d: Option<usize>,
    #[arg(long = "sigma-x2", global = true)]
    pub sigma_x2: Option<f64>,
    #[arg(long = "sigma-y2", global = true)]
    pub sigma_y2: Option<f64>,
    /// Loss index; repeatable. `-1` is Kullback-Leibler.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Vec<f64>,
    /// Expansion factor; repeatable.
    #[arg(long, global = true)]
    pub c: Vec<f64>,
    /// identity | affine:a | truncated | js | jsplus |
    /// baranchik:min:cap | baranchik:rational:f1:f2
    #[arg(long, global = true)]
    pub estimator: Option<String>,
    /// `lo:hi:n`; points are `(t, 0, …, 0)`.
    #[arg(long = "theta-grid", global = true, allow_hyphen_values = true)]
    pub theta_grid: Option<String>,
    #[arg(long = "n-samples", global = true)]
    pub n_samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Use Monte Carlo even where a closed form exists.
    #[arg(long = "force-mc", global = true)]
    pub force_mc: bool,
    /// Solver / bisection tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Affine,
    Truncated,
    General,
    GeneralLowerBound,
    KlExact,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Risk of q_{θ̂,c} over a θ grid.
    Risk,
    /// Risk of q_{θ̂,c} divided by that of the plug-in q_{θ̂,1}.
    Ratio,
    /// Dominance cut-offs.
    Cutoff {
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// ε for the general cut-off; estimated by Monte Carlo when absent.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        b0: Option<f64>,
        #[arg(long)]
        b1: Option<f64>,
        #[arg(long)]
        b2: Option<f64>,
        /// Lower bound on the scaled mean squared error, for kl-exact.
        #[arg(long = "r-bar")]
        r_bar: Option<f64>,
    },
    /// ε(α) = inf_θ E(Z e^{−(1−α²)Z/8}) by Monte Carlo.
    Epsilon,
    /// Paired risk differences R(c) − R(1) over θ and c.
    Scan,
    /// Largest c² with Monte Carlo dominance over the θ grid.
    EmpiricalCutoff {
        /// Largest c² examined.
        #[arg(long, default_value_t = 16.0)]
        cap: f64,
    },
    /// Data behind a figure.
    Figure { name: String },
    /// Run the built-in checks.
    Verify {
        /// Scale every Monte Carlo budget by this factor.
        #[arg(long, default_value_t = 1.0)]
        budget_scale: f64,
    },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Risk => "risk".into(),
            Command::Ratio => "ratio".into(),
            Command::Cutoff { .. } => "cutoff".into(),
            Command::Epsilon => "epsilon".into(),
            Command::Scan => "scan".into(),
            Command::EmpiricalCutoff { .. } => "empirical-cutoff".into(),
            Command::Figure { name } => format!("figure {name}"),
            Command::Verify { .. } => "verify".into(),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(Error),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Verification(_) => EXIT_VERIFICATION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(m) => CliError::Usage(m),
            other => CliError::Numerical(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Settings after applying flags over the config file over defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub d: usize,
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub alphas: Vec<f64>,
    /// Whether α came from a flag or the config file rather than the default.
    pub alpha_given: bool,
    pub cs: Vec<f64>,
    pub estimator: String,
    pub theta_grid: Option<(f64, f64, usize)>,
    pub n_samples: Option<usize>,
    pub seed: u64,
    pub force_mc: bool,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    const KEYS: [&str; 11] =
        ["d", "sigma-x2", "sigma-y2", "alpha", "c", "estimator", "theta-grid", "n-samples", "seed", "force-mc", "tol"];
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(usage(format!("config line {}: unknown key '{k}'", i + 1)));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.trim().parse().map_err(|_| usage(format!("invalid value '{v}' for {key}")))
}

fn parse_list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    v.split(',').map(|s| parse_num(key, s)).collect()
}

/// `lo:hi:n`.
pub fn parse_grid(s: &str) -> CliResult<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(usage(format!("theta grid '{s}' is not lo:hi:n")));
    };
    let (lo, hi, n) = (parse_num("theta-grid", lo)?, parse_num("theta-grid", hi)?, parse_num("theta-grid", n)?);
    if !(f64::is_finite(lo) && f64::is_finite(hi) && lo <= hi && n >= 1) {
        return Err(usage(format!("theta grid '{s}' needs finite lo <= hi and n >= 1")));
    }
    Ok((lo, hi, n))
}

impl RunConfig {
    pub fn resolve(common: &Common) -> CliResult<Self> {
        let file = match &common.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        let get = |k: &str| file.get(k).map(String::as_str);
        let num = |flag: Option<f64>, key: &str, default: f64| -> CliResult<f64> {
            match (flag, get(key)) {
                (Some(v), _) => Ok(v),
                (None, Some(v)) => parse_num(key, v),
                (None, None) => Ok(default),
            }
        };
        let list = |flag: &[f64], key: &str| -> CliResult<Vec<f64>> {
            match (flag.is_empty(), get(key)) {
                (false, _) => Ok(flag.to_vec()),
                (true, Some(v)) => parse_list(key, v),
                (true, None) => Ok(vec![]),
            }
        };
        let d = match (common.d, get("d")) {
            (Some(v), _) => v,
            (None, Some(v)) => parse_num("d", v)?,
            (None, None) => 1,
        };
        let theta_grid = match (&common.theta_grid, get("theta-grid")) {
            (Some(s), _) => Some(parse_grid(s)?),
            (None, Some(s)) => Some(parse_grid(s)?),
            (None, None) => None,
        };
        let n_samples = match (common.n_samples, get("n-samples")) {
            (Some(v), _) => Some(v),
            (None, Some(v)) => Some(parse_num("n-samples", v)?),
            (None, None) => None,
        };
        let seed = match (common.seed, get("seed")) {
            (Some(v), _) => v,
            (None, Some(v)) => parse_num("seed", v)?,
            (None, None) => DEFAULT_SEED,
        };
        let force_mc = common.force_mc || matches!(get("force-mc"), Some("true" | "1" | "yes"));
        let tol = match (common.tol, get("tol")) {
            (Some(v), _) => Some(v),
            (None, Some(v)) => Some(parse_num("tol", v)?),
            (None, None) => None,
        };
        let mut alphas = list(&common.alpha, "alpha")?;
        let alpha_given = !alphas.is_empty();
        if alphas.is_empty() {
            alphas.push(0.0);
        }
        Ok(Self {
            d,
            sigma_x2: num(common.sigma_x2, "sigma-x2", 1.0)?,
            sigma_y2: num(common.sigma_y2, "sigma-y2", 1.0)?,
            alphas,
            alpha_given,
            cs: list(&common.c, "c")?,
            estimator: common.estimator.clone().or_else(|| get("estimator").map(String::from)).unwrap_or("identity".into()),
            theta_grid,
            n_samples,
            seed,
            force_mc,
            tol,
            out: common.out.clone(),
        })
    }

    fn model(&self) -> CliResult<Model> {
        Ok(Model::new(self.d, self.sigma_x2, self.sigma_y2)?)
    }

    fn estimator(&self) -> CliResult<Estimator> {
        Ok(self.estimator.parse()?)
    }

    fn losses(&self) -> CliResult<Vec<AlphaLoss>> {
        Ok(self.alphas.iter().map(|a| AlphaLoss::new(*a)).collect::<crate::Result<_>>()?)
    }

    fn grid(&self, default: (f64, f64, usize)) -> Vec<f64> {
        let (lo, hi, n) = self.theta_grid.unwrap_or(default);
        linspace(lo, hi, n)
    }

    fn theta_points(&self, default: (f64, f64, usize)) -> Vec<Vec<f64>> {
        self.grid(default)
            .into_iter()
            .map(|t| {
                let mut p = vec![0.0; self.d];
                p[0] = t;
                p
            })
            .collect()
    }

    fn n(&self, default: usize) -> usize {
        self.n_samples.unwrap_or(default)
    }

    fn entries(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut e = vec![
            ("d".to_string(), self.d.to_string()),
            ("sigma-x2".into(), self.sigma_x2.to_string()),
            ("sigma-y2".into(), self.sigma_y2.to_string()),
            ("alpha".into(), list(&self.alphas)),
            ("c".into(), list(&self.cs)),
            ("estimator".into(), self.estimator.clone()),
            ("force-mc".into(), self.force_mc.to_string()),
        ];
        if let Some((lo, hi, n)) = self.theta_grid {
            e.push(("theta-grid".into(), format!("{lo}:{hi}:{n}")));
        }
        if let Some(n) = self.n_samples {
            e.push(("n-samples".into(), n.to_string()));
        }
        if let Some(t) = self.tol {
            e.push(("tol".into(), t.to_string()));
        }
        e
    }
}

/// A CSV table with its metadata block.
struct Table {
    meta: Vec<(String, String)>,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Self { meta: vec![], header, rows: vec![] }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn render(&self, command: &str, cfg: &RunConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# varexp {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# schema: {SCHEMA_VERSION}");
        let _ = writeln!(s, "# command: {command}");
        let _ = writeln!(s, "# seed: {}", cfg.seed);
        for (k, v) in cfg.entries() {
            let _ = writeln!(s, "# config: {k}={v}");
        }
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| csv_cell(c)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

fn f(v: f64) -> String {
    v.to_string()
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

const DEFAULT_GRID: (f64, f64, usize) = (0.0, 4.0, 9);
const DEFAULT_RISK_SAMPLES: usize = 100_000;

/// Closed-form risk when one exists for this estimator and loss.
fn closed_risk(model: &Model, est: &Estimator, theta: &[f64], c: f64, loss: AlphaLoss) -> Option<crate::Result<f64>> {
    let (d, sx2) = (model.d() as f64, model.sigma_x2());
    match (est, loss.is_kl()) {
        (Estimator::Identity, false) => Some(risk_identity(model, c, loss)),
        (Estimator::Identity, true) => Some(risk_kl_plugin(model, d * sx2, c)),
        (Estimator::Affine(a), false) => Some(risk_affine(model, *a, norm(theta), c, loss)),
        (Estimator::Affine(a), true) => {
            Some(risk_kl_plugin(model, d * a * a * sx2 + (1.0 - a).powi(2) * norm(theta).powi(2), c))
        }
        (Estimator::TruncatedNonneg, false) if model.d() == 1 => Some(risk_truncated(model, theta[0], c, loss)),
        _ => None,
    }
}

fn cmd_risk(cfg: &RunConfig, ratio: bool) -> CliResult<Table> {
    let model = cfg.model()?;
    let est = cfg.estimator()?;
    est.validate(&model)?;
    let losses = cfg.losses()?;
    let n = cfg.n(DEFAULT_RISK_SAMPLES);
    let mut t = Table::new(if ratio {
        vec!["theta_norm", "c", "alpha", "ratio", "stderr", "method"]
    } else {
        vec!["theta_norm", "c", "alpha", "risk", "stderr", "method"]
    });
    for theta in cfg.theta_points(DEFAULT_GRID) {
        for loss in &losses {
            let cs = if !cfg.cs.is_empty() {
                cfg.cs.clone()
            } else if ratio && matches!(est, Estimator::Identity) {
                vec![c_opt(&model, *loss)]
            } else if ratio {
                return Err(usage("ratio needs --c unless the estimator is identity (which defaults to c_opt)"));
            } else {
                vec![1.0]
            };
            for c in cs {
                let closed = if cfg.force_mc { None } else { closed_risk(&model, &est, &theta, c, *loss) };
                let (value, se, method) = match closed {
                    Some(r) if ratio => {
                        let base = closed_risk(&model, &est, &theta, 1.0, *loss).expect("same family")?;
                        (r? / base, None, "closed")
                    }
                    Some(r) => (r?, None, "closed"),
                    None if ratio => {
                        let q = mc_risk_ratio(&model, &est, c, *loss, &theta, n, cfg.seed)?;
                        (q.mean, Some(q.stderr), "mc")
                    }
                    None => {
                        let q = mc_risk(&model, &est, c, *loss, &theta, n, cfg.seed)?;
                        (q.mean, Some(q.stderr), "mc")
                    }
                };
                t.push(vec![f(norm(&theta)), f(c), f(loss.alpha()), f(value), se.map(f).unwrap_or_default(), method.into()]);
            }
        }
    }
    Ok(t)
}

fn epsilon_space(cfg: &RunConfig, model: &Model, est: &Estimator) -> ParameterSpace {
    let (lo, hi, n) = cfg.theta_grid.unwrap_or((0.0, 8.0, 25));
    if est.is_orthogonally_equivariant() || model.d() == 1 {
        if lo >= 0.0 {
            return ParameterSpace::Full { max_radius: hi.max(f64::MIN_POSITIVE), points: n.max(2) };
        }
    }
    ParameterSpace::Explicit { points: cfg.theta_points((lo, hi, n)) }
}

fn cutoff_row(t: &mut Table, alpha: f64, r: &CutoffResult) {
    t.push(vec![f(alpha), r.method.to_string(), f(r.c_star), f(r.c2_star), f(r.residual)]);
}

#[allow(clippy::too_many_arguments)]
fn cmd_cutoff(
    cfg: &RunConfig,
    kind: Option<KindArg>,
    epsilon: Option<f64>,
    b: (Option<f64>, Option<f64>, Option<f64>),
    r_bar: Option<f64>,
) -> CliResult<Table> {
    let model = cfg.model()?;
    let est = cfg.estimator()?;
    let kind = kind.unwrap_or(match est {
        Estimator::Affine(_) => KindArg::Affine,
        Estimator::TruncatedNonneg => KindArg::Truncated,
        _ => KindArg::General,
    });
    let mut t = Table::new(vec!["alpha", "cutoff_kind", "c_star", "c2_star", "residual"]);
    let r = model.r();
    if kind == KindArg::KlExact {
        let r_bar = r_bar.ok_or_else(|| usage("kl-exact needs --r-bar"))?;
        cutoff_row(&mut t, -1.0, &cutoff_kl_exact(r_bar)?);
        return Ok(t);
    }
    let losses = cfg.losses()?;
    match kind {
        KindArg::Affine => {
            let Estimator::Affine(a) = est else { return Err(usage("the affine cut-off needs --estimator affine:a")) };
            for loss in &losses {
                cutoff_row(&mut t, loss.alpha(), &cutoff_affine(a, r, *loss)?);
            }
        }
        KindArg::Truncated => {
            for loss in &losses {
                cutoff_row(&mut t, loss.alpha(), &cutoff_truncated(r, *loss)?);
            }
        }
        KindArg::General => {
            let eps: Vec<f64> = match epsilon {
                Some(e) => vec![e; losses.len()],
                None => {
                    let space = epsilon_space(cfg, &model, &est);
                    let profile = mc_epsilon_profile(
                        &model,
                        &est,
                        &space,
                        &losses,
                        cfg.n(100_000),
                        cfg.seed,
                        epsilon_options(cfg),
                    )?;
                    let mut values = Vec::new();
                    for e in profile {
                        let e = e.require_positive()?;
                        t.meta.push((format!("epsilon(alpha={})", e.alpha), format!("{} (stderr {})", e.value, e.stderr_at_min)));
                        values.push(e.value);
                    }
                    values
                }
            };
            for (loss, e) in losses.iter().zip(eps) {
                cutoff_row(&mut t, loss.alpha(), &cutoff_general(model.d(), *loss, e)?);
            }
        }
        KindArg::GeneralLowerBound => {
            let (b0, b1, b2) = match b {
                (Some(b0), Some(b1), Some(b2)) => (b0, b1, b2),
                (None, None, None) => {
                    let space = epsilon_space(cfg, &model, &est);
                    let mb = moment_bounds(&est, &model, &space, cfg.n(100_000), cfg.seed)?;
                    t.meta.push(("moment-bounds".into(), format!("b0={} b1={} b2={} ({:?})", mb.b0, mb.b1, mb.b2, mb.provenance)));
                    (mb.b0, mb.b1, mb.b2)
                }
                _ => return Err(usage("give all of --b0 --b1 --b2 or none")),
            };
            for loss in &losses {
                cutoff_row(&mut t, loss.alpha(), &cutoff_general_lower_bound(model.d(), *loss, b0, b1, b2)?);
            }
        }
        KindArg::KlExact => unreachable!(),
    }
    Ok(t)
}

fn epsilon_options(cfg: &RunConfig) -> EpsilonOptions {
    let mut o = EpsilonOptions::default();
    if let Some(tol) = cfg.tol {
        o.tol = tol;
    }
    o
}

fn cmd_epsilon(cfg: &RunConfig) -> CliResult<Table> {
    let model = cfg.model()?;
    let est = cfg.estimator()?;
    let losses = cfg.losses()?;
    let space = epsilon_space(cfg, &model, &est);
    let profile = mc_epsilon_profile(&model, &est, &space, &losses, cfg.n(100_000), cfg.seed, epsilon_options(cfg))?;
    let mut t = Table::new(vec!["alpha", "epsilon", "stderr", "arg_theta_norm", "tail_value", "grid_kind", "grid_hi", "grid_points"]);
    t.meta.push(("z".into(), profile.first().map_or("", |e| e.z_definition).into()));
    for e in profile {
        let e = e.require_positive()?;
        t.push(vec![
            f(e.alpha),
            f(e.value),
            f(e.stderr_at_min),
            f(norm(&e.arg_theta)),
            f(e.tail_value),
            e.grid.kind.into(),
            f(e.grid.hi),
            e.grid.points.to_string(),
        ]);
    }
    Ok(t)
}

fn cmd_scan(cfg: &RunConfig) -> CliResult<Table> {
    let model = cfg.model()?;
    let est = cfg.estimator()?;
    if cfg.cs.is_empty() {
        return Err(usage("scan needs at least one --c"));
    }
    let grid = cfg.theta_points(DEFAULT_GRID);
    let mut t = Table::new(vec!["theta_norm", "c", "alpha", "delta", "stderr"]);
    for loss in cfg.losses()? {
        for row in dominance_scan(&model, &est, &cfg.cs, &grid, loss, cfg.n(DEFAULT_RISK_SAMPLES), cfg.seed)? {
            t.push(vec![f(row.theta_norm), f(row.c), f(loss.alpha()), f(row.delta), f(row.stderr)]);
        }
    }
    Ok(t)
}

fn cmd_empirical_cutoff(cfg: &RunConfig, cap: f64) -> CliResult<Table> {
    let model = cfg.model()?;
    let est = cfg.estimator()?;
    let grid = cfg.theta_points((0.0, 10.0, 41));
    let mut opts = EmpiricalCutoffOptions { cap, ..EmpiricalCutoffOptions::default() };
    opts.n = cfg.n(opts.n);
    if let Some(tol) = cfg.tol {
        opts.tol = tol;
    }
    let mut t = Table::new(vec!["alpha", "k_star", "capped", "argmax_theta_norm"]);
    t.meta.push(("ucb-multiplier".into(), f(opts.z_ucb)));
    for loss in cfg.losses()? {
        let k = empirical_cutoff(&model, &est, loss, &grid, cfg.seed, opts)?;
        if k.capped {
            eprintln!("warning: dominance held up to the cap c^2 = {cap} (alpha = {})", loss.alpha());
        }
        t.push(vec![f(loss.alpha()), f(k.k_star), k.capped.to_string(), f(k.argmax_theta_norm)]);
    }
    Ok(t)
}

fn cmd_figure(cfg: &RunConfig, name: &str) -> CliResult<Table> {
    let name: FigureName = name.parse().map_err(|e: Error| usage(e.to_string()))?;
    let opts = FigureOptions {
        theta_grid: cfg.theta_grid,
        alphas: cfg.alpha_given.then(|| cfg.alphas.clone()),
        n_samples: cfg.n(FigureOptions::default().n_samples),
        seed: cfg.seed,
    };
    let data = generate(name, &opts)?;
    let stochastic = data.rows.iter().any(|r| r.y_stderr.is_some());
    let mut t = Table::new(if stochastic { vec!["x", "series", "y", "y_stderr"] } else { vec!["x", "series", "y"] });
    t.meta.push(("axes".into(), format!("x={} y={}", data.x_label, data.y_label)));
    for (k, v) in &data.notes {
        t.meta.push((k.clone(), f(*v)));
    }
    for r in &data.rows {
        let mut row = vec![f(r.x), r.series.clone(), f(r.y)];
        if stochastic {
            row.push(r.y_stderr.map(f).unwrap_or_default());
        }
        t.push(row);
    }
    Ok(t)
}

fn cmd_verify(cfg: &RunConfig, scale: f64) -> CliResult<(String, String, usize)> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(usage(format!("--budget-scale must be positive, got {scale}")));
    }
    let opts = VerifyOptions { seed: cfg.seed, ..VerifyOptions::default() }.scaled(scale);
    let report = run_all(&opts);
    let mut human = String::new();
    for c in &report.checks {
        let _ = writeln!(
            human,
            "{} [{}] {}: actual {} (expected {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.criterion,
            c.name,
            c.actual,
            c.expected
        );
    }
    let failures = report.failures().count();
    let _ = writeln!(human, "{} checks, {} failed", report.checks.len(), failures);
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    Ok((human, json, failures))
}

/// Parses `args` (including the program name) and returns the CSV text the
/// command would write. `verify` returns its JSON report.
pub fn render(args: &[String]) -> CliResult<String> {
    let cli = Cli::try_parse_from(args).map_err(|e| usage(e.to_string()))?;
    let cfg = RunConfig::resolve(&cli.common)?;
    let out = run(&cli.command, &cfg)?;
    match out.failed {
        Some(msg) => Err(CliError::Verification(msg)),
        None => Ok(out.body),
    }
}

pub struct Output {
    /// Text for `--out` or standard output.
    pub body: String,
    /// Human-readable text for standard output, printed before `body`.
    pub summary: Option<String>,
    /// Set when the command ran but its checks did not all pass.
    pub failed: Option<String>,
}

fn run(command: &Command, cfg: &RunConfig) -> CliResult<Output> {
    let name = command.name();
    let table = match command {
        Command::Risk => cmd_risk(cfg, false)?,
        Command::Ratio => cmd_risk(cfg, true)?,
        Command::Cutoff { kind, epsilon, b0, b1, b2, r_bar } => cmd_cutoff(cfg, *kind, *epsilon, (*b0, *b1, *b2), *r_bar)?,
        Command::Epsilon => cmd_epsilon(cfg)?,
        Command::Scan => cmd_scan(cfg)?,
        Command::EmpiricalCutoff { cap } => cmd_empirical_cutoff(cfg, *cap)?,
        Command::Figure { name } => cmd_figure(cfg, name)?,
        Command::Verify { budget_scale } => {
            let (human, json, failures) = cmd_verify(cfg, *budget_scale)?;
            let failed = (failures > 0).then(|| format!("{failures} check(s) failed"));
            return Ok(Output { body: json, summary: Some(human), failed });
        }
    };
    Ok(Output { body: table.render(&name, cfg), summary: None, failed: None })
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.common.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("usage error: cannot start {n} worker threads");
            return EXIT_USAGE;
        }
    }
    let result = RunConfig::resolve(&cli.common).and_then(|cfg| {
        let out = run(&cli.command, &cfg)?;
        match &cfg.out {
            Some(path) => {
                std::fs::write(path, &out.body).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
                if let Some(s) = out.summary {
                    print!("{s}");
                }
            }
            None => {
                if let Some(s) = out.summary {
                    print!("{s}");
                }
                print!("{}", out.body);
            }
        }
        match out.failed {
            Some(msg) => Err(CliError::Verification(msg)),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        std::iter::once("varexp").chain(s.split_whitespace()).map(String::from).collect()
    }

    fn body(csv: &str) -> Vec<&str> {
        csv.lines().filter(|l| !l.starts_with('#')).collect()
    }

    #[test]
    fn identity_risk_is_constant_across_theta() {
        let out = render(&args("risk --d 3 --alpha 0 --c 1 --theta-grid 0:5:6")).unwrap();
        let rows = body(&out);
        assert_eq!(rows[0], "theta_norm,c,alpha,risk,stderr,method");
        let risks: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(3).unwrap()).collect();
        assert_eq!(risks.len(), 6);
        assert!(risks.windows(2).all(|w| w[0] == w[1]));
        assert!(rows[1].ends_with(",closed"));
    }

    #[test]
    fn metadata_block_is_present() {
        let out = render(&args("cutoff --estimator affine:1 --sigma-x2 2 --alpha 0")).unwrap();
        assert!(out.starts_with("# varexp "));
        assert!(out.contains("# seed: "));
        assert!(out.contains("# config: estimator=affine:1"));
        let rows = body(&out);
        assert_eq!(rows[0], "alpha,cutoff_kind,c_star,c2_star,residual");
        let c2: f64 = rows[1].split(',').nth(3).unwrap().parse().unwrap();
        assert!((c2 - 4.0).abs() < 1e-10);
    }

    #[test]
    fn kl_general_cutoff_matches_one_plus_rbar() {
        let out = render(&args("cutoff --kind general --d 3 --alpha -1 --epsilon 1.5")).unwrap();
        let c2: f64 = body(&out)[1].split(',').nth(3).unwrap().parse().unwrap();
        assert!((c2 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn force_mc_agrees_with_closed_form() {
        let closed = render(&args("risk --estimator affine:0.75 --d 3 --sigma-y2 0.5 --c 1.3 --theta-grid 1:1:1")).unwrap();
        let mc = render(&args(
            "risk --estimator affine:0.75 --d 3 --sigma-y2 0.5 --c 1.3 --theta-grid 1:1:1 --force-mc --n-samples 200000",
        ))
        .unwrap();
        let get = |s: &str| -> Vec<String> { body(s)[1].split(',').map(String::from).collect() };
        let (a, b) = (get(&closed), get(&mc));
        let (va, vb, se): (f64, f64, f64) = (a[3].parse().unwrap(), b[3].parse().unwrap(), b[4].parse().unwrap());
        assert_eq!(b[5], "mc");
        assert!((va - vb).abs() <= 3.0 * se, "{va} vs {vb} ± {se}");
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# test\nd = 2\nsigma-x2 = 3\nalpha = 0, 0.5\nestimator = identity\n").unwrap();
        let cfg = RunConfig::resolve(&Common { config: Some(path.clone()), d: Some(4), ..Common::default() }).unwrap();
        assert_eq!(cfg.d, 4);
        assert_eq!(cfg.sigma_x2, 3.0);
        assert_eq!(cfg.alphas, vec![0.0, 0.5]);
        std::fs::write(&path, "bogus = 1\n").unwrap();
        assert!(RunConfig::resolve(&Common { config: Some(path), ..Common::default() }).is_err());
    }

    #[test]
    fn usage_and_numerical_errors_are_classified() {
        assert_eq!(render(&args("figure fig9")).unwrap_err().exit_code(), EXIT_USAGE);
        assert_eq!(render(&args("risk --estimator nonsense")).unwrap_err().exit_code(), EXIT_USAGE);
        assert_eq!(render(&args("risk --theta-grid 1:2")).unwrap_err().exit_code(), EXIT_USAGE);
        assert_eq!(render(&args("cutoff --kind general --epsilon 0")).unwrap_err().exit_code(), EXIT_NUMERICAL);
        let err = render(&args("epsilon --estimator affine:0.5 --d 2 --n-samples 2000")).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_NUMERICAL);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("-1:2:4").unwrap(), (-1.0, 2.0, 4));
        assert!(parse_grid("2:1:4").is_err());
        assert!(parse_grid("a:1:4").is_err());
    }

    #[test]
    fn identity_ratio_defaults_to_c_opt() {
        let out = render(&args("ratio --d 2 --sigma-x2 9.6568 --theta-grid 0:0:1")).unwrap();
        let ratio: f64 = body(&out)[1].split(',').nth(3).unwrap().parse().unwrap();
        assert!((1.0 / ratio - 1.2071).abs() < 5e-4);
    }
}
