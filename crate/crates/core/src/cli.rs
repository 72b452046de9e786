//! The `tentlab` command line.
//!
//! Every run is described by an [`ExperimentConfig`], built either from a
//! JSON file (`--config`) or from inline flags, and produces a [`RunReport`]
//! echoing that config. Exit codes: 0 on success, 2 when a verdict is
//! inconclusive or an estimate diverged, 1 on contract violations.

use crate::acceptance;
use crate::criteria::{
    bergman_superposition_degree, carleson_constant, compactness_evaluators, embedding_verdict, inclusion_condition, superposition_degree,
    Bounded, FunctionalOptions,
};
use crate::error::{ensure, Error, Result};
use crate::functions::HoloFunction;
use crate::geometry::DEFAULT_APERTURE;
use crate::lattice::build_lattice;
use crate::measures::MeasureSpec;
use crate::norms::{area_operator_lt_norm, tent_norm, TentParams, DEFAULT_RADIUS};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Seed of `selftest` when none is given.
pub const SELFTEST_SEED: u64 = 20_240_601;
/// Default evaluation budget of `norm` and `area`.
pub const NORM_BUDGET: usize = 100_000;
/// Default per-region budget of the case functionals.
pub const FUNCTIONAL_BUDGET: usize = 4000;

/// A fully resolved run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub task: Task,
}

/// One grid axis `name:lo..hi:count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        (0..self.count).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64).collect()
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Axis> {
        let bad = || Error::Contract(format!("axis `{s}` is not of the form name:lo..hi:count"));
        let (name, rest) = s.split_once(':').ok_or_else(bad)?;
        let (range, count) = rest.rsplit_once(':').ok_or_else(bad)?;
        let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
        Ok(Axis {
            name: name.trim().to_string(),
            lo: lo.trim().parse().map_err(|_| bad())?,
            hi: hi.trim().parse().map_err(|_| bad())?,
            count: count.trim().parse().map_err(|_| bad())?,
        })
    }
}

fn default_gamma() -> f64 {
    DEFAULT_APERTURE
}

fn default_points() -> usize {
    256
}

fn default_rhos() -> Vec<f64> {
    vec![0.9, 0.99, 0.999]
}

fn default_csv() -> PathBuf {
    PathBuf::from("phase.csv")
}

/// Payload of each subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    /// `‖f‖_{T^p_q(μ)}`.
    Norm {
        function: HoloFunction,
        measure: MeasureSpec,
        p: f64,
        q: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    /// `‖A_{μ,s}f‖_{L^t}` from sampled boundary points.
    Area {
        function: HoloFunction,
        measure: MeasureSpec,
        s: f64,
        t: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_points")]
        points: usize,
    },
    /// Box and integral Carleson constants of `μ`.
    Carleson { measure: MeasureSpec, n: usize },
    /// Boundedness of `A_{μ,s} : 𝓗𝓣^p_{q,α} → L^t`.
    EmbedCheck { measure: MeasureSpec, params: TentParams },
    /// Inclusion predicate over a two-parameter grid.
    Region {
        vary: [Axis; 2],
        fixed: BTreeMap<String, f64>,
        #[serde(default = "default_csv")]
        csv: PathBuf,
    },
    /// Degree bound of superposition operators.
    Superposition { p: f64, q: f64, alpha: f64, t: f64, s: f64, beta: f64, n: usize },
    /// Truncated case functionals as `ϱ → 1`.
    Compactness {
        measure: MeasureSpec,
        params: TentParams,
        #[serde(default = "default_rhos")]
        rhos: Vec<f64>,
    },
    /// Builds and verifies a δ-lattice.
    Lattice { n: usize, delta: f64, r_max: f64 },
    /// The acceptance suite, optionally restricted to some criteria.
    Selftest {
        #[serde(default)]
        only: Option<Vec<u32>>,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Norm { .. } => "norm",
            Task::Area { .. } => "area",
            Task::Carleson { .. } => "carleson",
            Task::EmbedCheck { .. } => "embed-check",
            Task::Region { .. } => "region",
            Task::Superposition { .. } => "superposition",
            Task::Compactness { .. } => "compactness",
            Task::Lattice { .. } => "lattice",
            Task::Selftest { .. } => "selftest",
        }
    }

    fn needs_seed(&self) -> bool {
        !matches!(self, Task::Region { .. } | Task::Superposition { .. } | Task::Selftest { .. })
    }

    fn default_budget(&self) -> Option<usize> {
        match self {
            Task::Norm { .. } | Task::Area { .. } => Some(NORM_BUDGET),
            Task::Carleson { .. } | Task::EmbedCheck { .. } | Task::Compactness { .. } => Some(FUNCTIONAL_BUDGET),
            _ => None,
        }
    }
}

/// A config failure located by its schema path.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config at `{}`: {}", self.path, self.message)
    }
}

fn at(path: impl Into<String>, r: Result<()>) -> std::result::Result<(), ConfigError> {
    r.map_err(|e| ConfigError { path: path.into(), message: e.to_string() })
}

/// Parses a config, reporting the schema path of the first failure.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError { path, message: e.into_inner().to_string() }
    })
}

impl ExperimentConfig {
    /// Checks every field that can be checked before computing, and fills
    /// in the defaults of `seed` and `budget`.
    pub fn resolve(mut self) -> std::result::Result<ExperimentConfig, ConfigError> {
        let name = self.task.name();
        let p = |field: &str| format!("task.{name}.{field}");
        match &self.task {
            Task::Norm { function, measure, p: e1, q: e2, gamma } | Task::Area { function, measure, s: e2, t: e1, gamma, .. } => {
                at(p("function"), function.validate())?;
                at(p("measure"), measure.validate())?;
                at(p("gamma"), ensure(*gamma > 1.0, || format!("aperture γ = {gamma} must exceed 1")))?;
                at(p("exponents"), ensure(*e1 > 0.0 && *e2 > 0.0, || "exponents must be positive".into()))?;
                if let Task::Area { points, .. } = &self.task {
                    at(p("points"), ensure(*points >= 2, || "at least two boundary points are needed".into()))?;
                }
            }
            Task::Carleson { measure, n } => {
                at(p("measure"), measure.validate())?;
                at(p("n"), ensure(*n >= 1, || "n must be at least 1".into()))?;
            }
            Task::EmbedCheck { measure, params } | Task::Compactness { measure, params, .. } => {
                at(p("measure"), measure.validate())?;
                at(p("params"), params.validate())?;
                if let Task::Compactness { rhos, .. } = &self.task {
                    let ok = !rhos.is_empty() && rhos.iter().all(|&r| r > 0.0 && r < 1.0) && rhos.windows(2).all(|w| w[0] < w[1]);
                    at(p("rhos"), ensure(ok, || "ϱ values must increase within (0, 1)".into()))?;
                }
            }
            Task::Region { vary, fixed, .. } => {
                for (i, axis) in vary.iter().enumerate() {
                    at(format!("task.region.vary[{i}]"), check_axis(axis))?;
                }
                at(p("fixed"), region_names(vary, fixed).map(|_| ()))?;
            }
            Task::Superposition { n, .. } => at(p("n"), ensure(*n >= 1, || "n must be at least 1".into()))?,
            Task::Lattice { n, delta, r_max } => {
                at(p("n"), ensure((1..=2).contains(n), || format!("lattices are built for n ∈ {{1, 2}}, got {n}")))?;
                at(p("delta"), ensure(*delta > 0.0 && *delta < 1.0, || format!("δ = {delta} must lie in (0, 1)")))?;
                at(p("r_max"), ensure(*r_max > 0.0 && *r_max <= 12.0, || format!("R_max = {r_max} must lie in (0, 12]")))?;
            }
            Task::Selftest { only } => {
                let ok = only
                    .as_ref()
                    .is_none_or(|ids| !ids.is_empty() && ids.iter().all(|&i| (1..=acceptance::TITLES.len() as u32).contains(&i)));
                at(p("only"), ensure(ok, || format!("criteria are numbered 1 to {}", acceptance::TITLES.len())))?;
            }
        }
        if self.task.needs_seed() {
            at("seed", ensure(self.seed.is_some(), || format!("`{name}` needs a seed")))?;
        } else if matches!(self.task, Task::Selftest { .. }) && self.seed.is_none() {
            self.seed = Some(SELFTEST_SEED);
        }
        if self.budget.is_none() {
            self.budget = self.task.default_budget();
        }
        if let Some(b) = self.budget {
            at("budget", ensure(b >= 100, || format!("budget {b} is below 100")))?;
        }
        Ok(self)
    }
}

const REGION_NAMES: [&str; 7] = ["p", "q", "alpha", "t", "s", "beta", "n"];

fn check_axis(axis: &Axis) -> Result<()> {
    ensure(REGION_NAMES.contains(&axis.name.as_str()), || format!("unknown parameter `{}`", axis.name))?;
    ensure(axis.count >= 1, || "an axis needs at least one point".into())?;
    ensure(axis.lo.is_finite() && axis.hi.is_finite(), || "axis bounds must be finite".into())
}

/// Checks that the axes and fixed values name each parameter exactly once.
fn region_names(vary: &[Axis; 2], fixed: &BTreeMap<String, f64>) -> Result<()> {
    ensure(vary[0].name != vary[1].name, || "the two axes vary the same parameter".into())?;
    for k in fixed.keys() {
        ensure(REGION_NAMES.contains(&k.as_str()), || format!("unknown parameter `{k}`"))?;
        ensure(vary.iter().all(|a| &a.name != k), || format!("`{k}` is both varied and fixed"))?;
    }
    for name in REGION_NAMES {
        ensure(fixed.contains_key(name) || vary.iter().any(|a| a.name == name), || format!("parameter `{name}` is missing"))?;
    }
    Ok(())
}

/// The structured output of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub results: Value,
    /// Exit code of the run.
    pub status: i32,
    pub wall_clock_seconds: f64,
}

/// One row of a phase diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub param1: f64,
    pub param2: f64,
    /// Whether the inclusion holds.
    pub verdict: bool,
    /// Signed margin of the deciding inequality (right side minus left).
    pub statistic: f64,
    /// Whether the deciding inequality is strict.
    pub strict: bool,
}

/// Writes `param1,param2,verdict,statistic,strict` rows to `path`.
pub fn emit_phase_csv(rows: &[PhaseRow], path: &Path) -> Result<()> {
    ensure(!rows.is_empty(), || "refusing to write an empty grid".into())?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::Contract(format!("cannot write {}: {e}", path.display())))
}

/// The inclusion verdict at one parameter point with the margin of the
/// inequality that decides it.
pub fn phase_row(param1: f64, param2: f64, v: &BTreeMap<&str, f64>) -> Result<PhaseRow> {
    let (p, q, alpha, t, s, beta) = (v["p"], v["q"], v["alpha"], v["t"], v["s"], v["beta"]);
    let n_raw = v["n"];
    ensure(n_raw >= 1.0 && n_raw.fract() == 0.0, || format!("n = {n_raw} must be a positive integer"))?;
    let n = n_raw as usize;
    let cond = inclusion_condition(p, q, alpha, t, s, beta, n)?;
    let nf = n as f64;
    let (a, b) = ((nf + 1.0 + alpha) / q, (nf + 1.0 + beta) / s);
    let (statistic, strict) = if p >= t { (b - a, q > s) } else { (b + nf / t - a - nf / p, false) };
    Ok(PhaseRow { param1, param2, verdict: cond.is_some(), statistic, strict })
}

fn region_rows(vary: &[Axis; 2], fixed: &BTreeMap<String, f64>) -> Result<Vec<PhaseRow>> {
    region_names(vary, fixed)?;
    let mut rows = Vec::new();
    for x in vary[0].values() {
        for y in vary[1].values() {
            let mut v: BTreeMap<&str, f64> = fixed.iter().map(|(k, &x)| (k.as_str(), x)).collect();
            v.insert(vary[0].name.as_str(), x);
            v.insert(vary[1].name.as_str(), y);
            rows.push(phase_row(x, y, &v)?);
        }
    }
    Ok(rows)
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Internal(e.to_string()))
}

/// Runs a resolved config, returning the results and the exit status.
pub fn execute(config: &ExperimentConfig) -> Result<(Value, i32)> {
    let seed = config.seed.unwrap_or(0);
    let budget = config.budget.unwrap_or(FUNCTIONAL_BUDGET);
    let fopts = || FunctionalOptions::new(budget, seed);
    Ok(match &config.task {
        Task::Norm { function, measure, p, q, gamma } => {
            let e = tent_norm(function, measure, *p, *q, *gamma, budget, seed)?;
            (json!({ "tent_norm": e }), if e.diverged { 2 } else { 0 })
        }
        Task::Area { function, measure, s, t, gamma, points } => {
            let e = area_operator_lt_norm(function, measure, *s, *t, *gamma, *points, budget, seed)?;
            (json!({ "area_lt_norm": e }), if e.diverged { 2 } else { 0 })
        }
        Task::Carleson { measure, n } => (json!({ "carleson": carleson_constant(measure, *n, &fopts())? }), 0),
        Task::EmbedCheck { measure, params } => {
            let v = embedding_verdict(measure, params, &fopts())?;
            let status = if v.bounded == Bounded::Inconclusive { 2 } else { 0 };
            (json!({ "verdict": v }), status)
        }
        Task::Region { vary, fixed, csv } => {
            let rows = region_rows(vary, fixed)?;
            emit_phase_csv(&rows, csv)?;
            let inside = rows.iter().filter(|r| r.verdict).count();
            (json!({ "exact": true, "csv": csv, "rows": rows.len(), "inside": inside, "param1": vary[0].name, "param2": vary[1].name }), 0)
        }
        Task::Superposition { p, q, alpha, t, s, beta, n } => {
            let tent = superposition_degree(*p, *q, *alpha, *t, *s, *beta, *n)?;
            // Bergman reading: A^p_α → A^t_β.
            let bergman = bergman_superposition_degree(*p, *alpha, *t, *beta, *n)?;
            (json!({ "exact": true, "tent": tent, "bergman": bergman }), 0)
        }
        Task::Compactness { measure, params, rhos } => {
            (json!({ "compactness": compactness_evaluators(measure, params, rhos, &fopts())? }), 0)
        }
        Task::Lattice { n, delta, r_max } => {
            let l = build_lattice(*n, *delta, *r_max, seed)?;
            (
                json!({ "n": n, "delta": delta, "r_max": r_max, "points": l.len(), "overlap_bound": l.overlap_bound(), "report": l.report() }),
                0,
            )
        }
        Task::Selftest { only } => {
            let ids: Vec<u32> = only.clone().unwrap_or_else(|| (1..=acceptance::TITLES.len() as u32).collect());
            let outcomes: Vec<acceptance::Outcome> = ids.iter().map(|&id| acceptance::run(id, seed)).collect();
            for o in &outcomes {
                eprintln!("{o}");
            }
            let status = if outcomes.iter().all(|o| o.passed) { 0 } else { 1 };
            (json!({ "criteria": to_value(&outcomes)? }), status)
        }
    })
}

#[derive(Parser, Debug)]
#[command(name = "tentlab", version, about = "Numerical laboratory for holomorphic tent spaces on the unit ball")]
struct Cli {
    /// JSON experiment config; replaces the subcommand flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Where to write the run report (stdout otherwise).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tent norm of a function against a measure.
    Norm(FnArgs),
    /// L^t norm of the area operator.
    Area(FnArgs),
    /// Carleson constants of a measure.
    Carleson(MeasureArgs),
    /// Boundedness verdict of the embedding.
    EmbedCheck(EmbedArgs),
    /// Inclusion phase diagram over two parameters.
    Region(RegionArgs),
    /// Degree bound of superposition operators.
    Superposition(ParamArgs),
    /// Truncated functionals for compactness.
    Compactness(EmbedArgs),
    /// Build and verify a δ-lattice.
    Lattice(LatticeArgs),
    /// Run the acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
}

impl ParamArgs {
    fn given(&self) -> bool {
        [self.p, self.q, self.s, self.t, self.alpha, self.beta, self.gamma, self.r].iter().any(Option::is_some) || self.n.is_some()
    }
}

#[derive(Args, Debug)]
struct FnArgs {
    /// Function as JSON, e.g. `{"variant":"polynomial","terms":[[[2],[1,0]]]}`.
    #[arg(long)]
    function: Option<String>,
    /// Measure as JSON, e.g. `{"variant":"weighted_volume","beta":1}`.
    #[arg(long)]
    measure: Option<String>,
    /// Boundary points of `area`.
    #[arg(long)]
    points: Option<usize>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    measure: Option<String>,
    /// Truncation radii of `compactness`, comma separated.
    #[arg(long, value_delimiter = ',')]
    rhos: Option<Vec<f64>>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args, Debug)]
struct RegionArgs {
    /// `name:lo..hi:count`, given twice.
    #[arg(long)]
    vary: Vec<String>,
    /// `name=value` pairs, comma separated.
    #[arg(long, value_delimiter = ',')]
    fixed: Vec<String>,
    /// CSV destination.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LatticeArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Criteria to run, comma separated.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<u32>>,
}

fn need<T>(v: Option<T>, path: &str) -> std::result::Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError { path: path.into(), message: "missing value".into() })
}

fn json_arg<T: for<'de> Deserialize<'de>>(v: Option<&String>, path: &str) -> std::result::Result<T, ConfigError> {
    let text = need(v, path)?;
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { path.to_string() } else { format!("{path}.{inner}") };
        ConfigError { path, message: e.into_inner().to_string() }
    })
}

fn params_from(a: &ParamArgs, name: &str) -> std::result::Result<TentParams, ConfigError> {
    let f = |v: Option<f64>, field: &str| need(v, &format!("task.{name}.params.{field}"));
    Ok(TentParams {
        p: f(a.p, "p")?,
        q: f(a.q, "q")?,
        s: f(a.s, "s")?,
        t: f(a.t, "t")?,
        alpha: a.alpha.unwrap_or(0.0),
        beta: a.beta.unwrap_or(0.0),
        n: need(a.n, &format!("task.{name}.params.n"))?,
        gamma: a.gamma.unwrap_or(DEFAULT_APERTURE),
        r: a.r.unwrap_or(DEFAULT_RADIUS),
    })
}

fn payload_given(c: &Command) -> bool {
    match c {
        Command::Norm(a) | Command::Area(a) => a.function.is_some() || a.measure.is_some() || a.points.is_some() || a.params.given(),
        Command::Carleson(a) => a.measure.is_some() || a.n.is_some(),
        Command::EmbedCheck(a) | Command::Compactness(a) => a.measure.is_some() || a.rhos.is_some() || a.params.given(),
        Command::Region(a) => !a.vary.is_empty() || !a.fixed.is_empty() || a.csv.is_some(),
        Command::Superposition(a) => a.given(),
        Command::Lattice(a) => a.n.is_some() || a.delta.is_some() || a.r_max.is_some(),
        Command::Selftest(a) => a.only.is_some(),
    }
}

fn task_from_flags(c: &Command) -> std::result::Result<Task, ConfigError> {
    Ok(match c {
        Command::Norm(a) => Task::Norm {
            function: json_arg(a.function.as_ref(), "task.norm.function")?,
            measure: json_arg(a.measure.as_ref(), "task.norm.measure")?,
            p: need(a.params.p, "task.norm.p")?,
            q: need(a.params.q, "task.norm.q")?,
            gamma: a.params.gamma.unwrap_or(DEFAULT_APERTURE),
        },
        Command::Area(a) => Task::Area {
            function: json_arg(a.function.as_ref(), "task.area.function")?,
            measure: json_arg(a.measure.as_ref(), "task.area.measure")?,
            s: need(a.params.s, "task.area.s")?,
            t: need(a.params.t, "task.area.t")?,
            gamma: a.params.gamma.unwrap_or(DEFAULT_APERTURE),
            points: a.points.unwrap_or_else(default_points),
        },
        Command::Carleson(a) => {
            Task::Carleson { measure: json_arg(a.measure.as_ref(), "task.carleson.measure")?, n: need(a.n, "task.carleson.n")? }
        }
        Command::EmbedCheck(a) => Task::EmbedCheck {
            measure: json_arg(a.measure.as_ref(), "task.embed-check.measure")?,
            params: params_from(&a.params, "embed-check")?,
        },
        Command::Compactness(a) => Task::Compactness {
            measure: json_arg(a.measure.as_ref(), "task.compactness.measure")?,
            params: params_from(&a.params, "compactness")?,
            rhos: a.rhos.clone().unwrap_or_else(default_rhos),
        },
        Command::Region(a) => {
            let err = |path: String, e: Error| ConfigError { path, message: e.to_string() };
            if a.vary.len() != 2 {
                return Err(ConfigError { path: "task.region.vary".into(), message: format!("expected two axes, got {}", a.vary.len()) });
            }
            let x: Axis = a.vary[0].parse().map_err(|e| err("task.region.vary[0]".into(), e))?;
            let y: Axis = a.vary[1].parse().map_err(|e| err("task.region.vary[1]".into(), e))?;
            let mut fixed = BTreeMap::new();
            for pair in &a.fixed {
                let path = "task.region.fixed".to_string();
                let (k, v) =
                    pair.split_once('=').ok_or_else(|| err(path.clone(), Error::Contract(format!("`{pair}` is not name=value"))))?;
                let v: f64 = v.trim().parse().map_err(|_| err(path.clone(), Error::Contract(format!("`{v}` is not a number"))))?;
                fixed.insert(k.trim().to_string(), v);
            }
            Task::Region { vary: [x, y], fixed, csv: a.csv.clone().unwrap_or_else(default_csv) }
        }
        Command::Superposition(a) => Task::Superposition {
            p: need(a.p, "task.superposition.p")?,
            q: need(a.q, "task.superposition.q")?,
            alpha: a.alpha.unwrap_or(0.0),
            t: need(a.t, "task.superposition.t")?,
            s: need(a.s, "task.superposition.s")?,
            beta: a.beta.unwrap_or(0.0),
            n: need(a.n, "task.superposition.n")?,
        },
        Command::Lattice(a) => Task::Lattice {
            n: need(a.n, "task.lattice.n")?,
            delta: need(a.delta, "task.lattice.delta")?,
            r_max: need(a.r_max, "task.lattice.r_max")?,
        },
        Command::Selftest(a) => Task::Selftest { only: a.only.clone() },
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Norm(_) => "norm",
        Command::Area(_) => "area",
        Command::Carleson(_) => "carleson",
        Command::EmbedCheck(_) => "embed-check",
        Command::Region(_) => "region",
        Command::Superposition(_) => "superposition",
        Command::Compactness(_) => "compactness",
        Command::Lattice(_) => "lattice",
        Command::Selftest(_) => "selftest",
    }
}

fn build_config(cli: &Cli) -> std::result::Result<ExperimentConfig, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => {
            if payload_given(&cli.command) {
                return Err(ConfigError { path: "task".into(), message: "subcommand flags cannot be combined with --config".into() });
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError { path: ".".into(), message: format!("cannot read {}: {e}", path.display()) })?;
            let config = parse_config(&text)?;
            let want = command_name(&cli.command);
            if config.task.name() != want {
                return Err(ConfigError {
                    path: "task".into(),
                    message: format!("config describes `{}`, not `{want}`", config.task.name()),
                });
            }
            config
        }
        None => ExperimentConfig { seed: None, budget: None, out: None, task: task_from_flags(&cli.command)? },
    };
    config.seed = cli.seed.or(config.seed);
    config.budget = cli.budget.or(config.budget);
    config.out = cli.out.clone().or(config.out);
    config.resolve()
}

fn write_report(report: &RunReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Internal(e.to_string()))? + "\n";
    match &report.config.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Contract(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    crate::rng::configure_threads();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let start = Instant::now();
    let (results, status) = match execute(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        results,
        status,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    if let Err(e) = write_report(&report) {
        eprintln!("error: {e}");
        return 1;
    }
    status
}
