//! Experiment driver for `levy-ep`: config parsing, registries, and
//! CSV/manifest emission.
//!
//! A config is flat `key = value` text:
//!
//! ```text
//! experiment = converge
//! model.kind = brownian
//! model.drift = 0.05
//! model.sigma = 1
//! problem.coefficient = linear
//! problem.y0 = 1
//! problem.horizon = 1
//! run.master_seed = 7
//! run.paths = 10000
//! run.n_values = 16, 32, 64, 128, 256, 512
//! converge.schemes = euler_poisson, enhanced
//! converge.slope_band = -0.75, -0.35
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use levy_ep::config::join_list;
use levy_ep::convergence::grid_marginal_ladder;
use levy_ep::grid_stats::{max_grid_deviation_check, tau_moment_scan, DeviationCheck};
use levy_ep::output::fmt_num;
use levy_ep::pide::{rothe_rows_csv, rothe_vs_monte_carlo, PideSetup, TestFunction};
use levy_ep::resolvent::{cf_checks_csv, validate_sampler_cf, wh_factorize};
use levy_ep::rng::tag;
use levy_ep::scheme::{run_chain, run_enhanced, run_euler_poisson, trajectories_csv, COEFFICIENT_NAMES};
use levy_ep::{
    rate_ladder, substream, Coefficient, Csv, Error, KvMap, LevyModel, Parallelism, RandomGrid, ResolventSampler,
    Scheme, SchemeTrajectory, SdeProblem, StopRule,
};
use serde_json::json;
use sha2::{Digest, Sha256};

pub const MODEL_NAMES: [&str; 4] = ["brownian", "compound_poisson", "jump_diffusion", "hyperexponential"];

/// Keys that do not influence results and are left out of the manifest.
const VOLATILE_KEYS: [&str; 2] = ["run.out", "run.workers"];

#[derive(Debug)]
pub enum CliError {
    /// Invalid or incomplete configuration; carries the field path.
    Usage { field: String, message: String },
    /// The model cannot serve the requested scheme or experiment.
    Capability { model: String, scheme: String, message: String },
    Runtime(String),
    Io(std::io::Error),
}

impl CliError {
    fn usage(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Usage {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Capability { .. } => 3,
            CliError::Runtime(_) | CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage { field, message } => write!(f, "usage error in `{field}`: {message}"),
            CliError::Capability { model, scheme, message } => {
                write!(f, "model `{model}` does not support `{scheme}`: {message}")
            }
            CliError::Runtime(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Maps a core error raised while reading section `section`.
fn config_error(section: &str, e: Error) -> CliError {
    match e {
        Error::Config { key, message } => {
            let field = if section.is_empty() || key.starts_with(section) {
                key
            } else {
                format!("{section}.{key}")
            };
            CliError::usage(field, message)
        }
        Error::Domain(m) => CliError::usage(section, m),
        other => CliError::Runtime(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Converge,
    Gridstats,
    ValidateSampler,
    Pide,
    Simulate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Converge,
        ExperimentKind::Gridstats,
        ExperimentKind::ValidateSampler,
        ExperimentKind::Pide,
        ExperimentKind::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::Gridstats => "gridstats",
            ExperimentKind::ValidateSampler => "validate-sampler",
            ExperimentKind::Pide => "pide",
            ExperimentKind::Simulate => "simulate",
        }
    }

    fn needs_problem(self) -> bool {
        matches!(
            self,
            ExperimentKind::Converge | ExperimentKind::Pide | ExperimentKind::Simulate
        )
    }

    fn needs_model(self) -> bool {
        self != ExperimentKind::Gridstats
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::usage("experiment", format!("unknown experiment `{s}`")))
    }
}

/// Builds a coefficient from the `problem` section.
fn coefficient_from_kv(kv: &KvMap) -> Result<Coefficient, CliError> {
    let name = kv
        .require_str("coefficient")
        .map_err(|e| config_error("problem", e))?;
    let get = |key: &str, default: f64| kv.get_or(key, default).map_err(|e| config_error("problem", e));
    Ok(match name {
        "zero" => Coefficient::zero(),
        "constant" => Coefficient::constant(get("value", 1.0)?),
        "linear" => Coefficient::linear(get("scale", 1.0)?),
        "sine" => Coefficient::sine(get("base", 0.5)?, get("amplitude", 0.5)?),
        other => {
            return Err(CliError::usage(
                "problem.coefficient",
                format!("unknown coefficient `{other}` (known: {})", COEFFICIENT_NAMES.join(", ")),
            ))
        }
    })
}

fn problem_from_kv(kv: &KvMap) -> Result<SdeProblem, CliError> {
    let coef = coefficient_from_kv(kv)?;
    let y0: f64 = kv.require("y0").map_err(|e| config_error("problem", e))?;
    let horizon: f64 = kv.get_or("horizon", 1.0).map_err(|e| config_error("problem", e))?;
    let k: Option<f64> = kv.get("k").map_err(|e| config_error("problem", e))?;
    match k {
        Some(k) => SdeProblem::new(coef, vec![y0], horizon, k),
        None => SdeProblem::with_auto_k(coef, vec![y0], horizon),
    }
    .map_err(|e| config_error("problem", e))
}

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: Option<LevyModel>,
    pub problem: Option<SdeProblem>,
    pub n_values: Vec<usize>,
    pub paths: usize,
    pub master_seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    raw: KvMap,
}

impl ExperimentConfig {
    /// Parses config text or a manifest written by an earlier run.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = if text.trim_start().starts_with('{') {
            let v: serde_json::Value =
                serde_json::from_str(text).map_err(|e| CliError::usage("manifest", e.to_string()))?;
            v.get("config")
                .and_then(|c| c.as_str())
                .ok_or_else(|| CliError::usage("manifest.config", "missing config text"))?
                .to_string()
        } else {
            text.to_string()
        };
        let kv = KvMap::parse(&text).map_err(|e| config_error("", e))?;
        Self::from_kv(kv)
    }

    pub fn from_kv(kv: KvMap) -> Result<Self, CliError> {
        let kind: ExperimentKind = kv
            .require_str("experiment")
            .map_err(|e| config_error("", e))?
            .parse()?;
        let model = if kind.needs_model() {
            let section = kv.section("model");
            if section.is_empty() {
                return Err(CliError::usage("model.kind", "missing model section"));
            }
            Some(LevyModel::from_kv(&section).map_err(|e| config_error("model", e))?)
        } else {
            None
        };
        let problem = if kind.needs_problem() {
            Some(problem_from_kv(&kv.section("problem"))?)
        } else {
            None
        };
        let run = kv.section("run");
        let master_seed: u64 = run
            .get("master_seed")
            .map_err(|e| config_error("run", e))?
            .ok_or_else(|| CliError::usage("run.master_seed", "master_seed is mandatory"))?;
        let default_paths = if kind == ExperimentKind::Simulate { 10 } else { 10_000 };
        let paths = run.get_or("paths", default_paths).map_err(|e| config_error("run", e))?;
        let n_values: Vec<usize> = run
            .get_list("n_values")
            .map_err(|e| config_error("run", e))?
            .unwrap_or_else(|| vec![16, 32, 64, 128, 256]);
        if n_values.is_empty() || n_values.contains(&0) {
            return Err(CliError::usage("run.n_values", "need positive step counts"));
        }
        let out = PathBuf::from(run.get_str("out").unwrap_or("out"));
        let workers = run.get_or("workers", 1usize).map_err(|e| config_error("run", e))?;
        Ok(Self {
            kind,
            model,
            problem,
            n_values,
            paths,
            master_seed,
            out,
            workers: workers.max(1),
            raw: kv,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self.raw.set("run.master_seed", seed);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_out(mut self, out: impl Into<PathBuf>) -> Self {
        self.out = out.into();
        self
    }

    /// Canonical config text without the keys that do not affect results.
    pub fn echo(&self) -> String {
        let mut kv = KvMap::new();
        for k in self.raw.keys() {
            if !VOLATILE_KEYS.contains(&k) {
                kv.set(k, self.raw.get_str(k).unwrap_or_default());
            }
        }
        kv.to_string()
    }

    fn section(&self, name: &str) -> KvMap {
        self.raw.section(name)
    }

    fn model_name(&self) -> String {
        self.raw.get_str("model.kind").unwrap_or("none").to_string()
    }

    fn par(&self) -> Parallelism {
        Parallelism::new(self.workers)
    }

    fn model(&self) -> &LevyModel {
        self.model.as_ref().expect("experiment requires a model")
    }

    fn problem(&self) -> &SdeProblem {
        self.problem.as_ref().expect("experiment requires a problem")
    }
}

/// One PASS/FAIL line.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub outputs: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub manifest: PathBuf,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Git-style object hash (`blob <len>\0<bytes>`) with SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

struct Artifacts {
    files: Vec<(String, Csv)>,
    checks: Vec<Check>,
}

impl Artifacts {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            checks: Vec::new(),
        }
    }
}

/// Runs the experiment and writes its CSVs and `manifest.json` to
/// `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let artifacts = match config.kind {
        ExperimentKind::Converge => converge(config)?,
        ExperimentKind::Gridstats => gridstats(config)?,
        ExperimentKind::ValidateSampler => validate_sampler(config)?,
        ExperimentKind::Pide => pide(config)?,
        ExperimentKind::Simulate => simulate(config)?,
    };
    fs::create_dir_all(&config.out)?;
    let mut outputs = Vec::new();
    let mut hashes = serde_json::Map::new();
    let mut tree = String::new();
    for (name, csv) in &artifacts.files {
        let path = config.out.join(name);
        csv.write_to(&path)?;
        let hash = content_hash(csv.as_str().as_bytes());
        tree.push_str(&format!("{hash} {name}\n"));
        hashes.insert(name.clone(), json!(hash));
        outputs.push(path);
    }
    let checks: Vec<serde_json::Value> = artifacts
        .checks
        .iter()
        .map(|c| json!({"name": c.name, "status": if c.pass { "PASS" } else { "FAIL" }, "detail": c.detail}))
        .collect();
    let all_pass = artifacts.checks.iter().all(|c| c.pass);
    let manifest = json!({
        "tool": "levy-ep",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.kind.name(),
        "master_seed": config.master_seed,
        "config": config.echo(),
        "outputs": hashes,
        "content_hash": content_hash(tree.as_bytes()),
        "checks": checks,
        "status": if all_pass { "PASS" } else { "FAIL" },
    });
    let manifest_path = config.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&manifest_path, text + "\n")?;
    Ok(RunOutcome {
        outputs,
        checks: artifacts.checks,
        manifest: manifest_path,
    })
}

fn band(kv: &KvMap, section: &str, key: &str) -> Result<Option<(f64, f64)>, CliError> {
    let Some(v) = kv.get_list::<f64>(key).map_err(|e| config_error(section, e))? else {
        return Ok(None);
    };
    match v.as_slice() {
        [lo, hi] if lo < hi => Ok(Some((*lo, *hi))),
        _ => Err(CliError::usage(format!("{section}.{key}"), "expected `low, high`")),
    }
}

fn capability_or(config: &ExperimentConfig, scheme: &str, e: Error) -> CliError {
    match e {
        Error::Capability(message) => CliError::Capability {
            model: config.model_name(),
            scheme: scheme.to_string(),
            message,
        },
        Error::Config { .. } | Error::Domain(_) => config_error("run", e),
        other => CliError::Runtime(other.to_string()),
    }
}

fn converge(config: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let kv = config.section("converge");
    let schemes: Vec<String> = kv
        .get_list("schemes")
        .map_err(|e| config_error("converge", e))?
        .unwrap_or_else(|| vec![Scheme::EulerPoisson.name().to_string()]);
    let slope_band = band(&kv, "converge", "slope_band")?;
    let marginal = kv.get_or("marginal", false).map_err(|e| config_error("converge", e))?;
    let mut art = Artifacts::new();
    let mut slopes = Vec::new();
    for name in &schemes {
        let scheme: Scheme = name
            .parse()
            .map_err(|_| CliError::usage("converge.schemes", format!("unknown scheme `{name}`")))?;
        let report = rate_ladder(
            config.problem(),
            config.model(),
            scheme,
            &config.n_values,
            config.paths,
            config.master_seed,
            config.par(),
        )
        .map_err(|e| capability_or(config, scheme.name(), e))?;
        if let Some((lo, hi)) = slope_band {
            art.checks.push(Check::new(
                format!("{}_slope", scheme.name()),
                report.slope_in(lo, hi),
                format!("slope {} in [{lo}, {hi}]", fmt_num(report.fit.slope)),
            ));
        }
        slopes.push((scheme, report.fit.slope));
        art.files.push((format!("converge_{}.csv", scheme.name()), report.to_csv()));
    }
    if let Some(gap) = kv.get::<f64>("min_slope_gap").map_err(|e| config_error("converge", e))? {
        let ep = slopes.iter().find(|(s, _)| *s == Scheme::EulerPoisson);
        let en = slopes.iter().find(|(s, _)| *s == Scheme::Enhanced);
        let (Some(ep), Some(en)) = (ep, en) else {
            return Err(CliError::usage(
                "converge.min_slope_gap",
                "needs both euler_poisson and enhanced in converge.schemes",
            ));
        };
        art.checks.push(Check::new(
            "enhanced_beats_euler_poisson",
            en.1 < ep.1 - gap,
            format!("{} < {} - {gap}", fmt_num(en.1), fmt_num(ep.1)),
        ));
    }
    if marginal {
        let report = grid_marginal_ladder(
            config.problem(),
            config.model(),
            &config.n_values,
            config.paths,
            config.master_seed,
            config.par(),
        )
        .map_err(|e| capability_or(config, Scheme::EulerPoisson.name(), e))?;
        if let Some((lo, hi)) = slope_band {
            art.checks.push(Check::new(
                "grid_marginal_slope",
                report.slope_in(lo, hi),
                format!("slope {} in [{lo}, {hi}]", fmt_num(report.fit.slope)),
            ));
        }
        art.files.push(("converge_grid_marginal.csv".into(), report.to_csv()));
    }
    Ok(art)
}

fn gridstats(config: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let kv = config.section("gridstats");
    let horizon: f64 = kv.get_or("horizon", 1.0).map_err(|e| config_error("gridstats", e))?;
    let p: u32 = kv.get_or("p", 2).map_err(|e| config_error("gridstats", e))?;
    let slope_band = band(&kv, "gridstats", "tau_slope_band")?;
    let mut art = Artifacts::new();
    let scan = tau_moment_scan(&config.n_values, horizon, config.paths, config.master_seed, config.par())
        .map_err(|e| config_error("run", e))?;
    let csv = scan.to_csv();
    let below = scan.rows.iter().all(|r| {
        r.tau.mean <= levy_ep::grid_stats::KAPPA_0 * horizon * (r.n as f64 / horizon + 1.0).ln() / r.n as f64
    });
    art.checks.push(Check::new(
        "tau_bound",
        below,
        format!("max ratio {}", fmt_num(scan.max_ratio())),
    ));
    if let Some((lo, hi)) = slope_band {
        art.checks.push(Check::new(
            "tau_slope",
            scan.tau_fit.slope >= lo && scan.tau_fit.slope <= hi,
            format!("slope {} in [{lo}, {hi}]", fmt_num(scan.tau_fit.slope)),
        ));
    }
    art.files.push(("gridstats_tau.csv".into(), csv));
    let rows = config
        .n_values
        .iter()
        .map(|&n| max_grid_deviation_check(n, horizon, p, config.paths, config.master_seed, config.par()))
        .collect::<levy_ep::Result<Vec<_>>>()
        .map_err(|e| config_error("gridstats", e))?;
    art.checks.push(Check::new(
        "max_deviation_bound",
        rows.iter().all(|r| r.pass),
        format!("p = {p}, {} rungs", rows.len()),
    ));
    art.files.push(("gridstats_deviation.csv".into(), DeviationCheck::csv(&rows)));
    Ok(art)
}

fn validate_sampler(config: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let kv = config.section("validate");
    let q: f64 = kv.get_or("q", 1.0).map_err(|e| config_error("validate", e))?;
    let thetas: Vec<f64> = kv
        .get_list("thetas")
        .map_err(|e| config_error("validate", e))?
        .unwrap_or_else(|| vec![-4.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 4.0]);
    let route = kv.get_str("sampler").unwrap_or("auto");
    let model = config.model();
    let sampler = match route {
        "auto" => ResolventSampler::new(model, q),
        "wiener_hopf" => ResolventSampler::wiener_hopf(model, q),
        "exact" => ResolventSampler::exact_path(model, q),
        other => {
            return Err(CliError::usage(
                "validate.sampler",
                format!("unknown sampler `{other}` (auto, wiener_hopf, exact)"),
            ))
        }
    }
    .map_err(|e| capability_or(config, &format!("resolvent sampler ({route})"), e))?;
    let mut rng = substream(config.master_seed, tag("validate", 0), 0);
    let rows = validate_sampler_cf(model, &sampler, &thetas, config.paths, &mut rng)
        .map_err(|e| capability_or(config, "cf validation", e))?;
    let mut art = Artifacts::new();
    let max_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    art.checks.push(Check::new(
        "cf_z",
        rows.iter().all(|r| !r.flagged()),
        format!("max |z| {}", fmt_num(max_z)),
    ));
    art.files.push(("validate_cf.csv".into(), cf_checks_csv(&rows)));
    // Models with rational exponents also get the factor identity check.
    if let Ok(f) = wh_factorize(model, q) {
        let mut csv = Csv::new(&["theta", "abs_error"]);
        let mut worst: f64 = 0.0;
        for k in 0..50 {
            let theta = -20.0 + 40.0 * k as f64 / 49.0;
            let psi = model.char_exponent(&[theta]).map_err(|e| CliError::Runtime(e.to_string()))?;
            let err = (f.product_cf(theta) - q / (q + psi)).norm();
            worst = worst.max(err);
            csv.row_nums(&[theta, err]);
        }
        art.checks.push(Check::new(
            "wiener_hopf_identity",
            worst < 1e-8,
            format!("max error {}", fmt_num(worst)),
        ));
        art.files.push(("validate_wiener_hopf.csv".into(), csv));
    }
    Ok(art)
}

fn pide(config: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let kv = config.section("pide");
    let f: TestFunction = kv
        .get_str("f")
        .unwrap_or("bump:1:0.5")
        .parse()
        .map_err(|e| config_error("pide.f", e))?;
    let x0: f64 = kv
        .get_or("x0", config.problem().y0()[0])
        .map_err(|e| config_error("pide", e))?;
    let steps: usize = kv.get_or("steps", 8).map_err(|e| config_error("pide", e))?;
    let nodes: usize = kv.get_or("nodes", 1024).map_err(|e| config_error("pide", e))?;
    let setup = PideSetup {
        nodes,
        paths: config.paths,
        master_seed: config.master_seed,
        par: config.par(),
    };
    let rows = rothe_vs_monte_carlo(config.problem(), config.model(), &f, steps, x0, setup)
        .map_err(|e| capability_or(config, "rothe", e))?;
    let mut art = Artifacts::new();
    let max_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    art.checks.push(Check::new(
        "rothe_vs_monte_carlo",
        rows.iter().all(|r| r.z.abs() < 5.0),
        format!("max |z| {}", fmt_num(max_z)),
    ));
    art.files.push(("pide_rothe.csv".into(), rothe_rows_csv(&rows)));
    Ok(art)
}

fn simulate(config: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let kv = config.section("simulate");
    let name = kv.get_str("scheme").unwrap_or("euler_poisson");
    let scheme: Scheme = name
        .parse()
        .map_err(|_| CliError::usage("simulate.scheme", format!("unknown scheme `{name}`")))?;
    let n = config.n_values[0];
    let (problem, model) = (config.problem(), config.model());
    let t = tag("simulate", n as u64);
    let paths = config
        .par()
        .map(config.paths, |j| -> levy_ep::Result<SchemeTrajectory> {
            let mut rng = substream(config.master_seed, t, j as u64);
            match scheme {
                Scheme::EulerPoisson => run_euler_poisson(problem, model, n, &mut rng),
                Scheme::Enhanced => run_enhanced(problem, model, n, &mut rng),
                Scheme::EulerMaruyama => {
                    let horizon = problem.horizon();
                    let dt = horizon / n as f64;
                    let times: Vec<f64> = (0..=n).map(|i| if i == n { horizon } else { i as f64 * dt }).collect();
                    let grid = RandomGrid::from_arrivals(times, n as f64 / horizon, n)?;
                    let mut inc = vec![0.0; n * model.dim()];
                    for step in inc.chunks_mut(model.dim()) {
                        model.sample_increment(dt, &mut rng, step)?;
                    }
                    run_chain(problem, inc, Some(grid), StopRule::Deterministic)
                }
            }
        })
        .into_iter()
        .collect::<levy_ep::Result<Vec<_>>>()
        .map_err(|e| capability_or(config, scheme.name(), e))?;
    let mut art = Artifacts::new();
    art.files.push((format!("simulate_{}.csv", scheme.name()), trajectories_csv(&paths)));
    Ok(art)
}

/// Text listing of every name a config may reference.
pub fn list_registries() -> String {
    let schemes: Vec<&str> = Scheme::ALL.iter().map(|s| s.name()).collect();
    let experiments: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
    let mut out = String::new();
    out.push_str(&format!("schemes: {}\n", join_list(&schemes)));
    out.push_str(&format!("models: {}\n", join_list(&MODEL_NAMES)));
    out.push_str("coefficients:\n");
    out.push_str("  zero (a(y) = 0)\n");
    out.push_str("  constant (a(y) = value)\n");
    out.push_str("  linear (a(y) = scale * y)\n");
    out.push_str("  sine (a(y) = base + amplitude * sin(y))\n");
    out.push_str(&format!("experiments: {}\n", join_list(&experiments)));
    out.push_str("test functions: identity, square, constant:C, bump:CENTER:WIDTH\n");
    out
}

/// Reads a config or manifest from disk.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::parse(&text)
}
