//! Strong-error estimation against path-coupled exact solutions and
//! log-log rate fitting.
//!
//! Every path first builds its [`CoupledPath`], then feeds the
//! grid-interval sums of that path to the scheme, so the scheme and the
//! exact solution share one driving path.

use std::fmt;
use std::str::FromStr;

use crate::csv_row;
use crate::error::{capability, domain, Error, Result};
use crate::grid_stats::{gamma_abs_moment, largest_gap};
use crate::levy::LevyModel;
use crate::output::Csv;
use crate::reference::{couple, exact_states, exact_supported, CoupledPath};
use crate::rng::{substream, tag, Parallelism, PathRng};
use crate::scheme::{chain_terminal, run_chain, RandomGrid, SdeProblem, StopRule};
use crate::stats::{fit_loglog, Estimate, SlopeFit};

/// Smallest admissible number of paths per rung.
pub const MIN_PATHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    EulerPoisson,
    Enhanced,
    EulerMaruyama,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::EulerPoisson, Scheme::Enhanced, Scheme::EulerMaruyama];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::EulerPoisson => "euler_poisson",
            Scheme::Enhanced => "enhanced",
            Scheme::EulerMaruyama => "euler_maruyama",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| domain(format!("unknown scheme '{s}'")))
    }
}

fn check_pair(problem: &SdeProblem, model: &LevyModel, paths: usize) -> Result<()> {
    if paths < MIN_PATHS {
        return Err(domain(format!("at least {MIN_PATHS} paths are required")));
    }
    if !exact_supported(problem, model) {
        return Err(capability(format!(
            "no exact reference for coefficient '{}' with this model",
            problem.coefficient().name()
        )));
    }
    Ok(())
}

/// Scheme grid for one path.
fn scheme_grid(scheme: Scheme, n: usize, horizon: f64, rng: &mut PathRng) -> Result<Vec<f64>> {
    Ok(match scheme {
        Scheme::EulerPoisson => RandomGrid::sample_fixed(n, horizon, rng)?.arrivals().to_vec(),
        Scheme::Enhanced => RandomGrid::sample_past_horizon(n, horizon, rng)?.arrivals().to_vec(),
        Scheme::EulerMaruyama => (0..=n)
            .map(|i| if i == n { horizon } else { i as f64 * horizon / n as f64 })
            .collect(),
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `|Y_T - scheme terminal|²` on one coupled path.
fn path_error(problem: &SdeProblem, model: &LevyModel, scheme: Scheme, n: usize, rng: &mut PathRng) -> Result<f64> {
    let grid = scheme_grid(scheme, n, problem.horizon(), rng)?;
    let path = couple(&grid, problem.horizon(), &[], model, rng)?;
    let truth = exact_states(problem, model, &path)?;
    let dy = problem.dim_y();
    let h = path.horizon_index();
    let approx = chain_terminal(problem, &path.grid_increments())?;
    Ok(squared_distance(&truth[h * dy..(h + 1) * dy], &approx))
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// Mean-square terminal error over `paths` coupled paths. Path `j` uses
/// substream `j` of `(master_seed, "mse", n)`, so different schemes at the
/// same `n` see the same random streams.
pub fn estimate_mse(
    problem: &SdeProblem,
    model: &LevyModel,
    scheme: Scheme,
    n: usize,
    paths: usize,
    master_seed: u64,
    par: Parallelism,
) -> Result<Estimate> {
    check_pair(problem, model, paths)?;
    if n == 0 {
        return Err(domain("n must be >= 1"));
    }
    let t = tag("mse", n as u64);
    let errs = collect(par.map(paths, |j| {
        let mut rng = substream(master_seed, t, j as u64);
        path_error(problem, model, scheme, n, &mut rng)
    }))?;
    Ok(Estimate::from_samples(&errs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scheme: String,
    pub problem_id: String,
    pub n_values: Vec<usize>,
    pub mse: Vec<Estimate>,
    pub fit: SlopeFit,
    pub paths_per_n: usize,
    pub master_seed: u64,
}

impl ConvergenceReport {
    fn build(
        scheme: &str,
        problem_id: &str,
        n_values: &[usize],
        mse: Vec<Estimate>,
        paths: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let x: Vec<f64> = n_values.iter().map(|n| *n as f64).collect();
        let y: Vec<f64> = mse.iter().map(|e| e.mean).collect();
        let se: Vec<f64> = mse.iter().map(|e| e.se).collect();
        let fit = fit_loglog(&x, &y, &se).ok_or_else(|| domain("log-log fit needs positive MSE values"))?;
        Ok(Self {
            scheme: scheme.to_string(),
            problem_id: problem_id.to_string(),
            n_values: n_values.to_vec(),
            mse,
            fit,
            paths_per_n: paths,
            master_seed,
        })
    }

    pub fn slope_in(&self, lo: f64, hi: f64) -> bool {
        self.fit.slope >= lo && self.fit.slope <= hi
    }

    /// Rungs where the MSE increases by more than 2 combined standard
    /// errors.
    pub fn monotonicity_violations(&self) -> usize {
        self.mse
            .windows(2)
            .filter(|w| w[1].mean - w[0].mean > 2.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt())
            .count()
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["scheme", "n", "mse", "se", "slope", "slope_ci_lo", "slope_ci_hi"]);
        for (n, e) in self.n_values.iter().zip(&self.mse) {
            csv.row(csv_row![
                self.scheme.as_str(),
                *n,
                e.mean,
                e.se,
                self.fit.slope,
                self.fit.ci_lo,
                self.fit.ci_hi
            ]);
        }
        csv
    }
}

fn check_ladder(n_values: &[usize]) -> Result<()> {
    if n_values.len() < 5 {
        return Err(domain("a rate ladder needs at least 5 values of n"));
    }
    if n_values.contains(&0) {
        return Err(domain("n values must be >= 1"));
    }
    let r0 = n_values[1] as f64 / n_values[0] as f64;
    let geometric = r0 > 1.0
        && n_values
            .windows(2)
            .all(|w| ((w[1] as f64 / w[0] as f64) - r0).abs() <= 1e-9 * r0);
    if !geometric {
        return Err(domain("n values must form an increasing geometric sequence"));
    }
    Ok(())
}

/// Problem label used in reports.
pub fn problem_id(problem: &SdeProblem) -> String {
    format!(
        "{}|y0={:?}|T={}",
        problem.coefficient().name(),
        problem.y0(),
        problem.horizon()
    )
}

pub fn rate_ladder(
    problem: &SdeProblem,
    model: &LevyModel,
    scheme: Scheme,
    n_values: &[usize],
    paths: usize,
    master_seed: u64,
    par: Parallelism,
) -> Result<ConvergenceReport> {
    check_ladder(n_values)?;
    let mse = n_values
        .iter()
        .map(|&n| estimate_mse(problem, model, scheme, n, paths, master_seed, par))
        .collect::<Result<Vec<_>>>()?;
    ConvergenceReport::build(scheme.name(), &problem_id(problem), n_values, mse, paths, master_seed)
}

/// Per-index errors `Ê|Y_{iT/n} - Ỹ_{t_i}|²`, `i = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMarginalScan {
    pub n: usize,
    pub per_index: Vec<Estimate>,
    pub argmax: usize,
}

impl GridMarginalScan {
    pub fn max(&self) -> Estimate {
        self.per_index[self.argmax]
    }
}

pub fn grid_marginal_error_scan(
    problem: &SdeProblem,
    model: &LevyModel,
    n: usize,
    paths: usize,
    master_seed: u64,
    par: Parallelism,
) -> Result<GridMarginalScan> {
    check_pair(problem, model, paths)?;
    if n == 0 {
        return Err(domain("n must be >= 1"));
    }
    let horizon = problem.horizon();
    let det: Vec<f64> = (1..=n)
        .map(|i| if i == n { horizon } else { i as f64 * horizon / n as f64 })
        .collect();
    let dy = problem.dim_y();
    let t = tag("marginal", n as u64);
    let per_path = collect(par.map(paths, |j| -> Result<Vec<f64>> {
        let mut rng = substream(master_seed, t, j as u64);
        let grid = RandomGrid::sample_fixed(n, horizon, &mut rng)?;
        let path = couple(grid.arrivals(), horizon, &det, model, &mut rng)?;
        let truth = exact_states(problem, model, &path)?;
        let chain = run_chain(problem, path.grid_increments(), Some(grid), StopRule::FixedN)?;
        let mut errs = Vec::with_capacity(n + 1);
        errs.push(0.0);
        for (i, s) in det.iter().enumerate() {
            let k = path.index_of(*s).ok_or_else(|| domain("deterministic time missing from path"))?;
            errs.push(squared_distance(&truth[k * dy..(k + 1) * dy], chain.state(i + 1)));
        }
        Ok(errs)
    }))?;
    let per_index: Vec<Estimate> = (0..=n)
        .map(|i| Estimate::from_iter(per_path.iter().map(|e| e[i])))
        .collect();
    let argmax = (0..=n)
        .max_by(|a, b| per_index[*a].mean.total_cmp(&per_index[*b].mean))
        .unwrap_or(0);
    Ok(GridMarginalScan { n, per_index, argmax })
}

/// Ladder of the max-over-index grid-marginal error.
pub fn grid_marginal_ladder(
    problem: &SdeProblem,
    model: &LevyModel,
    n_values: &[usize],
    paths: usize,
    master_seed: u64,
    par: Parallelism,
) -> Result<ConvergenceReport> {
    check_ladder(n_values)?;
    let mse = n_values
        .iter()
        .map(|&n| grid_marginal_error_scan(problem, model, n, paths, master_seed, par).map(|s| s.max()))
        .collect::<Result<Vec<_>>>()?;
    ConvergenceReport::build("grid_marginal_max", &problem_id(problem), n_values, mse, paths, master_seed)
}

/// One rung of the discretization-bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationRow {
    pub n: usize,
    /// `Ê[max_{t_i ≤ T} |Y_{t_i} - Ỹ_{t_i}|²]`.
    pub sup_error: Estimate,
    /// `Ê[2τ + τ²]`.
    pub tau_moment: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationScan {
    pub rows: Vec<DiscretizationRow>,
    /// Ratio fitted at the smallest `n`.
    pub k_fitted: f64,
}

impl DiscretizationScan {
    /// The bound `sup_error ≤ K·Ê[2τ+τ²]` at every larger `n`, with a
    /// 3·SE allowance.
    pub fn holds(&self) -> bool {
        self.rows.iter().skip(1).all(|r| {
            let se = (r.sup_error.se.powi(2) + (self.k_fitted * r.tau_moment.se).powi(2)).sqrt();
            r.sup_error.mean - 3.0 * se <= self.k_fitted * r.tau_moment.mean
        })
    }
}

pub fn discretization_bound_scan(
    problem: &SdeProblem,
    model: &LevyModel,
    n_values: &[usize],
    paths: usize,
    master_seed: u64,
    par: Parallelism,
) -> Result<DiscretizationScan> {
    check_pair(problem, model, paths)?;
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(domain("n values must be >= 1"));
    }
    let horizon = problem.horizon();
    let dy = problem.dim_y();
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let t = tag("discretization", n as u64);
        let pairs = collect(par.map(paths, |j| -> Result<(f64, f64)> {
            let mut rng = substream(master_seed, t, j as u64);
            let grid = RandomGrid::sample_fixed(n, horizon, &mut rng)?;
            let path: CoupledPath = couple(grid.arrivals(), horizon, &[], model, &mut rng)?;
            let truth = exact_states(problem, model, &path)?;
            let chain = run_chain(problem, path.grid_increments(), Some(grid.clone()), StopRule::FixedN)?;
            let mut sup: f64 = 0.0;
            for (i, k) in path.grid_indices().into_iter().enumerate() {
                if path.times()[k] > horizon {
                    break;
                }
                sup = sup.max(squared_distance(&truth[k * dy..(k + 1) * dy], chain.state(i)));
            }
            let tau = largest_gap(&grid, horizon)?;
            Ok((sup, 2.0 * tau + tau * tau))
        }))?;
        rows.push(DiscretizationRow {
            n,
            sup_error: Estimate::from_iter(pairs.iter().map(|p| p.0)),
            tau_moment: Estimate::from_iter(pairs.iter().map(|p| p.1)),
        });
    }
    let k_fitted = rows[0].sup_error.mean / rows[0].tau_moment.mean;
    Ok(DiscretizationScan { rows, k_fitted })
}

/// `E|A(X_T - X_{t_n})|² = A²(v·E|T - t_n| + b²T²/n)` for `a ≡ A` and a
/// one-dimensional model with variance rate `v` and mean rate `b`.
pub fn hitting_error_closed_form(model: &LevyModel, a: f64, n: usize, horizon: f64) -> Result<f64> {
    let c = model
        .as_scalar()
        .ok_or_else(|| capability("closed-form hitting error needs a one-dimensional model"))?;
    let abs = gamma_abs_moment(n, horizon)?;
    let b = c.drift;
    Ok(a * a * (c.variance_rate() * abs + b * b * horizon * horizon / n as f64))
}
