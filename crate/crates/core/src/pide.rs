//! One-dimensional generator of `Y`, its implicit (Rothe) time stepping,
//! and Monte Carlo cross-checks of `u_i(x) = E_x[f(Y_{t_i})]`.
//!
//! The local part (drift, diffusion and the `-λ` killing of the jump term)
//! is a tridiagonal matrix on a uniform grid; the nonlocal jump sum
//! `λΣ p_k u(x + a(x)z_k)` is handled by fixed-point iteration. Values
//! beyond the grid are extended by constants.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Exp1};

use crate::csv_row;
use crate::error::{capability, domain, Error, Result};
use crate::levy::{JumpLaw, JumpMeasure, LevyModel, LevyTriplet};
use crate::output::Csv;
use crate::reference::{couple, reference_states};
use crate::rng::{substream, tag, Parallelism};
use crate::scheme::{Coefficient, RandomGrid, SdeProblem};
use crate::stats::{z_score, Estimate};

pub const MIN_NODES: usize = 16;
const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_ITER: usize = 200;

/// Uniform grid on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    lo: f64,
    hi: f64,
    nodes: usize,
}

impl SpatialGrid {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if nodes < MIN_NODES {
            return Err(domain(format!("spatial grid needs at least {MIN_NODES} nodes")));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(domain("spatial grid needs finite lo < hi"));
        }
        Ok(Self { lo, hi, nodes })
    }

    /// Grid of `nodes` points with spacing `h` and `center` on a node.
    pub fn around(center: f64, h: f64, nodes: usize) -> Result<Self> {
        let left = (nodes - 1) / 2;
        let lo = center - left as f64 * h;
        Self::new(lo, lo + (nodes - 1) as f64 * h, nodes)
    }

    /// Domain from the law of `Y` up to time `2T` (covering arrival times
    /// past `T`): mean ± 6 standard deviations. For linear coefficients the
    /// lower end is clipped at `0.01·y₀`, where the process cannot go.
    pub fn auto(problem: &SdeProblem, model: &LevyModel, nodes: usize) -> Result<Self> {
        let (y0, c) = scalar_pair(problem, model)?;
        let t = 2.0 * problem.horizon();
        let b = c.drift;
        let v = c.variance_rate();
        let (lo, hi) = match problem.coefficient() {
            Coefficient::Zero { .. } => (y0 - 1.0, y0 + 1.0),
            Coefficient::Constant { matrix, .. } => {
                let a = matrix[0];
                let mean = y0 + a * b * t;
                let sd = a.abs() * (v * t).sqrt();
                let w = (6.0 * sd).max(1.0);
                (mean - w, mean + w)
            }
            Coefficient::Linear { scale, .. } => {
                let mean = y0 * (scale * b * t).exp();
                let sd = mean.abs() * ((scale * scale * v * t).exp() - 1.0).sqrt();
                let lo = (mean - 6.0 * sd).max(0.01 * y0.min(mean));
                (lo, mean + 6.0 * sd)
            }
            Coefficient::Sine {
                base, amplitude, ..
            } => {
                let a = base.abs() + amplitude.abs();
                let w = a * b.abs() * t + 6.0 * a * (v * t).sqrt();
                (y0 - w.max(1.0), y0 + w.max(1.0))
            }
            Coefficient::Custom { .. } => {
                return Err(capability("automatic domain needs a built-in coefficient"))
            }
        };
        Self::new(lo, hi, nodes)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.hi
        } else {
            self.lo + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }

    /// Linear interpolation with constant extension.
    pub fn interpolate(&self, u: &[f64], x: f64) -> f64 {
        if x <= self.lo {
            return u[0];
        }
        if x >= self.hi {
            return u[self.nodes - 1];
        }
        let s = (x - self.lo) / self.h();
        let i = (s.floor() as usize).min(self.nodes - 2);
        let w = s - i as f64;
        u[i] * (1.0 - w) + u[i + 1] * w
    }

    /// Index of the node at `x`.
    pub fn node_index(&self, x: f64) -> Result<usize> {
        if !(x >= self.lo - 1e-9 * self.h() && x <= self.hi + 1e-9 * self.h()) {
            return Err(domain(format!("x = {x} outside [{}, {}]", self.lo, self.hi)));
        }
        let i = ((x - self.lo) / self.h()).round() as usize;
        let i = i.min(self.nodes - 1);
        if (self.x(i) - x).abs() > 1e-9 * self.h() {
            return Err(domain(format!("x = {x} is not a grid node")));
        }
        Ok(i)
    }
}

fn scalar_pair<'a>(problem: &SdeProblem, model: &'a LevyModel) -> Result<(f64, &'a LevyTriplet)> {
    if problem.dim_y() != 1 || problem.dim_x() != 1 {
        return Err(capability("the PIDE solver is one-dimensional"));
    }
    let c = model
        .as_scalar()
        .ok_or_else(|| capability("the PIDE solver needs a one-dimensional model"))?;
    Ok((problem.y0()[0], c))
}

/// Discrete jump law `(size, probability)` and intensity.
fn discrete_jumps(c: &LevyTriplet) -> Result<(f64, Vec<(f64, f64)>)> {
    match &c.jumps {
        JumpMeasure::None => Ok((0.0, Vec::new())),
        JumpMeasure::CompoundPoisson { rate, .. } if *rate == 0.0 => Ok((0.0, Vec::new())),
        JumpMeasure::CompoundPoisson {
            rate,
            law: JumpLaw::TwoPoint { up, down, p_up },
        } => Ok((*rate, vec![(*up, *p_up), (*down, 1.0 - *p_up)])),
        _ => Err(capability("the PIDE solver supports two-point jump laws only")),
    }
}

/// Generator of `Y` discretised on a spatial grid.
#[derive(Debug, Clone)]
pub struct PideOperator {
    grid: SpatialGrid,
    /// Coefficient of `u_{i-1}`, `u_i`, `u_{i+1}` in the local part.
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    intensity: f64,
    jumps: Vec<(f64, f64)>,
    a: Vec<f64>,
}

impl PideOperator {
    /// Assembles the operator. Rejects degenerate diffusion
    /// (`σ·min|a| = 0` on the grid).
    pub fn new(problem: &SdeProblem, model: &LevyModel, grid: SpatialGrid) -> Result<Self> {
        let (_, c) = scalar_pair(problem, model)?;
        let (intensity, jumps) = discrete_jumps(c)?;
        let h = grid.h();
        let m = grid.len();
        let coef = problem.coefficient();
        let a: Vec<f64> = (0..m).map(|i| coef.scalar(grid.x(i))).collect();
        let min_a = a.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        if !(c.sigma * min_a > 0.0) {
            return Err(domain("degenerate diffusion: need sigma * inf|a| > 0 on the grid"));
        }
        let drift = c.compensated_drift();
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for i in 0..m {
            let d = 0.5 * a[i] * a[i] * c.sigma * c.sigma / (h * h);
            let conv = a[i] * drift;
            // Central differences unless the cell Péclet number exceeds one,
            // then upwind; keeps the discrete maximum principle.
            let (cl, cu) = if conv.abs() * h <= 2.0 * d * h * h {
                (-conv / (2.0 * h), conv / (2.0 * h))
            } else if conv > 0.0 {
                (0.0, conv / h)
            } else {
                (-conv / h, 0.0)
            };
            lower[i] = d + cl;
            upper[i] = d + cu;
            diag[i] = -(lower[i] + upper[i]) - intensity;
        }
        // Constant extension: ghost values equal the boundary values.
        diag[0] += lower[0];
        lower[0] = 0.0;
        diag[m - 1] += upper[m - 1];
        upper[m - 1] = 0.0;
        Ok(Self {
            grid,
            lower,
            diag,
            upper,
            intensity,
            jumps,
            a,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// `λΣ p_k u(x_i + a(x_i) z_k)` at every node.
    fn jump_term(&self, u: &[f64]) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| {
                let x = self.grid.x(i);
                self.intensity
                    * self
                        .jumps
                        .iter()
                        .map(|(z, p)| p * self.grid.interpolate(u, x + self.a[i] * z))
                        .sum::<f64>()
            })
            .collect()
    }

    /// `(𝒜u)(x_i)`.
    pub fn apply_at(&self, u: &[f64], i: usize) -> f64 {
        let m = self.grid.len();
        let mut v = self.diag[i] * u[i];
        if i > 0 {
            v += self.lower[i] * u[i - 1];
        }
        if i + 1 < m {
            v += self.upper[i] * u[i + 1];
        }
        if self.intensity > 0.0 {
            let x = self.grid.x(i);
            v += self.intensity
                * self
                    .jumps
                    .iter()
                    .map(|(z, p)| p * self.grid.interpolate(u, x + self.a[i] * z))
                    .sum::<f64>();
        }
        v
    }

    /// Solves `(I - dt·L_local)u = rhs` in correction form `u = rhs + δ`,
    /// so constants are reproduced exactly when there is no killing.
    fn solve_local(&self, dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let m = rhs.len();
        let residual: Vec<f64> = (0..m)
            .map(|i| {
                let mut v = -self.intensity * rhs[i];
                if i > 0 {
                    v += self.lower[i] * (rhs[i - 1] - rhs[i]);
                }
                if i + 1 < m {
                    v += self.upper[i] * (rhs[i + 1] - rhs[i]);
                }
                dt * v
            })
            .collect();
        let delta = self.thomas(dt, &residual)?;
        Ok(rhs.iter().zip(&delta).map(|(r, d)| r + d).collect())
    }

    /// Thomas algorithm for `(I - dt·L_local)u = rhs`.
    fn thomas(&self, dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let m = rhs.len();
        let mut c_prime = vec![0.0; m];
        let mut d_prime = vec![0.0; m];
        let b0 = 1.0 - dt * self.diag[0];
        c_prime[0] = -dt * self.upper[0] / b0;
        d_prime[0] = rhs[0] / b0;
        for i in 1..m {
            let a = -dt * self.lower[i];
            let b = 1.0 - dt * self.diag[i];
            let c = -dt * self.upper[i];
            let den = b - a * c_prime[i - 1];
            if den == 0.0 || !den.is_finite() {
                return Err(Error::Solver("singular tridiagonal system".into()));
            }
            c_prime[i] = c / den;
            d_prime[i] = (rhs[i] - a * d_prime[i - 1]) / den;
        }
        let mut u = vec![0.0; m];
        u[m - 1] = d_prime[m - 1];
        for i in (0..m - 1).rev() {
            u[i] = d_prime[i] - c_prime[i] * u[i + 1];
        }
        Ok(u)
    }

    /// One implicit step `(I - dt·𝒜)u_new = u_old`.
    pub fn implicit_step(&self, dt: f64, u_old: &[f64]) -> Result<Vec<f64>> {
        if self.intensity == 0.0 {
            return self.solve_local(dt, u_old);
        }
        let mut u = u_old.to_vec();
        for _ in 0..FIXED_POINT_MAX_ITER {
            let jt = self.jump_term(&u);
            let rhs: Vec<f64> = u_old.iter().zip(&jt).map(|(o, j)| o + dt * j).collect();
            let next = self.solve_local(dt, &rhs)?;
            let change = next
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            u = next;
            if change < FIXED_POINT_TOL {
                return Ok(u);
            }
        }
        Err(Error::Solver(format!(
            "jump fixed point did not converge in {FIXED_POINT_MAX_ITER} iterations"
        )))
    }
}

/// `𝒜u(x)` at a grid node `x`.
pub fn apply_generator(problem: &SdeProblem, model: &LevyModel, grid: &SpatialGrid, u: &[f64], x: f64) -> Result<f64> {
    if u.len() != grid.len() {
        return Err(domain("grid function length does not match the grid"));
    }
    let i = grid.node_index(x)?;
    let op = PideOperator::new(problem, model, grid.clone())?;
    Ok(op.apply_at(u, i))
}

/// Test functions `f` for the Rothe scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Identity,
    Square,
    Constant(f64),
    /// `exp(1 - 1/(1 - r²))` for `r = (x - center)/width`, `|r| < 1`.
    Bump { center: f64, width: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Identity => x,
            TestFunction::Square => x * x,
            TestFunction::Constant(c) => c,
            TestFunction::Bump { center, width } => {
                let r = (x - center) / width;
                if r.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Identity => write!(f, "identity"),
            TestFunction::Square => write!(f, "square"),
            TestFunction::Constant(c) => write!(f, "constant:{c}"),
            TestFunction::Bump { center, width } => write!(f, "bump:{center}:{width}"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    /// `identity`, `square`, `constant:C`, `bump:CENTER:WIDTH`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| domain(format!("bad number '{t}' in test function '{s}'")))
        };
        match parts.as_slice() {
            ["identity"] => Ok(TestFunction::Identity),
            ["square"] => Ok(TestFunction::Square),
            ["constant", c] => Ok(TestFunction::Constant(num(c)?)),
            ["bump", c, w] => {
                let width = num(w)?;
                if !(width > 0.0) {
                    return Err(domain("bump width must be positive"));
                }
                Ok(TestFunction::Bump {
                    center: num(c)?,
                    width,
                })
            }
            _ => Err(domain(format!("unknown test function '{s}'"))),
        }
    }
}

/// `u_i` on the grid after `step` implicit steps of size `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotheState {
    pub step: usize,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl RotheState {
    pub fn initial(grid: &SpatialGrid, f: &TestFunction, dt: f64) -> Self {
        Self {
            step: 0,
            dt,
            values: grid.nodes().into_iter().map(|x| f.eval(x)).collect(),
        }
    }
}

/// One Rothe step.
pub fn rothe_step(state: &RotheState, op: &PideOperator) -> Result<RotheState> {
    let values = op.implicit_step(state.dt, &state.values)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowup { step: state.step + 1 });
    }
    Ok(RotheState {
        step: state.step + 1,
        dt: state.dt,
        values,
    })
}

/// `u_0, …, u_n` with `dt = T/n`.
pub fn rothe_solve(op: &PideOperator, f: &TestFunction, n: usize, horizon: f64) -> Result<Vec<RotheState>> {
    if n == 0 {
        return Err(domain("n must be >= 1"));
    }
    let mut states = Vec::with_capacity(n + 1);
    states.push(RotheState::initial(op.grid(), f, horizon / n as f64));
    for _ in 0..n {
        let next = rothe_step(states.last().expect("nonempty"), op)?;
        states.push(next);
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotheRow {
    pub i: usize,
    pub x0: f64,
    pub u: f64,
    pub mc: Estimate,
    pub z: f64,
}

pub fn rothe_rows_csv(rows: &[RotheRow]) -> Csv {
    let mut csv = Csv::new(&["i", "x0", "u_i", "mc_mean", "mc_se", "z"]);
    for r in rows {
        csv.row(csv_row![r.i, r.x0, r.u, r.mc.mean, r.mc.se, r.z]);
    }
    csv
}

/// Settings shared by the Rothe/Monte Carlo comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PideSetup {
    pub nodes: usize,
    pub paths: usize,
    pub master_seed: u64,
    pub par: Parallelism,
}

fn checked_model(model: &LevyModel) -> Result<()> {
    if !model.capabilities().exact_path_samplable {
        return Err(capability("Monte Carlo side needs an exact path sampler"));
    }
    Ok(())
}

/// Grid with `x0` on a node, spacing from the automatic domain.
fn grid_for(problem: &SdeProblem, model: &LevyModel, nodes: usize) -> Result<SpatialGrid> {
    let auto = SpatialGrid::auto(problem, model, nodes)?;
    let x0 = problem.y0()[0];
    let h = auto.h();
    let left = ((x0 - auto.lo()) / h).round().max(1.0) as usize;
    let lo = x0 - left as f64 * h;
    let g = SpatialGrid::new(lo, lo + (nodes - 1) as f64 * h, nodes)?;
    g.node_index(x0)?;
    Ok(g)
}

/// Compares `u_i(x0)` with `Ê[f(Y_{t_i})]`, where `Y` is the exact (or
/// finely refined) solution at the Poisson arrival times.
pub fn rothe_vs_monte_carlo(
    problem: &SdeProblem,
    model: &LevyModel,
    f: &TestFunction,
    n: usize,
    x0: f64,
    setup: PideSetup,
) -> Result<Vec<RotheRow>> {
    checked_model(model)?;
    let problem = problem.restarted_at(vec![x0]);
    let grid = grid_for(&problem, model, setup.nodes)?;
    let op = PideOperator::new(&problem, model, grid.clone())?;
    let states = rothe_solve(&op, f, n, problem.horizon())?;
    let horizon = problem.horizon();
    let t = tag("rothe", n as u64);
    let per_path = setup
        .par
        .map(setup.paths, |j| -> Result<Vec<f64>> {
            let mut rng = substream(setup.master_seed, t, j as u64);
            let g = RandomGrid::sample_fixed(n, horizon, &mut rng)?;
            let last = g.last();
            let fine: Vec<f64> = if crate::reference::exact_supported(&problem, model) {
                Vec::new()
            } else {
                (1..4096).map(|k| k as f64 * last / 4096.0).collect()
            };
            let path = couple(g.arrivals(), horizon, &fine, model, &mut rng)?;
            let ys = reference_states(&problem, model, &path)?;
            Ok(path
                .grid_indices()
                .into_iter()
                .skip(1)
                .map(|k| f.eval(ys[k]))
                .collect())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let x_idx = grid.node_index(x0)?;
    Ok((1..=n)
        .map(|i| {
            let mc = Estimate::from_iter(per_path.iter().map(|v| v[i - 1]));
            let u = states[i].values[x_idx];
            RotheRow {
                i,
                x0,
                u,
                mc,
                z: z_score(u - mc.mean, mc.se),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceCarlsonCheck {
    pub lhs: f64,
    pub rhs: Estimate,
    pub z: f64,
}

/// `u_1(x0)` from one Rothe step against `Ê[f(Y_{e(n/T)})]`.
pub fn laplace_carlson_check(
    problem: &SdeProblem,
    model: &LevyModel,
    f: &TestFunction,
    n: usize,
    x0: f64,
    setup: PideSetup,
) -> Result<LaplaceCarlsonCheck> {
    checked_model(model)?;
    if n == 0 {
        return Err(domain("n must be >= 1"));
    }
    let problem = problem.restarted_at(vec![x0]);
    let grid = grid_for(&problem, model, setup.nodes)?;
    let op = PideOperator::new(&problem, model, grid.clone())?;
    let dt = problem.horizon() / n as f64;
    let u1 = rothe_step(&RotheState::initial(&grid, f, dt), &op)?;
    let lhs = u1.values[grid.node_index(x0)?];
    let t = tag("laplace_carlson", n as u64);
    let exact = crate::reference::exact_supported(&problem, model);
    let vals = setup
        .par
        .map(setup.paths, |j| -> Result<f64> {
            let mut rng = substream(setup.master_seed, t, j as u64);
            let e: f64 = Exp1.sample(&mut rng);
            let e = e * dt;
            let fine: Vec<f64> = if exact {
                Vec::new()
            } else {
                (1..4096).map(|k| k as f64 * e / 4096.0).collect()
            };
            let path = couple(&[0.0, e], e, &fine, model, &mut rng)?;
            let ys = reference_states(&problem, model, &path)?;
            let k = path.index_of(e).ok_or_else(|| domain("arrival missing from path"))?;
            Ok(f.eval(ys[k]))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let rhs = Estimate::from_samples(&vals);
    Ok(LaplaceCarlsonCheck {
        lhs,
        rhs,
        z: z_score(lhs - rhs.mean, rhs.se),
    })
}
