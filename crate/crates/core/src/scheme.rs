//! Euler-type schemes for `dY = a(Y-) dX`: the Euler-Poisson chain on
//! Poisson arrival times, its variant stopped at the first arrival past the
//! horizon, the fixed-grid Euler-Maruyama baseline and the random
//! interpolation between chain points.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{capability, domain, Error, Result};
use crate::levy::LevyModel;
use crate::output::{Cell, Csv};
use crate::resolvent::ResolventSampler;

type CoefficientFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// SDE coefficient `a: R^{d_Y} → R^{d_Y×d_X}` (row-major).
#[derive(Clone)]
pub enum Coefficient {
    Zero {
        dim_y: usize,
        dim_x: usize,
    },
    Constant {
        matrix: Vec<f64>,
        dim_y: usize,
        dim_x: usize,
    },
    /// `a(y) = scale·diag(y)`, so `d_Y = d_X`.
    Linear { scale: f64, dim: usize },
    /// `a(y) = diag(base + amplitude·sin(y_i))`; bounded and smooth.
    Sine {
        base: f64,
        amplitude: f64,
        dim: usize,
    },
    Custom {
        name: String,
        dim_y: usize,
        dim_x: usize,
        lipschitz: Option<f64>,
        eval: Arc<CoefficientFn>,
    },
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Custom { name, dim_y, dim_x, .. } => f
                .debug_struct("Custom")
                .field("name", name)
                .field("dim_y", dim_y)
                .field("dim_x", dim_x)
                .finish(),
            Coefficient::Zero { dim_y, dim_x } => {
                write!(f, "Zero {{ dim_y: {dim_y}, dim_x: {dim_x} }}")
            }
            Coefficient::Constant { matrix, .. } => write!(f, "Constant({matrix:?})"),
            Coefficient::Linear { scale, dim } => write!(f, "Linear {{ scale: {scale}, dim: {dim} }}"),
            Coefficient::Sine {
                base, amplitude, ..
            } => write!(f, "Sine {{ base: {base}, amplitude: {amplitude} }}"),
        }
    }
}

/// Built-in coefficient names.
pub const COEFFICIENT_NAMES: [&str; 4] = ["zero", "constant", "linear", "sine"];

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient::Zero { dim_y: 1, dim_x: 1 }
    }

    pub fn constant(value: f64) -> Self {
        Coefficient::Constant {
            matrix: vec![value],
            dim_y: 1,
            dim_x: 1,
        }
    }

    pub fn constant_matrix(matrix: Vec<f64>, dim_y: usize, dim_x: usize) -> Result<Self> {
        if matrix.len() != dim_y * dim_x || dim_y == 0 || dim_x == 0 {
            return Err(domain("constant coefficient shape mismatch"));
        }
        Ok(Coefficient::Constant {
            matrix,
            dim_y,
            dim_x,
        })
    }

    pub fn linear(scale: f64) -> Self {
        Coefficient::Linear { scale, dim: 1 }
    }

    pub fn sine(base: f64, amplitude: f64) -> Self {
        Coefficient::Sine {
            base,
            amplitude,
            dim: 1,
        }
    }

    pub fn custom<F>(name: &str, dim_y: usize, dim_x: usize, lipschitz: Option<f64>, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Coefficient::Custom {
            name: name.to_string(),
            dim_y,
            dim_x,
            lipschitz,
            eval: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Coefficient::Zero { .. } => "zero",
            Coefficient::Constant { .. } => "constant",
            Coefficient::Linear { .. } => "linear",
            Coefficient::Sine { .. } => "sine",
            Coefficient::Custom { name, .. } => name,
        }
    }

    pub fn dim_y(&self) -> usize {
        match self {
            Coefficient::Zero { dim_y, .. }
            | Coefficient::Constant { dim_y, .. }
            | Coefficient::Custom { dim_y, .. } => *dim_y,
            Coefficient::Linear { dim, .. } | Coefficient::Sine { dim, .. } => *dim,
        }
    }

    pub fn dim_x(&self) -> usize {
        match self {
            Coefficient::Zero { dim_x, .. }
            | Coefficient::Constant { dim_x, .. }
            | Coefficient::Custom { dim_x, .. } => *dim_x,
            Coefficient::Linear { dim, .. } | Coefficient::Sine { dim, .. } => *dim,
        }
    }

    /// Lipschitz constant in Frobenius norm, when known.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Coefficient::Zero { .. } | Coefficient::Constant { .. } => Some(0.0),
            Coefficient::Linear { scale, .. } => Some(scale.abs()),
            Coefficient::Sine { amplitude, .. } => Some(amplitude.abs()),
            Coefficient::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// Writes `a(y)` (row-major) into `out`.
    pub fn eval(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Coefficient::Zero { .. } => out.fill(0.0),
            Coefficient::Constant { matrix, .. } => out.copy_from_slice(matrix),
            Coefficient::Linear { scale, dim } => {
                out.fill(0.0);
                for i in 0..*dim {
                    out[i * dim + i] = scale * y[i];
                }
            }
            Coefficient::Sine {
                base,
                amplitude,
                dim,
            } => {
                out.fill(0.0);
                for i in 0..*dim {
                    out[i * dim + i] = base + amplitude * y[i].sin();
                }
            }
            Coefficient::Custom { eval, .. } => eval(y, out),
        }
    }

    pub fn matrix(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_y() * self.dim_x()];
        self.eval(y, &mut out);
        out
    }

    /// Scalar value `a(y)` of a one-dimensional coefficient.
    pub fn scalar(&self, y: f64) -> f64 {
        match self {
            Coefficient::Zero { .. } => 0.0,
            Coefficient::Constant { matrix, .. } => matrix[0],
            Coefficient::Linear { scale, .. } => scale * y,
            Coefficient::Sine {
                base, amplitude, ..
            } => base + amplitude * y.sin(),
            Coefficient::Custom { eval, .. } => {
                let mut out = [0.0];
                eval(&[y], &mut out);
                out[0]
            }
        }
    }

    /// `y ← y + a(y)·dx`; `scratch` holds `d_Y·d_X` values.
    pub(crate) fn step(&self, y: &mut [f64], dx: &[f64], scratch: &mut [f64]) {
        match self {
            Coefficient::Zero { .. } => {}
            Coefficient::Linear { scale, .. } => {
                for (yi, di) in y.iter_mut().zip(dx) {
                    *yi += scale * *yi * di;
                }
            }
            Coefficient::Sine {
                base, amplitude, ..
            } => {
                for (yi, di) in y.iter_mut().zip(dx) {
                    *yi += (base + amplitude * yi.sin()) * di;
                }
            }
            _ => {
                self.eval(y, scratch);
                let dx_dim = dx.len();
                for (i, yi) in y.iter_mut().enumerate() {
                    let row = &scratch[i * dx_dim..(i + 1) * dx_dim];
                    *yi += row.iter().zip(dx).map(|(a, d)| a * d).sum::<f64>();
                }
            }
        }
    }
}

fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// An SDE `Y_t = y₀ + ∫₀ᵗ a(Y_{s-}) dX_s` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct SdeProblem {
    coefficient: Coefficient,
    lipschitz_k: f64,
    y0: Vec<f64>,
    horizon: f64,
}

impl SdeProblem {
    /// Checks `|a(y₀)| ≤ k` and, when the coefficient knows its Lipschitz
    /// constant, `Lip(a) ≤ k`.
    pub fn new(coefficient: Coefficient, y0: Vec<f64>, horizon: f64, lipschitz_k: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(domain("horizon must be positive and finite"));
        }
        if y0.len() != coefficient.dim_y() {
            return Err(domain(format!(
                "y0 has dimension {}, coefficient expects {}",
                y0.len(),
                coefficient.dim_y()
            )));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(domain("y0 must be finite"));
        }
        let tol = 1e-12 * lipschitz_k.abs().max(1.0);
        if let Some(l) = coefficient.lipschitz() {
            if l > lipschitz_k + tol {
                return Err(domain(format!(
                    "coefficient Lipschitz constant {l} exceeds declared k = {lipschitz_k}"
                )));
            }
        }
        let a0 = frobenius(&coefficient.matrix(&y0));
        if a0 > lipschitz_k + tol {
            return Err(domain(format!("|a(y0)| = {a0} exceeds declared k = {lipschitz_k}")));
        }
        Ok(Self {
            coefficient,
            lipschitz_k,
            y0,
            horizon,
        })
    }

    /// Declares the smallest admissible `k`. Fails for custom coefficients
    /// without a known Lipschitz constant.
    pub fn with_auto_k(coefficient: Coefficient, y0: Vec<f64>, horizon: f64) -> Result<Self> {
        let lip = coefficient
            .lipschitz()
            .ok_or_else(|| capability("custom coefficient without Lipschitz constant"))?;
        let a0 = if y0.len() == coefficient.dim_y() {
            frobenius(&coefficient.matrix(&y0))
        } else {
            0.0
        };
        Self::new(coefficient, y0, horizon, lip.max(a0))
    }

    pub fn coefficient(&self) -> &Coefficient {
        &self.coefficient
    }

    pub fn lipschitz_k(&self) -> f64 {
        self.lipschitz_k
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim_y(&self) -> usize {
        self.coefficient.dim_y()
    }

    pub fn dim_x(&self) -> usize {
        self.coefficient.dim_x()
    }

    pub fn coefficient_matrix(&self, y: &[f64]) -> Vec<f64> {
        self.coefficient.matrix(y)
    }

    /// Same problem started from `y0`.
    pub fn restarted_at(&self, y0: Vec<f64>) -> Self {
        Self { y0, ..self.clone() }
    }

    /// Spot-checks `|a(x) - a(x')| ≤ k|x - x'|` on random pairs drawn from
    /// a box of half-width `radius` around `y₀`.
    pub fn check_lipschitz<R: Rng + ?Sized>(&self, pairs: usize, radius: f64, rng: &mut R) -> Result<()> {
        let d = self.dim_y();
        for _ in 0..pairs {
            let x: Vec<f64> = self
                .y0
                .iter()
                .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let xp: Vec<f64> = self
                .y0
                .iter()
                .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let da: Vec<f64> = self
                .coefficient
                .matrix(&x)
                .iter()
                .zip(self.coefficient.matrix(&xp))
                .map(|(a, b)| a - b)
                .collect();
            let dx: Vec<f64> = (0..d).map(|i| x[i] - xp[i]).collect();
            let lhs = frobenius(&da);
            let rhs = self.lipschitz_k * frobenius(&dx);
            if lhs > rhs * (1.0 + 1e-12) + 1e-15 {
                return Err(domain(format!(
                    "Lipschitz bound violated: {lhs} > {rhs} at {x:?}, {xp:?}"
                )));
            }
        }
        Ok(())
    }

    fn check_model(&self, model: &LevyModel) -> Result<()> {
        if model.dim() != self.dim_x() {
            return Err(domain(format!(
                "model dimension {} does not match coefficient d_X = {}",
                model.dim(),
                self.dim_x()
            )));
        }
        Ok(())
    }
}

/// Stopping rule of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Exactly `n` steps.
    FixedN,
    /// Until the first arrival strictly past the horizon.
    Enhanced,
    /// Deterministic grid `iT/n`.
    Deterministic,
}

/// Arrival times `0 = t₀ < t₁ < …` of a rate-`n/T` Poisson process.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomGrid {
    arrivals: Vec<f64>,
    rate: f64,
    n: usize,
}

impl RandomGrid {
    /// Wraps given arrival times (must start at 0 and increase strictly).
    pub fn from_arrivals(arrivals: Vec<f64>, rate: f64, n: usize) -> Result<Self> {
        if arrivals.first() != Some(&0.0) {
            return Err(domain("grid must start at t0 = 0"));
        }
        if arrivals.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("grid arrivals must increase strictly"));
        }
        Ok(Self { arrivals, rate, n })
    }

    /// `n` arrivals of a rate-`n/T` Poisson process.
    pub fn sample_fixed<R: Rng + ?Sized>(n: usize, horizon: f64, rng: &mut R) -> Result<Self> {
        check_grid_args(n, horizon)?;
        let rate = n as f64 / horizon;
        let mut arrivals = Vec::with_capacity(n + 1);
        let mut t = 0.0;
        arrivals.push(t);
        for _ in 0..n {
            t += next_gap(rate, rng);
            arrivals.push(t);
        }
        Ok(Self { arrivals, rate, n })
    }

    /// Arrivals up to and including the first one strictly past `horizon`.
    pub fn sample_past_horizon<R: Rng + ?Sized>(n: usize, horizon: f64, rng: &mut R) -> Result<Self> {
        check_grid_args(n, horizon)?;
        let rate = n as f64 / horizon;
        let mut arrivals = Vec::with_capacity(n + n / 4 + 8);
        let mut t = 0.0;
        arrivals.push(t);
        while t <= horizon {
            t += next_gap(rate, rng);
            arrivals.push(t);
        }
        Ok(Self { arrivals, rate, n })
    }

    /// Includes `t₀ = 0`.
    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Nominal step count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of steps (arrivals after `t₀`).
    pub fn steps(&self) -> usize {
        self.arrivals.len() - 1
    }

    pub fn last(&self) -> f64 {
        *self.arrivals.last().unwrap_or(&0.0)
    }

    /// Index of the last arrival `≤ t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.arrivals.partition_point(|&a| a <= t).saturating_sub(1)
    }
}

fn check_grid_args(n: usize, horizon: f64) -> Result<()> {
    if n == 0 {
        return Err(domain("n must be >= 1"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(domain("horizon must be positive and finite"));
    }
    Ok(())
}

fn next_gap<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    // Exp1 never returns 0 for practical purposes, but keep the grid strict.
    loop {
        let e: f64 = Exp1.sample(rng);
        if e > 0.0 {
            return e / rate;
        }
    }
}

/// Samples a fixed-`n` grid on `[0, T]` (rate `n/T`).
pub fn build_grid<R: Rng + ?Sized>(n: usize, horizon: f64, rng: &mut R) -> Result<RandomGrid> {
    RandomGrid::sample_fixed(n, horizon, rng)
}

/// The chain `{Ỹ_{t_i}}` with its grid and consumed increments. States and
/// increments are stored flat (`d_Y` resp. `d_X` values per entry).
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeTrajectory {
    grid: Option<RandomGrid>,
    dim_y: usize,
    dim_x: usize,
    states: Vec<f64>,
    increments: Vec<f64>,
    stop_rule: StopRule,
}

impl SchemeTrajectory {
    /// Grid times; absent when increments came from the Wiener-Hopf route,
    /// which does not reveal the exponential times.
    pub fn grid(&self) -> Option<&RandomGrid> {
        self.grid.as_ref()
    }

    pub fn stop_rule(&self) -> StopRule {
        self.stop_rule
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.dim_x.max(1)
    }

    /// `Ỹ_{t_i}` for `i = 0..=steps`.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim_y..(i + 1) * self.dim_y]
    }

    /// Increment consumed by step `i` (`1 ≤ i ≤ steps`).
    pub fn increment(&self, i: usize) -> &[f64] {
        &self.increments[(i - 1) * self.dim_x..i * self.dim_x]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.steps())
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    /// Sum of consumed increments.
    pub fn increment_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim_x];
        for i in 1..=self.steps() {
            for (a, b) in s.iter_mut().zip(self.increment(i)) {
                *a += b;
            }
        }
        s
    }
}

/// Runs the Euler recursion `Ỹ_i = Ỹ_{i-1} + a(Ỹ_{i-1})·ΔX_i` over the
/// given flat increments.
pub fn run_chain(
    problem: &SdeProblem,
    increments: Vec<f64>,
    grid: Option<RandomGrid>,
    stop_rule: StopRule,
) -> Result<SchemeTrajectory> {
    let dy = problem.dim_y();
    let dx = problem.dim_x();
    if !increments.len().is_multiple_of(dx) {
        return Err(domain("increment buffer is not a multiple of d_X"));
    }
    let steps = increments.len() / dx;
    if let Some(g) = &grid {
        if g.steps() != steps {
            return Err(domain("grid and increments disagree on the step count"));
        }
    }
    let mut states = Vec::with_capacity((steps + 1) * dy);
    states.extend_from_slice(problem.y0());
    let mut y = problem.y0().to_vec();
    let mut scratch = vec![0.0; dy * dx];
    for i in 0..steps {
        problem
            .coefficient()
            .step(&mut y, &increments[i * dx..(i + 1) * dx], &mut scratch);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { step: i + 1 });
        }
        states.extend_from_slice(&y);
    }
    Ok(SchemeTrajectory {
        grid,
        dim_y: dy,
        dim_x: dx,
        states,
        increments,
        stop_rule,
    })
}

/// Terminal value of the Euler recursion without storing the chain.
pub fn chain_terminal(problem: &SdeProblem, increments: &[f64]) -> Result<Vec<f64>> {
    let dx = problem.dim_x();
    let mut y = problem.y0().to_vec();
    let mut scratch = vec![0.0; problem.dim_y() * dx];
    for (i, dxi) in increments.chunks_exact(dx).enumerate() {
        problem.coefficient().step(&mut y, dxi, &mut scratch);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { step: i + 1 });
        }
    }
    Ok(y)
}

/// Euler-Poisson scheme with `n` steps, increments drawn from the
/// resolvent at rate `n/T`.
pub fn run_euler_poisson<R: Rng + ?Sized>(
    problem: &SdeProblem,
    model: &LevyModel,
    n: usize,
    rng: &mut R,
) -> Result<SchemeTrajectory> {
    check_grid_args(n, problem.horizon())?;
    problem.check_model(model)?;
    let sampler = ResolventSampler::new(model, n as f64 / problem.horizon())?;
    run_euler_poisson_steps(problem, &sampler, n, rng)
}

/// Euler-Poisson chain of `steps` steps using a prepared sampler.
pub fn run_euler_poisson_steps<R: Rng + ?Sized>(
    problem: &SdeProblem,
    sampler: &ResolventSampler,
    steps: usize,
    rng: &mut R,
) -> Result<SchemeTrajectory> {
    let dx = problem.dim_x();
    if sampler.dim() != dx {
        return Err(domain("sampler dimension does not match the problem"));
    }
    let mut increments = Vec::with_capacity(steps * dx);
    let mut times = Vec::with_capacity(steps + 1);
    times.push(0.0);
    let mut t = 0.0;
    let mut joint = true;
    let mut buf = vec![0.0; dx];
    for _ in 0..steps {
        let elapsed = sampler.sample_into(rng, &mut buf);
        increments.extend_from_slice(&buf);
        match elapsed {
            Some(e) if joint => {
                t += e;
                times.push(t);
            }
            _ => joint = false,
        }
    }
    let n = (sampler.rate() * problem.horizon()).round() as usize;
    let grid = if joint {
        Some(RandomGrid {
            arrivals: times,
            rate: sampler.rate(),
            n,
        })
    } else {
        None
    };
    run_chain(problem, increments, grid, StopRule::FixedN)
}

/// Euler-Poisson chain stopped at the first arrival past `T`; needs the
/// pair (increment, exponential time), obtained here by exact path
/// sampling.
pub fn run_enhanced<R: Rng + ?Sized>(
    problem: &SdeProblem,
    model: &LevyModel,
    n: usize,
    rng: &mut R,
) -> Result<SchemeTrajectory> {
    problem.check_model(model)?;
    if !model.capabilities().exact_path_samplable {
        return Err(capability(
            "the stopped scheme needs joint (increment, time) samples; model has no exact path sampler",
        ));
    }
    let grid = RandomGrid::sample_past_horizon(n, problem.horizon(), rng)?;
    let dx = problem.dim_x();
    let mut increments = vec![0.0; grid.steps() * dx];
    for (i, w) in grid.arrivals().windows(2).enumerate() {
        model.sample_increment(w[1] - w[0], rng, &mut increments[i * dx..(i + 1) * dx])?;
    }
    run_chain(problem, increments, Some(grid), StopRule::Enhanced)
}

/// Classical Euler-Maruyama on the grid `iT/n`; returns `Ŷ_T`. Increments
/// are drawn exactly unless supplied (flat, `n·d_X` values).
pub fn run_euler_maruyama<R: Rng + ?Sized>(
    problem: &SdeProblem,
    model: &LevyModel,
    n: usize,
    rng: &mut R,
    increments: Option<&[f64]>,
) -> Result<Vec<f64>> {
    check_grid_args(n, problem.horizon())?;
    problem.check_model(model)?;
    let dx = problem.dim_x();
    match increments {
        Some(inc) => {
            if inc.len() != n * dx {
                return Err(domain("supplied increments must hold n·d_X values"));
            }
            chain_terminal(problem, inc)
        }
        None => {
            if !model.capabilities().exact_path_samplable {
                return Err(capability(
                    "Euler-Maruyama needs fixed-time increments; model has no exact path sampler",
                ));
            }
            let dt = problem.horizon() / n as f64;
            let mut inc = vec![0.0; n * dx];
            for chunk in inc.chunks_exact_mut(dx) {
                model.sample_increment(dt, rng, chunk)?;
            }
            chain_terminal(problem, &inc)
        }
    }
}

/// Random interpolation `Ŷ_t = Ŷ_{ι(t)} + a(Ŷ_{ι(t)})(X_t - X_{ι(t)})` at
/// sorted query times, with `X_t - X_{ι(t)}` drawn from the Brownian bridge
/// pinned to the consumed increment. Supports one-dimensional models
/// without jumps.
pub fn interpolate_hat<R: Rng + ?Sized>(
    trajectory: &SchemeTrajectory,
    model: &LevyModel,
    rng: &mut R,
    query_times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let grid = trajectory
        .grid()
        .ok_or_else(|| capability("trajectory has no grid times (Wiener-Hopf route)"))?;
    let triplet = model
        .as_scalar()
        .filter(|c| c.jumps.intensity() == 0.0)
        .ok_or_else(|| capability("bridge interpolation needs a one-dimensional model without jumps"))?;
    if trajectory.dim_x() != 1 {
        return Err(capability("bridge interpolation needs d_X = 1"));
    }
    if query_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(domain("query times must be sorted"));
    }
    let last = grid.last();
    if let Some(bad) = query_times.iter().find(|t| !(**t >= 0.0 && **t <= last)) {
        return Err(domain(format!("query time {bad} outside [0, {last}]")));
    }
    // Problem coefficient is not stored in the trajectory; recover a(Ŷ_{ι})
    // from the recorded step: Ỹ_{i+1} - Ỹ_i = a(Ỹ_i)·ΔX_{i+1}.
    let sigma = triplet.sigma;
    let arrivals = grid.arrivals();
    let dy = trajectory.dim_y();
    let mut out = Vec::with_capacity(query_times.len());
    // Running bridge position within the current interval.
    let mut cur_interval = usize::MAX;
    let mut cur_time = 0.0;
    let mut cur_value = 0.0;
    for &t in query_times {
        let i = grid.index_at(t);
        let base = trajectory.state(i).to_vec();
        if t == arrivals[i] || i == grid.steps() {
            out.push(base);
            continue;
        }
        let (t0, t1) = (arrivals[i], arrivals[i + 1]);
        let delta = trajectory.increment(i + 1)[0];
        if cur_interval != i {
            cur_interval = i;
            cur_time = t0;
            cur_value = 0.0;
        }
        // Bridge from (cur_time, cur_value) to (t1, delta).
        let span = t1 - cur_time;
        let frac = (t - cur_time) / span;
        let mean = cur_value + (delta - cur_value) * frac;
        let var = sigma * sigma * (t - cur_time) * (t1 - t) / span;
        let z: f64 = StandardNormal.sample(rng);
        let x_part = mean + var.max(0.0).sqrt() * z;
        cur_time = t;
        cur_value = x_part;
        let next = trajectory.state(i + 1);
        let state: Vec<f64> = (0..dy)
            .map(|k| {
                if delta == 0.0 {
                    base[k]
                } else {
                    let a_i = (next[k] - base[k]) / delta;
                    base[k] + a_i * x_part
                }
            })
            .collect();
        out.push(state);
    }
    Ok(out)
}

/// Trajectory dump: `path_id, step, t_i, y_1.., dx_1..`. The increment
/// columns of step 0 are empty; `t_i` is `nan` without grid times.
pub fn trajectories_csv(paths: &[SchemeTrajectory]) -> Csv {
    let dy = paths.first().map_or(1, |p| p.dim_y());
    let dx = paths.first().map_or(1, |p| p.dim_x());
    let mut header = vec!["path_id".to_string(), "step".to_string(), "t_i".to_string()];
    header.extend((1..=dy).map(|k| format!("y_{k}")));
    header.extend((1..=dx).map(|k| format!("dx_{k}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    for (id, p) in paths.iter().enumerate() {
        for i in 0..=p.steps() {
            let t = p.grid().map_or(f64::NAN, |g| g.arrivals()[i]);
            let mut row: Vec<Cell> = vec![id.into(), i.into(), t.into()];
            row.extend(p.state(i).iter().map(|v| Cell::Num(*v)));
            if i == 0 {
                row.extend((0..p.dim_x()).map(|_| Cell::Text(String::new())));
            } else {
                row.extend(p.increment(i).iter().map(|v| Cell::Num(*v)));
            }
            csv.row(row);
        }
    }
    csv
}
