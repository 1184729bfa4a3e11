//! Path-coupled exact solutions. A [`CoupledPath`] simulates the driving
//! process on the union of the scheme grid, the horizon, any extra times
//! and all jump times; the scheme then consumes the grid-interval sums of
//! that same path.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{capability, domain, Result};
use crate::levy::{JumpMeasure, LevyModel};
use crate::scheme::{Coefficient, RandomGrid, SdeProblem};

/// A jump of component `component` of `Z` at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub component: usize,
    pub size: f64,
}

/// One exact realisation of `X` on a refined partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    increments: Vec<f64>,
    on_grid: Vec<bool>,
    horizon_index: usize,
    jumps: Vec<Jump>,
}

fn merge_times(grid: &[f64], horizon: f64, extra: &[f64], jumps: &[Jump]) -> (Vec<f64>, Vec<bool>) {
    let mut tagged: Vec<(f64, bool)> = Vec::with_capacity(grid.len() + extra.len() + jumps.len() + 2);
    tagged.push((0.0, true));
    tagged.extend(grid.iter().filter(|t| **t > 0.0).map(|t| (*t, true)));
    tagged.push((horizon, false));
    tagged.extend(extra.iter().filter(|t| **t > 0.0).map(|t| (*t, false)));
    tagged.extend(jumps.iter().map(|j| (j.time, false)));
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut times: Vec<f64> = Vec::with_capacity(tagged.len());
    let mut marks: Vec<bool> = Vec::with_capacity(tagged.len());
    for (t, g) in tagged {
        if times.last() == Some(&t) {
            let last = marks.len() - 1;
            marks[last] |= g;
        } else {
            times.push(t);
            marks.push(g);
        }
    }
    (times, marks)
}

/// Simulates `X` exactly on `grid ∪ {T} ∪ extra ∪ jump times`, covering
/// `[0, max(grid, T, extra)]`. `grid` must start at 0 and increase.
pub fn couple<R: Rng + ?Sized>(
    grid: &[f64],
    horizon: f64,
    extra: &[f64],
    model: &LevyModel,
    rng: &mut R,
) -> Result<CoupledPath> {
    if !model.capabilities().exact_path_samplable {
        return Err(capability("coupling needs an exact path sampler"));
    }
    if !(horizon > 0.0) {
        return Err(domain("horizon must be positive"));
    }
    if grid.first() != Some(&0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("grid must start at 0 and increase strictly"));
    }
    let t_max = grid
        .iter()
        .chain(extra)
        .fold(horizon, |m, t| m.max(*t));
    let mut jumps = Vec::new();
    for (j, c) in model.components().iter().enumerate() {
        jumps.extend(c.sample_jumps(t_max, rng).into_iter().map(|(time, size)| Jump {
            time,
            component: j,
            size,
        }));
    }
    jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
    let (times, on_grid) = merge_times(grid, horizon, extra, &jumps);
    let comps = model.components();
    let dz = comps.len();
    let dx = model.dim();
    let steps = times.len() - 1;
    let mut increments = vec![0.0; steps * dx];
    let mut values = vec![0.0; (steps + 1) * dx];
    let mut z = vec![0.0; dz];
    let mut jump_ptr = 0;
    for k in 0..steps {
        let dt = times[k + 1] - times[k];
        for (j, c) in comps.iter().enumerate() {
            let mut v = c.compensated_drift() * dt;
            if c.sigma > 0.0 {
                let n: f64 = StandardNormal.sample(rng);
                v += c.sigma * dt.sqrt() * n;
            }
            z[j] = v;
        }
        while jump_ptr < jumps.len() && jumps[jump_ptr].time <= times[k + 1] {
            let jp = jumps[jump_ptr];
            z[jp.component] += jp.size;
            jump_ptr += 1;
        }
        let out = &mut increments[k * dx..(k + 1) * dx];
        model.mix_into(&z, out);
        for i in 0..dx {
            values[(k + 1) * dx + i] = values[k * dx + i] + increments[k * dx + i];
        }
    }
    let horizon_index = times
        .iter()
        .position(|t| *t == horizon)
        .unwrap_or(steps);
    Ok(CoupledPath {
        dim: dx,
        times,
        values,
        increments,
        on_grid,
        horizon_index,
        jumps,
    })
}

/// Coupling for Brownian motion with drift.
pub fn couple_brownian<R: Rng + ?Sized>(
    grid: &RandomGrid,
    horizon: f64,
    model: &LevyModel,
    rng: &mut R,
) -> Result<CoupledPath> {
    if model.components().iter().any(|c| c.jumps.intensity() > 0.0) {
        return Err(capability("couple_brownian needs a model without jumps"));
    }
    couple(grid.arrivals(), horizon, &[], model, rng)
}

/// Coupling for compound Poisson processes with drift.
pub fn couple_compound_poisson<R: Rng + ?Sized>(
    grid: &RandomGrid,
    horizon: f64,
    model: &LevyModel,
    rng: &mut R,
) -> Result<CoupledPath> {
    if model.components().iter().any(|c| c.sigma > 0.0) {
        return Err(capability("couple_compound_poisson needs a model without diffusion"));
    }
    couple(grid.arrivals(), horizon, &[], model, rng)
}

impl CoupledPath {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Refined partition, starting at 0.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Whether each refined time is a scheme grid point.
    pub fn marks(&self) -> &[bool] {
        &self.on_grid
    }

    /// Increment over `(times[k-1], times[k]]`, `k ≥ 1`.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[(k - 1) * self.dim..k * self.dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `X` at `times[k]`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn horizon_index(&self) -> usize {
        self.horizon_index
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Refined indices of the grid points.
    pub fn grid_indices(&self) -> Vec<usize> {
        (0..self.times.len()).filter(|k| self.on_grid[*k]).collect()
    }

    /// Refined index of time `t`, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|s| *s < t);
        (k < self.times.len() && self.times[k] == t).then_some(k)
    }

    /// Increments between consecutive grid points (flat), summed in time
    /// order; these are what the scheme consumes.
    pub fn grid_increments(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::new();
        let mut acc = vec![0.0; d];
        for k in 1..self.times.len() {
            for (a, v) in acc.iter_mut().zip(self.increment(k)) {
                *a += v;
            }
            if self.on_grid[k] {
                out.extend_from_slice(&acc);
                acc.iter_mut().for_each(|a| *a = 0.0);
            }
        }
        out
    }
}

/// Whether [`exact_states`] has a closed form for the pair.
pub fn exact_supported(problem: &SdeProblem, model: &LevyModel) -> bool {
    match problem.coefficient() {
        Coefficient::Zero { .. } | Coefficient::Constant { .. } => true,
        Coefficient::Linear { dim, .. } => {
            model.components().len() == *dim
                && model.dim() == *dim
                && (0..*dim).all(|i| (0..*dim).all(|j| model.mixing_entry(i, j) == if i == j { 1.0 } else { 0.0 }))
                && model.capabilities().exact_path_samplable
        }
        _ => false,
    }
}

/// Exact solution `Y` at every refined time of the path (flat, `d_Y` per
/// time).
///
/// * `a ≡ A`: `Y_t = y₀ + A·X_t`.
/// * `a(y) = c·diag(y)` with independent coordinates: each coordinate is
///   `y₀·exp(c·X^c_t - c²σ²t/2)·Π_{s≤t}(1 + c·ΔX_s)`, `X^c` being the
///   continuous part.
pub fn exact_states(problem: &SdeProblem, model: &LevyModel, path: &CoupledPath) -> Result<Vec<f64>> {
    if !exact_supported(problem, model) {
        return Err(capability(format!(
            "no closed-form solution for coefficient '{}' with this model",
            problem.coefficient().name()
        )));
    }
    if path.dim() != problem.dim_x() {
        return Err(domain("path dimension does not match the problem"));
    }
    let dy = problem.dim_y();
    let y0 = problem.y0();
    let m = path.times().len();
    let mut out = Vec::with_capacity(m * dy);
    match problem.coefficient() {
        Coefficient::Linear { scale, .. } => {
            let c = *scale;
            let comps = model.components();
            let mut jump_sum = vec![0.0; dy];
            let mut prod = vec![1.0; dy];
            let mut jp = 0;
            let jumps = path.jumps();
            for k in 0..m {
                let t = path.times()[k];
                while jp < jumps.len() && jumps[jp].time <= t {
                    let j = jumps[jp];
                    jump_sum[j.component] += j.size;
                    prod[j.component] *= 1.0 + c * j.size;
                    jp += 1;
                }
                let x = path.value(k);
                for i in 0..dy {
                    let s2 = comps[i].sigma * comps[i].sigma;
                    let cont = x[i] - jump_sum[i];
                    out.push(y0[i] * (c * cont - 0.5 * c * c * s2 * t).exp() * prod[i]);
                }
            }
        }
        coef => {
            let a = coef.matrix(y0);
            let dx = problem.dim_x();
            for k in 0..m {
                let x = path.value(k);
                for i in 0..dy {
                    let ax: f64 = a[i * dx..(i + 1) * dx].iter().zip(x).map(|(a, b)| a * b).sum();
                    out.push(y0[i] + ax);
                }
            }
        }
    }
    Ok(out)
}

/// Exact `Y` at refined index `k`.
pub fn exact_at(problem: &SdeProblem, model: &LevyModel, path: &CoupledPath, k: usize) -> Result<Vec<f64>> {
    let dy = problem.dim_y();
    let all = exact_states(problem, model, path)?;
    all.get(k * dy..(k + 1) * dy)
        .map(<[f64]>::to_vec)
        .ok_or_else(|| domain("refined index out of range"))
}

/// Exact `Y_T`.
pub fn exact_terminal(problem: &SdeProblem, model: &LevyModel, path: &CoupledPath) -> Result<Vec<f64>> {
    exact_at(problem, model, path, path.horizon_index())
}

/// Euler recursion on the refined partition, used as a fine reference
/// where no closed form exists (flat, one state per refined time).
pub fn euler_states(problem: &SdeProblem, path: &CoupledPath) -> Result<Vec<f64>> {
    let dy = problem.dim_y();
    let dx = problem.dim_x();
    let m = path.times().len();
    let mut out = Vec::with_capacity(m * dy);
    out.extend_from_slice(problem.y0());
    let mut y = problem.y0().to_vec();
    let mut scratch = vec![0.0; dy * dx];
    for k in 1..m {
        problem
            .coefficient()
            .step(&mut y, &path.increments()[(k - 1) * dx..k * dx], &mut scratch);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(crate::error::Error::NumericalBlowup { step: k });
        }
        out.extend_from_slice(&y);
    }
    Ok(out)
}

/// Exact states where available, otherwise the refined Euler chain.
pub fn reference_states(problem: &SdeProblem, model: &LevyModel, path: &CoupledPath) -> Result<Vec<f64>> {
    if exact_supported(problem, model) {
        exact_states(problem, model, path)
    } else {
        euler_states(problem, path)
    }
}

/// Whether every component is Brownian motion with drift.
pub fn is_continuous(model: &LevyModel) -> bool {
    model
        .components()
        .iter()
        .all(|c| matches!(c.jumps, JumpMeasure::None) || c.jumps.intensity() == 0.0)
}
