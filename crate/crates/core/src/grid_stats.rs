//! Statistics of Poisson grids: the largest gap τ, Gamma hitting-time
//! moments, the maximal deviation of arrival times, and the largest
//! uniform spacing λ_m.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{domain, Result};
use crate::output::Csv;
use crate::rng::{substream, tag, Parallelism};
use crate::scheme::RandomGrid;
use crate::stats::{fit_loglog, integrate, neumaier_sum, Estimate, SlopeFit};
use crate::csv_row;

/// `max_m H_m / ln(m+1)`, attained at `m = 1`; bounds
/// `E[τ]·n / (T·ln(n/T + 1))` for every `n`.
pub const KAPPA_0: f64 = std::f64::consts::LOG2_E;

/// Per-grid gap statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GapStatistics {
    pub tau: f64,
    /// `t_n - T` (signed).
    pub overshoot: f64,
    /// `(p, max_i |t_i - iT/n|^p)`.
    pub max_grid_deviation: Vec<(f64, f64)>,
}

pub fn gap_statistics(grid: &RandomGrid, horizon: f64, ps: &[f64]) -> Result<GapStatistics> {
    let tau = largest_gap(grid, horizon)?;
    let n = grid.n().min(grid.steps());
    let a = grid.arrivals();
    let overshoot = a[n] - horizon;
    let max_grid_deviation = ps
        .iter()
        .map(|&p| {
            let m = (1..=n)
                .map(|i| (a[i] - i as f64 * horizon / grid.n() as f64).abs())
                .fold(0.0, f64::max);
            (p, m.powf(p))
        })
        .collect();
    Ok(GapStatistics {
        tau,
        overshoot,
        max_grid_deviation,
    })
}

/// `sup_{s∈[0,T]} (s - ι(s))` for the grid's arrival times.
pub fn largest_gap(grid: &RandomGrid, horizon: f64) -> Result<f64> {
    largest_gap_times(grid.arrivals(), horizon)
}

/// Largest gap for sorted arrival times (a leading 0 is optional).
pub fn largest_gap_times(arrivals: &[f64], horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(domain("T must be positive"));
    }
    let mut prev = 0.0;
    let mut tau: f64 = 0.0;
    for &t in arrivals {
        if t >= horizon {
            return Ok(tau.max(horizon - prev));
        }
        tau = tau.max(t - prev);
        prev = t;
    }
    Ok(tau.max(horizon - prev))
}

/// τ of a fresh rate-`n/T` grid, generated only until it passes `T`.
pub fn sample_tau<R: Rng + ?Sized>(n: usize, horizon: f64, rng: &mut R) -> f64 {
    let rate = n as f64 / horizon;
    let mut prev = 0.0;
    let mut tau: f64 = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        let t = prev + e / rate;
        if t >= horizon {
            return tau.max(horizon - prev);
        }
        tau = tau.max(t - prev);
        prev = t;
    }
}

/// `E[λ_m] = H_m / m`.
pub fn harmonic_gap_mean(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(domain("m must be >= 1"));
    }
    Ok(neumaier_sum((1..=m).map(|j| 1.0 / j as f64)) / m as f64)
}

/// Largest of the `m` spacings cut from `[0,1]` by `m-1` uniforms,
/// sampled as `max E_i / Σ E_i`.
pub fn sample_largest_spacing<R: Rng + ?Sized>(m: usize, rng: &mut R) -> f64 {
    if m <= 1 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for _ in 0..m {
        let e: f64 = Exp1.sample(rng);
        sum += e;
        max = max.max(e);
    }
    max / sum
}

/// Monte Carlo estimate against a closed-form target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub estimate: Estimate,
    pub target: f64,
    pub z: f64,
}

impl MomentCheck {
    fn new(estimate: Estimate, target: f64) -> Self {
        Self {
            estimate,
            target,
            z: estimate.z_against(target),
        }
    }

    pub fn passes(&self, z_max: f64) -> bool {
        self.z.abs() < z_max
    }
}

fn fan_out<F>(samples: usize, seed: u64, label: &str, param: u64, par: Parallelism, f: F) -> Vec<f64>
where
    F: Fn(&mut crate::rng::PathRng) -> f64 + Sync + Send,
{
    // Chunks of draws share a substream; the chunk layout is fixed, so the
    // result does not depend on the worker count.
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let t = tag(label, param);
    par.map(chunks, |c| {
        let mut rng = substream(seed, t, c as u64);
        let len = CHUNK.min(samples - c * CHUNK);
        (0..len).map(|_| f(&mut rng)).collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Mauldon's transform `E[(1 - λ_m s)^{-m}] = Π_{j=2}^m j/(j-s) / (1-s)`.
pub fn mauldon_target(m: usize, s: f64) -> f64 {
    (2..=m).map(|j| j as f64 / (j as f64 - s)).product::<f64>() / (1.0 - s)
}

pub fn mauldon_moment_check(m: usize, s: f64, n_samples: usize, seed: u64, par: Parallelism) -> Result<MomentCheck> {
    if m == 0 {
        return Err(domain("m must be >= 1"));
    }
    if !(s.abs() < 0.5) {
        return Err(domain("|s| must be < 1/2"));
    }
    let mi = m as i32;
    let draws = fan_out(n_samples, seed, "mauldon", m as u64, par, |rng| {
        (1.0 - sample_largest_spacing(m, rng) * s).powi(-mi)
    });
    Ok(MomentCheck::new(Estimate::from_samples(&draws), mauldon_target(m, s)))
}

/// Monte Carlo mean of λ_m against `H_m/m`.
pub fn spacing_mean_check(m: usize, n_samples: usize, seed: u64, par: Parallelism) -> Result<MomentCheck> {
    let target = harmonic_gap_mean(m)?;
    let draws = fan_out(n_samples, seed, "spacing", m as u64, par, |rng| sample_largest_spacing(m, rng));
    Ok(MomentCheck::new(Estimate::from_samples(&draws), target))
}

/// `(E|T - t_n|², E|T - t_n|⁴)` for `t_n ~ Gamma(n, n/T)`.
pub fn gamma_hitting_moments(n: usize, horizon: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(domain("n must be >= 1"));
    }
    let nf = n as f64;
    let t2 = horizon * horizon;
    Ok((t2 / nf, 3.0 * t2 * t2 * (2.0 + nf) / (nf * nf * nf)))
}

/// `E[e^i] = i!·(T/n)^i` for `e ~ Exponential(n/T)`.
pub fn exp_raw_moments(i: u32, n: usize, horizon: f64) -> Result<f64> {
    if i == 0 {
        return Err(domain("order must be >= 1"));
    }
    if n == 0 {
        return Err(domain("n must be >= 1"));
    }
    let scale = horizon / n as f64;
    Ok((1..=i).map(|k| k as f64 * scale).product())
}

fn ln_factorial(k: usize) -> f64 {
    neumaier_sum((2..=k).map(|j| (j as f64).ln()))
}

/// `E|T - t_n|` for `t_n ~ Gamma(n, n/T)`, by quadrature of
/// `2·E[(T - t_n)⁺]`.
pub fn gamma_abs_moment(n: usize, horizon: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("n must be >= 1"));
    }
    if !(horizon > 0.0) {
        return Err(domain("T must be positive"));
    }
    let nf = n as f64;
    let rate = nf / horizon;
    let ln_norm = nf * rate.ln() - ln_factorial(n - 1);
    let density = |x: f64| {
        if x <= 0.0 {
            if n == 1 {
                rate
            } else {
                0.0
            }
        } else {
            (ln_norm + (nf - 1.0) * x.ln() - rate * x).exp()
        }
    };
    let sd = horizon / nf.sqrt();
    let lo = (horizon - 40.0 * sd).max(0.0);
    Ok(2.0 * integrate(|x| (horizon - x) * density(x), lo, horizon, 1e-14 * horizon))
}

/// Monte Carlo of `(t_n - T)²` and `(t_n - T)⁴` against the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingMomentCheck {
    pub n: usize,
    pub horizon: f64,
    pub second: MomentCheck,
    pub fourth: MomentCheck,
}

pub fn hitting_moment_check(n: usize, horizon: f64, grids: usize, seed: u64, par: Parallelism) -> Result<HittingMomentCheck> {
    let (m2, m4) = gamma_hitting_moments(n, horizon)?;
    let rate = n as f64 / horizon;
    let dev = fan_out(grids, seed, "hitting", n as u64, par, |rng| {
        let mut t = 0.0;
        for _ in 0..n {
            let e: f64 = Exp1.sample(rng);
            t += e;
        }
        t / rate - horizon
    });
    Ok(HittingMomentCheck {
        n,
        horizon,
        second: MomentCheck::new(Estimate::from_iter(dev.iter().map(|d| d * d)), m2),
        fourth: MomentCheck::new(Estimate::from_iter(dev.iter().map(|d| d.powi(4))), m4),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauRow {
    pub n: usize,
    pub tau: Estimate,
    /// `Ê[2τ + τ²]`.
    pub moment: Estimate,
    /// `Ê[τ]·n / (T·ln(n/T + 1))`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauScan {
    pub horizon: f64,
    pub rows: Vec<TauRow>,
    pub tau_fit: SlopeFit,
    pub moment_fit: SlopeFit,
}

impl TauScan {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["n", "estimate", "se", "bound", "pass"]);
        for r in &self.rows {
            let bound = KAPPA_0 * self.horizon * (r.n as f64 / self.horizon + 1.0).ln() / r.n as f64;
            csv.row(csv_row![r.n, r.tau.mean, r.tau.se, bound, r.tau.mean <= bound]);
        }
        csv
    }
}

pub fn tau_moment_scan(n_values: &[usize], horizon: f64, grids_per_n: usize, seed: u64, par: Parallelism) -> Result<TauScan> {
    if grids_per_n < 1000 {
        return Err(domain("tau scan needs at least 10^3 grids per n"));
    }
    if n_values.len() < 2 || n_values.contains(&0) {
        return Err(domain("tau scan needs at least two positive n values"));
    }
    if !(horizon > 0.0) {
        return Err(domain("T must be positive"));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let taus = fan_out(grids_per_n, seed, "tau", n as u64, par, |rng| sample_tau(n, horizon, rng));
        let tau = Estimate::from_samples(&taus);
        let moment = Estimate::from_iter(taus.iter().map(|t| 2.0 * t + t * t));
        let ratio = tau.mean * n as f64 / (horizon * (n as f64 / horizon + 1.0).ln());
        rows.push(TauRow { n, tau, moment, ratio });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let fit = |f: &dyn Fn(&TauRow) -> Estimate| {
        let y: Vec<f64> = rows.iter().map(|r| f(r).mean).collect();
        let se: Vec<f64> = rows.iter().map(|r| f(r).se).collect();
        fit_loglog(&x, &y, &se).ok_or_else(|| domain("slope fit failed"))
    };
    let tau_fit = fit(&|r| r.tau)?;
    let moment_fit = fit(&|r| r.moment)?;
    Ok(TauScan {
        horizon,
        rows,
        tau_fit,
        moment_fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationCheck {
    pub n: usize,
    pub p: u32,
    pub lhs: Estimate,
    pub rhs: f64,
    pub pass: bool,
}

impl DeviationCheck {
    pub fn csv(rows: &[DeviationCheck]) -> Csv {
        let mut csv = Csv::new(&["n", "estimate", "se", "bound", "pass"]);
        for r in rows {
            csv.row(csv_row![r.n, r.lhs.mean, r.lhs.se, r.rhs, r.pass]);
        }
        csv
    }
}

/// `Ê[max_i |t_i - iT/n|^p] ≤ 8·E|t_n - T|^p`, failing only when the
/// estimate exceeds the bound by more than 3 standard errors.
pub fn max_grid_deviation_check(
    n: usize,
    horizon: f64,
    p: u32,
    grids: usize,
    seed: u64,
    par: Parallelism,
) -> Result<DeviationCheck> {
    let moment = match p {
        1 => gamma_abs_moment(n, horizon)?,
        2 => gamma_hitting_moments(n, horizon)?.0,
        4 => gamma_hitting_moments(n, horizon)?.1,
        _ => return Err(domain("p must be 1, 2 or 4")),
    };
    let rate = n as f64 / horizon;
    let step = horizon / n as f64;
    let pi = p as i32;
    let draws = fan_out(grids, seed, "deviation", (n as u64) << 3 | u64::from(p), par, |rng| {
        let mut t = 0.0;
        let mut m: f64 = 0.0;
        for i in 1..=n {
            let e: f64 = Exp1.sample(rng);
            t += e / rate;
            m = m.max((t - i as f64 * step).abs());
        }
        m.powi(pi)
    });
    let lhs = Estimate::from_samples(&draws);
    let rhs = 8.0 * moment;
    Ok(DeviationCheck {
        n,
        p,
        lhs,
        rhs,
        pass: lhs.mean - 3.0 * lhs.se <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_gap_examples() {
        assert!((largest_gap_times(&[0.3, 0.9, 1.4], 1.0).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(largest_gap_times(&[1.5, 2.0], 1.0).unwrap(), 1.0);
        assert_eq!(largest_gap_times(&[0.5], 1.0).unwrap(), 0.5);
        assert_eq!(largest_gap_times(&[0.0, 0.5], 1.0).unwrap(), 0.5);
        assert!(largest_gap_times(&[0.5], 0.0).is_err());
    }

    #[test]
    fn harmonic_means() {
        assert_eq!(harmonic_gap_mean(1).unwrap(), 1.0);
        assert_eq!(harmonic_gap_mean(2).unwrap(), 0.75);
        assert!((harmonic_gap_mean(3).unwrap() - 11.0 / 18.0).abs() < 1e-15);
        assert!(harmonic_gap_mean(0).is_err());
    }

    #[test]
    fn closed_forms() {
        assert_eq!(gamma_hitting_moments(1, 1.0).unwrap(), (1.0, 9.0));
        assert_eq!(gamma_hitting_moments(4, 2.0).unwrap().0, 1.0);
        assert_eq!(exp_raw_moments(1, 4, 2.0).unwrap(), 0.5);
        assert_eq!(exp_raw_moments(2, 2, 2.0).unwrap(), 2.0);
        assert_eq!(exp_raw_moments(8, 1, 1.0).unwrap(), 40320.0);
        assert!((mauldon_target(2, 0.25) - 2.0 / (0.75 * 1.75)).abs() < 1e-15);
        // Exp(1): E|1 - E| = 2/e.
        let v = gamma_abs_moment(1, 1.0).unwrap();
        assert!((v - 2.0 / std::f64::consts::E).abs() < 1e-12, "{v}");
    }

    #[test]
    fn mauldon_m1_is_exact() {
        let c = mauldon_moment_check(1, 0.3, 1000, 1, Parallelism::sequential()).unwrap();
        assert_eq!(c.estimate.mean, 1.0 / 0.7);
        assert_eq!(c.z, 0.0);
    }

    #[test]
    fn fan_out_is_worker_independent() {
        let a = spacing_mean_check(5, 10_000, 3, Parallelism::sequential()).unwrap();
        let b = spacing_mean_check(5, 10_000, 3, Parallelism::new(4)).unwrap();
        assert_eq!(a, b);
    }
}
