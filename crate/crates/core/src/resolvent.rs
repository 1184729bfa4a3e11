//! Exact sampling of `X_{e(q)}`, the driving process at an independent
//! Exponential(q) time.
//!
//! For rational one-dimensional exponents the sample is the sum of the
//! supremum and the infimum at `e(q)`, which are independent and whose laws
//! are finite exponential mixtures (possibly with an atom at zero). Their
//! rates are the real roots of `ψ(ζ) = q`, `ψ` being the Laplace exponent.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{capability, domain, Error, Result};
use crate::levy::{ExpPhase, LevyModel, LevyTriplet};
use crate::output::Csv;
use crate::stats::{z_score, Estimate};

/// Law of a nonnegative variable: an atom at zero plus exponential phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpMixtureLaw {
    pub phases: Vec<ExpPhase>,
    pub atom: f64,
}

impl ExpMixtureLaw {
    pub fn total_mass(&self) -> f64 {
        self.atom + self.phases.iter().map(|p| p.weight).sum::<f64>()
    }

    /// `E[exp(iθV)]`.
    pub fn cf(&self, theta: f64) -> Complex64 {
        let mut acc = Complex64::new(self.atom, 0.0);
        for p in &self.phases {
            acc += p.weight * p.rate / Complex64::new(p.rate, -theta);
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        self.phases.iter().map(|p| p.weight / p.rate).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = self.atom;
        if u < acc {
            return 0.0;
        }
        let last = self.phases.len().saturating_sub(1);
        for (k, p) in self.phases.iter().enumerate() {
            acc += p.weight;
            if u < acc || k == last {
                let e: f64 = Exp1.sample(rng);
                return e / p.rate;
            }
        }
        0.0
    }

    pub fn rates(&self) -> Vec<f64> {
        self.phases.iter().map(|p| p.rate).collect()
    }
}

/// Wiener-Hopf factors at rate `q`: the law of `sup_{s≤e(q)} X_s` and of
/// `-inf_{s≤e(q)} X_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerHopfFactors {
    pub q: f64,
    pub sup: ExpMixtureLaw,
    /// Law of the negated infimum.
    pub inf: ExpMixtureLaw,
}

impl WienerHopfFactors {
    pub fn sup_cf(&self, theta: f64) -> Complex64 {
        self.sup.cf(theta)
    }

    /// `E[exp(iθ·inf)]`.
    pub fn inf_cf(&self, theta: f64) -> Complex64 {
        self.inf.cf(-theta)
    }

    pub fn product_cf(&self, theta: f64) -> Complex64 {
        self.sup_cf(theta) * self.inf_cf(theta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.sup.sample(rng);
        let i = self.inf.sample(rng);
        s - i
    }
}

const ROOT_RTOL: f64 = 1e-13;
const MASS_TOL: f64 = 1e-9;

/// Distinct sorted pole locations with merged weights.
fn merged_rates(phases: &[ExpPhase]) -> Vec<f64> {
    let mut r: Vec<f64> = phases.iter().filter(|p| p.weight > 0.0).map(|p| p.rate).collect();
    r.sort_by(|a, b| a.total_cmp(b));
    r.dedup();
    r
}

/// Root of `g` on `(lo, hi)` where `g(lo+) < 0 < g(hi-)`.
fn bisect<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v.is_nan() {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= ROOT_RTOL * hi.abs().max(lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Positive roots of `g(ζ) = ψ(sζ) - q` for `s = ±1`, with `poles` the
/// positive pole locations of `ζ ↦ ψ(sζ)`. `unbounded_root` tells whether a
/// root lies beyond the last pole.
fn side_roots<F: Fn(f64) -> f64>(g: F, poles: &[f64], unbounded_root: bool) -> Result<Vec<f64>> {
    let mut roots = Vec::with_capacity(poles.len() + 1);
    let mut left = 0.0;
    for &p in poles {
        roots.push(bisect(&g, left, p));
        left = p;
    }
    if unbounded_root {
        let mut hi = if left > 0.0 { 2.0 * left } else { 1.0 };
        let mut tries = 0;
        while !(g(hi) > 0.0) {
            hi *= 2.0;
            tries += 1;
            if tries > 2000 || !hi.is_finite() {
                return Err(Error::Factorization(
                    "no sign change beyond the last pole".into(),
                ));
            }
        }
        roots.push(bisect(&g, left, hi));
    }
    // Roots must interlace the poles strictly.
    for (k, r) in roots.iter().enumerate() {
        let lower = if k == 0 { 0.0 } else { poles[k - 1] };
        let ok = *r > lower && poles.get(k).is_none_or(|p| r < p) && r.is_finite();
        if !ok {
            return Err(Error::Factorization(format!(
                "root {r} does not interlace poles {poles:?}"
            )));
        }
    }
    Ok(roots)
}

/// Partial-fraction weights of `Π β_j/(β_j - ζ) · Π (η_k - ζ)/η_k`.
fn mixture_from_roots(roots: &[f64], poles: &[f64], side: &str) -> Result<ExpMixtureLaw> {
    let mut phases = Vec::with_capacity(roots.len());
    for (j, &bj) in roots.iter().enumerate() {
        let mut w = 1.0;
        for (i, &bi) in roots.iter().enumerate() {
            if i != j {
                w *= bi / (bi - bj);
            }
        }
        for &eta in poles {
            w *= (eta - bj) / eta;
        }
        phases.push(ExpPhase::new(w, bj));
    }
    let atom = if roots.len() == poles.len() {
        roots.iter().product::<f64>() / poles.iter().product::<f64>()
    } else {
        0.0
    };
    let mut law = ExpMixtureLaw { phases, atom };
    let mass = law.total_mass();
    let bad_weight = law
        .phases
        .iter()
        .any(|p| !(p.weight > 0.0 && p.weight <= 1.0 + MASS_TOL));
    if bad_weight || !(law.atom >= 0.0 && law.atom <= 1.0 + MASS_TOL) || (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::Factorization(format!(
            "{side} mixture invalid: weights {:?}, atom {}, mass {mass}",
            law.phases.iter().map(|p| p.weight).collect::<Vec<_>>(),
            law.atom
        )));
    }
    for p in &mut law.phases {
        p.weight /= mass;
    }
    law.atom /= mass;
    Ok(law)
}

/// Wiener-Hopf factors of a rational one-dimensional model at rate `q`.
pub fn wh_factorize(model: &LevyModel, q: f64) -> Result<WienerHopfFactors> {
    let triplet = model
        .as_scalar()
        .ok_or_else(|| capability("Wiener-Hopf factorisation needs a one-dimensional model"))?;
    wh_factorize_triplet(triplet, q)
}

pub fn wh_factorize_triplet(triplet: &LevyTriplet, q: f64) -> Result<WienerHopfFactors> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(domain("q must be positive and finite"));
    }
    if !triplet.is_rational() {
        return Err(capability("characteristic exponent is not rational"));
    }
    let lam = triplet.jumps.intensity();
    let (up_poles, down_poles) = match triplet.jumps.exp_phases() {
        Some((up, down)) if lam > 0.0 => (merged_rates(up), merged_rates(down)),
        _ => (Vec::new(), Vec::new()),
    };
    let psi = |z: f64| triplet.laplace_exponent(z).unwrap_or(f64::NAN);
    let d = triplet.compensated_drift();
    let diffusive = triplet.sigma > 0.0;
    let sup_roots = side_roots(|z| psi(z) - q, &up_poles, diffusive || d > 0.0)?;
    let inf_roots = side_roots(|z| psi(-z) - q, &down_poles, diffusive || d < 0.0)?;
    Ok(WienerHopfFactors {
        q,
        sup: mixture_from_roots(&sup_roots, &up_poles, "supremum")?,
        inf: mixture_from_roots(&inf_roots, &down_poles, "infimum")?,
    })
}

/// One resolvent draw: the increment and, when jointly sampled, the
/// exponential time it spans.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSample {
    pub value: Vec<f64>,
    pub elapsed: Option<f64>,
}

#[derive(Debug, Clone)]
enum Route {
    WienerHopf(WienerHopfFactors),
    ExactPath(LevyModel),
}

/// Reusable sampler of `X_{e(q)}` for one `(model, q)`.
#[derive(Debug, Clone)]
pub struct ResolventSampler {
    q: f64,
    dim: usize,
    route: Route,
}

impl ResolventSampler {
    /// Prefers exact path sampling (which also yields the exponential
    /// time) and falls back to the Wiener-Hopf factors.
    pub fn new(model: &LevyModel, q: f64) -> Result<Self> {
        if model.capabilities().exact_path_samplable {
            Self::exact_path(model, q)
        } else if model.capabilities().resolvent_samplable {
            Self::wiener_hopf(model, q)
        } else {
            Err(capability(
                "model is neither exact-path samplable nor one-dimensional rational",
            ))
        }
    }

    pub fn wiener_hopf(model: &LevyModel, q: f64) -> Result<Self> {
        Ok(Self {
            q,
            dim: 1,
            route: Route::WienerHopf(wh_factorize(model, q)?),
        })
    }

    pub fn exact_path(model: &LevyModel, q: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(domain("q must be positive and finite"));
        }
        if !model.capabilities().exact_path_samplable {
            return Err(capability("model has no exact path sampler"));
        }
        Ok(Self {
            q,
            dim: model.dim(),
            route: Route::ExactPath(model.clone()),
        })
    }

    pub fn rate(&self) -> f64 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> Option<&WienerHopfFactors> {
        match &self.route {
            Route::WienerHopf(f) => Some(f),
            Route::ExactPath(_) => None,
        }
    }

    /// Writes the increment into `out` and returns the elapsed time when
    /// known.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Option<f64> {
        match &self.route {
            Route::WienerHopf(f) => {
                out[0] = f.sample(rng);
                None
            }
            Route::ExactPath(model) => {
                let e: f64 = Exp1.sample(rng);
                let dt = e / self.q;
                // Capability was checked at construction.
                let _ = model.sample_increment(dt, rng, out);
                Some(dt)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ResolventSample {
        let mut value = vec![0.0; self.dim];
        let elapsed = self.sample_into(rng, &mut value);
        ResolventSample { value, elapsed }
    }
}

/// Single resolvent draw.
pub fn sample_resolvent<R: Rng + ?Sized>(model: &LevyModel, q: f64, rng: &mut R) -> Result<ResolventSample> {
    Ok(ResolventSampler::new(model, q)?.sample(rng))
}

/// One row of the characteristic-function validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfCheck {
    pub theta: f64,
    pub empirical: Complex64,
    pub target: Complex64,
    /// Larger of the real- and imaginary-part z-scores in absolute value.
    pub z: f64,
}

impl CfCheck {
    pub fn flagged(&self) -> bool {
        !(self.z.abs() <= 5.0)
    }
}

/// Compares the empirical characteristic function of `n_samples` draws
/// from `sampler` with `q/(q + Ψ(θ))`.
pub fn validate_sampler_cf<R: Rng + ?Sized>(
    model: &LevyModel,
    sampler: &ResolventSampler,
    thetas: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<CfCheck>> {
    if n_samples < 10_000 {
        return Err(domain("CF validation needs at least 10^4 samples"));
    }
    if model.dim() != 1 {
        return Err(capability("CF validation is implemented for one-dimensional models"));
    }
    let q = sampler.rate();
    let mut buf = [0.0];
    let draws: Vec<f64> = (0..n_samples)
        .map(|_| {
            sampler.sample_into(rng, &mut buf);
            buf[0]
        })
        .collect();
    thetas
        .iter()
        .map(|&theta| {
            let psi = model.char_exponent(&[theta])?;
            let target = q / (q + psi);
            let re = Estimate::from_iter(draws.iter().map(|x| (theta * x).cos()));
            let im = Estimate::from_iter(draws.iter().map(|x| (theta * x).sin()));
            let z_re = z_score(re.mean - target.re, re.se);
            let z_im = z_score(im.mean - target.im, im.se);
            let z = if z_re.abs() >= z_im.abs() { z_re } else { z_im };
            Ok(CfCheck {
                theta,
                empirical: Complex64::new(re.mean, im.mean),
                target,
                z,
            })
        })
        .collect()
}

/// [`validate_sampler_cf`] with the default sampler for `(model, q)`.
pub fn validate_resolvent_cf<R: Rng + ?Sized>(
    model: &LevyModel,
    q: f64,
    thetas: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<CfCheck>> {
    let sampler = ResolventSampler::new(model, q)?;
    validate_sampler_cf(model, &sampler, thetas, n_samples, rng)
}

pub fn cf_checks_csv(rows: &[CfCheck]) -> Csv {
    let mut csv = Csv::new(&["theta", "re_emp", "im_emp", "re_target", "im_target", "z"]);
    for r in rows {
        csv.row_nums(&[
            r.theta,
            r.empirical.re,
            r.empirical.im,
            r.target.re,
            r.target.im,
            r.z,
        ]);
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::JumpLaw;
    use crate::rng::substream;

    fn hyper() -> LevyModel {
        LevyModel::hyperexponential(0.0, 1.0, 1.0, vec![ExpPhase::new(0.5, 3.0)], vec![ExpPhase::new(0.5, 4.0)])
            .unwrap()
    }

    fn max_identity_error(model: &LevyModel, f: &WienerHopfFactors) -> f64 {
        (0..=400)
            .map(|k| -20.0 + 0.1 * k as f64)
            .map(|t| {
                let target = f.q / (f.q + model.char_exponent(&[t]).unwrap());
                (f.product_cf(t) - target).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn standard_brownian_factors_are_exponential() {
        let m = LevyModel::brownian(0.0, 1.0).unwrap();
        let f = wh_factorize(&m, 2.0).unwrap();
        assert_eq!(f.sup.phases.len(), 1);
        assert_eq!(f.inf.phases.len(), 1);
        assert!((f.sup.phases[0].rate - 2.0).abs() < 1e-12);
        assert!((f.inf.phases[0].rate - 2.0).abs() < 1e-12);
        assert!(f.sup.atom == 0.0 && f.inf.atom == 0.0);
        assert!(max_identity_error(&m, &f) < 1e-12);
    }

    #[test]
    fn brownian_sup_rate_scaling() {
        for (sigma, q) in [(0.5, 1.0), (2.0, 10.0), (1.3, 0.5)] {
            let m = LevyModel::brownian(0.0, sigma).unwrap();
            let f = wh_factorize(&m, q).unwrap();
            let expect = (2.0 * q).sqrt() / sigma;
            assert!((f.sup.phases[0].rate - expect).abs() < 1e-11 * expect);
        }
    }

    #[test]
    fn hyperexponential_roots_interlace() {
        let m = hyper();
        let f = wh_factorize(&m, 1.0).unwrap();
        let up = f.sup.rates();
        let down = f.inf.rates();
        assert_eq!(up.len(), 2);
        assert_eq!(down.len(), 2);
        assert!(up[0] < 3.0 && up[1] > 3.0);
        assert!(down[0] < 4.0 && down[1] > 4.0);
        assert!(max_identity_error(&m, &f) < 1e-8);
    }

    #[test]
    fn pure_jump_drift_gives_atoms() {
        // σ = 0 with compensated drift < 0: sup has an atom, inf has an extra root.
        let law = JumpLaw::ExpMixture {
            up: vec![ExpPhase::new(1.0, 2.0)],
            down: vec![],
        };
        let m = LevyModel::compound_poisson(0.0, 1.0, law).unwrap();
        let f = wh_factorize(&m, 1.5).unwrap();
        assert!(f.sup.atom > 0.0);
        assert_eq!(f.sup.phases.len(), 1);
        assert_eq!(f.inf.phases.len(), 1);
        assert_eq!(f.inf.atom, 0.0);
        assert!(max_identity_error(&m, &f) < 1e-10);
    }

    #[test]
    fn deterministic_drift() {
        let m = LevyModel::brownian(2.0, 0.0).unwrap();
        let f = wh_factorize(&m, 4.0).unwrap();
        assert!((f.sup.phases[0].rate - 2.0).abs() < 1e-12);
        assert_eq!(f.inf.atom, 1.0);
        assert!(max_identity_error(&m, &f) < 1e-12);
    }

    #[test]
    fn non_rational_is_capability_error() {
        let m = LevyModel::compound_poisson(0.0, 1.0, JumpLaw::symmetric_two_point(1.0)).unwrap();
        assert!(matches!(wh_factorize(&m, 1.0), Err(Error::Capability(_))));
        assert!(matches!(wh_factorize(&hyper(), 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn theta_zero_is_exact() {
        let rows = validate_resolvent_cf(&hyper(), 1.0, &[0.0], 10_000, &mut substream(1, 0, 0)).unwrap();
        assert_eq!(rows[0].empirical, Complex64::new(1.0, 0.0));
        assert_eq!(rows[0].z, 0.0);
        assert!(validate_resolvent_cf(&hyper(), 1.0, &[0.0], 100, &mut substream(1, 0, 0)).is_err());
    }

    #[test]
    fn exact_route_reports_elapsed() {
        let m = LevyModel::brownian(0.0, 1.0).unwrap();
        let s = sample_resolvent(&m, 3.0, &mut substream(4, 0, 0)).unwrap();
        assert!(s.elapsed.unwrap() > 0.0);
        let w = ResolventSampler::wiener_hopf(&m, 3.0).unwrap();
        assert!(w.sample(&mut substream(4, 0, 0)).elapsed.is_none());
    }
}
