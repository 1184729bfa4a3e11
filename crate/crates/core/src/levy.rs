//! Driving Lévy processes: triplets, characteristic exponents, moments and
//! exact increment sampling.
//!
//! Conventions. A one-dimensional component with triplet `(b, σ, Π)` is
//! decomposed as `X_t = σW_t + L_t + b·t`, where `L` is the compensated
//! jump martingale. Hence `E[X_t] = b·t` and
//!
//! ```text
//! E[exp(iθX_t)] = exp(-tΨ(θ)),
//! Ψ(θ) = -iθb + σ²θ²/2 + ∫(1 - e^{iθx} + iθx) Π(dx).
//! ```
//!
//! Multidimensional drivers are built as `X = A·Z` from independent
//! one-dimensional components `Z_j`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use crate::config::{join_list, KvMap};
use crate::error::{capability, domain, Error, Result};
use crate::scheme::SdeProblem;

/// One exponential phase of a hyperexponential law: with probability
/// `weight` the jump magnitude is Exponential(`rate`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpPhase {
    pub weight: f64,
    pub rate: f64,
}

impl ExpPhase {
    pub fn new(weight: f64, rate: f64) -> Self {
        Self { weight, rate }
    }
}

/// Jump-size distribution of a compound Poisson component.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    /// `up` with probability `p_up`, otherwise `down`.
    TwoPoint { up: f64, down: f64, p_up: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std: f64 },
    /// Two-sided mixture of exponentials; all weights together sum to one.
    /// `up` phases produce positive jumps, `down` phases negative ones.
    ExpMixture {
        up: Vec<ExpPhase>,
        down: Vec<ExpPhase>,
    },
}

impl JumpLaw {
    pub fn symmetric_two_point(size: f64) -> Self {
        JumpLaw::TwoPoint {
            up: size,
            down: -size,
            p_up: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::TwoPoint { up, down, p_up } => {
                if !(0.0..=1.0).contains(p_up) || !up.is_finite() || !down.is_finite() {
                    return Err(domain("two-point jump law needs finite sizes and p in [0,1]"));
                }
            }
            JumpLaw::Uniform { low, high } => {
                if !(low < high) || !low.is_finite() || !high.is_finite() {
                    return Err(domain("uniform jump law needs low < high"));
                }
            }
            JumpLaw::Normal { mean, std } => {
                if !mean.is_finite() || !(*std >= 0.0) || !std.is_finite() {
                    return Err(domain("normal jump law needs finite mean and std >= 0"));
                }
            }
            JumpLaw::ExpMixture { up, down } => validate_phases(up, down)?,
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::TwoPoint { up, down, p_up } => p_up * up + (1.0 - p_up) * down,
            JumpLaw::Uniform { low, high } => 0.5 * (low + high),
            JumpLaw::Normal { mean, .. } => *mean,
            JumpLaw::ExpMixture { up, down } => {
                up.iter().map(|p| p.weight / p.rate).sum::<f64>()
                    - down.iter().map(|p| p.weight / p.rate).sum::<f64>()
            }
        }
    }

    /// `E[J^2]`.
    pub fn second_moment(&self) -> f64 {
        match self {
            JumpLaw::TwoPoint { up, down, p_up } => p_up * up * up + (1.0 - p_up) * down * down,
            JumpLaw::Uniform { low, high } => (low * low + low * high + high * high) / 3.0,
            JumpLaw::Normal { mean, std } => mean * mean + std * std,
            JumpLaw::ExpMixture { up, down } => up
                .iter()
                .chain(down)
                .map(|p| 2.0 * p.weight / (p.rate * p.rate))
                .sum(),
        }
    }

    /// `E[exp(iθJ)]`.
    pub fn cf(&self, theta: f64) -> Complex64 {
        let i = Complex64::i();
        match self {
            JumpLaw::TwoPoint { up, down, p_up } => {
                (i * theta * up).exp() * p_up + (i * theta * down).exp() * (1.0 - p_up)
            }
            JumpLaw::Uniform { low, high } => {
                let half = 0.5 * (high - low) * theta;
                let sinc = if half.abs() < 1e-8 {
                    1.0 - half * half / 6.0
                } else {
                    half.sin() / half
                };
                (i * theta * 0.5 * (low + high)).exp() * sinc
            }
            JumpLaw::Normal { mean, std } => {
                Complex64::new(-0.5 * std * std * theta * theta, theta * mean).exp()
            }
            JumpLaw::ExpMixture { up, down } => {
                let u: Complex64 = up
                    .iter()
                    .map(|p| p.weight * p.rate / Complex64::new(p.rate, -theta))
                    .sum();
                let d: Complex64 = down
                    .iter()
                    .map(|p| p.weight * p.rate / Complex64::new(p.rate, theta))
                    .sum();
                u + d
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::TwoPoint { up, down, p_up } => {
                if rng.random::<f64>() < *p_up {
                    *up
                } else {
                    *down
                }
            }
            JumpLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            JumpLaw::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            JumpLaw::ExpMixture { up, down } => sample_exp_mixture(up, down, rng),
        }
    }

    fn is_rational(&self) -> bool {
        matches!(self, JumpLaw::ExpMixture { .. })
    }
}

fn validate_phases(up: &[ExpPhase], down: &[ExpPhase]) -> Result<()> {
    let mut total = 0.0;
    for p in up.iter().chain(down) {
        if !(p.rate > 0.0) || !p.rate.is_finite() || !(p.weight > 0.0) {
            return Err(domain("exponential phases need positive weights and rates"));
        }
        total += p.weight;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(domain(format!(
            "exponential mixture weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

fn sample_exp_mixture<R: Rng + ?Sized>(up: &[ExpPhase], down: &[ExpPhase], rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let e: f64 = Exp1.sample(rng);
    let mut acc = 0.0;
    for p in up {
        acc += p.weight;
        if u < acc {
            return e / p.rate;
        }
    }
    for p in down {
        acc += p.weight;
        if u < acc {
            return -e / p.rate;
        }
    }
    // Rounding in the cumulative weights: fall back to the last phase.
    match (down.last(), up.last()) {
        (Some(p), _) => -e / p.rate,
        (None, Some(p)) => e / p.rate,
        (None, None) => 0.0,
    }
}

/// Lévy measure descriptor of a one-dimensional component.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpMeasure {
    None,
    CompoundPoisson { rate: f64, law: JumpLaw },
    /// Hyperexponential jumps: intensity `intensity`, two-sided exponential
    /// mixture sizes. Used through its Wiener-Hopf factors only.
    Hyperexponential {
        intensity: f64,
        up: Vec<ExpPhase>,
        down: Vec<ExpPhase>,
    },
}

impl JumpMeasure {
    pub fn intensity(&self) -> f64 {
        match self {
            JumpMeasure::None => 0.0,
            JumpMeasure::CompoundPoisson { rate, .. } => *rate,
            JumpMeasure::Hyperexponential { intensity, .. } => *intensity,
        }
    }

    /// Mean jump size (0 without jumps).
    pub fn jump_mean(&self) -> f64 {
        match self {
            JumpMeasure::None => 0.0,
            JumpMeasure::CompoundPoisson { law, .. } => law.mean(),
            JumpMeasure::Hyperexponential { up, down, .. } => {
                up.iter().map(|p| p.weight / p.rate).sum::<f64>()
                    - down.iter().map(|p| p.weight / p.rate).sum::<f64>()
            }
        }
    }

    /// `∫x²Π(dx)`.
    pub fn second_moment(&self) -> f64 {
        match self {
            JumpMeasure::None => 0.0,
            JumpMeasure::CompoundPoisson { rate, law } => rate * law.second_moment(),
            JumpMeasure::Hyperexponential { intensity, up, down } => {
                intensity
                    * up.iter()
                        .chain(down)
                        .map(|p| 2.0 * p.weight / (p.rate * p.rate))
                        .sum::<f64>()
            }
        }
    }

    fn jump_cf(&self, theta: f64) -> Complex64 {
        match self {
            JumpMeasure::None => Complex64::new(1.0, 0.0),
            JumpMeasure::CompoundPoisson { law, .. } => law.cf(theta),
            JumpMeasure::Hyperexponential { up, down, .. } => JumpLaw::ExpMixture {
                up: up.clone(),
                down: down.clone(),
            }
            .cf(theta),
        }
    }

    fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpMeasure::None => 0.0,
            JumpMeasure::CompoundPoisson { law, .. } => law.sample(rng),
            JumpMeasure::Hyperexponential { up, down, .. } => sample_exp_mixture(up, down, rng),
        }
    }

    /// Exponential phases when the jump law is a two-sided exponential
    /// mixture (so that the characteristic exponent is rational).
    pub fn exp_phases(&self) -> Option<(&[ExpPhase], &[ExpPhase])> {
        match self {
            JumpMeasure::CompoundPoisson {
                law: JumpLaw::ExpMixture { up, down },
                ..
            }
            | JumpMeasure::Hyperexponential { up, down, .. } => Some((up, down)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            JumpMeasure::None => Ok(()),
            JumpMeasure::CompoundPoisson { rate, law } => {
                if !(*rate >= 0.0) || !rate.is_finite() {
                    return Err(domain("jump rate must be finite and >= 0"));
                }
                law.validate()
            }
            JumpMeasure::Hyperexponential { intensity, up, down } => {
                if !(*intensity >= 0.0) || !intensity.is_finite() {
                    return Err(domain("jump intensity must be finite and >= 0"));
                }
                validate_phases(up, down)
            }
        }
    }
}

/// One-dimensional Lévy triplet `(b, σ, Π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriplet {
    pub drift: f64,
    pub sigma: f64,
    pub jumps: JumpMeasure,
}

impl LevyTriplet {
    pub fn new(drift: f64, sigma: f64, jumps: JumpMeasure) -> Result<Self> {
        if !drift.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(domain("drift must be finite and sigma finite and >= 0"));
        }
        jumps.validate()?;
        Ok(Self {
            drift,
            sigma,
            jumps,
        })
    }

    pub fn char_exponent(&self, theta: f64) -> Complex64 {
        let lam = self.jumps.intensity();
        let jump = if lam > 0.0 {
            let m = self.jumps.jump_mean();
            (Complex64::new(1.0, theta * m) - self.jumps.jump_cf(theta)) * lam
        } else {
            Complex64::new(0.0, 0.0)
        };
        Complex64::new(0.5 * self.sigma * self.sigma * theta * theta, -theta * self.drift) + jump
    }

    /// Variance per unit time, `σ² + ∫x²Π(dx)`.
    pub fn variance_rate(&self) -> f64 {
        self.sigma * self.sigma + self.jumps.second_moment()
    }

    /// Drift of the path between jumps, `b - λE[J]`.
    pub fn compensated_drift(&self) -> f64 {
        self.drift - self.jumps.intensity() * self.jumps.jump_mean()
    }

    /// `Ψ` is rational (Brownian motion with drift plus optional
    /// exponential-mixture jumps).
    pub fn is_rational(&self) -> bool {
        match &self.jumps {
            JumpMeasure::None | JumpMeasure::Hyperexponential { .. } => true,
            JumpMeasure::CompoundPoisson { law, rate } => *rate == 0.0 || law.is_rational(),
        }
    }

    pub fn exact_path_samplable(&self) -> bool {
        match &self.jumps {
            JumpMeasure::Hyperexponential { intensity, .. } => *intensity == 0.0,
            _ => true,
        }
    }

    /// Laplace exponent `ψ(ζ) = ln E[exp(ζX_1)]` for rational components,
    /// `ψ(ζ) = bζ + σ²ζ²/2 + λ(M(ζ) - 1 - ζE[J])`. Undefined on the poles.
    pub fn laplace_exponent(&self, zeta: f64) -> Option<f64> {
        let base = self.drift * zeta + 0.5 * self.sigma * self.sigma * zeta * zeta;
        let lam = self.jumps.intensity();
        if lam == 0.0 {
            return Some(base);
        }
        let (up, down) = self.jumps.exp_phases()?;
        let mgf: f64 = up
            .iter()
            .map(|p| p.weight * p.rate / (p.rate - zeta))
            .chain(down.iter().map(|p| p.weight * p.rate / (p.rate + zeta)))
            .sum();
        Some(base + lam * (mgf - 1.0 - zeta * self.jumps.jump_mean()))
    }

    /// Exact increment over a time span `dt`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        let mut x = self.compensated_drift() * dt;
        if self.sigma > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            x += self.sigma * dt.sqrt() * z;
        }
        let mu = self.jumps.intensity() * dt;
        if mu > 0.0 {
            let count = sample_poisson(mu, rng);
            for _ in 0..count {
                x += self.jumps.sample_jump(rng);
            }
        }
        x
    }

    /// Jump times (sorted, in `(0, horizon]`) and sizes of one path.
    pub fn sample_jumps<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Vec<(f64, f64)> {
        let lam = self.jumps.intensity();
        let mut out = Vec::new();
        if lam <= 0.0 {
            return out;
        }
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / lam;
            if t > horizon {
                break;
            }
            out.push((t, self.jumps.sample_jump(rng)));
        }
        out
    }
}

pub(crate) fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(p) => p.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Sampling capabilities of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub resolvent_samplable: bool,
    pub exact_path_samplable: bool,
}

/// Driving process `X = A·Z` with independent one-dimensional components.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    components: Vec<LevyTriplet>,
    /// Row-major `d_X × d_Z`; `None` means the identity.
    mixing: Option<Vec<f64>>,
    dim: usize,
}

/// Mean vector and covariance matrix (row-major) of `X_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl LevyModel {
    pub fn scalar(triplet: LevyTriplet) -> Self {
        Self {
            components: vec![triplet],
            mixing: None,
            dim: 1,
        }
    }

    pub fn brownian(drift: f64, sigma: f64) -> Result<Self> {
        Ok(Self::scalar(LevyTriplet::new(drift, sigma, JumpMeasure::None)?))
    }

    /// Compound Poisson plus drift (no diffusion part).
    pub fn compound_poisson(drift: f64, rate: f64, law: JumpLaw) -> Result<Self> {
        Self::jump_diffusion(drift, 0.0, rate, law)
    }

    pub fn jump_diffusion(drift: f64, sigma: f64, rate: f64, law: JumpLaw) -> Result<Self> {
        Ok(Self::scalar(LevyTriplet::new(
            drift,
            sigma,
            JumpMeasure::CompoundPoisson { rate, law },
        )?))
    }

    pub fn hyperexponential(
        drift: f64,
        sigma: f64,
        intensity: f64,
        up: Vec<ExpPhase>,
        down: Vec<ExpPhase>,
    ) -> Result<Self> {
        Ok(Self::scalar(LevyTriplet::new(
            drift,
            sigma,
            JumpMeasure::Hyperexponential {
                intensity,
                up,
                down,
            },
        )?))
    }

    /// `X = A·Z` for a row-major `d_X × d_Z` matrix `A` and independent
    /// components `Z_j`.
    pub fn mixed(mixing: Vec<f64>, components: Vec<LevyTriplet>) -> Result<Self> {
        let dz = components.len();
        if dz == 0 || mixing.is_empty() || !mixing.len().is_multiple_of(dz) {
            return Err(domain("mixing matrix shape does not match components"));
        }
        if mixing.iter().any(|v| !v.is_finite()) {
            return Err(domain("mixing matrix must be finite"));
        }
        let dim = mixing.len() / dz;
        Ok(Self {
            components,
            mixing: Some(mixing),
            dim,
        })
    }

    /// `d_X`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[LevyTriplet] {
        &self.components
    }

    /// The single triplet of a one-dimensional model without mixing.
    pub fn as_scalar(&self) -> Option<&LevyTriplet> {
        if self.mixing.is_none() && self.components.len() == 1 {
            self.components.first()
        } else {
            None
        }
    }

    /// Mixing matrix entry `A[i][j]`.
    pub fn mixing_entry(&self, i: usize, j: usize) -> f64 {
        match &self.mixing {
            Some(m) => m[i * self.components.len() + j],
            None => {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Writes `A·z` into `out`.
    pub fn mix_into(&self, z: &[f64], out: &mut [f64]) {
        match &self.mixing {
            None => out.copy_from_slice(z),
            Some(m) => {
                let dz = self.components.len();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = m[i * dz..(i + 1) * dz]
                        .iter()
                        .zip(z)
                        .map(|(a, b)| a * b)
                        .sum();
                }
            }
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        let exact = self.components.iter().all(LevyTriplet::exact_path_samplable);
        let wiener_hopf = self.dim == 1 && self.components.len() == 1 && self.components[0].is_rational();
        Capabilities {
            exact_path_samplable: exact,
            resolvent_samplable: exact || wiener_hopf,
        }
    }

    /// Drift vector `b = A·b_Z`.
    pub fn drift(&self) -> Vec<f64> {
        let bz: Vec<f64> = self.components.iter().map(|c| c.drift).collect();
        let mut out = vec![0.0; self.dim];
        self.mix_into(&bz, &mut out);
        out
    }

    /// Diffusion matrix `Σ = A·diag(σ_Z)` (row-major `d_X × d_Z`).
    pub fn diffusion_matrix(&self) -> Vec<f64> {
        let dz = self.components.len();
        let mut out = vec![0.0; self.dim * dz];
        for i in 0..self.dim {
            for (j, c) in self.components.iter().enumerate() {
                out[i * dz + j] = self.mixing_entry(i, j) * c.sigma;
            }
        }
        out
    }

    /// `∫|x|²Π(dx)` for the mixed jump measure.
    pub fn jump_second_moment(&self) -> f64 {
        self.components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let col: f64 = (0..self.dim).map(|i| self.mixing_entry(i, j).powi(2)).sum();
                col * c.jumps.second_moment()
            })
            .sum()
    }

    /// Characteristic exponent `Ψ(θ) = Σ_j Ψ_j((Aᵀθ)_j)`.
    pub fn char_exponent(&self, theta: &[f64]) -> Result<Complex64> {
        if theta.len() != self.dim {
            return Err(domain(format!(
                "θ has dimension {}, model has {}",
                theta.len(),
                self.dim
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(domain("θ must be finite"));
        }
        Ok(self
            .components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let proj: f64 = (0..self.dim).map(|i| self.mixing_entry(i, j) * theta[i]).sum();
                c.char_exponent(proj)
            })
            .sum())
    }

    /// Mean `b·t` and covariance `t(ΣΣᵀ + ∫xxᵀΠ(dx))` of `X_t`.
    pub fn process_moments(&self, t: f64) -> Result<Moments> {
        if !(t >= 0.0) {
            return Err(domain("time must be >= 0"));
        }
        let mean = self.drift().into_iter().map(|b| b * t).collect();
        let d = self.dim;
        let mut cov = vec![0.0; d * d];
        for (k, c) in self.components.iter().enumerate() {
            let v = c.variance_rate() * t;
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += self.mixing_entry(i, k) * self.mixing_entry(j, k) * v;
                }
            }
        }
        Ok(Moments { mean, cov })
    }

    /// Exact increment `X_{s+dt} - X_s` written into `out`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, out: &mut [f64]) -> Result<()> {
        if !self.capabilities().exact_path_samplable {
            return Err(capability(
                "exact path sampling is not available for hyperexponential components",
            ));
        }
        if self.mixing.is_none() {
            for (o, c) in out.iter_mut().zip(&self.components) {
                *o = c.sample_increment(dt, rng);
            }
        } else {
            let z: Vec<f64> = self
                .components
                .iter()
                .map(|c| c.sample_increment(dt, rng))
                .collect();
            self.mix_into(&z, out);
        }
        Ok(())
    }

    /// Serialises a one-dimensional model descriptor.
    pub fn to_kv(&self) -> Result<KvMap> {
        let c = self
            .as_scalar()
            .ok_or_else(|| capability("only one-dimensional models have a config descriptor"))?;
        let mut kv = KvMap::new();
        kv.set("drift", c.drift);
        kv.set("sigma", c.sigma);
        match &c.jumps {
            JumpMeasure::None => kv.set("kind", "brownian"),
            JumpMeasure::CompoundPoisson { rate, law } => {
                kv.set(
                    "kind",
                    if c.sigma == 0.0 {
                        "compound_poisson"
                    } else {
                        "jump_diffusion"
                    },
                );
                kv.set("jump_rate", rate);
                match law {
                    JumpLaw::TwoPoint { up, down, p_up } => {
                        kv.set("jump_law", "two_point");
                        kv.set("jump.up", up);
                        kv.set("jump.down", down);
                        kv.set("jump.p_up", p_up);
                    }
                    JumpLaw::Uniform { low, high } => {
                        kv.set("jump_law", "uniform");
                        kv.set("jump.low", low);
                        kv.set("jump.high", high);
                    }
                    JumpLaw::Normal { mean, std } => {
                        kv.set("jump_law", "normal");
                        kv.set("jump.mean", mean);
                        kv.set("jump.std", std);
                    }
                    JumpLaw::ExpMixture { up, down } => {
                        kv.set("jump_law", "exp_mixture");
                        write_phases(&mut kv, up, down);
                    }
                }
            }
            JumpMeasure::Hyperexponential { intensity, up, down } => {
                kv.set("kind", "hyperexponential");
                kv.set("jump_rate", intensity);
                write_phases(&mut kv, up, down);
            }
        }
        Ok(kv)
    }

    /// Parses a model descriptor (keys relative to the model section).
    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let kind = kv.require_str("kind")?;
        let drift = kv.get_or("drift", 0.0)?;
        let sigma = kv.get_or("sigma", if kind == "brownian" { 1.0 } else { 0.0 })?;
        let model = match kind {
            "brownian" => Self::brownian(drift, sigma),
            "compound_poisson" | "jump_diffusion" => {
                let rate = kv.require::<f64>("jump_rate")?;
                let law = match kv.require_str("jump_law")? {
                    "two_point" => JumpLaw::TwoPoint {
                        up: kv.require("jump.up")?,
                        down: kv.require("jump.down")?,
                        p_up: kv.get_or("jump.p_up", 0.5)?,
                    },
                    "uniform" => JumpLaw::Uniform {
                        low: kv.require("jump.low")?,
                        high: kv.require("jump.high")?,
                    },
                    "normal" => JumpLaw::Normal {
                        mean: kv.get_or("jump.mean", 0.0)?,
                        std: kv.require("jump.std")?,
                    },
                    "exp_mixture" => {
                        let (up, down) = read_phases(kv)?;
                        JumpLaw::ExpMixture { up, down }
                    }
                    other => {
                        return Err(Error::Config {
                            key: "jump_law".into(),
                            message: format!("unknown jump law `{other}`"),
                        })
                    }
                };
                Self::jump_diffusion(drift, sigma, rate, law)
            }
            "hyperexponential" => {
                let rate = kv.require::<f64>("jump_rate")?;
                let (up, down) = read_phases(kv)?;
                Self::hyperexponential(drift, sigma, rate, up, down)
            }
            other => {
                return Err(Error::Config {
                    key: "kind".into(),
                    message: format!("unknown model `{other}`"),
                })
            }
        };
        model.map_err(|e| match e {
            Error::Domain(m) => Error::Config {
                key: "model".into(),
                message: m,
            },
            e => e,
        })
    }
}

fn write_phases(kv: &mut KvMap, up: &[ExpPhase], down: &[ExpPhase]) {
    let w = |v: &[ExpPhase]| join_list(&v.iter().map(|p| p.weight).collect::<Vec<_>>());
    let r = |v: &[ExpPhase]| join_list(&v.iter().map(|p| p.rate).collect::<Vec<_>>());
    kv.set("up_weights", w(up));
    kv.set("up_rates", r(up));
    kv.set("down_weights", w(down));
    kv.set("down_rates", r(down));
}

fn read_phases(kv: &KvMap) -> Result<(Vec<ExpPhase>, Vec<ExpPhase>)> {
    let side = |wk: &str, rk: &str| -> Result<Vec<ExpPhase>> {
        let w: Vec<f64> = kv.get_list(wk)?.unwrap_or_default();
        let r: Vec<f64> = kv.get_list(rk)?.unwrap_or_default();
        if w.len() != r.len() {
            return Err(Error::Config {
                key: wk.into(),
                message: "weights and rates differ in length".into(),
            });
        }
        Ok(w.into_iter().zip(r).map(|(w, r)| ExpPhase::new(w, r)).collect())
    };
    Ok((side("up_weights", "up_rates")?, side("down_weights", "down_rates")?))
}

/// Smallest `k` covering the standing bounds `|Σ|, |b|, |y₀| ≤ k`,
/// `∫|x|²Π ≤ k²` and the coefficient bounds `Lip(a) ≤ k`, `|a(y₀)| ≤ k`.
/// Reporting only.
pub fn declared_k(model: &LevyModel, problem: &SdeProblem) -> Result<f64> {
    let jump2 = model.jump_second_moment();
    if !jump2.is_finite() {
        return Err(capability("jump second moment is unbounded"));
    }
    let frob = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sigma = frob(&model.diffusion_matrix());
    let drift = frob(&model.drift());
    let y0 = frob(problem.y0());
    let a0 = frob(&problem.coefficient_matrix(problem.y0()));
    Ok([sigma, drift, jump2.sqrt(), y0, problem.lipschitz_k(), a0]
        .into_iter()
        .fold(0.0, f64::max))
}
