//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use levy_ep::convergence::{
    estimate_mse, grid_marginal_ladder, hitting_error_closed_form, rate_ladder, Scheme,
};
use levy_ep::grid_stats::{
    harmonic_gap_mean, hitting_moment_check, mauldon_moment_check, max_grid_deviation_check,
    spacing_mean_check, tau_moment_scan, KAPPA_0,
};
use levy_ep::pide::{rothe_solve, rothe_vs_monte_carlo, PideOperator, PideSetup, SpatialGrid, TestFunction};
use levy_ep::resolvent::{validate_sampler_cf, wh_factorize, ResolventSampler};
use levy_ep::{substream, Coefficient, ExpPhase, LevyModel, Parallelism, SdeProblem};

const SEED: u64 = 20_240_917;
const LADDER: [usize; 6] = [16, 32, 64, 128, 256, 512];

fn par() -> Parallelism {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    Parallelism::new(workers)
}

fn gbm() -> (SdeProblem, LevyModel) {
    (
        SdeProblem::new(Coefficient::linear(1.0), vec![1.0], 1.0, 1.0).unwrap(),
        LevyModel::brownian(0.05, 1.0).unwrap(),
    )
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main_rate() -> Outcome {
    let (p, m) = gbm();
    let r = rate_ladder(&p, &m, Scheme::EulerPoisson, &LADDER, 10_000, SEED, par()).unwrap();
    outcome(
        r.slope_in(-0.75, -0.35),
        format!("euler_poisson slope {:.3} (ci {:.3}..{:.3}), band [-0.75, -0.35]", r.fit.slope, r.fit.ci_lo, r.fit.ci_hi),
    )
}

fn enhanced_rate() -> Outcome {
    let (p, m) = gbm();
    let ep = rate_ladder(&p, &m, Scheme::EulerPoisson, &LADDER, 10_000, SEED, par()).unwrap();
    let en = rate_ladder(&p, &m, Scheme::Enhanced, &LADDER, 10_000, SEED, par()).unwrap();
    outcome(
        en.slope_in(-1.25, -0.80) && en.fit.slope < ep.fit.slope - 0.2,
        format!(
            "enhanced slope {:.3}, band [-1.25, -0.80]; euler_poisson slope {:.3}",
            en.fit.slope, ep.fit.slope
        ),
    )
}

fn hitting_closed_form() -> Outcome {
    let p = SdeProblem::new(Coefficient::constant(1.0), vec![1.0], 1.0, 1.0).unwrap();
    let m = LevyModel::brownian(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for n in LADDER {
        let e = estimate_mse(&p, &m, Scheme::EulerPoisson, n, 10_000, SEED, par()).unwrap();
        let target = hitting_error_closed_form(&m, 1.0, n, 1.0).unwrap();
        worst = worst.max(e.z_against(target).abs());
    }
    outcome(worst < 4.0, format!("max |z| over rungs {worst:.2} (< 4)"))
}

fn gamma_fourth_moment() -> Outcome {
    // E[(1 - E)^4] for E ~ Exp(1): Σ C(4,k)(-1)^k k! = 1 - 4 + 12 - 24 + 24.
    let analytic = 1.0 - 4.0 + 12.0 - 24.0 + 24.0;
    let closed = levy_ep::grid_stats::gamma_hitting_moments(1, 1.0).unwrap().1;
    let mut pass = closed == 9.0 && analytic == 9.0;
    let mut zs = Vec::new();
    for (n, t) in [(1usize, 1.0), (4, 2.0), (64, 1.0)] {
        let c = hitting_moment_check(n, t, 1_000_000, SEED, par()).unwrap();
        pass &= c.fourth.z.abs() < 4.0 && c.second.z.abs() < 4.0;
        zs.push(format!("({n},{t}) z4={:.2} z2={:.2}", c.fourth.z, c.second.z));
    }
    outcome(pass, format!("closed(1,1)={closed}; {}", zs.join("; ")))
}

fn spacing_law() -> Outcome {
    let mut pass = harmonic_gap_mean(2).unwrap() == 0.75;
    let mut parts = Vec::new();
    for m in [1usize, 2, 3, 10, 100] {
        let c = spacing_mean_check(m, 1_000_000, SEED, par()).unwrap();
        pass &= c.z.abs() < 4.0;
        parts.push(format!("m={m} z={:.2}", c.z));
    }
    for (m, s) in [(2usize, 0.25), (5, -0.4), (10, 0.45)] {
        let c = mauldon_moment_check(m, s, 1_000_000, SEED, par()).unwrap();
        pass &= c.z.abs() < 5.0;
        parts.push(format!("mauldon({m},{s}) z={:.2}", c.z));
    }
    outcome(pass, parts.join("; "))
}

fn tau_shape() -> Outcome {
    let ns: Vec<usize> = (4..=12).map(|k| 1usize << k).collect();
    let s = tau_moment_scan(&ns, 1.0, 10_000, SEED, par()).unwrap();
    let slope = s.tau_fit.slope;
    let max_ratio = s.max_ratio();
    outcome(
        (-1.05..=-0.80).contains(&slope) && max_ratio <= KAPPA_0,
        format!("slope {slope:.3} in [-1.05, -0.80]; max ratio {max_ratio:.3} <= {KAPPA_0:.4}"),
    )
}

fn maximal_inequality() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [4usize, 16, 64] {
        let c = max_grid_deviation_check(n, 1.0, 2, 100_000, SEED, par()).unwrap();
        pass &= c.pass;
        parts.push(format!("n={n} lhs={:.4}±{:.4} rhs={:.4}", c.lhs.mean, c.lhs.se, c.rhs));
    }
    outcome(pass, parts.join("; "))
}

fn wiener_hopf_identity() -> Outcome {
    let models = [
        LevyModel::brownian(0.3, 1.2).unwrap(),
        LevyModel::hyperexponential(0.0, 1.0, 1.0, vec![ExpPhase::new(0.5, 3.0)], vec![ExpPhase::new(0.5, 4.0)])
            .unwrap(),
        LevyModel::hyperexponential(
            0.1,
            0.5,
            2.0,
            vec![ExpPhase::new(0.3, 2.0), ExpPhase::new(0.2, 7.0)],
            vec![ExpPhase::new(0.4, 1.5), ExpPhase::new(0.1, 5.0)],
        )
        .unwrap(),
    ];
    let thetas: Vec<f64> = (0..50).map(|k| -10.0 + 20.0 * k as f64 / 49.0).collect();
    let mut max_err: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    for (mi, m) in models.iter().enumerate() {
        for q in [0.5, 1.0, 10.0] {
            let f = wh_factorize(m, q).unwrap();
            for &t in &thetas {
                let target = q / (q + m.char_exponent(&[t]).unwrap());
                max_err = max_err.max((f.product_cf(t) - target).norm());
            }
            let sampler = ResolventSampler::wiener_hopf(m, q).unwrap();
            let cf_thetas = [0.0, 0.5, 1.0, 2.0, -3.0];
            let mut rng = substream(SEED, mi as u64, (q * 10.0) as u64);
            for r in validate_sampler_cf(m, &sampler, &cf_thetas, 1_000_000, &mut rng).unwrap() {
                max_z = max_z.max(r.z.abs());
            }
        }
    }
    outcome(
        max_err < 1e-8 && max_z < 5.0,
        format!("max identity error {max_err:.2e} (< 1e-8); max CF |z| {max_z:.2} (< 5)"),
    )
}

fn rothe_correspondence() -> Outcome {
    let start = Instant::now();
    let n = 8;
    // Quadratic closure: a ≡ 1, standard Brownian motion.
    let p = SdeProblem::new(Coefficient::constant(1.0), vec![0.0], 1.0, 1.0).unwrap();
    let bm = LevyModel::brownian(0.0, 1.0).unwrap();
    let x0 = 0.5;
    let grid = SpatialGrid::around(x0, 0.02, 1201).unwrap();
    let op = PideOperator::new(&p, &bm, grid.clone()).unwrap();
    let states = rothe_solve(&op, &TestFunction::Square, n, 1.0).unwrap();
    let idx = grid.node_index(x0).unwrap();
    let analytic_err = states
        .iter()
        .map(|s| (s.values[idx] - (x0 * x0 + s.step as f64 / n as f64)).abs())
        .fold(0.0, f64::max);
    let setup = PideSetup {
        nodes: 1024,
        paths: 100_000,
        master_seed: SEED,
        par: par(),
    };
    let quad = rothe_vs_monte_carlo(&p, &bm, &TestFunction::Square, n, x0, setup).unwrap();
    let quad_z = quad.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let (gp, gm) = gbm();
    let bump = TestFunction::Bump { center: 1.0, width: 0.5 };
    let rows = rothe_vs_monte_carlo(&gp, &gm, &bump, n, 1.0, setup).unwrap();
    let bump_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        analytic_err < 1e-9 && quad_z < 4.0 && bump_z < 5.0 && secs < 60.0,
        format!(
            "closure error {analytic_err:.1e}; quadratic MC max |z| {quad_z:.2}; bump max |z| {bump_z:.2}; {secs:.1}s"
        ),
    )
}

fn grid_marginal() -> Outcome {
    let (p, m) = gbm();
    let r = grid_marginal_ladder(&p, &m, &[16, 32, 64, 128, 256], 10_000, SEED, par()).unwrap();
    outcome(
        r.slope_in(-0.75, -0.35),
        format!("max-over-i slope {:.3}, band [-0.75, -0.35]", r.fit.slope),
    )
}

fn determinism() -> Outcome {
    let (p, m) = gbm();
    let ladder = [8, 16, 32, 64, 128];
    let a = rate_ladder(&p, &m, Scheme::EulerPoisson, &ladder, 1000, SEED, Parallelism::sequential()).unwrap();
    let b = rate_ladder(&p, &m, Scheme::EulerPoisson, &ladder, 1000, SEED, Parallelism::new(4)).unwrap();
    let c = rate_ladder(&p, &m, Scheme::EulerPoisson, &ladder, 1000, SEED, Parallelism::new(3)).unwrap();
    let ns = [16, 32, 64, 128];
    let t1 = tau_moment_scan(&ns, 1.0, 2000, SEED, Parallelism::sequential()).unwrap();
    let t2 = tau_moment_scan(&ns, 1.0, 2000, SEED, Parallelism::new(4)).unwrap();
    let same = a.to_csv() == b.to_csv() && b.to_csv() == c.to_csv() && t1.to_csv() == t2.to_csv();
    outcome(same, "ladder and tau CSVs identical for 1, 3 and 4 workers".to_string())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 main rate", main_rate),
        ("2 enhanced rate", enhanced_rate),
        ("3 hitting-error closed form", hitting_closed_form),
        ("4 gamma fourth central moment", gamma_fourth_moment),
        ("5 spacing law", spacing_law),
        ("6 tau bound shape", tau_shape),
        ("7 maximal inequality", maximal_inequality),
        ("8 wiener-hopf identity", wiener_hopf_identity),
        ("9 rothe correspondence", rothe_correspondence),
        ("10 grid-marginal error", grid_marginal),
        ("11 determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {name}: {} [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
