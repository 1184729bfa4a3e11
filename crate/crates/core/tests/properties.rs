//! Invariants checked over randomly drawn parameters.

use levy_ep::config::KvMap;
use levy_ep::grid_stats::{harmonic_gap_mean, largest_gap, sample_tau};
use levy_ep::levy::JumpLaw;
use levy_ep::output::fmt_num;
use levy_ep::pide::{rothe_solve, PideOperator, SpatialGrid, TestFunction};
use levy_ep::reference::couple;
use levy_ep::resolvent::wh_factorize;
use levy_ep::scheme::{build_grid, run_chain, run_euler_poisson, StopRule};
use levy_ep::{substream, Coefficient, ExpPhase, LevyModel, SdeProblem};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn phases(rates: &[f64], total: f64) -> Vec<ExpPhase> {
    let w = total / rates.len() as f64;
    rates.iter().map(|r| ExpPhase::new(w, *r)).collect()
}

/// Distinct rates, spaced so the factorisation is well conditioned.
fn rate_set(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..3.0, 1..=max).prop_map(|gaps| {
        let mut acc = 0.0;
        gaps.iter()
            .map(|g| {
                acc += g;
                acc
            })
            .collect()
    })
}

fn hyper_model() -> impl Strategy<Value = LevyModel> {
    (
        -1.0f64..1.0,
        prop_oneof![Just(0.0), 0.2f64..2.0],
        0.1f64..3.0,
        0.05f64..0.95,
        rate_set(3),
        rate_set(3),
    )
        .prop_map(|(b, sigma, lam, p_up, up, down)| {
            LevyModel::hyperexponential(b, sigma, lam, phases(&up, p_up), phases(&down, 1.0 - p_up)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wiener_hopf_identity(
        m in hyper_model(),
        q in prop::sample::select(vec![0.5, 1.0, 10.0, 100.0]),
        thetas in prop::collection::vec(-20.0f64..20.0, 8),
    ) {
        let f = wh_factorize(&m, q).unwrap();
        for theta in thetas {
            let lhs = f.product_cf(theta);
            let rhs = q / (q + m.char_exponent(&[theta]).unwrap());
            prop_assert!((lhs - rhs).norm() < 1e-8, "theta={theta}: {lhs} vs {rhs}");
        }
        for side in [&f.sup, &f.inf] {
            prop_assert!((side.total_mass() - 1.0).abs() < 1e-12);
            prop_assert!(side.atom >= 0.0);
            prop_assert!(side.phases.iter().all(|p| p.rate > 0.0 && p.weight > 0.0));
        }
    }

    #[test]
    fn roots_interlace_with_poles(
        b in -1.0f64..1.0,
        sigma in 0.2f64..2.0,
        lam in 0.1f64..3.0,
        up in rate_set(3),
        down in rate_set(3),
        q in 0.1f64..50.0,
    ) {
        let m = LevyModel::hyperexponential(b, sigma, lam, phases(&up, 0.5), phases(&down, 0.5)).unwrap();
        let f = wh_factorize(&m, q).unwrap();
        for (roots, poles) in [(f.sup.rates(), &up), (f.inf.rates(), &down)] {
            // σ > 0: one root per pole plus one beyond the last pole.
            prop_assert_eq!(roots.len(), poles.len() + 1);
            for (j, r) in roots.iter().enumerate() {
                if j < poles.len() {
                    prop_assert!(*r < poles[j]);
                }
                if j > 0 {
                    prop_assert!(*r > poles[j - 1]);
                }
            }
        }
    }

    #[test]
    fn brownian_factors_scale(sigma in 0.1f64..5.0, q in 0.1f64..100.0) {
        let f = wh_factorize(&LevyModel::brownian(0.0, sigma).unwrap(), q).unwrap();
        let rate = (2.0 * q).sqrt() / sigma;
        prop_assert!((f.sup.rates()[0] - rate).abs() < 1e-10 * rate);
        prop_assert!((f.inf.rates()[0] - rate).abs() < 1e-10 * rate);
    }

    #[test]
    fn char_exponent_symmetries(m in hyper_model(), theta in -50.0f64..50.0) {
        let psi = m.char_exponent(&[theta]).unwrap();
        let mirror = m.char_exponent(&[-theta]).unwrap();
        prop_assert!(psi.re >= -1e-12);
        prop_assert!((psi - mirror.conj()).norm() < 1e-10 * (1.0 + psi.norm()));
        prop_assert!(m.char_exponent(&[0.0]).unwrap().norm() < 1e-14);
    }

    #[test]
    fn grids_increase(n in 1usize..200, t in 0.01f64..10.0, seed: u64) {
        let g = build_grid(n, t, &mut substream(seed, 1, 0)).unwrap();
        prop_assert_eq!(g.arrivals()[0], 0.0);
        prop_assert_eq!(g.arrivals().len(), n + 1);
        prop_assert!(g.arrivals().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tau_bounded_by_horizon(n in 1usize..200, t in 0.01f64..10.0, seed: u64) {
        let mut rng = substream(seed, 2, 0);
        let tau = sample_tau(n, t, &mut rng);
        prop_assert!(tau > 0.0 && tau <= t);
        let g = build_grid(n, t, &mut rng).unwrap();
        let gap = largest_gap(&g, t).unwrap();
        prop_assert!(gap > 0.0 && gap <= t);
    }

    #[test]
    fn affine_coefficient_telescopes(
        a in -3.0f64..3.0,
        y0 in -5.0f64..5.0,
        n in 1usize..64,
        seed: u64,
    ) {
        let p = SdeProblem::new(Coefficient::constant(a), vec![y0], 1.0, a.abs()).unwrap();
        let m = LevyModel::jump_diffusion(0.2, 0.7, 1.0, JumpLaw::symmetric_two_point(0.4)).unwrap();
        let mut rng = substream(seed, 3, 0);
        let tr = run_euler_poisson(&p, &m, n, &mut rng).unwrap();
        let mut y = y0;
        for i in 1..=n {
            y += a * tr.increment(i)[0];
            prop_assert_eq!(tr.state(i)[0], y);
        }
        let total = tr.increment_sum()[0];
        prop_assert!((tr.terminal()[0] - (y0 + a * total)).abs() <= 1e-12 * (1.0 + y0.abs() + (a * total).abs()));
    }

    #[test]
    fn coupled_chain_starts_at_y0(n in 1usize..32, y0 in -2.0f64..2.0, seed: u64) {
        let p = SdeProblem::new(Coefficient::sine(0.5, 0.3), vec![y0], 1.0, 0.8).unwrap();
        let m = LevyModel::brownian(0.1, 1.0).unwrap();
        let mut rng = substream(seed, 4, 0);
        let g = build_grid(n, 1.0, &mut rng).unwrap();
        let path = couple(g.arrivals(), 1.0, &[], &m, &mut rng).unwrap();
        let tr = run_chain(&p, path.grid_increments(), Some(g), StopRule::FixedN).unwrap();
        prop_assert_eq!(tr.state(0)[0], y0);
        prop_assert_eq!(tr.steps(), n);
    }

    #[test]
    fn rothe_preserves_constants(c in -10.0f64..10.0, sigma in 0.1f64..2.0, b in -1.0f64..1.0) {
        let p = SdeProblem::new(Coefficient::constant(1.0), vec![0.0], 1.0, 1.0).unwrap();
        let m = LevyModel::brownian(b, sigma).unwrap();
        let op = PideOperator::new(&p, &m, SpatialGrid::around(0.0, 0.05, 201).unwrap()).unwrap();
        for s in rothe_solve(&op, &TestFunction::Constant(c), 4, 1.0).unwrap() {
            prop_assert!(s.values.iter().all(|v| *v == c));
        }
    }

    #[test]
    fn rothe_maximum_principle(
        center in -1.0f64..1.0,
        width in 0.1f64..2.0,
        b in -3.0f64..3.0,
        sigma in 0.05f64..2.0,
    ) {
        let p = SdeProblem::new(Coefficient::constant(1.0), vec![0.0], 1.0, 1.0).unwrap();
        let m = LevyModel::brownian(b, sigma).unwrap();
        let op = PideOperator::new(&p, &m, SpatialGrid::around(0.0, 0.02, 301).unwrap()).unwrap();
        let f = TestFunction::Bump { center, width };
        for s in rothe_solve(&op, &f, 4, 1.0).unwrap() {
            prop_assert!(s.values.iter().all(|v| *v >= -1e-14 && *v <= 1.0 + 1e-14));
        }
    }

    #[test]
    fn model_descriptor_round_trips(m in hyper_model()) {
        let kv = m.to_kv().unwrap();
        let text = kv.to_string();
        let back = LevyModel::from_kv(&KvMap::parse(&text).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn kv_text_round_trips(entries in prop::collection::btree_map("[a-z]{1,6}(\\.[a-z]{1,6}){0,2}", "[a-z0-9.,-]{1,12}", 0..12)) {
        let mut kv = KvMap::new();
        for (k, v) in &entries {
            kv.set(k.clone(), v);
        }
        prop_assert_eq!(KvMap::parse(&kv.to_string()).unwrap(), kv);
    }

    #[test]
    fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
    }
}

#[test]
fn harmonic_mean_matches_exact_rationals() {
    let mut h = BigRational::from_integer(BigInt::from(0));
    for m in 1..=100u32 {
        h += BigRational::new(BigInt::from(1), BigInt::from(m));
        let exact = (&h / BigInt::from(m)).to_f64().unwrap();
        let got = harmonic_gap_mean(m as usize).unwrap();
        assert!((got - exact).abs() <= 1e-15 * exact, "m={m}: {got} vs {exact}");
    }
}
