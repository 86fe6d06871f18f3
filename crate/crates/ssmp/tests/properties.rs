use proptest::prelude::*;

use ssmp::jump_sde::{SdeConfig, SdeModel};
use ssmp::lamperti::{lamperti_kiu_traced, lamperti_positive, KiuStage};
use ssmp::levy_sim::{exponential_functional_inverse, simulate_levy};
use ssmp::measures::{
    cramer_value, drift_coefficient, folded_triplet, laplace_exponent, laplace_exponent_quadrature, Density,
    JumpMeasureSpec, LevyTriplet, Quintuple,
};
use ssmp::path::fold_to_abs;
use ssmp::rng::path_stream;

fn pi_strategy() -> impl Strategy<Value = JumpMeasureSpec> {
    (
        prop::collection::vec((-3.0f64..-0.01, 0.0f64..2.0), 0..3),
        prop::option::of((0.1f64..2.0, 0.5f64..4.0)),
        prop::option::of((0.05f64..0.5, 0.2f64..1.2)),
    )
        .prop_map(|(atoms, exp, stable)| {
            let mut m = JumpMeasureSpec::zero();
            for (x, w) in atoms {
                m = m.with_atom(x, w);
            }
            if let Some((c, beta)) = exp {
                m = m.with_density(Density::exponential(c, beta));
            }
            if let Some((c, alpha)) = stable {
                m = m.with_density(Density::truncated_stable(c, alpha)).with_cutoff(1e-3);
            }
            m
        })
}

fn v_strategy() -> impl Strategy<Value = JumpMeasureSpec> {
    (
        prop::collection::vec((-1.0f64..-0.001, 0.0f64..2.0), 0..3),
        prop::option::of((0.1f64..1.0, -1.0f64..-0.5, 0.1f64..0.45)),
    )
        .prop_map(|(atoms, uni)| {
            let mut m = JumpMeasureSpec::zero();
            for (x, w) in atoms {
                m = m.with_atom(x, w);
            }
            if let Some((c, lo, width)) = uni {
                m = m.with_density(Density::uniform(c, lo, lo + width));
            }
            m
        })
}

fn triplet_strategy() -> impl Strategy<Value = LevyTriplet> {
    (-2.0f64..2.0, 0.0f64..3.0, pi_strategy(), 0.0f64..1.0)
        .prop_map(|(a, s2, pi, q)| LevyTriplet::new(a, s2, pi, q).unwrap())
}

fn quintuple_strategy() -> impl Strategy<Value = Quintuple> {
    (triplet_strategy(), v_strategy()).prop_map(|(t, v)| Quintuple::new(t, v).unwrap())
}

fn small_cfg(seed: u64) -> SdeConfig {
    SdeConfig { dt: 0.01, horizon: 1.0, n_paths: 1, seed, cutoff: 1e-2, record_jumps: true, ..SdeConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplace_exponent_is_convex(t in triplet_strategy()) {
        let h = 0.05;
        let psi: Vec<f64> = (0..=40).map(|k| laplace_exponent(&t, k as f64 * h).unwrap()).collect();
        for w in psi.windows(3) {
            let scale = w.iter().map(|v| v.abs()).fold(1.0, f64::max);
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9 * scale);
        }
    }

    #[test]
    fn closed_form_and_quadrature_exponents_agree(t in triplet_strategy(), lam in 0.0f64..2.0) {
        let a = laplace_exponent(&t, lam).unwrap();
        let b = laplace_exponent_quadrature(&t, lam).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn folded_exponent_reproduces_cramer_value(q in quintuple_strategy()) {
        let direct = cramer_value(&q).unwrap();
        let folded = laplace_exponent(&folded_triplet(&q).unwrap(), 1.0).unwrap();
        prop_assert!((direct - folded).abs() <= 1e-9 * direct.abs().max(1.0), "{direct} vs {folded}");
    }

    #[test]
    fn cramer_value_dominates_drift_coefficient(q in quintuple_strategy()) {
        // |u| - 1 >= u - 1 on [-1, 0)
        prop_assert!(cramer_value(&q).unwrap() >= drift_coefficient(&q).unwrap() - 1e-12);
    }

    #[test]
    fn time_change_is_monotone(t in triplet_strategy(), seed in any::<u64>()) {
        let p = simulate_levy(&t, 2.0, 0.01, &mut path_stream(seed, 0)).unwrap();
        let mut prev = 0.0;
        for k in 0..50 {
            let tau = exponential_functional_inverse(&p, k as f64 * 0.04).unwrap();
            prop_assert!(tau >= prev);
            prev = tau;
        }
    }

    #[test]
    fn sde_jumps_are_multiplicative_and_shrink(q in quintuple_strategy(), z in 0.2f64..3.0, seed in any::<u64>()) {
        let model = SdeModel::new(&q, &small_cfg(seed)).unwrap();
        let p = model.simulate(z, &mut path_stream(seed, 0)).unwrap();
        for j in &p.jumps {
            prop_assert!((j.after - j.before * j.factor).abs() <= 1e-12 * j.before.abs());
            prop_assert!(j.after.abs() <= j.before.abs());
        }
        if let Some(t0) = p.absorption_time {
            for (t, v) in p.times.iter().zip(&p.values) {
                if *t >= t0 {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn abs_solver_stays_non_negative(q in quintuple_strategy(), x0 in 0.0f64..2.0, seed in any::<u64>()) {
        let model = SdeModel::new(&q, &small_cfg(seed)).unwrap();
        let p = model.simulate_abs(x0, &mut path_stream(seed, 0)).unwrap();
        prop_assert!(p.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn kiu_jumps_are_multiplicative(q in quintuple_strategy(), z in 0.2f64..3.0, seed in any::<u64>()) {
        let stage = KiuStage::from_quintuple(&q).unwrap();
        let trace = lamperti_kiu_traced(&stage, &stage, z, 1.0, 0.01, true, &mut path_stream(seed, 0)).unwrap();
        for j in &trace.path.jumps {
            prop_assert!((j.after - j.before * j.factor).abs() <= 1e-9 * j.before.abs().max(1e-300));
        }
        let p = trace.path;
        prop_assert!(p.times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn lamperti_paths_stay_positive_until_absorbed(t in triplet_strategy(), z in 0.1f64..3.0, seed in any::<u64>()) {
        let p = lamperti_positive(&t, z, 1.0, 0.01, &mut path_stream(seed, 0)).unwrap();
        for (s, v) in p.times.iter().zip(&p.values) {
            match p.absorption_time {
                Some(t0) if *s >= t0 => prop_assert_eq!(*v, 0.0),
                _ => prop_assert!(*v > 0.0),
            }
        }
    }

    #[test]
    fn folding_is_idempotent(q in quintuple_strategy(), z in -2.0f64..2.0, seed in any::<u64>()) {
        prop_assume!(z != 0.0);
        let model = SdeModel::new(&q, &small_cfg(seed)).unwrap();
        let p = model.simulate(z, &mut path_stream(seed, 0)).unwrap();
        let once = fold_to_abs(&p);
        prop_assert!(once.values.iter().zip(&p.values).all(|(a, b)| *a == b.abs()));
        prop_assert_eq!(fold_to_abs(&once), once);
    }

    #[test]
    fn same_stream_same_path(q in quintuple_strategy(), seed in any::<u64>(), id in 0u64..1000) {
        let model = SdeModel::new(&q, &small_cfg(seed)).unwrap();
        let a = model.simulate_approx(0.0, &mut path_stream(seed, id));
        let b = model.simulate_approx(0.0, &mut path_stream(seed, id));
        prop_assert_eq!(a, b);
    }
}
