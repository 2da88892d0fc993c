use garch_omnibus::model::{variance_gradient, variance_path, GarchOrder, InitPolicy, ParamVector};
use garch_omnibus::qmle::{qmle_loss, qmle_loss_gradient};
use garch_omnibus::{rng, simulate_garch, InnovationSource};
use proptest::prelude::*;

fn init_strategy() -> impl Strategy<Value = InitPolicy> {
    prop_oneof![
        Just(InitPolicy::ZeroTail),
        Just(InitPolicy::SampleVariance),
        Just(InitPolicy::Unconditional)
    ]
}

/// Random valid parameters of a random order up to (2,2), bounded away from
/// zero so central differences stay inside the parameter space.
fn phi_strategy() -> impl Strategy<Value = ParamVector> {
    (1usize..=2, 0usize..=2)
        .prop_flat_map(|(p1, p2)| {
            (
                0.05f64..2.0,
                prop::collection::vec(0.02f64..0.4, p1),
                prop::collection::vec(0.02f64..0.45, p2),
            )
        })
        .prop_map(|(w, a, b)| ParamVector::new(w, a, b).unwrap())
}

fn data_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 30..150)
}

fn bumped(phi: &ParamVector, r: usize, delta: f64) -> ParamVector {
    let mut v = phi.to_vec();
    v[r] += delta;
    ParamVector::from_slice(phi.order(), &v).unwrap()
}

fn step(x: f64) -> f64 {
    1e-5 * x.abs().max(1e-2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn variance_derivatives_match_central_differences(y in data_strategy(), phi in phi_strategy(), init in init_strategy()) {
        let g = variance_gradient(&y, &phi, &init).unwrap();
        let d = phi.order().n_params();
        prop_assert_eq!(g.shape(), (y.len(), d));
        for r in 0..d {
            let e = step(phi.to_vec()[r]);
            let hp = variance_path(&y, &bumped(&phi, r, e), &init).unwrap().h;
            let hm = variance_path(&y, &bumped(&phi, r, -e), &init).unwrap().h;
            let fd: Vec<f64> = hp.iter().zip(&hm).map(|(a, b)| (a - b) / (2.0 * e)).collect();
            let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
            let err = (0..y.len()).fold(0.0f64, |m, i| m.max((g[(i, r)] - fd[i]).abs()));
            prop_assert!(err / scale < 1e-6, "param {} rel err {}", r, err / scale);
        }
    }

    #[test]
    fn loss_gradient_matches_central_differences(y in data_strategy(), phi in phi_strategy(), init in init_strategy()) {
        let eval = qmle_loss_gradient(&y, &phi, &init).unwrap();
        let grad = eval.gradient.unwrap();
        prop_assert!((eval.value - qmle_loss(&y, &phi, &init).unwrap()).abs() <= 1e-12 * eval.value.abs().max(1.0));
        let fd: Vec<f64> = (0..grad.len())
            .map(|r| {
                let e = step(phi.to_vec()[r]);
                let fp = qmle_loss(&y, &bumped(&phi, r, e), &init).unwrap();
                let fm = qmle_loss(&y, &bumped(&phi, r, -e), &init).unwrap();
                (fp - fm) / (2.0 * e)
            })
            .collect();
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
        let err = grad.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(err / scale < 1e-5, "rel err {}", err / scale);
    }

    #[test]
    fn arch_paths_forget_initialization(y in data_strategy(), w in 0.05f64..2.0, a in prop::collection::vec(0.0f64..0.5, 1..=3)) {
        let p1 = a.len();
        let phi = ParamVector::new(w, a, vec![]).unwrap();
        let h0 = variance_path(&y, &phi, &InitPolicy::ZeroTail).unwrap().h;
        let h1 = variance_path(&y, &phi, &InitPolicy::SampleVariance).unwrap().h;
        prop_assert_eq!(&h0[p1..], &h1[p1..]);
    }

    #[test]
    fn initialization_effect_decays_geometrically(seed in 0u64..1000, a in 0.05f64..0.3, b in 0.3f64..0.9) {
        prop_assume!(a + b < 0.99);
        let phi = ParamVector::new(0.1, vec![a], vec![b]).unwrap();
        let mut src = InnovationSource::standard_normal(rng::stream(seed, 9, 9, 9));
        let y = simulate_garch(&phi, 300, &mut src, &InitPolicy::Unconditional).unwrap().y;
        let ha = variance_path(&y, &phi, &InitPolicy::ZeroTail).unwrap().h;
        let hb = variance_path(&y, &phi, &InitPolicy::SampleVariance).unwrap().h;
        // For GARCH(1,1) the gap is exactly beta^(i-1) times the first gap.
        let c = (ha[0] - hb[0]).abs();
        let ulp = 8.0 * f64::EPSILON * ha.iter().fold(0.0, |m: f64, h| m.max(*h));
        for m in 0..y.len() {
            let tail = (m..y.len()).map(|i| (ha[i] - hb[i]).abs()).fold(0.0, f64::max);
            prop_assert!(tail <= c * b.powi(m as i32) * (1.0 + 1e-9) + ulp);
        }
    }
}

#[test]
fn omega_derivative_tends_to_geometric_sum() {
    let phi = ParamVector::new(0.1, vec![0.2], vec![0.7]).unwrap();
    let mut src = InnovationSource::normal_from_seed(5);
    let y = simulate_garch(&phi, 400, &mut src, &InitPolicy::ZeroTail)
        .unwrap()
        .y;
    let g = variance_gradient(&y, &phi, &InitPolicy::ZeroTail).unwrap();
    let last = g[(y.len() - 1, 0)];
    assert!((last - 1.0 / (1.0 - 0.7)).abs() < 1e-10, "{last}");
}

#[test]
fn generated_variance_matches_filter() {
    let order = GarchOrder::new(2, 2).unwrap();
    let phi = ParamVector::from_slice(order, &[0.05, 0.1, 0.05, 0.4, 0.3]).unwrap();
    for init in [
        InitPolicy::ZeroTail,
        InitPolicy::SampleVariance,
        InitPolicy::Unconditional,
    ] {
        let mut src = InnovationSource::normal_from_seed(11);
        let p = simulate_garch(&phi, 500, &mut src, &init).unwrap();
        if init == InitPolicy::ZeroTail {
            let h = variance_path(&p.y, &phi, &init).unwrap().h;
            assert_eq!(h, p.h_true);
        }
        assert!(p.h_true.iter().all(|h| *h > 0.0));
    }
}
