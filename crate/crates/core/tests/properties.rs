//! Property tests of the operator bounds the solver's step rule relies on.

use coagfrag::kinetics::coag_size_constant;
use coagfrag::semigroup::{SemigroupEvaluator, SemigroupMethod};
use coagfrag::*;
use proptest::prelude::*;

fn kernel(choice: usize, scale: f64) -> CoagulationKernel {
    let shape = match choice {
        0 => KernelShape::Constant,
        1 => KernelShape::Min,
        2 => KernelShape::ProductCapped { cap: 20.0 },
        _ => KernelShape::Sum,
    };
    CoagulationKernel::new(shape, scale, TimeProfile::Constant).unwrap()
}

/// `c_J` with `J = 2N`, so every pair `n, j <= N` is covered.
fn bilinear_constant(k: &CoagulationKernel, w: &WeightTable, n: usize) -> f64 {
    coag_size_constant(k, w, w, 2 * n).unwrap().value
}

fn state() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 2..32)
}

fn mode(closed: bool) -> TruncationMode {
    if closed {
        TruncationMode::Closed
    } else {
        TruncationMode::ConservativeDrop
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_bound(f in state(), choice in 0usize..4, p in 1.0f64..3.0, closed: bool) {
        let n = f.len();
        let w = WeightSequence::power(p).unwrap().table(2 * n).unwrap();
        let k = kernel(choice, 1.0);
        let c = bilinear_constant(&k, &w, n);
        let (kf, _) = apply_coagulation(&k, 0.0, &TruncatedState::from_densities(f.clone()), mode(closed));
        let wn = w.norm(&f);
        prop_assert!(w.norm(&kf) <= 1.5 * c * wn * wn * (1.0 + 1e-12));
    }

    #[test]
    fn lipschitz_on_the_ball(f in state(), g_seed in state(), choice in 0usize..4, r in 0.1f64..5.0) {
        let n = f.len();
        let g: Vec<f64> = (0..n).map(|i| g_seed[i % g_seed.len()] - 0.5).collect();
        let w = WeightSequence::power(1.0).unwrap().table(2 * n).unwrap();
        let k = kernel(choice, 1.0);
        let c = bilinear_constant(&k, &w, n);
        let fit = |v: Vec<f64>| {
            let s = r / w.norm(&v).max(1e-300);
            v.into_iter().map(|x| x * s.min(1.0)).collect::<Vec<f64>>()
        };
        let (f, g) = (fit(f), fit(g));
        let (kf, _) = apply_coagulation(&k, 0.0, &TruncatedState::from_densities(f.clone()), TruncationMode::ConservativeDrop);
        let (kg, _) = apply_coagulation(&k, 0.0, &TruncatedState::from_densities(g.clone()), TruncationMode::ConservativeDrop);
        let dk: Vec<f64> = kf.iter().zip(&kg).map(|(a, b)| a - b).collect();
        let d: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
        let lip = lipschitz_constant(r, c).unwrap();
        prop_assert!(w.norm(&dk) <= lip * w.norm(&d) * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn moment_identity_in_closed_mode(f in state(), choice in 0usize..4, q in 0.0f64..3.0) {
        let n = f.len();
        let k = kernel(choice, 0.7);
        let st = TruncatedState::from_densities(f);
        let omega = MomentFunctional::Power(q);
        let direct = coag_moment(&omega, &k, 0.0, &st).unwrap();
        let (kf, leak) = apply_coagulation(&k, 0.0, &st, TruncationMode::Closed);
        let via = omega.eval(&kf).unwrap();
        let scale: f64 = kf.iter().enumerate().map(|(i, x)| omega.omega(i + 1) * x.abs()).sum::<f64>().max(1.0);
        prop_assert_eq!(leak, 0.0);
        prop_assert!((direct - via).abs() <= 1e-12 * scale * n as f64, "{} vs {}", direct, via);
    }

    #[test]
    fn leakage_balances_mass(f in state(), choice in 0usize..4) {
        let k = kernel(choice, 1.0);
        let st = TruncatedState::from_densities(f);
        let (kf, leak) = apply_coagulation(&k, 0.0, &st, TruncationMode::ConservativeDrop);
        let phi1: f64 = kf.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
        let scale: f64 = kf.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x.abs()).sum::<f64>() + leak;
        prop_assert!(leak >= 0.0);
        prop_assert!((phi1 + leak).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn shifted_nonlinearity_is_positive(f in state(), choice in 0usize..4, r in 0.1f64..4.0, p in 1.0f64..2.5) {
        let n = f.len();
        let w = WeightSequence::power(p).unwrap().table(2 * n).unwrap();
        let k = kernel(choice, 1.0);
        let c = bilinear_constant(&k, &w, n);
        let s = r / w.norm(&f).max(1e-300);
        let f: Vec<f64> = f.into_iter().map(|x| x * s.min(1.0)).collect();
        let (kf, _) = apply_coagulation(&k, 0.0, &TruncatedState::from_densities(f.clone()), TruncationMode::ConservativeDrop);
        let gamma = c * r;
        for (i, (a, b)) in kf.iter().zip(&f).enumerate() {
            prop_assert!(a + gamma * b >= -1e-12 * gamma * b, "component {}: {} + {}", i + 1, a, gamma * b);
        }
    }

    #[test]
    fn semigroup_keeps_the_cone(f in state(), t in 0.0f64..2.0, nu in 0.0f64..3.0, exponent in 0.0f64..2.0) {
        let n = f.len();
        let model = powerlaw_model(nu, Rates::Power { scale: 1.0, exponent, monomer: 0.0 }).unwrap();
        let w = WeightSequence::power(1.0).unwrap().table(n).unwrap();
        let ev = SemigroupEvaluator::new(&model, n, w.clone(), 1e-12, SemigroupMethod::TriangularRecursive).unwrap();
        let st = TruncatedState::from_densities(f);
        let out = ev.apply(&st, t).unwrap();
        let norm = w.norm(&st.u);
        prop_assert!(out.min_component() >= -1e-12 * norm);
        prop_assert!((out.mass() - st.mass()).abs() <= 1e-11 * norm);
    }
}
