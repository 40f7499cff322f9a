use coagfrag::diagnostics::{audit_contraction, audit_global_bound, audit_mass, truncation_sweep};
use coagfrag::mild::{self, MildSolver, Problem, SolverConfig};
use coagfrag::*;

fn problem(model: FragmentationModel, kernel: CoagulationKernel) -> Problem {
    Problem {
        model,
        kernel,
        weight: WeightSequence::power(1.0).unwrap(),
        alpha: 0.0,
    }
}

fn cfg(n: usize) -> SolverConfig {
    SolverConfig { n, ..Default::default() }
}

#[test]
fn pure_becker_doring_keeps_mass() {
    let p = problem(becker_doring_model(), CoagulationKernel::zero());
    let tr = mild::solve(&cfg(16), &p, &TruncatedState::unit(16, 5), 1.0).unwrap();
    for s in &tr.states {
        assert!((s.mass() - 5.0).abs() <= 1e-8);
    }
    assert!(audit_mass(&tr, &p.model, TruncationMode::ConservativeDrop, 1e-8).passed());
}

#[test]
fn number_moment_of_constant_kernel() {
    let p = problem(FragmentationModel::none(), CoagulationKernel::constant(2.0));
    let tr = mild::solve(&cfg(96), &p, &TruncatedState::unit(96, 1), 1.0).unwrap();
    assert_eq!(tr.last().unwrap().0, 1.0);
    for (t, s) in tr.times.iter().zip(&tr.states) {
        assert!((s.number() - 1.0 / (1.0 + t)).abs() <= 1e-6, "t = {t}");
    }
}

#[test]
fn nearby_starts_stay_within_factor_two_on_a_window() {
    let p = problem(becker_doring_model(), CoagulationKernel::constant(1.0));
    let mut solver = MildSolver::new(cfg(32), p, 1.0).unwrap();
    let a = TruncatedState::unit(32, 1);
    let mut b = a.clone();
    b.u[0] = 0.999;
    b.u[3] = 0.0002;
    let (delta, _) = solver.window_length(solver.state_norm(&a.u).max(solver.state_norm(&b.u))).unwrap();
    let wa = solver.picard_window(&a, 0.0, delta).unwrap();
    let wb = solver.picard_window(&b, 0.0, delta).unwrap();
    let w = solver.norm_table().clone();
    let d0 = w.norm(&a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect::<Vec<_>>());
    for (x, y) in wa.states.iter().zip(&wb.states) {
        let d = w.norm(&x.u.iter().zip(&y.u).map(|(p, q)| p - q).collect::<Vec<_>>());
        assert!(d <= 2.0 * d0, "{d} > 2 * {d0}");
    }
}

#[test]
fn removal_and_empty_dynamics_pass_the_mass_audit() {
    let removal = FragmentationModel::decay_only(Rates::Power {
        scale: 0.0,
        exponent: 1.0,
        monomer: 1.0,
    })
    .unwrap();
    let p = problem(removal.clone(), CoagulationKernel::zero());
    let tr = mild::solve(&cfg(4), &p, &TruncatedState::unit(4, 1), 1.0).unwrap();
    let (t, s) = tr.last().unwrap();
    assert!((s.mass() - (-t).exp()).abs() <= 1e-10);
    assert!(tr.states.windows(2).all(|w| w[1].mass() < w[0].mass()));
    assert!(audit_mass(&tr, &removal, TruncationMode::ConservativeDrop, 1e-8).passed());

    let empty = problem(FragmentationModel::none(), CoagulationKernel::zero());
    let u0 = TruncatedState::from_densities(vec![0.5, 0.25, 0.125]);
    let tr = mild::solve(&cfg(3), &empty, &u0, 2.0).unwrap();
    assert!(tr.states.iter().all(|s| s.u == u0.u));
    assert!(audit_mass(&tr, &empty.model, TruncationMode::ConservativeDrop, 1e-12).passed());
}

#[test]
fn global_bound_is_equality_at_time_zero() {
    let mut tr = trajectory::Trajectory::new(trajectory::EngineKind::Picard);
    tr.push(0.0, TruncatedState::unit(8, 2), None).unwrap();
    let rep = audit_global_bound(&tr, 2.0, 1.0, 0.0).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.checks[0].measured, 0.0);
}

#[test]
fn contraction_samples() {
    let p = problem(becker_doring_model(), CoagulationKernel::zero());
    let mut solver = MildSolver::new(cfg(16), p, 1.0).unwrap();
    let rep = audit_contraction(&mut solver, &TruncatedState::unit(16, 3), 20, 1).unwrap();
    assert_eq!(rep.checks[0].measured, 0.0);

    let p = problem(FragmentationModel::none(), CoagulationKernel::constant(2.0));
    let mut solver = MildSolver::new(cfg(32), p, 1.0).unwrap();
    let u = TruncatedState::from_densities({
        let mut v = vec![0.0; 32];
        v[0] = 0.45;
        v
    });
    let (_, r) = solver.window_length(0.45).unwrap();
    assert!(r < 1.0);
    let rep = audit_contraction(&mut solver, &u, 120, 2).unwrap();
    assert!(rep.passed(), "{:?}", rep.checks);
}

#[test]
fn sweep_of_pure_fragmentation_is_flat() {
    let p = problem(becker_doring_model(), CoagulationKernel::zero());
    let rep = truncation_sweep(&cfg(0), &p, |n| TruncatedState::unit(n, 5), 1.0, &[5, 8, 16]).unwrap();
    for e in &rep.entries {
        assert!(e.diff_to_next.unwrap_or(0.0) <= 1e-13, "{e:?}");
        assert_eq!(e.leakage, 0.0);
    }
    assert!(rep.note.contains("evidence"));
}

#[test]
fn sweep_of_constant_kernel_converges() {
    let p = problem(FragmentationModel::none(), CoagulationKernel::constant(2.0));
    let ns = [64, 128, 256];
    let rep = truncation_sweep(&cfg(0), &p, |n| TruncatedState::unit(n, 1), 1.0, &ns).unwrap();
    assert!(rep.cauchy_decrease, "{rep:?}");
    // Closed-form tail: 1 - Σ_{n<=64} n 2^{-(n+1)}.
    let kept: f64 = (1..=64).map(|n| n as f64 * 0.5f64.powi(n + 1)).sum();
    let leak = rep.entries[0].leakage;
    assert!((leak - (1.0 - kept)).abs() <= 1e-6, "leakage {leak}");
}
