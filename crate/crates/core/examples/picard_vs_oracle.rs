//! Becker–Döring fragmentation with `k = min(n, j)` from `e_1 + e_2`, solved by
//! the Picard engine in `w = n^2` and checked against the Runge–Kutta oracle
//! at the same output times.

use coagfrag::diagnostics::trajectory_distance;
use coagfrag::mild::{MildSolver, Problem, SolverConfig};
use coagfrag::oracle::{integrate_at, OracleConfig};
use coagfrag::{becker_doring_model, CoagulationKernel, TruncatedState, WeightSequence};

fn main() -> coagfrag::Result<()> {
    let n = 128;
    let problem = Problem {
        model: becker_doring_model(),
        kernel: CoagulationKernel::min(1.0),
        weight: WeightSequence::power(2.0)?,
        alpha: 0.0,
    };
    let mut u0 = TruncatedState::zeros(n);
    u0.u[0] = 1.0;
    u0.u[1] = 1.0;

    let mut solver = MildSolver::new(SolverConfig { n, ..Default::default() }, problem.clone(), 0.5)?;
    let picard = solver.solve(&u0)?;
    let oracle = integrate_at(
        &problem.model,
        &problem.kernel,
        solver.config().mode,
        &u0,
        &picard.times,
        &OracleConfig::default(),
    )?;

    let log = &picard.window_log;
    println!("case {}, c = {}, {} windows", solver.report().case, solver.coag_constant(), log.len());
    println!(
        "window length {:.3e}..{:.3e}, iterations <= {}, observed ratio <= {:.3e}",
        log.iter().map(|w| w.delta).fold(f64::INFINITY, f64::min),
        log.iter().map(|w| w.delta).fold(0.0, f64::max),
        log.iter().map(|w| w.picard_iterations).max().unwrap_or(0),
        log.iter().map(|w| w.contraction_ratio_observed).fold(0.0, f64::max),
    );
    let d = trajectory_distance(&picard, &oracle, solver.w_table())?;
    println!("sup_t |u_picard - u_oracle|_(n^2) = {d:.3e}");
    let (t, end) = picard.last().expect("non-empty trajectory");
    println!("at t = {t}: |u|_(n^2) = {:.6}, mass + leakage = {:.15}", solver.w_table().norm(&end.u), end.mass() + end.leakage_mass);
    Ok(())
}
