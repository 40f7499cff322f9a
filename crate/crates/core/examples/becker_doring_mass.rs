//! Becker–Döring fragmentation with a constant coagulation kernel, started
//! from monomers. Both engines are run and the mass ledger
//! `M1(t) + leakage(t)` is printed against the initial mass.

use std::time::Instant;

use coagfrag::mild::{MildSolver, Problem, SolverConfig};
use coagfrag::oracle::{self, OracleConfig};
use coagfrag::{becker_doring_model, CoagulationKernel, TruncatedState, TruncationMode, WeightSequence};

fn main() -> coagfrag::Result<()> {
    let n = 256;
    let horizon = 1.0;
    let problem = Problem {
        model: becker_doring_model(),
        kernel: CoagulationKernel::constant(1.0),
        weight: WeightSequence::power(1.0)?,
        alpha: 0.0,
    };
    let cfg = SolverConfig {
        n,
        ..Default::default()
    };
    let u0 = TruncatedState::unit(n, 1);

    let clock = Instant::now();
    let mut solver = MildSolver::new(cfg, problem.clone(), horizon)?;
    let picard = solver.solve(&u0)?;
    let picard_secs = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let oracle = oracle::integrate_at(
        &problem.model,
        &problem.kernel,
        TruncationMode::ConservativeDrop,
        &u0,
        &picard.times,
        &OracleConfig::default(),
    )?;
    let oracle_secs = clock.elapsed().as_secs_f64();

    println!("case {}, c = {:.4}, windows {}", solver.report().case, solver.coag_constant(), picard.window_log.len());
    println!("{:>8} {:>22} {:>22}", "t", "picard M1+leak-1", "oracle M1+leak-1");
    let every = (picard.len() / 10).max(1);
    let mut worst = (0.0f64, 0.0f64);
    for (i, t) in picard.times.iter().enumerate() {
        let p = picard.states[i].mass() + picard.states[i].leakage_mass - 1.0;
        let o = oracle.states[i].mass() + oracle.states[i].leakage_mass - 1.0;
        worst = (worst.0.max(p.abs()), worst.1.max(o.abs()));
        if i % every == 0 || i + 1 == picard.len() {
            println!("{t:>8.4} {p:>22.3e} {o:>22.3e}");
        }
    }
    println!("worst defect: picard {:.3e}, oracle {:.3e}", worst.0, worst.1);
    println!("wall time: picard {picard_secs:.2}s, oracle {oracle_secs:.2}s");
    Ok(())
}
