//! How the state at `T = 1` depends on the truncation size for `k = 2`.
//! Successive differences shrink geometrically with the closed-form tail.

use coagfrag::diagnostics::truncation_sweep;
use coagfrag::mild::{Problem, SolverConfig};
use coagfrag::{CoagulationKernel, FragmentationModel, TruncatedState, WeightSequence};

fn main() -> coagfrag::Result<()> {
    let problem = Problem {
        model: FragmentationModel::none(),
        kernel: CoagulationKernel::constant(2.0),
        weight: WeightSequence::power(1.0)?,
        alpha: 0.0,
    };
    let rep = truncation_sweep(&SolverConfig::default(), &problem, |n| TruncatedState::unit(n, 1), 1.0, &[8, 16, 32, 64])?;
    for e in &rep.entries {
        let tail = 1.0 - (1..=e.n).map(|k| k as f64 * 0.5f64.powi(k as i32 + 1)).sum::<f64>();
        println!(
            "N = {:>3}  leakage {:.10}  closed-form tail {:.10}  next diff {}",
            e.n,
            e.leakage,
            tail,
            e.diff_to_next.map_or("-".to_string(), |d| format!("{d:.3e}"))
        );
    }
    println!("{} ({})", if rep.cauchy_decrease { "decreasing" } else { "not decreasing" }, rep.note);
    Ok(())
}
