//! Pure coagulation with `k = 2` from monomers, where
//! `u_n(t) = t^(n-1) / (1 + t)^(n+1)`. Prints the Picard error against the
//! closed form for a few sizes.

use coagfrag::mild::{self, Problem, SolverConfig};
use coagfrag::{CoagulationKernel, FragmentationModel, TruncatedState, WeightSequence};

fn exact(n: usize, t: f64) -> f64 {
    if t == 0.0 {
        return if n == 1 { 1.0 } else { 0.0 };
    }
    ((n as f64 - 1.0) * t.ln() - (n as f64 + 1.0) * t.ln_1p()).exp()
}

fn main() -> coagfrag::Result<()> {
    let n = 256;
    let problem = Problem {
        model: FragmentationModel::none(),
        kernel: CoagulationKernel::constant(2.0),
        weight: WeightSequence::power(1.0)?,
        alpha: 0.0,
    };
    let cfg = SolverConfig { n, ..Default::default() };
    let tr = mild::solve(&cfg, &problem, &TruncatedState::unit(n, 1), 1.0)?;

    println!("{} windows, {} output times", tr.window_log.len(), tr.len());
    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "t", "err u_1", "err u_4", "err u_16", "M0 - 1/(1+t)");
    let every = (tr.len() / 12).max(1);
    for (i, (t, s)) in tr.times.iter().zip(&tr.states).enumerate() {
        if i % every != 0 && i + 1 != tr.len() {
            continue;
        }
        let e = |k: usize| (s.u[k - 1] - exact(k, *t)).abs();
        println!(
            "{t:>8.4} {:>12.2e} {:>12.2e} {:>12.2e} {:>12.2e}",
            e(1),
            e(4),
            e(16),
            s.number() - 1.0 / (1.0 + t)
        );
    }
    Ok(())
}
