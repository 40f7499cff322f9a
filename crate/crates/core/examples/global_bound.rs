//! Growth of `|u(t)|_(n^p)` under `k = min(n, j) <= n + j` with Becker–Döring
//! fragmentation, against `|u0| exp(c_p φ₁(u0) t)` for `p = 2` and `p = 3`.

use coagfrag::diagnostics::{audit_global_bound, c_p};
use coagfrag::mild::{self, Problem, SolverConfig};
use coagfrag::{becker_doring_model, CoagulationKernel, TruncatedState, WeightSequence};

fn main() -> coagfrag::Result<()> {
    let n = 128;
    let u0 = TruncatedState::unit(n, 1);
    for p in [2.0, 3.0] {
        let problem = Problem {
            model: becker_doring_model(),
            kernel: CoagulationKernel::min(1.0),
            weight: WeightSequence::power(p)?,
            alpha: 0.0,
        };
        let tr = mild::solve(&SolverConfig { n, ..Default::default() }, &problem, &u0, 1.0)?;
        let w = problem.weight.table(n)?;
        let cp = c_p(p)?;
        println!("p = {p}, c_p = {cp}");
        let every = (tr.len() / 8).max(1);
        for (i, (t, s)) in tr.times.iter().zip(&tr.states).enumerate() {
            if i % every == 0 || i + 1 == tr.len() {
                println!("  t = {t:.3}  |u| = {:>10.6}  bound = {:>10.4}", w.norm(&s.u), (cp * t).exp());
            }
        }
        let rep = audit_global_bound(&tr, p, 1.0, 1e-8)?;
        println!("  audit: {}", if rep.passed() { "pass" } else { "FAIL" });
    }
    Ok(())
}
