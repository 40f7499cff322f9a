//! Reference integrator: Dormand–Prince 5(4) on the truncated ODE system, with
//! an optional Lawson transformation that integrates the diagonal `-a_n`
//! exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{CoagulationKernel, FragmentationModel};
use crate::operators::{apply_coagulation, apply_fragmentation, Rhs, TruncationMode};
use crate::state::TruncatedState;
use crate::trajectory::{EngineKind, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    #[default]
    Off,
    /// Stage values carry the exact factors `e^{-a_n c h}`.
    LawsonDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub splitting: Splitting,
    pub max_steps: usize,
    /// Uniform output points used by [`integrate`] (the final time is always included).
    pub outputs: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_step: f64::INFINITY,
            splitting: Splitting::Off,
            max_steps: 2_000_000,
            outputs: 100,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config("oracle rtol and atol must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Config("oracle max_step must be positive".into()));
        }
        Ok(())
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// `b - b̂`; the seventh entry multiplies the FSAL stage.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Statistics of one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = D y + f(t, y)` and returns `y` at each time in `t_out`.
///
/// `diag = Some(D)` switches on the Lawson form; `f` must then exclude the
/// diagonal part. Output times must be non-decreasing and `>= t0`.
pub fn dopri5<F>(
    mut f: F,
    diag: Option<&[f64]>,
    y0: &[f64],
    t0: f64,
    t_out: &[f64],
    cfg: &OracleConfig,
) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    let n = y0.len();
    if let Some(d) = diag {
        if d.len() != n {
            return Err(Error::Config("Lawson diagonal has the wrong length".into()));
        }
    }
    let mut out = Vec::with_capacity(t_out.len());
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    f(t, &y, &mut k[0]);
    let mut stage = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut h = initial_step(&y, &k[0], diag, t_out.last().copied().unwrap_or(t0) - t0, cfg);
    // e^{Δ h D} per distinct Δ, refreshed whenever h changes
    let mut factors: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut factor_h = f64::NAN;

    for &target in t_out {
        if target < t {
            return Err(Error::Precondition(format!("output time {target} precedes {t}")));
        }
        while t < target {
            if stats.accepted + stats.rejected >= cfg.max_steps {
                return Err(Error::Stiffness {
                    time: t,
                    hint: format!("step budget of {} exhausted; try splitting = lawson_diagonal", cfg.max_steps),
                });
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };
            if step < 1e-14 * t.abs().max(1.0) && !clipped {
                return Err(Error::Stiffness {
                    time: t,
                    hint: "step size underflow; try splitting = lawson_diagonal".into(),
                });
            }
            if let Some(d) = diag {
                if step != factor_h {
                    factors.clear();
                    factor_h = step;
                }
                for i in 0..7 {
                    for j in 0..=i {
                        let delta = if i == 6 { 1.0 - C[j] } else { C[i] - C[j] };
                        if !factors.iter().any(|(x, _)| *x == delta) {
                            factors.push((delta, d.iter().map(|a| (a * delta * step).exp()).collect()));
                        }
                    }
                }
            }
            let lookup = |delta: f64| -> Option<&[f64]> {
                factors.iter().find(|(x, _)| *x == delta).map(|(_, v)| v.as_slice())
            };
            for i in 1..7 {
                for m in 0..n {
                    let mut acc = match diag {
                        Some(_) => lookup(C[i]).unwrap()[m] * y[m],
                        None => y[m],
                    };
                    for j in 0..i {
                        let a = A[i][j];
                        if a == 0.0 {
                            continue;
                        }
                        let e = match diag {
                            Some(_) => lookup(C[i] - C[j]).unwrap()[m],
                            None => 1.0,
                        };
                        acc += step * a * e * k[j][m];
                    }
                    stage[m] = acc;
                }
                if i == 6 {
                    y1.copy_from_slice(&stage);
                }
                let (head, tail) = k.split_at_mut(i);
                let _ = head;
                f(t + C[i] * step, &stage, &mut tail[0]);
            }
            // error estimate
            let mut e_max: f64 = 0.0;
            for m in 0..n {
                let mut acc = 0.0;
                for j in 0..7 {
                    if E[j] == 0.0 {
                        continue;
                    }
                    let e = match diag {
                        Some(_) => lookup(1.0 - C[j]).unwrap()[m],
                        None => 1.0,
                    };
                    acc += E[j] * e * k[j][m];
                }
                err[m] = step * acc;
                let sc = cfg.atol + cfg.rtol * y[m].abs().max(y1[m].abs());
                e_max = e_max.max(err[m].abs() / sc);
            }
            if !e_max.is_finite() {
                stats.rejected += 1;
                h = step * 0.2;
                continue;
            }
            if e_max <= 1.0 {
                stats.accepted += 1;
                t = if clipped { target } else { t + step };
                std::mem::swap(&mut y, &mut y1);
                k.swap(0, 6);
                let grow = if e_max == 0.0 { 5.0 } else { (0.9 * e_max.powf(-0.2)).clamp(0.2, 5.0) };
                if !clipped || step * grow > h {
                    h = (step * grow).min(cfg.max_step);
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * e_max.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn initial_step(y: &[f64], dy: &[f64], diag: Option<&[f64]>, span: f64, cfg: &OracleConfig) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (i, (yi, fi)) in y.iter().zip(dy).enumerate() {
        let sc = cfg.atol + cfg.rtol * yi.abs();
        let lin = diag.map_or(0.0, |d| d[i] * yi);
        d0 = d0.max(yi.abs() / sc);
        d1 = d1.max((fi + lin).abs() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let span = if span > 0.0 { span } else { 1.0 };
    h.min(span).min(cfg.max_step).max(1e-12 * span)
}

/// Integrates the truncated system at the given output times. The first
/// output must be `>= 0`; `u0` is the state at `t = 0`.
pub fn integrate_at(
    model: &FragmentationModel,
    kernel: &CoagulationKernel,
    mode: TruncationMode,
    u0: &TruncatedState,
    times: &[f64],
    cfg: &OracleConfig,
) -> Result<Trajectory> {
    if u0.u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("initial state has non-finite entries".into()));
    }
    let n = u0.len();
    let rhs = Rhs::new(model, kernel, n, mode);
    check_rhs(&rhs, model, kernel, mode, u0)?;

    let mut y0 = u0.u.clone();
    y0.push(u0.leakage_mass);
    let mut scratch = vec![0.0; n];
    let diag: Option<Vec<f64>> = match cfg.splitting {
        Splitting::Off => None,
        Splitting::LawsonDiagonal => {
            let mut d = rhs.frag.diag().to_vec();
            d.push(0.0);
            Some(d)
        }
    };
    let lawson = diag.is_some();
    let f = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (u, du) = (&y[..n], &mut dy[..n]);
        if lawson {
            rhs.frag.apply_offdiag_into(u, du);
        } else {
            rhs.frag.apply_into(u, du);
        }
        let leak = rhs.coag.apply_into(t, u, &mut scratch);
        for (d, s) in du.iter_mut().zip(&scratch) {
            *d += s;
        }
        dy[n] = leak;
    };
    let (ys, _) = dopri5(f, diag.as_deref(), &y0, 0.0, times, cfg)?;
    let mut traj = Trajectory::new(EngineKind::Oracle);
    for (&t, mut y) in times.iter().zip(ys) {
        let leak = y.pop().unwrap_or(0.0);
        let state = TruncatedState { u: y, leakage_mass: leak };
        if traj.times.last() == Some(&t) {
            continue;
        }
        traj.push(t, state, None)?;
    }
    Ok(traj)
}

/// Integrates on `[0, horizon]` with `cfg.outputs` uniform output intervals.
pub fn integrate(
    model: &FragmentationModel,
    kernel: &CoagulationKernel,
    mode: TruncationMode,
    u0: &TruncatedState,
    horizon: f64,
    cfg: &OracleConfig,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let m = cfg.outputs.max(1);
    let times: Vec<f64> = (0..=m).map(|i| if i == m { horizon } else { horizon * i as f64 / m as f64 }).collect();
    integrate_at(model, kernel, mode, u0, &times, cfg)
}

/// The shared right-hand side must agree bit for bit with the free operator
/// functions on the initial state.
fn check_rhs(
    rhs: &Rhs,
    model: &FragmentationModel,
    kernel: &CoagulationKernel,
    mode: TruncationMode,
    u0: &TruncatedState,
) -> Result<()> {
    let n = u0.len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    rhs.frag.apply_into(&u0.u, &mut a);
    let leak_a = rhs.coag.apply_into(0.0, &u0.u, &mut b);
    let fa = apply_fragmentation(model, u0);
    let (kb, leak_b) = apply_coagulation(kernel, 0.0, u0, mode);
    let same = a.iter().zip(&fa).all(|(x, y)| x.to_bits() == y.to_bits())
        && b.iter().zip(&kb).all(|(x, y)| x.to_bits() == y.to_bits())
        && leak_a.to_bits() == leak_b.to_bits();
    if same {
        Ok(())
    } else {
        Err(Error::Precondition("oracle right-hand side differs from the operator module".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::Rates;

    fn decay_model() -> FragmentationModel {
        FragmentationModel::decay_only(Rates::Power {
            scale: 1.0,
            exponent: 1.0,
            monomer: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn linear_decay() {
        let u0 = TruncatedState::from_densities(vec![1.0, 1.0]);
        for splitting in [Splitting::Off, Splitting::LawsonDiagonal] {
            let cfg = OracleConfig {
                splitting,
                ..Default::default()
            };
            let tr = integrate(&decay_model(), &CoagulationKernel::zero(), TruncationMode::ConservativeDrop, &u0, 1.0, &cfg)
                .unwrap();
            let (_, u) = tr.last().unwrap();
            assert!((u.u[0] - (-1f64).exp()).abs() < 1e-10);
            assert!((u.u[1] - (-2f64).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn lawson_decay_is_exact() {
        let u0 = TruncatedState::from_densities(vec![1.0, 1.0]);
        let cfg = OracleConfig {
            splitting: Splitting::LawsonDiagonal,
            ..Default::default()
        };
        let tr = integrate_at(&decay_model(), &CoagulationKernel::zero(), TruncationMode::ConservativeDrop, &u0, &[1.0], &cfg)
            .unwrap();
        assert!((tr.states[0].u[1] - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn constant_kernel_closed_form() {
        let mut u0 = TruncatedState::zeros(64);
        u0.u[0] = 1.0;
        let tr = integrate_at(
            &FragmentationModel::none(),
            &CoagulationKernel::constant(2.0),
            TruncationMode::ConservativeDrop,
            &u0,
            &[1.0],
            &OracleConfig::default(),
        )
        .unwrap();
        for n in 1..=30 {
            let exact = 0.5f64.powi(n as i32 + 1);
            assert!((tr.states[0].u[n - 1] - exact).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn stiff_problem_reports_underflow_budget() {
        let rates = Rates::Power {
            scale: 1e9,
            exponent: 1.0,
            monomer: 1e9,
        };
        let m = FragmentationModel::decay_only(rates).unwrap();
        let cfg = OracleConfig {
            max_steps: 50,
            ..Default::default()
        };
        let r = integrate_at(&m, &CoagulationKernel::zero(), TruncationMode::ConservativeDrop, &TruncatedState::unit(3, 3), &[1.0], &cfg);
        assert!(matches!(r, Err(Error::Stiffness { .. })));
        let cfg = OracleConfig {
            splitting: Splitting::LawsonDiagonal,
            max_steps: 50,
            ..Default::default()
        };
        assert!(integrate_at(&m, &CoagulationKernel::zero(), TruncationMode::ConservativeDrop, &TruncatedState::unit(3, 3), &[1.0], &cfg)
            .is_ok());
    }

    #[test]
    fn self_convergence_order() {
        let model = crate::kinetics::becker_doring_model();
        let kernel = CoagulationKernel::constant(1.0);
        let mut u0 = TruncatedState::zeros(24);
        u0.u[0] = 1.0;
        let run = |rtol: f64| {
            let cfg = OracleConfig {
                rtol,
                atol: rtol * 1e-6,
                ..Default::default()
            };
            integrate_at(&model, &kernel, TruncationMode::ConservativeDrop, &u0, &[1.0], &cfg).unwrap().states[0].u.clone()
        };
        let reference = run(1e-13);
        let e = |u: Vec<f64>| u.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let e1 = e(run(1e-6));
        let e2 = e(run(1e-6 / 32.0));
        // a fifth-order method gains a factor 32 per 32x tolerance on error per unit step,
        // allow one decade of slack
        assert!(e2 < e1 / 3.2, "e1={e1:e} e2={e2:e}");
    }
}
