//! Mild-solution solver: windowed Picard iteration of the Duhamel map
//!
//! ```text
//! (Q v)(t) = S(t - t0) u0 + ∫_{t0}^{t} S(t - s) K(s, v(s)) ds
//! ```
//!
//! on windows short enough for `Q` to be a ½-contraction on the ball of
//! radius `r`. With `M̂ ≡ 1`, `η(d) = d` and `N ≡ 0` the step rule reduces to
//! `δ = ½ min{τ, 1/(2L)}`, `L = 3rc`.
//!
//! Within a window, `v` is represented by its values on `M + 1` uniform nodes.
//! The integrand is interpolated by degree-8 Lagrange polynomials on blocks
//! of eight subintervals and integrated against exact propagators at Gauss
//! points, so a sweep costs `M` coagulation evaluations and `(q + 1) M`
//! propagator applications.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{classify_assumptions, AssumptionCase, AssumptionReport, CoagulationKernel, FragmentationModel};
use crate::operators::{lipschitz_constant, CoagOperator, TruncationMode};
use crate::quad::gauss_legendre;
use crate::semigroup::{Propagator, SemigroupEvaluator, SemigroupMethod};
use crate::state::TruncatedState;
use crate::trajectory::{Blowup, EngineKind, Trajectory, WindowRecord};
use crate::weights::{TildeWeight, WeightSequence, WeightTable};

/// Subintervals per interpolation block.
const BLOCK: usize = 8;
/// Radii are rounded up to the grid `2^{k/8}` so that window lengths and
/// propagators repeat between windows.
const RADIUS_LEVELS_PER_OCTAVE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaShift {
    Off,
    /// `γ = c r`, the smallest shift that makes `K + γH` positive on the ball.
    #[default]
    Auto,
    Manual(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSpace {
    /// `‖·‖_w`, case CI.
    W,
    /// `‖·‖_w̃`, case CII.
    WTilde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub n: usize,
    pub mode: TruncationMode,
    pub tol_picard: f64,
    pub tol_semigroup: f64,
    /// Relative change of the window end state tolerated when `M` is doubled.
    pub tol_refine: f64,
    /// `r = max(2 C safety, r_floor)`.
    pub safety: f64,
    pub r_floor: f64,
    pub gamma_shift: GammaShift,
    pub delta_min: f64,
    pub max_windows: usize,
    pub max_picard_iters: usize,
    /// Blow-up is declared once `‖u‖ > norm_cap_factor · ‖ů‖`.
    pub norm_cap_factor: f64,
    /// `None` follows the case: `w` for CI, `w̃` for CII.
    pub norm_space: Option<NormSpace>,
    pub subintervals: usize,
    pub max_subintervals: usize,
    pub gauss_points: usize,
    pub refine: bool,
    pub semigroup_method: SemigroupMethod,
    /// Classification range `J`; `None` means `2N`.
    pub j_classify: Option<usize>,
    pub t_grid_points: usize,
    /// Replaces the grid estimate `c_J` (e.g. by a closed-form constant).
    pub coag_constant: Option<f64>,
    /// Run even when the assumptions are unverified.
    pub force: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 64,
            mode: TruncationMode::ConservativeDrop,
            tol_picard: 1e-12,
            tol_semigroup: 1e-12,
            tol_refine: 1e-10,
            safety: 1.01,
            r_floor: 1e-12,
            gamma_shift: GammaShift::Auto,
            delta_min: 1e-10,
            max_windows: 1_000_000,
            max_picard_iters: 200,
            norm_cap_factor: 1e12,
            norm_space: None,
            subintervals: 8,
            max_subintervals: 128,
            gauss_points: 5,
            refine: true,
            semigroup_method: SemigroupMethod::TriangularRecursive,
            j_classify: None,
            t_grid_points: 33,
            coag_constant: None,
            force: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("truncation size N must be at least 1".into()));
        }
        if !(self.safety >= 1.01) {
            return Err(Error::Config(format!("radius safety factor {} must be >= 1.01", self.safety)));
        }
        if !(self.delta_min > 0.0) {
            return Err(Error::Config("delta_min must be positive".into()));
        }
        if !(self.tol_picard > 0.0 && self.tol_semigroup > 0.0 && self.tol_refine > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.subintervals == 0 || (self.subintervals > BLOCK && self.subintervals % BLOCK != 0) {
            return Err(Error::Config(format!(
                "subintervals must be in 1..={BLOCK} or a multiple of {BLOCK}, got {}",
                self.subintervals
            )));
        }
        if self.gauss_points == 0 || self.t_grid_points == 0 {
            return Err(Error::Config("gauss_points and t_grid_points must be positive".into()));
        }
        if let GammaShift::Manual(g) = self.gamma_shift {
            if !(g >= 0.0) {
                return Err(Error::Config("manual gamma shift must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Model, kernel and weight of one run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: FragmentationModel,
    pub kernel: CoagulationKernel,
    pub weight: WeightSequence,
    pub alpha: f64,
}

/// `δ = ½ min{τ, 1/(2L)}` with `L = 3rc`; requires `r > 2C`.
///
/// `c = 0` (no coagulation) gives `δ = τ/2`.
pub fn step_delta(c_norm: f64, r: f64, tau: f64, c: f64) -> Result<f64> {
    if !(r > 2.0 * c_norm) {
        return Err(Error::Precondition(format!("radius r = {r} must exceed 2C = {}", 2.0 * c_norm)));
    }
    if !(tau > 0.0) || !(c >= 0.0) {
        return Err(Error::Domain(format!("step rule needs tau > 0 and c >= 0 (tau = {tau}, c = {c})")));
    }
    if c == 0.0 {
        return Ok(0.5 * tau);
    }
    let l = lipschitz_constant(r, c)?;
    Ok(0.5 * tau.min(1.0 / (2.0 * l)))
}

/// Fixed point of one window on its node grid.
#[derive(Debug, Clone)]
pub struct WindowOutcome {
    pub times: Vec<f64>,
    pub states: Vec<TruncatedState>,
    pub iterations: usize,
    pub observed_ratio: f64,
    pub subintervals: usize,
    pub radius: f64,
    pub gamma: f64,
}

impl WindowOutcome {
    pub fn end(&self) -> &TruncatedState {
        self.states.last().expect("window has nodes")
    }
}

/// Propagators and interpolation weights of one window layout.
struct Plan {
    m: usize,
    block: usize,
    h: f64,
    step: Arc<Propagator>,
    at_gauss: Vec<Arc<Propagator>>,
    /// `lagrange[i][g][k]`: weight of node `k` of the block at Gauss point `g` of subinterval `i`.
    lagrange: Vec<Vec<Vec<f64>>>,
}

/// Solver state for one problem and horizon. Not shareable: it owns the
/// propagator cache.
pub struct MildSolver {
    cfg: SolverConfig,
    problem: Problem,
    horizon: f64,
    report: AssumptionReport,
    c: f64,
    norm_space: NormSpace,
    norm: WeightTable,
    w: WeightTable,
    w_tilde: WeightTable,
    h_factor: Vec<f64>,
    coag: CoagOperator,
    base: SemigroupEvaluator,
    shifted: HashMap<u64, SemigroupEvaluator>,
    props: HashMap<(u64, u64), Arc<Propagator>>,
    gauss: (Vec<f64>, Vec<f64>),
    m: usize,
}

impl MildSolver {
    pub fn new(cfg: SolverConfig, problem: Problem, horizon: f64) -> Result<Self> {
        cfg.validate()?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        let n = cfg.n;
        let j = cfg.j_classify.unwrap_or(2 * n).max(2);
        let pts = cfg.t_grid_points;
        let grid: Vec<f64> = (0..pts)
            .map(|i| if pts == 1 { 0.0 } else { horizon * i as f64 / (pts - 1) as f64 })
            .collect();
        let report = classify_assumptions(&problem.model, &problem.kernel, &problem.weight, problem.alpha, j, &grid)?;
        if report.case == AssumptionCase::Unverified && !cfg.force {
            return Err(Error::Unverified(report.reasons.join("; ")));
        }
        let c = cfg.coag_constant.unwrap_or(report.coag_constant_c);
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Domain(format!("coagulation constant {c} is not usable")));
        }
        let norm_space = cfg.norm_space.unwrap_or(match report.case {
            AssumptionCase::CII => NormSpace::WTilde,
            _ if problem.alpha > 0.0 => NormSpace::WTilde,
            _ => NormSpace::W,
        });
        let tilde = TildeWeight::new(problem.weight.clone(), problem.alpha, problem.model.rates.clone())?;
        let w = problem.weight.table(n)?;
        let w_tilde = tilde.table(n)?;
        let h_factor: Vec<f64> = (1..=n).map(|i| tilde.rate_factor(i)).collect();
        let norm = match norm_space {
            NormSpace::W => w.clone(),
            NormSpace::WTilde => w_tilde.clone(),
        };
        let base = SemigroupEvaluator::new(&problem.model, n, norm.clone(), cfg.tol_semigroup, cfg.semigroup_method)?;
        let coag = CoagOperator::new(&problem.kernel, n, cfg.mode);
        let gauss = gauss_legendre(cfg.gauss_points);
        let m = cfg.subintervals;
        Ok(Self {
            cfg,
            problem,
            horizon,
            report,
            c,
            norm_space,
            norm,
            w,
            w_tilde,
            h_factor,
            coag,
            base,
            shifted: HashMap::new(),
            props: HashMap::new(),
            gauss,
            m,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn report(&self) -> &AssumptionReport {
        &self.report
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Coagulation constant used by the step rule.
    pub fn coag_constant(&self) -> f64 {
        self.c
    }

    pub fn norm_space(&self) -> NormSpace {
        self.norm_space
    }

    /// Table of the norm the solver measures states in.
    pub fn norm_table(&self) -> &WeightTable {
        &self.norm
    }

    pub fn w_table(&self) -> &WeightTable {
        &self.w
    }

    pub fn w_tilde_table(&self) -> &WeightTable {
        &self.w_tilde
    }

    /// `H_n = (1 + a_n)^α`.
    pub fn rate_factor(&self) -> &[f64] {
        &self.h_factor
    }

    pub fn state_norm(&self, u: &[f64]) -> f64 {
        self.norm.norm(u)
    }

    /// Quantised radius `r > 2 C safety` for a state of norm `C`.
    pub fn radius(&self, c_norm: f64) -> f64 {
        let raw = (2.0 * c_norm * self.cfg.safety).max(self.cfg.r_floor);
        let level = (RADIUS_LEVELS_PER_OCTAVE * raw.log2()).ceil();
        let r = 2f64.powf(level / RADIUS_LEVELS_PER_OCTAVE);
        if r > 2.0 * c_norm && r >= raw {
            r
        } else {
            raw
        }
    }

    /// Shift for a window of radius `r`.
    pub fn gamma(&self, r: f64) -> f64 {
        match self.cfg.gamma_shift {
            GammaShift::Off => 0.0,
            GammaShift::Auto => self.c * r,
            GammaShift::Manual(g) => g,
        }
    }

    /// Admissible window length for a state of norm `c_norm`.
    pub fn window_length(&self, c_norm: f64) -> Result<(f64, f64)> {
        let r = self.radius(c_norm);
        Ok((step_delta(c_norm, r, self.horizon, self.c)?, r))
    }

    fn evaluator(&mut self, gamma: f64) -> Result<&SemigroupEvaluator> {
        if gamma == 0.0 {
            return Ok(&self.base);
        }
        let key = gamma.to_bits();
        if !self.shifted.contains_key(&key) {
            let ev = self.base.with_shift(gamma, &self.h_factor)?;
            self.shifted.insert(key, ev);
        }
        Ok(&self.shifted[&key])
    }

    fn propagator(&mut self, gamma: f64, duration: f64) -> Result<Arc<Propagator>> {
        let key = (gamma.to_bits(), duration.to_bits());
        if let Some(p) = self.props.get(&key) {
            return Ok(p.clone());
        }
        if self.props.len() >= 256 {
            self.props.clear();
        }
        let p = Arc::new(self.evaluator(gamma)?.propagator(duration)?);
        self.props.insert(key, p.clone());
        Ok(p)
    }

    fn plan(&mut self, gamma: f64, t0: f64, t1: f64, m: usize) -> Result<Plan> {
        let h = (t1 - t0) / m as f64;
        let block = m.min(BLOCK);
        let (x, _) = self.gauss.clone();
        let step = self.propagator(gamma, h)?;
        let at_gauss = x
            .iter()
            .map(|xg| self.propagator(gamma, h * (1.0 - xg)))
            .collect::<Result<Vec<_>>>()?;
        let lagrange = (0..block)
            .map(|i| {
                x.iter()
                    .map(|xg| {
                        let y = i as f64 + xg;
                        (0..=block)
                            .map(|k| {
                                (0..=block)
                                    .filter(|&l| l != k)
                                    .map(|l| (y - l as f64) / (k as f64 - l as f64))
                                    .product()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Plan {
            m,
            block,
            h,
            step,
            at_gauss,
            lagrange,
        })
    }

    /// One application of `Q` to node values `v` (length `M + 1`); returns
    /// the new node values and the leakage accumulated since `t0`.
    fn sweep(&self, plan: &Plan, gamma: f64, u_start: &[f64], t0: f64, v: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let n = u_start.len();
        let (_, wq) = &self.gauss;
        let mut force = vec![vec![0.0; n]; plan.m + 1];
        let mut leak_rate = vec![0.0; plan.m + 1];
        for k in 0..=plan.m {
            let t = t0 + k as f64 * plan.h;
            leak_rate[k] = self.coag.apply_into(t, &v[k], &mut force[k]);
            if gamma != 0.0 {
                for ((f, x), hf) in force[k].iter_mut().zip(&v[k]).zip(&self.h_factor) {
                    *f += gamma * hf * x;
                }
            }
        }
        let mut out = Vec::with_capacity(plan.m + 1);
        let mut leak = Vec::with_capacity(plan.m + 1);
        out.push(u_start.to_vec());
        leak.push(0.0);
        let mut fg = vec![0.0; n];
        for sub in 0..plan.m {
            let base = (sub / plan.block) * plan.block;
            let i = sub % plan.block;
            let mut next = vec![0.0; n];
            plan.step.apply_add(&out[sub], 1.0, &mut next)?;
            let mut lacc = leak[sub];
            for (g, weight) in wq.iter().enumerate() {
                let lw = &plan.lagrange[i][g];
                fg.iter_mut().for_each(|x| *x = 0.0);
                let mut lg = 0.0;
                for (k, c) in lw.iter().enumerate() {
                    let src = &force[base + k];
                    for (a, b) in fg.iter_mut().zip(src) {
                        *a += c * b;
                    }
                    lg += c * leak_rate[base + k];
                }
                plan.at_gauss[g].apply_add(&fg, plan.h * weight, &mut next)?;
                lacc += plan.h * weight * lg;
            }
            out.push(next);
            leak.push(lacc);
        }
        Ok((out, leak))
    }

    /// Single application of `Q` on `[t0, t1]` with `m` subintervals, for
    /// audits of the contraction property.
    pub fn q_map(&mut self, u_start: &[f64], t0: f64, t1: f64, gamma: f64, m: usize, v: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if v.len() != m + 1 || (m > BLOCK && m % BLOCK != 0) || m == 0 {
            return Err(Error::Config(format!("Q needs {} node values on a valid layout", m + 1)));
        }
        let plan = self.plan(gamma, t0, t1, m)?;
        Ok(self.sweep(&plan, gamma, u_start, t0, v)?.0)
    }

    fn run_window(&mut self, u_start: &TruncatedState, t0: f64, t1: f64, r: f64, gamma: f64, m: usize) -> Result<WindowOutcome> {
        let plan = self.plan(gamma, t0, t1, m)?;
        let mut v = vec![u_start.u.clone(); m + 1];
        let mut leak = vec![0.0; m + 1];
        let mut prev_diff: Option<f64> = None;
        let mut ratio: f64 = 0.0;
        let mut converged = None;
        let mut diff = f64::NAN;
        for it in 1..=self.cfg.max_picard_iters {
            let (next, l) = self.sweep(&plan, gamma, &u_start.u, t0, &v)?;
            diff = 0.0;
            let mut scale: f64 = 0.0;
            for (a, b) in next.iter().zip(&v) {
                let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                diff = diff.max(self.norm.norm(&d));
                scale = scale.max(self.norm.norm(a));
            }
            if !diff.is_finite() {
                return Err(Error::Convergence(format!("Picard iterate became non-finite on [{t0}, {t1}]")));
            }
            let threshold = self.cfg.tol_picard * scale;
            if let Some(p) = prev_diff {
                if p > 1e3 * threshold && p > 0.0 {
                    ratio = ratio.max(diff / p);
                }
            }
            prev_diff = Some(diff);
            v = next;
            leak = l;
            if diff <= threshold {
                converged = Some(it - 1);
                break;
            }
        }
        let iterations = converged.ok_or_else(|| {
            Error::Convergence(format!(
                "no fixed point on [{t0}, {t1}] after {} sweeps (last change {diff:e})",
                self.cfg.max_picard_iters
            ))
        })?;
        let times = (0..=m)
            .map(|k| if k == m { t1 } else { t0 + k as f64 * plan.h })
            .collect();
        let states = v
            .into_iter()
            .zip(leak)
            .map(|(u, l)| TruncatedState {
                u,
                leakage_mass: u_start.leakage_mass + l,
            })
            .collect();
        Ok(WindowOutcome {
            times,
            states,
            iterations,
            observed_ratio: ratio,
            subintervals: m,
            radius: r,
            gamma,
        })
    }

    /// Fixed point on `[t0, t1]`, optionally confirming the node count by one
    /// doubling (and doubling further while the end state still moves).
    fn window(&mut self, u_start: &TruncatedState, t0: f64, t1: f64, r: f64, gamma: f64, check: bool) -> Result<WindowOutcome> {
        let mut out = self.run_window(u_start, t0, t1, r, gamma, self.m)?;
        if !(check && self.cfg.refine) {
            return Ok(out);
        }
        while 2 * self.m <= self.cfg.max_subintervals {
            let fine = self.run_window(u_start, t0, t1, r, gamma, 2 * self.m)?;
            let d: Vec<f64> = fine.end().u.iter().zip(&out.end().u).map(|(a, b)| a - b).collect();
            let change = self.norm.norm(&d);
            let scale = self.norm.norm(&fine.end().u);
            out = fine;
            if change <= self.cfg.tol_refine * scale {
                break;
            }
            self.m *= 2;
        }
        Ok(out)
    }

    /// Picard fixed point on `[t0, t1]`; the window must not exceed the step
    /// rule for `‖u_start‖`.
    pub fn picard_window(&mut self, u_start: &TruncatedState, t0: f64, t1: f64) -> Result<WindowOutcome> {
        if u_start.len() != self.cfg.n {
            return Err(Error::Config(format!("state has {} sizes, solver {}", u_start.len(), self.cfg.n)));
        }
        let c_norm = self.state_norm(&u_start.u);
        let (delta, r) = self.window_length(c_norm)?;
        if !(t1 > t0) || t1 - t0 > delta * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "window [{t0}, {t1}] exceeds the admissible length {delta}"
            )));
        }
        let gamma = self.gamma(r);
        self.window(u_start, t0, t1, r, gamma, true)
    }

    /// Chains windows from `u0` at `t = 0` up to the horizon.
    pub fn solve(&mut self, u0: &TruncatedState) -> Result<Trajectory> {
        if u0.len() != self.cfg.n {
            return Err(Error::Config(format!("state has {} sizes, solver {}", u0.len(), self.cfg.n)));
        }
        if u0.u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("initial state has non-finite entries".into()));
        }
        if self.cfg.gamma_shift != GammaShift::Off && !u0.is_nonnegative() {
            return Err(Error::Precondition("the positivity shift needs a non-negative initial state".into()));
        }
        let horizon = self.horizon;
        let mut traj = Trajectory::new(EngineKind::Picard);
        traj.push(0.0, u0.clone(), Some(0))?;
        let norm0 = self.state_norm(&u0.u);
        let cap = if norm0 > 0.0 { self.cfg.norm_cap_factor * norm0 } else { f64::INFINITY };
        let mut t = 0.0;
        let mut u = u0.clone();
        let mut last_r: Option<u64> = None;
        while t < horizon {
            if traj.window_log.len() >= self.cfg.max_windows {
                return Err(Error::Convergence(format!("window budget {} exhausted at t = {t}", self.cfg.max_windows)));
            }
            let c_norm = self.state_norm(&u.u);
            if !(c_norm <= cap) {
                traj.blowup = Some(Blowup {
                    time: t,
                    reason: format!("numerical blow-up: norm {c_norm:e} exceeds cap {cap:e}"),
                });
                break;
            }
            let (delta, r) = self.window_length(c_norm)?;
            if delta < self.cfg.delta_min {
                traj.blowup = Some(Blowup {
                    time: t,
                    reason: format!("numerical blow-up: admissible window {delta:e} below delta_min"),
                });
                break;
            }
            let gamma = self.gamma(r);
            let check = last_r != Some(r.to_bits());
            let mut len = delta;
            let outcome = loop {
                let t1 = if t + len >= horizon * (1.0 - 1e-14) { horizon } else { t + len };
                match self.window(&u, t, t1, r, gamma, check) {
                    Ok(o) => break Some(o),
                    Err(Error::Convergence(_)) if len / 2.0 >= self.cfg.delta_min => len /= 2.0,
                    Err(Error::Convergence(msg)) => {
                        traj.blowup = Some(Blowup {
                            time: t,
                            reason: format!("numerical blow-up: {msg}"),
                        });
                        break None;
                    }
                    Err(e) => return Err(e),
                }
            };
            let Some(outcome) = outcome else { break };
            last_r = Some(r.to_bits());
            let t1 = *outcome.times.last().unwrap();
            traj.window_log.push(WindowRecord {
                t0: t,
                t1,
                delta,
                radius: r,
                gamma,
                subintervals: outcome.subintervals,
                picard_iterations: outcome.iterations,
                contraction_ratio_observed: outcome.observed_ratio,
            });
            u = outcome.end().clone();
            traj.push(t1, u.clone(), Some(outcome.iterations))?;
            t = t1;
        }
        Ok(traj)
    }
}

/// One-shot solve on `[0, horizon]`.
pub fn solve(cfg: &SolverConfig, problem: &Problem, u0: &TruncatedState, horizon: f64) -> Result<Trajectory> {
    MildSolver::new(cfg.clone(), problem.clone(), horizon)?.solve(u0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::becker_doring_model;

    fn problem(model: FragmentationModel, kernel: CoagulationKernel) -> Problem {
        Problem {
            model,
            kernel,
            weight: WeightSequence::power(1.0).unwrap(),
            alpha: 0.0,
        }
    }

    #[test]
    fn step_delta_examples() {
        assert!((step_delta(1.0, 2.5, 10.0, 1.0).unwrap() - 1.0 / 30.0).abs() < 1e-16);
        assert!((step_delta(1.0, 2.5, 0.01, 1.0).unwrap() - 0.005).abs() < 1e-16);
        assert!(matches!(step_delta(1.0, 2.0, 1.0, 1.0), Err(Error::Precondition(_))));
        for &(cn, r, tau, c) in &[(0.3, 1.0, 5.0, 2.0), (2.0, 4.5, 0.1, 0.3), (1.0, 2.02, 1.0, 4.0)] {
            let d = step_delta(cn, r, tau, c).unwrap();
            assert!(3.0 * r * c * d <= 0.5 && cn <= r / 2.0 && d <= tau);
        }
    }

    #[test]
    fn radius_is_quantised_above_twice_the_norm() {
        let cfg = SolverConfig {
            n: 8,
            ..Default::default()
        };
        let s = MildSolver::new(cfg, problem(FragmentationModel::none(), CoagulationKernel::constant(1.0)), 1.0).unwrap();
        for c in [1e-6, 0.3, 1.0, 7.7, 123.0] {
            let r = s.radius(c);
            assert!(r > 2.0 * c * 1.01 * (1.0 - 1e-15));
            assert!(r <= 2.0 * c * 1.01 * 2f64.powf(1.0 / 8.0) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_kernel_window_is_the_semigroup() {
        let cfg = SolverConfig {
            n: 10,
            ..Default::default()
        };
        let mut s = MildSolver::new(cfg.clone(), problem(becker_doring_model(), CoagulationKernel::zero()), 1.0).unwrap();
        let u0 = TruncatedState::unit(10, 5);
        let out = s.picard_window(&u0, 0.0, 0.25).unwrap();
        assert_eq!(out.iterations, 1);
        let ev = SemigroupEvaluator::new(&becker_doring_model(), 10, s.norm_table().clone(), 1e-12, SemigroupMethod::TriangularRecursive)
            .unwrap();
        let exact = ev.apply(&u0, 0.25).unwrap();
        for (a, b) in out.end().u.iter().zip(&exact.u) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_kernel_short_window() {
        let cfg = SolverConfig {
            n: 40,
            ..Default::default()
        };
        let mut s = MildSolver::new(cfg, problem(FragmentationModel::none(), CoagulationKernel::constant(2.0)), 1.0).unwrap();
        // c = 4 for w_n = n, so the admissible window is just under 0.01
        let (delta, _) = s.window_length(1.0).unwrap();
        let out = s.picard_window(&TruncatedState::unit(40, 1), 0.0, delta).unwrap();
        assert!(out.observed_ratio <= 0.5);
        for (t, st) in out.times.iter().zip(&out.states) {
            for n in 1..=20 {
                let exact = t.powi(n as i32 - 1) / (1.0 + t).powi(n as i32 + 1);
                assert!((st.u[n - 1] - exact).abs() <= 1e-8, "t={t} n={n}");
            }
        }
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let cfg = SolverConfig {
            n: 12,
            ..Default::default()
        };
        let tr = solve(&cfg, &problem(becker_doring_model(), CoagulationKernel::constant(1.0)), &TruncatedState::zeros(12), 1.0).unwrap();
        assert!(tr.states.iter().all(|s| s.u.iter().all(|x| *x == 0.0)));
        assert_eq!(*tr.times.last().unwrap(), 1.0);
    }

    #[test]
    fn unverified_is_refused_without_force() {
        let k = CoagulationKernel::new(
            crate::kinetics::KernelShape::ProductCapped { cap: f64::INFINITY },
            1.0,
            crate::kinetics::TimeProfile::Constant,
        )
        .unwrap();
        let cfg = SolverConfig {
            n: 16,
            ..Default::default()
        };
        assert!(matches!(MildSolver::new(cfg.clone(), problem(becker_doring_model(), k.clone()), 1.0), Err(Error::Unverified(_))));
        let forced = SolverConfig { force: true, ..cfg };
        assert!(MildSolver::new(forced, problem(becker_doring_model(), k), 1.0).is_ok());
    }

    #[test]
    fn oversized_window_is_rejected() {
        let cfg = SolverConfig {
            n: 8,
            ..Default::default()
        };
        let mut s = MildSolver::new(cfg, problem(FragmentationModel::none(), CoagulationKernel::constant(2.0)), 1.0).unwrap();
        assert!(matches!(s.picard_window(&TruncatedState::unit(8, 1), 0.0, 0.5), Err(Error::Precondition(_))));
    }
}
