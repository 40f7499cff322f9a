//! Truncated fragmentation and coagulation operators, their moment identities
//! and the Lipschitz constant of the coagulation term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{CoagulationKernel, FragmentationModel};
use crate::state::TruncatedState;
use crate::sum::NeumaierSum;
use crate::weights::MomentFunctional;

/// How the coagulation loss sum is cut at the truncation size `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    /// All pairs `n, j <= N` react; products above `N` are booked as leakage.
    #[default]
    ConservativeDrop,
    /// Only pairs with `n + j <= N` react, so no mass leaves.
    Closed,
}

/// Upper-triangular generator `(A + B)` of the truncated fragmentation flow:
/// diagonal `-a_n`, strictly upper entries `a_j b_{n,j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FragGenerator {
    diag: Vec<f64>,
    /// Row `n - 1` holds `(j, a_j b_{n,j})` for `j > n`, ascending in `j`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl FragGenerator {
    pub fn from_model(model: &FragmentationModel, n: usize) -> Self {
        let diag: Vec<f64> = (1..=n).map(|i| -model.a(i)).collect();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for j in 2..=n {
            let aj = model.a(j);
            if aj == 0.0 {
                continue;
            }
            model.daughters.for_each(j, |i, b| {
                if b != 0.0 && i < j {
                    rows[i - 1].push((j, aj * b));
                }
            });
        }
        Self { diag, rows }
    }

    /// Same off-diagonal part with the diagonal replaced by `-a_n - shift_n`.
    pub fn shifted(&self, shift: &[f64]) -> Self {
        let diag = self.diag.iter().zip(shift).map(|(d, s)| d - s).collect();
        Self {
            diag,
            rows: self.rows.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn is_diagonal(&self) -> bool {
        self.rows.iter().all(|r| r.is_empty())
    }

    pub fn nnz_upper(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `out = G f`.
    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        for (n, row) in self.rows.iter().enumerate() {
            let mut acc = NeumaierSum::from(self.diag[n] * f[n]);
            for &(j, v) in row {
                acc += v * f[j - 1];
            }
            out[n] = acc.value();
        }
    }

    /// `out = (G - diag G) f`, the fragment inflow only.
    pub fn apply_offdiag_into(&self, f: &[f64], out: &mut [f64]) {
        for (n, row) in self.rows.iter().enumerate() {
            let mut acc = NeumaierSum::new();
            for &(j, v) in row {
                acc += v * f[j - 1];
            }
            out[n] = acc.value();
        }
    }

    /// `max_j Σ_n |G_{n,j}|`.
    pub fn column_norm(&self) -> f64 {
        let mut cols: Vec<f64> = self.diag.iter().map(|d| d.abs()).collect();
        for row in &self.rows {
            for &(j, v) in row {
                cols[j - 1] += v.abs();
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }
}

/// Coagulation operator on `N` sizes with the size factors tabulated.
#[derive(Debug, Clone)]
pub struct CoagOperator {
    n: usize,
    mode: TruncationMode,
    /// Row-major `N x N`, entry `(n-1, j-1)` holds `scale · shape(n, j)`.
    table: Vec<f64>,
    kernel: CoagulationKernel,
    zero: bool,
}

impl CoagOperator {
    pub fn new(kernel: &CoagulationKernel, n: usize, mode: TruncationMode) -> Self {
        let zero = kernel.is_zero();
        let mut table = vec![0.0; if zero { 0 } else { n * n }];
        if !zero {
            for i in 1..=n {
                for j in i..=n {
                    let v = kernel.size_factor(i, j);
                    table[(i - 1) * n + (j - 1)] = v;
                    table[(j - 1) * n + (i - 1)] = v;
                }
            }
        }
        Self {
            n,
            mode,
            table,
            kernel: kernel.clone(),
            zero,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mode(&self) -> TruncationMode {
        self.mode
    }

    pub fn kernel(&self) -> &CoagulationKernel {
        &self.kernel
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.table[(i - 1) * self.n + (j - 1)]
    }

    /// Writes `K(t, f)` into `out`; returns the leakage rate
    /// `½ Σ_{n+j>N} (n+j) k_{n,j} f_n f_j` (zero in closed mode).
    pub fn apply_into(&self, t: f64, f: &[f64], out: &mut [f64]) -> f64 {
        let n_max = self.n;
        debug_assert_eq!(f.len(), n_max);
        out.iter_mut().for_each(|x| *x = 0.0);
        if self.zero {
            return 0.0;
        }
        let top = match f.iter().rposition(|x| *x != 0.0) {
            Some(i) => i + 1,
            None => return 0.0,
        };
        let g = self.kernel.time_factor(t);
        let mut leak = NeumaierSum::new();
        for n in 1..=n_max {
            // gain: ½ Σ_{j=1}^{n-1} k_{n-j,j} f_{n-j} f_j, folded on j <-> n-j
            let mut gain = NeumaierSum::new();
            if n >= 2 && n <= 2 * top {
                let lo = n.saturating_sub(top).max(1);
                for j in lo..=((n - 1) / 2) {
                    gain += self.k(n - j, j) * f[n - j - 1] * f[j - 1];
                }
                if n % 2 == 0 && n / 2 <= top {
                    let h = n / 2;
                    gain += 0.5 * self.k(h, h) * f[h - 1] * f[h - 1];
                }
            }
            let mut loss = 0.0;
            let fnn = f[n - 1];
            if fnn != 0.0 {
                let row = &self.table[(n - 1) * n_max..n * n_max];
                let inner = match self.mode {
                    TruncationMode::ConservativeDrop => top,
                    TruncationMode::Closed => top.min(n_max - n),
                };
                let mut acc = NeumaierSum::new();
                for j in 0..inner {
                    acc += row[j] * f[j];
                }
                loss = fnn * acc.value();
                if self.mode == TruncationMode::ConservativeDrop && n_max - n < top {
                    let mut tail = NeumaierSum::new();
                    for j in (n_max - n + 1)..=top {
                        tail += (n + j) as f64 * row[j - 1] * f[j - 1];
                    }
                    leak += fnn * tail.value();
                }
            }
            out[n - 1] = g * (gain.value() - loss);
        }
        0.5 * g * leak.value()
    }

    /// Symmetrised bilinear form `K̃[t, f, g]` with the same loss-range rule.
    pub fn bilinear_into(&self, t: f64, f: &[f64], h: &[f64], out: &mut [f64]) {
        let n_max = self.n;
        out.iter_mut().for_each(|x| *x = 0.0);
        if self.zero {
            return;
        }
        let g = self.kernel.time_factor(t);
        for n in 1..=n_max {
            let mut gain = NeumaierSum::new();
            for j in 1..n {
                gain += self.k(n - j, j) * f[n - j - 1] * h[j - 1];
            }
            let inner = match self.mode {
                TruncationMode::ConservativeDrop => n_max,
                TruncationMode::Closed => n_max - n,
            };
            let mut acc = NeumaierSum::new();
            for j in 1..=inner {
                acc += self.k(n, j) * h[j - 1];
            }
            out[n - 1] = g * (0.5 * gain.value() - f[n - 1] * acc.value());
        }
    }

    /// `max_{n,j<=N} k_{n,j}(t) / ((n + j) scale-free)`: smallest `μ` with `k <= μ (n + j)`.
    pub fn linear_growth_constant(&self, t_grid: &[f64]) -> Result<f64> {
        if self.zero {
            return Ok(0.0);
        }
        let g = self.kernel.max_time_factor(t_grid)?;
        let mut mu: f64 = 0.0;
        for i in 1..=self.n {
            for j in i..=self.n {
                mu = mu.max(self.k(i, j) / (i + j) as f64);
            }
        }
        Ok(mu * g)
    }
}

/// Full right-hand side of the truncated system; shared by every engine.
#[derive(Debug, Clone)]
pub struct Rhs {
    pub frag: FragGenerator,
    pub coag: CoagOperator,
}

impl Rhs {
    pub fn new(model: &FragmentationModel, kernel: &CoagulationKernel, n: usize, mode: TruncationMode) -> Self {
        Self {
            frag: FragGenerator::from_model(model, n),
            coag: CoagOperator::new(kernel, n, mode),
        }
    }

    pub fn len(&self) -> usize {
        self.frag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frag.is_empty()
    }

    /// `out = (A + B) u + K(t, u)`; returns the leakage rate.
    pub fn eval_into(&self, t: f64, u: &[f64], scratch: &mut [f64], out: &mut [f64]) -> f64 {
        self.frag.apply_into(u, out);
        let leak = self.coag.apply_into(t, u, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += s;
        }
        leak
    }
}

/// `((A + B) f)_n = -a_n f_n + Σ_{j=n+1}^{N} a_j b_{n,j} f_j`.
pub fn apply_fragmentation(model: &FragmentationModel, f: &TruncatedState) -> Vec<f64> {
    let g = FragGenerator::from_model(model, f.len());
    let mut out = vec![0.0; f.len()];
    g.apply_into(&f.u, &mut out);
    out
}

/// `K(t, f)` and the leakage rate under the given truncation mode.
pub fn apply_coagulation(
    kernel: &CoagulationKernel,
    t: f64,
    f: &TruncatedState,
    mode: TruncationMode,
) -> (Vec<f64>, f64) {
    let op = CoagOperator::new(kernel, f.len(), mode);
    let mut out = vec![0.0; f.len()];
    let leak = op.apply_into(t, &f.u, &mut out);
    (out, leak)
}

/// `½ Σ_{n+j<=N} (ω_{n+j} - ω_n - ω_j) k_{n,j}(t) f_n f_j`.
pub fn coag_moment(omega: &MomentFunctional, kernel: &CoagulationKernel, t: f64, f: &TruncatedState) -> Result<f64> {
    let n_max = f.len();
    if omega.defined_up_to() < n_max {
        return Err(Error::Config("moment weights shorter than the state".into()));
    }
    let g = kernel.time_factor(t);
    let mut acc = NeumaierSum::new();
    for n in 1..n_max {
        let fnn = f.u[n - 1];
        if fnn == 0.0 {
            continue;
        }
        for j in 1..=(n_max - n) {
            let fj = f.u[j - 1];
            if fj == 0.0 {
                continue;
            }
            let dw = omega.omega(n + j) - omega.omega(n) - omega.omega(j);
            acc += dw * kernel.size_factor(n, j) * fnn * fj;
        }
    }
    Ok(0.5 * g * acc.value())
}

/// Lipschitz constant `3 r c` of `K` on the ball of radius `r`, from the
/// bilinear bound `(3/2) c ‖f‖ ‖g‖`.
pub fn lipschitz_constant(r: f64, c: f64) -> Result<f64> {
    if !(r > 0.0) || !(c > 0.0) {
        return Err(Error::Domain(format!("Lipschitz constant needs r > 0 and c > 0 (r = {r}, c = {c})")));
    }
    Ok(3.0 * r * c)
}

/// Fragmentation contribution to `d/dt Σ n u_n`:
/// `-a_1 f_1 - Σ_{j>=2} (j - Σ_{n<j} n b_{n,j}) a_j f_j`.
pub fn frag_mass_rate(model: &FragmentationModel, f: &TruncatedState) -> f64 {
    let mut acc = NeumaierSum::new();
    if let Some(&f1) = f.u.first() {
        acc += -model.a(1) * f1;
    }
    for j in 2..=f.len() {
        let fj = f.u[j - 1];
        if fj == 0.0 {
            continue;
        }
        acc += -model.mass_defect(j) * model.a(j) * fj;
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{becker_doring_model, Daughters, Rates};

    #[test]
    fn pure_death_term() {
        let m = FragmentationModel::decay_only(Rates::Power {
            scale: 1.0,
            exponent: 1.0,
            monomer: 1.0,
        })
        .unwrap();
        let out = apply_fragmentation(&m, &TruncatedState::unit(5, 3));
        assert_eq!(out, vec![0.0, 0.0, -3.0, 0.0, 0.0]);
    }

    #[test]
    fn becker_doring_fragment_of_trimer() {
        let out = apply_fragmentation(&becker_doring_model(), &TruncatedState::unit(6, 3));
        assert_eq!(out, vec![3.0, 3.0, -3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn becker_doring_fragmentation_preserves_mass() {
        let m = becker_doring_model();
        let f = TruncatedState::from_densities((1..=40).map(|i| 1.0 / (i * i) as f64).collect());
        let out = apply_fragmentation(&m, &f);
        let rate = MomentFunctional::Mass.eval(&out).unwrap();
        assert!(rate.abs() < 1e-13, "{rate}");
        assert!(frag_mass_rate(&m, &f).abs() < 1e-15);
    }

    #[test]
    fn monomer_coagulation_with_constant_kernel() {
        let (out, leak) = apply_coagulation(
            &CoagulationKernel::constant(2.0),
            0.0,
            &TruncatedState::unit(4, 1),
            TruncationMode::ConservativeDrop,
        );
        assert_eq!(out, vec![-2.0, 1.0, 0.0, 0.0]);
        assert_eq!(leak, 0.0);
    }

    #[test]
    fn zero_state_gives_zero() {
        let (out, leak) = apply_coagulation(
            &CoagulationKernel::constant(2.0),
            0.0,
            &TruncatedState::zeros(8),
            TruncationMode::ConservativeDrop,
        );
        assert!(out.iter().all(|x| *x == 0.0));
        assert_eq!(leak, 0.0);
        let m = coag_moment(&MomentFunctional::Mass, &CoagulationKernel::constant(2.0), 0.0, &TruncatedState::zeros(8)).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn count_moment_with_constant_kernel() {
        // support inside n <= N/2 so every pair is counted
        let mut f = TruncatedState::zeros(20);
        for (i, v) in [0.3, 0.7, 0.1, 0.25, 0.05].iter().enumerate() {
            f.u[i] = *v;
        }
        let m = coag_moment(&MomentFunctional::Count, &CoagulationKernel::constant(2.0), 0.0, &f).unwrap();
        let total: f64 = f.u.iter().sum();
        assert!((m + total * total).abs() < 1e-15);
        let m1 = coag_moment(&MomentFunctional::Mass, &CoagulationKernel::constant(2.0), 0.0, &f).unwrap();
        assert_eq!(m1, 0.0);
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_constant(2.0, 1.0).unwrap(), 6.0);
        assert_eq!(lipschitz_constant(1.0, 4.0).unwrap(), 12.0);
        assert!(lipschitz_constant(1e-12, 1.0).unwrap() < 1e-11);
        assert!(matches!(lipschitz_constant(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(lipschitz_constant(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn removal_mass_rate() {
        let m = FragmentationModel::decay_only(Rates::Power {
            scale: 0.0,
            exponent: 1.0,
            monomer: 1.0,
        })
        .unwrap();
        assert_eq!(frag_mass_rate(&m, &TruncatedState::unit(3, 1)), -1.0);
    }

    #[test]
    fn dissipative_mass_rate_is_nonpositive() {
        let d = Daughters::from_triples(&[(1, 3, 1.0), (1, 4, 2.0), (2, 4, 0.5)]).unwrap();
        let m = FragmentationModel::new(Rates::becker_doring(), d).unwrap();
        assert!(m.mass_flags(4).dissipative);
        let f = TruncatedState::from_densities(vec![0.5, 0.2, 0.7, 0.9]);
        assert!(frag_mass_rate(&m, &f) <= 0.0);
    }

    #[test]
    fn linear_growth_of_min_kernel() {
        let op = CoagOperator::new(&CoagulationKernel::min(1.0), 64, TruncationMode::Closed);
        let mu = op.linear_growth_constant(&[0.0]).unwrap();
        assert!((mu - 0.5).abs() < 1e-15);
    }
}
