//! Fragmentation coefficients, daughter distributions, coagulation kernels and
//! the classification of a model against the well-posedness conditions.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;
use crate::weights::{self, TildeWeight, WeightKind, WeightSequence};

/// Default range over which mass flags are verified.
pub const DEFAULT_J_CHECK: usize = 1000;

/// Relative tolerance used when deciding that a mass defect vanishes.
const DEFECT_RTOL: f64 = 1e-12;

/// Fragmentation rates `a_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Rates {
    Zero,
    /// `a_1 = monomer`, `a_n = scale * n^exponent` for `n >= 2`.
    Power {
        scale: f64,
        exponent: f64,
        monomer: f64,
    },
    /// `a_n = values[n - 1]`; sizes past the table have rate zero.
    Table(Vec<f64>),
}

impl Rates {
    /// `a_1 = 0`, `a_n = n` otherwise.
    pub fn becker_doring() -> Self {
        Rates::Power {
            scale: 1.0,
            exponent: 1.0,
            monomer: 0.0,
        }
    }

    pub fn get(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        match self {
            Rates::Zero => 0.0,
            Rates::Power {
                scale,
                exponent,
                monomer,
            } => {
                if n == 1 {
                    *monomer
                } else {
                    scale * (n as f64).powf(*exponent)
                }
            }
            Rates::Table(v) => v.get(n - 1).copied().unwrap_or(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = match self {
            Rates::Zero => false,
            Rates::Power {
                scale,
                exponent,
                monomer,
            } => !(scale.is_finite() && *scale >= 0.0 && exponent.is_finite() && monomer.is_finite() && *monomer >= 0.0),
            Rates::Table(v) => v.iter().any(|a| !a.is_finite() || *a < 0.0),
        };
        if bad {
            return Err(Error::Config("fragmentation rates must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Daughter distribution `b_{n,j}`: expected number of `n`-mers produced when
/// a `j`-mer breaks. Zero whenever `j <= n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Daughters {
    None,
    /// `b_{1,2} = 2`, `b_{1,j} = b_{j-1,j} = 1` for `j >= 3`.
    BeckerDoring,
    /// `b_{n,j} = d_j (n/j)^nu` normalised so that `Σ n b_{n,j} = j`.
    PowerLaw { nu: f64 },
    /// `b_{n,j} = 2/(j-1)`.
    UniformBinary,
    /// Explicit entries, keyed by parent size `j`.
    Table(BTreeMap<usize, Vec<(usize, f64)>>),
}

impl Daughters {
    /// Builds a tabulated distribution from `(n, j, b)` triples.
    pub fn from_triples(triples: &[(usize, usize, f64)]) -> Result<Self> {
        let mut map: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for &(n, j, b) in triples {
            if n == 0 || j <= n {
                return Err(Error::Config(format!("daughter entry b[{n},{j}] must have 1 <= n < j")));
            }
            if !b.is_finite() || b < 0.0 {
                return Err(Error::Config(format!("daughter entry b[{n},{j}] = {b} must be non-negative")));
            }
            map.entry(j).or_default().push((n, b));
        }
        for list in map.values_mut() {
            list.sort_by_key(|e| e.0);
            list.dedup_by(|a, b| {
                if a.0 == b.0 {
                    b.1 += a.1;
                    true
                } else {
                    false
                }
            });
        }
        Ok(Daughters::Table(map))
    }

    /// Normalisation `d_j` of the power-law family, by direct finite summation.
    pub fn powerlaw_normalization(nu: f64, j: usize) -> f64 {
        let jf = j as f64;
        let mut acc = NeumaierSum::new();
        for m in 1..j {
            let mf = m as f64;
            acc += mf * (mf / jf).powf(nu);
        }
        jf / acc.value()
    }

    /// Calls `f(n, b_{n,j})` for every potentially non-zero daughter of `j`,
    /// in ascending `n`.
    pub fn for_each<F: FnMut(usize, f64)>(&self, j: usize, mut f: F) {
        if j < 2 {
            return;
        }
        match self {
            Daughters::None => {}
            Daughters::BeckerDoring => {
                if j == 2 {
                    f(1, 2.0);
                } else {
                    f(1, 1.0);
                    f(j - 1, 1.0);
                }
            }
            Daughters::PowerLaw { nu } => {
                let d = Self::powerlaw_normalization(*nu, j);
                let jf = j as f64;
                for n in 1..j {
                    f(n, d * (n as f64 / jf).powf(*nu));
                }
            }
            Daughters::UniformBinary => {
                let b = 2.0 / (j as f64 - 1.0);
                for n in 1..j {
                    f(n, b);
                }
            }
            Daughters::Table(map) => {
                if let Some(list) = map.get(&j) {
                    for &(n, b) in list {
                        f(n, b);
                    }
                }
            }
        }
    }

    pub fn b(&self, n: usize, j: usize) -> f64 {
        if n == 0 || j <= n {
            return 0.0;
        }
        match self {
            Daughters::None => 0.0,
            Daughters::BeckerDoring => match (n, j) {
                (1, 2) => 2.0,
                (1, _) => 1.0,
                _ if n == j - 1 => 1.0,
                _ => 0.0,
            },
            Daughters::PowerLaw { nu } => Self::powerlaw_normalization(*nu, j) * (n as f64 / j as f64).powf(*nu),
            Daughters::UniformBinary => 2.0 / (j as f64 - 1.0),
            Daughters::Table(map) => map
                .get(&j)
                .and_then(|l| l.iter().find(|e| e.0 == n))
                .map_or(0.0, |e| e.1),
        }
    }

    pub fn is_none(&self) -> bool {
        match self {
            Daughters::None => true,
            Daughters::Table(m) => m.values().all(|l| l.iter().all(|e| e.1 == 0.0)),
            _ => false,
        }
    }
}

/// Flags for mass behaviour during fragmentation, verified on `2..=checked_up_to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassFlags {
    pub conserving: bool,
    pub dissipative: bool,
    pub checked_up_to: usize,
}

/// Fragmentation coefficients `(a_n, b_{n,j})`.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentationModel {
    pub rates: Rates,
    pub daughters: Daughters,
}

impl FragmentationModel {
    pub fn new(rates: Rates, daughters: Daughters) -> Result<Self> {
        rates.validate()?;
        if let Daughters::PowerLaw { nu } = daughters {
            if !(nu >= -1.0) {
                return Err(Error::Domain(format!("power-law exponent nu = {nu} must be >= -1")));
            }
        }
        Ok(Self { rates, daughters })
    }

    /// No fragmentation at all.
    pub fn none() -> Self {
        Self {
            rates: Rates::Zero,
            daughters: Daughters::None,
        }
    }

    /// Pure rates without daughters (pure removal for `a_1`, pure loss otherwise).
    pub fn decay_only(rates: Rates) -> Result<Self> {
        Self::new(rates, Daughters::None)
    }

    #[inline]
    pub fn a(&self, n: usize) -> f64 {
        self.rates.get(n)
    }

    #[inline]
    pub fn b(&self, n: usize, j: usize) -> f64 {
        self.daughters.b(n, j)
    }

    /// `j - Σ_{n<j} n b_{n,j}`.
    pub fn mass_defect(&self, j: usize) -> f64 {
        let mut acc = NeumaierSum::new();
        self.daughters.for_each(j, |n, b| acc += n as f64 * b);
        j as f64 - acc.value()
    }

    pub fn mass_flags(&self, j_check: usize) -> MassFlags {
        let mut conserving = self.a(1) == 0.0;
        let mut dissipative = true;
        for j in 2..=j_check.max(2) {
            let defect = self.mass_defect(j);
            let slack = DEFECT_RTOL * j as f64;
            if defect.abs() > slack {
                conserving = false;
            }
            if defect < -slack {
                dissipative = false;
            }
        }
        MassFlags {
            conserving,
            dissipative,
            checked_up_to: j_check.max(2),
        }
    }
}

/// Becker–Döring fragmentation: `a_1 = 0`, `a_n = n`, and every `j`-mer breaks
/// into a monomer and a `(j-1)`-mer.
pub fn becker_doring_model() -> FragmentationModel {
    FragmentationModel {
        rates: Rates::becker_doring(),
        daughters: Daughters::BeckerDoring,
    }
}

/// Power-law daughters `φ(x) = x^nu` with the given rates.
pub fn powerlaw_model(nu: f64, rates: Rates) -> Result<FragmentationModel> {
    FragmentationModel::new(rates, Daughters::PowerLaw { nu })
}

/// Uniform binary daughters with the given rates.
pub fn uniform_binary_model(rates: Rates) -> Result<FragmentationModel> {
    FragmentationModel::new(rates, Daughters::UniformBinary)
}

pub type KernelFn = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;
pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Size dependence of a coagulation kernel, stored for `n <= j` and mirrored.
#[derive(Clone)]
pub enum KernelShape {
    Zero,
    Constant,
    /// `min{n, j}`
    Min,
    /// `min{n j, cap}`
    ProductCapped { cap: f64 },
    /// `n + j`
    Sum,
    /// `(1 + a_n)^exponent (1 + a_j)^exponent`
    RatePower { rates: Rates, exponent: f64 },
    /// Symmetric table, `values[(n-1)][(j-1)]` for `n <= j`; zero outside.
    Table(Arc<Vec<Vec<f64>>>),
    /// User callback, evaluated as `f(min, max)`. The caller is responsible
    /// for the continuity and growth obligations.
    Custom(KernelFn),
}

impl fmt::Debug for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelShape::Zero => write!(f, "Zero"),
            KernelShape::Constant => write!(f, "Constant"),
            KernelShape::Min => write!(f, "Min"),
            KernelShape::ProductCapped { cap } => write!(f, "ProductCapped({cap})"),
            KernelShape::Sum => write!(f, "Sum"),
            KernelShape::RatePower { exponent, .. } => write!(f, "RatePower({exponent})"),
            KernelShape::Table(t) => write!(f, "Table({}x{})", t.len(), t.len()),
            KernelShape::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl KernelShape {
    fn eval_ordered(&self, lo: usize, hi: usize) -> f64 {
        match self {
            KernelShape::Zero => 0.0,
            KernelShape::Constant => 1.0,
            KernelShape::Min => lo as f64,
            KernelShape::ProductCapped { cap } => (lo as f64 * hi as f64).min(*cap),
            KernelShape::Sum => (lo + hi) as f64,
            KernelShape::RatePower { rates, exponent } => {
                (1.0 + rates.get(lo)).powf(*exponent) * (1.0 + rates.get(hi)).powf(*exponent)
            }
            KernelShape::Table(t) => t.get(lo - 1).and_then(|row| row.get(hi - 1)).copied().unwrap_or(0.0),
            KernelShape::Custom(f) => f(lo, hi),
        }
    }
}

/// Time profile `g(t)` multiplying the size dependence.
#[derive(Clone)]
pub enum TimeProfile {
    Constant,
    /// `1 + slope t`
    Linear { slope: f64 },
    /// `exp(-rate t)`
    Exponential { rate: f64 },
    /// `1 + amplitude sin(frequency t)` with `|amplitude| <= 1`
    Oscillating { amplitude: f64, frequency: f64 },
    Custom(ProfileFn),
}

impl fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeProfile::Constant => write!(f, "Constant"),
            TimeProfile::Linear { slope } => write!(f, "Linear({slope})"),
            TimeProfile::Exponential { rate } => write!(f, "Exponential({rate})"),
            TimeProfile::Oscillating { amplitude, frequency } => write!(f, "Oscillating({amplitude}, {frequency})"),
            TimeProfile::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl TimeProfile {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Linear { slope } => 1.0 + slope * t,
            TimeProfile::Exponential { rate } => (-rate * t).exp(),
            TimeProfile::Oscillating { amplitude, frequency } => 1.0 + amplitude * (frequency * t).sin(),
            TimeProfile::Custom(g) => g(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeProfile::Constant)
    }
}

/// Separable coagulation kernel `k_{n,j}(t) = scale · g(t) · shape(n, j)`.
#[derive(Debug, Clone)]
pub struct CoagulationKernel {
    pub shape: KernelShape,
    pub scale: f64,
    pub profile: TimeProfile,
}

impl CoagulationKernel {
    pub fn new(shape: KernelShape, scale: f64, profile: TimeProfile) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::Config(format!("kernel scale {scale} must be finite and non-negative")));
        }
        if let KernelShape::Table(t) = &shape {
            for (i, row) in t.iter().enumerate() {
                if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Config(format!("kernel table row {} has a negative entry", i + 1)));
                }
            }
        }
        match profile {
            TimeProfile::Oscillating { amplitude, .. } if amplitude.abs() > 1.0 => {
                return Err(Error::Config("oscillating profile needs |amplitude| <= 1".into()))
            }
            TimeProfile::Linear { slope } if slope < 0.0 => {
                return Err(Error::Config("linear profile needs a non-negative slope".into()))
            }
            _ => {}
        }
        Ok(Self { shape, scale, profile })
    }

    pub fn constant(scale: f64) -> Self {
        Self {
            shape: KernelShape::Constant,
            scale,
            profile: TimeProfile::Constant,
        }
    }

    pub fn min(scale: f64) -> Self {
        Self {
            shape: KernelShape::Min,
            scale,
            profile: TimeProfile::Constant,
        }
    }

    pub fn zero() -> Self {
        Self {
            shape: KernelShape::Zero,
            scale: 0.0,
            profile: TimeProfile::Constant,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, KernelShape::Zero) || self.scale == 0.0
    }

    /// Time-independent size factor `scale · shape(n, j)`.
    #[inline]
    pub fn size_factor(&self, n: usize, j: usize) -> f64 {
        let (lo, hi) = if n <= j { (n, j) } else { (j, n) };
        self.scale * self.shape.eval_ordered(lo, hi)
    }

    #[inline]
    pub fn time_factor(&self, t: f64) -> f64 {
        self.profile.eval(t)
    }

    #[inline]
    pub fn k(&self, n: usize, j: usize, t: f64) -> f64 {
        self.size_factor(n, j) * self.time_factor(t)
    }

    /// `max_t g(t)` over the grid (the profile must be non-negative there).
    pub fn max_time_factor(&self, t_grid: &[f64]) -> Result<f64> {
        let mut g_max: f64 = 0.0;
        for &t in t_grid {
            let g = self.time_factor(t);
            if !g.is_finite() || g < 0.0 {
                return Err(Error::Domain(format!("time profile is {g} at t = {t}; kernels must be non-negative")));
            }
            g_max = g_max.max(g);
        }
        Ok(g_max)
    }
}

/// Case of the well-posedness conditions a model was certified for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssumptionCase {
    CI,
    CII,
    #[serde(rename = "unverified")]
    Unverified,
}

impl fmt::Display for AssumptionCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssumptionCase::CI => write!(f, "CI"),
            AssumptionCase::CII => write!(f, "CII"),
            AssumptionCase::Unverified => write!(f, "unverified"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub n: usize,
    pub j: usize,
    pub t: f64,
}

/// Outcome of [`classify_assumptions`].
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub case: AssumptionCase,
    pub j_max: usize,
    pub kappa_j: f64,
    pub kappa_argmax: usize,
    /// Exact supremum over all `j` for closed-form weight/daughter pairs.
    pub kappa_sup: Option<f64>,
    pub alpha: f64,
    /// `c_J`: max of `k w_{n+j} / (w̃_n w̃_j)` over `n + j <= J` and the time grid.
    pub coag_constant_c: f64,
    /// Same maximum over `n + j <= J/2`; used to detect unbounded growth.
    pub coag_constant_half: f64,
    /// Closed-form bound `2^p ĉ` (power weights) or `ĉ` (geometric weights).
    pub analytic_c: Option<f64>,
    pub mass: MassFlags,
    pub witnesses: Vec<Witness>,
    pub reasons: Vec<String>,
}

/// Relative growth of `c_J` between `J/2` and `J` above which the maximum is
/// treated as unbounded.
pub const C_GROWTH_TOL: f64 = 1e-2;

/// Current best estimate of the bounded-coagulation constant and its location.
#[derive(Debug, Clone, Copy)]
pub struct CoagConstant {
    pub value: f64,
    pub at: (usize, usize),
}

/// `max_{n+j <= j_max} scale·shape(n,j) w_{n+j} / (w̃_n w̃_j)` (time factor excluded).
pub fn coag_size_constant(
    kernel: &CoagulationKernel,
    w: &weights::WeightTable,
    wt: &weights::WeightTable,
    j_max: usize,
) -> Result<CoagConstant> {
    if w.len() < j_max || wt.len() < j_max {
        return Err(Error::Config(format!("weights must be tabulated up to {j_max}")));
    }
    let mut best = CoagConstant { value: 0.0, at: (1, 1) };
    if kernel.is_zero() {
        return Ok(best);
    }
    for n in 1..j_max {
        for j in n..=(j_max - n) {
            let k = kernel.size_factor(n, j);
            if k == 0.0 {
                continue;
            }
            let ratio = (w.ln(n + j) - wt.ln(n) - wt.ln(j)).exp();
            let v = k * ratio;
            if v > best.value {
                best = CoagConstant { value: v, at: (n, j) };
            }
        }
    }
    Ok(best)
}

/// Classifies `(model, kernel, w, alpha)` into case CI, CII or unverified on the
/// truncation `j <= j_max` and the time grid.
pub fn classify_assumptions(
    model: &FragmentationModel,
    kernel: &CoagulationKernel,
    w: &WeightSequence,
    alpha: f64,
    j_max: usize,
    t_grid: &[f64],
) -> Result<AssumptionReport> {
    if t_grid.is_empty() {
        return Err(Error::Domain("time grid for kernel classification is empty".into()));
    }
    if j_max < 2 {
        return Err(Error::Domain("classification needs J >= 2".into()));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in [0, 1)")));
    }
    let w_table = w.table(j_max)?;
    let tilde = TildeWeight::new(w.clone(), alpha, model.rates.clone())?;
    let wt_table = tilde.table(j_max)?;

    let profile = weights::kappa_profile(&model.daughters, &w_table, j_max)?;
    let kappa_sup = weights::analytic_kappa(&model.daughters, w);
    let g_max = kernel.max_time_factor(t_grid)?;
    let t_at = t_grid
        .iter()
        .copied()
        .find(|&t| kernel.time_factor(t) == g_max)
        .unwrap_or(t_grid[0]);

    let full = coag_size_constant(kernel, &w_table, &wt_table, j_max)?;
    let half = coag_size_constant(kernel, &w_table, &wt_table, (j_max / 2).max(2))?;
    let c_j = full.value * g_max;
    let c_half = half.value * g_max;

    let analytic_c = analytic_coag_bound(kernel, model, w, alpha, j_max, g_max);

    let mut reasons = Vec::new();
    let kappa = profile.kappa;
    let bounded = c_j.is_finite() && c_j <= c_half * (1.0 + C_GROWTH_TOL);
    if !bounded {
        reasons.push(format!(
            "coagulation constant still growing with J: c(J/2) = {c_half:.6e}, c(J) = {c_j:.6e}"
        ));
    }
    let case = if alpha == 0.0 {
        if kappa > 1.0 + 1e-12 {
            reasons.push(format!("kappa_J = {kappa} exceeds 1"));
            AssumptionCase::Unverified
        } else if bounded {
            AssumptionCase::CI
        } else {
            AssumptionCase::Unverified
        }
    } else if kappa >= 1.0 {
        reasons.push(format!("alpha > 0 needs kappa < 1, found kappa_J = {kappa}"));
        AssumptionCase::Unverified
    } else if let Some(sup) = kappa_sup.filter(|s| *s >= 1.0) {
        reasons.push(format!("kappa_J < 1 but the exact supremum is {sup}"));
        AssumptionCase::Unverified
    } else if bounded {
        AssumptionCase::CII
    } else {
        AssumptionCase::Unverified
    };

    let mut witnesses = vec![Witness {
        n: full.at.0,
        j: full.at.1,
        t: t_at,
    }];
    if half.at != full.at {
        witnesses.push(Witness {
            n: half.at.0,
            j: half.at.1,
            t: t_at,
        });
    }

    Ok(AssumptionReport {
        case,
        j_max,
        kappa_j: kappa,
        kappa_argmax: profile.argmax,
        kappa_sup,
        alpha,
        coag_constant_c: c_j,
        coag_constant_half: c_half,
        analytic_c,
        mass: model.mass_flags(j_max.min(DEFAULT_J_CHECK)),
        witnesses,
        reasons,
    })
}

fn analytic_coag_bound(
    kernel: &CoagulationKernel,
    model: &FragmentationModel,
    w: &WeightSequence,
    alpha: f64,
    j_max: usize,
    g_max: f64,
) -> Option<f64> {
    if kernel.is_zero() {
        return Some(0.0);
    }
    let rate_factor = |n: usize| (1.0 + model.a(n)).powf(alpha);
    let (power, factor) = match w.kind() {
        WeightKind::Power { p } => (Some(*p), 2f64.powf(*p)),
        WeightKind::Geometric { .. } => (None, 1.0),
        WeightKind::Tabulated(_) => return None,
    };
    let mut c_hat: f64 = 0.0;
    for n in 1..j_max {
        for j in n..=(j_max - n) {
            let mut denom = rate_factor(n) * rate_factor(j);
            if let Some(p) = power {
                denom *= (n as f64).powf(p);
            }
            c_hat = c_hat.max(kernel.size_factor(n, j) / denom);
        }
    }
    Some(factor * c_hat * g_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn becker_doring_coefficients() {
        let m = becker_doring_model();
        assert_eq!(m.a(1), 0.0);
        assert_eq!(m.a(7), 7.0);
        assert_eq!(m.b(1, 2), 2.0);
        assert_eq!(m.b(1, 5), 1.0);
        assert_eq!(m.b(4, 5), 1.0);
        assert_eq!(m.b(2, 5), 0.0);
        assert_eq!(m.b(5, 5), 0.0);
        assert_eq!(m.mass_defect(2), 0.0);
        assert_eq!(m.mass_defect(5), 0.0);
        assert!(m.mass_flags(DEFAULT_J_CHECK).conserving);
    }

    #[test]
    fn powerlaw_nu_one_at_three() {
        let d3 = Daughters::powerlaw_normalization(1.0, 3);
        assert!((d3 - 9.0 / 5.0).abs() < 1e-15);
        let m = powerlaw_model(1.0, Rates::becker_doring()).unwrap();
        assert!((m.b(1, 3) - 3.0 / 5.0).abs() < 1e-15);
        assert!((m.b(2, 3) - 6.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn powerlaw_nu_zero_is_uniform_binary() {
        let p = powerlaw_model(0.0, Rates::Zero).unwrap();
        let u = uniform_binary_model(Rates::Zero).unwrap();
        for j in 2..60 {
            for n in 1..j {
                assert!((p.b(n, j) - u.b(n, j)).abs() <= 1e-14 * u.b(n, j));
            }
        }
    }

    #[test]
    fn powerlaw_rejects_nu_below_minus_one() {
        assert!(matches!(powerlaw_model(-1.5, Rates::Zero), Err(Error::Domain(_))));
        assert!(powerlaw_model(-1.0, Rates::Zero).is_ok());
    }

    #[test]
    fn powerlaw_mass_defect_vanishes() {
        for &nu in &[-1.0, -0.5, 0.0, 1.0, 2.5] {
            let m = powerlaw_model(nu, Rates::becker_doring()).unwrap();
            for j in (2..1000).step_by(37).chain([999]) {
                assert!(m.mass_defect(j).abs() <= 1e-12 * j as f64, "nu={nu} j={j}");
            }
        }
    }

    #[test]
    fn monomer_removal_breaks_conservation_only() {
        let rates = Rates::Power {
            scale: 1.0,
            exponent: 1.0,
            monomer: 0.5,
        };
        let m = FragmentationModel::new(rates, Daughters::BeckerDoring).unwrap();
        let flags = m.mass_flags(100);
        assert!(!flags.conserving);
        assert!(flags.dissipative);
    }

    #[test]
    fn tabulated_daughters_validate() {
        assert!(Daughters::from_triples(&[(2, 2, 1.0)]).is_err());
        assert!(Daughters::from_triples(&[(1, 3, -1.0)]).is_err());
        let d = Daughters::from_triples(&[(1, 3, 1.0), (2, 3, 1.0), (1, 3, 0.5)]).unwrap();
        assert_eq!(d.b(1, 3), 1.5);
        let m = FragmentationModel::new(Rates::Table(vec![0.0, 0.0, 3.0]), d).unwrap();
        assert!((m.mass_defect(3) - (3.0 - 1.5 - 2.0)).abs() < 1e-15);
        assert!(!m.mass_flags(3).dissipative);
    }

    #[test]
    fn kernel_is_symmetric() {
        let table: Vec<Vec<f64>> = (1..=64)
            .map(|n| (1..=64).map(|j| if j >= n { (n * j) as f64 } else { 0.0 }).collect())
            .collect();
        let kernels = [
            CoagulationKernel::constant(2.0),
            CoagulationKernel::min(1.0),
            CoagulationKernel::new(KernelShape::ProductCapped { cap: 50.0 }, 1.0, TimeProfile::Linear { slope: 1.0 })
                .unwrap(),
            CoagulationKernel::new(
                KernelShape::RatePower {
                    rates: Rates::becker_doring(),
                    exponent: 0.5,
                },
                1.0,
                TimeProfile::Constant,
            )
            .unwrap(),
            CoagulationKernel::new(KernelShape::Table(Arc::new(table)), 1.0, TimeProfile::Constant).unwrap(),
            CoagulationKernel::new(KernelShape::Custom(Arc::new(|n, j| (n as f64).sqrt() + j as f64)), 1.0, TimeProfile::Constant)
                .unwrap(),
        ];
        for k in &kernels {
            for n in 1..=64 {
                for j in 1..=64 {
                    let t = 0.37;
                    assert_eq!(k.k(n, j, t), k.k(j, n, t));
                    assert!(k.k(n, j, t) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_negative_tables_and_profiles() {
        let table = vec![vec![1.0, -1.0], vec![0.0, 1.0]];
        assert!(CoagulationKernel::new(KernelShape::Table(Arc::new(table)), 1.0, TimeProfile::Constant).is_err());
        assert!(CoagulationKernel::new(
            KernelShape::Constant,
            1.0,
            TimeProfile::Oscillating {
                amplitude: 2.0,
                frequency: 1.0
            }
        )
        .is_err());
    }

    fn grid() -> Vec<f64> {
        (0..=10).map(|i| i as f64 / 10.0).collect()
    }

    #[test]
    fn constant_kernel_square_weight() {
        let w = WeightSequence::power(2.0).unwrap();
        let r = classify_assumptions(&FragmentationModel::none(), &CoagulationKernel::constant(1.0), &w, 0.0, 200, &grid())
            .unwrap();
        assert_eq!(r.analytic_c, Some(4.0));
        assert!(r.coag_constant_c <= 4.0 + 1e-12);
        assert!((r.coag_constant_c - 4.0).abs() < 1e-12);
        assert_eq!(r.case, AssumptionCase::CI);
    }

    #[test]
    fn min_kernel_square_weight_is_ci() {
        let w = WeightSequence::power(2.0).unwrap();
        let r = classify_assumptions(&becker_doring_model(), &CoagulationKernel::min(1.0), &w, 0.0, 200, &grid()).unwrap();
        assert_eq!(r.case, AssumptionCase::CI);
        assert!(r.coag_constant_c <= 4.0 + 1e-12);
        assert_eq!(r.analytic_c, Some(4.0));
    }

    #[test]
    fn rate_power_kernel_geometric_weight_is_cii() {
        let w = WeightSequence::geometric(3.0).unwrap();
        let k = CoagulationKernel::new(
            KernelShape::RatePower {
                rates: Rates::becker_doring(),
                exponent: 0.5,
            },
            1.0,
            TimeProfile::Constant,
        )
        .unwrap();
        let r = classify_assumptions(&becker_doring_model(), &k, &w, 0.5, 400, &grid()).unwrap();
        assert_eq!(r.case, AssumptionCase::CII, "{:?}", r.reasons);
        assert!((r.kappa_j - 2.0 / 3.0).abs() < 1e-12);
        let c_hat = r.analytic_c.unwrap();
        assert!((c_hat - 1.0).abs() < 1e-12);
        assert!(r.coag_constant_c <= c_hat * (1.0 + 1e-12));
    }

    #[test]
    fn product_kernel_with_linear_weight_is_unverified() {
        let w = WeightSequence::power(1.0).unwrap();
        let k = CoagulationKernel::new(KernelShape::ProductCapped { cap: f64::INFINITY }, 1.0, TimeProfile::Constant).unwrap();
        let r = classify_assumptions(&becker_doring_model(), &k, &w, 0.0, 400, &grid()).unwrap();
        assert_eq!(r.case, AssumptionCase::Unverified);
        assert!(r.coag_constant_c > 1.9 * r.coag_constant_half);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let w = WeightSequence::power(1.0).unwrap();
        assert!(matches!(
            classify_assumptions(&becker_doring_model(), &CoagulationKernel::zero(), &w, 0.0, 10, &[]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn classification_monotone_in_j_and_grid() {
        let w = WeightSequence::power(2.0).unwrap();
        let k = CoagulationKernel::new(
            KernelShape::Custom(Arc::new(|n, j| 1.0 + (n as f64).ln() * (j as f64).ln())),
            1.0,
            TimeProfile::Oscillating {
                amplitude: 0.5,
                frequency: 3.0,
            },
        )
        .unwrap();
        let m = powerlaw_model(1.0, Rates::becker_doring()).unwrap();
        let mut prev = (0.0, 0.0);
        for &(j, pts) in &[(20usize, 3usize), (40, 5), (80, 9), (160, 17)] {
            let g: Vec<f64> = (0..pts).map(|i| i as f64 / (pts - 1) as f64).collect();
            let r = classify_assumptions(&m, &k, &w, 0.0, j, &g).unwrap();
            assert!(r.kappa_j >= prev.0 && r.coag_constant_c >= prev.1);
            prev = (r.kappa_j, r.coag_constant_c);
        }
    }
}
