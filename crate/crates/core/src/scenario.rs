//! TOML scenario files: model, kernel, initial state, solver and audit settings.
//!
//! ```toml
//! seed = 7
//! alpha = 0.0
//!
//! [weight]
//! family = "power"
//! p = 1.0
//!
//! [frag]
//! preset = "becker_doring"
//!
//! [coag]
//! shape = "constant"
//! scale = 1.0
//!
//! [initial]
//! kind = "unit"
//! size = 1
//!
//! [truncation]
//! n = 256
//! mode = "conservative_drop"
//!
//! [solver]
//! engine = "both"
//! horizon = 1.0
//!
//! [audits]
//! checks = ["mass", "positivity"]
//!
//! [output]
//! path = "out/bd"
//! stride = 0
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{CoagulationKernel, Daughters, FragmentationModel, KernelShape, Rates, TimeProfile};
use crate::mild::{GammaShift, Problem, SolverConfig};
use crate::operators::TruncationMode;
use crate::oracle::{OracleConfig, Splitting};
use crate::semigroup::SemigroupMethod;
use crate::state::TruncatedState;
use crate::weights::WeightSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub alpha: f64,
    pub weight: WeightSpec,
    #[serde(default)]
    pub frag: FragSpec,
    #[serde(default)]
    pub coag: CoagSpec,
    pub initial: InitialSpec,
    pub truncation: TruncationSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub audits: AuditSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Power { p: f64 },
    Geometric { r: f64 },
    Table { values: Vec<f64> },
}

impl WeightSpec {
    pub fn build(&self) -> Result<WeightSequence> {
        match self {
            WeightSpec::Power { p } => WeightSequence::power(*p),
            WeightSpec::Geometric { r } => WeightSequence::geometric(*r),
            WeightSpec::Table { values } => WeightSequence::tabulated(values.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RatesSpec {
    Zero,
    BeckerDoring,
    Power {
        scale: f64,
        exponent: f64,
        #[serde(default)]
        monomer: f64,
    },
    Table { values: Vec<f64> },
}

impl RatesSpec {
    fn build(&self) -> Rates {
        match self {
            RatesSpec::Zero => Rates::Zero,
            RatesSpec::BeckerDoring => Rates::becker_doring(),
            RatesSpec::Power {
                scale,
                exponent,
                monomer,
            } => Rates::Power {
                scale: *scale,
                exponent: *exponent,
                monomer: *monomer,
            },
            RatesSpec::Table { values } => Rates::Table(values.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DaughtersSpec {
    None,
    BeckerDoring,
    PowerLaw { nu: f64 },
    UniformBinary,
    /// `[n, j, b_{n,j}]` triples.
    Table { entries: Vec<(usize, usize, f64)> },
}

impl DaughtersSpec {
    fn build(&self) -> Result<Daughters> {
        Ok(match self {
            DaughtersSpec::None => Daughters::None,
            DaughtersSpec::BeckerDoring => Daughters::BeckerDoring,
            DaughtersSpec::PowerLaw { nu } => Daughters::PowerLaw { nu: *nu },
            DaughtersSpec::UniformBinary => Daughters::UniformBinary,
            DaughtersSpec::Table { entries } => Daughters::from_triples(entries)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragPreset {
    None,
    BeckerDoring,
}

/// Either a preset or explicit `rates` and `daughters`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragSpec {
    pub preset: Option<FragPreset>,
    pub rates: Option<RatesSpec>,
    pub daughters: Option<DaughtersSpec>,
}

impl FragSpec {
    pub fn build(&self) -> Result<FragmentationModel> {
        match (self.preset, &self.rates, &self.daughters) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                Err(Error::Config("[frag] takes either a preset or rates/daughters, not both".into()))
            }
            (Some(FragPreset::BeckerDoring), None, None) => Ok(crate::kinetics::becker_doring_model()),
            (Some(FragPreset::None), None, None) | (None, None, None) => Ok(FragmentationModel::none()),
            (None, rates, daughters) => FragmentationModel::new(
                rates.as_ref().map_or(Rates::Zero, RatesSpec::build),
                daughters.as_ref().map_or(Ok(Daughters::None), DaughtersSpec::build)?,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    #[default]
    Zero,
    Constant,
    Min,
    ProductCapped,
    Sum,
    RatePower,
    Table,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    #[default]
    Constant,
    Linear { slope: f64 },
    Exponential { rate: f64 },
    Oscillating { amplitude: f64, frequency: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoagSpec {
    #[serde(default)]
    pub shape: ShapeName,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub profile: ProfileSpec,
    /// `product_capped` only.
    pub cap: Option<f64>,
    /// `rate_power` only: exponent and the rates it is built from.
    pub exponent: Option<f64>,
    pub rates: Option<RatesSpec>,
    /// `table` only: `values[n-1][j-1]` for `n <= j`.
    pub values: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

impl Default for CoagSpec {
    fn default() -> Self {
        Self {
            shape: ShapeName::Zero,
            scale: 1.0,
            profile: ProfileSpec::Constant,
            cap: None,
            exponent: None,
            rates: None,
            values: None,
        }
    }
}

impl CoagSpec {
    pub fn build(&self) -> Result<CoagulationKernel> {
        let need = |what: &str| Error::Config(format!("[coag] shape {:?} needs `{what}`", self.shape));
        let shape = match self.shape {
            ShapeName::Zero => KernelShape::Zero,
            ShapeName::Constant => KernelShape::Constant,
            ShapeName::Min => KernelShape::Min,
            ShapeName::Sum => KernelShape::Sum,
            ShapeName::ProductCapped => KernelShape::ProductCapped {
                cap: self.cap.ok_or_else(|| need("cap"))?,
            },
            ShapeName::RatePower => KernelShape::RatePower {
                rates: self.rates.as_ref().ok_or_else(|| need("rates"))?.build(),
                exponent: self.exponent.ok_or_else(|| need("exponent"))?,
            },
            ShapeName::Table => KernelShape::Table(Arc::new(self.values.clone().ok_or_else(|| need("values"))?)),
        };
        let profile = match self.profile {
            ProfileSpec::Constant => TimeProfile::Constant,
            ProfileSpec::Linear { slope } => TimeProfile::Linear { slope },
            ProfileSpec::Exponential { rate } => TimeProfile::Exponential { rate },
            ProfileSpec::Oscillating { amplitude, frequency } => TimeProfile::Oscillating { amplitude, frequency },
        };
        CoagulationKernel::new(shape, self.scale, profile)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `amount · e_size`
    Unit {
        size: usize,
        #[serde(default = "one")]
        amount: f64,
    },
    /// `Σ e_size` over the listed sizes.
    Units { sizes: Vec<usize> },
    /// `u_n = values[n-1]`, zero past the list.
    Values { values: Vec<f64> },
    /// `u_n = amplitude · exp(-decay n)`
    Exponential { amplitude: f64, decay: f64 },
}

impl InitialSpec {
    pub fn build(&self, n: usize) -> Result<TruncatedState> {
        let mut u = TruncatedState::zeros(n);
        let check = |size: usize| {
            if size == 0 || size > n {
                Err(Error::Config(format!("initial size {size} outside 1..={n}")))
            } else {
                Ok(size)
            }
        };
        match self {
            InitialSpec::Unit { size, amount } => u.u[check(*size)? - 1] = *amount,
            InitialSpec::Units { sizes } => {
                for &s in sizes {
                    u.u[check(s)? - 1] += 1.0;
                }
            }
            InitialSpec::Values { values } => {
                if values.len() > n {
                    return Err(Error::Config(format!("{} initial values exceed N = {n}", values.len())));
                }
                u.u[..values.len()].copy_from_slice(values);
            }
            InitialSpec::Exponential { amplitude, decay } => {
                for (i, x) in u.u.iter_mut().enumerate() {
                    *x = amplitude * (-decay * (i + 1) as f64).exp();
                }
            }
        }
        if u.u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("initial state is not finite".into()));
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    pub n: usize,
    #[serde(default)]
    pub mode: TruncationMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Picard,
    Oracle,
    Both,
}

/// Solver and oracle settings; omitted keys keep the library defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub engine: Engine,
    pub horizon: f64,
    pub tol_picard: Option<f64>,
    pub tol_semigroup: Option<f64>,
    pub tol_refine: Option<f64>,
    pub safety: Option<f64>,
    pub r_floor: Option<f64>,
    pub gamma_shift: Option<GammaShift>,
    pub delta_min: Option<f64>,
    pub max_windows: Option<usize>,
    pub max_picard_iters: Option<usize>,
    pub norm_cap_factor: Option<f64>,
    pub subintervals: Option<usize>,
    pub refine: Option<bool>,
    pub semigroup_method: Option<SemigroupMethod>,
    pub coag_constant: Option<f64>,
    pub j_classify: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_step: Option<f64>,
    pub splitting: Option<Splitting>,
    /// Oracle output points when it runs alone.
    pub outputs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditName {
    Mass,
    Positivity,
    GlobalBound,
    CpInequality,
    Contraction,
    Semigroup,
    ContinuousDependence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalBoundSpec {
    pub p: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSpec {
    pub checks: Vec<AuditName>,
    pub tol_mass: f64,
    pub tol_positivity: f64,
    pub tol_bound: f64,
    /// Oracle agreement bound is `max(tol_agreement, 50 tol_picard)`.
    pub tol_agreement: f64,
    pub global_bound: Option<GlobalBoundSpec>,
    pub samples: usize,
    pub cp_samples: usize,
    pub perturbation: f64,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self {
            checks: vec![AuditName::Mass, AuditName::Positivity],
            tol_mass: 1e-8,
            tol_positivity: 1e-10,
            tol_bound: 1e-8,
            tol_agreement: 1e-6,
            global_bound: None,
            samples: 100,
            cp_samples: 100_000,
            perturbation: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Path stem; the extension follows the format.
    pub path: String,
    pub format: OutputFormat,
    /// `0` drops the component dump.
    pub stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            path: "coagfrag_run".into(),
            format: OutputFormat::Csv,
            stride: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n_list: Vec<usize>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.truncation.n == 0 {
            return Err(Error::Config("truncation.n must be at least 1".into()));
        }
        if !(self.solver.horizon > 0.0 && self.solver.horizon.is_finite()) {
            return Err(Error::Config("solver.horizon must be positive".into()));
        }
        if self.audits.checks.contains(&AuditName::GlobalBound) && self.audits.global_bound.is_none() {
            return Err(Error::Config("global_bound audit needs [audits.global_bound] p and mu".into()));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem> {
        Ok(Problem {
            model: self.frag.build()?,
            kernel: self.coag.build()?,
            weight: self.weight.build()?,
            alpha: self.alpha,
        })
    }

    pub fn initial_state(&self) -> Result<TruncatedState> {
        self.initial.build(self.truncation.n)
    }

    pub fn solver_config(&self, force: bool) -> SolverConfig {
        let s = &self.solver;
        let d = SolverConfig::default();
        SolverConfig {
            n: self.truncation.n,
            mode: self.truncation.mode,
            tol_picard: s.tol_picard.unwrap_or(d.tol_picard),
            tol_semigroup: s.tol_semigroup.unwrap_or(d.tol_semigroup),
            tol_refine: s.tol_refine.unwrap_or(d.tol_refine),
            safety: s.safety.unwrap_or(d.safety),
            r_floor: s.r_floor.unwrap_or(d.r_floor),
            gamma_shift: s.gamma_shift.unwrap_or(d.gamma_shift),
            delta_min: s.delta_min.unwrap_or(d.delta_min),
            max_windows: s.max_windows.unwrap_or(d.max_windows),
            max_picard_iters: s.max_picard_iters.unwrap_or(d.max_picard_iters),
            norm_cap_factor: s.norm_cap_factor.unwrap_or(d.norm_cap_factor),
            subintervals: s.subintervals.unwrap_or(d.subintervals),
            refine: s.refine.unwrap_or(d.refine),
            semigroup_method: s.semigroup_method.unwrap_or(d.semigroup_method),
            coag_constant: s.coag_constant,
            j_classify: s.j_classify,
            force,
            ..d
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        let s = &self.solver;
        let d = OracleConfig::default();
        OracleConfig {
            rtol: s.rtol.unwrap_or(d.rtol),
            atol: s.atol.unwrap_or(d.atol),
            max_step: s.max_step.unwrap_or(d.max_step),
            splitting: s.splitting.unwrap_or(d.splitting),
            outputs: s.outputs.unwrap_or(d.outputs),
            ..d
        }
    }
}
