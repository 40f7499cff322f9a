//! Discrete coagulation–fragmentation kinetics on truncated weighted `ℓ¹` spaces.
//!
//! The crate evaluates the truncated fragmentation semigroup and the
//! coagulation operator, solves the system by windowed Picard iteration of the
//! mild-solution map, cross-checks it against an embedded Runge–Kutta
//! integrator, and audits the quantitative invariants (mass ledger,
//! positivity, contraction, weighted-norm growth bounds).

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod kinetics;
pub mod mild;
pub mod operators;
pub mod oracle;
pub mod quad;
pub mod scenario;
pub mod semigroup;
pub mod state;
pub mod sum;
pub mod trajectory;
pub mod weights;

pub use error::{Error, Result};
pub use kinetics::{
    becker_doring_model, classify_assumptions, powerlaw_model, uniform_binary_model, AssumptionCase,
    AssumptionReport, CoagulationKernel, Daughters, FragmentationModel, KernelShape, Rates, TimeProfile,
};
pub use operators::{
    apply_coagulation, apply_fragmentation, coag_moment, frag_mass_rate, lipschitz_constant, CoagOperator,
    FragGenerator, Rhs, TruncationMode,
};
pub use state::TruncatedState;
pub use weights::{
    find_kappa_certificate, kappa_estimate, weighted_norm, MomentFunctional, TildeWeight, WeightFamily,
    WeightSequence, WeightTable,
};
