//! Time-stamped solution records shared by the Picard solver and the oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::TruncatedState;
use crate::weights::WeightTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Picard,
    Oracle,
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EngineKind::Picard => write!(f, "picard"),
            EngineKind::Oracle => write!(f, "oracle"),
        }
    }
}

/// Diagnostics of one Picard window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub t0: f64,
    pub t1: f64,
    /// Admissible window length from the step rule (before clipping to `T`).
    pub delta: f64,
    pub radius: f64,
    pub gamma: f64,
    pub subintervals: usize,
    pub picard_iterations: usize,
    /// Largest ratio of successive Picard differences.
    pub contraction_ratio_observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blowup {
    pub time: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub engine: EngineKind,
    pub times: Vec<f64>,
    pub states: Vec<TruncatedState>,
    /// Picard iterations of the window ending at each time; `None` for the oracle.
    pub picard_iters: Vec<Option<usize>>,
    pub window_log: Vec<WindowRecord>,
    pub blowup: Option<Blowup>,
}

impl Trajectory {
    pub fn new(engine: EngineKind) -> Self {
        Self {
            engine,
            times: Vec::new(),
            states: Vec::new(),
            picard_iters: Vec::new(),
            window_log: Vec::new(),
            blowup: None,
        }
    }

    /// Appends a state; times must increase strictly.
    pub fn push(&mut self, t: f64, state: TruncatedState, iters: Option<usize>) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::Precondition(format!("trajectory time {t} does not exceed {last}")));
            }
        }
        self.times.push(t);
        self.states.push(state);
        self.picard_iters.push(iters);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &TruncatedState)> {
        self.times.last().copied().zip(self.states.last())
    }

    /// Moment rows for export and audits. `stride = 0` drops the components;
    /// otherwise `u_1, u_{1+stride}, …` are kept.
    pub fn rows(&self, w: &WeightTable, wt: &WeightTable, stride: usize) -> Vec<MomentRow> {
        self.times
            .iter()
            .zip(&self.states)
            .zip(&self.picard_iters)
            .map(|((&t, s), &it)| MomentRow::from_state(t, s, w, wt, it, stride))
            .collect()
    }
}

/// One output row: moments, norms, ledger and optionally the components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub m0: f64,
    pub m1: f64,
    pub norm_w: f64,
    pub norm_wtilde: f64,
    pub leakage: f64,
    pub min_component: f64,
    pub picard_iters: Option<usize>,
    /// `(size, u_size)` pairs kept at the configured stride.
    pub components: Vec<(usize, f64)>,
}

impl MomentRow {
    pub fn from_state(
        t: f64,
        s: &TruncatedState,
        w: &WeightTable,
        wt: &WeightTable,
        picard_iters: Option<usize>,
        stride: usize,
    ) -> Self {
        let components = if stride == 0 {
            Vec::new()
        } else {
            (1..=s.len()).step_by(stride).map(|n| (n, s.u[n - 1])).collect()
        };
        Self {
            t,
            m0: s.number(),
            m1: s.mass(),
            norm_w: w.norm(&s.u),
            norm_wtilde: wt.norm(&s.u),
            leakage: s.leakage_mass,
            min_component: s.min_component(),
            picard_iters,
            components,
        }
    }

    /// Smallest density seen in the row, including any dumped components.
    pub fn min_density(&self) -> f64 {
        self.components.iter().map(|c| c.1).fold(self.min_component, f64::min)
    }
}
