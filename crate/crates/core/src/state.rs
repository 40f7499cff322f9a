use serde::{Deserialize, Serialize};

/// Cluster densities `u_1..u_N` plus the mass carried above size `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedState {
    pub u: Vec<f64>,
    pub leakage_mass: f64,
}

impl TruncatedState {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            leakage_mass: 0.0,
        }
    }

    pub fn from_densities(u: Vec<f64>) -> Self {
        Self { u, leakage_mass: 0.0 }
    }

    /// Unit density at a single size (1-based).
    pub fn unit(n: usize, size: usize) -> Self {
        assert!(size >= 1 && size <= n, "size {size} outside 1..={n}");
        let mut s = Self::zeros(n);
        s.u[size - 1] = 1.0;
        s
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn min_component(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.u.iter().all(|x| *x >= 0.0)
    }

    /// `Σ u_n`
    pub fn number(&self) -> f64 {
        crate::sum::sum(self.u.iter().copied())
    }

    /// `Σ n u_n`
    pub fn mass(&self) -> f64 {
        crate::sum::sum(self.u.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x))
    }
}
