//! Compensated (Neumaier) summation.
//!
//! Every reduction whose result is compared against an exact identity goes
//! through [`NeumaierSum`], accumulated in ascending index order.

use std::ops::{Add, AddAssign};

#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self { s: 0.0, c: 0.0 }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

impl From<f64> for NeumaierSum {
    fn from(value: f64) -> Self {
        Self { s: value, c: 0.0 }
    }
}

impl AddAssign<f64> for NeumaierSum {
    #[inline]
    fn add_assign(&mut self, rhs: f64) {
        let t = self.s + rhs;
        if self.s.abs() >= rhs.abs() {
            self.c += (self.s - t) + rhs;
        } else {
            self.c += (rhs - t) + self.s;
        }
        self.s = t;
    }
}

impl Add<f64> for NeumaierSum {
    type Output = Self;

    fn add(mut self, rhs: f64) -> Self {
        self += rhs;
        self
    }
}

impl Add for NeumaierSum {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs.s;
        self += rhs.c;
        self
    }
}

/// Compensated sum of a sequence, in iteration order.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = NeumaierSum::new();
    for v in values {
        acc += v;
    }
    acc.value()
}

/// Compensated `Σ a_i b_i` over the common prefix of `a` and `b`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc.value()
}
