//! The truncated fragmentation semigroup `S(t) = e^{tG}` and the Duhamel
//! integral `∫ S(t1 - s) φ(s) ds`.
//!
//! `G` is upper triangular with diagonal `-a_n <= 0` and non-negative entries
//! above it. Writing `G = λ (P - I)` with `λ = max a_n` makes `P` entrywise
//! non-negative, so `e^{tG} = e^{-λt} Σ_k (λt)^k P^k / k!` is a sum of
//! non-negative terms. The series is evaluated by Horner's rule after scaling
//! by `2^{-s}` and then squared back `s` times; no subtraction ever occurs, so
//! positivity is exact and coincident rates need no special treatment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::FragmentationModel;
use crate::operators::FragGenerator;
use crate::oracle::{self, OracleConfig, Splitting};
use crate::quad::gauss_legendre;
use crate::state::TruncatedState;
use crate::weights::WeightTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemigroupMethod {
    /// Uniformised scaling-and-squaring series on the triangular matrix.
    #[default]
    TriangularRecursive,
    /// Lawson Dormand–Prince on `u' = G u`, for sizes where a dense `N x N`
    /// propagator is too large.
    StiffOdeFallback,
}

/// Largest scaled norm `‖2^{-s} t G‖` admitted before the series is summed.
const SCALED_NORM: f64 = 0.25;
/// Truncation threshold of the series tail relative to the result.
const SERIES_TAIL: f64 = 1e-17;

/// `S(t)` for one fixed `t`, ready to be applied repeatedly.
#[derive(Debug, Clone)]
pub enum Propagator {
    Identity,
    /// `e^{t d_n}` for a diagonal generator.
    Diagonal(Vec<f64>),
    /// Row-major `N x N`, zero below the diagonal.
    Dense { n: usize, m: Vec<f64> },
    Ode { gen: FragGenerator, t: f64, tol: f64 },
}

impl Propagator {
    /// `out += scale · S(t) f`.
    pub fn apply_add(&self, f: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
        match self {
            Propagator::Identity => {
                for (o, x) in out.iter_mut().zip(f) {
                    *o += scale * x;
                }
            }
            Propagator::Diagonal(e) => {
                for ((o, x), e) in out.iter_mut().zip(f).zip(e) {
                    *o += scale * e * x;
                }
            }
            Propagator::Dense { n, m } => {
                let top = match f.iter().rposition(|x| *x != 0.0) {
                    Some(i) => i + 1,
                    None => return Ok(()),
                };
                for i in 0..top {
                    let row = &m[i * n + i..i * n + top];
                    let mut acc = 0.0;
                    for (a, x) in row.iter().zip(&f[i..top]) {
                        acc += a * x;
                    }
                    out[i] += scale * acc;
                }
            }
            Propagator::Ode { gen, t, tol } => {
                let v = ode_apply(gen, f, *t, *tol)?;
                for (o, x) in out.iter_mut().zip(&v) {
                    *o += scale * x;
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; f.len()];
        self.apply_add(f, 1.0, &mut out)?;
        Ok(out)
    }
}

/// Evaluates `S_N(t)` for a fixed generator.
#[derive(Debug, Clone)]
pub struct SemigroupEvaluator {
    gen: FragGenerator,
    method: SemigroupMethod,
    tol: f64,
    weight: WeightTable,
}

impl SemigroupEvaluator {
    /// `weight` defines the norm in which `tol` is measured.
    pub fn new(model: &FragmentationModel, n: usize, weight: WeightTable, tol: f64, method: SemigroupMethod) -> Result<Self> {
        if weight.len() < n {
            return Err(Error::Config(format!("weight tabulated up to {}, need {n}", weight.len())));
        }
        if !(tol > 0.0) {
            return Err(Error::Config("semigroup tolerance must be positive".into()));
        }
        Ok(Self {
            gen: FragGenerator::from_model(model, n),
            method,
            tol,
            weight,
        })
    }

    /// Evaluator for `G - γ diag(h)`. With `h ≡ 1` this is `e^{-γt} S(t)`.
    pub fn with_shift(&self, gamma: f64, h: &[f64]) -> Result<Self> {
        if !(gamma >= 0.0) || h.len() != self.len() || h.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Domain("shift needs gamma >= 0 and a non-negative factor per size".into()));
        }
        let shift: Vec<f64> = h.iter().map(|x| gamma * x).collect();
        Ok(Self {
            gen: self.gen.shifted(&shift),
            ..self.clone()
        })
    }

    pub fn len(&self) -> usize {
        self.gen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gen.is_empty()
    }

    pub fn generator(&self) -> &FragGenerator {
        &self.gen
    }

    pub fn method(&self) -> SemigroupMethod {
        self.method
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn weight(&self) -> &WeightTable {
        &self.weight
    }

    pub fn propagator(&self, t: f64) -> Result<Propagator> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("semigroup time must be non-negative, got {t}")));
        }
        let diag = self.gen.diag();
        if t == 0.0 || (self.gen.is_diagonal() && diag.iter().all(|d| *d == 0.0)) {
            return Ok(Propagator::Identity);
        }
        if self.gen.is_diagonal() {
            return Ok(Propagator::Diagonal(diag.iter().map(|d| (d * t).exp()).collect()));
        }
        Ok(match self.method {
            SemigroupMethod::TriangularRecursive => Propagator::Dense {
                n: self.len(),
                m: expm_uniformized(&self.gen, t),
            },
            SemigroupMethod::StiffOdeFallback => Propagator::Ode {
                gen: self.gen.clone(),
                t,
                tol: self.tol,
            },
        })
    }

    /// `S(t) f`; the leakage ledger is carried over unchanged.
    pub fn apply(&self, f: &TruncatedState, t: f64) -> Result<TruncatedState> {
        if f.len() != self.len() {
            return Err(Error::Config(format!("state has {} sizes, evaluator {}", f.len(), self.len())));
        }
        let u = self.propagator(t)?.apply(&f.u)?;
        Ok(TruncatedState {
            u,
            leakage_mass: f.leakage_mass,
        })
    }

    /// `∫_{t0}^{t1} S(t1 - s) φ(s) ds` by composite Gauss panels, doubling the
    /// panel count until two estimates differ by at most
    /// `tol · (t1 - t0) · max ‖φ‖_w`.
    pub fn duhamel_integral<F>(&self, phi: F, t0: f64, t1: f64, tol: f64) -> Result<TruncatedState>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        if !(t1 > t0) {
            return Err(Error::Domain(format!("Duhamel interval needs t0 < t1, got [{t0}, {t1}]")));
        }
        const MAX_PANELS: usize = 4096;
        let (x, wq) = gauss_legendre(5);
        let n = self.len();
        let mut prev: Option<Vec<f64>> = None;
        let mut phi_max: f64 = 0.0;
        let mut panels = 1usize;
        while panels <= MAX_PANELS {
            let h = (t1 - t0) / panels as f64;
            let step = self.propagator(h)?;
            let nodes: Vec<Propagator> = x.iter().map(|xg| self.propagator(h * (1.0 - xg))).collect::<Result<_>>()?;
            let mut acc = vec![0.0; n];
            for p in 0..panels {
                let mut next = vec![0.0; n];
                step.apply_add(&acc, 1.0, &mut next)?;
                for ((xg, wg), prop) in x.iter().zip(&wq).zip(&nodes) {
                    let v = phi(t0 + (p as f64 + xg) * h);
                    if v.len() != n {
                        return Err(Error::Config("Duhamel integrand has the wrong length".into()));
                    }
                    phi_max = phi_max.max(self.weight.norm(&v));
                    prop.apply_add(&v, h * wg, &mut next)?;
                }
                acc = next;
            }
            if let Some(p) = &prev {
                let d: Vec<f64> = acc.iter().zip(p).map(|(a, b)| a - b).collect();
                if self.weight.norm(&d) <= tol * (t1 - t0) * phi_max {
                    return Ok(TruncatedState::from_densities(acc));
                }
            }
            prev = Some(acc);
            panels *= 2;
        }
        Err(Error::Convergence(format!("Duhamel quadrature did not settle with {MAX_PANELS} panels")))
    }
}

/// Dense `e^{tG}` of an upper-triangular Metzler generator.
fn expm_uniformized(gen: &FragGenerator, t: f64) -> Vec<f64> {
    let n = gen.len();
    let diag = gen.diag();
    let lambda = diag.iter().fold(0.0f64, |m, d| m.max(-d));
    let norm = lambda * t + t * gen.column_norm();
    let mut s = 0i32;
    while norm / 2f64.powi(s) > SCALED_NORM {
        s += 1;
    }
    let x = norm / 2f64.powi(s);
    let theta = lambda * t / 2f64.powi(s);

    // P = I + G/λ
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        p[i * n + i] = (1.0 + diag[i] / lambda).max(0.0);
        for &(j, v) in &gen.rows()[i] {
            p[i * n + (j - 1)] = v / lambda;
        }
    }
    // terms needed for x^{K+1} / (K+1)! < SERIES_TAIL
    let mut k_max = 1usize;
    let mut term = x;
    while term > SERIES_TAIL {
        k_max += 1;
        term *= x / k_max as f64;
    }
    // Horner: R = I + (θ/k) P R, k = K..1
    let mut r = identity(n);
    for k in (1..=k_max).rev() {
        let mut pr = tri_mul(&p, &r, n);
        let c = theta / k as f64;
        for v in pr.iter_mut() {
            *v *= c;
        }
        for i in 0..n {
            pr[i * n + i] += 1.0;
        }
        r = pr;
    }
    let damp = (-theta).exp();
    for v in r.iter_mut() {
        *v *= damp;
    }
    for _ in 0..s {
        r = tri_mul(&r, &r, n);
    }
    r
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// Product of two upper-triangular row-major matrices.
fn tri_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        let (_, rest) = c.split_at_mut(i * n);
        let crow = &mut rest[..n];
        for k in i..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            for j in k..n {
                crow[j] += aik * brow[j];
            }
        }
    }
    c
}

fn ode_apply(gen: &FragGenerator, f: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    let scale = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(vec![0.0; f.len()]);
    }
    let cfg = OracleConfig {
        rtol: tol,
        atol: tol * scale * 1e-3,
        splitting: Splitting::LawsonDiagonal,
        ..Default::default()
    };
    let (ys, _) = oracle::dopri5(
        |_, y, dy| gen.apply_offdiag_into(y, dy),
        Some(gen.diag()),
        f,
        0.0,
        &[t],
        &cfg,
    )?;
    Ok(ys.into_iter().next().unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{becker_doring_model, powerlaw_model, Rates};
    use crate::weights::WeightSequence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear(n: usize) -> WeightTable {
        WeightSequence::power(1.0).unwrap().table(n).unwrap()
    }

    fn evaluator(model: &FragmentationModel, n: usize, method: SemigroupMethod) -> SemigroupEvaluator {
        SemigroupEvaluator::new(model, n, linear(n), 1e-10, method).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> TruncatedState {
        TruncatedState::from_densities((1..=n).map(|i| rng.gen::<f64>() / (i * i) as f64).collect())
    }

    #[test]
    fn zero_time_is_identity() {
        let ev = evaluator(&becker_doring_model(), 16, SemigroupMethod::TriangularRecursive);
        let f = TruncatedState::from_densities((1..=16).map(|i| 1.0 / i as f64).collect());
        assert_eq!(ev.apply(&f, 0.0).unwrap(), f);
        assert!(matches!(ev.apply(&f, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn diagonal_flow() {
        let m = FragmentationModel::decay_only(Rates::Power {
            scale: 1.0,
            exponent: 1.0,
            monomer: 1.0,
        })
        .unwrap();
        let ev = evaluator(&m, 4, SemigroupMethod::TriangularRecursive);
        let out = ev.apply(&TruncatedState::from_densities(vec![1.0, 1.0, 0.0, 0.0]), 1.0).unwrap();
        assert_eq!(out.u, vec![(-1f64).exp(), (-2f64).exp(), 0.0, 0.0]);
    }

    #[test]
    fn becker_doring_is_stochastic() {
        let ev = evaluator(&becker_doring_model(), 64, SemigroupMethod::TriangularRecursive);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let f = random_state(&mut rng, 64);
            let t = rng.gen::<f64>();
            let g = ev.apply(&f, t).unwrap();
            assert!((g.mass() - f.mass()).abs() <= 1e-13 * f.mass());
            assert!(g.is_nonnegative());
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        // a_2 = 2, b_{1,2} = 2: u_2 = e^{-2t} and u_1' = 4 u_2
        let ev = evaluator(&becker_doring_model(), 2, SemigroupMethod::TriangularRecursive);
        let t = 0.7;
        let g = ev.apply(&TruncatedState::from_densities(vec![0.0, 1.0]), t).unwrap();
        let e = (-2.0 * t).exp();
        assert!((g.u[1] - e).abs() < 1e-15);
        assert!((g.u[0] - 2.0 * (1.0 - e)).abs() < 1e-15);
    }

    #[test]
    fn semigroup_property_and_fallback_agree() {
        let m = powerlaw_model(1.0, Rates::becker_doring()).unwrap();
        let tri = evaluator(&m, 48, SemigroupMethod::TriangularRecursive);
        let ode = evaluator(&m, 48, SemigroupMethod::StiffOdeFallback);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = linear(48);
        for _ in 0..5 {
            let f = random_state(&mut rng, 48);
            let (t, s) = (rng.gen::<f64>(), rng.gen::<f64>());
            let whole = tri.apply(&f, t + s).unwrap();
            let split = tri.apply(&tri.apply(&f, s).unwrap(), t).unwrap();
            let d: Vec<f64> = whole.u.iter().zip(&split.u).map(|(a, b)| a - b).collect();
            assert!(w.norm(&d) <= 1e-12 * w.norm(&f.u), "{}", w.norm(&d));
            let other = ode.apply(&f, t).unwrap();
            let direct = tri.apply(&f, t).unwrap();
            let d: Vec<f64> = other.u.iter().zip(&direct.u).map(|(a, b)| a - b).collect();
            assert!(w.norm(&d) <= 1e-8 * w.norm(&f.u), "{}", w.norm(&d));
        }
    }

    #[test]
    fn unit_shift_is_exponential_damping() {
        let ev = evaluator(&becker_doring_model(), 32, SemigroupMethod::TriangularRecursive);
        let shifted = ev.with_shift(1.0, &[1.0; 32]).unwrap();
        let f = TruncatedState::from_densities((1..=32).map(|i| 1.0 / i as f64).collect());
        for t in [0.1, 0.5, 1.3] {
            let a = shifted.apply(&f, t).unwrap();
            let b = ev.apply(&f, t).unwrap();
            for (x, y) in a.u.iter().zip(&b.u) {
                assert!((x - (-t as f64).exp() * y).abs() <= 1e-12 * y.abs().max(1e-300), "{x} {y}");
            }
        }
    }

    #[test]
    fn duhamel_examples() {
        let n = 6;
        let none = FragmentationModel::none();
        let ev = evaluator(&none, n, SemigroupMethod::TriangularRecursive);
        let g = vec![1.0, 0.5, 0.0, 0.0, 0.25, 0.0];
        let out = ev.duhamel_integral(|_| g.clone(), 0.5, 2.0, 1e-12).unwrap();
        for (o, x) in out.u.iter().zip(&g) {
            assert!((o - 1.5 * x).abs() < 1e-15);
        }
        let zero = ev.duhamel_integral(|_| vec![0.0; n], 0.0, 1.0, 1e-12).unwrap();
        assert!(zero.u.iter().all(|x| *x == 0.0));
        assert!(matches!(ev.duhamel_integral(|_| vec![0.0; n], 1.0, 1.0, 1e-12), Err(Error::Domain(_))));

        let decay = FragmentationModel::decay_only(Rates::Power {
            scale: 1.0,
            exponent: 1.0,
            monomer: 1.0,
        })
        .unwrap();
        let ev = evaluator(&decay, n, SemigroupMethod::TriangularRecursive);
        let e1 = TruncatedState::unit(n, 1).u;
        let out = ev.duhamel_integral(|_| e1.clone(), 0.25, 1.0, 1e-12).unwrap();
        assert!((out.u[0] - (1.0 - (-0.75f64).exp())).abs() < 1e-13);
        // η-bound
        assert!(out.u[0] <= 0.75 * (1.0 + 1e-12));
    }
}
