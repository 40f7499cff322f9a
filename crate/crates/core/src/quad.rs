//! Gauss–Legendre rules and an adaptive scalar integrator.

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1, "at least one quadrature point");
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-type initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

/// Adaptive Gauss–Legendre integration of `f` over `[a, b]`.
///
/// Each panel compares a 5-point and a 10-point rule; the panel with the
/// largest difference is bisected until the summed difference is below `tol`
/// or the panel budget is spent.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_PANELS: usize = 4000;
    let (x5, w5) = gauss_legendre(5);
    let (x10, w10) = gauss_legendre(10);
    let panel = |lo: f64, hi: f64| {
        let h = hi - lo;
        let coarse = crate::sum::sum(x5.iter().zip(&w5).map(|(xi, wi)| wi * h * f(lo + h * xi)));
        let fine = crate::sum::sum(x10.iter().zip(&w10).map(|(xi, wi)| wi * h * f(lo + h * xi)));
        (lo, hi, fine, (fine - coarse).abs())
    };
    let mut panels = vec![panel(a, b)];
    loop {
        let total_err = crate::sum::sum(panels.iter().map(|p| p.3));
        if total_err <= tol || panels.len() >= MAX_PANELS {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = panels[worst];
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        panels.swap_remove(worst);
        panels.push(panel(lo, mid));
        panels.push(panel(mid, hi));
    }
    panels.sort_by(|p, q| p.0.total_cmp(&q.0));
    crate::sum::sum(panels.iter().map(|p| p.2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_high_degree_polynomials() {
        for q in 1..=12 {
            let (x, w) = gauss_legendre(q);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..(2 * q) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((approx - exact).abs() < 1e-13, "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn nodes_are_sorted_inside_unit_interval() {
        let (x, _) = gauss_legendre(7);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(x[0] > 0.0 && x[6] < 1.0);
        assert!((x[3] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_weak_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let v = integrate(|x| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        let e = integrate(f64::exp, 0.0, 1.0, 1e-14);
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }
}
