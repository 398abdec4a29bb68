//! Gauss–Legendre rules and their tensor products over boxes.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Roots are found by Newton iteration on the three-term recurrence,
/// started from the Chebyshev-like guess `cos(pi (i + 3/4) / (n + 1/2))`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Tensor-product rule for the uniform probability measure on the box
/// `[lower, upper]`. Weights sum to one.
pub fn uniform_box_rule(lower: &[f64], upper: &[f64], order: usize) -> Vec<(Vec<f64>, f64)> {
    let (nodes, weights) = gauss_legendre(order);
    let dim = lower.len();
    let total = order.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let mut point = Vec::with_capacity(dim);
        let mut w = 1.0;
        for (d, &k) in idx.iter().enumerate() {
            let half = 0.5 * (upper[d] - lower[d]);
            point.push(lower[d] + half * (nodes[k] + 1.0));
            w *= 0.5 * weights[k];
        }
        out.push((point, w));
        for d in (0..dim).rev() {
            idx[d] += 1;
            if idx[d] < order {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 32, 64] {
            let (_, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn three_point_rule_matches_table() {
        let (x, w) = gauss_legendre(3);
        let r = (0.6f64).sqrt();
        assert!((x[0] + r).abs() < 1e-15 && x[1].abs() < 1e-15 && (x[2] - r).abs() < 1e-15);
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-15 && (w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(8);
        for deg in 0..16 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg={deg}");
        }
    }

    #[test]
    fn box_rule_integrates_uniform_moments() {
        let rule = uniform_box_rule(&[0.0, 2.0], &[1.0, 5.0], 6);
        assert_eq!(rule.len(), 36);
        let mass: f64 = rule.iter().map(|(_, w)| w).sum();
        let m_xy: f64 = rule.iter().map(|(p, w)| w * p[0] * p[1]).sum();
        assert!((mass - 1.0).abs() < 1e-14);
        assert!((m_xy - 0.5 * 3.5).abs() < 1e-13);
    }
}
