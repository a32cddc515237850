//! Gauss–Legendre rules and a node-doubling driver.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_a^b f` with the `n`-point rule.
pub fn integrate_fixed(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Result of [`integrate_doubling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// Change between the last two rules.
    pub change: f64,
    pub nodes: usize,
}

/// Double the node count from `start` until successive estimates differ
/// by at most `tol` or `max_nodes` is reached.
pub fn integrate_doubling(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    start: usize,
    max_nodes: usize,
    tol: f64,
) -> QuadratureResult {
    let mut n = start;
    let mut prev = integrate_fixed(&mut f, a, b, n);
    loop {
        let next_n = 2 * n;
        let value = integrate_fixed(&mut f, a, b, next_n);
        let change = (value - prev).abs();
        if change <= tol || next_n >= max_nodes {
            return QuadratureResult {
                value,
                change,
                nodes: next_n,
            };
        }
        prev = value;
        n = next_n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_polynomials_are_exact() {
        for n in [1, 2, 5, 64, 1024] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12, "n = {n}");
            assert!(x.windows(2).all(|p| p[1] > p[0]));
            // degree 2n-1 is integrated exactly
            let deg = (2 * n - 1).min(21) as i32;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg)).sum();
            assert!((approx - exact).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn smooth_integrand_converges() {
        let r = integrate_doubling(f64::cos, 0.0, 1.0, 8, 1024, 1e-14);
        assert!((r.value - 1f64.sin()).abs() < 1e-14);
        assert_eq!(r.nodes, 16);
    }
}
