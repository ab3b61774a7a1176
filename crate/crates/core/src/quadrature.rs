//! Gauss–Legendre rules on [-1, 1].

use std::sync::OnceLock;

/// Nodes and weights of an n-point Gauss–Legendre rule, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for k in 0..n.div_ceil(2) {
            // Tricomi-style initial guess, refined by Newton on P_n.
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached rule with `n` points for the sizes used throughout the crate.
pub fn rule(n: usize) -> &'static GaussLegendre {
    static R16: OnceLock<GaussLegendre> = OnceLock::new();
    static R32: OnceLock<GaussLegendre> = OnceLock::new();
    match n {
        16 => R16.get_or_init(|| GaussLegendre::new(16)),
        32 => R32.get_or_init(|| GaussLegendre::new(32)),
        _ => Box::leak(Box::new(GaussLegendre::new(n))),
    }
}

/// Barycentric weights for interpolation through the given nodes.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = (0..nodes.len())
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product();
            1.0 / prod
        })
        .collect()
}

/// Row of the barycentric interpolation matrix evaluating at `x`.
pub fn interpolation_row(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&t| t == x) {
        let mut row = vec![0.0; nodes.len()];
        row[j] = 1.0;
        return row;
    }
    let terms: Vec<f64> = nodes.iter().zip(bary).map(|(&t, &b)| b / (x - t)).collect();
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 32, 64] {
            let g = GaussLegendre::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n = {n}: {s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let g = GaussLegendre::new(16);
        for p in 0..32 {
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            let got = g.integrate(-1.0, 1.0, |x| x.powi(p));
            assert!((got - exact).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let g = GaussLegendre::new(16);
        for k in 0..16 {
            assert!((g.nodes[k] + g.nodes[15 - k]).abs() < 1e-15);
            if k > 0 {
                assert!(g.nodes[k] > g.nodes[k - 1]);
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let g = GaussLegendre::new(16);
        let bary = barycentric_weights(&g.nodes);
        let f = |x: f64| 3.0 * x.powi(7) - x.powi(3) + 0.5;
        let vals: Vec<f64> = g.nodes.iter().map(|&x| f(x)).collect();
        for x in [-1.0, -0.3, 0.0, 0.77, 1.0] {
            let row = interpolation_row(&g.nodes, &bary, x);
            let v: f64 = row.iter().zip(&vals).map(|(a, b)| a * b).sum();
            assert!((v - f(x)).abs() < 1e-13);
        }
    }
}
