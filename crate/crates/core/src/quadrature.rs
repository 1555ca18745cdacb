//! Gauss rules computed by Newton iteration on the three-term recurrences.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of an n-point rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Orthonormal Hermite polynomial recurrence at x: returns (p_{n}(x), p_{n-1}(x)),
/// where p_k(x)·e^{-x²/2} is the k-th Hermite function.
fn hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Gauss–Hermite rule for the weight e^{-x²}, nodes ascending.
///
/// `scaled_weights` holds w_k·e^{x_k²}, the weights for integrating a function
/// against dx directly (used with Hermite functions that carry their own Gaussian).
#[derive(Clone, Debug)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl HermiteRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

pub fn gauss_hermite(n: usize) -> HermiteRule {
    assert!(n >= 1);
    // Golub–Welsch for the starting nodes, then Newton polishing on the recurrence.
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut x: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut scaled = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = x[i];
        for _ in 0..8 {
            let (p1, p2) = hermite_pair(n, z);
            let step = p1 / ((2.0 * nf).sqrt() * p2);
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, p2) = hermite_pair(n, z);
        let pp = (2.0 * nf).sqrt() * p2;
        nodes.push(z);
        weights.push(2.0 / (pp * pp));
        // w·e^{z²} = 2/(pp·e^{-z²/2})², evaluated without overflow
        let ph = pp * (-0.5 * z * z).exp();
        scaled.push(2.0 / (ph * ph));
    }
    // exact symmetry of the rule
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let z = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -z;
        nodes[j] = z;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
        let ws = 0.5 * (scaled[i] + scaled[j]);
        scaled[i] = ws;
        scaled[j] = ws;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    HermiteRule { nodes, weights, scaled_weights: scaled }
}

/// Gauss–Legendre rule on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let xm = 0.5 * (b + a);
    let xl = 0.5 * (b - a);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = xm - xl * z;
        nodes[n - 1 - i] = xm + xl * z;
        let wi = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        weights[i] = wi;
        weights[n - 1 - i] = wi;
    }
    Rule { nodes, weights }
}

/// Normalized Hermite functions ψ_0..ψ_{n-1} at x.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n > 1 {
        out[1] = 2f64.sqrt() * x * out[0];
    }
    for k in 2..n {
        let kf = k as f64;
        out[k] = (2.0 / kf).sqrt() * x * out[k - 1] - ((kf - 1.0) / kf).sqrt() * out[k - 2];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let r = gauss_hermite(20);
        let ws: f64 = r.weights.iter().sum();
        assert!((ws - PI.sqrt()).abs() < 1e-13);
        // ∫ x⁴ e^{-x²} = 3√π/4
        let m4: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.75 * PI.sqrt()).abs() < 1e-13);
        assert!(r.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn hermite_odd_order_has_zero_node() {
        let r = gauss_hermite(7);
        assert_eq!(r.nodes[3], 0.0);
        let ws: f64 = r.weights.iter().sum();
        assert!((ws - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn scaled_weights_integrate_hermite_functions() {
        let r = gauss_hermite(80);
        for k in [0usize, 5, 30] {
            let s: f64 = r
                .nodes
                .iter()
                .zip(&r.scaled_weights)
                .map(|(&x, &w)| w * hermite_functions(k + 1, x)[k].powi(2))
                .sum();
            assert!((s - 1.0).abs() < 1e-12, "k={k}: {s}");
        }
    }

    #[test]
    fn large_rules_stay_distinct_and_accurate() {
        for n in [120, 220, 300] {
            let r = gauss_hermite(n);
            assert!(r.nodes.windows(2).all(|p| p[1] - p[0] > 1e-3));
            let s: f64 = r
                .nodes
                .iter()
                .zip(&r.scaled_weights)
                .map(|(&x, &w)| w * hermite_functions(100, x)[99].powi(2))
                .sum();
            assert!((s - 1.0).abs() < 1e-11, "n={n}: {s}");
        }
    }

    #[test]
    fn legendre_polynomial_exactness() {
        let r = gauss_legendre(10, -1.0, 3.0);
        // ∫_{-1}^{3} x^5 dx = (729 - 1)/6
        let v = r.integrate(|x| x.powi(5));
        assert!((v - 728.0 / 6.0).abs() < 1e-11);
    }
}
