//! Gaussian quadrature rules (Legendre and Hermite).
//!
//! Nodes come from Newton iteration on the orthogonal-polynomial recurrences,
//! weights from the Christoffel sum `w = 1/Σ_{k<n} ψ_k(x)²` over the
//! orthonormal polynomials, which avoids overflow at high degree.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// A quadrature rule: nodes and weights.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<QuadRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build_legendre(n));
    cache.lock().unwrap().insert(n, Arc::clone(&rule));
    rule
}

fn build_legendre(n: usize) -> QuadRule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess (Abramowitz–Stegun) then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, z);
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadRule { nodes, weights }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
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
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `∫_a^b f dx` by an `n`-point Gauss–Legendre rule.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Gauss–Hermite rule for the weight `e^{−x²}` on the real line.
pub fn gauss_hermite(n: usize) -> Arc<QuadRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build_hermite(n));
    cache.lock().unwrap().insert(n, Arc::clone(&rule));
    rule
}

/// Orthonormal Hermite values `(ψ_n, ψ_{n−1}, Σ_{k<n} ψ_k²)` at `x`.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64, f64) {
    let mut p0 = std::f64::consts::PI.powf(-0.25);
    let mut christoffel = p0 * p0;
    if n == 0 {
        return (p0, 0.0, christoffel);
    }
    let mut p1 = x * std::f64::consts::SQRT_2 * p0;
    for k in 1..n {
        christoffel += p1 * p1;
        let kf = k as f64;
        let p2 = x * (2.0 / (kf + 1.0)).sqrt() * p1 - (kf / (kf + 1.0)).sqrt() * p0;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0, christoffel)
}

fn build_hermite(n: usize) -> QuadRule {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    // Roots found from largest down, seeded by standard asymptotic guesses.
    let mut found = Vec::with_capacity(m);
    for i in 0..m {
        let mut z: f64 = match i {
            0 => {
                let a = (2 * n + 1) as f64;
                a.sqrt() - 1.85575 * a.powf(-1.0 / 6.0)
            }
            1 => found[0] - 1.14 * (n as f64).powf(0.426) / found[0],
            2 => 1.86 * found[1] - 0.86 * found[0],
            3 => 1.91 * found[2] - 0.91 * found[1],
            _ => 2.0 * found[i - 1] - found[i - 2],
        };
        for _ in 0..200 {
            let (p, pm1, _) = hermite_orthonormal(n, z);
            let dp = (2.0 * n as f64).sqrt() * pm1;
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        found.push(z);
        let (_, _, christoffel) = hermite_orthonormal(n, z);
        let w = 1.0 / christoffel;
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, _, christoffel) = hermite_orthonormal(n, 0.0);
        weights[n / 2] = 1.0 / christoffel;
    }
    QuadRule { nodes, weights }
}
