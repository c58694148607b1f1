//! Shared numerical machinery: Gauss-Legendre and Gauss-Jacobi rules,
//! adaptive quadrature and the inverse normal CDF.
//!
//! Gauss-Jacobi rules absorb the `(u - s)^(H - 1/2)` endpoint singularities
//! of the Riemann-Liouville kernels; everything else goes through adaptive
//! Gauss-Legendre panels.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("gauss-jacobi rule needs degree >= 2 and exponents > -1, got n={n}, alpha={alpha}, beta={beta}")]
    BadJacobiRule { n: usize, alpha: f64, beta: f64 },
}

/// Gauss-Legendre rule of degree `n` on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on the Legendre recurrence; accurate to
    /// a few ulps for the degrees used here (n <= 256).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "degree must be at least 1");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let (p, d) = legendre_with_derivative(n, x);
                    dp = d;
                    x -= p / d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared, cached rule.
    pub fn cached(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(Self::new(n)))
            .clone()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        half * acc
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
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

/// Adaptive Gauss-Legendre integration of `f` over `[a, b]` with absolute
/// tolerance `tol`. Bisects panels until the two-panel refinement of each
/// panel agrees with the single-panel estimate.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let rule = GaussLegendre::cached(15);
    let whole = rule.integrate(a, b, &mut *f);
    adaptive_step(f, &rule, a, b, whole, tol, 0)
}

fn adaptive_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, &mut *f);
    let right = rule.integrate(mid, b, &mut *f);
    let refined = left + right;
    let err = (refined - whole).abs();
    if err <= tol || err <= 1e-15 * refined.abs() || depth >= 48 {
        return refined;
    }
    adaptive_step(f, rule, a, mid, left, 0.5 * tol, depth + 1)
        + adaptive_step(f, rule, mid, b, right, 0.5 * tol, depth + 1)
}

/// Gauss-Jacobi rule: integrates `(1 - x)^alpha (1 + x)^beta f(x)` over
/// [-1, 1] with the singular factors absorbed into the weights.
///
/// Nodes and weights come from the Golub-Welsch algorithm (eigenvalues of
/// the symmetric Jacobi companion matrix).
#[derive(Debug, Clone)]
pub struct GaussJacobi {
    alpha: f64,
    beta: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussJacobi {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self, NumericsError> {
        if n < 2 || !(alpha.is_finite() && alpha > -1.0) || !(beta.is_finite() && beta > -1.0) {
            return Err(NumericsError::BadJacobiRule { n, alpha, beta });
        }

        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        let mut diag = (beta - alpha) / (2.0 + alpha + beta);
        for k in 0..n - 1 {
            let kp1 = (k + 1) as f64;
            let denom = 2.0 * kp1 + alpha + beta;
            let off = 2.0 / denom
                * (kp1 * (kp1 + alpha) * (kp1 + beta) * (kp1 + alpha + beta)
                    / ((denom + 1.0) * (denom - 1.0)))
                    .sqrt();
            jacobi[(k, k)] = diag;
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
            diag = (beta * beta - alpha * alpha) / (denom * (denom + 2.0));
        }
        jacobi[(n - 1, n - 1)] = diag;

        let eigen = jacobi.symmetric_eigen();
        // mu_0 = integral of the weight over [-1, 1] = 2^(a+b+1) B(a+1, b+1)
        let mu0 = f64::exp(
            (alpha + beta + 1.0) * std::f64::consts::LN_2
                + libm::lgamma(alpha + 1.0)
                + libm::lgamma(beta + 1.0)
                - libm::lgamma(alpha + beta + 2.0),
        );

        let mut pairs: Vec<(f64, f64)> = eigen
            .eigenvalues
            .iter()
            .copied()
            .zip(eigen.eigenvectors.row(0).iter().map(|v| v * v * mu0))
            .collect();
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        Ok(Self {
            alpha,
            beta,
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn cached(n: usize, alpha: f64, beta: f64) -> Result<Arc<Self>, NumericsError> {
        type Key = (usize, u64, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<GaussJacobi>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (n, alpha.to_bits(), beta.to_bits());
        if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&key) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(Self::new(n, alpha, beta)?);
        cache
            .lock()
            .expect("quadrature cache poisoned")
            .insert(key, rule.clone());
        Ok(rule)
    }

    /// Integrates `(b - u)^alpha (u - a)^beta f(u)` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (u, w) in self.mapped(a, b) {
            acc += w * f(u);
        }
        acc
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Nodes mapped to `[a, b]` together with their scaled weights, so the
    /// caller can evaluate `sum_i w_i f(u_i)` with the weight factor
    /// `(b - u)^alpha (u - a)^beta` already accounted for.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let scale = half.powf(self.alpha + self.beta + 1.0);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (a + half * (1.0 + x), scale * w))
    }
}

/// Inverse of the standard normal CDF (Acklam's rational approximation
/// polished with one Halley step against the erfc-based CDF).
pub fn inverse_norm_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0, 1)");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];

    let x = if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 0.97575 {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley refinement.
    let e = crate::bs_core::norm_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
