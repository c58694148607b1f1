//! Rough Bergomi quantities: Riemann-Liouville fBm covariances, forward
//! variance, conditional vol moments, the kernel moments Theta^2 and Phi^2
//! with their Gauss hypergeometric closed forms, and the double integral
//! driving the quadratic-variation term.
//!
//! The variance process is
//!
//! ```text
//! sigma_s^2 = sigma_0^2 exp( nu sqrt(2H) Z_s - nu^2 s^(2H) / 2 ),
//! Z_s = int_0^s (s - xi)^(H - 1/2) dB^2_xi  (RL fractional BM).
//! ```
//!
//! Kernel moments are evaluated primarily by adaptive quadrature after the
//! regularizing substitution `xi = s - y^(1/(2H))`; the hypergeometric
//! closed forms serve as an independent cross-check.

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{integrate_adaptive, GaussJacobi, GaussLegendre};

#[derive(Debug, Error, PartialEq)]
pub enum RoughKernelError {
    #[error("rBergomi parameters need sigma0 > 0, nu > 0 and Hurst in (0, 1/2], got sigma0={sigma0}, nu={nu}, hurst={hurst}")]
    BadParams { sigma0: f64, nu: f64, hurst: f64 },
    #[error("Hurst exponent must lie in (0, 1/2], got {0}")]
    BadHurst(f64),
    #[error("2F1 parameter c must not be a non-positive integer, got {0}")]
    HypergeometricBadC(f64),
    #[error("2F1 series does not converge for a={a}, b={b}, c={c}, z={z}")]
    HypergeometricNonConvergent { a: f64, b: f64, c: f64, z: f64 },
    #[error("times must satisfy {0}")]
    BadTimeOrder(&'static str),
}

/// Rough Bergomi parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RBergomiParams {
    /// Initial spot volatility (1/sqrt(year)).
    pub sigma0: f64,
    /// Roughness vol-of-vol (dimensionless, scales sqrt(2H) Z).
    pub nu: f64,
    /// Hurst exponent in (0, 1/2].
    pub hurst: f64,
}

impl RBergomiParams {
    pub fn new(sigma0: f64, nu: f64, hurst: f64) -> Result<Self, RoughKernelError> {
        if !(sigma0 > 0.0 && nu > 0.0 && hurst > 0.0 && hurst <= 0.5) {
            return Err(RoughKernelError::BadParams { sigma0, nu, hurst });
        }
        Ok(Self { sigma0, nu, hurst })
    }
}

/// How a kernel moment was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMethod {
    Quadrature,
    Hypergeometric,
}

/// A kernel-moment value together with its evaluation route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoment {
    pub value: f64,
    pub method: KernelMethod,
}

/// Gauss hypergeometric function 2F1(a, b; c; z) for z < 1.
///
/// Power series for |z| <= 0.5 (and for z in (0.5, 1) where it still
/// converges), Pfaff transformation `z -> z / (z - 1)` for z < -0.5. No
/// analytic continuation beyond that: the kernel-moment call sites only
/// produce z <= 0, which the Pfaff map sends into [0, 1).
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64, RoughKernelError> {
    if c <= 0.0 && c == c.floor() {
        return Err(RoughKernelError::HypergeometricBadC(c));
    }
    if z >= 1.0 {
        return Err(RoughKernelError::HypergeometricNonConvergent { a, b, c, z });
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    if z < -0.5 {
        // Keep the larger of (a, b) in first position so the transformed
        // series converges fastest as z/(z-1) -> 1.
        let w = z / (z - 1.0);
        let (p, q) = if b >= a { (a, c - b) } else { (b, c - a) };
        return Ok((1.0 - z).powf(-p) * series_2f1(p, q, c, w, z)?);
    }
    series_2f1(a, b, c, z, z)
}

fn series_2f1(a: f64, b: f64, c: f64, z: f64, z_orig: f64) -> Result<f64, RoughKernelError> {
    const MAX_TERMS: usize = 4_000_000;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        if term == 0.0 {
            return Ok(sum); // terminating polynomial case
        }
        let next = sum + term;
        if next == sum && kf > 2.0 {
            return Ok(sum);
        }
        sum = next;
    }
    Err(RoughKernelError::HypergeometricNonConvergent { a, b, c, z: z_orig })
}

/// Covariance of the RL fractional Brownian motion,
/// `Cov(Z_t1, Z_t2) = int_0^min (t1 - xi)^(H-1/2) (t2 - xi)^(H-1/2) dxi`.
///
/// Coincident times use the exact `t^(2H) / (2H)`; otherwise the endpoint
/// singularity is removed by the substitution `xi = min - w^(1/(H+1/2))`
/// and the integral evaluated adaptively (tolerance 1e-10 relative).
pub fn rl_fbm_covariance(hurst: f64, t1: f64, t2: f64) -> f64 {
    assert!(hurst > 0.0 && hurst <= 0.5, "Hurst exponent out of range");
    assert!(t1 >= 0.0 && t2 >= 0.0, "times must be nonnegative");
    let a = t1.min(t2);
    let b = t1.max(t2);
    if a == 0.0 {
        return 0.0;
    }
    if a == b {
        return a.powf(2.0 * hurst) / (2.0 * hurst);
    }
    let he = hurst + 0.5;
    let gap = b - a;
    let upper = a.powf(he);
    let scale = upper * gap.powf(hurst - 0.5) / he;
    let mut f = |w: f64| (gap + w.powf(1.0 / he)).powf(hurst - 0.5) / he;
    integrate_adaptive(&mut f, 0.0, upper, 1e-10 * scale.abs().max(1e-8))
}

/// Conditional forward variance `E_t[sigma_u^2] = sigma_0^2
/// exp(nu^2 [(u-t)^(2H) - u^(2H)] / 2) exp(z_path_integral)`.
///
/// `z_path_integral` is the realized `nu sqrt(2H) int_0^t (u-xi)^(H-1/2)
/// dB^2_xi`, zero at t = 0.
pub fn rb_forward_variance(
    p: &RBergomiParams,
    t: f64,
    u: f64,
    z_path_integral: f64,
) -> Result<f64, RoughKernelError> {
    if !(0.0 <= t && t <= u) {
        return Err(RoughKernelError::BadTimeOrder("0 <= t <= u"));
    }
    let h2 = 2.0 * p.hurst;
    let expo = 0.5 * p.nu * p.nu * ((u - t).powf(h2) - u.powf(h2));
    Ok(p.sigma0 * p.sigma0 * (expo + z_path_integral).exp())
}

/// Conditional vol mean `E_t[sigma_s] = sigma_0 exp(z_path_integral)
/// exp(-nu^2 s^(2H) / 4 + nu^2 (s-t)^(2H) / 8)`.
///
/// `z_path_integral` is the realized `(nu sqrt(2H) / 2) int_0^t
/// (s-xi)^(H-1/2) dB^2_xi`, zero at t = 0. The conditional-variance
/// exponent is `nu^2 (s-t)^(2H) / 8`, the exact lognormal half-power value.
pub fn rb_vol_mean(
    p: &RBergomiParams,
    t: f64,
    s: f64,
    z_path_integral: f64,
) -> Result<f64, RoughKernelError> {
    if !(0.0 <= t && t <= s) {
        return Err(RoughKernelError::BadTimeOrder("0 <= t <= s"));
    }
    let h2 = 2.0 * p.hurst;
    let expo = -0.25 * p.nu * p.nu * s.powf(h2) + 0.125 * p.nu * p.nu * (s - t).powf(h2);
    Ok(p.sigma0 * (expo + z_path_integral).exp())
}

/// Integrates `f(xi)` of the form `[(u - xi)^(H-1/2) + c0 (s - xi)^(H-1/2)]^2`
/// over `[t, s]` via `xi = s - y^(1/(2H))`. With
/// `G_w(y) = (w - s + y^(1/(2H)))^(H-1/2) y^((1-2H)/(4H))` the transformed
/// integrand is `(G_u + c0)^2 / (2H)` for the Theta kernel and
/// `(G_u + G_theta)^2 / (2H)` for the Phi kernel; both stay bounded at y = 0.
fn kernel_moment_quadrature(hurst: f64, t: f64, s: f64, terms: KernelTerms) -> f64 {
    if s == t {
        return 0.0;
    }
    let h2 = 2.0 * hurst;
    let half_exp = (1.0 - h2) / (4.0 * hurst);
    let inv = 1.0 / h2;
    let upper = (s - t).powf(h2);
    let g = |w: f64, y: f64| -> f64 { (w - s + y.powf(inv)).powf(hurst - 0.5) * y.powf(half_exp) };
    let mut f = |y: f64| -> f64 {
        let b = match terms {
            KernelTerms::Theta { u } => g(u, y) + 0.5,
            KernelTerms::Phi { u, theta } => g(u, y) + g(theta, y),
        };
        b * b / h2
    };
    // coarse pass to set the absolute tolerance
    let coarse = GaussLegendre::cached(32).integrate(0.0, upper, &mut f);
    integrate_adaptive(&mut f, 0.0, upper, 1e-11 * coarse.abs().max(1e-4))
}

#[derive(Clone, Copy)]
enum KernelTerms {
    Theta { u: f64 },
    Phi { u: f64, theta: f64 },
}

/// Kernel moment `Theta^2 = int_t^s [(u-xi)^(H-1/2)
/// + (s-xi)^(H-1/2) / 2]^2 dxi`, by adaptive quadrature (primary route).
pub fn theta_squared(hurst: f64, t: f64, s: f64, u: f64) -> Result<KernelMoment, RoughKernelError> {
    check_hurst(hurst)?;
    if !(t <= s && s <= u) {
        return Err(RoughKernelError::BadTimeOrder("t <= s <= u"));
    }
    Ok(KernelMoment {
        value: kernel_moment_quadrature(hurst, t, s, KernelTerms::Theta { u }),
        method: KernelMethod::Quadrature,
    })
}

/// Hypergeometric closed form of `Theta^2` (cross-check route):
///
/// ```text
/// Theta^2 = (s-t)^(2H) / (8H) + [(u-t)^(2H) - (u-s)^(2H)] / (2H)
///         + (s-t)^(H+1/2) (u-s)^(H-1/2) / (H+1/2)
///           * 2F1(1/2 - H, H + 1/2; H + 3/2; -(s-t)/(u-s)),
/// ```
///
/// with the exact power-integral collapse `9 (s-t)^(2H) / (8H)` at u = s.
pub fn theta_squared_hypergeometric(
    hurst: f64,
    t: f64,
    s: f64,
    u: f64,
) -> Result<KernelMoment, RoughKernelError> {
    check_hurst(hurst)?;
    if !(t <= s && s <= u) {
        return Err(RoughKernelError::BadTimeOrder("t <= s <= u"));
    }
    let h2 = 2.0 * hurst;
    let value = if s == t {
        0.0
    } else if u == s {
        9.0 * (s - t).powf(h2) / (8.0 * hurst)
    } else {
        let square = (s - t).powf(h2) / (8.0 * hurst);
        let plain = ((u - t).powf(h2) - (u - s).powf(h2)) / h2;
        let f = gauss_2f1(0.5 - hurst, hurst + 0.5, hurst + 1.5, -(s - t) / (u - s))?;
        let cross = (s - t).powf(hurst + 0.5) * (u - s).powf(hurst - 0.5) / (hurst + 0.5) * f;
        square + plain + cross
    };
    Ok(KernelMoment {
        value,
        method: KernelMethod::Hypergeometric,
    })
}

/// Kernel moment
/// `Phi^2 = int_t^s [(u-xi)^(H-1/2) + (theta-xi)^(H-1/2)]^2 dxi`,
/// by adaptive quadrature (primary route); symmetric in (u, theta).
pub fn phi_squared(
    hurst: f64,
    t: f64,
    s: f64,
    u: f64,
    theta: f64,
) -> Result<KernelMoment, RoughKernelError> {
    check_hurst(hurst)?;
    if !(t <= s && s <= u.min(theta)) {
        return Err(RoughKernelError::BadTimeOrder("t <= s <= min(u, theta)"));
    }
    Ok(KernelMoment {
        value: kernel_moment_quadrature(hurst, t, s, KernelTerms::Phi { u, theta }),
        method: KernelMethod::Quadrature,
    })
}

/// Hypergeometric closed form of `Phi^2` (cross-check route):
///
/// ```text
/// Phi^2 = [(u-t)^(2H) - (u-s)^(2H) + (v-t)^(2H) - (v-s)^(2H)] / (2H)
///       + 2 / ((H + 1/2)(u - v))
///         * [ (u-s)^(H+1/2) (v-s)^(H+1/2) 2F1(1, 1+2H; H+3/2; (u-s)/(u-v))
///           - (u-t)^(H+1/2) (v-t)^(H+1/2) 2F1(1, 1+2H; H+3/2; (u-t)/(u-v)) ]
/// ```
///
/// evaluated with the pair ordered so u < v, which keeps both 2F1
/// arguments nonpositive (the value is symmetric under the swap). At
/// u = v the integrand collapses to `4 (u-xi)^(2H-1)` and the moment is
/// `4 [(u-t)^(2H) - (u-s)^(2H)] / (2H)` exactly.
pub fn phi_squared_hypergeometric(
    hurst: f64,
    t: f64,
    s: f64,
    u: f64,
    theta: f64,
) -> Result<KernelMoment, RoughKernelError> {
    check_hurst(hurst)?;
    if !(t <= s && s <= u.min(theta)) {
        return Err(RoughKernelError::BadTimeOrder("t <= s <= min(u, theta)"));
    }
    let h2 = 2.0 * hurst;
    let value = if s == t {
        0.0
    } else if u == theta {
        4.0 * ((u - t).powf(h2) - (u - s).powf(h2)) / h2
    } else {
        let (lo, hi) = (u.min(theta), u.max(theta));
        let plain =
            ((lo - t).powf(h2) - (lo - s).powf(h2) + (hi - t).powf(h2) - (hi - s).powf(h2)) / h2;
        let gap = lo - hi; // negative, so the 2F1 arguments are <= 0
        let f_s = gauss_2f1(1.0, 1.0 + h2, hurst + 1.5, (lo - s) / gap)?;
        let f_t = gauss_2f1(1.0, 1.0 + h2, hurst + 1.5, (lo - t) / gap)?;
        let cross = 2.0 / ((hurst + 0.5) * gap)
            * ((lo - s).powf(hurst + 0.5) * (hi - s).powf(hurst + 0.5) * f_s
                - (lo - t).powf(hurst + 0.5) * (hi - t).powf(hurst + 0.5) * f_t);
        plain + cross
    };
    Ok(KernelMoment {
        value,
        method: KernelMethod::Hypergeometric,
    })
}

/// Cross moment `E_t[sigma_s E_s(sigma_u^2)] = sigma_0^3
/// exp(nu^2 [(u-s)^(2H) - u^(2H) - s^(2H)/2] / 2) exp(z_path_integral)
/// exp(nu^2 H Theta^2(t, s, u))`.
///
/// `z_path_integral` is the realized combined kernel integral
/// `nu sqrt(2H) int_0^t [(u-xi)^(H-1/2) + (s-xi)^(H-1/2)/2] dB^2_xi`,
/// zero at t = 0.
pub fn rb_cross_moment(
    p: &RBergomiParams,
    t: f64,
    s: f64,
    u: f64,
    z_path_integral: f64,
) -> Result<f64, RoughKernelError> {
    if !(0.0 <= t && t <= s && s <= u) {
        return Err(RoughKernelError::BadTimeOrder("0 <= t <= s <= u"));
    }
    let h2 = 2.0 * p.hurst;
    let nu2 = p.nu * p.nu;
    let theta2 = theta_squared(p.hurst, t, s, u)?.value;
    let expo = 0.5 * nu2 * ((u - s).powf(h2) - u.powf(h2) - 0.5 * s.powf(h2))
        + nu2 * p.hurst * theta2
        + z_path_integral;
    Ok(p.sigma0.powi(3) * expo.exp())
}

/// The expectation of the squared kernel-weighted forward variance integral
/// driving the quadratic-variation term, at valuation time t:
///
/// ```text
/// E_t[ ( int_s^T (u-s)^(H-1/2) E_s(sigma_u^2) du )^2 ]
///   = sigma_0^4 int_s^T int_s^T e^(nu^2 [(u-s)^(2H) - u^(2H)
///     + (v-s)^(2H) - v^(2H)] / 2) (u-s)^(H-1/2) (v-s)^(H-1/2)
///     e^(nu^2 H Phi^2(t,s,u,v)) du dv,
/// ```
///
/// by tensorized Gauss-Jacobi quadrature absorbing both endpoint
/// singularities (exact at t = 0, where the realized-path factor is 1).
pub fn rb_mm_double_integral(
    p: &RBergomiParams,
    t: f64,
    s: f64,
    maturity: f64,
) -> Result<f64, RoughKernelError> {
    if !(0.0 <= t && t <= s && s < maturity) {
        return Err(RoughKernelError::BadTimeOrder("0 <= t <= s < T"));
    }
    let h2 = 2.0 * p.hurst;
    let nu2 = p.nu * p.nu;
    let rule = GaussJacobi::cached(24, 0.0, p.hurst - 0.5)
        .expect("valid Jacobi parameters for Hurst in (0, 1/2]");
    let pts: Vec<(f64, f64)> = rule.mapped(s, maturity).collect();
    let decay: Vec<f64> = pts
        .iter()
        .map(|&(u, _)| (0.5 * nu2 * ((u - s).powf(h2) - u.powf(h2))).exp())
        .collect();

    let mut acc = 0.0;
    for (i, &(u, wu)) in pts.iter().enumerate() {
        for (j, &(v, wv)) in pts.iter().enumerate().skip(i) {
            let phi2 = kernel_moment_quadrature(p.hurst, t, s, KernelTerms::Phi { u, theta: v });
            let val = wu * wv * decay[i] * decay[j] * (nu2 * p.hurst * phi2).exp();
            acc += if j == i { val } else { 2.0 * val };
        }
    }
    Ok(p.sigma0.powi(4) * acc)
}

fn check_hurst(hurst: f64) -> Result<(), RoughKernelError> {
    if hurst > 0.0 && hurst <= 0.5 {
        Ok(())
    } else {
        Err(RoughKernelError::BadHurst(hurst))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> RBergomiParams {
        RBergomiParams::new(0.08, 0.1, 0.1).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(RBergomiParams::new(0.08, 0.1, 0.6).is_err());
        assert!(RBergomiParams::new(0.08, 0.1, 0.5).is_ok());
        assert!(RBergomiParams::new(-0.08, 0.1, 0.1).is_err());
    }

    #[test]
    fn hypergeometric_basic_values() {
        assert_eq!(gauss_2f1(0.3, 0.7, 1.1, 0.0).unwrap(), 1.0);
        // 2F1(1,1;2;z) = -ln(1-z)/z
        let got = gauss_2f1(1.0, 1.0, 2.0, 0.5).unwrap();
        assert!((got - 2.0 * std::f64::consts::LN_2).abs() < 1e-14);
        // Pfaff branch against the same identity at z = -3
        let got = gauss_2f1(1.0, 1.0, 2.0, -3.0).unwrap();
        assert!((got - 4.0f64.ln() / 3.0).abs() < 1e-14, "got {got}");
        assert!(gauss_2f1(0.5, 0.5, -2.0, 0.1).is_err());
        assert!(gauss_2f1(0.5, 0.5, 1.5, 1.0).is_err());
    }

    /// Euler integral representation as an independent oracle:
    /// 2F1(a,b;c;z) = Gamma(c)/(Gamma(b)Gamma(c-b))
    ///                int_0^1 t^(b-1) (1-t)^(c-b-1) (1-zt)^(-a) dt.
    fn euler_integral_2f1(a: f64, b: f64, c: f64, z: f64) -> f64 {
        let rule = GaussJacobi::new(64, c - b - 1.0, b - 1.0).unwrap();
        let pref = libm::tgamma(c) / (libm::tgamma(b) * libm::tgamma(c - b));
        pref * rule.integrate(0.0, 1.0, |t| (1.0 - z * t).powf(-a))
    }

    #[test]
    fn hypergeometric_against_euler_integral() {
        for &(a, b, c, z) in &[
            (0.4, 0.6, 1.6, -0.3),
            (0.4, 0.6, 1.6, 0.45),
            (0.45, 0.55, 1.55, -8.0),
            (1.0, 1.2, 1.6, -2.5),
        ] {
            let got = gauss_2f1(a, b, c, z).unwrap();
            let want = euler_integral_2f1(a, b, c, z);
            assert!(
                (got - want).abs() < 1e-10,
                "2F1({a},{b};{c};{z}) = {got} vs {want}"
            );
        }
    }

    #[test]
    fn fbm_variance_is_exact_power() {
        for &h in &[0.05, 0.1, 0.3, 0.5] {
            for &t in &[0.2, 1.0, 1.7] {
                let got = rl_fbm_covariance(h, t, t);
                let want = t.powf(2.0 * h) / (2.0 * h);
                assert!((got - want).abs() < 1e-12 * want);
            }
        }
    }

    #[test]
    fn fbm_covariance_brownian_limit() {
        assert!((rl_fbm_covariance(0.5, 0.3, 0.9) - 0.3).abs() < 1e-12);
        assert!((rl_fbm_covariance(0.5, 1.2, 0.4) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn fbm_covariance_against_hypergeometric_form() {
        // closed form of int_0^a w^(H-1/2) (gap + w)^(H-1/2) dw
        for &(h, a, b) in &[
            (0.1, 0.5, 1.0),
            (0.05, 0.2, 0.9),
            (0.3, 0.7, 0.8),
            (0.45, 0.1, 2.0),
        ] {
            let gap: f64 = b - a;
            let f = gauss_2f1(0.5 - h, h + 0.5, h + 1.5, -a / gap).unwrap();
            let want = a.powf(h + 0.5) * gap.powf(h - 0.5) / (h + 0.5) * f;
            let got = rl_fbm_covariance(h, a, b);
            assert!(
                (got - want).abs() < 1e-9 * want.abs(),
                "H={h}, ({a},{b}): {got} vs {want}"
            );
            // symmetry
            assert_eq!(got, rl_fbm_covariance(h, b, a));
        }
    }

    #[test]
    fn forward_variance_flat_at_inception() {
        let p = params();
        for &u in &[0.1, 0.5, 1.0] {
            assert!((rb_forward_variance(&p, 0.0, u, 0.0).unwrap() - 0.0064).abs() < 1e-18);
        }
        let brown = RBergomiParams::new(0.08, 0.1, 0.5).unwrap();
        assert!((rb_forward_variance(&brown, 0.0, 1.0, 0.0).unwrap() - 0.0064).abs() < 1e-18);
        assert!(rb_forward_variance(&p, 0.5, 0.2, 0.0).is_err());
    }

    #[test]
    fn vol_mean_inception_value() {
        let p = params();
        let got = rb_vol_mean(&p, 0.0, 1.0, 0.0).unwrap();
        // exact lognormal mean sigma0 e^(-nu^2 s^(2H) / 8)
        assert!((got - 0.08 * (-0.01f64 / 8.0).exp()).abs() < 1e-15);
        assert!((got - 0.0799001).abs() < 5e-8);
        // s = t leaves sigma_t; with zero path integral that is sigma_0 e^(-nu^2 t^(2H)/4 ... )
        let at_t = rb_vol_mean(&p, 0.7, 0.7, 0.0).unwrap();
        assert!((at_t - 0.08 * (-0.25 * 0.01 * 0.7f64.powf(0.2)).exp()).abs() < 1e-15);
        // nu -> 0 leaves sigma_0
        let still = RBergomiParams::new(0.08, 1e-12, 0.1).unwrap();
        assert!((rb_vol_mean(&still, 0.0, 1.0, 0.0).unwrap() - 0.08).abs() < 1e-15);
    }

    #[test]
    fn theta_kernel_trivial_cases() {
        assert_eq!(theta_squared(0.1, 0.3, 0.3, 0.9).unwrap().value, 0.0);
        // H = 1/2: integrand is (1 + 1/2)^2
        let v = theta_squared(0.5, 0.0, 0.4, 1.0).unwrap().value;
        assert!((v - 2.25 * 0.4).abs() < 1e-12, "got {v}");
        assert!(theta_squared(0.1, 0.0, 0.6, 0.5).is_err());
    }

    #[test]
    fn theta_kernel_collapse_at_u_equal_s() {
        for &h in &[0.05, 0.1, 0.2, 0.4] {
            let quad = theta_squared(h, 0.0, 0.5, 0.5).unwrap().value;
            let closed = 9.0 * 0.5f64.powf(2.0 * h) / (8.0 * h);
            assert!(
                (quad - closed).abs() < 1e-8 * closed,
                "H={h}: {quad} vs {closed}"
            );
            let hyp = theta_squared_hypergeometric(h, 0.0, 0.5, 0.5)
                .unwrap()
                .value;
            assert!((hyp - closed).abs() < 1e-14 * closed);
        }
    }

    #[test]
    fn theta_kernel_quadrature_matches_hypergeometric() {
        for &h in &[0.05, 0.1, 0.2, 0.4] {
            for &(t, s, u) in &[
                (0.0, 0.5, 1.0),
                (0.0, 0.1, 0.2),
                (0.1, 0.4, 0.45),
                (0.0, 0.9, 0.901),
            ] {
                let quad = theta_squared(h, t, s, u).unwrap();
                let hyp = theta_squared_hypergeometric(h, t, s, u).unwrap();
                assert_eq!(quad.method, KernelMethod::Quadrature);
                assert_eq!(hyp.method, KernelMethod::Hypergeometric);
                let rel = (quad.value - hyp.value).abs() / hyp.value.abs();
                assert!(
                    rel < 1e-8,
                    "H={h} ({t},{s},{u}): {} vs {} rel {rel}",
                    quad.value,
                    hyp.value
                );
            }
        }
    }

    #[test]
    fn phi_kernel_trivial_cases() {
        assert_eq!(phi_squared(0.1, 0.2, 0.2, 0.9, 0.5).unwrap().value, 0.0);
        // H = 1/2: integrand is 4
        let v = phi_squared(0.5, 0.0, 0.3, 0.8, 1.1).unwrap().value;
        assert!((v - 4.0 * 0.3).abs() < 1e-12);
        // u = theta collapse
        for &h in &[0.05, 0.2, 0.4] {
            let quad = phi_squared(h, 0.0, 0.5, 0.8, 0.8).unwrap().value;
            let closed = 4.0 * (0.8f64.powf(2.0 * h) - 0.3f64.powf(2.0 * h)) / (2.0 * h);
            assert!(
                (quad - closed).abs() < 1e-8 * closed,
                "H={h}: {quad} vs {closed}"
            );
        }
        assert!(phi_squared(0.1, 0.0, 0.6, 0.5, 0.9).is_err());
    }

    #[test]
    fn phi_kernel_quadrature_matches_hypergeometric_and_symmetry() {
        for &h in &[0.05, 0.1, 0.2, 0.4] {
            for &(t, s, u, v) in &[
                (0.0, 0.5, 1.0, 0.7),
                (0.0, 0.1, 0.2, 0.15),
                (0.1, 0.4, 0.45, 1.3),
                (0.0, 0.3, 0.31, 0.305),
            ] {
                let quad = phi_squared(h, t, s, u, v).unwrap().value;
                let hyp = phi_squared_hypergeometric(h, t, s, u, v).unwrap().value;
                let rel = (quad - hyp).abs() / hyp.abs();
                assert!(
                    rel < 1e-8,
                    "H={h} ({t},{s},{u},{v}): {quad} vs {hyp} rel {rel}"
                );
                let swapped = phi_squared(h, t, s, v, u).unwrap().value;
                assert!((quad - swapped).abs() < 1e-10 * quad.abs());
            }
        }
    }

    #[test]
    fn kernel_moments_continuous_at_brownian_hurst() {
        let near = theta_squared(0.4999, 0.0, 0.4, 1.0).unwrap().value;
        let brown = theta_squared(0.5, 0.0, 0.4, 1.0).unwrap().value;
        assert!((near - brown).abs() / brown < 1e-3, "{near} vs {brown}");
        let near = phi_squared(0.4999, 0.0, 0.3, 0.8, 1.1).unwrap().value;
        let brown = phi_squared(0.5, 0.0, 0.3, 0.8, 1.1).unwrap().value;
        assert!((near - brown).abs() / brown < 1e-3, "{near} vs {brown}");
    }

    #[test]
    fn kernel_moments_increase_in_s() {
        for &h in &[0.1, 0.4] {
            let mut prev = 0.0;
            for i in 1..=8 {
                let s = 0.1 * i as f64;
                let v = theta_squared(h, 0.0, s, 0.9).unwrap().value;
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn cross_moment_limits() {
        let p = params();
        // nu -> 0 leaves sigma_0^3
        let still = RBergomiParams::new(0.08, 1e-12, 0.1).unwrap();
        let got = rb_cross_moment(&still, 0.0, 0.1, 0.2, 0.0).unwrap();
        assert!((got - 0.08f64.powi(3)).abs() < 1e-15);
        // degenerate s = u = t = 0 gives sigma_0^3
        let got = rb_cross_moment(&p, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!((got - 0.08f64.powi(3)).abs() < 1e-15);
        assert!(rb_cross_moment(&p, 0.0, 0.3, 0.2, 0.0).is_err());
    }

    #[test]
    fn mm_double_integral_nu_zero_limits() {
        // nu -> 0, H = 1/2: sigma_0^4 (T-s)^2
        let brown = RBergomiParams::new(0.08, 1e-12, 0.5).unwrap();
        let got = rb_mm_double_integral(&brown, 0.0, 0.1, 0.25).unwrap();
        let want = 0.08f64.powi(4) * 0.15 * 0.15;
        assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
        // nu -> 0, general H: sigma_0^4 ((T-s)^(H+1/2) / (H+1/2))^2
        let rough = RBergomiParams::new(0.08, 1e-12, 0.1).unwrap();
        let got = rb_mm_double_integral(&rough, 0.0, 0.1, 0.25).unwrap();
        let want = 0.08f64.powi(4) * (0.15f64.powf(0.6) / 0.6).powi(2);
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
        assert!(rb_mm_double_integral(&rough, 0.0, 0.3, 0.3).is_err());
    }
}
