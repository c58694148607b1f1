//! CIR default intensity: affine bond coefficients, survival factors and
//! the frozen-lambda approximation of `E_t[N^t_s sqrt(lambda_s)]`.
//!
//! The intensity follows
//!
//! ```text
//! d lambda = q (mu - lambda) dt + c sqrt(lambda) dW
//! ```
//!
//! and the survival martingale is `N^t_s = e^{-int_t^s lambda} e^{phi(T-s)
//! lambda_s + psi(T-s)}` with the standard CIR closed forms for `phi`, `psi`.

use serde::Serialize;
use thiserror::Error;

use crate::numerics::integrate_adaptive;

#[derive(Debug, Error, PartialEq)]
pub enum IntensityError {
    #[error(
        "CIR parameters must be strictly positive, got lambda0={lambda0}, q={q}, mu={mu}, c={c}"
    )]
    NonPositiveParameter {
        lambda0: f64,
        q: f64,
        mu: f64,
        c: f64,
    },
    #[error("Feller condition violated: c^2 = {c2} >= 2 q mu = {bound}")]
    FellerViolated { c2: f64, bound: f64 },
    #[error("time-to-maturity must be nonnegative, got {0}")]
    NegativeTau(f64),
    #[error("intensity state must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("frozen-lambda approximation needs lambda_t > 0")]
    ZeroLambda,
    #[error("times must satisfy t <= s <= T, got t={t}, s={s}, T={maturity}")]
    BadTimeOrder { t: f64, s: f64, maturity: f64 },
}

/// CIR intensity parameters. Rates are per year, `c` per sqrt(year).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CirParams {
    pub lambda0: f64,
    pub q: f64,
    pub mu: f64,
    pub c: f64,
}

impl CirParams {
    /// Validated constructor: positivity plus the Feller condition
    /// `c^2 < 2 q mu`.
    pub fn new(lambda0: f64, q: f64, mu: f64, c: f64) -> Result<Self, IntensityError> {
        let p = Self::new_without_feller_check(lambda0, q, mu, c)?;
        if !p.feller_satisfied() {
            return Err(IntensityError::FellerViolated {
                c2: c * c,
                bound: 2.0 * q * mu,
            });
        }
        Ok(p)
    }

    /// Positivity-only constructor. The affine bond closed forms and the
    /// full-truncation Monte Carlo scheme remain valid when the origin is
    /// attainable, so Feller-violating calibrations can still be priced.
    pub fn new_without_feller_check(
        lambda0: f64,
        q: f64,
        mu: f64,
        c: f64,
    ) -> Result<Self, IntensityError> {
        if !(lambda0 > 0.0 && q > 0.0 && mu > 0.0 && c > 0.0) {
            return Err(IntensityError::NonPositiveParameter { lambda0, q, mu, c });
        }
        Ok(Self { lambda0, q, mu, c })
    }

    pub fn feller_satisfied(&self) -> bool {
        self.c * self.c < 2.0 * self.q * self.mu
    }
}

/// The affine exponents of the CIR survival bond, as functions of
/// time-to-maturity.
#[derive(Debug, Clone, Copy)]
pub struct AffineBondCoefficients {
    params: CirParams,
    p: f64,
}

impl AffineBondCoefficients {
    pub fn new(params: &CirParams) -> Self {
        let p = (params.q * params.q + 2.0 * params.c * params.c).sqrt();
        Self { params: *params, p }
    }

    /// `p = sqrt(q^2 + 2 c^2)`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// `phi(tau) = -2 (e^{p tau} - 1) / (p - q + (p + q) e^{p tau})`,
    /// evaluated with the exponential kept in `e^{-p tau}` form so large
    /// `p tau` cannot overflow.
    pub fn phi(&self, tau: f64) -> f64 {
        let (p, q) = (self.p, self.params.q);
        let em = (-p * tau).exp();
        -2.0 * (1.0 - em) / ((p - q) * em + (p + q))
    }

    /// `psi(tau) = (2 q mu / c^2) ln[ 2 p e^{(p+q) tau / 2} /
    /// (p - q + (p + q) e^{p tau}) ]`, in log space.
    pub fn psi(&self, tau: f64) -> f64 {
        let (p, q) = (self.p, self.params.q);
        let (mu, c) = (self.params.mu, self.params.c);
        let em = (-p * tau).exp();
        let log_denom = p * tau + ((p - q) * em + (p + q)).ln();
        (2.0 * q * mu / (c * c)) * ((2.0 * p).ln() + 0.5 * (p + q) * tau - log_denom)
    }
}

/// The pair `(phi(tau), psi(tau))`.
pub fn bond_coefficients(params: &CirParams, tau: f64) -> Result<(f64, f64), IntensityError> {
    if tau < 0.0 {
        return Err(IntensityError::NegativeTau(tau));
    }
    let ab = AffineBondCoefficients::new(params);
    Ok((ab.phi(tau), ab.psi(tau)))
}

/// Survival factor `N^t_t = E_t[e^{-int_t^T lambda}] = e^{phi(tau) lambda_t
/// + psi(tau)}` with `tau = T - t`.
pub fn survival_factor(params: &CirParams, lambda_t: f64, tau: f64) -> Result<f64, IntensityError> {
    if lambda_t < 0.0 {
        return Err(IntensityError::NegativeLambda(lambda_t));
    }
    let (phi, psi) = bond_coefficients(params, tau)?;
    Ok((phi * lambda_t + psi).exp())
}

/// Frozen-lambda approximation of `E_t[N^t_s sqrt(lambda_s)]`:
///
/// ```text
/// sqrt(lambda_t) N^t_t exp( int_t^s g(u) du ),
/// g(u) = (4 q mu - c^2) / (8 lambda_t) - (q - c^2 phi(T-u)) / 2.
/// ```
///
/// `g` follows from the Ito drift of `sqrt(lambda) N^t` with the `1/lambda`
/// factor frozen at `lambda_t`; the integral is evaluated by adaptive
/// quadrature (tolerance 1e-10).
pub fn sqrt_lambda_survival(
    params: &CirParams,
    lambda_t: f64,
    t: f64,
    s: f64,
    maturity: f64,
) -> Result<f64, IntensityError> {
    if lambda_t <= 0.0 {
        return Err(IntensityError::ZeroLambda);
    }
    if !(t <= s && s <= maturity) {
        return Err(IntensityError::BadTimeOrder { t, s, maturity });
    }
    let ab = AffineBondCoefficients::new(params);
    let n_tt = survival_factor(params, lambda_t, maturity - t)?;
    let (q, mu, c) = (params.q, params.mu, params.c);
    let c2 = c * c;
    let level = (4.0 * q * mu - c2) / (8.0 * lambda_t) - 0.5 * q;
    let g_int = level * (s - t)
        + 0.5 * c2 * integrate_adaptive(&mut |u: f64| ab.phi(maturity - u), t, s, 1e-10);
    Ok(lambda_t.sqrt() * n_tt * g_int.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn set_a() -> CirParams {
        CirParams::new(0.035, 0.35, 0.035, 0.1).unwrap()
    }

    pub fn set_b() -> CirParams {
        CirParams::new_without_feller_check(0.01, 0.8, 0.02, 0.2).unwrap()
    }

    /// RK4 integration of the CIR Riccati system
    /// phi' = -q phi + c^2 phi^2 / 2 - 1, psi' = q mu phi, from tau = 0.
    pub fn riccati_rk4(params: &CirParams, tau: f64, step: f64) -> (f64, f64) {
        let (q, mu, c2) = (params.q, params.mu, params.c * params.c);
        let f_phi = |phi: f64| -q * phi + 0.5 * c2 * phi * phi - 1.0;
        let n = (tau / step).ceil() as usize;
        let h = tau / n.max(1) as f64;
        let (mut phi, mut psi) = (0.0_f64, 0.0_f64);
        for _ in 0..n {
            let k1 = f_phi(phi);
            let k2 = f_phi(phi + 0.5 * h * k1);
            let k3 = f_phi(phi + 0.5 * h * k2);
            let k4 = f_phi(phi + h * k3);
            let m1 = q * mu * phi;
            let m2 = q * mu * (phi + 0.5 * h * k1);
            let m3 = q * mu * (phi + 0.5 * h * k2);
            let m4 = q * mu * (phi + h * k3);
            phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            psi += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
        }
        (phi, psi)
    }

    #[test]
    fn feller_gate() {
        assert!(CirParams::new(0.035, 0.35, 0.035, 0.1).is_ok());
        // set B violates Feller: c^2 = 0.04 > 2 q mu = 0.032
        assert!(matches!(
            CirParams::new(0.01, 0.8, 0.02, 0.2),
            Err(IntensityError::FellerViolated { .. })
        ));
        assert!(CirParams::new_without_feller_check(0.01, 0.8, 0.02, 0.2).is_ok());
        assert!(CirParams::new_without_feller_check(0.01, -0.8, 0.02, 0.2).is_err());
    }

    #[test]
    fn coefficients_vanish_at_zero_tau() {
        for p in [set_a(), set_b()] {
            let (phi, psi) = bond_coefficients(&p, 0.0).unwrap();
            assert_eq!(phi, 0.0);
            assert!(psi.abs() < 1e-15);
        }
    }

    #[test]
    fn coefficients_match_riccati_ode() {
        for p in [set_a(), set_b()] {
            let ab = AffineBondCoefficients::new(&p);
            let mut tau = 0.25;
            while tau <= 2.0 + 1e-12 {
                let (phi_ode, psi_ode) = riccati_rk4(&p, tau, 1e-4);
                assert!(
                    (ab.phi(tau) - phi_ode).abs() < 1e-8,
                    "phi({tau}) = {} vs ODE {}",
                    ab.phi(tau),
                    phi_ode
                );
                assert!(
                    (ab.psi(tau) - psi_ode).abs() < 1e-8,
                    "psi({tau}) = {} vs ODE {}",
                    ab.psi(tau),
                    psi_ode
                );
                tau += 0.25;
            }
        }
    }

    #[test]
    fn survival_for_set_a_near_deterministic() {
        let s = survival_factor(&set_a(), 0.035, 0.25).unwrap();
        assert!((s - (-0.035f64 * 0.25).exp()).abs() < 1e-4, "survival {s}");
        // frozen value, cross-checked by the Monte Carlo oracle test suite
        assert!((s - 0.99131).abs() < 5e-5, "survival {s}");
    }

    #[test]
    fn survival_bounds_and_monotonicity() {
        let p = set_a();
        let mut prev = 1.0;
        for i in 0..40 {
            let tau = 0.05 * (i + 1) as f64;
            let s = survival_factor(&p, 0.035, tau).unwrap();
            assert!(s > 0.0 && s < prev);
            prev = s;
        }
        assert!(survival_factor(&p, 0.05, 0.5).unwrap() < survival_factor(&p, 0.02, 0.5).unwrap());
        assert!((survival_factor(&p, 0.035, 0.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn survival_deterministic_intensity_limit() {
        // c -> 0: survival -> exp(-mu tau - (lambda0 - mu)(1 - e^{-q tau})/q)
        let p = CirParams::new(0.05, 0.6, 0.03, 1e-5).unwrap();
        for &tau in &[0.25, 1.0, 2.0] {
            let got = survival_factor(&p, p.lambda0, tau).unwrap();
            let det = (-(p.mu * tau + (p.lambda0 - p.mu) * (1.0 - (-p.q * tau).exp()) / p.q)).exp();
            assert!((got - det).abs() < 1e-6, "tau={tau}: {got} vs {det}");
        }
    }

    #[test]
    fn phi_overflow_guard() {
        let ab = AffineBondCoefficients::new(&set_a());
        // huge tau: phi tends to (q - p)/c^2, psi stays finite in slope
        let limit = (set_a().q - ab.p()) / (set_a().c * set_a().c);
        assert!((ab.phi(5000.0) - limit).abs() < 1e-10);
        assert!(ab.psi(5000.0).is_finite());
    }

    #[test]
    fn sqrt_lambda_survival_at_s_equal_t() {
        let p = set_a();
        let got = sqrt_lambda_survival(&p, 0.035, 0.0, 0.0, 0.25).unwrap();
        let want = 0.035f64.sqrt() * survival_factor(&p, 0.035, 0.25).unwrap();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn sqrt_lambda_survival_decreasing_in_s() {
        let p = set_a();
        let mut prev = f64::INFINITY;
        for i in 0..=10 {
            let s = 0.025 * i as f64;
            let v = sqrt_lambda_survival(&p, 0.035, 0.0, s, 0.25).unwrap();
            assert!(v < prev, "not decreasing at s={s}");
            prev = v;
        }
    }

    #[test]
    fn sqrt_lambda_survival_rejects_bad_input() {
        let p = set_a();
        assert_eq!(
            sqrt_lambda_survival(&p, 0.0, 0.0, 0.1, 0.25),
            Err(IntensityError::ZeroLambda)
        );
        assert!(sqrt_lambda_survival(&p, 0.03, 0.2, 0.1, 0.25).is_err());
        assert!(sqrt_lambda_survival(&p, 0.03, 0.0, 0.3, 0.25).is_err());
    }
}
