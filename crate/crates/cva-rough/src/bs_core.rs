//! Black & Scholes call pricing function and the exact derivative
//! combinations the adjustment formulas consume.
//!
//! Everything is expressed in log-spot / log-strike coordinates:
//!
//! ```text
//! B(s, x, zeta) = e^x N(d+) - e^kappa N(d-),
//! d+- = (x - kappa +- zeta^2 (T - s) / 2) / (zeta sqrt(T - s)).
//! ```
//!
//! The rate is zero throughout, matching the pricing engine.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BsError {
    #[error("invalid point: need T >= s and zeta >= 0, got s={s}, T={maturity}, zeta={zeta}")]
    InvalidPoint { s: f64, maturity: f64, zeta: f64 },
    #[error("degenerate total volatility: zeta * sqrt(T - s) = 0")]
    DegenerateVolatility,
}

/// Standard normal CDF through the complementary error function
/// (absolute error below 1e-15; no rational shortcuts).
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Evaluation point of the call pricing function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsPoint {
    /// Valuation time in years.
    pub s: f64,
    /// Log-spot.
    pub x: f64,
    /// Log-strike.
    pub kappa: f64,
    /// Volatility argument, per sqrt(year).
    pub zeta: f64,
    /// Maturity in years.
    pub maturity: f64,
}

/// The derivative combinations of the pricing function used by the
/// adjustment terms.
#[derive(Debug, Clone, Copy)]
pub struct CallDerivatives {
    /// dB/dx = e^x N(d+).
    pub dx: f64,
    /// (d_xx - d_x) B = e^x N'(d+) / (zeta sqrt(T - s)).
    pub l1: f64,
    /// (d_xxx - d_xx) B = l1 (1 - d+ / (zeta sqrt(T - s))).
    pub dxxx_m_dxx: f64,
    /// (d_xx - d_x)^2 B = e^x N'(d+) (d+^2 - d+ zeta sqrt(T-s) - 1)
    ///                    / (zeta^3 (T - s)^(3/2)).
    pub l2: f64,
}

impl BsPoint {
    pub fn new(s: f64, x: f64, kappa: f64, zeta: f64, maturity: f64) -> Result<Self, BsError> {
        if !(maturity >= s && zeta >= 0.0) || !s.is_finite() || !zeta.is_finite() {
            return Err(BsError::InvalidPoint { s, maturity, zeta });
        }
        Ok(Self {
            s,
            x,
            kappa,
            zeta,
            maturity,
        })
    }

    /// Total volatility over the remaining life, `zeta * sqrt(T - s)`.
    pub fn total_vol(&self) -> f64 {
        self.zeta * (self.maturity - self.s).sqrt()
    }
}

/// The pair `(d+, d-)`. Errors when the total volatility degenerates.
pub fn d_plus_minus(p: &BsPoint) -> Result<(f64, f64), BsError> {
    let tv = p.total_vol();
    if tv == 0.0 {
        return Err(BsError::DegenerateVolatility);
    }
    let m = p.x - p.kappa;
    let d_plus = m / tv + 0.5 * tv;
    let d_minus = m / tv - 0.5 * tv;
    Ok((d_plus, d_minus))
}

/// Call price. Degenerates to the intrinsic value `(e^x - e^kappa)+` when
/// the total volatility vanishes.
pub fn call_price(p: &BsPoint) -> Result<f64, BsError> {
    if p.maturity < p.s || p.zeta < 0.0 {
        return Err(BsError::InvalidPoint {
            s: p.s,
            maturity: p.maturity,
            zeta: p.zeta,
        });
    }
    match d_plus_minus(p) {
        Ok((dp, dm)) => Ok(p.x.exp() * norm_cdf(dp) - p.kappa.exp() * norm_cdf(dm)),
        Err(BsError::DegenerateVolatility) => Ok((p.x.exp() - p.kappa.exp()).max(0.0)),
        Err(e) => Err(e),
    }
}

/// The derivative combinations. Requires strictly positive total volatility.
pub fn call_derivatives(p: &BsPoint) -> Result<CallDerivatives, BsError> {
    let (d_plus, _) = d_plus_minus(p)?;
    let tv = p.total_vol();
    let ex = p.x.exp();
    let pdf = norm_pdf(d_plus);
    let l1 = ex * pdf / tv;
    let dxxx_m_dxx = l1 * (1.0 - d_plus / tv);
    let l2 = ex * pdf * (d_plus * d_plus - d_plus * tv - 1.0) / (tv * tv * tv);
    Ok(CallDerivatives {
        dx: ex * norm_cdf(d_plus),
        l1,
        dxxx_m_dxx,
        l2,
    })
}
