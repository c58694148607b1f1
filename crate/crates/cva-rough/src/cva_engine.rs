//! First-order CVA assembly for the three volatility models coupled with
//! the CIR intensity, returning a term-by-term breakdown.
//!
//! The adjustment has five terms built on the Black & Scholes function at
//! the zero-strike variance-swap volatility `vhat`:
//!
//! ```text
//! CVA ~ (1-R) [ (1-N) B
//!             + (1-N) (d_xx-d_x)^2 B <M,M>-integral / 8
//!             + (1-N) (d_xxx-d_xx) B <M,X>-integral / 2   (prop. to eta)
//!             - (d_xx-d_x) B <N,M>-integral / 2           (prop. to gamma)
//!             - d_x B <N,X>-integral ]                    (prop. to rho)
//! ```
//!
//! with `N` the survival factor and `M` the variance-swap martingale. The
//! rho and gamma terms multiply precomputed unit integrals, so the total
//! is affine in (rho, gamma) to machine precision.

use serde::Serialize;
use thiserror::Error;

use crate::affine_intensity::{
    sqrt_lambda_survival, survival_factor, AffineBondCoefficients, CirParams, IntensityError,
};
use crate::bs_core::{call_derivatives, call_price, BsError, BsPoint};
use crate::numerics::{integrate_adaptive, GaussJacobi};
use crate::rough_kernels::{
    rb_cross_moment, rb_forward_variance, rb_mm_double_integral, rb_vol_mean, RBergomiParams,
    RoughKernelError,
};
use crate::vol_models::{
    heston_variance_swap, heston_vol_mean, sabr_variance_swap, sabr_vol_moment, HestonParams,
    SabrParams, VolModelError, VolModelParams,
};

#[derive(Debug, Error)]
pub enum CvaError {
    #[error("correlation triple (eta={eta}, rho={rho}, gamma={gamma}) is not admissible")]
    InadmissibleCorrelation { eta: f64, rho: f64, gamma: f64 },
    #[error(
        "contract needs T > t and recovery in [0, 1), got t={t}, T={maturity}, recovery={recovery}"
    )]
    BadContract {
        t: f64,
        maturity: f64,
        recovery: f64,
    },
    #[error("rough Bergomi CVA is only defined at inception (t = 0), got t={0}")]
    RBergomiRequiresInception(f64),
    #[error(transparent)]
    Bs(#[from] BsError),
    #[error(transparent)]
    Intensity(#[from] IntensityError),
    #[error(transparent)]
    VolModel(#[from] VolModelError),
    #[error(transparent)]
    RoughKernel(#[from] RoughKernelError),
}

/// The correlation triple: `eta` price-vol, `rho` price-intensity, `gamma`
/// vol-intensity. Admissibility is
/// `gamma^2 + rho^2 + eta^2 < 1 + 2 gamma eta rho` with each below one in
/// absolute value, which makes the implied 3x3 correlation matrix positive
/// definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationStructure {
    pub eta: f64,
    pub rho: f64,
    pub gamma: f64,
}

impl CorrelationStructure {
    pub fn new(eta: f64, rho: f64, gamma: f64) -> Result<Self, CvaError> {
        if Self::admissible(eta, rho, gamma) {
            Ok(Self { eta, rho, gamma })
        } else {
            Err(CvaError::InadmissibleCorrelation { eta, rho, gamma })
        }
    }

    pub fn admissible(eta: f64, rho: f64, gamma: f64) -> bool {
        eta * eta < 1.0
            && rho * rho < 1.0
            && gamma * gamma < 1.0
            && gamma * gamma + rho * rho + eta * eta < 1.0 + 2.0 * gamma * eta * rho
    }

    /// Coefficients (a, gamma, b) of the intensity Brownian decomposition
    /// `W = a B^1 + gamma B^2 + b B^3`, so that `<B, W> = rho s` and
    /// `<B^2, W> = gamma s` with `B = sqrt(1 - eta^2) B^1 + eta B^2`.
    pub fn w_coefficients(&self) -> (f64, f64, f64) {
        let root = (1.0 - self.eta * self.eta).sqrt();
        let a = (self.rho - self.eta * self.gamma) / root;
        let b2 = (1.0 - (self.eta * self.eta + self.gamma * self.gamma + self.rho * self.rho)
            + 2.0 * self.gamma * self.eta * self.rho)
            / (1.0 - self.eta * self.eta);
        (a, self.gamma, b2.max(0.0).sqrt())
    }
}

/// Contract and market state of the vulnerable call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractState {
    /// Log-spot.
    pub x: f64,
    /// Log-strike.
    pub kappa: f64,
    /// Valuation time (years).
    pub t: f64,
    /// Maturity (years).
    pub maturity: f64,
    /// Fractional recovery R in [0, 1).
    pub recovery: f64,
}

impl ContractState {
    pub fn new(x: f64, kappa: f64, t: f64, maturity: f64, recovery: f64) -> Result<Self, CvaError> {
        if !(maturity > t && (0.0..1.0).contains(&recovery)) {
            return Err(CvaError::BadContract {
                t,
                maturity,
                recovery,
            });
        }
        Ok(Self {
            x,
            kappa,
            t,
            maturity,
            recovery,
        })
    }

    pub fn from_prices(
        spot: f64,
        strike: f64,
        t: f64,
        maturity: f64,
        recovery: f64,
    ) -> Result<Self, CvaError> {
        Self::new(spot.ln(), strike.ln(), t, maturity, recovery)
    }
}

/// Term-by-term CVA decomposition.
///
/// `total = (1 - recovery) (base + qvar_mm + skew_mx + volint_nm + wwr_nx)`
/// with `wwr_nx` exactly linear in rho and `volint_nm` exactly linear in
/// gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvaBreakdown {
    /// `(1 - N) B` term.
    pub base: f64,
    /// Quadratic-variation `<M,M>` term.
    pub qvar_mm: f64,
    /// Skew `<M,X>` term, proportional to eta.
    pub skew_mx: f64,
    /// Vol-intensity `<N,M>` term, proportional to gamma.
    pub volint_nm: f64,
    /// Wrong-way `<N,X>` term, proportional to rho.
    pub wwr_nx: f64,
    /// `(1 - recovery)` times the sum of the five terms.
    pub total: f64,
    /// Survival factor `N^t_t`.
    pub survival: f64,
    /// Variance-swap volatility used in the pricing function.
    pub vhat: f64,
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    base: f64,
    qvar_mm: f64,
    skew_mx: f64,
    volint_nm: f64,
    wwr_nx: f64,
    survival: f64,
    vhat: f64,
    recovery: f64,
) -> CvaBreakdown {
    CvaBreakdown {
        base,
        qvar_mm,
        skew_mx,
        volint_nm,
        wwr_nx,
        total: (1.0 - recovery) * (base + qvar_mm + skew_mx + volint_nm + wwr_nx),
        survival,
        vhat,
    }
}

/// `(e^(alpha^2 dt) - 1) / alpha` with the small-alpha limit `alpha dt`.
fn sabr_em1_over_alpha(alpha: f64, dt: f64) -> f64 {
    let a2t = alpha * alpha * dt;
    if a2t.abs() < 1e-10 {
        alpha * dt * (1.0 + 0.5 * a2t)
    } else {
        (a2t.exp() - 1.0) / alpha
    }
}

/// Heston-CIR first-order CVA.
///
/// The `<M,M>` and `<M,X>` time integrals use the exact closed forms of
/// `int (1 - e^{-k(T-s)})^m E_t[sigma_s^2] ds`; the intensity-coupled
/// integrals factor `E[N sqrt(lambda) sigma] ~ E[N sqrt(lambda)] E[sigma]`
/// and are evaluated by adaptive quadrature.
pub fn cva_heston_cir(
    h: &HestonParams,
    c: &CirParams,
    corr: &CorrelationStructure,
    k: &ContractState,
) -> Result<CvaBreakdown, CvaError> {
    let tau = k.maturity - k.t;
    let survival = survival_factor(c, c.lambda0, tau)?;
    let vhat = heston_variance_swap(h, k.t, k.maturity)?;
    let point = BsPoint::new(k.t, k.x, k.kappa, vhat, k.maturity)?;
    let price = call_price(&point)?;
    let greeks = call_derivatives(&point)?;

    let (kk, nu, theta) = (h.k, h.nu, h.theta);
    let a = h.sigma2_0 - theta;
    let ekt = (-kk * tau).exp();
    // int_0^tau (1 - e^{-k(tau-w)}) (theta + a e^{-kw}) dw
    let j1 = theta * tau + a * (1.0 - ekt) / kk - theta * (1.0 - ekt) / kk - a * tau * ekt;
    // int_0^tau (1 - e^{-k(tau-w)})^2 (theta + a e^{-kw}) dw
    let j2 = theta * tau + a * (1.0 - ekt) / kk - 2.0 * (theta * (1.0 - ekt) / kk + a * tau * ekt)
        + theta * (1.0 - ekt * ekt) / (2.0 * kk)
        + a * (ekt - ekt * ekt) / kk;

    let base = (1.0 - survival) * price;
    let qvar_mm = 0.125 * (1.0 - survival) * greeks.l2 * nu * nu / (kk * kk) * j2;
    let skew_mx = 0.5 * corr.eta * (1.0 - survival) * greeks.dxxx_m_dxx * nu / kk * j1;

    let ab = AffineBondCoefficients::new(c);
    let n_sqrt_lambda = |s: f64| sqrt_lambda_survival(c, c.lambda0, k.t, s, k.maturity).unwrap();
    let i_nm = integrate_adaptive(
        &mut |s: f64| {
            ab.phi(k.maturity - s)
                * (1.0 - (-kk * (k.maturity - s)).exp())
                * n_sqrt_lambda(s)
                * heston_vol_mean(h, s - k.t).unwrap()
        },
        k.t,
        k.maturity,
        1e-9,
    );
    let i_nx = integrate_adaptive(
        &mut |s: f64| {
            ab.phi(k.maturity - s) * n_sqrt_lambda(s) * heston_vol_mean(h, s - k.t).unwrap()
        },
        k.t,
        k.maturity,
        1e-9,
    );

    let volint_nm = -0.5 * corr.gamma * greeks.l1 * nu * c.c / kk * i_nm;
    let wwr_nx = -corr.rho * c.c * greeks.dx * i_nx;

    Ok(assemble(
        base, qvar_mm, skew_mx, volint_nm, wwr_nx, survival, vhat, k.recovery,
    ))
}

/// SABR-CIR first-order CVA.
///
/// The CEV factor `e^{-(1-beta) X_s}` is frozen at `X_t`, which turns the
/// price diffusion into a lognormal-vol model with effective volatility
/// `sigma_t e^{-(1-beta) X_t}`. All five terms are evaluated coherently in
/// that frozen model: the effective vol enters the variance swap, and the
/// covariation integrals pick up four, three, two and one power of the
/// frozen factor respectively (one per price-diffusion appearance in the
/// corresponding martingales). At `beta = 1` the factor is one and the
/// assembly reduces to the plain lognormal-SABR formula.
pub fn cva_sabr_cir(
    s: &SabrParams,
    c: &CirParams,
    corr: &CorrelationStructure,
    k: &ContractState,
) -> Result<CvaBreakdown, CvaError> {
    let tau = k.maturity - k.t;
    let survival = survival_factor(c, c.lambda0, tau)?;
    let frozen_cev = (-(1.0 - s.beta) * k.x).exp();
    let eff = SabrParams {
        sigma0: s.sigma0 * frozen_cev,
        alpha: s.alpha,
        beta: s.beta,
    };
    let vhat = sabr_variance_swap(&eff, k.t, k.maturity)?;
    let point = BsPoint::new(k.t, k.x, k.kappa, vhat, k.maturity)?;
    let price = call_price(&point)?;
    let greeks = call_derivatives(&point)?;

    let base = (1.0 - survival) * price;

    let em1 = |time: f64| sabr_em1_over_alpha(s.alpha, k.maturity - time);
    let i_mm = integrate_adaptive(
        &mut |u: f64| {
            let g = em1(u);
            g * g * sabr_vol_moment(&eff, 4, u - k.t).unwrap()
        },
        k.t,
        k.maturity,
        1e-9,
    );
    let i_mx = integrate_adaptive(
        &mut |u: f64| em1(u) * sabr_vol_moment(&eff, 3, u - k.t).unwrap(),
        k.t,
        k.maturity,
        1e-9,
    );

    // d<M,M> = 4 sigma^4 ((e^{alpha^2(T-s)} - 1)/alpha)^2 ds and
    // d<M,X> = 2 eta sigma^3 (e^{alpha^2(T-s)} - 1)/alpha ds in the frozen
    // model, so the boxed 1/8 and 1/2 prefactors become 1/2 and 1.
    let qvar_mm = 0.5 * (1.0 - survival) * greeks.l2 * i_mm;
    let skew_mx = corr.eta * (1.0 - survival) * greeks.dxxx_m_dxx * i_mx;

    let ab = AffineBondCoefficients::new(c);
    let n_sqrt_lambda = |u: f64| sqrt_lambda_survival(c, c.lambda0, k.t, u, k.maturity).unwrap();
    let i_nm = integrate_adaptive(
        &mut |u: f64| {
            ab.phi(k.maturity - u)
                * em1(u)
                * n_sqrt_lambda(u)
                * sabr_vol_moment(&eff, 2, u - k.t).unwrap()
        },
        k.t,
        k.maturity,
        1e-9,
    );
    let i_nx = integrate_adaptive(
        &mut |u: f64| {
            ab.phi(k.maturity - u) * n_sqrt_lambda(u) * sabr_vol_moment(&eff, 1, u - k.t).unwrap()
        },
        k.t,
        k.maturity,
        1e-9,
    );

    let volint_nm = -corr.gamma * c.c * greeks.l1 * i_nm;
    let wwr_nx = -corr.rho * c.c * greeks.dx * i_nx;

    Ok(assemble(
        base, qvar_mm, skew_mx, volint_nm, wwr_nx, survival, vhat, k.recovery,
    ))
}

/// Rough Bergomi-CIR first-order CVA at inception (t = 0; the conditional
/// law is not a function of a scalar state for t > 0, so later valuation
/// times are rejected).
pub fn cva_rbergomi_cir(
    r: &RBergomiParams,
    c: &CirParams,
    corr: &CorrelationStructure,
    k: &ContractState,
) -> Result<CvaBreakdown, CvaError> {
    if k.t != 0.0 {
        return Err(CvaError::RBergomiRequiresInception(k.t));
    }
    let maturity = k.maturity;
    let survival = survival_factor(c, c.lambda0, maturity)?;
    let vhat = r.sigma0; // flat forward variance at inception
    let point = BsPoint::new(0.0, k.x, k.kappa, vhat, maturity)?;
    let price = call_price(&point)?;
    let greeks = call_derivatives(&point)?;

    let base = (1.0 - survival) * price;

    let kernel_rule = GaussJacobi::cached(24, 0.0, r.hurst - 0.5)
        .expect("valid Jacobi parameters for Hurst in (0, 1/2]");

    // <M,M>: outer s-integral of the double kernel integral
    let i_mm = integrate_adaptive(
        &mut |s: f64| rb_mm_double_integral(r, 0.0, s, maturity).unwrap(),
        0.0,
        maturity * (1.0 - 1e-12),
        1e-10,
    );
    let qvar_mm = 0.25 * r.nu * r.nu * r.hurst * (1.0 - survival) * greeks.l2 * i_mm;

    // <M,X>: outer s-integral of the kernel-weighted cross moment
    let root2h = (2.0 * r.hurst).sqrt();
    let i_mx = integrate_adaptive(
        &mut |s: f64| {
            kernel_rule.integrate(s, maturity, |u| rb_cross_moment(r, 0.0, s, u, 0.0).unwrap())
        },
        0.0,
        maturity,
        1e-10,
    );
    let skew_mx = 0.5 * corr.eta * r.nu * root2h * (1.0 - survival) * greeks.dxxx_m_dxx * i_mx;

    let ab = AffineBondCoefficients::new(c);
    let n_sqrt_lambda = |s: f64| sqrt_lambda_survival(c, c.lambda0, 0.0, s, maturity).unwrap();

    // <N,M>: phi-weighted survival factor against the kernel-integrated
    // forward variance (flat sigma_0^2 at inception)
    let i_nm = integrate_adaptive(
        &mut |s: f64| {
            ab.phi(maturity - s)
                * n_sqrt_lambda(s)
                * kernel_rule.integrate(s, maturity, |u| {
                    rb_forward_variance(r, 0.0, u, 0.0).unwrap()
                })
        },
        0.0,
        maturity,
        1e-10,
    );
    let volint_nm = -0.5 * corr.gamma * c.c * r.nu * root2h * greeks.l1 * i_nm;

    // <N,X>: phi-weighted survival factor against the conditional vol mean
    let i_nx = integrate_adaptive(
        &mut |s: f64| {
            ab.phi(maturity - s) * n_sqrt_lambda(s) * rb_vol_mean(r, 0.0, s, 0.0).unwrap()
        },
        0.0,
        maturity,
        1e-10,
    );
    let wwr_nx = -corr.rho * c.c * greeks.dx * i_nx;

    Ok(assemble(
        base, qvar_mm, skew_mx, volint_nm, wwr_nx, survival, vhat, k.recovery,
    ))
}

/// Model-dispatching CVA evaluation.
pub fn cva(
    model: &VolModelParams,
    c: &CirParams,
    corr: &CorrelationStructure,
    k: &ContractState,
) -> Result<CvaBreakdown, CvaError> {
    match model {
        VolModelParams::Heston(h) => cva_heston_cir(h, c, corr, k),
        VolModelParams::Sabr(s) => cva_sabr_cir(s, c, corr, k),
        VolModelParams::RBergomi(r) => cva_rbergomi_cir(r, c, corr, k),
    }
}

/// Zero-strike variance-swap volatility of the given model over `[t, T]`.
/// For rough Bergomi the valuation time must be 0, where the forward
/// variance is flat and `vhat = sigma_0` exactly.
pub fn variance_swap_vol(model: &VolModelParams, t: f64, maturity: f64) -> Result<f64, CvaError> {
    match model {
        VolModelParams::Heston(h) => Ok(heston_variance_swap(h, t, maturity)?),
        VolModelParams::Sabr(s) => Ok(sabr_variance_swap(s, t, maturity)?),
        VolModelParams::RBergomi(r) => {
            if t != 0.0 {
                return Err(CvaError::RBergomiRequiresInception(t));
            }
            if maturity <= t {
                return Err(CvaError::BadContract {
                    t,
                    maturity,
                    recovery: 0.0,
                });
            }
            Ok(r.sigma0)
        }
    }
}
