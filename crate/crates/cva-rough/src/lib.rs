//! Pricing engine for the credit value adjustment of vulnerable European
//! call options under Heston, SABR and rough Bergomi volatility with a
//! correlated CIR default intensity.
//!
//! The engine computes a first-order adjustment formula built from the
//! Black & Scholes pricing function, the CIR affine bond coefficients and
//! the covariations between the price, variance-swap and survival
//! martingales, and validates it against an exact-covariance Monte Carlo
//! benchmark. See the `cli_report` module and the `cva-rough` binary for
//! the configuration-driven grid runner.

pub mod affine_intensity;
pub mod bs_core;
pub mod cli_report;
pub mod cva_engine;
pub mod mc_bench;
pub mod numerics;
pub mod rough_kernels;
pub mod vol_models;
