//! Monte Carlo benchmark: exact-covariance joint Gaussian simulation of
//! (B, Z, W) for the rough Bergomi-CIR model, Euler full-truncation
//! schemes for the diffusive models and the CIR intensity, and the
//! defaultable-payoff estimator
//!
//! ```text
//! CVA = (1 - R) E[ (1 - e^{-int_0^T lambda}) (e^{X_T} - e^kappa)+ ].
//! ```
//!
//! Paths are generated in fixed-size chunks, each driven by its own
//! ChaCha12 stream keyed by (seed, chunk index), and chunk statistics are
//! merged in chunk order: estimates are bit-identical for any thread
//! count.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::affine_intensity::{AffineBondCoefficients, CirParams};
use crate::cva_engine::{ContractState, CorrelationStructure};
use crate::numerics::inverse_norm_cdf;
use crate::rough_kernels::{rl_fbm_covariance, RBergomiParams};
use crate::vol_models::VolModelParams;

#[derive(Debug, Error)]
pub enum McError {
    #[error("bad Monte Carlo config: need n_paths >= 1, n_steps >= 2, chunk_size >= 1 and ci_level in (0,1)")]
    BadConfig,
    #[error("covariance matrix is not positive semi-definite (jitter up to {max_jitter:e} tried)")]
    NotPositiveSemiDefinite { max_jitter: f64 },
    #[error("covariance dimension {dim} does not match 3 x n_steps = {expected}")]
    DimensionMismatch { dim: usize, expected: usize },
    #[error("{rejected} of {total} paths produced non-finite values (rate above 1e-6)")]
    TooManyRejectedPaths { rejected: u64, total: u64 },
    #[error("diffusion benchmark expects a Heston or SABR model")]
    NotADiffusionModel,
}

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    /// Number of equi-spaced time steps on [0, T]; the simulation grid is
    /// `{ i T / n_steps, i = 1..n_steps }` (t = 0 carries no randomness).
    pub n_steps: usize,
    pub seed: u64,
    /// Paths per deterministic RNG stream.
    pub chunk_size: usize,
    /// Two-sided confidence level for `ci_half_width`.
    pub ci_level: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_steps: 100,
            seed: 42,
            chunk_size: 4096,
            ci_level: 0.95,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.n_paths >= 1
            && self.n_steps >= 2
            && self.chunk_size >= 1
            && self.ci_level > 0.0
            && self.ci_level < 1.0
        {
            Ok(())
        } else {
            Err(McError::BadConfig)
        }
    }

    fn z_level(&self) -> f64 {
        inverse_norm_cdf(0.5 * (1.0 + self.ci_level))
    }
}

/// A Monte Carlo estimate with its sampling error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McResult {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_half_width: f64,
    pub n_paths: usize,
    pub wall_time: f64,
}

/// Output of a defaultable-call simulation.
#[derive(Debug, Clone)]
pub struct McCvaOutput {
    /// `(1 - R) E[(1 - e^{-int lambda}) payoff]`.
    pub cva: McResult,
    /// Default-free call price `E[payoff]`.
    pub risk_free_price: McResult,
    /// `E[e^{X_T}]`, which must reproduce the spot under r = 0.
    pub spot_martingale: McResult,
    /// Fraction of Euler steps whose square-root state went negative
    /// before truncation.
    pub truncated_fraction: f64,
    pub rejected_paths: u64,
}

/// Equi-spaced simulation grid `{ i T / n, i = 1..n }`.
pub fn time_grid(maturity: f64, n_steps: usize) -> Vec<f64> {
    let dt = maturity / n_steps as f64;
    (1..=n_steps).map(|i| i as f64 * dt).collect()
}

/// Precomputed kernels of the joint (B, Z, W) covariance for one grid, so
/// a correlation sweep only rescales blocks instead of re-integrating the
/// RL-fBm covariances.
#[derive(Debug, Clone)]
pub struct JointCovarianceBuilder {
    n: usize,
    min_kernel: DMatrix<f64>,
    cross_kernel: DMatrix<f64>,
    zz: DMatrix<f64>,
}

impl JointCovarianceBuilder {
    pub fn new(hurst: f64, grid: &[f64]) -> Self {
        let n = grid.len();
        assert!(n >= 1 && grid[0] > 0.0, "grid must start after 0");
        assert!(
            grid.windows(2).all(|w| w[1] > w[0]),
            "grid must be strictly increasing"
        );

        let he = hurst + 0.5;
        let mut min_kernel = DMatrix::<f64>::zeros(n, n);
        let mut cross_kernel = DMatrix::<f64>::zeros(n, n);
        let mut zz = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (ti, tj) = (grid[i], grid[j]);
                min_kernel[(i, j)] = ti.min(tj);
                // int_0^{min} (tj - xi)^(H - 1/2) dxi, tj the Z-time
                cross_kernel[(i, j)] = (tj.powf(he) - (tj - ti.min(tj)).powf(he)) / he;
            }
            for j in 0..=i {
                let z = rl_fbm_covariance(hurst, grid[i], grid[j]);
                zz[(i, j)] = z;
                zz[(j, i)] = z;
            }
        }
        Self {
            n,
            min_kernel,
            cross_kernel,
            zz,
        }
    }

    /// Assembles the 3n x 3n covariance of `(B, Z, W)` for one
    /// correlation triple.
    pub fn assemble(&self, corr: &CorrelationStructure) -> DMatrix<f64> {
        let n = self.n;
        let mut cov = DMatrix::<f64>::zeros(3 * n, 3 * n);
        for i in 0..n {
            for j in 0..n {
                let minij = self.min_kernel[(i, j)];
                let kij = self.cross_kernel[(i, j)];
                cov[(i, j)] = minij; // B-B
                cov[(2 * n + i, 2 * n + j)] = minij; // W-W
                cov[(i, 2 * n + j)] = corr.rho * minij; // B-W
                cov[(2 * n + j, i)] = corr.rho * minij;
                cov[(i, n + j)] = corr.eta * kij; // B-Z
                cov[(n + j, i)] = corr.eta * kij;
                cov[(2 * n + i, n + j)] = corr.gamma * kij; // W-Z
                cov[(n + j, 2 * n + i)] = corr.gamma * kij;
                cov[(n + i, n + j)] = self.zz[(i, j)]; // Z-Z
            }
        }
        cov
    }
}

/// Exact covariance of the stacked vector `(B_{t_i}, Z_{t_i}, W_{t_i})`:
/// Brownian min-kernels for B and W, `rho min` across them, the RL-fBm
/// covariance for Z, and
/// `Cov(B_a, Z_b) = eta (b^{H+1/2} - (b - min(a,b))^{H+1/2}) / (H + 1/2)`
/// (`gamma` in place of `eta` for W).
pub fn joint_gaussian_covariance(
    hurst: f64,
    corr: &CorrelationStructure,
    grid: &[f64],
) -> DMatrix<f64> {
    JointCovarianceBuilder::new(hurst, grid).assemble(corr)
}

/// Lower Cholesky factor with symmetric jitter escalation
/// (1e-14 -> 1e-12 of the largest diagonal entry) before declaring the
/// matrix non-PSD.
fn cholesky_with_jitter(cov: &DMatrix<f64>) -> Result<DMatrix<f64>, McError> {
    let scale = cov.diagonal().iter().fold(0.0_f64, |m, &d| m.max(d));
    for jitter in [0.0, 1e-14, 1e-13, 1e-12] {
        let mut shifted = cov.clone();
        if jitter > 0.0 {
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += jitter * scale;
            }
        }
        if let Some(chol) = nalgebra::Cholesky::new(shifted) {
            return Ok(chol.unpack());
        }
    }
    Err(McError::NotPositiveSemiDefinite {
        max_jitter: 1e-12 * scale,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    sum: f64,
    sum_sq: f64,
    n: u64,
}

impl Acc {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.n += 1;
    }

    fn merge(&mut self, other: &Acc) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.n += other.n;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn std_error(&self) -> f64 {
        let n = self.n as f64;
        let var = (self.sum_sq / n - self.mean() * self.mean()).max(0.0) * n / (n - 1.0).max(1.0);
        (var / n).sqrt()
    }

    fn result(&self, scale: f64, z: f64, wall_time: f64) -> McResult {
        McResult {
            estimate: scale * self.mean(),
            std_error: scale.abs() * self.std_error(),
            ci_half_width: z * scale.abs() * self.std_error(),
            n_paths: self.n as usize,
            wall_time,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ChunkStats {
    cva: Acc,
    risk_free: Acc,
    spot: Acc,
    truncations: u64,
    steps: u64,
    rejected: u64,
}

impl ChunkStats {
    fn merge(&mut self, other: &ChunkStats) {
        self.cva.merge(&other.cva);
        self.risk_free.merge(&other.risk_free);
        self.spot.merge(&other.spot);
        self.truncations += other.truncations;
        self.steps += other.steps;
        self.rejected += other.rejected;
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_ranges(n_paths: usize, chunk_size: usize) -> Vec<(u64, usize)> {
    (0..n_paths.div_ceil(chunk_size))
        .map(|c| (c as u64, chunk_size.min(n_paths - c * chunk_size)))
        .collect()
}

fn finalize(
    cfg: &McConfig,
    stats: ChunkStats,
    one_minus_r: f64,
    started: Instant,
) -> Result<McCvaOutput, McError> {
    let total = stats.cva.n + stats.rejected;
    if stats.rejected as f64 > 1e-6 * total as f64 {
        return Err(McError::TooManyRejectedPaths {
            rejected: stats.rejected,
            total,
        });
    }
    let wall = started.elapsed().as_secs_f64();
    let z = cfg.z_level();
    Ok(McCvaOutput {
        cva: stats.cva.result(one_minus_r, z, wall),
        risk_free_price: stats.risk_free.result(1.0, z, wall),
        spot_martingale: stats.spot.result(1.0, z, wall),
        truncated_fraction: stats.truncations as f64 / stats.steps.max(1) as f64,
        rejected_paths: stats.rejected,
    })
}

/// Rough Bergomi-CIR benchmark: joint Gaussian paths drawn through the
/// Cholesky factor of `cov`, variance read off Z exactly, log-price by
/// left-point Euler, intensity by Euler with full truncation, and the
/// discounted defaultable payoff with a trapezoid `int lambda` over the
/// truncated values.
///
/// `intensity = None` switches default risk off (the CVA estimate is then
/// identically zero and `risk_free_price` is the quantity of interest).
pub fn simulate_paths(
    cfg: &McConfig,
    cov: &DMatrix<f64>,
    r: &RBergomiParams,
    intensity: Option<&CirParams>,
    k: &ContractState,
) -> Result<McCvaOutput, McError> {
    cfg.validate()?;
    let n = cfg.n_steps;
    if cov.nrows() != 3 * n || cov.ncols() != 3 * n {
        return Err(McError::DimensionMismatch {
            dim: cov.nrows(),
            expected: 3 * n,
        });
    }
    let started = Instant::now();
    let chol = cholesky_with_jitter(cov)?;

    let maturity = k.maturity;
    let dt = maturity / n as f64;
    let grid = time_grid(maturity, n);
    let h2 = 2.0 * r.hurst;
    let vol_scale = r.nu * (2.0 * r.hurst).sqrt();
    // deterministic drift of the log-variance at each grid time
    let var_drift: Vec<f64> = grid
        .iter()
        .map(|&t| -0.5 * r.nu * r.nu * t.powf(h2))
        .collect();
    let strike = k.kappa.exp();

    let stats = chunk_ranges(cfg.n_paths, cfg.chunk_size)
        .into_par_iter()
        .map(|(chunk, m)| {
            let mut rng = chunk_rng(cfg.seed, chunk);
            let mut stats = ChunkStats::default();
            let mut normals = DMatrix::<f64>::zeros(3 * n, m);
            for v in normals.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let draws = &chol * &normals;

            for p in 0..m {
                let col = draws.column(p);
                let mut x = k.x;
                let mut prev_b = 0.0;
                let mut prev_w = 0.0;
                let mut lambda = intensity.map(|c| c.lambda0).unwrap_or(0.0);
                let mut int_lambda = 0.5 * lambda * dt;
                let mut sigma2 = r.sigma0 * r.sigma0;
                for i in 0..n {
                    let b = col[i];
                    x += -0.5 * sigma2 * dt + sigma2.sqrt() * (b - prev_b);
                    prev_b = b;
                    sigma2 = r.sigma0 * r.sigma0 * (vol_scale * col[n + i] + var_drift[i]).exp();
                    if let Some(c) = intensity {
                        let w = col[2 * n + i];
                        if lambda < 0.0 {
                            stats.truncations += 1;
                        }
                        let lp = lambda.max(0.0);
                        lambda = lambda + c.q * (c.mu - lp) * dt + c.c * lp.sqrt() * (w - prev_w);
                        prev_w = w;
                        let weight = if i + 1 == n { 0.5 } else { 1.0 };
                        int_lambda += weight * lambda.max(0.0) * dt;
                    }
                    stats.steps += 1;
                }
                let payoff = (x.exp() - strike).max(0.0);
                let cva_payoff = (1.0 - (-int_lambda).exp()) * payoff;
                if payoff.is_finite() && cva_payoff.is_finite() {
                    stats.cva.push(cva_payoff);
                    stats.risk_free.push(payoff);
                    stats.spot.push(x.exp());
                } else {
                    stats.rejected += 1;
                }
            }
            stats
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(ChunkStats::default(), |mut acc, s| {
            acc.merge(s);
            acc
        });

    finalize(cfg, stats, 1.0 - k.recovery, started)
}

/// Euler full-truncation benchmark for the Heston and SABR models, with
/// the three driving Brownian motions built from independent Gaussians
/// through the correlation decomposition of `corr`.
pub fn simulate_diffusion_cva(
    cfg: &McConfig,
    model: &VolModelParams,
    intensity: Option<&CirParams>,
    corr: &CorrelationStructure,
    k: &ContractState,
) -> Result<McCvaOutput, McError> {
    cfg.validate()?;
    enum Vol {
        Heston {
            k: f64,
            theta: f64,
            nu: f64,
            v0: f64,
        },
        Sabr {
            alpha: f64,
            beta: f64,
            sigma0: f64,
        },
    }
    let vol = match model {
        VolModelParams::Heston(h) => Vol::Heston {
            k: h.k,
            theta: h.theta,
            nu: h.nu,
            v0: h.sigma2_0,
        },
        VolModelParams::Sabr(s) => Vol::Sabr {
            alpha: s.alpha,
            beta: s.beta,
            sigma0: s.sigma0,
        },
        VolModelParams::RBergomi(_) => return Err(McError::NotADiffusionModel),
    };

    let started = Instant::now();
    let n = cfg.n_steps;
    let dt = k.maturity / n as f64;
    let sqrt_dt = dt.sqrt();
    let (wa, wg, wb) = corr.w_coefficients();
    let eta_c = (1.0 - corr.eta * corr.eta).sqrt();
    let strike = k.kappa.exp();

    let stats = chunk_ranges(cfg.n_paths, cfg.chunk_size)
        .into_par_iter()
        .map(|(chunk, m)| {
            let mut rng = chunk_rng(cfg.seed, chunk);
            let mut stats = ChunkStats::default();
            for _ in 0..m {
                let mut x = k.x;
                let mut lambda = intensity.map(|c| c.lambda0).unwrap_or(0.0);
                let mut int_lambda = 0.5 * lambda * dt;
                let mut state = match vol {
                    Vol::Heston { v0, .. } => v0,
                    Vol::Sabr { sigma0, .. } => sigma0,
                };
                for i in 0..n {
                    let e1: f64 = StandardNormal.sample(&mut rng);
                    let e2: f64 = StandardNormal.sample(&mut rng);
                    let e3: f64 = StandardNormal.sample(&mut rng);
                    let db = sqrt_dt * (eta_c * e1 + corr.eta * e2);
                    let db2 = sqrt_dt * e2;
                    let dw = sqrt_dt * (wa * e1 + wg * e2 + wb * e3);

                    if state < 0.0 {
                        stats.truncations += 1;
                    }
                    let sp = state.max(0.0);
                    match vol {
                        Vol::Heston {
                            k: kk, theta, nu, ..
                        } => {
                            // sp is the truncated variance
                            x += -0.5 * sp * dt + sp.sqrt() * db;
                            state += kk * (theta - sp) * dt + nu * sp.sqrt() * db2;
                        }
                        Vol::Sabr { alpha, beta, .. } => {
                            // sp is the truncated vol; CEV damping on the price
                            let eff = sp * (-(1.0 - beta) * x).exp();
                            x += -0.5 * eff * eff * dt + eff * db;
                            state += alpha * sp * db2;
                        }
                    }
                    if let Some(c) = intensity {
                        if lambda < 0.0 {
                            stats.truncations += 1;
                        }
                        let lp = lambda.max(0.0);
                        lambda = lambda + c.q * (c.mu - lp) * dt + c.c * lp.sqrt() * dw;
                        let weight = if i + 1 == n { 0.5 } else { 1.0 };
                        int_lambda += weight * lambda.max(0.0) * dt;
                    }
                    stats.steps += 1;
                }
                let payoff = (x.exp() - strike).max(0.0);
                let cva_payoff = (1.0 - (-int_lambda).exp()) * payoff;
                if payoff.is_finite() && cva_payoff.is_finite() {
                    stats.cva.push(cva_payoff);
                    stats.risk_free.push(payoff);
                    stats.spot.push(x.exp());
                } else {
                    stats.rejected += 1;
                }
            }
            stats
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(ChunkStats::default(), |mut acc, s| {
            acc.merge(s);
            acc
        });

    finalize(cfg, stats, 1.0 - k.recovery, started)
}

/// A point of the `s -> E[N^0_s sqrt(lambda_s)]` Monte Carlo curve.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub s: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Output of the standalone CIR simulation.
#[derive(Debug, Clone)]
pub struct CirMcOutput {
    /// `E[e^{-int_0^T lambda}]`.
    pub survival: McResult,
    /// `E[N^0_s sqrt(lambda_s)]` on the simulation grid, with `N^0_s`
    /// evaluated through the affine closed form.
    pub sqrt_lambda_survival_curve: Vec<CurvePoint>,
    /// `E[sqrt(lambda_T)]` (doubles as the `E[sigma_T]` oracle when the
    /// parameters encode a Heston variance process).
    pub sqrt_terminal: McResult,
    pub truncated_fraction: f64,
}

/// Full-truncation Euler simulation of the CIR process alone, yielding the
/// survival factor and the `E[N^0_s sqrt(lambda_s)]` curve.
pub fn simulate_cir(cfg: &McConfig, c: &CirParams, maturity: f64) -> Result<CirMcOutput, McError> {
    cfg.validate()?;
    let started = Instant::now();
    let n = cfg.n_steps;
    let dt = maturity / n as f64;
    let sqrt_dt = dt.sqrt();
    let grid = time_grid(maturity, n);
    let ab = AffineBondCoefficients::new(c);
    let bond: Vec<(f64, f64)> = grid
        .iter()
        .map(|&s| (ab.phi(maturity - s), ab.psi(maturity - s)))
        .collect();

    struct CirStats {
        survival: Acc,
        sqrt_terminal: Acc,
        curve: Vec<Acc>,
        truncations: u64,
        steps: u64,
    }

    let stats = chunk_ranges(cfg.n_paths, cfg.chunk_size)
        .into_par_iter()
        .map(|(chunk, m)| {
            let mut rng = chunk_rng(cfg.seed, chunk);
            let mut stats = CirStats {
                survival: Acc::default(),
                sqrt_terminal: Acc::default(),
                curve: vec![Acc::default(); n],
                truncations: 0,
                steps: 0,
            };
            for _ in 0..m {
                let mut lambda = c.lambda0;
                // running trapezoid weight sum, in units of dt
                let mut running = 0.5 * lambda;
                let mut prefix = 0.0;
                for (&(phi, psi), acc) in bond.iter().zip(&mut stats.curve) {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    if lambda < 0.0 {
                        stats.truncations += 1;
                    }
                    let lp = lambda.max(0.0);
                    lambda = lambda + c.q * (c.mu - lp) * dt + c.c * lp.sqrt() * g * sqrt_dt;
                    let v = lambda.max(0.0);
                    // running trapezoid of lambda+ up to this grid time
                    prefix = dt * (running + 0.5 * v);
                    running += v;
                    acc.push((-prefix + phi * v + psi).exp() * v.sqrt());
                    stats.steps += 1;
                }
                stats.survival.push((-prefix).exp());
                stats.sqrt_terminal.push(lambda.max(0.0).sqrt());
            }
            stats
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|mut acc, s| {
            acc.survival.merge(&s.survival);
            acc.sqrt_terminal.merge(&s.sqrt_terminal);
            for (a, b) in acc.curve.iter_mut().zip(&s.curve) {
                a.merge(b);
            }
            acc.truncations += s.truncations;
            acc.steps += s.steps;
            acc
        })
        .expect("at least one chunk");

    let wall = started.elapsed().as_secs_f64();
    let z = cfg.z_level();
    Ok(CirMcOutput {
        survival: stats.survival.result(1.0, z, wall),
        sqrt_lambda_survival_curve: grid
            .iter()
            .zip(&stats.curve)
            .map(|(&s, acc)| CurvePoint {
                s,
                estimate: acc.mean(),
                std_error: acc.std_error(),
            })
            .collect(),
        sqrt_terminal: stats.sqrt_terminal.result(1.0, z, wall),
        truncated_fraction: stats.truncations as f64 / stats.steps.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr0() -> CorrelationStructure {
        CorrelationStructure::new(-0.2, 0.0, 0.0).unwrap()
    }

    #[test]
    fn covariance_brownian_blocks() {
        let grid = time_grid(1.0, 4);
        let cov = joint_gaussian_covariance(0.5, &corr0(), &grid);
        // B-B block is the min kernel
        assert_eq!(cov[(0, 1)], 0.25);
        assert_eq!(cov[(3, 3)], 1.0);
        // H = 1/2 makes Z Brownian too
        assert!((cov[(4, 5)] - 0.25).abs() < 1e-12);
        // zero rho/gamma: B-W block vanishes
        assert_eq!(cov[(0, 8)], 0.0);
        // eta couples B and Z: Cov(B_a, Z_b) = eta min for H = 1/2
        assert!((cov[(0, 4)] + 0.2 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn covariance_z_diagonal_is_power_law() {
        let grid = time_grid(0.25, 8);
        let cov = joint_gaussian_covariance(0.1, &corr0(), &grid);
        for (i, &t) in grid.iter().enumerate() {
            let want = t.powf(0.2) / 0.2;
            assert!((cov[(8 + i, 8 + i)] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn covariance_factorizes_for_benchmark_grid() {
        let grid = time_grid(0.25, 50);
        for &(rho, gamma) in &[(-0.8, -0.3), (0.8, 0.3), (0.0, 0.0), (-0.8, 0.3)] {
            let corr = CorrelationStructure::new(-0.2, rho, gamma).unwrap();
            let cov = joint_gaussian_covariance(0.1, &corr, &grid);
            assert!(
                cholesky_with_jitter(&cov).is_ok(),
                "rho={rho}, gamma={gamma}"
            );
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = McConfig {
            n_paths: 2000,
            n_steps: 20,
            seed: 7,
            chunk_size: 128,
            ci_level: 0.95,
        };
        let r = RBergomiParams::new(0.08, 0.1, 0.1).unwrap();
        let c = CirParams::new(0.035, 0.35, 0.035, 0.1).unwrap();
        let k = ContractState::from_prices(100.0, 100.0, 0.0, 0.25, 0.0).unwrap();
        let cov = joint_gaussian_covariance(r.hurst, &corr0(), &time_grid(0.25, 20));
        let run = || {
            simulate_paths(&cfg, &cov, &r, Some(&c), &k)
                .unwrap()
                .cva
                .estimate
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = single.install(run);
        let b = quad.install(run);
        let c2 = run();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), c2.to_bits());
    }

    #[test]
    fn chunking_is_exhaustive() {
        let ranges = chunk_ranges(10_000, 4096);
        assert_eq!(ranges.len(), 3);
        assert_eq!(ranges[2], (2, 10_000 - 2 * 4096));
        assert_eq!(ranges.iter().map(|r| r.1).sum::<usize>(), 10_000);
    }

    #[test]
    fn config_validation() {
        assert!(McConfig {
            n_paths: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(McConfig {
            n_steps: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(McConfig {
            ci_level: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(McConfig::default().validate().is_ok());
    }
}
