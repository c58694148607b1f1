use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use cva_rough::cli_report::{
    hurst_sweep, load_config, run_grid, write_grid_outputs, write_sweep_outputs, RunConfig, RunMeta,
};
use cva_rough::cva_engine::{ContractState, CorrelationStructure};
use cva_rough::mc_bench::{
    simulate_diffusion_cva, simulate_paths, time_grid, JointCovarianceBuilder,
};
use cva_rough::vol_models::VolModelParams;

/// CVA engine for vulnerable European calls under Heston, SABR and rough
/// Bergomi volatility with a correlated CIR default intensity.
#[derive(Parser)]
#[command(name = "cva-rough", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the (maturity, rho, gamma) grid: approximation vs Monte Carlo.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for grid_T<tau>.csv and run_meta.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the Monte Carlo seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Hurst sensitivity sweep (rough Bergomi only, gamma = 0).
    Hurst {
        #[arg(long)]
        config: PathBuf,
        /// Hurst grid as start:end:step, e.g. 0.05:0.45:0.05.
        #[arg(long, value_name = "A:B:STEP")]
        h_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Risk-free Monte Carlo call price only (default risk switched off).
    Price {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_h_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:end:step, got '{text}'"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| format!("bad number '{p}': {e}"))
        })
        .collect::<Result<_, _>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start {
        return Err(format!("need start <= end and step > 0, got '{text}'"));
    }
    let mut grid = Vec::new();
    let mut i = 0u32;
    loop {
        let h = start + f64::from(i) * step;
        if h > end + 1e-12 {
            break;
        }
        grid.push(h);
        i += 1;
    }
    Ok(grid)
}

fn with_pool<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

fn load(config: &std::path::Path, seed: Option<u64>) -> Result<RunConfig, String> {
    let mut cfg = load_config(config).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        cfg.mc.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn report_skipped(skipped: &[cva_rough::cli_report::SkippedPoint]) -> ExitCode {
    if skipped.is_empty() {
        return ExitCode::SUCCESS;
    }
    for s in skipped {
        eprintln!(
            "skipped (T={}, rho={}, gamma={}): {}",
            s.maturity, s.rho, s.gamma, s.reason
        );
    }
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => {
            let cfg = match load(&config, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let dir = out_dir(&cfg, out);
            let started = Instant::now();
            let table = with_pool(threads, || run_grid(&cfg));
            let meta = RunMeta::new(cfg.mc.seed, started, &table);
            match write_grid_outputs(&dir, &table, &meta) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                    report_skipped(&table.skipped)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Hurst {
            config,
            h_grid,
            out,
            threads,
            seed,
        } => {
            let cfg = match load(&config, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let grid = match parse_h_grid(&h_grid) {
                Ok(g) => g,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let dir = out_dir(&cfg, out);
            let started = Instant::now();
            let table = match with_pool(threads, || hurst_sweep(&cfg, &grid)) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let meta = RunMeta::new(cfg.mc.seed, started, &table);
            match write_sweep_outputs(&dir, &table, &meta) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                    report_skipped(&table.skipped)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Price {
            config,
            threads,
            seed,
        } => {
            let cfg = match load(&config, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            if cfg.mc.n_paths == 0 {
                eprintln!("error: price requires mc.n_paths > 0");
                return ExitCode::from(1);
            }
            let result = with_pool(threads, || -> Result<(), String> {
                for &maturity in &cfg.maturities {
                    let contract =
                        ContractState::from_prices(cfg.spot, cfg.strike, 0.0, maturity, 0.0)
                            .map_err(|e| e.to_string())?;
                    let corr =
                        CorrelationStructure::new(cfg.eta, 0.0, 0.0).map_err(|e| e.to_string())?;
                    let out = match &cfg.model {
                        VolModelParams::RBergomi(r) => {
                            let grid = time_grid(maturity, cfg.mc.n_steps);
                            let cov = JointCovarianceBuilder::new(r.hurst, &grid).assemble(&corr);
                            simulate_paths(&cfg.mc, &cov, r, None, &contract)
                                .map_err(|e| e.to_string())?
                        }
                        model => simulate_diffusion_cva(&cfg.mc, model, None, &corr, &contract)
                            .map_err(|e| e.to_string())?,
                    };
                    let p = out.risk_free_price;
                    println!(
                        "T={maturity}: price = {:.6} +- {:.6} ({}% CI, {} paths, {:.2}s)",
                        p.estimate,
                        p.ci_half_width,
                        100.0 * cfg.mc.ci_level,
                        p.n_paths,
                        p.wall_time,
                    );
                }
                Ok(())
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
