use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mimo_power_core::centralized::{solve_centralized, write_allocation_csv};
use mimo_power_core::dual::{run_dual_decomposition, write_trace_csv, DualOptions, DualStatus, StepSize};
use mimo_power_core::experiment::{run_experiment, solve_basic_distributed, ExperimentConfig, ExperimentMode};
use mimo_power_core::io::{read_scenario, write_scenario, write_tensor_csv};
use mimo_power_core::montecarlo::{simulate_sinr_terms, write_report_csv};
use mimo_power_core::network::{drop_seed, generate_drop};
use mimo_power_core::system::{qos_to_sinr_target, CellArray, EffectiveGains, PowerAllocation, Precoding};
use mimo_power_core::{Error, Result};

/// Downlink power minimization for multi-cell Massive MIMO.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Mr,
    Zf,
}

impl From<Scheme> for Precoding {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Mr => Precoding::Mr,
            Scheme::Zf => Precoding::Zf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMode {
    Centralized,
    Basic,
    Dual,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpMode {
    ConvergenceHistogram,
    QosCdf,
    SignalingTable,
    ValidateSinr,
}

impl From<ExpMode> for ExperimentMode {
    fn from(m: ExpMode) -> Self {
        match m {
            ExpMode::ConvergenceHistogram => ExperimentMode::ConvergenceHistogram,
            ExpMode::QosCdf => ExperimentMode::QosCdf,
            ExpMode::SignalingTable => ExperimentMode::SignalingTable,
            ExpMode::ValidateSinr => ExperimentMode::ValidateSinr,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw one network realization and write it as a scenario file.
    Generate {
        /// Flat key-value config; defaults apply to absent keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Drop index under the master seed.
        #[arg(long, default_value_t = 0)]
        drop: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write beta as `l,i,k,value` CSV.
        #[arg(long)]
        beta_csv: Option<PathBuf>,
        /// Also write the estimate variances as `l,i,k,value` CSV.
        #[arg(long)]
        gamma_csv: Option<PathBuf>,
    },
    /// Compute a power allocation for a scenario file.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: SolveMode,
        #[arg(long, value_enum, default_value = "zf")]
        precoding: Scheme,
        /// Allocation CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-iteration trace CSV (dual mode).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        diminishing: bool,
        #[arg(long, default_value_t = 400)]
        max_iter: usize,
    },
    /// Run a Monte Carlo experiment over seeded drops.
    Experiment {
        #[arg(long, value_enum)]
        mode: ExpMode,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// Overrides the number of drops in the config.
        #[arg(long)]
        drops: Option<usize>,
    },
    /// Compare the closed-form SINR terms of a scenario with simulation.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "zf")]
        precoding: Scheme,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_text(&std::fs::read_to_string(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            config,
            drop,
            out,
            beta_csv,
            gamma_csv,
        } => {
            let cfg = load_config(config.as_deref())?;
            let d = generate_drop(&cfg.drop, drop_seed(cfg.drop.master_seed, drop))?;
            write_scenario(create(&out)?, &d.scenario)?;
            if let Some(p) = beta_csv {
                write_tensor_csv(create(&p)?, &d.scenario.beta)?;
            }
            if let Some(p) = gamma_csv {
                let gains = EffectiveGains::new(&d.scenario, cfg.precoding);
                write_tensor_csv(create(&p)?, &gains.gamma)?;
            }
            println!("wrote {}", out.display());
        }
        Command::Solve {
            scenario,
            mode,
            precoding,
            out,
            trace,
            step,
            diminishing,
            max_iter,
        } => {
            let s = read_scenario(BufReader::new(File::open(&scenario)?))?;
            let gains = EffectiveGains::new(&s, precoding.into());
            let targets = qos_to_sinr_target(&s)?;
            let allocation = match mode {
                SolveMode::Centralized => {
                    let sol = solve_centralized(&s, &gains, &targets)?;
                    println!("status: {:?}", sol.status);
                    sol.is_feasible().then_some(sol.allocation)
                }
                SolveMode::Basic => {
                    let sol = solve_basic_distributed(&s, &gains, &targets)?;
                    println!("status: {:?}", sol.status);
                    (sol.total_power.is_finite()).then_some(sol.allocation)
                }
                SolveMode::Dual => {
                    let opts = DualOptions {
                        step: if diminishing {
                            StepSize::Diminishing(step)
                        } else {
                            StepSize::Constant(step)
                        },
                        max_iter,
                        ..DualOptions::default()
                    };
                    let outcome = run_dual_decomposition(&s, &gains, &targets, &opts)?;
                    let label = match outcome.status {
                        DualStatus::Converged => "converged",
                        DualStatus::IterLimit => "iteration cap reached, best iterate returned",
                    };
                    println!("status: {label} after {} iterations", outcome.trace.len());
                    if let Some(p) = trace {
                        write_trace_csv(create(&p)?, &outcome.trace)?;
                    }
                    Some(outcome.allocation)
                }
            };
            if let Some(a) = allocation {
                println!("total power: {:.6e} W", a.total());
                if let Some(p) = out {
                    write_allocation_csv(create(&p)?, &s, &gains, &a)?;
                }
            }
        }
        Command::Experiment {
            mode,
            config,
            out_dir,
            drops,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(n) = drops {
                cfg.drop.drops = n;
            }
            let report = run_experiment(&cfg, mode.into(), &out_dir)?;
            print!("{report}");
        }
        Command::Validate {
            scenario,
            precoding,
            draws,
            seed,
            out,
        } => {
            let s = read_scenario(BufReader::new(File::open(&scenario)?))?;
            let gains = EffectiveGains::new(&s, precoding.into());
            let rho = PowerAllocation {
                rho: CellArray::from_fn(s.cells(), s.users(), |l, _| s.p_max[l] / s.users() as f64),
            };
            let rep = simulate_sinr_terms(&s, &gains, &rho, draws, seed)?;
            let se_err = rep.se.iter().map(|c| c.relative_error()).fold(0.0, f64::max);
            println!("terms: {}, max |z|: {:.2}", rep.terms.len(), rep.max_abs_z());
            println!("max SE relative error: {se_err:.2e}");
            if rep.singular_draws > 0 {
                println!("redrawn singular realizations: {}", rep.singular_draws);
            }
            if let Some(p) = out {
                write_report_csv(create(&p)?, &rep.terms)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Io(_)) {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
