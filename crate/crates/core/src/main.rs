use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use opinion_stackelberg::oracle::{
    dp_campaign, dp_campaign_instances, qp_campaign, variant_adjudicator,
};
use opinion_stackelberg::parallel::Execution;
use opinion_stackelberg::scenario::{
    run, run_many, sweep_configs, validate, RunError, RunOptions, ScenarioConfig,
};

#[derive(Parser)]
#[command(
    version,
    about = "Stackelberg opinion steering on Friedkin-Johnsen networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (TOML config or a previous manifest.json) and write its artifacts.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Accept the last iterate when a fixed-point loop hits its cap.
        #[arg(long)]
        best_effort: bool,
        /// Seed for uniformly drawn initial opinions.
        #[arg(long)]
        seed: Option<u64>,
        /// Run one scenario per value, e.g. `game.epsilon=0.5,1,2`.
        #[arg(long, value_name = "KEY=V1,V2,..")]
        sweep: Option<String>,
    },
    /// Check a scenario's static invariants and print one line per check.
    Validate { config: PathBuf },
    /// Certify the solvers against brute-force grid search.
    Oracle {
        #[arg(value_enum)]
        subcase: OracleCase,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        count: Option<usize>,
        /// Grid resolution for the QP oracle.
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
        /// Enumerated grid points per DP instance.
        #[arg(long, default_value_t = 2e6)]
        budget: f64,
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleCase {
    Qp,
    Dp,
    Adjudicate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            output_dir,
            best_effort,
            seed,
            sweep,
        } => {
            let options = RunOptions {
                output_dir,
                best_effort,
                seed,
            };
            let result = simulate(&config, &options, sweep.as_deref());
            exit_with(result)
        }
        Command::Validate { config } => match ScenarioConfig::load(&config) {
            Ok(config) => {
                let report = validate(&config);
                print!("{report}");
                if report.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => exit_with(Err(e.into())),
        },
        Command::Oracle {
            subcase,
            seed,
            count,
            resolution,
            budget,
            sequential,
        } => {
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            match oracle(subcase, seed, count, resolution, budget, exec) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    error!("{e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

fn simulate(
    config: &std::path::Path,
    options: &RunOptions,
    sweep: Option<&str>,
) -> Result<(), RunError> {
    let mut base = ScenarioConfig::load(config)?;
    match sweep {
        None => {
            let artifacts = run(&base, options)?;
            println!("wrote {}", artifacts.paths.dir.display());
        }
        Some(spec) => {
            if let Some(dir) = &options.output_dir {
                base.output_dir = dir.clone();
            }
            let configs =
                sweep_configs(&base, spec).map_err(|e| RunError::Validation(e.to_string()))?;
            let mut first_error = None;
            for result in run_many(&configs, options, Execution::Parallel) {
                match result {
                    Ok(artifacts) => println!("wrote {}", artifacts.paths.dir.display()),
                    Err(e) => {
                        error!("{e}");
                        first_error.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_error {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn exit_with(result: Result<(), RunError>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn oracle(
    subcase: OracleCase,
    seed: u64,
    count: Option<usize>,
    resolution: f64,
    budget: f64,
    exec: Execution,
) -> Result<(), opinion_stackelberg::oracle::OracleError> {
    match subcase {
        OracleCase::Qp => {
            for (i, c) in qp_campaign(seed, count.unwrap_or(50), resolution, exec)?
                .iter()
                .enumerate()
            {
                println!(
                    "instance={i} dim={} solver={:.16e} oracle={:.16e} gap={:.3e} bound={:.3e} kkt={:.3e}",
                    c.dim,
                    c.solver_objective,
                    c.oracle_objective,
                    c.gap(),
                    c.gap_bound,
                    c.kkt_residual
                );
            }
        }
        OracleCase::Dp => {
            for (i, c) in dp_campaign(seed, count.unwrap_or(20), budget, exec)?
                .iter()
                .enumerate()
            {
                println!(
                    "instance={i} n_regular={} n_stubborn={} horizon={} closed_loop={:.16e} oracle={:.16e} gap={:.3e} bound={:.3e}",
                    c.n_regular,
                    c.n_stubborn,
                    c.horizon,
                    c.closed_loop_cost,
                    c.oracle_cost,
                    c.gap(),
                    c.gap_bound
                );
            }
        }
        OracleCase::Adjudicate => {
            let instances = dp_campaign_instances(seed, count.unwrap_or(20), budget);
            print!("{}", variant_adjudicator(&instances, exec)?.to_text());
        }
    }
    Ok(())
}
