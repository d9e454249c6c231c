use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cebu_cli::output::{collocation_points, summary_line, write_reference_csv, write_report};
use cebu_cli::sweep::{run_sweep, Axis};
use cebu_cli::verify::{Verifier, VerifyOptions};
use cebu_core::beam::{generate_data, BeamConfig};
use cebu_core::experiment::{run_experiment, Method, ProblemKind, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "cebu",
    version,
    about = "Cross-entropy-based Bayesian updating with and without subspace reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configuration for the configured number of repeats.
    Run(CommonArgs),
    /// Run the cartesian product of `--grid` values.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Swept key and values, e.g. `d=5,25,50,100`. Repeatable.
        #[arg(long, value_name = "KEY=V1,V2,...", required = true)]
        grid: Vec<Axis>,
    },
    /// Write the closed-form posterior and evidence of a configuration.
    Oracle(CommonArgs),
    /// Run the acceptance suite.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Run only these criteria.
        #[arg(long, value_name = "ID", value_delimiter = ',')]
        only: Vec<usize>,
    },
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "K")]
    jobs: Option<usize>,
    #[arg(long, value_parser = ["cebu", "cebured"])]
    method: Option<String>,
    /// Override one configuration key. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl CommonArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                RunConfig::parse_str(&text)?
            }
            None => RunConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set '{kv}' is not KEY=VALUE"))?;
            cfg.set(k, v)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(m) = &self.method {
            cfg.method = m.parse::<Method>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn init_threads(&self) -> Result<()> {
        if let Some(k) = self.jobs {
            if k == 0 {
                bail!("--jobs must be positive");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()?;
        }
        Ok(())
    }
}

enum Outcome {
    Success,
    AcceptanceFailure,
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Run(args) => {
            args.init_threads()?;
            let cfg = args.config()?;
            match run_experiment(&cfg) {
                Ok(report) => {
                    write_report(&args.out, &report)?;
                    println!("{}", summary_line(&report));
                    Ok(Outcome::Success)
                }
                Err(failure) => {
                    if let Some(partial) = &failure.partial {
                        write_report(&args.out.join("partial"), partial)?;
                    }
                    Err(failure.into())
                }
            }
        }
        Command::Sweep { common, grid } => {
            common.init_threads()?;
            let cfg = common.config()?;
            for report in run_sweep(&cfg, &grid, &common.out)? {
                println!("{}", summary_line(&report));
            }
            Ok(Outcome::Success)
        }
        Command::Oracle(args) => {
            args.init_threads()?;
            let cfg = args.config()?;
            write_oracle(&args.out, &cfg)?;
            Ok(Outcome::Success)
        }
        Command::Verify { common, only } => {
            common.init_threads()?;
            let cfg = common.config()?;
            let verifier = Verifier::new(VerifyOptions {
                seed: cfg.seed,
                repeats: cfg.repeats,
            });
            let ids: Vec<usize> = if only.is_empty() {
                Verifier::criterion_ids().collect()
            } else {
                only
            };
            let mut outcomes = Vec::new();
            for id in ids {
                let o = verifier.run(id)?;
                println!("{}", o.line());
                outcomes.push(o);
            }
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(
                common.out.join("verify.json"),
                serde_json::to_string_pretty(&outcomes)?,
            )?;
            let passed = outcomes.iter().filter(|o| o.passed).count();
            println!("{passed}/{} criteria passed", outcomes.len());
            Ok(if passed == outcomes.len() {
                Outcome::Success
            } else {
                Outcome::AcceptanceFailure
            })
        }
    }
}

fn write_oracle(out: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let reference = cfg.build_problem()?.reference()?;
    write_reference_csv(
        &out.join("reference.csv"),
        &collocation_points(cfg)?,
        &reference,
    )?;
    std::fs::write(
        out.join("oracle.json"),
        serde_json::to_string_pretty(&reference)?,
    )?;
    std::fs::write(out.join("config.txt"), cfg.to_kv_string())?;
    if cfg.problem == ProblemKind::Beam {
        let beam = BeamConfig {
            d: cfg.d,
            ..cfg.beam.clone()
        };
        std::fs::write(
            out.join("data.csv"),
            generate_data(&beam, beam.data_seed)?.to_csv(),
        )?;
    }
    println!("ln Z = {:.16e}", reference.log_evidence);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::AcceptanceFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
