use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sepinn_cli::config::RunConfig;
use sepinn_cli::run::{self, CliError, EvalOptions};

#[derive(Parser)]
#[command(name = "sepinn", version, about = "Singularity-enriched PINN solver")]
struct Cli {
    /// Worker threads; 1 makes runs bitwise reproducible.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Run directory (overrides the config and the output root).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Override the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Re-run a previous manifest and compare the summaries.
        #[arg(long, conflicts_with = "config")]
        replay: Option<PathBuf>,
        /// Largest relative difference tolerated by --replay.
        #[arg(long, default_value_t = 1e-10)]
        replay_tol: f64,
    },
    /// Error report (and optional field grid) for a saved checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// z of the slice for 3D problems.
        #[arg(long)]
        slice: Option<f64>,
        /// Write a CSV grid of the solution.
        #[arg(long)]
        grid: bool,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Error against the number of series terms.
    SweepTruncation {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
        levels: Vec<usize>,
        /// Use exact coefficients instead of training per level.
        #[arg(long)]
        analytic: bool,
    },
    /// Train the enriched method and plain PINN on identical settings.
    CompareBaseline {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Two smallest eigenvalues of an eigenvalue problem.
    Eigen {
        #[command(flatten)]
        run: RunArgs,
    },
}

fn load(run: &RunArgs) -> Result<(RunConfig, PathBuf), CliError> {
    let path = run.config.as_ref().ok_or_else(|| sepinn::Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(o) = &run.output {
        cfg.output_dir = Some(o.clone());
    }
    let dir = run::run_dir(&cfg);
    Ok((cfg, dir))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(sepinn::Error::Config("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| sepinn::Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Train { run: args, replay, replay_tol } => {
            if let Some(m) = replay {
                let manifest = run::RunManifest::load(&m)?;
                let dir = args.output.clone().unwrap_or_else(|| run::run_dir(&manifest.config).join("replay"));
                let (old, new) = run::replay(&m, &dir)?;
                let d = old.max_rel_diff(&new);
                println!("{}", new.line());
                println!("replay max relative difference {d:.3e} (tolerance {replay_tol:e})");
                if !(d <= replay_tol) {
                    return Err(CliError::Replay(format!("replay differs by {d:e}")));
                }
            } else {
                let (cfg, dir) = load(&args)?;
                let out = run::train(&cfg, &dir)?;
                println!("{}", out.summary.line());
                println!("manifest {}", out.manifest.display());
            }
        }
        Command::Eigen { run: args } => {
            let (cfg, dir) = load(&args)?;
            if cfg.method != sepinn_cli::config::Method::Eigen {
                return Err(sepinn_cli::config::ConfigError::Field {
                    field: "method",
                    message: "the eigen command needs method 'eigen'".into(),
                }
                .into());
            }
            let out = run::train(&cfg, &dir)?;
            println!("{}", out.summary.line());
            println!("manifest {}", out.manifest.display());
        }
        Command::Evaluate { checkpoint, problem, n, seed, slice, grid, resolution, output } => {
            let spec = sepinn::problems::by_name(&problem)?;
            let out_dir = output.unwrap_or_else(|| checkpoint.parent().map(PathBuf::from).unwrap_or_default());
            let rep = run::evaluate(&checkpoint, &spec, &EvalOptions { n, seed, slice, resolution, out_dir, grid })?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
        }
        Command::SweepTruncation { run: args, levels, analytic } => {
            let (cfg, dir) = load(&args)?;
            let rows = run::sweep_truncation(&cfg, &levels, analytic, &dir)?;
            println!("{:>4} {:>12} {:>12} {:>12} {:>9}", "N", "e", "e_u", "e_S", "seconds");
            for r in rows {
                println!("{:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>9.2}", r.n, r.e, r.e_u, r.e_s, r.seconds);
            }
        }
        Command::CompareBaseline { run: args } => {
            let (cfg, dir) = load(&args)?;
            let (a, b) = run::compare_baseline(&cfg, &dir)?;
            println!("{}", a.summary.line());
            println!("{}", b.summary.line());
            if let (Some(ea), Some(eb)) = (a.summary.e_u, b.summary.e_u) {
                println!("error ratio sepinn / pinn = {:.3}", ea / eb);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
