use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use consensus_lab::cli::{
    cmd_graphgen, cmd_run, cmd_sweep, cmd_verify, CliError, ExperimentConfig, SweepConfig,
};

#[derive(Parser)]
#[command(
    name = "consensus-lab",
    about = "Consensus and average-consensus experiments over dynamic graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's max_rounds.
    #[arg(long)]
    rounds: Option<u64>,
    /// Override the config's epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the config's seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output path.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace CSV.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also run the matrix path and require agreement within 1e-12.
        #[arg(long)]
        check_equivalence: bool,
    },
    /// Run the randomized verification suites.
    Verify {
        /// Largest system size used in random cases.
        #[arg(long, default_value_t = 12)]
        n_max: usize,
        /// Cases per suite.
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run a sweep config and write the report CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print a model's round-t graph in the schedule text format.
    Graphgen {
        #[command(flatten)]
        config: ConfigArgs,
        /// Round to generate.
        #[arg(long, default_value_t = 1)]
        round: u64,
    },
}

fn read_config_text(path: &Path) -> Result<(String, PathBuf), CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((text, base_dir))
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::OutputWrite {
        path: path.to_path_buf(),
        source,
    })
}

fn apply_overrides(config: &mut ExperimentConfig, args: &ConfigArgs) {
    if let Some(rounds) = args.rounds {
        config.max_rounds = rounds;
    }
    if let Some(epsilon) = args.epsilon {
        config.epsilon = epsilon;
    }
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if let Some(output) = &args.output {
        config.output = output.clone();
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run {
            config: args,
            check_equivalence,
        } => {
            let (text, base_dir) = read_config_text(&args.config)?;
            let mut config = ExperimentConfig::from_json(&text)?;
            apply_overrides(&mut config, &args);
            let outcome = cmd_run(&config, &base_dir, check_equivalence)?;
            write_output(&config.output, &outcome.trace_csv)?;
            println!("{}", outcome.report_line);
            if outcome.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "did not converge within {} rounds (epsilon {})",
                    config.max_rounds, config.epsilon
                );
                Ok(ExitCode::from(3))
            }
        }
        Command::Verify { n_max, cases, seed } => {
            let outcome = cmd_verify(n_max, cases, seed)?;
            print!("{}", outcome.summary());
            if outcome.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Sweep { config: args } => {
            let (text, base_dir) = read_config_text(&args.config)?;
            let mut config = SweepConfig::from_json(&text)?;
            if let Some(rounds) = args.rounds {
                config.max_rounds = rounds;
            }
            if let Some(epsilon) = args.epsilon {
                config.epsilon = epsilon;
            }
            if let Some(seed) = args.seed {
                config.seeds = vec![seed];
            }
            if let Some(output) = &args.output {
                config.output = output.clone();
            }
            let csv = cmd_sweep(&config, &base_dir)?;
            write_output(&config.output, &csv)?;
            println!("wrote {} ({} cells)", config.output.display(), csv.lines().count() - 1);
            Ok(ExitCode::SUCCESS)
        }
        Command::Graphgen {
            config: args,
            round,
        } => {
            let (text, base_dir) = read_config_text(&args.config)?;
            let mut config = ExperimentConfig::from_json(&text)?;
            apply_overrides(&mut config, &args);
            let graph_text = cmd_graphgen(&config, &base_dir, round)?;
            if let Some(output) = &args.output {
                write_output(output, &graph_text)?;
            } else {
                print!("{graph_text}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
