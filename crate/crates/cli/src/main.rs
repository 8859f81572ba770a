use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use retrace_cli::experiment::score_files;
use retrace_cli::{run_config_file, Mode, RunOptions};

#[derive(Parser)]
#[command(name = "retrace", version, about = "Run return-based off-policy experiments from a config file")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Added to every configured seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    /// Worker threads for grid cells (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Run the analysis battery on the config's MDP and policies.
    Verify { config: PathBuf },
    /// Inter-algorithm score distribution of a `game,algorithm,score` CSV.
    /// The per-game normalised scores go next to the output as `<stem>_z.csv`.
    Scores { input: PathBuf, output: PathBuf },
}

fn z_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("scores");
    output.with_file_name(format!("{stem}_z.csv"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut opts = RunOptions {
        seed_offset: cli.seed_offset,
        jobs: cli.jobs,
        out_dir: cli.out,
        mode: None,
    };
    let config = match cli.command {
        Command::Run { config } => config,
        Command::Verify { config } => {
            opts.mode = Some(Mode::Verify);
            config
        }
        Command::Scores { input, output } => {
            return match score_files(&input) {
                Ok((f, z)) => {
                    for (path, body) in [(output.clone(), f), (z_path(&output), z)] {
                        if let Err(e) = std::fs::write(&path, body) {
                            eprintln!("error: cannot write {}: {e}", path.display());
                            return ExitCode::from(1);
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run_config_file(&config, &opts) {
        Ok(summary) => {
            let failed = summary.failed_cells();
            eprintln!(
                "{} cells, {failed} failed; output in {}",
                summary.outcomes.len(),
                summary.out_dir.display()
            );
            ExitCode::from(summary.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
