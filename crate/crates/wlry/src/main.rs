use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use wlry::csv::{read_ledger, verify_ledger};
use wlry::{load_config, output_dir, run_experiment, Snapshot};

#[derive(Parser)]
#[command(name = "wlry", version, about = "Weighted energy experiments on a periodic box")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiment configurations.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Re-check the slacks of a ledger file.
    Verify { ledger: PathBuf },
    /// Describe a snapshot file.
    Info { snapshot: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { configs } => {
            let mut ok = true;
            for path in configs {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
                let cfg = match load_config(&path) {
                    Ok(c) => c,
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        ok = false;
                        continue;
                    }
                };
                let dir = output_dir(&cfg, &stem);
                match run_experiment(&cfg, &dir) {
                    Ok(r) => {
                        let failing = r.summary.failing();
                        if failing.is_empty() {
                            println!("{}: pass ({})", path.display(), r.out_dir.display());
                        } else {
                            println!("{}: FAIL [{}] ({})", path.display(), failing.join(", "), r.out_dir.display());
                            ok = false;
                        }
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        ok = false;
                    }
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Verify { ledger } => {
            let text = match std::fs::read_to_string(&ledger) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", ledger.display());
                    return ExitCode::FAILURE;
                }
            };
            match read_ledger(&text) {
                Ok(entries) => {
                    let v = verify_ledger(&entries);
                    println!(
                        "{} rows, slack_A failures {}, slack_B failures {}, recompute gap {:.3e}",
                        v.rows,
                        v.failing_a.len(),
                        v.failing_b.len(),
                        v.recompute_gap
                    );
                    if v.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("{}: {e}", ledger.display());
                    ExitCode::FAILURE
                }
            }
        }
        Command::Info { snapshot } => match Snapshot::read(&snapshot) {
            Ok(s) => {
                println!("{}", s.describe());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{}: {e}", snapshot.display());
                ExitCode::FAILURE
            }
        },
    }
}
