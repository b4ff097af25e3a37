use clap::{Parser, Subcommand};
use stablelab::config::ExperimentConfig;
use stablelab::scenarios::{exit_code, list_scenarios, run_scenario};
use stablelab::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Verification scenarios for stable-driven SDEs with singular drift.
#[derive(Parser)]
#[command(name = "stablelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario named in a config file.
    Run {
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory (default: reports/<timestamp>).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides the working grid size N.
        #[arg(long)]
        grid_n: Option<usize>,
        /// Halve grids and path counts.
        #[arg(long)]
        quick: bool,
    },
    /// List scenarios with what each one checks.
    ListScenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            print!("{}", list_scenarios());
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, out_dir, grid_n, quick } => {
            let result = ExperimentConfig::load(&config).and_then(|mut cfg| {
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                if let Some(n) = grid_n {
                    cfg.grid.n = n;
                    cfg.grid.n_fine = cfg.grid.n_fine.max(n);
                }
                cfg.quick |= quick;
                let dir = out_dir.unwrap_or_else(|| {
                    PathBuf::from("reports").join(chrono::Local::now().format("%Y%m%dT%H%M%S").to_string())
                });
                let outcome = run_scenario(&cfg, Some(&dir))?;
                Ok((outcome, dir))
            });
            let (code_input, dir) = match result {
                Ok((o, d)) => (Ok(o), Some(d)),
                Err(e) => (Err(e), None),
            };
            let code = exit_code(&code_input);
            match &code_input {
                Ok(o) => {
                    for r in &o.summary.reports {
                        println!("{:<40} {:?}", r.name, r.verdict);
                        for f in &r.failures {
                            println!("    {f}");
                        }
                    }
                    if let Some(d) = dir {
                        println!("reports written to {}", d.display());
                    }
                }
                Err(Error::Admissibility { hypothesis, detail }) => {
                    eprintln!("admissibility violation: {hypothesis}: {detail}");
                }
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(code as u8)
        }
    }
}
