use clap::{Parser, Subcommand};
use memsim::harness::config::{load_config, ExperimentConfig};
use memsim::harness::run::{run_experiment, HarnessError};
use memsim::harness::sweep::{cells, sweep};
use memsim::harness::validate::validate_all;
use memsim::model::{LearningType, MemoryModel};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "memsim", version, about = "Delivery society simulator with agent memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a learning x memory x seed matrix.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        learnings: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        memories: Vec<String>,
        /// Comma list or inclusive range such as `1..10`.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the oracle self-checks.
    Validate,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range {s}"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range {s}"))?;
        if a > b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| format!("bad seed {x}"))).collect()
}

fn parse_list<T>(items: &[String], parse: fn(&str) -> Option<T>, what: &str) -> Result<Vec<T>, String> {
    items.iter().map(|s| parse(s.trim()).ok_or_else(|| format!("unknown {what} {s}"))).collect()
}

fn config_error(msg: String) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    load_config(path).map_err(|e| fail(e.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out, threads } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            match run_experiment(&cfg, &out, threads) {
                Ok(r) => {
                    println!("wrote {} agent-day rows to {}", r.agent_rows, r.dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { config, learnings, memories, seeds, out } => {
            let base = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let parsed = (|| {
                Ok::<_, String>((
                    parse_list(&learnings, LearningType::parse, "learning type")?,
                    parse_list(&memories, MemoryModel::parse, "memory model")?,
                    parse_seeds(&seeds)?,
                ))
            })();
            let (ls, ms, ss) = match parsed {
                Ok(x) => x,
                Err(m) => return config_error(m),
            };
            match sweep(&base, &cells(&ls, &ms, &ss), &out) {
                Ok(r) => {
                    println!("{} cells done, summary at {}", r.summaries.len(), r.summary_path.display());
                    for (c, e) in &r.failures {
                        eprintln!("failed {}: {e}", c.dir_name());
                    }
                    if r.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(3)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Validate => {
            let checks = validate_all();
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
    }
}
