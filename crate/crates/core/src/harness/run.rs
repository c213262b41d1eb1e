use super::config::{ConfigError, ExperimentConfig};
use super::metrics::{system_rows, write_agent_csv, write_system_csv, SystemDailyRow};
use crate::world::World;
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const AGENT_CSV: &str = "agent_daily.csv";
pub const SYSTEM_CSV: &str = "system_daily.csv";
pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Simulates the whole configured horizon in memory.
pub fn simulate(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<World, HarnessError> {
    cfg.validate()?;
    with_threads(threads, || {
        let mut world = World::new(cfg.clone());
        world.run_to_end();
        world
    })
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub agent_rows: usize,
    pub system: Vec<SystemDailyRow>,
}

/// Runs one experiment and writes its CSVs, config echo and any enabled
/// exports into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, threads: Option<usize>) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let echo = out.join(CONFIG_ECHO);
    fs::write(&echo, cfg.to_toml()).map_err(io_err(&echo))?;
    let every = cfg.output.world_snapshot_days as u64;
    let spd = cfg.steps_per_day as u64;
    let world = with_threads(threads, || -> Result<World, HarnessError> {
        let mut world = World::new(cfg.clone());
        while !world.is_done() {
            world.step();
            if every > 0 && world.step % (every * spd) == 0 {
                let path = out.join(format!("world_day{:03}.json", world.step / spd));
                let w = create(&path)?;
                serde_json::to_writer(w, &world.snapshot_export())?;
            }
        }
        Ok(world)
    })??;
    write_outputs(&world, out)
}

pub fn write_outputs(world: &World, out: &Path) -> Result<RunReport, HarnessError> {
    let cfg = &world.cfg;
    let path = out.join(AGENT_CSV);
    write_agent_csv(create(&path)?, &world.rows)?;
    let system = system_rows(&world.orders, cfg.steps_per_day, cfg.days());
    let path = out.join(SYSTEM_CSV);
    write_system_csv(create(&path)?, &system)?;
    if let Some(log) = &world.decision_log {
        write_jsonl(&out.join("decisions.jsonl"), log)?;
    }
    if cfg.output.memory_snapshot {
        let items = world.collective.items.iter().chain(world.pool.iter());
        write_jsonl(&out.join("memory.jsonl"), items)?;
    }
    if cfg.output.learning_snapshot {
        let path = out.join("qtable.json");
        serde_json::to_writer(create(&path)?, &world.qtable)?;
        write_jsonl(&out.join("imitation.jsonl"), world.dataset.entries())?;
    }
    let path = out.join("counters.json");
    serde_json::to_writer_pretty(create(&path)?, &world.counters)?;
    Ok(RunReport { dir: out.to_path_buf(), agent_rows: world.rows.len(), system })
}
