//! Learning × memory × seed matrices.

use super::config::ExperimentConfig;
use super::metrics::{median, AgentDailyRow};
use super::run::{run_experiment, simulate, write_outputs, HarnessError, RunReport};
use crate::model::{LearningType, MemoryModel};
use crate::world::orders::OrderStatus;
use crate::world::World;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

pub const SUMMARY_HEADER: [&str; 9] = [
    "learning",
    "memory_model",
    "seed",
    "mean_profit",
    "median_profit",
    "mean_orders",
    "mean_effective_steps",
    "completion_rate",
    "agent_days",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub learning: LearningType,
    pub memory: MemoryModel,
    pub seed: u64,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!("{}-{}-seed{}", self.learning.as_str(), self.memory.as_str(), self.seed)
    }

    pub fn config(&self, base: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            seed: self.seed,
            learning: self.learning,
            learning_mix: Vec::new(),
            memory_model: self.memory,
            ..base.clone()
        }
    }
}

pub fn cells(learnings: &[LearningType], memories: &[MemoryModel], seeds: &[u64]) -> Vec<Cell> {
    let mut out = Vec::new();
    for &learning in learnings {
        for &memory in memories {
            for &seed in seeds {
                out.push(Cell { learning, memory, seed });
            }
        }
    }
    out
}

/// Aggregates over all agent-days of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub mean_profit: f64,
    pub median_profit: f64,
    pub mean_orders: f64,
    pub mean_effective_steps: f64,
    pub completion_rate: f64,
    pub agent_days: usize,
}

pub fn summarize(cell: Cell, world: &World) -> CellSummary {
    let n = world.rows.len();
    let mut profits: Vec<f64> = world.rows.iter().map(|r| r.profit_milli as f64 / 1000.0).collect();
    let mean = |f: &dyn Fn(&AgentDailyRow) -> f64| {
        if n == 0 {
            0.0
        } else {
            world.rows.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let total_profit: i64 = world.rows.iter().map(|r| r.profit_milli).sum();
    let generated = world.orders.len();
    let delivered = world.orders.iter().filter(|o| o.status == OrderStatus::Delivered).count();
    CellSummary {
        cell,
        mean_profit: if n == 0 { 0.0 } else { total_profit as f64 / 1000.0 / n as f64 },
        median_profit: median(&mut profits),
        mean_orders: mean(&|r| r.orders_completed as f64),
        mean_effective_steps: mean(&|r| r.effective_steps as f64),
        completion_rate: if generated == 0 { 0.0 } else { delivered as f64 / generated as f64 },
        agent_days: n,
    }
}

#[derive(Debug)]
pub struct SweepReport {
    pub summaries: Vec<CellSummary>,
    pub failures: Vec<(Cell, String)>,
    pub summary_path: PathBuf,
}

/// Runs every cell in parallel, one subdirectory each, and writes
/// `summary.csv`. Failed cells are listed; completed ones are kept.
pub fn sweep(base: &ExperimentConfig, cells: &[Cell], out: &Path) -> Result<SweepReport, HarnessError> {
    std::fs::create_dir_all(out).map_err(|source| HarnessError::Io { path: out.to_path_buf(), source })?;
    let results: Vec<Result<CellSummary, (Cell, String)>> = cells
        .par_iter()
        .map(|&cell| {
            let cfg = cell.config(base);
            let dir = out.join(cell.dir_name());
            let run = || -> Result<CellSummary, HarnessError> {
                let world = simulate(&cfg, None)?;
                std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
                let echo = dir.join(super::run::CONFIG_ECHO);
                std::fs::write(&echo, cfg.to_toml()).map_err(|source| HarnessError::Io { path: echo, source })?;
                let _: RunReport = write_outputs(&world, &dir)?;
                Ok(summarize(cell, &world))
            };
            run().map_err(|e| (cell, e.to_string()))
        })
        .collect();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => summaries.push(s),
            Err(f) => failures.push(f),
        }
    }
    let summary_path = out.join("summary.csv");
    write_summary(&summary_path, &summaries)?;
    Ok(SweepReport { summaries, failures, summary_path })
}

/// Single-cell convenience wrapper with the same layout as [`sweep`].
pub fn run_cell(base: &ExperimentConfig, cell: Cell, out: &Path) -> Result<RunReport, HarnessError> {
    run_experiment(&cell.config(base), &out.join(cell.dir_name()), None)
}

fn write_summary(path: &Path, rows: &[CellSummary]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for s in rows {
        w.write_record([
            s.cell.learning.as_str().to_string(),
            s.cell.memory.as_str().to_string(),
            s.cell.seed.to_string(),
            format!("{:.6}", s.mean_profit),
            format!("{:.6}", s.median_profit),
            format!("{:.6}", s.mean_orders),
            format!("{:.6}", s.mean_effective_steps),
            format!("{:.6}", s.completion_rate),
            s.agent_days.to_string(),
        ])?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    Ok(())
}
