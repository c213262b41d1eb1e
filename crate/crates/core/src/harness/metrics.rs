//! Daily metric rows and their CSV form.

use crate::model::{AgentId, LearningType, MemoryModel, Step};
use crate::world::orders::{Order, OrderStatus};
use std::io::Write;

pub const AGENT_HEADER: [&str; 9] = [
    "day",
    "agent_id",
    "learning",
    "memory_model",
    "profit",
    "orders_completed",
    "effective_steps",
    "decisions_memory",
    "decisions_learning",
];

pub const SYSTEM_HEADER: [&str; 5] = ["day", "orders_generated", "orders_delivered", "orders_expired", "completion_rate"];

#[derive(Clone, Debug, PartialEq)]
pub struct AgentDailyRow {
    pub day: u64,
    pub agent_id: AgentId,
    pub learning: LearningType,
    pub memory_model: MemoryModel,
    pub profit_milli: i64,
    pub orders_completed: u32,
    /// Steps spent carrying an order.
    pub effective_steps: u32,
    pub decisions_memory: u32,
    pub decisions_learning: u32,
}

/// Counts for the orders generated on one day, followed to the end of the run.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemDailyRow {
    pub day: u64,
    pub orders_generated: u64,
    pub orders_delivered: u64,
    pub orders_expired: u64,
    /// Still alive or being carried when the run ended.
    pub orders_outstanding: u64,
}

impl SystemDailyRow {
    pub fn completion_rate(&self) -> f64 {
        if self.orders_generated == 0 {
            0.0
        } else {
            self.orders_delivered as f64 / self.orders_generated as f64
        }
    }
}

pub fn system_rows(orders: &[Order], steps_per_day: u32, days: u64) -> Vec<SystemDailyRow> {
    let mut rows: Vec<SystemDailyRow> = (0..days)
        .map(|day| SystemDailyRow { day, orders_generated: 0, orders_delivered: 0, orders_expired: 0, orders_outstanding: 0 })
        .collect();
    for o in orders {
        let r = &mut rows[(o.t_start / steps_per_day as Step) as usize];
        r.orders_generated += 1;
        match o.status {
            OrderStatus::Delivered => r.orders_delivered += 1,
            OrderStatus::Dead => r.orders_expired += 1,
            OrderStatus::Alive | OrderStatus::Captured => r.orders_outstanding += 1,
        }
    }
    rows
}

/// Milli-units as a fixed three-decimal string.
pub fn format_milli(v: i64) -> String {
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    format!("{sign}{}.{:03}", a / 1000, a % 1000)
}

pub fn write_agent_csv<W: Write>(out: W, rows: &[AgentDailyRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGENT_HEADER)?;
    for r in rows {
        w.write_record([
            r.day.to_string(),
            r.agent_id.to_string(),
            r.learning.as_str().to_string(),
            r.memory_model.as_str().to_string(),
            format_milli(r.profit_milli),
            r.orders_completed.to_string(),
            r.effective_steps.to_string(),
            r.decisions_memory.to_string(),
            r.decisions_learning.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_system_csv<W: Write>(out: W, rows: &[SystemDailyRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SYSTEM_HEADER)?;
    for r in rows {
        w.write_record([
            r.day.to_string(),
            r.orders_generated.to_string(),
            r.orders_delivered.to_string(),
            r.orders_expired.to_string(),
            format!("{:.6}", r.completion_rate()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Median of an unsorted sample; mean of the middle pair for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
