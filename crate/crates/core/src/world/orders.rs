//! Orders: demand curve, Poisson generation, value and lifespan.

use super::grid::GridMap;
use crate::model::{AgentId, Cell, OrderId, Step};
use crate::rng::SeededStream;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderStatus {
    Alive,
    Captured,
    Delivered,
    Dead,
}

impl OrderStatus {
    pub fn can_become(self, next: OrderStatus) -> bool {
        use OrderStatus::*;
        matches!((self, next), (Alive, Captured) | (Captured, Delivered) | (Alive, Dead) | (Captured, Dead))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub start: Cell,
    pub end: Cell,
    pub status: OrderStatus,
    /// Congestion-free shortest path length from start to end.
    pub distance: f64,
    pub value: f64,
    /// `value` in milli-units, the unit earnings are booked in.
    pub value_milli: i64,
    pub t_start: Step,
    pub t_alive: u64,
    pub assigned_to: Option<AgentId>,
    pub t_done: Option<Step>,
}

impl Order {
    pub fn is_open(&self) -> bool {
        self.status == OrderStatus::Alive && self.assigned_to.is_none()
    }

    pub fn expired_at(&self, step: Step) -> bool {
        step.saturating_sub(self.t_start) > self.t_alive
    }

    /// Moves along the lifecycle graph; panics on an illegal transition.
    pub fn transition(&mut self, next: OrderStatus, step: Step) {
        assert!(self.status.can_become(next), "order {}: {:?} -> {:?}", self.id, self.status, next);
        self.status = next;
        if matches!(next, OrderStatus::Delivered | OrderStatus::Dead) {
            self.t_done = Some(step);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorParams {
    pub a: [f64; 5],
    pub b: [f64; 5],
    pub c: [f64; 5],
    /// Scale from the demand curve to expected orders per step.
    pub alpha: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            a: [314.2, 188.3, 95.56, 22.9, 48.67],
            b: [172.5, 281.5, 315.5, 228.9, 267.1],
            c: [4.645, 1.559, 10.69, 167.7, 13.1],
            alpha: 0.05,
        }
    }
}

/// Five-term Gaussian demand curve over the time-of-day step.
pub fn gn(x: f64, p: &GeneratorParams) -> f64 {
    (0..5).map(|i| p.a[i] * (-((x - p.b[i]) / p.c[i]).powi(2)).exp()).sum()
}

/// Time weight: 1.0 for orders created 08:00-22:00, 1.5 otherwise.
pub fn time_weight(time_of_day: u32, steps_per_day: u32) -> f64 {
    let minutes = time_of_day as u64 * 24 * 60 / steps_per_day as u64;
    if (8 * 60..22 * 60).contains(&minutes) {
        1.0
    } else {
        1.5
    }
}

pub fn order_value(start: Cell, end: Cell, time_of_day: u32, steps_per_day: u32) -> f64 {
    start.octile(end) * time_weight(time_of_day, steps_per_day)
}

/// Twice the minimal travel time plus fixed slack.
pub fn lifespan(distance: f64, speed: f64) -> u64 {
    (2.0 * distance / speed).ceil() as u64 + 30
}

pub fn to_milli(v: f64) -> i64 {
    (v * 1000.0).round() as i64
}

/// Draws this step's new orders; ids continue from `next_id`.
pub fn generate_orders(
    step: Step,
    steps_per_day: u32,
    rng: &mut SeededStream,
    p: &GeneratorParams,
    map: &GridMap,
    speed: f64,
    next_id: OrderId,
) -> Vec<Order> {
    let tod = (step % steps_per_day as u64) as u32;
    let mean = p.alpha * gn(tod as f64, p);
    let count = if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    };
    let cell = |rng: &mut SeededStream| {
        Cell::new(rng.random_range(0..map.width as i32), rng.random_range(0..map.height as i32))
    };
    (0..count)
        .map(|k| {
            let start = cell(rng);
            let end = cell(rng);
            let distance = start.octile(end);
            let value = order_value(start, end, tod, steps_per_day);
            Order {
                id: next_id + k as OrderId,
                start,
                end,
                status: OrderStatus::Alive,
                distance,
                value,
                value_milli: to_milli(value),
                t_start: step,
                t_alive: lifespan(distance, speed),
                assigned_to: None,
                t_done: None,
            }
        })
        .collect()
}
