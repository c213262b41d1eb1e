use crate::model::Status;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveOrderPaths {
    /// Optimal length of the whole task.
    pub l_best: f64,
    pub l_rest: f64,
    pub l_past: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateValueInputs {
    pub active: Option<ActiveOrderPaths>,
    pub n_orders_in_scope: usize,
    pub status_now: Status,
    pub status_prev: Status,
}

/// `(L_best / (L_rest + L_past)) * (status_now - status_prev) + n / scope^2`.
/// The first term is 0 without an active order and reduces to the status
/// change when the travelled and remaining lengths are both 0.
pub fn state_value(i: &StateValueInputs, scope: f64) -> f64 {
    let ds = (i.status_now.code() - i.status_prev.code()) as f64;
    let first = match i.active {
        None => 0.0,
        Some(p) if p.l_rest + p.l_past == 0.0 => ds,
        Some(p) => p.l_best / (p.l_rest + p.l_past) * ds,
    };
    first + i.n_orders_in_scope as f64 / (scope * scope)
}
