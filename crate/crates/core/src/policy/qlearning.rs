//! Tabular Q-learning over [`DiscreteState`] with one table shared by every
//! learning agent.

use super::{ActionMask, DiscreteState, PolicyContext};
use crate::model::{ActionId, NUM_ACTION_CLASSES};
use crate::policy::state::NUM_STATES;
use crate::rng::SeededStream;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the run over which epsilon anneals linearly.
    pub anneal_fraction: f64,
}

impl Default for QParams {
    fn default() -> Self {
        QParams { alpha: 0.1, gamma: 0.8, epsilon_start: 0.3, epsilon_end: 0.05, anneal_fraction: 0.2 }
    }
}

impl QParams {
    pub fn epsilon(&self, step: u64, total_steps: u64) -> f64 {
        let horizon = self.anneal_fraction * total_steps as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let f = (step as f64 / horizon).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * f
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: Vec<f64>,
}

impl Default for QTable {
    fn default() -> Self {
        QTable { values: vec![0.0; NUM_STATES * NUM_ACTION_CLASSES] }
    }
}

impl QTable {
    pub fn get(&self, s: DiscreteState, class: usize) -> f64 {
        self.values[s.index() * NUM_ACTION_CLASSES + class]
    }

    pub fn set(&mut self, s: DiscreteState, class: usize, v: f64) {
        self.values[s.index() * NUM_ACTION_CLASSES + class] = v;
    }

    pub fn row(&self, s: DiscreteState) -> &[f64] {
        let i = s.index() * NUM_ACTION_CLASSES;
        &self.values[i..i + NUM_ACTION_CLASSES]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest value over `classes`, or over the whole row when empty.
    pub fn max_over(&self, s: DiscreteState, classes: &[usize]) -> f64 {
        let row = self.row(s);
        if classes.is_empty() {
            row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            classes.iter().map(|&c| row[c]).fold(f64::NEG_INFINITY, f64::max)
        }
    }

    /// Greedy legal class; ties go to the lowest class index.
    pub fn argmax(&self, s: DiscreteState, mask: &ActionMask) -> Option<usize> {
        let row = self.row(s);
        let mut best: Option<usize> = None;
        for c in mask.classes() {
            if best.is_none_or(|b| row[c] > row[b]) {
                best = Some(c);
            }
        }
        best
    }
}

/// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`, the maximum
/// taken over `next_classes` (all classes when empty).
#[allow(clippy::too_many_arguments)]
pub fn q_update_over(
    q: &mut QTable,
    s: DiscreteState,
    a: usize,
    r: f64,
    s_next: DiscreteState,
    next_classes: &[usize],
    alpha: f64,
    gamma: f64,
) {
    let target = r + gamma * q.max_over(s_next, next_classes);
    let old = q.get(s, a);
    q.set(s, a, old + alpha * (target - old));
}

pub fn q_update(q: &mut QTable, s: DiscreteState, a: usize, r: f64, s_next: DiscreteState, alpha: f64, gamma: f64) {
    q_update_over(q, s, a, r, s_next, &[], alpha, gamma);
}

/// Epsilon-greedy class choice over the legal classes.
pub fn q_choose(q: &QTable, s: DiscreteState, mask: &ActionMask, epsilon: f64, rng: &mut SeededStream) -> Option<usize> {
    let legal: Vec<usize> = mask.classes().collect();
    if legal.is_empty() {
        return None;
    }
    if rng.random::<f64>() < epsilon {
        Some(legal[rng.random_range(0..legal.len())])
    } else {
        q.argmax(s, mask)
    }
}

pub fn q_policy(q: &QTable, ctx: &PolicyContext<'_>, epsilon: f64, rng: &mut SeededStream) -> ActionId {
    q_choose(q, ctx.state, &ctx.mask, epsilon, rng)
        .and_then(|c| ctx.concretize(c))
        .unwrap_or(ActionId::Stay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Status;
    use crate::rng::agent_stream;

    fn s0() -> DiscreteState {
        DiscreteState::new(0, 0, 360, 0, Status::Idle)
    }

    #[test]
    fn update_examples() {
        let mut q = QTable::default();
        q_update(&mut q, s0(), 3, 0.0, s0(), 0.1, 0.8);
        assert!(q.values().iter().all(|v| *v == 0.0));
        q_update(&mut q, s0(), 3, 1.0, s0(), 0.1, 0.8);
        assert!((q.get(s0(), 3) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn self_loop_converges_to_fixed_point() {
        let mut q = QTable::default();
        for _ in 0..1000 {
            q_update(&mut q, s0(), 0, 1.0, s0(), 0.1, 0.8);
        }
        assert!((q.get(s0(), 0) - 5.0).abs() < 1e-3);
    }

    #[test]
    fn greedy_ties_and_exploration() {
        let mut q = QTable::default();
        let mask = ActionMask([true; NUM_ACTION_CLASSES]);
        let mut rng = agent_stream(0, 0);
        assert_eq!(q_choose(&q, s0(), &mask, 0.0, &mut rng), Some(0));
        q.set(s0(), 11, 2.0);
        for _ in 0..20 {
            assert_eq!(q_choose(&q, s0(), &mask, 0.0, &mut rng), Some(11));
        }
        let mut restricted = mask;
        restricted.0[11] = false;
        assert_eq!(q.argmax(s0(), &restricted), Some(0));
    }

    #[test]
    fn epsilon_schedule() {
        let p = QParams::default();
        assert!((p.epsilon(0, 1000) - 0.3).abs() < 1e-12);
        assert!((p.epsilon(100, 1000) - 0.175).abs() < 1e-12);
        assert!((p.epsilon(200, 1000) - 0.05).abs() < 1e-12);
        assert!((p.epsilon(900, 1000) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q = QTable::default();
        let mut mask = ActionMask::none();
        for c in [0, 4, 8, 9, 12] {
            mask.0[c] = true;
        }
        let mut rng = agent_stream(3, 9);
        let n = 10_000;
        let mut counts = [0usize; NUM_ACTION_CLASSES];
        for _ in 0..n {
            counts[q_choose(&q, s0(), &mask, 1.0, &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / 5.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in [0, 4, 8, 9, 12] {
            assert!((counts[c] as f64 - n as f64 * p).abs() < 3.0 * sigma, "class {c}: {}", counts[c]);
        }
        assert_eq!(counts.iter().sum::<usize>(), n);
    }
}
