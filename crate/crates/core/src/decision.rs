//! Memory/learning arbitration: credibility scoring, the memory gate and the
//! episodic and replay-pool retrieval baselines.

use crate::memory::{decay_weight, DecayTable, ItemId, MemoryItem};
use crate::model::{obs_max_distance, ActionId, AgentId, Observation, Step};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CredibilityParams {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub lambda: f64,
    pub theta_memory: f64,
    /// Copied from the run configuration.
    #[serde(skip)]
    pub steps_per_day: u32,
}

impl Default for CredibilityParams {
    fn default() -> Self {
        CredibilityParams { w1: 0.6, w2: 0.2, w3: 0.2, lambda: 0.9, theta_memory: 0.7, steps_per_day: 360 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("observation schema mismatch: {left} vs {right}")]
pub struct SchemaMismatch {
    pub left: u16,
    pub right: u16,
}

/// `1 - |obs - item.obs_prev| / d_max`, in `[0, 1]`.
pub fn env_similarity(obs: &Observation, item: &MemoryItem) -> Result<f64, SchemaMismatch> {
    if obs.schema != item.obs_prev.schema {
        return Err(SchemaMismatch { left: obs.schema, right: item.obs_prev.schema });
    }
    Ok(similarity(obs, &item.obs_prev))
}

fn similarity(a: &Observation, b: &Observation) -> f64 {
    (1.0 - a.distance(b) / obs_max_distance()).clamp(0.0, 1.0)
}

/// The observation-independent part `w2 * S_success + w3 * lambda^age`.
pub fn credibility_prior(item: &MemoryItem, now: Step, p: &CredibilityParams) -> f64 {
    p.w2 * item.success_rate() + p.w3 * decay_weight(now, item.t0, p.lambda, p.steps_per_day)
}

pub fn credibility(item: &MemoryItem, obs: &Observation, now: Step, p: &CredibilityParams) -> f64 {
    p.w1 * similarity(obs, &item.obs_prev) + credibility_prior(item, now, p)
}

/// Observation-independent part of the baseline score.
pub fn baseline_prior(item: &MemoryItem, now: Step, lambda: f64, steps_per_day: u32) -> f64 {
    item.delta.abs().min(1.0) + decay_weight(now, item.t0, lambda, steps_per_day)
}

/// Equal-weight relevance, importance and recency score.
pub fn baseline_score(item: &MemoryItem, obs: &Observation, now: Step, lambda: f64, steps_per_day: u32) -> f64 {
    (similarity(obs, &item.obs_prev) + baseline_prior(item, now, lambda, steps_per_day)) / 3.0
}

/// The best candidate found in a store.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryMatch {
    pub action: ActionId,
    pub score: f64,
    pub item_id: ItemId,
    pub t0: Step,
    pub owner: AgentId,
}

/// Better candidate first: higher score, then newer, then lower owner.
fn candidate_cmp(a: &MemoryMatch, b: &MemoryMatch) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.t0.cmp(&a.t0))
        .then_with(|| a.owner.cmp(&b.owner))
}

/// Store items paired with their per-step priors, shared read-only by every
/// agent deciding in the same step.
pub struct PreparedStore<'a> {
    pub items: &'a [MemoryItem],
    priors: Vec<f64>,
    baseline: bool,
    w1: f64,
}

impl<'a> PreparedStore<'a> {
    pub fn credibility(items: &'a [MemoryItem], now: Step, p: &CredibilityParams, decay: &DecayTable) -> Self {
        let priors = items
            .iter()
            .map(|m| p.w2 * m.success_rate() + p.w3 * decay.weight(now, m.t0))
            .collect();
        PreparedStore { items, priors, baseline: false, w1: p.w1 }
    }

    pub fn baseline(items: &'a [MemoryItem], now: Step, decay: &DecayTable) -> Self {
        let priors = items.iter().map(|m| m.delta.abs().min(1.0) + decay.weight(now, m.t0)).collect();
        PreparedStore { items, priors, baseline: true, w1: 1.0 }
    }

    fn score_at(&self, i: usize, obs: &Observation) -> f64 {
        let s = similarity(obs, &self.items[i].obs_prev);
        if self.baseline {
            (s + self.priors[i]) / 3.0
        } else {
            self.w1 * s + self.priors[i]
        }
    }

    /// Best-scoring item, optionally restricted to one owner.
    pub fn best(&self, obs: &Observation, owner: Option<AgentId>) -> Option<MemoryMatch> {
        self.best_where(obs, owner, |_| true)
    }

    /// Best-scoring item among those whose action passes `applicable`.
    pub fn best_where(
        &self,
        obs: &Observation,
        owner: Option<AgentId>,
        applicable: impl Fn(ActionId) -> bool,
    ) -> Option<MemoryMatch> {
        let mut best: Option<MemoryMatch> = None;
        for (i, m) in self.items.iter().enumerate() {
            if owner.is_some_and(|o| o != m.owner) || !applicable(m.action) {
                continue;
            }
            let cand = MemoryMatch { action: m.action, score: self.score_at(i, obs), item_id: m.id, t0: m.t0, owner: m.owner };
            if best.as_ref().is_none_or(|b| candidate_cmp(&cand, b) == Ordering::Less) {
                best = Some(cand);
            }
        }
        best
    }
}

/// Highest-credibility item of the shared store.
pub fn best_memory_action(
    obs: &Observation,
    shared: &[MemoryItem],
    now: Step,
    p: &CredibilityParams,
) -> Option<MemoryMatch> {
    PreparedStore::credibility(shared, now, p, &DecayTable::new(p.lambda, p.steps_per_day, 0)).best(obs, None)
}

/// Baseline retrieval over an agent's own items.
pub fn episodic_retrieve(
    obs: &Observation,
    individual: &[MemoryItem],
    now: Step,
    lambda: f64,
    steps_per_day: u32,
) -> Option<MemoryMatch> {
    PreparedStore::baseline(individual, now, &DecayTable::new(lambda, steps_per_day, 0)).best(obs, None)
}

/// Baseline retrieval over the global replay pool.
pub fn replay_retrieve(
    obs: &Observation,
    pool: &[MemoryItem],
    now: Step,
    lambda: f64,
    steps_per_day: u32,
) -> Option<MemoryMatch> {
    PreparedStore::baseline(pool, now, &DecayTable::new(lambda, steps_per_day, 0)).best(obs, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionSource {
    Memory,
    Learning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub agent_id: AgentId,
    pub step: Step,
    pub source: DecisionSource,
    pub chosen_action: ActionId,
    /// Best candidate score; 0 when no candidate exists.
    pub best_credibility: f64,
    pub matched_item: Option<ItemId>,
}

impl DecisionRecord {
    pub fn is_sound(&self, theta_memory: f64) -> bool {
        (self.source == DecisionSource::Memory) == (self.best_credibility > theta_memory)
    }
}

/// Strict gate: the memorized action wins iff its score exceeds the threshold.
pub fn gate(
    agent_id: AgentId,
    step: Step,
    candidate: Option<MemoryMatch>,
    learning_action: ActionId,
    theta_memory: f64,
) -> DecisionRecord {
    match candidate {
        Some(m) if m.score > theta_memory => DecisionRecord {
            agent_id,
            step,
            source: DecisionSource::Memory,
            chosen_action: m.action,
            best_credibility: m.score,
            matched_item: Some(m.item_id),
        },
        other => DecisionRecord {
            agent_id,
            step,
            source: DecisionSource::Learning,
            chosen_action: learning_action,
            best_credibility: other.map_or(0.0, |m| m.score),
            matched_item: None,
        },
    }
}

pub fn decide(
    agent_id: AgentId,
    obs: &Observation,
    learning_action: ActionId,
    shared: &[MemoryItem],
    now: Step,
    p: &CredibilityParams,
) -> DecisionRecord {
    let best = best_memory_action(obs, shared, now, p);
    gate(agent_id, now, best, learning_action, p.theta_memory)
}
