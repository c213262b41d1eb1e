//! Hierarchical memory: individual stores, the per-step buffer pool and the
//! bounded collective store, with value/rarity admission, top-k pruning and
//! day-based decay.

use crate::model::{ActionId, AgentId, Cell, Observation, Step, NUM_ACTION_CLASSES, OBS_DIM};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

pub type ItemId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    LongTerm,
    ShortTerm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Delivery,
    Weather,
    Traffic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryItem {
    pub id: ItemId,
    pub kind: MemoryKind,
    pub event_type: EventType,
    pub t0: Step,
    pub location: Cell,
    pub obs_prev: Observation,
    pub action: ActionId,
    pub obs_post: Observation,
    pub reward: f64,
    pub delta: f64,
    pub usage_count: u32,
    pub success_count: u32,
    pub owner: AgentId,
}

impl MemoryItem {
    /// Creation counts as the first use; it is a success iff `reward > 0`.
    pub fn init_usage(&mut self) {
        self.usage_count = 1;
        self.success_count = u32::from(self.reward > 0.0);
    }

    pub fn mark_usage(&mut self, outcome_positive: bool) {
        self.usage_count += 1;
        if outcome_positive {
            self.success_count += 1;
        }
    }

    pub fn success_rate(&self) -> f64 {
        if self.usage_count == 0 {
            0.0
        } else {
            self.success_count as f64 / self.usage_count as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryParams {
    pub gamma: f64,
    pub theta_value: f64,
    pub theta_rare: f64,
    pub k: usize,
    pub lambda: f64,
    pub discard_floor: f64,
    /// Copied from the run configuration.
    #[serde(skip)]
    pub steps_per_day: u32,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            gamma: 0.8,
            theta_value: 0.9,
            theta_rare: 0.6,
            k: 4000,
            lambda: 0.9,
            discard_floor: 0.1,
            steps_per_day: 360,
        }
    }
}

pub fn age_days(now: Step, t0: Step, steps_per_day: u32) -> f64 {
    now.saturating_sub(t0) as f64 / steps_per_day as f64
}

/// `lambda^age_days`.
pub fn decay_weight(now: Step, t0: Step, lambda: f64, steps_per_day: u32) -> f64 {
    lambda.powf(age_days(now, t0, steps_per_day))
}

/// Decay weights indexed by age in steps; entries equal [`decay_weight`].
#[derive(Clone, Debug)]
pub struct DecayTable {
    lambda: f64,
    steps_per_day: u32,
    table: Vec<f64>,
}

impl DecayTable {
    pub fn new(lambda: f64, steps_per_day: u32, max_age: u64) -> Self {
        let table = (0..=max_age).map(|age| decay_weight(age, 0, lambda, steps_per_day)).collect();
        DecayTable { lambda, steps_per_day, table }
    }

    pub fn weight(&self, now: Step, t0: Step) -> f64 {
        let age = now.saturating_sub(t0);
        match self.table.get(age as usize) {
            Some(w) => *w,
            None => decay_weight(now, t0, self.lambda, self.steps_per_day),
        }
    }
}

/// Temporal value error `gamma * v_next - v_now`.
pub fn value_error(v_now: f64, v_next: f64, gamma: f64) -> f64 {
    gamma * v_next - v_now
}

const ONE_HOT_SQ: f64 = 2.0 / NUM_ACTION_CLASSES as f64;

/// Largest attainable distance between two memory feature vectors.
pub fn feature_max_distance() -> f64 {
    let obs = crate::model::OBS_RANGES.iter().map(|r| r * r).sum::<f64>();
    (2.0 * obs + ONE_HOT_SQ).sqrt()
}

/// Feature vector `[obs_prev, onehot(action)/sqrt(|A|), obs_post]`.
pub fn feature_vector(item: &MemoryItem) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * OBS_DIM + NUM_ACTION_CLASSES);
    v.extend_from_slice(&item.obs_prev.values);
    let scale = 1.0 / (NUM_ACTION_CLASSES as f64).sqrt();
    v.extend((0..NUM_ACTION_CLASSES).map(|c| if c == item.action.class() { scale } else { 0.0 }));
    v.extend_from_slice(&item.obs_post.values);
    v
}

fn feature_sq_distance(a: &MemoryItem, b: &MemoryItem) -> f64 {
    let mut s = 0.0;
    for i in 0..OBS_DIM {
        let d = a.obs_prev.values[i] - b.obs_prev.values[i];
        s += d * d;
    }
    if a.action.class() != b.action.class() {
        s += ONE_HOT_SQ;
    }
    for i in 0..OBS_DIM {
        let d = a.obs_post.values[i] - b.obs_post.values[i];
        s += d * d;
    }
    s
}

/// Normalized feature distance in `[0, 1]`.
pub fn feature_distance(a: &MemoryItem, b: &MemoryItem) -> f64 {
    (feature_sq_distance(a, b).sqrt() / feature_max_distance()).min(1.0)
}

/// Minimum normalized distance to the shared items; 1.0 for an empty store.
pub fn rarity(item: &MemoryItem, shared: &[MemoryItem]) -> f64 {
    let mut best = f64::INFINITY;
    for s in shared {
        let d = feature_sq_distance(item, s);
        if d < best {
            best = d;
            if best == 0.0 {
                break;
            }
        }
    }
    if best.is_infinite() {
        1.0
    } else {
        (best.sqrt() / feature_max_distance()).min(1.0)
    }
}

pub fn admission_predicate(delta: f64, rarity: f64, params: &MemoryParams) -> bool {
    delta.abs() > params.theta_value || rarity > params.theta_rare
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IndividualStore {
    pub owner: AgentId,
    pub items: Vec<MemoryItem>,
    pub long_term_goal: String,
}

impl IndividualStore {
    pub fn new(owner: AgentId) -> Self {
        IndividualStore { owner, items: Vec::new(), long_term_goal: "maximize profit".to_string() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct BufferPool {
    pub items: Vec<MemoryItem>,
}

#[derive(Clone, Debug)]
pub struct CollectiveStore {
    pub items: Vec<MemoryItem>,
    pub capacity: usize,
}

impl CollectiveStore {
    pub fn new(capacity: usize) -> Self {
        CollectiveStore { items: Vec::new(), capacity }
    }
}

/// Audit entry for one admitted item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub item_id: ItemId,
    pub step: Step,
    pub delta: f64,
    pub rarity: f64,
}

pub fn record(item: MemoryItem, individual: &mut IndividualStore, buffer: &mut BufferPool) {
    buffer.items.push(item.clone());
    individual.items.push(item);
}

/// Admits buffered items by value error or rarity, appends them to the
/// shared store and empties the buffer. Rarity is measured against the store
/// as it stood before this call.
pub fn admit(
    buffer: &mut BufferPool,
    shared: &mut CollectiveStore,
    params: &MemoryParams,
    step: Step,
) -> Vec<Admission> {
    let snapshot = &shared.items;
    let rarities: Vec<f64> = if buffer.items.len() * snapshot.len() > 20_000 {
        buffer.items.par_iter().map(|m| rarity(m, snapshot)).collect()
    } else {
        buffer.items.iter().map(|m| rarity(m, snapshot)).collect()
    };
    let mut log = Vec::new();
    for (item, r) in buffer.items.drain(..).zip(rarities) {
        if admission_predicate(item.delta, r, params) {
            log.push(Admission { item_id: item.id, step, delta: item.delta, rarity: r });
            shared.items.push(item);
        }
    }
    log
}

/// Pruning score `|delta| + success/usage + lambda^age_days`.
pub fn score(item: &MemoryItem, now: Step, params: &MemoryParams) -> f64 {
    item.delta.abs()
        + item.success_rate()
        + decay_weight(now, item.t0, params.lambda, params.steps_per_day)
}

/// Retention order: higher score, then newer `t0`, then lower owner. Equal
/// keys keep insertion order through the stable sort.
pub fn retention_cmp(a: (f64, &MemoryItem), b: (f64, &MemoryItem)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| b.1.t0.cmp(&a.1.t0))
        .then_with(|| a.1.owner.cmp(&b.1.owner))
}

/// Keeps the `k` best items by [`score`], preserving insertion order among
/// survivors. Returns the number removed.
pub fn prune_items(items: &mut Vec<MemoryItem>, k: usize, now: Step, params: &MemoryParams) -> usize {
    if items.len() <= k {
        return 0;
    }
    let scores: Vec<f64> = items.iter().map(|m| score(m, now, params)).collect();
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&i, &j| retention_cmp((scores[i], &items[i]), (scores[j], &items[j])));
    let mut keep = vec![false; items.len()];
    for &i in &order[..k] {
        keep[i] = true;
    }
    let before = items.len();
    let mut idx = 0;
    items.retain(|_| {
        let k = keep[idx];
        idx += 1;
        k
    });
    before - items.len()
}

pub fn prune(shared: &mut CollectiveStore, now: Step, params: &MemoryParams) -> usize {
    let k = shared.capacity;
    prune_items(&mut shared.items, k, now, params)
}

/// Removes short-term items whose decay weight fell below the floor.
pub fn decay_sweep(items: &mut Vec<MemoryItem>, now: Step, params: &MemoryParams) -> usize {
    let before = items.len();
    items.retain(|m| {
        m.kind == MemoryKind::LongTerm
            || decay_weight(now, m.t0, params.lambda, params.steps_per_day) >= params.discard_floor
    });
    before - items.len()
}

/// Stores keep items in ascending id order, so lookups are binary searches.
pub fn find_mut(items: &mut [MemoryItem], id: ItemId) -> Option<&mut MemoryItem> {
    items.binary_search_by_key(&id, |m| m.id).ok().map(move |i| &mut items[i])
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::model::{Direction, OBS_SCHEMA_VERSION};

    pub fn item(id: ItemId, owner: AgentId, t0: Step) -> MemoryItem {
        MemoryItem {
            id,
            kind: MemoryKind::ShortTerm,
            event_type: EventType::Delivery,
            t0,
            location: Cell::new(0, 0),
            obs_prev: Observation { schema: OBS_SCHEMA_VERSION, values: [0.0; OBS_DIM] },
            action: ActionId::Move(Direction::N),
            obs_post: Observation { schema: OBS_SCHEMA_VERSION, values: [0.0; OBS_DIM] },
            reward: 1.0,
            delta: 0.0,
            usage_count: 1,
            success_count: 1,
            owner,
        }
    }
}
