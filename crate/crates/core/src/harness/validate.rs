//! Oracle suites behind the `validate` subcommand.

use super::config::ExperimentConfig;
use super::run::simulate;
use crate::decision::{gate, DecisionRecord, DecisionSource, MemoryMatch};
use crate::memory::{
    admit, decay_sweep, feature_max_distance, prune, prune_items, score, BufferPool, CollectiveStore, EventType,
    ItemId, MemoryItem, MemoryKind, MemoryParams,
};
use crate::model::{ActionId, Cell, MemoryModel, Observation, OBS_DIM, OBS_RANGES, OBS_SCHEMA_VERSION};
use crate::rng::{stream, SeededStream};
use crate::world::assign::assign_orders;
use crate::world::orders::{gn, GeneratorParams};
use rand::Rng;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Random memory item on a coarse lattice so duplicates and score ties occur.
pub fn random_item(rng: &mut SeededStream, id: ItemId, max_t0: u64) -> MemoryItem {
    let mut obs = || {
        let mut v = [0.0; OBS_DIM];
        for (x, r) in v.iter_mut().zip(OBS_RANGES) {
            *x = rng.random_range(0..=4) as f64 / 4.0 * r;
        }
        Observation { schema: OBS_SCHEMA_VERSION, values: v }
    };
    let (obs_prev, obs_post) = (obs(), obs());
    let usage = rng.random_range(1..=4u32);
    MemoryItem {
        id,
        kind: MemoryKind::ShortTerm,
        event_type: EventType::Delivery,
        t0: rng.random_range(0..=max_t0),
        location: Cell::new(0, 0),
        obs_prev,
        action: ActionId::from_class(rng.random_range(0..9)).unwrap_or(ActionId::Stay),
        obs_post,
        reward: 0.0,
        delta: rng.random_range(-8..=8) as f64 / 4.0,
        usage_count: usage,
        success_count: rng.random_range(0..=usage),
        owner: rng.random_range(0..5),
    }
}

fn brute_rarity(item: &MemoryItem, shared: &[MemoryItem]) -> f64 {
    let feat = |m: &MemoryItem| {
        let mut v: Vec<f64> = m.obs_prev.values.to_vec();
        for c in 0..crate::model::NUM_ACTION_CLASSES {
            v.push(if c == m.action.class() { 1.0 / (crate::model::NUM_ACTION_CLASSES as f64).sqrt() } else { 0.0 });
        }
        v.extend_from_slice(&m.obs_post.values);
        v
    };
    let a = feat(item);
    shared
        .iter()
        .map(|s| {
            let b = feat(s);
            let d = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            (d / feature_max_distance()).min(1.0)
        })
        .fold(1.0, f64::min)
}

pub fn decay_horizon() -> Check {
    let p = MemoryParams::default();
    let spd = p.steps_per_day as u64;
    let mk = |t0| MemoryItem { t0, ..random_item(&mut stream(0, 0), 0, 0) };
    let mut items = vec![mk(0)];
    let kept_21 = decay_sweep(&mut items, 21 * spd, &p) == 0 && items.len() == 1;
    let gone_22 = decay_sweep(&mut items, 22 * spd, &p) == 1 && items.is_empty();
    check("decay_horizon", kept_21 && gone_22, format!("kept at 21d: {kept_21}, discarded at 22d: {gone_22}"))
}

pub fn admission_oracle(fixtures: usize, seed: u64) -> Check {
    let p = MemoryParams::default();
    let mut rng = stream(seed, 11);
    let mut bad = 0;
    for f in 0..fixtures {
        let n_shared = rng.random_range(0..=50);
        let n_buf = rng.random_range(0..=50);
        let shared: Vec<MemoryItem> = (0..n_shared).map(|i| random_item(&mut rng, i, 100)).collect();
        let buf: Vec<MemoryItem> = (0..n_buf).map(|i| random_item(&mut rng, 1000 + i, 100)).collect();
        let expect: Vec<ItemId> = buf
            .iter()
            .filter(|m| m.delta.abs() > p.theta_value || brute_rarity(m, &shared) > p.theta_rare)
            .map(|m| m.id)
            .collect();
        let mut store = CollectiveStore { items: shared.clone(), capacity: usize::MAX };
        let mut buffer = BufferPool { items: buf };
        let log = admit(&mut buffer, &mut store, &p, f as u64);
        let got: Vec<ItemId> = log.iter().map(|a| a.item_id).collect();
        let tail: Vec<ItemId> = store.items[shared.len()..].iter().map(|m| m.id).collect();
        if got != expect || tail != expect || !buffer.items.is_empty() {
            bad += 1;
        }
    }
    check("admission_oracle", bad == 0, format!("{} fixtures, {bad} disagreements", fixtures))
}

/// Reference prune: sort by the documented key, take `k`, restore insertion order.
pub fn reference_prune(items: &[MemoryItem], k: usize, now: u64, p: &MemoryParams) -> Vec<ItemId> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| {
        let (sa, sb) = (score(&items[a], now, p), score(&items[b], now, p));
        sb.total_cmp(&sa)
            .then(items[b].t0.cmp(&items[a].t0))
            .then(items[a].owner.cmp(&items[b].owner))
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].id).collect()
}

pub fn prune_oracle(stores: usize, max_items: usize, seed: u64) -> Check {
    let p = MemoryParams::default();
    let mut rng = stream(seed, 12);
    let mut bad = 0;
    for s in 0..stores {
        let n = rng.random_range(0..=max_items) as u64;
        let items: Vec<MemoryItem> = (0..n).map(|i| random_item(&mut rng, i, 3600)).collect();
        let k = if s % 2 == 0 { 4000 } else { rng.random_range(1..=max_items.max(1)) };
        let now = 3600;
        let expect = reference_prune(&items, k, now, &p);
        let mut got = items.clone();
        prune_items(&mut got, k, now, &p);
        if got.iter().map(|m| m.id).collect::<Vec<_>>() != expect {
            bad += 1;
        }
    }
    check("prune_oracle", bad == 0, format!("{stores} stores, {bad} disagreements"))
}

pub fn capacity_check(k: usize, admitted: usize) -> Check {
    let p = MemoryParams { k, ..MemoryParams::default() };
    let mut rng = stream(7, 13);
    let mut store = CollectiveStore::new(k);
    let mut buffer = BufferPool {
        items: (0..admitted as u64).map(|i| MemoryItem { delta: 5.0, ..random_item(&mut rng, i, 10) }).collect(),
    };
    let n = admit(&mut buffer, &mut store, &p, 10).len();
    prune(&mut store, 10, &p);
    check("capacity", n == admitted && store.items.len() == k.min(admitted), format!("admitted {n}, kept {} (k={k})", store.items.len()))
}

pub fn gn_oracle(points: usize, seed: u64) -> Check {
    let p = GeneratorParams::default();
    let direct = |x: f64| {
        let (a, b, c) = (p.a, p.b, p.c);
        a[0] * (-((x - b[0]) / c[0]) * ((x - b[0]) / c[0])).exp()
            + a[1] * (-((x - b[1]) / c[1]) * ((x - b[1]) / c[1])).exp()
            + a[2] * (-((x - b[2]) / c[2]) * ((x - b[2]) / c[2])).exp()
            + a[3] * (-((x - b[3]) / c[3]) * ((x - b[3]) / c[3])).exp()
            + a[4] * (-((x - b[4]) / c[4]) * ((x - b[4]) / c[4])).exp()
    };
    let mut rng = stream(seed, 14);
    let mut worst: f64 = 0.0;
    for i in 0..points {
        let x = if i % 2 == 0 { rng.random_range(0.0..360.0) } else { (i / 2) as f64 % 360.0 };
        worst = worst.max((gn(x, &p) - direct(x)).abs());
    }
    let r1 = (gn(172.5, &p) - 334.6).abs() < 0.1;
    let r2 = (gn(281.5, &p) - 223.6).abs() < 0.1;
    check("gn_oracle", worst <= 1e-9 && r1 && r2, format!("max |err| {worst:.2e}, reference points {r1}/{r2}"))
}

fn brute_assignment(cost: &[Vec<Option<f64>>]) -> (usize, f64) {
    fn go(r: usize, cost: &[Vec<Option<f64>>], used: &mut Vec<bool>, n: usize, c: f64, best: &mut (usize, f64)) {
        if r == cost.len() {
            if n > best.0 || (n == best.0 && c < best.1 - 1e-9) {
                *best = (n, c);
            }
            return;
        }
        go(r + 1, cost, used, n, c, best);
        for j in 0..used.len() {
            if let (false, Some(w)) = (used[j], cost[r][j]) {
                used[j] = true;
                go(r + 1, cost, used, n + 1, c + w, best);
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0.0);
    let cols = cost.first().map_or(0, |r| r.len());
    go(0, cost, &mut vec![false; cols], 0, 0.0, &mut best);
    best
}

pub fn assignment_oracle(instances: usize, seed: u64) -> Check {
    let mut rng = stream(seed, 15);
    let mut bad = 0;
    for _ in 0..instances {
        let na = rng.random_range(0..=6);
        let no = rng.random_range(0..=6);
        let agents: Vec<(u32, Cell)> = (0..na).map(|i| (i, Cell::new(rng.random_range(0..40), rng.random_range(0..40)))).collect();
        let orders: Vec<(u32, Cell)> = (0..no).map(|i| (i, Cell::new(rng.random_range(0..40), rng.random_range(0..40)))).collect();
        let scope = 20.0;
        let cost: Vec<Vec<Option<f64>>> = agents
            .iter()
            .map(|a| orders.iter().map(|o| (a.1.euclid(o.1) <= scope).then(|| a.1.octile(o.1))).collect())
            .collect();
        let (n, c) = brute_assignment(&cost);
        let got = assign_orders(&orders, &agents, scope);
        let gc: f64 = got.iter().map(|a| a.cost).sum();
        if got.len() != n || (gc - c).abs() > 1e-6 {
            bad += 1;
        }
    }
    check("assignment_oracle", bad == 0, format!("{instances} instances, {bad} disagreements"))
}

/// Every record's source must agree with `C > theta`.
pub fn gate_violations(records: &[DecisionRecord], theta: f64) -> usize {
    records.iter().filter(|r| !r.is_sound(theta)).count()
}

pub fn gate_soundness(cfg: &ExperimentConfig) -> Check {
    let mut cfg = cfg.clone();
    cfg.output.decision_log = true;
    let theta = cfg.credibility.theta_memory;
    match simulate(&cfg, None) {
        Ok(w) => {
            let log = w.decision_log.unwrap_or_default();
            let memory = log.iter().filter(|r| r.source == DecisionSource::Memory).count();
            let v = gate_violations(&log, theta);
            check("gate_soundness", v == 0, format!("{} decisions, {memory} from memory, {v} violations", log.len()))
        }
        Err(e) => check("gate_soundness", false, e.to_string()),
    }
}

/// Gates with a patched threshold of 0 and audits at the configured one; the
/// audit has to catch the fault.
pub fn gate_fault_injection() -> Check {
    let mut rng = stream(3, 16);
    let records: Vec<DecisionRecord> = (0..200)
        .map(|i| {
            let c = rng.random_range(0.0..1.0);
            let m = MemoryMatch { action: ActionId::Stay, score: c, item_id: i, t0: 0, owner: 0 };
            gate(0, i, Some(m), ActionId::Rest, 0.0)
        })
        .collect();
    let caught = gate_violations(&records, 0.7);
    check("gate_fault_injection", caught > 0, format!("{caught} violations detected with theta patched to 0"))
}

pub fn validate_all() -> Vec<Check> {
    let gate_cfg = ExperimentConfig { n_agents: 20, steps: 720, memory_model: MemoryModel::Mmdm, ..ExperimentConfig::desk() };
    vec![
        decay_horizon(),
        admission_oracle(1000, 1),
        prune_oracle(20, 2000, 2),
        capacity_check(10, 20),
        gn_oracle(1000, 3),
        assignment_oracle(500, 4),
        gate_soundness(&gate_cfg),
        gate_fault_injection(),
    ]
}
