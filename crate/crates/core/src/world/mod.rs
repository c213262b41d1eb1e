//! The delivery society and its step loop.
//!
//! One call to [`World::step`] runs these phases in order:
//!
//! 1. weather, congestion and order generation
//! 2. order expiry
//! 3. platform assignment (offers to idle agents)
//! 4. snapshot of orders, offers and memory stores
//! 5. per-agent perceive, policy, memory gate and constraints (parallel)
//! 6. movements, pickups, deliveries, rewards and survival costs
//! 7. memory recording
//! 8. buffer flush: admission, pruning, decay
//! 9. learning updates
//! 10. metrics

pub mod agent;
pub mod assign;
pub mod grid;
pub mod orders;
pub mod path;
pub mod value;

use crate::decision::{gate, DecisionRecord, DecisionSource, PreparedStore};
use crate::harness::config::ExperimentConfig;
use crate::harness::metrics::AgentDailyRow;
use crate::memory::{
    self, admit, decay_sweep, find_mut, prune, record, BufferPool, CollectiveStore, DecayTable, EventType,
    IndividualStore, ItemId, MemoryItem, MemoryKind,
};
use crate::model::{
    ActionId, AgentId, Cell, Direction, DynamicState, LearningType, MemoryModel, Observation, ObservationInputs,
    OrderId, StaticProfile, Status, Step, NUM_REGIONS,
};
use crate::policy::imitation::{imitation_policy, observe_expert, ImitationDataset, LastDecision, Peer};
use crate::policy::qlearning::{q_policy, q_update_over, QTable};
use crate::policy::rule::rule_policy;
use crate::policy::scripted::scripted_policy;
use crate::policy::{ActionMask, DiscreteState, PolicyContext};
use crate::rng::{agent_stream, stream, SeededStream, SETUP_STREAM, WORLD_STREAM};
use agent::{execute, AgentState, DeliveryAgent, Outcome, StepAction, StepEnv};
use grid::{Congestion, GridMap};
use orders::{generate_orders, to_milli, Order, OrderStatus};
use path::{can_step, PathScratch};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use value::{state_value, StateValueInputs};

/// Open orders bucketed on a square grid whose side is at least the scope.
struct OrderIndex {
    side: i32,
    cols: i32,
    rows: i32,
    buckets: Vec<Vec<OrderId>>,
}

impl OrderIndex {
    fn build(orders: &[Order], live: &[OrderId], grid: &GridMap, scope: f64) -> Self {
        let side = (scope.ceil() as i32).max(1);
        let cols = grid.width as i32 / side + 1;
        let rows = grid.height as i32 / side + 1;
        let mut buckets = vec![Vec::new(); (cols * rows) as usize];
        for &id in live {
            let o = &orders[id as usize];
            if o.is_open() {
                buckets[((o.start.y / side) * cols + o.start.x / side) as usize].push(id);
            }
        }
        OrderIndex { side, cols, rows, buckets }
    }

    /// Open orders with `euclid <= scope`, nearest first, ties by id.
    fn within(&self, loc: Cell, scope: f64, orders: &[Order]) -> Vec<(f64, OrderId)> {
        let (bx, by) = (loc.x / self.side, loc.y / self.side);
        let mut out = Vec::new();
        for y in (by - 1).max(0)..=(by + 1).min(self.rows - 1) {
            for x in (bx - 1).max(0)..=(bx + 1).min(self.cols - 1) {
                for &id in &self.buckets[(y * self.cols + x) as usize] {
                    let o = &orders[id as usize];
                    if !o.is_open() {
                        continue;
                    }
                    let d = loc.euclid(o.start);
                    if d <= scope {
                        out.push((d, id));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }
}

/// Decision awaiting its outcome; becomes a memory item at the agent's next
/// decision epoch or when it leaves duty.
#[derive(Clone, Debug)]
struct Pending {
    location: Cell,
    obs_prev: Observation,
    action: ActionId,
    obs_post: Option<Observation>,
    v_now: f64,
    v_next: f64,
    reward_milli: i64,
    /// Order value earned over the span, before survival costs.
    earned_milli: i64,
    matched: Option<ItemId>,
}

#[derive(Clone, Debug, Default)]
struct DayCounters {
    earning_start: i64,
    orders: u32,
    effective: u32,
    memory: u32,
    learning: u32,
}

/// Per-agent bookkeeping outside the executable state.
#[derive(Clone, Debug)]
struct AgentAux {
    on_duty: bool,
    status_now: Status,
    status_prev: Status,
    pending: Option<Pending>,
    q_open: Option<(DiscreteState, usize, f64)>,
    last_decision: Option<LastDecision>,
    day: DayCounters,
}

/// Result of phase 5 for one on-duty agent.
#[derive(Clone, Debug)]
pub struct Intent {
    pub action: StepAction,
    pub decision: Option<DecisionRecord>,
    pub obs: Observation,
    pub state: DiscreteState,
    pub mask: Option<ActionMask>,
    /// Location at the snapshot.
    pub start: Cell,
    /// Reward realised in phase 6.
    pub reward_milli: i64,
    v_now: f64,
}

/// Read-only view of the world at phase 4.
struct Snapshot<'a> {
    index: OrderIndex,
    offers: &'a [Option<OrderId>],
    offered_to: HashMap<OrderId, AgentId>,
    region_orders: [u32; NUM_REGIONS],
    prepared: Option<PreparedStore<'a>>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct WorldCounters {
    pub admissions: u64,
    pub pruned: u64,
    pub decayed: u64,
    pub abandoned: u64,
    pub triples_checked: u64,
    pub triple_mismatches: u64,
}

#[derive(Serialize)]
pub struct WorldSnapshot<'a> {
    pub step: Step,
    pub rain: bool,
    pub agents: Vec<&'a AgentState>,
    pub orders: Vec<&'a Order>,
    pub congestion: &'a [Congestion],
}

pub struct World {
    pub cfg: ExperimentConfig,
    pub step: Step,
    pub grid: GridMap,
    pub orders: Vec<Order>,
    /// Alive or captured order ids, ascending.
    live: Vec<OrderId>,
    pub agents: Vec<DeliveryAgent>,
    rngs: Vec<SeededStream>,
    aux: Vec<AgentAux>,
    world_rng: SeededStream,
    pub rain: bool,
    pub individual: Vec<IndividualStore>,
    pub buffer: BufferPool,
    pub collective: CollectiveStore,
    pub pool: Vec<MemoryItem>,
    pub qtable: QTable,
    pub dataset: ImitationDataset,
    pub decision_log: Option<Vec<DecisionRecord>>,
    pub rows: Vec<AgentDailyRow>,
    pub counters: WorldCounters,
    decay: DecayTable,
    discard_age: Step,
    scratch: PathScratch,
    next_item_id: ItemId,
}

fn cost_milli(cfg: &ExperimentConfig) -> i64 {
    to_milli(cfg.agent.survival_cost)
}

impl World {
    pub fn new(cfg: ExperimentConfig) -> World {
        let cfg = cfg.resolve();
        let grid = GridMap::new(cfg.width, cfg.height);
        let mut setup = stream(cfg.seed, SETUP_STREAM);
        let spd = cfg.steps_per_day;
        let cap = cfg.agent.active_steps_per_day;
        let mut agents = Vec::with_capacity(cfg.n_agents as usize);
        for id in 0..cfg.n_agents {
            let location = Cell::new(setup.random_range(0..cfg.width as i32), setup.random_range(0..cfg.height as i32));
            let shift_start = setup.random_range(0..spd);
            // a window wrapping past midnight is already running at step 0
            let offset = (spd - shift_start) % spd;
            let shift_left = if offset != 0 && offset < cap { cap - offset } else { 0 };
            agents.push(DeliveryAgent {
                statics: StaticProfile {
                    id,
                    speed: cfg.agent.speed,
                    scope: cfg.agent.scope,
                    survival_cost: cost_milli(&cfg),
                    learning: cfg.learning_of(id),
                },
                state: AgentState {
                    dynamics: DynamicState {
                        location,
                        shift_start,
                        region: grid.region_of(location),
                        status: Status::Inactive,
                        earning: 0,
                    },
                    shift_left,
                    active_today: 0,
                    changes_today: 0,
                    rest_until: 0,
                    task: None,
                    transit: None,
                    active_total: 0,
                    last_task: None,
                },
            });
        }
        let n = agents.len();
        let decay = DecayTable::new(cfg.memory.lambda, spd, cfg.steps + 1);
        let discard_age = (0..=cfg.steps + 1)
            .find(|&a| decay.weight(a, 0) < cfg.memory.discard_floor)
            .unwrap_or(Step::MAX);
        World {
            step: 0,
            rngs: (0..n as u32).map(|i| agent_stream(cfg.seed, i)).collect(),
            aux: vec![
                AgentAux {
                    on_duty: false,
                    status_now: Status::Inactive,
                    status_prev: Status::Inactive,
                    pending: None,
                    q_open: None,
                    last_decision: None,
                    day: DayCounters::default(),
                };
                n
            ],
            world_rng: stream(cfg.seed, WORLD_STREAM),
            rain: false,
            individual: (0..n as u32).map(IndividualStore::new).collect(),
            buffer: BufferPool::default(),
            collective: CollectiveStore::new(cfg.memory.k),
            pool: Vec::new(),
            qtable: QTable::default(),
            dataset: ImitationDataset::default(),
            decision_log: cfg.output.decision_log.then(Vec::new),
            rows: Vec::new(),
            counters: WorldCounters::default(),
            decay,
            discard_age,
            scratch: PathScratch::default(),
            next_item_id: 0,
            grid,
            orders: Vec::new(),
            live: Vec::new(),
            agents,
            cfg,
        }
    }

    pub fn steps_per_day(&self) -> u32 {
        self.cfg.steps_per_day
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.cfg.steps
    }

    pub fn on_duty(&self, agent: AgentId) -> bool {
        self.aux[agent as usize].on_duty
    }

    fn reach(&self) -> f64 {
        if self.rain {
            self.cfg.agent.speed * self.cfg.environment.rain_speed_factor
        } else {
            self.cfg.agent.speed
        }
    }

    /// Runs every phase of one step.
    pub fn step(&mut self) {
        let t = self.step;
        let tod = (t % self.steps_per_day() as u64) as u32;
        self.clock(t, tod);
        self.environment(t, tod);
        self.generate(t);
        self.expire(t);
        let offers = self.assign();
        self.advance_status_history();
        let mut rngs = std::mem::take(&mut self.rngs);
        let mut intents = {
            let snap = self.snapshot(&offers, t);
            self.decide(&snap, t, &mut rngs)
        };
        self.rngs = rngs;
        let fresh = self.apply(&mut intents, &offers, t);
        self.record(fresh, t);
        self.flush(t);
        self.learn(&intents, t);
        self.metrics(&intents, tod);
        self.step += 1;
    }

    pub fn run_to_end(&mut self) {
        while !self.is_done() {
            self.step();
        }
    }

    fn clock(&mut self, t: Step, tod: u32) {
        let cap = self.cfg.agent.active_steps_per_day;
        for (i, a) in self.agents.iter_mut().enumerate() {
            let s = &mut a.state;
            if tod == 0 {
                s.active_today = 0;
                s.changes_today = 0;
            }
            if tod == s.dynamics.shift_start {
                s.shift_left = cap;
            }
            // resting uses up the working window without being charged
            if t < s.rest_until {
                s.shift_left = s.shift_left.saturating_sub(1);
            }
            let on = t >= s.rest_until && s.shift_left > 0 && s.active_today < cap;
            if !on {
                if let Some(task) = s.task.take() {
                    let o = &mut self.orders[task.order as usize];
                    o.transition(OrderStatus::Dead, t);
                    o.assigned_to = None;
                    s.last_task = Some((t, task.paths(s.dynamics.location)));
                    self.counters.abandoned += 1;
                    self.live.retain(|&id| id != task.order);
                }
                s.transit = None;
                s.dynamics.status = Status::Inactive;
            } else if s.dynamics.status == Status::Inactive {
                s.dynamics.status = Status::Idle;
            }
            self.aux[i].on_duty = on;
        }
    }

    fn environment(&mut self, t: Step, tod: u32) {
        let env = &self.cfg.environment;
        if env.weather && tod == 0 {
            let p = if self.rain { env.rain_stop_prob } else { env.rain_start_prob };
            if self.world_rng.random::<f64>() < p {
                self.rain = !self.rain;
            }
        }
        self.grid.expire_congestion(t);
        if self.world_rng.random::<f64>() < env.congestion_prob {
            let w = self.world_rng.random_range(env.congestion_min_side..=env.congestion_max_side).min(self.cfg.width);
            let h = self.world_rng.random_range(env.congestion_min_side..=env.congestion_max_side).min(self.cfg.height);
            let x0 = self.world_rng.random_range(0..=(self.cfg.width - w)) as i32;
            let y0 = self.world_rng.random_range(0..=(self.cfg.height - h)) as i32;
            let dur = self.world_rng.random_range(env.congestion_min_steps..=env.congestion_max_steps);
            self.grid.congestion.push(Congestion {
                x0,
                y0,
                x1: x0 + w as i32 - 1,
                y1: y0 + h as i32 - 1,
                until: t + dur as Step - 1,
            });
        }
    }

    fn generate(&mut self, t: Step) {
        let fresh = generate_orders(
            t,
            self.steps_per_day(),
            &mut self.world_rng,
            &self.cfg.generator,
            &self.grid,
            self.cfg.agent.speed,
            self.orders.len() as OrderId,
        );
        for o in fresh {
            self.live.push(o.id);
            self.orders.push(o);
        }
    }

    fn expire(&mut self, t: Step) {
        let orders = &mut self.orders;
        let agents = &mut self.agents;
        self.live.retain(|&id| {
            let o = &mut orders[id as usize];
            if !o.expired_at(t) {
                return true;
            }
            if let Some(carrier) = o.assigned_to.take() {
                let s = &mut agents[carrier as usize].state;
                if let Some(task) = s.task.take() {
                    s.last_task = Some((t, task.paths(s.dynamics.location)));
                }
                s.dynamics.status = Status::Idle;
            }
            o.transition(OrderStatus::Dead, t);
            false
        });
    }

    fn assign(&self) -> Vec<Option<OrderId>> {
        let idle: Vec<(AgentId, Cell)> = self
            .agents
            .iter()
            .filter(|a| self.aux[a.statics.id as usize].on_duty && a.state.task.is_none())
            .map(|a| (a.statics.id, a.state.location()))
            .collect();
        let open: Vec<(OrderId, Cell)> = self
            .live
            .iter()
            .map(|&id| &self.orders[id as usize])
            .filter(|o| o.is_open())
            .map(|o| (o.id, o.start))
            .collect();
        let mut offers = vec![None; self.agents.len()];
        for a in assign::assign_orders(&open, &idle, self.cfg.agent.scope) {
            offers[a.agent as usize] = Some(a.order);
        }
        offers
    }

    fn advance_status_history(&mut self) {
        for (a, x) in self.agents.iter().zip(self.aux.iter_mut()) {
            x.status_prev = x.status_now;
            x.status_now = a.state.dynamics.status;
        }
    }

    fn snapshot<'a>(&'a self, offers: &'a [Option<OrderId>], t: Step) -> Snapshot<'a> {
        let index = OrderIndex::build(&self.orders, &self.live, &self.grid, self.cfg.agent.scope);
        let mut region_orders = [0u32; NUM_REGIONS];
        for &id in &self.live {
            let o = &self.orders[id as usize];
            if o.is_open() {
                region_orders[self.grid.region_of(o.start) as usize] += 1;
            }
        }
        let offered_to = offers
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.map(|o| (o, i as AgentId)))
            .collect();
        let prepared = match self.cfg.memory_model {
            MemoryModel::Mmdm => Some(PreparedStore::credibility(&self.collective.items, t, &self.cfg.credibility, &self.decay)),
            MemoryModel::Replay => Some(PreparedStore::baseline(&self.pool, t, &self.decay)),
            _ => None,
        };
        Snapshot { index, offers, offered_to, region_orders, prepared }
    }

    fn observe(&self, loc: Cell, status: Status, in_scope: &[(f64, OrderId)], tod: u32) -> Observation {
        Observation::encode(&ObservationInputs {
            location: loc,
            width: self.cfg.width,
            height: self.cfg.height,
            status,
            time_of_day: tod,
            steps_per_day: self.steps_per_day(),
            orders_in_scope: in_scope.len(),
            nearest_order: in_scope.first().map(|x| x.0),
            scope: self.cfg.agent.scope,
            congestion: self.grid.congestion_within(loc, self.cfg.agent.scope),
            rain: self.rain,
        })
    }

    fn decide(&self, snap: &Snapshot<'_>, t: Step, rngs: &mut [SeededStream]) -> Vec<Option<Intent>> {
        rngs.par_iter_mut().enumerate().map(|(i, rng)| self.step_agent(i, snap, t, rng)).collect()
    }

    /// Perceive, choose and constrain one agent's action for this step.
    fn step_agent(&self, i: usize, snap: &Snapshot<'_>, t: Step, rng: &mut SeededStream) -> Option<Intent> {
        if !self.aux[i].on_duty {
            return None;
        }
        let a = &self.agents[i];
        let s = &a.state;
        let loc = s.location();
        let spd = self.steps_per_day();
        let tod = (t % spd as u64) as u32;
        let scope = self.cfg.agent.scope;
        let in_scope = snap.index.within(loc, scope, &self.orders);
        let obs = self.observe(loc, s.dynamics.status, &in_scope, tod);
        let dstate = DiscreteState::new(self.grid.region_of(loc), tod, spd, in_scope.len(), s.dynamics.status);
        let continuing = Intent {
            action: StepAction::Continue,
            decision: None,
            obs,
            state: dstate,
            mask: None,
            start: loc,
            reward_milli: 0,
            v_now: 0.0,
        };
        if s.task.is_some() {
            return Some(continuing);
        }
        // acceptable orders: not offered elsewhere and finishable within budget
        let per_step = self.reach() - std::f64::consts::SQRT_2;
        let budget = s.budget(self.cfg.agent.active_steps_per_day) as f64;
        let feasible = |id: OrderId| {
            let o = &self.orders[id as usize];
            ((loc.octile(o.start) + o.distance) / per_step).ceil() <= budget
        };
        let offered = snap.offers[i].filter(|&id| feasible(id));
        let accept_target = offered.or_else(|| {
            in_scope
                .iter()
                .map(|x| x.1)
                .find(|id| snap.offered_to.get(id).is_none_or(|&o| o as usize == i) && feasible(*id))
        });
        if s.transit.is_some() && accept_target.is_none() {
            return Some(continuing);
        }
        let mut mask = ActionMask::none();
        for d in Direction::ALL {
            mask.0[d.index()] = can_step(&self.grid, loc, d);
        }
        mask.0[ActionId::Stay.class()] = true;
        mask.0[ActionId::Accept(0).class()] = accept_target.is_some();
        let can_change = s.changes_today < self.cfg.agent.max_daily_changes;
        mask.0[ActionId::Rest.class()] = can_change;
        for r in 0..NUM_REGIONS as u8 {
            mask.0[ActionId::Relocate(r).class()] = can_change && r != s.dynamics.region;
        }
        let ctx = PolicyContext {
            obs: &obs,
            state: dstate,
            mask,
            accept_target,
            orders_in_scope: in_scope.len(),
            region: s.dynamics.region,
            region_orders: snap.region_orders,
        };
        let learning_action = match a.statics.learning {
            LearningType::Rule => rule_policy(&ctx, rng),
            LearningType::Imitation => imitation_policy(&ctx, &self.dataset, &self.cfg.imitation, rng),
            LearningType::Qlearning => {
                let eps = self.cfg.qlearning.epsilon(t, self.cfg.steps);
                q_policy(&self.qtable, &ctx, eps, rng)
            }
            LearningType::Scripted => scripted_policy(&ctx, &self.cfg.script),
        };
        // only memories whose action can be carried out now are candidates
        let applicable = |a: ActionId| mask.allows(a.class());
        let candidate = match self.cfg.memory_model {
            MemoryModel::None => None,
            MemoryModel::Mmdm | MemoryModel::Replay => {
                snap.prepared.as_ref().and_then(|p| p.best_where(&obs, None, applicable))
            }
            MemoryModel::Episodic => {
                PreparedStore::baseline(&self.individual[i].items, t, &self.decay).best_where(&obs, None, applicable)
            }
        };
        let mut rec = gate(i as AgentId, t, candidate, learning_action, self.cfg.credibility.theta_memory);
        let action = constrain(ctx.rebind(rec.chosen_action), &ctx);
        rec.chosen_action = action;
        let active = s.last_task.filter(|(end, _)| end + 1 >= t).map(|x| x.1);
        let v_now = state_value(
            &StateValueInputs {
                active,
                n_orders_in_scope: in_scope.len(),
                status_now: self.aux[i].status_now,
                status_prev: self.aux[i].status_prev,
            },
            scope,
        );
        Some(Intent {
            action: StepAction::Act(action),
            decision: Some(rec),
            obs,
            state: dstate,
            mask: Some(mask),
            start: loc,
            reward_milli: 0,
            v_now,
        })
    }

    /// Executes all intents in ascending agent id. Returns the agents that
    /// opened a new pending memory record.
    fn apply(&mut self, intents: &mut [Option<Intent>], offers: &[Option<OrderId>], t: Step) -> Vec<usize> {
        // offered orders go to their offeree, the rest to the lowest id
        let mut claimed: HashMap<OrderId, usize> = HashMap::new();
        for (i, it) in intents.iter().enumerate() {
            if let Some(Intent { action: StepAction::Act(ActionId::Accept(id)), .. }) = it {
                if offers[i] == Some(*id) {
                    claimed.insert(*id, i);
                }
            }
        }
        for (i, it) in intents.iter_mut().enumerate() {
            let Some(it) = it else { continue };
            if let StepAction::Act(ActionId::Accept(id)) = it.action {
                let winner = *claimed.entry(id).or_insert(i);
                if winner != i {
                    it.action = StepAction::Act(ActionId::Stay);
                    if let Some(d) = it.decision.as_mut() {
                        d.chosen_action = ActionId::Stay;
                    }
                }
            }
        }
        let reach = self.reach();
        let check = self.cfg.output.check_triples;
        let track_memory = self.cfg.memory_model != MemoryModel::None;
        let World { grid, orders, agents, aux, scratch, counters, decision_log, .. } = self;
        let env = StepEnv {
            grid,
            orders,
            step: t,
            reach,
            cost_milli: agents.first().map_or(0, |a| a.statics.survival_cost),
            rest_steps: self.cfg.agent.rest_steps,
        };
        let mut outcomes: Vec<Option<Outcome>> = vec![None; agents.len()];
        let mut fresh = Vec::new();
        let mut finalized: Vec<(usize, Pending)> = Vec::new();
        for i in 0..agents.len() {
            let Some(it) = intents[i].as_ref() else {
                if let Some(p) = aux[i].pending.take() {
                    finalized.push((i, p));
                }
                continue;
            };
            let (next, out) = execute(&agents[i].state, it.action, &env, scratch);
            if check {
                let again = execute(&agents[i].state, it.action, &env, &mut PathScratch::default());
                counters.triples_checked += 1;
                if again != (next.clone(), out.clone()) {
                    counters.triple_mismatches += 1;
                }
            }
            let start_loc = agents[i].state.location();
            agents[i].state = next;
            if let Some(d) = it.decision.as_ref() {
                if let Some(log) = decision_log.as_mut() {
                    log.push(d.clone());
                }
                if track_memory {
                    if let Some(p) = aux[i].pending.take() {
                        finalized.push((i, p));
                    }
                    aux[i].pending = Some(Pending {
                        location: start_loc,
                        obs_prev: it.obs,
                        action: out.executed(it.action),
                        obs_post: None,
                        v_now: it.v_now,
                        v_next: 0.0,
                        reward_milli: out.reward_milli,
                        earned_milli: out.reward_milli + env.cost_milli,
                        matched: d.matched_item.filter(|_| d.source == DecisionSource::Memory),
                    });
                    fresh.push(i);
                }
            } else if let Some(p) = aux[i].pending.as_mut() {
                p.reward_milli += out.reward_milli;
                p.earned_milli += out.reward_milli + env.cost_milli;
            }
            outcomes[i] = Some(out);
        }
        for (i, out) in outcomes.iter().enumerate() {
            let Some(out) = out else { continue };
            if let Some(id) = out.accepted {
                let o = &mut orders[id as usize];
                o.transition(OrderStatus::Captured, t);
                o.assigned_to = Some(i as AgentId);
            }
            if let Some(id) = out.delivered {
                orders[id as usize].transition(OrderStatus::Delivered, t);
            }
            let x = &mut aux[i].day;
            x.orders += u32::from(out.delivered.is_some());
            let had_task = agents[i].state.task.is_some() || out.delivered.is_some();
            x.effective += u32::from(had_task);
        }
        let orders = &self.orders;
        self.live.retain(|&id| matches!(orders[id as usize].status, OrderStatus::Alive | OrderStatus::Captured));
        self.stage_finalized(finalized, t);
        for (i, out) in outcomes.into_iter().enumerate() {
            if let (Some(out), Some(it)) = (out, intents[i].as_mut()) {
                it.action = StepAction::Act(out.executed(it.action));
                it.reward_milli = out.reward_milli;
            }
        }
        fresh
    }

    /// Turns finished pending decisions into memory items in the buffer and
    /// individual stores, and credits usage of replayed items.
    fn stage_finalized(&mut self, finalized: Vec<(usize, Pending)>, t: Step) {
        for (i, p) in finalized {
            let Some(obs_post) = p.obs_post else { continue };
            let reward = p.reward_milli as f64 / 1000.0;
            // survival cost does not depend on the action, so success is
            // judged on what the decision earned
            let positive = p.earned_milli > 0;
            if let Some(id) = p.matched {
                let target = match self.cfg.memory_model {
                    MemoryModel::Mmdm => find_mut(&mut self.collective.items, id),
                    MemoryModel::Episodic => find_mut(&mut self.individual[i].items, id),
                    MemoryModel::Replay => find_mut(&mut self.pool, id),
                    MemoryModel::None => None,
                };
                if let Some(m) = target {
                    m.mark_usage(positive);
                }
            }
            let event_type = if p.obs_prev.values[7] > 0.0 {
                EventType::Traffic
            } else if p.obs_prev.values[8] > 0.0 {
                EventType::Weather
            } else {
                EventType::Delivery
            };
            let item = MemoryItem {
                id: self.next_item_id,
                kind: MemoryKind::ShortTerm,
                event_type,
                t0: t,
                location: p.location,
                obs_prev: p.obs_prev,
                action: p.action,
                obs_post,
                reward,
                delta: memory::value_error(p.v_now, p.v_next, self.cfg.memory.gamma),
                usage_count: 1,
                success_count: u32::from(positive),
                owner: i as AgentId,
            };
            self.next_item_id += 1;
            record(item, &mut self.individual[i], &mut self.buffer);
        }
    }

    /// Fills the post-action observation and value of fresh decisions.
    fn record(&mut self, fresh: Vec<usize>, t: Step) {
        if fresh.is_empty() {
            return;
        }
        let tod = (t % self.steps_per_day() as u64) as u32;
        let index = OrderIndex::build(&self.orders, &self.live, &self.grid, self.cfg.agent.scope);
        let scope = self.cfg.agent.scope;
        for i in fresh {
            let s = &self.agents[i].state;
            let loc = s.location();
            let in_scope = index.within(loc, scope, &self.orders);
            let obs = self.observe(loc, s.dynamics.status, &in_scope, tod);
            let active = match &s.task {
                Some(task) => Some(task.paths(loc)),
                None => s.last_task.filter(|(end, _)| *end == t).map(|x| x.1),
            };
            let v_next = state_value(
                &StateValueInputs {
                    active,
                    n_orders_in_scope: in_scope.len(),
                    status_now: s.dynamics.status,
                    status_prev: self.aux[i].status_now,
                },
                scope,
            );
            if let Some(p) = self.aux[i].pending.as_mut() {
                p.obs_post = Some(obs);
                p.v_next = v_next;
            }
        }
    }

    fn flush(&mut self, t: Step) {
        let params = self.cfg.memory.clone();
        match self.cfg.memory_model {
            MemoryModel::None => {}
            MemoryModel::Episodic => self.buffer.items.clear(),
            MemoryModel::Replay => {
                self.pool.append(&mut self.buffer.items);
                self.counters.decayed += self.sweep_pool(t, &params);
            }
            MemoryModel::Mmdm => {
                let log = admit(&mut self.buffer, &mut self.collective, &params, t);
                self.counters.admissions += log.len() as u64;
                self.counters.pruned += prune(&mut self.collective, t, &params) as u64;
                if self.collective.items.first().is_some_and(|m| m.t0.saturating_add(self.discard_age) <= t) {
                    self.counters.decayed += decay_sweep(&mut self.collective.items, t, &params) as u64;
                }
            }
        }
        for store in &mut self.individual {
            if store.items.first().is_some_and(|m| m.t0.saturating_add(self.discard_age) <= t) {
                self.counters.decayed += decay_sweep(&mut store.items, t, &params) as u64;
            }
        }
    }

    fn sweep_pool(&mut self, t: Step, params: &memory::MemoryParams) -> u64 {
        if self.pool.first().is_some_and(|m| m.t0.saturating_add(self.discard_age) <= t) {
            decay_sweep(&mut self.pool, t, params) as u64
        } else {
            0
        }
    }

    fn learn(&mut self, intents: &[Option<Intent>], t: Step) {
        let q = self.cfg.qlearning.clone();
        for (i, it) in intents.iter().enumerate() {
            let Some(it) = it else { continue };
            if self.agents[i].statics.learning != LearningType::Qlearning {
                continue;
            }
            let StepAction::Act(executed) = it.action else { continue };
            let class = executed.class();
            let available: Vec<usize> = match it.mask {
                Some(m) => m.classes().collect(),
                None => vec![class],
            };
            if let Some((s, a, r)) = self.aux[i].q_open.take() {
                q_update_over(&mut self.qtable, s, a, r, it.state, &available, q.alpha, q.gamma);
            }
            let reward = it.reward_milli as f64 / 1000.0;
            self.aux[i].q_open = Some((it.state, class, reward));
        }
        let mut cells: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
        let mut any_imitator = false;
        for (i, it) in intents.iter().enumerate() {
            if let Some(x) = it {
                if let (Some(_), StepAction::Act(action)) = (&x.decision, x.action) {
                    self.aux[i].last_decision = Some(LastDecision { step: t, obs: x.obs, action });
                }
                cells.entry(it.as_ref().unwrap().start).or_default().push(i);
                any_imitator |= self.agents[i].statics.learning == LearningType::Imitation;
            }
        }
        if !any_imitator {
            return;
        }
        for (i, it) in intents.iter().enumerate() {
            if it.is_none() || self.agents[i].statics.learning != LearningType::Imitation {
                continue;
            }
            let here = &cells[&it.as_ref().unwrap().start];
            let peers: Vec<Peer> = here
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    Peer { id: j as AgentId, earning: self.agents[j].state.dynamics.earning, last: self.aux[j].last_decision }
                })
                .collect();
            observe_expert(&mut self.dataset, self.agents[i].state.dynamics.earning, &peers);
        }
    }

    fn metrics(&mut self, intents: &[Option<Intent>], tod: u32) {
        for (i, it) in intents.iter().enumerate() {
            if let Some(d) = it.as_ref().and_then(|x| x.decision.as_ref()) {
                match d.source {
                    DecisionSource::Memory => self.aux[i].day.memory += 1,
                    DecisionSource::Learning => self.aux[i].day.learning += 1,
                }
            }
        }
        if tod + 1 == self.steps_per_day() {
            let day = self.step / self.steps_per_day() as u64;
            for (i, a) in self.agents.iter().enumerate() {
                let c = std::mem::take(&mut self.aux[i].day);
                self.rows.push(AgentDailyRow {
                    day,
                    agent_id: i as AgentId,
                    learning: a.statics.learning,
                    memory_model: self.cfg.memory_model,
                    profit_milli: a.state.dynamics.earning - c.earning_start,
                    orders_completed: c.orders,
                    effective_steps: c.effective,
                    decisions_memory: c.memory,
                    decisions_learning: c.learning,
                });
                self.aux[i].day.earning_start = a.state.dynamics.earning;
            }
        }
    }

    pub fn snapshot_export(&self) -> WorldSnapshot<'_> {
        WorldSnapshot {
            step: self.step,
            rain: self.rain,
            agents: self.agents.iter().map(|a| &a.state).collect(),
            orders: self.live.iter().map(|&id| &self.orders[id as usize]).collect(),
            congestion: &self.grid.congestion,
        }
    }
}

/// Illegal actions degrade to staying in place.
fn constrain(action: ActionId, ctx: &PolicyContext<'_>) -> ActionId {
    let ok = match action {
        ActionId::Accept(id) => ctx.accept_target == Some(id),
        other => ctx.mask.allows(other.class()),
    };
    if ok {
        action
    } else {
        ActionId::Stay
    }
}
