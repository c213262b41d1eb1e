//! Delivery-agent state and the per-agent effect of one step.
//!
//! [`execute`] is a pure function of the start state, the action and the
//! read-only step environment; the world applies its outcome afterwards.

use super::grid::GridMap;
use super::orders::Order;
use super::path::{can_step, direction_between, neighbor, path_length, plan_path, step_cost, PathScratch};
use super::value::ActiveOrderPaths;
use crate::model::{ActionId, Cell, Direction, DynamicState, OrderId, Status, Step, StaticProfile};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub target: Cell,
    pub cells: Vec<Cell>,
    pub pos: usize,
    /// The target was unreachable when planned; the mover waits at blockages.
    pub blocked: bool,
}

impl Route {
    pub fn plan(from: Cell, target: Cell, grid: &GridMap, scratch: &mut PathScratch) -> Route {
        let p = plan_path(from, target, grid, scratch);
        Route { target, cells: p.cells, pos: 0, blocked: p.blocked }
    }

    pub fn arrived(&self) -> bool {
        self.pos >= self.cells.len()
    }

    pub fn remaining(&self, from: Cell) -> f64 {
        path_length(from, &self.cells[self.pos.min(self.cells.len())..])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Leg {
    Pickup,
    Dropoff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub order: OrderId,
    pub leg: Leg,
    pub route: Route,
    pub pickup: Cell,
    pub dropoff: Cell,
    pub l_best: f64,
    pub l_past: f64,
}

impl Task {
    pub fn paths(&self, location: Cell) -> ActiveOrderPaths {
        let mut l_rest = self.route.remaining(location);
        if self.leg == Leg::Pickup {
            l_rest += self.pickup.octile(self.dropoff);
        }
        ActiveOrderPaths { l_best: self.l_best, l_rest, l_past: self.l_past }
    }
}

/// Everything about an agent that a step can change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub dynamics: DynamicState,
    /// Active steps left in the current shift.
    pub shift_left: u32,
    pub active_today: u32,
    pub changes_today: u8,
    /// Off duty while `step < rest_until`.
    pub rest_until: Step,
    pub task: Option<Task>,
    pub transit: Option<Route>,
    pub active_total: u64,
    /// Path figures of the most recently ended task and the step it ended.
    pub last_task: Option<(Step, ActiveOrderPaths)>,
}

impl AgentState {
    pub fn location(&self) -> Cell {
        self.dynamics.location
    }

    /// Steps the agent may still work before its budget runs out.
    pub fn budget(&self, daily_cap: u32) -> u32 {
        self.shift_left.min(daily_cap.saturating_sub(self.active_today))
    }
}

#[derive(Clone, Debug)]
pub struct DeliveryAgent {
    pub statics: StaticProfile,
    pub state: AgentState,
}

/// What the agent does this step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepAction {
    Act(ActionId),
    /// Keep following the current task or transit route.
    Continue,
}

/// Read-only inputs shared by every agent in one step.
pub struct StepEnv<'a> {
    pub grid: &'a GridMap,
    pub orders: &'a [Order],
    pub step: Step,
    /// Path length an agent can cover this step.
    pub reach: f64,
    pub cost_milli: i64,
    pub rest_steps: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub accepted: Option<OrderId>,
    pub picked_up: Option<OrderId>,
    pub delivered: Option<OrderId>,
    pub reward_milli: i64,
    /// Direction of the first cell moved, if any.
    pub first_dir: Option<Direction>,
    pub moved: f64,
}

impl Outcome {
    /// The action as a concrete id, resolving route following to its move.
    pub fn executed(&self, action: StepAction) -> ActionId {
        match action {
            StepAction::Act(a) => a,
            StepAction::Continue => self.first_dir.map_or(ActionId::Stay, ActionId::Move),
        }
    }
}

/// Advances along `route` with at most `reach` path length; replans once when
/// the next cell became impassable. Returns the length moved.
fn follow(loc: &mut Cell, route: &mut Route, mut reach: f64, grid: &GridMap, scratch: &mut PathScratch, out: &mut Outcome) -> f64 {
    let mut moved = 0.0;
    let mut replanned = false;
    while !route.arrived() {
        let next = route.cells[route.pos];
        let Some(dir) = direction_between(*loc, next) else { break };
        let cost = step_cost(dir);
        if cost > reach {
            break;
        }
        if !can_step(grid, *loc, dir) {
            if replanned {
                break;
            }
            replanned = true;
            *route = Route::plan(*loc, route.target, grid, scratch);
            continue;
        }
        *loc = next;
        route.pos += 1;
        reach -= cost;
        moved += cost;
        out.first_dir.get_or_insert(dir);
    }
    out.moved += moved;
    moved
}

fn advance_task(s: &mut AgentState, env: &StepEnv<'_>, mut reach: f64, scratch: &mut PathScratch, out: &mut Outcome) {
    loop {
        let Some(task) = s.task.as_mut() else { return };
        let moved = follow(&mut s.dynamics.location, &mut task.route, reach, env.grid, scratch, out);
        task.l_past += moved;
        reach -= moved;
        if !task.route.arrived() {
            return;
        }
        match task.leg {
            Leg::Pickup => {
                out.picked_up = Some(task.order);
                task.leg = Leg::Dropoff;
                task.route = Route::plan(s.dynamics.location, task.dropoff, env.grid, scratch);
            }
            Leg::Dropoff => {
                let order = &env.orders[task.order as usize];
                out.delivered = Some(task.order);
                out.reward_milli += order.value_milli;
                s.dynamics.earning += order.value_milli;
                s.last_task = Some((env.step, task.paths(s.dynamics.location)));
                s.task = None;
                s.dynamics.status = Status::Idle;
                return;
            }
        }
    }
}

fn straight(loc: &mut Cell, d: Direction, mut reach: f64, grid: &GridMap, out: &mut Outcome) {
    let cost = step_cost(d);
    while cost <= reach && can_step(grid, *loc, d) {
        *loc = neighbor(*loc, d);
        reach -= cost;
        out.moved += cost;
        out.first_dir.get_or_insert(d);
    }
}

/// One on-duty step: survival cost, then the action's effect. `Accept` must
/// already be granted by the caller.
pub fn execute(start: &AgentState, action: StepAction, env: &StepEnv<'_>, scratch: &mut PathScratch) -> (AgentState, Outcome) {
    let mut s = start.clone();
    let mut out = Outcome::default();
    s.active_today += 1;
    s.shift_left = s.shift_left.saturating_sub(1);
    s.active_total += 1;
    s.dynamics.earning -= env.cost_milli;
    out.reward_milli -= env.cost_milli;
    match action {
        StepAction::Continue => {
            if s.task.is_some() {
                advance_task(&mut s, env, env.reach, scratch, &mut out);
            } else if let Some(mut route) = s.transit.take() {
                follow(&mut s.dynamics.location, &mut route, env.reach, env.grid, scratch, &mut out);
                if !route.arrived() {
                    s.transit = Some(route);
                }
            }
        }
        StepAction::Act(ActionId::Move(d)) => straight(&mut s.dynamics.location, d, env.reach, env.grid, &mut out),
        StepAction::Act(ActionId::Stay) => {}
        StepAction::Act(ActionId::Accept(id)) => {
            let order = &env.orders[id as usize];
            let loc = s.dynamics.location;
            s.task = Some(Task {
                order: id,
                leg: Leg::Pickup,
                route: Route::plan(loc, order.start, env.grid, scratch),
                pickup: order.start,
                dropoff: order.end,
                l_best: loc.octile(order.start) + order.distance,
                l_past: 0.0,
            });
            s.transit = None;
            s.dynamics.status = Status::Delivering;
            out.accepted = Some(id);
            advance_task(&mut s, env, env.reach, scratch, &mut out);
        }
        StepAction::Act(ActionId::Rest) => {
            s.rest_until = env.step + 1 + env.rest_steps as Step;
            s.changes_today += 1;
            s.transit = None;
            s.dynamics.status = Status::Inactive;
        }
        StepAction::Act(ActionId::Relocate(r)) => {
            s.dynamics.region = r;
            s.changes_today += 1;
            let target = env.grid.region_center(r);
            let mut route = Route::plan(s.dynamics.location, target, env.grid, scratch);
            follow(&mut s.dynamics.location, &mut route, env.reach, env.grid, scratch, &mut out);
            s.transit = (!route.arrived()).then_some(route);
        }
    }
    (s, out)
}
