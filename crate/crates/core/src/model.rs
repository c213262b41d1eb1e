//! Scenario-agnostic agent vocabulary: identifiers, the action set, agent
//! status, static/dynamic attribute blocks and the observation encoding.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;

pub type AgentId = u32;
pub type OrderId = u32;
pub type Step = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn euclid(self, other: Cell) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// Shortest 8-connected path length on an obstacle-free grid.
    pub fn octile(self, other: Cell) -> f64 {
        let dx = (self.x - other.x).unsigned_abs();
        let dy = (self.y - other.y).unsigned_abs();
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        (hi - lo) as f64 + lo as f64 * std::f64::consts::SQRT_2
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Compass directions; `N` is +y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::N => (0, 1),
            Direction::NE => (1, 1),
            Direction::E => (1, 0),
            Direction::SE => (1, -1),
            Direction::S => (0, -1),
            Direction::SW => (-1, -1),
            Direction::W => (-1, 0),
            Direction::NW => (-1, 1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_diagonal(self) -> bool {
        let (dx, dy) = self.delta();
        dx != 0 && dy != 0
    }

    /// Octant of the displacement `from -> to`; `None` when they coincide.
    pub fn toward(from: Cell, to: Cell) -> Option<Direction> {
        let dx = (to.x - from.x) as f64;
        let dy = (to.y - from.y) as f64;
        if dx == 0.0 && dy == 0.0 {
            return None;
        }
        // angle measured clockwise from north, split into 45 degree sectors
        let angle = dx.atan2(dy).rem_euclid(TAU);
        let sector = ((angle / (TAU / 8.0)) + 0.5).floor() as usize % 8;
        Some(Direction::ALL[sector])
    }
}

/// Number of action classes used for one-hot encoding and Q-table columns.
pub const NUM_ACTION_CLASSES: usize = 15;
pub const NUM_REGIONS: usize = 4;

/// One agent action.
///
/// `Accept` carries the concrete order id; the class index (used by learning
/// and memory features) forgets the id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionId {
    Move(Direction),
    Stay,
    Accept(OrderId),
    Rest,
    Relocate(u8),
}

impl ActionId {
    pub fn class(self) -> usize {
        match self {
            ActionId::Move(d) => d.index(),
            ActionId::Stay => 8,
            ActionId::Accept(_) => 9,
            ActionId::Rest => 10,
            ActionId::Relocate(r) => 11 + (r as usize).min(NUM_REGIONS - 1),
        }
    }

    /// Inverse of [`ActionId::class`] for classes that carry no payload.
    /// Accept needs a target and yields `None`.
    pub fn from_class(class: usize) -> Option<ActionId> {
        match class {
            0..=7 => Some(ActionId::Move(Direction::ALL[class])),
            8 => Some(ActionId::Stay),
            10 => Some(ActionId::Rest),
            11..=14 => Some(ActionId::Relocate((class - 11) as u8)),
            _ => None,
        }
    }

    pub fn is_attribute_change(self) -> bool {
        matches!(self, ActionId::Rest | ActionId::Relocate(_))
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionId::Move(d) => write!(f, "move_{d:?}"),
            ActionId::Stay => write!(f, "stay"),
            ActionId::Accept(id) => write!(f, "accept_{id}"),
            ActionId::Rest => write!(f, "begin_rest"),
            ActionId::Relocate(r) => write!(f, "relocate_{r}"),
        }
    }
}

/// Agent status: 0 inactive, 1 idle, 2 delivering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Status {
    #[default]
    Inactive = 0,
    Idle = 1,
    Delivering = 2,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearningType {
    Rule,
    Imitation,
    Qlearning,
    Scripted,
}

impl LearningType {
    pub const ALL: [LearningType; 4] = [
        LearningType::Rule,
        LearningType::Imitation,
        LearningType::Qlearning,
        LearningType::Scripted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LearningType::Rule => "rule",
            LearningType::Imitation => "imitation",
            LearningType::Qlearning => "qlearning",
            LearningType::Scripted => "scripted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        LearningType::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for LearningType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryModel {
    None,
    Episodic,
    Replay,
    Mmdm,
}

impl MemoryModel {
    pub const ALL: [MemoryModel; 4] = [
        MemoryModel::None,
        MemoryModel::Episodic,
        MemoryModel::Replay,
        MemoryModel::Mmdm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryModel::None => "none",
            MemoryModel::Episodic => "episodic",
            MemoryModel::Replay => "replay",
            MemoryModel::Mmdm => "mmdm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MemoryModel::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for MemoryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Attributes fixed at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticProfile {
    pub id: AgentId,
    pub speed: f64,
    pub scope: f64,
    pub survival_cost: i64,
    pub learning: LearningType,
}

/// Attributes that evolve with the agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    pub location: Cell,
    /// Time-of-day step at which the daily shift begins.
    pub shift_start: u32,
    pub region: u8,
    pub status: Status,
    /// Accumulated earning in milli-units.
    pub earning: i64,
}

/// `<start, op, end>` record of one executed action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionTriple {
    pub start: DynamicState,
    pub op: ActionId,
    pub end: DynamicState,
}

pub const OBS_SCHEMA_VERSION: u16 = 1;
pub const OBS_DIM: usize = 9;
/// Width of the value range of each observation component.
pub const OBS_RANGES: [f64; OBS_DIM] = [1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0];
pub const ORDER_COUNT_CAP: usize = 10;

/// Diagonal of the observation box, the largest attainable distance.
pub fn obs_max_distance() -> f64 {
    OBS_RANGES.iter().map(|r| r * r).sum::<f64>().sqrt()
}

/// Fixed-length normalized observation vector.
///
/// Components: x/width, y/height, status/2, sin and cos of the time-of-day
/// angle, capped order count in scope, nearest order distance / scope,
/// congestion flag, weather flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub schema: u16,
    pub values: [f64; OBS_DIM],
}

/// Raw quantities an observation is encoded from.
#[derive(Clone, Copy, Debug)]
pub struct ObservationInputs {
    pub location: Cell,
    pub width: u32,
    pub height: u32,
    pub status: Status,
    pub time_of_day: u32,
    pub steps_per_day: u32,
    pub orders_in_scope: usize,
    pub nearest_order: Option<f64>,
    pub scope: f64,
    pub congestion: bool,
    pub rain: bool,
}

impl Observation {
    pub fn encode(i: &ObservationInputs) -> Observation {
        let angle = TAU * i.time_of_day as f64 / i.steps_per_day as f64;
        let count = i.orders_in_scope.min(ORDER_COUNT_CAP) as f64 / ORDER_COUNT_CAP as f64;
        let nearest = i.nearest_order.map_or(1.0, |d| (d / i.scope).clamp(0.0, 1.0));
        Observation {
            schema: OBS_SCHEMA_VERSION,
            values: [
                i.location.x as f64 / i.width as f64,
                i.location.y as f64 / i.height as f64,
                i.status.code() as f64 / 2.0,
                angle.sin(),
                angle.cos(),
                count,
                nearest,
                if i.congestion { 1.0 } else { 0.0 },
                if i.rain { 1.0 } else { 0.0 },
            ],
        }
    }

    pub fn from_values(values: [f64; OBS_DIM]) -> Observation {
        Observation { schema: OBS_SCHEMA_VERSION, values }
    }

    pub fn distance(&self, other: &Observation) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}
