//! 8-connected shortest paths. Straight moves cost 1, diagonal moves cost
//! sqrt(2) and may not cut the corner of a blocked cell.

use super::grid::GridMap;
use crate::model::{Cell, Direction};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

pub fn step_cost(d: Direction) -> f64 {
    if d.is_diagonal() {
        SQRT_2
    } else {
        1.0
    }
}

pub fn neighbor(c: Cell, d: Direction) -> Cell {
    let (dx, dy) = d.delta();
    Cell::new(c.x + dx, c.y + dy)
}

/// Whether one move from `from` in direction `d` is allowed on `grid`.
pub fn can_step(grid: &GridMap, from: Cell, d: Direction) -> bool {
    let to = neighbor(from, d);
    if !grid.passable(to) {
        return false;
    }
    if d.is_diagonal() {
        let (dx, dy) = d.delta();
        grid.passable(Cell::new(from.x + dx, from.y)) && grid.passable(Cell::new(from.x, from.y + dy))
    } else {
        true
    }
}

/// Direction of a single-cell move between adjacent cells.
pub fn direction_between(from: Cell, to: Cell) -> Option<Direction> {
    let d = (to.x - from.x, to.y - from.y);
    Direction::ALL.into_iter().find(|dir| dir.delta() == d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathPlan {
    /// Cells after `from`, ending at the target.
    pub cells: Vec<Cell>,
    pub length: f64,
    /// Set when the target cannot be reached around current congestion; the
    /// cells then trace the congestion-free route and the mover waits.
    pub blocked: bool,
}

impl PathPlan {
    fn empty() -> Self {
        PathPlan { cells: Vec::new(), length: 0.0, blocked: false }
    }
}

pub fn path_length(from: Cell, cells: &[Cell]) -> f64 {
    let mut prev = from;
    let mut len = 0.0;
    for &c in cells {
        len += if c.x != prev.x && c.y != prev.y { SQRT_2 } else { 1.0 };
        prev = c;
    }
    len
}

/// Diagonal moves first, then straight ones; shortest on an empty map.
pub fn canonical_path(from: Cell, to: Cell) -> Vec<Cell> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let (sx, sy) = (dx.signum(), dy.signum());
    let diag = dx.abs().min(dy.abs());
    let mut cells = Vec::with_capacity(dx.unsigned_abs().max(dy.unsigned_abs()) as usize);
    let mut c = from;
    for _ in 0..diag {
        c = Cell::new(c.x + sx, c.y + sy);
        cells.push(c);
    }
    while c != to {
        c = Cell::new(c.x + if c.x != to.x { sx } else { 0 }, c.y + if c.y != to.y { sy } else { 0 });
        cells.push(c);
    }
    cells
}

fn octile(a: Cell, b: Cell) -> f64 {
    a.octile(b)
}

#[derive(Clone, Copy, Debug)]
struct Node {
    f: f64,
    g: f64,
    seq: u64,
    idx: u32,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: pop lowest f, then highest g, then earliest push
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Reusable A* buffers; a generation stamp marks which entries are live.
#[derive(Default)]
pub struct PathScratch {
    g: Vec<f64>,
    parent: Vec<u32>,
    stamp: Vec<u32>,
    closed: Vec<u32>,
    generation: u32,
    heap: BinaryHeap<Node>,
}

impl PathScratch {
    fn reset(&mut self, cells: usize) {
        if self.stamp.len() != cells {
            self.g = vec![0.0; cells];
            self.parent = vec![0; cells];
            self.stamp = vec![0; cells];
            self.closed = vec![0; cells];
            self.generation = 0;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.closed.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        self.heap.clear();
    }
}

fn astar(from: Cell, to: Cell, grid: &GridMap, s: &mut PathScratch) -> Option<Vec<Cell>> {
    let w = grid.width as usize;
    s.reset(w * grid.height as usize);
    let gen = s.generation;
    let index = |c: Cell| c.y as usize * w + c.x as usize;
    let cell_of = |i: u32| Cell::new((i as usize % w) as i32, (i as usize / w) as i32);
    let start = index(from) as u32;
    let goal = index(to) as u32;
    s.g[start as usize] = 0.0;
    s.stamp[start as usize] = gen;
    s.parent[start as usize] = start;
    let mut seq = 0u64;
    s.heap.push(Node { f: octile(from, to), g: 0.0, seq, idx: start });
    while let Some(n) = s.heap.pop() {
        let i = n.idx as usize;
        if s.closed[i] == gen {
            continue;
        }
        s.closed[i] = gen;
        if n.idx == goal {
            let mut cells = Vec::new();
            let mut cur = goal;
            while cur != start {
                cells.push(cell_of(cur));
                cur = s.parent[cur as usize];
            }
            cells.reverse();
            return Some(cells);
        }
        let c = cell_of(n.idx);
        for d in Direction::ALL {
            if !can_step(grid, c, d) {
                continue;
            }
            let nc = neighbor(c, d);
            let j = index(nc);
            if s.closed[j] == gen {
                continue;
            }
            let g = n.g + step_cost(d);
            if s.stamp[j] != gen || g < s.g[j] {
                s.stamp[j] = gen;
                s.g[j] = g;
                s.parent[j] = n.idx;
                seq += 1;
                s.heap.push(Node { f: g + octile(nc, to), g, seq, idx: j as u32 });
            }
        }
    }
    None
}

/// Shortest path around the current congestion.
pub fn plan_path(from: Cell, to: Cell, grid: &GridMap, scratch: &mut PathScratch) -> PathPlan {
    if from == to {
        return PathPlan::empty();
    }
    let free = || {
        let cells = canonical_path(from, to);
        let length = path_length(from, &cells);
        (cells, length)
    };
    let (x0, x1) = (from.x.min(to.x) - 1, from.x.max(to.x) + 1);
    let (y0, y1) = (from.y.min(to.y) - 1, from.y.max(to.y) + 1);
    if !grid.congestion.iter().any(|b| b.intersects_box(x0, y0, x1, y1)) {
        let (cells, length) = free();
        return PathPlan { cells, length, blocked: false };
    }
    if grid.is_blocked(from) || grid.is_blocked(to) {
        let (cells, length) = free();
        return PathPlan { cells, length, blocked: true };
    }
    match astar(from, to, grid, scratch) {
        Some(cells) => {
            let length = path_length(from, &cells);
            PathPlan { cells, length, blocked: false }
        }
        None => {
            let (cells, length) = free();
            PathPlan { cells, length, blocked: true }
        }
    }
}
