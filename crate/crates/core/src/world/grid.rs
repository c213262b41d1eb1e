use crate::model::{Cell, Step, NUM_REGIONS};
use serde::{Deserialize, Serialize};

/// Axis-aligned block of impassable cells, inclusive bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Congestion {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
    /// Last step during which the block is impassable.
    pub until: Step,
}

impl Congestion {
    pub fn contains(&self, c: Cell) -> bool {
        c.x >= self.x0 && c.x <= self.x1 && c.y >= self.y0 && c.y <= self.y1
    }

    /// Euclidean distance from a cell to the nearest cell of the block.
    pub fn distance_to(&self, c: Cell) -> f64 {
        let dx = (self.x0 - c.x).max(c.x - self.x1).max(0) as f64;
        let dy = (self.y0 - c.y).max(c.y - self.y1).max(0) as f64;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn intersects_box(&self, x0: i32, y0: i32, x1: i32, y1: i32) -> bool {
        self.x0 <= x1 && x0 <= self.x1 && self.y0 <= y1 && y0 <= self.y1
    }
}

/// Rectangular map split 2x2 into subregions, plus the live congestion set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub width: u32,
    pub height: u32,
    pub congestion: Vec<Congestion>,
}

impl GridMap {
    pub fn new(width: u32, height: u32) -> Self {
        GridMap { width, height, congestion: Vec::new() }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as u32) < self.width && (c.y as u32) < self.height
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.congestion.iter().any(|b| b.contains(c))
    }

    pub fn passable(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.is_blocked(c)
    }

    pub fn congestion_within(&self, c: Cell, radius: f64) -> bool {
        self.congestion.iter().any(|b| b.distance_to(c) <= radius)
    }

    /// Drops blocks whose window ended before `step`.
    pub fn expire_congestion(&mut self, step: Step) {
        self.congestion.retain(|b| b.until >= step);
    }

    pub fn region_of(&self, c: Cell) -> u8 {
        let east = (c.x as u32) >= self.width / 2;
        let north = (c.y as u32) >= self.height / 2;
        u8::from(east) + 2 * u8::from(north)
    }

    /// Inclusive cell bounds of a subregion.
    pub fn region_bounds(&self, r: u8) -> (Cell, Cell) {
        let hw = (self.width / 2) as i32;
        let hh = (self.height / 2) as i32;
        let (x0, x1) = if r % 2 == 0 { (0, hw - 1) } else { (hw, self.width as i32 - 1) };
        let (y0, y1) = if r / 2 == 0 { (0, hh - 1) } else { (hh, self.height as i32 - 1) };
        (Cell::new(x0, y0), Cell::new(x1, y1))
    }

    pub fn region_center(&self, r: u8) -> Cell {
        let (lo, hi) = self.region_bounds(r);
        Cell::new((lo.x + hi.x) / 2, (lo.y + hi.y) / 2)
    }

    pub fn regions(&self) -> impl Iterator<Item = u8> {
        0..NUM_REGIONS as u8
    }
}
