use crate::model::{Status, NUM_REGIONS};
use serde::{Deserialize, Serialize};

pub const TOD_BUCKETS: usize = 12;
pub const DENSITY_BUCKETS: usize = 4;
pub const STATUS_COUNT: usize = 3;
pub const NUM_STATES: usize = NUM_REGIONS * TOD_BUCKETS * DENSITY_BUCKETS * STATUS_COUNT;

/// Coarse state used by the tabular learner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteState {
    pub region: u8,
    pub tod_bucket: u8,
    pub density: u8,
    pub status: u8,
}

/// Orders in scope: none, 1-2, 3-5, 6 or more.
pub fn density_bucket(orders_in_scope: usize) -> u8 {
    match orders_in_scope {
        0 => 0,
        1..=2 => 1,
        3..=5 => 2,
        _ => 3,
    }
}

impl DiscreteState {
    pub fn new(region: u8, time_of_day: u32, steps_per_day: u32, orders_in_scope: usize, status: Status) -> Self {
        let tod_bucket = ((time_of_day as u64 * TOD_BUCKETS as u64) / steps_per_day as u64) as u8;
        DiscreteState {
            region: region.min(NUM_REGIONS as u8 - 1),
            tod_bucket: tod_bucket.min(TOD_BUCKETS as u8 - 1),
            density: density_bucket(orders_in_scope),
            status: status.code() as u8,
        }
    }

    pub fn index(self) -> usize {
        ((self.region as usize * TOD_BUCKETS + self.tod_bucket as usize) * DENSITY_BUCKETS + self.density as usize)
            * STATUS_COUNT
            + self.status as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_count() {
        assert_eq!(NUM_STATES, 576);
    }

    #[test]
    fn index_is_a_bijection() {
        let mut seen = vec![false; NUM_STATES];
        for r in 0..4u8 {
            for t in 0..12u8 {
                for d in 0..4u8 {
                    for s in 0..3u8 {
                        let i = DiscreteState { region: r, tod_bucket: t, density: d, status: s }.index();
                        assert!(!seen[i]);
                        seen[i] = true;
                    }
                }
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn buckets() {
        assert_eq!(density_bucket(0), 0);
        assert_eq!(density_bucket(2), 1);
        assert_eq!(density_bucket(3), 2);
        assert_eq!(density_bucket(5), 2);
        assert_eq!(density_bucket(6), 3);
        let s = DiscreteState::new(2, 359, 360, 4, Status::Idle);
        assert_eq!((s.tod_bucket, s.density, s.status), (11, 2, 1));
        assert_eq!(DiscreteState::new(0, 30, 360, 0, Status::Idle).tod_bucket, 1);
    }
}
