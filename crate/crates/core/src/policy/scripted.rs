//! Deterministic priority ruleset standing in for a language-model agent.

use super::PolicyContext;
use crate::model::ActionId;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ruleset {
    /// Minimum density bucket (0 none, 1 low, 2 medium, 3 high) at which the
    /// nearest order is accepted.
    pub accept_min_density: u8,
    /// Whether to relocate toward the region with most open orders.
    pub relocate: bool,
}

impl Default for Ruleset {
    fn default() -> Self {
        Ruleset { accept_min_density: 2, relocate: true }
    }
}

impl Ruleset {
    pub fn validate(&self) -> Result<(), String> {
        if self.accept_min_density > 3 {
            return Err(format!("accept_min_density must be in 0..=3, got {}", self.accept_min_density));
        }
        Ok(())
    }
}

/// Region with the most open orders; ties go to the lowest index.
pub fn densest_region(counts: &[u32]) -> u8 {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as u8
}

pub fn scripted_policy(ctx: &PolicyContext<'_>, script: &Ruleset) -> ActionId {
    if ctx.state.density >= script.accept_min_density {
        if let Some(a) = ctx.concretize(ActionId::Accept(0).class()) {
            return a;
        }
    }
    if script.relocate {
        let target = densest_region(&ctx.region_orders);
        if target != ctx.region {
            if let Some(a) = ctx.concretize(ActionId::Relocate(target).class()) {
                return a;
            }
        }
    }
    ActionId::Stay
}
