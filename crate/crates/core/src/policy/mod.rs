//! Learning mechanisms. Policies are consulted only at decision epochs (an
//! idle agent on duty); delivery legs and relocation transits are executed by
//! the world without a policy call.

pub mod imitation;
pub mod qlearning;
pub mod rule;
pub mod scripted;
pub mod state;

use crate::model::{ActionId, Direction, Observation, OrderId, NUM_ACTION_CLASSES, NUM_REGIONS};
use crate::rng::SeededStream;
use rand::Rng;
pub use state::DiscreteState;

/// Per-class legality of the agent's actions this step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionMask(pub [bool; NUM_ACTION_CLASSES]);

impl ActionMask {
    pub fn none() -> Self {
        ActionMask([false; NUM_ACTION_CLASSES])
    }

    pub fn allows(&self, class: usize) -> bool {
        self.0[class]
    }

    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_ACTION_CLASSES).filter(|&c| self.0[c])
    }
}

/// Read-only view a policy decides from.
#[derive(Clone, Debug)]
pub struct PolicyContext<'a> {
    pub obs: &'a Observation,
    pub state: DiscreteState,
    pub mask: ActionMask,
    /// Order an `Accept` would take: the platform's offer, else the nearest
    /// acceptable order in scope.
    pub accept_target: Option<OrderId>,
    pub orders_in_scope: usize,
    pub region: u8,
    /// Alive unassigned orders per region at step start.
    pub region_orders: [u32; NUM_REGIONS],
}

impl PolicyContext<'_> {
    /// Concrete action for an action class; `None` for an illegal class.
    pub fn concretize(&self, class: usize) -> Option<ActionId> {
        if !self.mask.allows(class) {
            return None;
        }
        match ActionId::from_class(class) {
            Some(a) => Some(a),
            None => self.accept_target.map(ActionId::Accept),
        }
    }

    /// Rebinds a remembered or imitated action to the present situation.
    pub fn rebind(&self, action: ActionId) -> ActionId {
        match action {
            ActionId::Accept(_) => self.accept_target.map_or(ActionId::Stay, ActionId::Accept),
            other => other,
        }
    }
}

/// Uniform move among legal directions, or stay when boxed in.
pub fn random_walk(ctx: &PolicyContext<'_>, rng: &mut SeededStream) -> ActionId {
    let legal: Vec<Direction> = Direction::ALL.into_iter().filter(|d| ctx.mask.allows(d.index())).collect();
    if legal.is_empty() {
        ActionId::Stay
    } else {
        ActionId::Move(legal[rng.random_range(0..legal.len())])
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::ctx;
    use super::*;
    use crate::model::OBS_DIM;
    use crate::rng::agent_stream;

    #[test]
    fn concretize_respects_mask() {
        let obs = Observation::from_values([0.0; OBS_DIM]);
        let c = ctx(&obs, None);
        assert_eq!(c.concretize(9), None);
        assert_eq!(c.concretize(8), Some(ActionId::Stay));
        let c = ctx(&obs, Some(4));
        assert_eq!(c.concretize(9), Some(ActionId::Accept(4)));
        assert_eq!(c.rebind(ActionId::Accept(99)), ActionId::Accept(4));
    }

    #[test]
    fn boxed_in_walk_stays() {
        let obs = Observation::from_values([0.0; OBS_DIM]);
        let mut c = ctx(&obs, None);
        for d in 0..8 {
            c.mask.0[d] = false;
        }
        assert_eq!(random_walk(&c, &mut agent_stream(1, 1)), ActionId::Stay);
    }
}
