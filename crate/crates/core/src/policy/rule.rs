use super::{random_walk, PolicyContext};
use crate::model::ActionId;
use crate::rng::SeededStream;

/// Accept whatever order is on offer or in scope, otherwise wander. Never
/// rests or relocates.
pub fn rule_policy(ctx: &PolicyContext<'_>, rng: &mut SeededStream) -> ActionId {
    match ctx.concretize(ActionId::Accept(0).class()) {
        Some(a) => a,
        None => random_walk(ctx, rng),
    }
}
