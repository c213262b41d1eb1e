//! Nearest-neighbour behaviour cloning over an aggregated expert dataset.

use super::{rule::rule_policy, PolicyContext};
use crate::model::{obs_max_distance, ActionId, AgentId, Observation, Step};
use crate::rng::SeededStream;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImitationParams {
    /// Entries less similar than this to the query are ignored;
    /// similarity is `1 - d / d_max` over the observation ranges.
    pub min_similarity: f64,
}

impl Default for ImitationParams {
    fn default() -> Self {
        ImitationParams { min_similarity: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertPair {
    pub obs: Observation,
    pub action: ActionId,
    pub contributor: AgentId,
    pub step: Step,
}

/// Append-only dataset, deduplicated by `(contributor, step)`.
#[derive(Clone, Debug, Default)]
pub struct ImitationDataset {
    entries: Vec<ExpertPair>,
    seen: HashSet<(AgentId, Step)>,
}

impl ImitationDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ExpertPair] {
        &self.entries
    }

    pub fn push(&mut self, pair: ExpertPair) -> bool {
        if self.seen.insert((pair.contributor, pair.step)) {
            self.entries.push(pair);
            true
        } else {
            false
        }
    }

    /// Action of the nearest stored observation; ties go to the earliest entry.
    pub fn nearest(&self, obs: &Observation) -> Option<(ActionId, f64)> {
        self.nearest_where(obs, f64::INFINITY, |_| true)
    }

    /// As [`nearest`](Self::nearest), over entries within `max_distance`
    /// whose action passes `applicable`.
    pub fn nearest_where(
        &self,
        obs: &Observation,
        max_distance: f64,
        applicable: impl Fn(ActionId) -> bool,
    ) -> Option<(ActionId, f64)> {
        let mut best: Option<(ActionId, f64)> = None;
        for e in &self.entries {
            let d = e.obs.distance(obs);
            if d > max_distance || !applicable(e.action) {
                continue;
            }
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((e.action, d));
            }
        }
        best
    }
}

/// A peer's most recent decision: when it was taken, what the peer saw and
/// what it did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LastDecision {
    pub step: Step,
    pub obs: Observation,
    pub action: ActionId,
}

/// What an observer can see of a co-located agent.
#[derive(Clone, Debug)]
pub struct Peer {
    pub id: AgentId,
    pub earning: i64,
    pub last: Option<LastDecision>,
}

/// Appends the last decisions of strictly higher-earning co-located peers.
pub fn observe_expert(dataset: &mut ImitationDataset, self_earning: i64, peers: &[Peer]) -> usize {
    let mut n = 0;
    for p in peers {
        if p.earning > self_earning {
            if let Some(d) = p.last {
                n += usize::from(dataset.push(ExpertPair { obs: d.obs, action: d.action, contributor: p.id, step: d.step }));
            }
        }
    }
    n
}

/// Copies the nearest expert action that is legal here; falls back to the
/// rule policy when no entry is close enough.
pub fn imitation_policy(
    ctx: &PolicyContext<'_>,
    dataset: &ImitationDataset,
    params: &ImitationParams,
    rng: &mut SeededStream,
) -> ActionId {
    let max_distance = (1.0 - params.min_similarity) * obs_max_distance();
    let legal = |a: ActionId| match a {
        ActionId::Accept(_) => ctx.accept_target.is_some(),
        other => ctx.mask.allows(other.class()),
    };
    match dataset.nearest_where(ctx.obs, max_distance, legal) {
        Some((action, _)) => ctx.rebind(action),
        None => rule_policy(ctx, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, OBS_DIM};
    use crate::policy::fixtures::ctx;
    use crate::rng::agent_stream;

    fn obs(x: f64) -> Observation {
        let mut v = [0.0; OBS_DIM];
        v[0] = x;
        Observation::from_values(v)
    }

    fn peer(id: AgentId, earning: i64) -> Peer {
        Peer { id, earning, last: Some(LastDecision { step: 0, obs: obs(0.0), action: ActionId::Stay }) }
    }

    #[test]
    fn expert_visibility() {
        let mut d = ImitationDataset::default();
        assert_eq!(observe_expert(&mut d, 0, &[]), 0);
        assert_eq!(observe_expert(&mut d, 0, &[peer(1, 5)]), 1);
        assert_eq!(observe_expert(&mut d, 0, &[peer(2, 0)]), 0);
        // second observer of the same expert in the same step adds nothing
        assert_eq!(observe_expert(&mut d, -3, &[peer(1, 5)]), 0);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn nearest_neighbour() {
        let mut d = ImitationDataset::default();
        let q = obs(0.5);
        let c = ctx(&q, Some(8));
        let mut rng = agent_stream(0, 0);
        let p = ImitationParams::default();
        assert_eq!(imitation_policy(&c, &d, &p, &mut rng), ActionId::Accept(8));
        d.push(ExpertPair { obs: obs(0.8), action: ActionId::Move(Direction::S), contributor: 1, step: 0 });
        d.push(ExpertPair { obs: obs(0.4), action: ActionId::Accept(2), contributor: 2, step: 0 });
        assert_eq!(imitation_policy(&c, &d, &p, &mut rng), ActionId::Accept(8));
        let q2 = obs(0.8);
        let exact = ctx(&q2, None);
        assert_eq!(imitation_policy(&exact, &d, &p, &mut rng), ActionId::Move(Direction::S));
    }

    #[test]
    fn distant_or_illegal_entries_fall_back_to_rule() {
        let mut d = ImitationDataset::default();
        d.push(ExpertPair { obs: obs(0.9), action: ActionId::Rest, contributor: 1, step: 0 });
        let q = obs(-0.9);
        let c = ctx(&q, Some(4));
        let mut rng = agent_stream(0, 0);
        let p = ImitationParams::default();
        assert_eq!(imitation_policy(&c, &d, &p, &mut rng), ActionId::Accept(4));
        let wide = ImitationParams { min_similarity: 0.0 };
        assert_eq!(imitation_policy(&c, &d, &wide, &mut rng), ActionId::Rest);
        let mut blocked = c.clone();
        blocked.mask.0[ActionId::Rest.class()] = false;
        assert_eq!(imitation_policy(&blocked, &d, &wide, &mut rng), ActionId::Accept(4));
    }

    #[test]
    fn ties_go_to_first_entry() {
        let mut d = ImitationDataset::default();
        d.push(ExpertPair { obs: obs(0.2), action: ActionId::Rest, contributor: 1, step: 0 });
        d.push(ExpertPair { obs: obs(0.2), action: ActionId::Stay, contributor: 2, step: 0 });
        assert_eq!(d.nearest(&obs(0.3)).unwrap().0, ActionId::Rest);
    }
}
