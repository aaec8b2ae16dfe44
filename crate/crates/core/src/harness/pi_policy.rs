use std::collections::HashMap;

use super::{ArrivalContext, DecisionSource};
use crate::error::{Error, Result};
use crate::mdp::{MdpAction, MdpState, PolicyArtifact, Solution, TransitionTable};
use crate::model::{Decision, Event, Scenario};

/// Replays a solved MDP policy: the live allocation plus the arriving
/// request is looked up as an arrival state.
#[derive(Clone, Debug)]
pub struct PiPolicy {
    actions: HashMap<MdpState, MdpAction>,
}

impl PiPolicy {
    pub fn from_solution(table: &TransitionTable, solution: &Solution) -> Self {
        let actions = (0..table.len())
            .map(|s| (table.space.state(s).clone(), solution.policy.action(table, s)))
            .collect();
        Self { actions }
    }

    /// Fails with a scenario mismatch unless `artifact` was solved for `scenario`.
    pub fn from_artifact(artifact: &PolicyArtifact, scenario: &Scenario) -> Result<Self> {
        Ok(Self {
            actions: artifact.lookup(scenario)?,
        })
    }

    pub fn action_for(&self, state: &MdpState) -> Result<MdpAction> {
        self.actions
            .get(state)
            .copied()
            .ok_or_else(|| Error::StateNotFound(state.to_string()))
    }
}

impl DecisionSource for PiPolicy {
    fn decide(&mut self, ctx: &ArrivalContext<'_>) -> Result<Decision> {
        let state = MdpState::new(ctx.alloc.clone(), Event::arrival(ctx.vnf_type));
        match self.action_for(&state)? {
            MdpAction::Reject => Ok(Decision::Reject),
            MdpAction::PlaceAt(k) => Ok(Decision::Place(k)),
            MdpAction::Void => Err(Error::InadmissibleAction {
                action: "void".into(),
            }),
        }
    }
}
