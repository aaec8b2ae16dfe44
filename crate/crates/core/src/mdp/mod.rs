//! Exact finite-MDP model of the placement problem and its Policy Iteration
//! solver.
//!
//! A state is the allocation matrix together with the event that is about
//! to be handled. Arrival states offer `Reject` or `PlaceAt(k)` for every EC
//! that can host the request; departure states only offer `Void`, and which
//! EC loses the request is resolved inside the transition distribution.

mod artifact;
mod solver;
mod space;

pub use artifact::PolicyArtifact;
pub use solver::{
    bellman_residual, greedy_action, policy_evaluation, policy_improvement, policy_iteration,
    proactive_rejections, q_value, Policy, PolicyIterationConfig, Solution,
};
pub use space::{
    admissible_actions, departure_sources, enumerate_states, transitions, ActionOutcomes,
    StateSpace, TransitionTable, DEFAULT_STATE_CAP,
};

use std::fmt;

use crate::model::{AllocationMatrix, Event};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MdpState {
    pub alloc: AllocationMatrix,
    pub event: Event,
}

impl MdpState {
    pub fn new(alloc: AllocationMatrix, event: Event) -> Self {
        Self { alloc, event }
    }

    /// Flattened counts followed by the signed event (`+i` arrival, `-i`
    /// departure, one-based).
    pub fn encode(&self) -> Vec<i64> {
        self.alloc
            .flat()
            .iter()
            .map(|&n| i64::from(n))
            .chain(std::iter::once(self.event.signed()))
            .collect()
    }

    pub fn decode(n_types: usize, code: &[i64]) -> Option<Self> {
        let (&d, counts) = code.split_last()?;
        if counts.is_empty() || counts.len() % n_types != 0 {
            return None;
        }
        let counts = counts
            .iter()
            .map(|&c| u32::try_from(c).ok())
            .collect::<Option<Vec<_>>>()?;
        let event = Event::from_signed(d)?;
        if event.vnf_type >= n_types {
            return None;
        }
        Some(Self::new(AllocationMatrix::from_counts(n_types, counts), event))
    }
}

impl fmt::Display for MdpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.encode())
    }
}

/// The tie-break order is the declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MdpAction {
    Reject,
    PlaceAt(usize),
    Void,
}

impl fmt::Display for MdpAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MdpAction::Reject => f.write_str("reject"),
            MdpAction::PlaceAt(k) => write!(f, "place:{}", k + 1),
            MdpAction::Void => f.write_str("void"),
        }
    }
}

impl std::str::FromStr for MdpAction {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "void" => Ok(MdpAction::Void),
            other => Ok(match other.parse::<crate::model::Decision>()? {
                crate::model::Decision::Reject => MdpAction::Reject,
                crate::model::Decision::Place(k) => MdpAction::PlaceAt(k),
            }),
        }
    }
}
