use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{MdpAction, MdpState, PolicyIterationConfig, Solution, TransitionTable};
use crate::error::{Error, Result};
use crate::model::Scenario;

/// A solved policy as written to disk, replayable without re-solving.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyArtifact {
    /// Canonical state encodings, see [`MdpState::encode`].
    pub states: Vec<Vec<i64>>,
    pub actions: Vec<String>,
    pub values: Vec<f64>,
    pub gamma: f64,
    pub theta: f64,
    pub scenario_hash: String,
}

impl PolicyArtifact {
    pub fn new(
        scenario: &Scenario,
        table: &TransitionTable,
        solution: &Solution,
        cfg: &PolicyIterationConfig,
    ) -> Self {
        Self {
            states: table.space.states().iter().map(MdpState::encode).collect(),
            actions: (0..table.len())
                .map(|s| solution.policy.action(table, s).to_string())
                .collect(),
            values: solution.values.clone(),
            gamma: cfg.gamma,
            theta: cfg.theta,
            scenario_hash: scenario.hash(),
        }
    }

    pub fn check_scenario(&self, scenario: &Scenario) -> Result<()> {
        let expected = scenario.hash();
        if self.scenario_hash != expected {
            return Err(Error::ScenarioMismatch {
                artifact: self.scenario_hash.clone(),
                scenario: expected,
            });
        }
        Ok(())
    }

    /// State → action map, after checking the artifact was solved for `scenario`.
    pub fn lookup(&self, scenario: &Scenario) -> Result<HashMap<MdpState, MdpAction>> {
        self.check_scenario(scenario)?;
        if self.states.len() != self.actions.len() {
            return Err(Error::Config(
                "policy artifact has mismatched state/action lists".into(),
            ));
        }
        self.states
            .iter()
            .zip(&self.actions)
            .map(|(code, action)| {
                let state = MdpState::decode(scenario.n_types(), code)
                    .ok_or_else(|| Error::Config(format!("bad state encoding {code:?}")))?;
                Ok((state, action.parse()?))
            })
            .collect()
    }
}
