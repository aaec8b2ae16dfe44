use super::{ActionOutcomes, MdpAction, TransitionTable};
use crate::error::{Error, Result};
use crate::model::EventKind;

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyIterationConfig {
    pub gamma: f64,
    /// Policy evaluation stops once a full sweep changes no value by more
    /// than this.
    pub theta: f64,
    pub max_sweeps: usize,
    pub max_iterations: usize,
    /// Actions whose values lie within this distance of the best are tied
    /// and resolved by the fixed action order. `None` uses `θ/(1−γ)`, the
    /// accuracy of an evaluation stopped at `θ`.
    pub tie_tolerance: Option<f64>,
}

impl Default for PolicyIterationConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            theta: 1e-6,
            max_sweeps: 100_000,
            max_iterations: 1_000,
            tie_tolerance: None,
        }
    }
}

impl PolicyIterationConfig {
    pub fn new(gamma: f64, theta: f64) -> Self {
        Self {
            gamma,
            theta,
            ..Self::default()
        }
    }

    pub fn tie_tolerance(&self) -> f64 {
        self.tie_tolerance
            .unwrap_or_else(|| (self.theta / (1.0 - self.gamma)).max(1e-12))
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        if !(self.theta > 0.0) {
            return Err(Error::Config(format!("theta {} must be positive", self.theta)));
        }
        Ok(())
    }
}

/// Deterministic policy: for every state, the position of the chosen action
/// in that state's admissible list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Policy {
    choice: Vec<usize>,
}

impl Policy {
    /// First admissible action everywhere (`Reject` on arrivals).
    pub fn initial(table: &TransitionTable) -> Self {
        Self {
            choice: vec![0; table.len()],
        }
    }

    pub fn from_choices(choice: Vec<usize>) -> Self {
        Self { choice }
    }

    pub fn choice(&self, state: usize) -> usize {
        self.choice[state]
    }

    pub fn action(&self, table: &TransitionTable, state: usize) -> MdpAction {
        table.actions[state][self.choice[state]].action
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub policy: Policy,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub sweeps: usize,
}

/// `Σ p(s'|s,a)·[r + γ·V(s')]`
pub fn q_value(entry: &ActionOutcomes, values: &[f64], gamma: f64) -> f64 {
    entry
        .outcomes
        .iter()
        .map(|&(next, p)| p * (entry.reward + gamma * values[next]))
        .sum()
}

/// In-place (Gauss–Seidel) evaluation of `policy`, starting from `values`.
/// Returns the number of sweeps performed.
pub fn policy_evaluation(
    table: &TransitionTable,
    policy: &Policy,
    values: &mut [f64],
    gamma: f64,
    theta: f64,
    max_sweeps: usize,
) -> Result<usize> {
    let mut delta = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        delta = 0.0;
        for s in 0..table.len() {
            let old = values[s];
            values[s] = q_value(&table.actions[s][policy.choice[s]], values, gamma);
            delta = delta.max((old - values[s]).abs());
        }
        if delta <= theta {
            return Ok(sweep);
        }
    }
    Err(Error::NonConvergence {
        sweeps: max_sweeps,
        delta,
    })
}

/// Index of the greedy action at `state`: the first action, in tie-break
/// order, whose value is within `tie_tolerance` of the maximum.
pub fn greedy_action(
    table: &TransitionTable,
    values: &[f64],
    state: usize,
    gamma: f64,
    tie_tolerance: f64,
) -> usize {
    let q: Vec<f64> = table.actions[state]
        .iter()
        .map(|e| q_value(e, values, gamma))
        .collect();
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    q.iter()
        .position(|&v| v >= best - tie_tolerance)
        .expect("every state has an admissible action")
}

/// Makes `policy` greedy with respect to `values`. Returns whether the
/// policy was already stable.
pub fn policy_improvement(
    table: &TransitionTable,
    values: &[f64],
    gamma: f64,
    tie_tolerance: f64,
    policy: &mut Policy,
) -> bool {
    let mut stable = true;
    for s in 0..table.len() {
        let best = greedy_action(table, values, s, gamma, tie_tolerance);
        if best != policy.choice[s] {
            policy.choice[s] = best;
            stable = false;
        }
    }
    stable
}

pub fn policy_iteration(table: &TransitionTable, cfg: &PolicyIterationConfig) -> Result<Solution> {
    cfg.validate()?;
    let tol = cfg.tie_tolerance();
    let mut policy = Policy::initial(table);
    let mut values = vec![0.0; table.len()];
    let mut sweeps = 0;
    for iteration in 1..=cfg.max_iterations {
        sweeps += policy_evaluation(
            table,
            &policy,
            &mut values,
            cfg.gamma,
            cfg.theta,
            cfg.max_sweeps,
        )?;
        if policy_improvement(table, &values, cfg.gamma, tol, &mut policy) {
            log::debug!("policy iteration stable after {iteration} iterations, {sweeps} sweeps");
            return Ok(Solution {
                policy,
                values,
                iterations: iteration,
                sweeps,
            });
        }
    }
    Err(Error::NonConvergence {
        sweeps,
        delta: f64::NAN,
    })
}

/// `max_s |V(s) − max_a Σ p·(r + γV(s'))|`
pub fn bellman_residual(table: &TransitionTable, values: &[f64], gamma: f64) -> f64 {
    (0..table.len())
        .map(|s| {
            let best = table.actions[s]
                .iter()
                .map(|e| q_value(e, values, gamma))
                .fold(f64::NEG_INFINITY, f64::max);
            (values[s] - best).abs()
        })
        .fold(0.0, f64::max)
}

/// Arrival states where some EC could host the request but the policy
/// rejects it anyway.
pub fn proactive_rejections(table: &TransitionTable, policy: &Policy) -> usize {
    (0..table.len())
        .filter(|&s| {
            table.space.state(s).event.kind == EventKind::Arrival
                && table.actions[s].len() > 1
                && policy.action(table, s) == MdpAction::Reject
        })
        .count()
}
