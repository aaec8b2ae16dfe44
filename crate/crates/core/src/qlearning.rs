//! Tabular Q-learning over the observable network state.
//!
//! The agent only acts on arrivals. Its state is the request demand followed
//! by the free CPU and free link bandwidth of every EC, and its actions are
//! `Reject` or placing on a feasible EC. Infeasible placements are masked out
//! of both action selection and the bootstrap maximum.
//!
//! Unvisited entries read as 0. Greedy ties are broken uniformly at random
//! by default, so an agent that never learns (α = 0) acts like the uniform
//! random policy whatever ε is.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{run_episode, ArrivalContext, DecisionSource, EpisodeResult};
use crate::model::{AllocationMatrix, Decision, Scenario};
use crate::tracegen::Trace;

/// `[req_cpu, req_bw, fcpu_1..fcpu_K, fbw_1..fbw_K]`
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PracticalState(Vec<u64>);

impl PracticalState {
    pub fn new(req_cpu: u64, req_bw: u64, fcpu: &[u64], fbw: &[u64]) -> Self {
        assert_eq!(fcpu.len(), fbw.len());
        let mut v = Vec::with_capacity(2 + 2 * fcpu.len());
        v.extend([req_cpu, req_bw]);
        v.extend_from_slice(fcpu);
        v.extend_from_slice(fbw);
        Self(v)
    }

    pub fn observe(scenario: &Scenario, alloc: &AllocationMatrix, vnf_type: usize) -> Self {
        let t = &scenario.vnf_types[vnf_type];
        let fcpu: Vec<u64> = (0..scenario.n_ecs())
            .map(|k| scenario.free_cpu(alloc, k))
            .collect();
        let fbw: Vec<u64> = (0..scenario.n_ecs())
            .map(|k| scenario.free_bw(alloc, k))
            .collect();
        Self::new(t.cpu, t.bw, &fcpu, &fbw)
    }

    pub fn from_values(values: Vec<u64>) -> Option<Self> {
        (values.len() >= 4 && values.len() % 2 == 0).then_some(Self(values))
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn n_ecs(&self) -> usize {
        (self.0.len() - 2) / 2
    }

    pub fn req_cpu(&self) -> u64 {
        self.0[0]
    }

    pub fn req_bw(&self) -> u64 {
        self.0[1]
    }

    pub fn fcpu(&self, ec: usize) -> u64 {
        self.0[2 + ec]
    }

    pub fn fbw(&self, ec: usize) -> u64 {
        self.0[2 + self.n_ecs() + ec]
    }

    /// `Reject` followed by every EC with room for the request, in tie-break order.
    pub fn feasible_actions(&self) -> Vec<Decision> {
        std::iter::once(Decision::Reject)
            .chain(
                (0..self.n_ecs())
                    .filter(|&k| self.fcpu(k) >= self.req_cpu() && self.fbw(k) >= self.req_bw())
                    .map(Decision::Place),
            )
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_decay: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            eps_min: 0.001,
            eps_max: 1.0,
            eps_decay: 0.1,
        }
    }
}

impl EpsilonSchedule {
    /// `ε = ε_min + (ε_max − ε_min)·exp(−ε_decay·episode)`
    pub fn at(&self, episode: usize) -> f64 {
        self.eps_min + (self.eps_max - self.eps_min) * (-self.eps_decay * episode as f64).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.eps_min && self.eps_min <= self.eps_max && self.eps_max <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= eps_min ({}) <= eps_max ({}) <= 1",
                self.eps_min, self.eps_max
            )));
        }
        if !(self.eps_decay >= 0.0) {
            return Err(Error::Config(format!(
                "eps_decay {} must be non-negative",
                self.eps_decay
            )));
        }
        Ok(())
    }
}

/// How a greedy choice among equally valued actions is made.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Uniform draw from the agent's stream.
    #[default]
    Uniform,
    /// First in `Reject < Place(0) < Place(1) < …` order.
    Ordered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(flatten)]
    pub schedule: EpsilonSchedule,
    pub seed: u64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            gamma: 0.5,
            schedule: EpsilonSchedule::default(),
            seed: 1,
            tie_break: TieBreak::Uniform,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} {v} not in [0, 1]")));
            }
        }
        self.schedule.validate()
    }
}

fn slot(action: Decision) -> usize {
    match action {
        Decision::Reject => 0,
        Decision::Place(k) => k + 1,
    }
}

fn action_of(slot: usize) -> Decision {
    match slot {
        0 => Decision::Reject,
        k => Decision::Place(k - 1),
    }
}

/// Q-values for every visited state, one row of `K + 1` actions each.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_ecs: usize,
    rows: HashMap<PracticalState, Vec<f64>>,
    pub episodes_trained: usize,
}

impl QTable {
    pub fn new(n_ecs: usize) -> Self {
        Self {
            n_ecs,
            rows: HashMap::new(),
            episodes_trained: 0,
        }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self::new(scenario.n_ecs())
    }

    pub fn n_ecs(&self) -> usize {
        self.n_ecs
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn contains_state(&self, state: &PracticalState) -> bool {
        self.rows.contains_key(state)
    }

    pub fn states(&self) -> impl Iterator<Item = &PracticalState> {
        self.rows.keys()
    }

    pub fn get(&self, state: &PracticalState, action: Decision) -> f64 {
        self.rows.get(state).map_or(0.0, |row| row[slot(action)])
    }

    /// Storing any value makes the whole row of `state` known.
    pub fn set(&mut self, state: &PracticalState, action: Decision, value: f64) {
        let width = self.n_ecs + 1;
        self.rows
            .entry(state.clone())
            .or_insert_with(|| vec![0.0; width])[slot(action)] = value;
    }

    /// The actions of `feasible` holding the maximum value, in `feasible` order.
    pub fn greedy_actions(&self, state: &PracticalState, feasible: &[Decision]) -> Vec<Decision> {
        let best = self.max_value(state, feasible);
        feasible
            .iter()
            .copied()
            .filter(|&a| self.get(state, a) == best)
            .collect()
    }

    /// First greedy action in `feasible` order.
    pub fn argmax(&self, state: &PracticalState, feasible: &[Decision]) -> Decision {
        self.greedy_actions(state, feasible)[0]
    }

    pub fn max_value(&self, state: &PracticalState, feasible: &[Decision]) -> f64 {
        feasible
            .iter()
            .map(|&a| self.get(state, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Stored entries sorted by state, then action.
    pub fn entries(&self) -> Vec<(PracticalState, Decision, f64)> {
        let mut states: Vec<&PracticalState> = self.rows.keys().collect();
        states.sort();
        states
            .into_iter()
            .flat_map(|s| {
                self.rows[s]
                    .iter()
                    .enumerate()
                    .map(move |(i, &v)| (s.clone(), action_of(i), v))
            })
            .collect()
    }
}

/// Greedy choice. A uniform tie-break draws from `rng` only when several
/// actions share the maximum.
pub fn greedy<R: Rng + ?Sized>(
    q: &QTable,
    state: &PracticalState,
    feasible: &[Decision],
    tie_break: TieBreak,
    rng: &mut R,
) -> Decision {
    let best = q.greedy_actions(state, feasible);
    match tie_break {
        TieBreak::Uniform if best.len() > 1 => best[rng.random_range(0..best.len())],
        _ => best[0],
    }
}

/// ε-greedy over `feasible`, which must be non-empty and in
/// `Reject < Place(0) < …` order.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    state: &PracticalState,
    feasible: &[Decision],
    epsilon: f64,
    tie_break: TieBreak,
    rng: &mut R,
) -> Decision {
    let draw: f64 = rng.random();
    if draw < epsilon {
        feasible[rng.random_range(0..feasible.len())]
    } else {
        greedy(q, state, feasible, tie_break, rng)
    }
}

/// One temporal-difference step on `(state, action)`. `next` is the
/// following state with its feasible actions; `None` ends the episode and
/// drops the bootstrap term.
pub fn td_update(
    q: &mut QTable,
    state: &PracticalState,
    action: Decision,
    reward: f64,
    next: Option<(&PracticalState, &[Decision])>,
    alpha: f64,
    gamma: f64,
) {
    let future = next.map_or(0.0, |(s, feasible)| q.max_value(s, feasible));
    let old = q.get(state, action);
    q.set(state, action, old + alpha * (reward + gamma * future - old));
}

fn reward(action: Decision) -> f64 {
    if action.is_placement() {
        1.0
    } else {
        0.0
    }
}

enum Mode {
    Train { epsilon: f64 },
    /// Greedy on states known before evaluation began, learning elsewhere.
    Evaluate {
        epsilon: f64,
        known: HashSet<PracticalState>,
    },
}

/// A learning agent wired into the episode runner.
pub struct QAgent {
    pub table: QTable,
    cfg: AgentConfig,
    rng: ChaCha8Rng,
    mode: Mode,
    pending: Option<(PracticalState, Decision, f64)>,
}

impl QAgent {
    fn new(table: QTable, cfg: AgentConfig, mode: Mode) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self {
            table,
            cfg,
            rng,
            mode,
            pending: None,
        }
    }

    fn finish_pending(&mut self, next: Option<(&PracticalState, &[Decision])>) {
        if let Some((s, a, r)) = self.pending.take() {
            td_update(
                &mut self.table,
                &s,
                a,
                r,
                next,
                self.cfg.alpha,
                self.cfg.gamma,
            );
        }
    }
}

impl DecisionSource for QAgent {
    fn decide(&mut self, ctx: &ArrivalContext<'_>) -> Result<Decision> {
        let state = PracticalState::observe(ctx.scenario, ctx.alloc, ctx.vnf_type);
        let feasible = state.feasible_actions();
        self.finish_pending(Some((&state, &feasible)));

        let epsilon = match &self.mode {
            Mode::Evaluate { known, .. } if known.contains(&state) => {
                return Ok(greedy(
                    &self.table,
                    &state,
                    &feasible,
                    self.cfg.tie_break,
                    &mut self.rng,
                ));
            }
            Mode::Evaluate { epsilon, .. } | Mode::Train { epsilon } => *epsilon,
        };
        let action = select_action(
            &self.table,
            &state,
            &feasible,
            epsilon,
            self.cfg.tie_break,
            &mut self.rng,
        );
        self.pending = Some((state, action, reward(action)));
        Ok(action)
    }

    fn episode_end(&mut self) {
        self.finish_pending(None);
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub table: QTable,
    /// Accepted fraction per episode.
    pub curve: Vec<f64>,
}

/// Trains a fresh agent for `episodes` episodes; episode `e` replays
/// `traces[e % traces.len()]` on an empty network with `ε = schedule.at(e)`.
pub fn train(
    scenario: &Scenario,
    traces: &[Trace],
    episodes: usize,
    cfg: &AgentConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if episodes == 0 || traces.is_empty() {
        return Err(Error::Config(
            "training needs at least one episode and one trace".into(),
        ));
    }
    let mut agent = QAgent::new(
        QTable::for_scenario(scenario),
        cfg.clone(),
        Mode::Train { epsilon: 1.0 },
    );
    let mut curve = Vec::with_capacity(episodes);
    for e in 0..episodes {
        agent.mode = Mode::Train {
            epsilon: cfg.schedule.at(e),
        };
        let r = run_episode(&mut agent, &traces[e % traces.len()], scenario)?;
        curve.push(r.avg_reward());
    }
    agent.table.episodes_trained = episodes;
    Ok(TrainOutcome {
        table: agent.table,
        curve,
    })
}

/// One evaluation episode starting from a copy of `q`.
///
/// States already in `q` are acted on greedily without updates; any other
/// state is handled as in training (ε-greedy at `schedule.at(episodes_trained)`
/// plus a TD update), which also grows the returned table.
pub fn evaluate(
    q: &QTable,
    trace: &Trace,
    scenario: &Scenario,
    cfg: &AgentConfig,
) -> Result<(EpisodeResult, QTable)> {
    cfg.validate()?;
    if q.n_ecs() != scenario.n_ecs() {
        return Err(Error::Config(format!(
            "Q-table has {} ECs, scenario has {}",
            q.n_ecs(),
            scenario.n_ecs()
        )));
    }
    let mode = Mode::Evaluate {
        epsilon: cfg.schedule.at(q.episodes_trained),
        known: q.states().cloned().collect(),
    };
    let mut agent = QAgent::new(q.clone(), cfg.clone(), mode);
    let result = run_episode(&mut agent, trace, scenario)?;
    Ok((result, agent.table))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub state: Vec<u64>,
    pub action: String,
    pub value: f64,
}

/// On-disk form of a trained table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTableArtifact {
    pub entries: Vec<QEntry>,
    pub config: AgentConfig,
    pub scenario_hash: String,
    pub episodes_trained: usize,
}

impl QTableArtifact {
    pub fn new(table: &QTable, cfg: &AgentConfig, scenario: &Scenario) -> Self {
        Self {
            entries: table
                .entries()
                .into_iter()
                .map(|(s, a, value)| QEntry {
                    state: s.values().to_vec(),
                    action: a.to_string(),
                    value,
                })
                .collect(),
            config: cfg.clone(),
            scenario_hash: scenario.hash(),
            episodes_trained: table.episodes_trained,
        }
    }

    pub fn to_table(&self, scenario: &Scenario) -> Result<QTable> {
        let expected = scenario.hash();
        if self.scenario_hash != expected {
            return Err(Error::ScenarioMismatch {
                artifact: self.scenario_hash.clone(),
                scenario: expected,
            });
        }
        let mut table = QTable::for_scenario(scenario);
        for e in &self.entries {
            let state = PracticalState::from_values(e.state.clone())
                .filter(|s| s.n_ecs() == scenario.n_ecs())
                .ok_or_else(|| Error::Config(format!("bad Q-table state {:?}", e.state)))?;
            let action: Decision = e.action.parse()?;
            if slot(action) > scenario.n_ecs() {
                return Err(Error::Config(format!("bad Q-table action {}", e.action)));
            }
            table.set(&state, action, e.value);
        }
        table.episodes_trained = self.episodes_trained;
        Ok(table)
    }
}
