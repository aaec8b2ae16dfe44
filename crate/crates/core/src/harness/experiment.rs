//! Parameter studies: sweeps over derived scenarios and learning curves.

use std::fmt;
use std::str::FromStr;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{run_episode, PiPolicy, ResultRow};
use crate::bestfit::BestFit;
use crate::config::{apply_override, ScenarioConfig};
use crate::error::{Error, Result};
use crate::mdp::{policy_iteration, TransitionTable, DEFAULT_STATE_CAP};
use crate::model::Scenario;
use crate::qlearning::{evaluate, train};
use crate::tracegen::{generate_file_set, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pi,
    Ql,
    BestFit,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Pi, Algorithm::Ql, Algorithm::BestFit];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pi => "pi",
            Algorithm::Ql => "ql",
            Algorithm::BestFit => "bestfit",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}` (pi, ql, bestfit)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveVariant {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Study {
    /// Multiplies every arrival rate.
    ArrivalRate { factors: Vec<f64> },
    /// Multiplies every EC capacity.
    Capacity { factors: Vec<f64> },
    /// EC 1 stays as in the base scenario, EC 2 gets `β·cpu` and `bw/β` of it.
    EcHeterogeneity { betas: Vec<f64> },
    /// Type 2 demands become `(β·reference_cpu, reference_bw/β)`.
    DemandHeterogeneity {
        betas: Vec<f64>,
        reference_cpu: f64,
        reference_bw: f64,
    },
    LearningCurves { variants: Vec<CurveVariant> },
}

impl Study {
    pub fn sweep_param(&self) -> &'static str {
        match self {
            Study::ArrivalRate { .. } => "arrival_rate_factor",
            Study::Capacity { .. } => "capacity_factor",
            Study::EcHeterogeneity { .. } => "ec_beta",
            Study::DemandHeterogeneity { .. } => "demand_beta",
            Study::LearningCurves { .. } => "variant",
        }
    }

    /// Empty for learning-curve studies.
    pub fn sweep_values(&self) -> &[f64] {
        match self {
            Study::ArrivalRate { factors } | Study::Capacity { factors } => factors,
            Study::EcHeterogeneity { betas } | Study::DemandHeterogeneity { betas, .. } => betas,
            Study::LearningCurves { .. } => &[],
        }
    }
}

/// Experiment definition as stored in the shipped preset files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPreset {
    pub name: String,
    pub base: String,
    #[serde(default)]
    pub overrides: Vec<String>,
    pub study: Study,
    pub algorithms: Vec<Algorithm>,
    pub agent_seeds: Vec<u64>,
}

const EXPERIMENTS: &[(&str, &str)] = &[
    ("arrival_rate", include_str!("../../presets/arrival_rate.json")),
    ("capacity", include_str!("../../presets/capacity.json")),
    ("ec_heterogeneity", include_str!("../../presets/ec_heterogeneity.json")),
    ("demand_heterogeneity", include_str!("../../presets/demand_heterogeneity.json")),
    ("alpha_gamma", include_str!("../../presets/alpha_gamma.json")),
    ("eps_decay", include_str!("../../presets/eps_decay.json")),
];

impl ExperimentPreset {
    pub fn names() -> impl Iterator<Item = &'static str> {
        EXPERIMENTS.iter().map(|(n, _)| *n)
    }

    pub fn load(name: &str) -> Result<Self> {
        let text = EXPERIMENTS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment `{name}` ({})",
                    Self::names().collect::<Vec<_>>().join(", ")
                ))
            })?;
        serde_json::from_str(text).map_err(|e| Error::Config(format!("{name}: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub base: ScenarioConfig,
    pub study: Study,
    pub algorithms: Vec<Algorithm>,
    pub agent_seeds: Vec<u64>,
    pub state_cap: usize,
}

impl ExperimentConfig {
    /// Resolves a shipped experiment. `extra_overrides` apply after the
    /// preset's own ones.
    pub fn preset(name: &str, extra_overrides: &[String]) -> Result<Self> {
        let p = ExperimentPreset::load(name)?;
        let mut overrides = p.overrides.clone();
        overrides.extend_from_slice(extra_overrides);
        let cfg = Self {
            name: p.name,
            base: ScenarioConfig::load(&p.base, &overrides)?,
            study: p.study,
            algorithms: p.algorithms,
            agent_seeds: p.agent_seeds,
            state_cap: DEFAULT_STATE_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("select at least one algorithm".into()));
        }
        if self.agent_seeds.is_empty() && self.algorithms.contains(&Algorithm::Ql) {
            return Err(Error::Config("Q-Learning needs at least one agent seed".into()));
        }
        match &self.study {
            Study::LearningCurves { variants } => {
                if variants.is_empty() {
                    return Err(Error::Config("no learning-curve variants".into()));
                }
                for v in variants {
                    self.variant_config(v)?;
                }
            }
            study => {
                let values = study.sweep_values();
                if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Config("sweep values must be positive".into()));
                }
                if let Study::DemandHeterogeneity {
                    reference_cpu,
                    reference_bw,
                    ..
                } = study
                {
                    if !(*reference_cpu > 0.0 && *reference_bw > 0.0) {
                        return Err(Error::Config("reference demands must be positive".into()));
                    }
                }
                for &v in values {
                    derive_scenario(&self.base, study, v)?;
                }
            }
        }
        Ok(())
    }

    fn variant_config(&self, v: &CurveVariant) -> Result<ScenarioConfig> {
        let mut value = serde_json::to_value(&self.base)?;
        if let Some(a) = v.alpha {
            apply_override(&mut value, &format!("ql.alpha={a}"))?;
        }
        if let Some(g) = v.gamma {
            apply_override(&mut value, &format!("ql.gamma={g}"))?;
        }
        if let Some(d) = v.eps_decay {
            apply_override(&mut value, &format!("ql.eps_decay={d}"))?;
        }
        if let Some(n) = v.episodes {
            apply_override(&mut value, &format!("ql.episodes={n}"))?;
        }
        ScenarioConfig::from_value(value)
    }
}

fn to_integer(x: f64, what: &str, warnings: &mut Vec<String>) -> Result<u64> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Config(format!("{what} derived as {x}")));
    }
    let r = x.round();
    if (x - r).abs() > 1e-6 {
        warnings.push(format!("{what} = {x} rounded to {r}"));
    }
    Ok(r as u64)
}

// keeps 0.2·3 at 0.6 instead of 0.6000000000000001
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Scenario for one sweep value, plus any rounding warnings.
pub fn derive_scenario(
    base: &ScenarioConfig,
    study: &Study,
    value: f64,
) -> Result<(ScenarioConfig, Vec<String>)> {
    let mut cfg = base.clone();
    let mut warnings = Vec::new();
    match study {
        Study::ArrivalRate { .. } => {
            for t in &mut cfg.vnf_types {
                t.arrival_rate = tidy(t.arrival_rate * value);
            }
        }
        Study::Capacity { .. } => {
            for (k, ec) in cfg.topology.ecs.iter_mut().enumerate() {
                ec.cpu = to_integer(ec.cpu as f64 * value, &format!("EC{} cpu", k + 1), &mut warnings)?;
                ec.bw = to_integer(ec.bw as f64 * value, &format!("EC{} bw", k + 1), &mut warnings)?;
            }
        }
        Study::EcHeterogeneity { .. } => {
            if cfg.topology.ecs.len() != 2 {
                return Err(Error::Config("EC heterogeneity needs exactly two ECs".into()));
            }
            let ec1 = cfg.topology.ecs[0].clone();
            let ec2 = &mut cfg.topology.ecs[1];
            ec2.cpu = to_integer(ec1.cpu as f64 * value, "EC2 cpu", &mut warnings)?;
            ec2.bw = to_integer(ec1.bw as f64 / value, "EC2 bw", &mut warnings)?;
        }
        Study::DemandHeterogeneity {
            reference_cpu,
            reference_bw,
            ..
        } => {
            if cfg.vnf_types.len() != 2 {
                return Err(Error::Config("demand heterogeneity needs exactly two types".into()));
            }
            let t2 = &mut cfg.vnf_types[1];
            t2.cpu = to_integer(reference_cpu * value, "type 2 cpu", &mut warnings)?;
            t2.bw = to_integer(reference_bw / value, "type 2 bw", &mut warnings)?;
        }
        Study::LearningCurves { .. } => {
            return Err(Error::Config("learning-curve studies have no sweep".into()));
        }
    }
    cfg.validate()?;
    Ok((cfg, warnings))
}

/// Parameters of one derived scenario, one entry per type or EC.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamRow {
    pub experiment: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub ec_cpu: Vec<u64>,
    pub ec_bw: Vec<u64>,
    pub req_cpu: Vec<u64>,
    pub req_bw: Vec<u64>,
}

impl ParamRow {
    pub const HEADER: [&'static str; 9] = [
        "experiment",
        "sweep_param",
        "sweep_value",
        "lambda",
        "mu",
        "ec_cpu",
        "ec_bw",
        "req_cpu",
        "req_bw",
    ];

    pub fn new(experiment: &str, sweep_param: &str, sweep_value: f64, cfg: &ScenarioConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            sweep_param: sweep_param.to_string(),
            sweep_value,
            lambda: cfg.vnf_types.iter().map(|t| t.arrival_rate).collect(),
            mu: cfg.vnf_types.iter().map(|t| t.departure_rate).collect(),
            ec_cpu: cfg.topology.ecs.iter().map(|e| e.cpu).collect(),
            ec_bw: cfg.topology.ecs.iter().map(|e| e.bw).collect(),
            req_cpu: cfg.vnf_types.iter().map(|t| t.cpu).collect(),
            req_bw: cfg.vnf_types.iter().map(|t| t.bw).collect(),
        }
    }

    /// List fields are joined with `;`.
    pub fn record(&self) -> Vec<String> {
        fn join<T: fmt::Debug>(xs: &[T]) -> String {
            xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";")
        }
        vec![
            self.experiment.clone(),
            self.sweep_param.clone(),
            format!("{:?}", self.sweep_value),
            join(&self.lambda),
            join(&self.mu),
            join(&self.ec_cpu),
            join(&self.ec_bw),
            join(&self.req_cpu),
            join(&self.req_bw),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub params: Vec<ParamRow>,
    pub warnings: Vec<String>,
}

/// Labels attached to every result row of one evaluation.
#[derive(Clone, Debug)]
pub struct RunLabel<'a> {
    pub experiment: &'a str,
    pub sweep_param: &'a str,
    pub sweep_value: f64,
}

fn result_row(label: &RunLabel<'_>, algorithm: Algorithm, trace: &Trace, r: &super::EpisodeResult) -> ResultRow {
    ResultRow {
        experiment: label.experiment.to_string(),
        algorithm: algorithm.name().to_string(),
        sweep_param: label.sweep_param.to_string(),
        sweep_value: label.sweep_value,
        trace_seed: trace.seed,
        total: r.total_arrivals,
        accepted: r.accepted,
        rejected: r.rejected,
        rejection_ratio: r.rejection_ratio(),
    }
}

pub fn evaluate_pi(
    scenario: &Scenario,
    cfg: &ScenarioConfig,
    eval: &[Trace],
    state_cap: usize,
    label: &RunLabel<'_>,
) -> Result<Vec<ResultRow>> {
    let table = TransitionTable::build(scenario, state_cap)?;
    let solution = policy_iteration(&table, &cfg.pi_config())?;
    let policy = PiPolicy::from_solution(&table, &solution);
    eval.iter()
        .map(|t| {
            let r = run_episode(&mut policy.clone(), t, scenario)?;
            Ok(result_row(label, Algorithm::Pi, t, &r))
        })
        .collect()
}

/// Trains one agent per seed on `train_set` and evaluates each on every
/// trace of `eval`, each time from the freshly trained table.
pub fn evaluate_ql(
    scenario: &Scenario,
    cfg: &ScenarioConfig,
    train_set: &[Trace],
    eval: &[Trace],
    agent_seeds: &[u64],
    label: &RunLabel<'_>,
) -> Result<Vec<ResultRow>> {
    let per_seed: Vec<Result<Vec<ResultRow>>> = thread::scope(|s| {
        let handles: Vec<_> = agent_seeds
            .iter()
            .map(|&seed| {
                s.spawn(move || {
                    let mut agent = cfg.agent_config();
                    agent.seed = seed;
                    let trained = train(scenario, train_set, cfg.ql.episodes, &agent)?;
                    eval.iter()
                        .map(|t| {
                            let (r, _) = evaluate(&trained.table, t, scenario, &agent)?;
                            Ok(result_row(label, Algorithm::Ql, t, &r))
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("Q-Learning worker panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Trace `t` uses the tie-break seed `bestfit.seed + t.seed`.
pub fn evaluate_bestfit(
    scenario: &Scenario,
    cfg: &ScenarioConfig,
    eval: &[Trace],
    label: &RunLabel<'_>,
) -> Result<Vec<ResultRow>> {
    eval.iter()
        .map(|t| {
            let mut bf = BestFit::new(cfg.bestfit.seed.wrapping_add(t.seed));
            let r = run_episode(&mut bf, t, scenario)?;
            Ok(result_row(label, Algorithm::BestFit, t, &r))
        })
        .collect()
}

/// Generates the configured training and evaluation sets and runs every
/// selected algorithm on the evaluation set.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    algorithms: &[Algorithm],
    agent_seeds: &[u64],
    state_cap: usize,
    label: &RunLabel<'_>,
) -> Result<Vec<ResultRow>> {
    let scenario = cfg.scenario()?;
    let f = &cfg.files;
    let eval = generate_file_set(&cfg.vnf_types, f.n_eval, f.n_requests, cfg.eval_base_seed())?;
    let mut rows = Vec::new();
    for &algorithm in algorithms {
        match algorithm {
            Algorithm::Pi => rows.extend(evaluate_pi(&scenario, cfg, &eval, state_cap, label)?),
            Algorithm::Ql => {
                let train_set =
                    generate_file_set(&cfg.vnf_types, f.n_train, f.n_requests, cfg.train_base_seed())?;
                rows.extend(evaluate_ql(&scenario, cfg, &train_set, &eval, agent_seeds, label)?);
            }
            Algorithm::BestFit => rows.extend(evaluate_bestfit(&scenario, cfg, &eval, label)?),
        }
    }
    Ok(rows)
}

/// Runs a sweep study. Sweep points are evaluated concurrently; rows come
/// back in sweep order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if matches!(cfg.study, Study::LearningCurves { .. }) {
        return Err(Error::Config(format!(
            "`{}` is a learning-curve study",
            cfg.name
        )));
    }
    let param = cfg.study.sweep_param();
    let mut report = ExperimentReport::default();
    let mut points = Vec::new();
    for &value in cfg.study.sweep_values() {
        let (derived, warnings) = derive_scenario(&cfg.base, &cfg.study, value)?;
        for w in warnings {
            log::warn!("{}: {param}={value}: {w}", cfg.name);
            report.warnings.push(format!("{param}={value}: {w}"));
        }
        report.params.push(ParamRow::new(&cfg.name, param, value, &derived));
        points.push((value, derived));
    }

    let results: Vec<Result<Vec<ResultRow>>> = thread::scope(|s| {
        let handles: Vec<_> = points
            .iter()
            .map(|(value, derived)| {
                s.spawn(move || {
                    let label = RunLabel {
                        experiment: &cfg.name,
                        sweep_param: param,
                        sweep_value: *value,
                    };
                    run_scenario(derived, &cfg.algorithms, &cfg.agent_seeds, cfg.state_cap, &label)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    for r in results {
        report.rows.extend(r?);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveResult {
    pub label: String,
    pub alpha: f64,
    pub gamma: f64,
    pub eps_decay: f64,
    pub episodes: usize,
    /// Accepted fraction per training episode.
    pub curve: Vec<f64>,
}

/// Trains one agent per variant (and agent seed) on the configured
/// training set and returns its per-episode average reward.
pub fn run_learning_study(cfg: &ExperimentConfig) -> Result<Vec<CurveResult>> {
    cfg.validate()?;
    let Study::LearningCurves { variants } = &cfg.study else {
        return Err(Error::Config(format!("`{}` is not a learning-curve study", cfg.name)));
    };
    let f = &cfg.base.files;
    let train_set = generate_file_set(
        &cfg.base.vnf_types,
        f.n_train,
        f.n_requests,
        cfg.base.train_base_seed(),
    )?;
    let scenario = cfg.base.scenario()?;
    let seeds: Vec<u64> = if cfg.agent_seeds.is_empty() {
        vec![cfg.base.ql.seed]
    } else {
        cfg.agent_seeds.clone()
    };

    let mut jobs = Vec::new();
    for v in variants {
        let vcfg = cfg.variant_config(v)?;
        for &seed in &seeds {
            let label = if seeds.len() > 1 {
                format!("{}_seed{seed}", v.label)
            } else {
                v.label.clone()
            };
            jobs.push((label, vcfg.clone(), seed));
        }
    }
    let results: Vec<Result<CurveResult>> = thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(label, vcfg, seed)| {
                let scenario = &scenario;
                let train_set = &train_set;
                s.spawn(move || {
                    let mut agent = vcfg.agent_config();
                    agent.seed = *seed;
                    let out = train(scenario, train_set, vcfg.ql.episodes, &agent)?;
                    Ok(CurveResult {
                        label: label.clone(),
                        alpha: agent.alpha,
                        gamma: agent.gamma,
                        eps_decay: agent.schedule.eps_decay,
                        episodes: vcfg.ql.episodes,
                        curve: out.curve,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}
