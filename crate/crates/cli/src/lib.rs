//! Command implementations behind the `vnfsim` binary.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use vnfsim_core::config::ScenarioConfig;
use vnfsim_core::harness::{
    compare_algorithms, evaluate_bestfit, evaluate_pi, evaluate_ql, run_episode, run_experiment,
    run_learning_study, write_csv, write_curve_csv, write_curves_csv, write_params_csv, Algorithm,
    ExperimentConfig, PiPolicy, ResultRow, RunLabel, Study,
};
use vnfsim_core::mdp::{
    policy_iteration, proactive_rejections, PolicyArtifact, TransitionTable, DEFAULT_STATE_CAP,
};
use vnfsim_core::qlearning::{evaluate as evaluate_agent, train, QTableArtifact};
use vnfsim_core::tracegen::{generate_file_set, Trace};
use vnfsim_core::Error;

pub const STATE_CAP_VAR: &str = "VNFSIM_STATE_CAP";

#[derive(Debug, Parser)]
#[command(name = "vnfsim", version, about = "VNF placement simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario JSON file or preset name (table1, table3_sim2).
    #[arg(long, default_value = "table1")]
    pub config: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override a config field by dotted path, e.g. `ql.alpha=0.9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Sets both the agent seed and the trace base seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the training and evaluation trace files.
    GenTraces(Common),
    /// Solve the MDP with Policy Iteration and write policy.json.
    SolvePi(Common),
    /// Train a Q-Learning agent and write qtable.json and learning_curve.csv.
    TrainQl {
        #[command(flatten)]
        common: Common,
        /// Directory holding train_*.jsonl; generated from the config if absent.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Run the selected algorithms on the evaluation traces.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "pi,ql,bestfit")]
        algorithms: Vec<String>,
        /// Directory holding eval_*.jsonl (and train_*.jsonl for QL).
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Solved policy to replay instead of solving.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Trained table to evaluate instead of training.
        #[arg(long)]
        qtable: Option<PathBuf>,
    },
    /// Run a shipped parameter study.
    Experiment {
        /// arrival_rate, capacity, ec_heterogeneity, demand_heterogeneity,
        /// alpha_gamma or eps_decay.
        preset: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Sets the trace base seed and replaces the agent seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict the preset's algorithms.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
    },
}

/// Process exit status for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(
            Error::Config(_)
            | Error::InvalidScenario(_)
            | Error::InvalidRate(_)
            | Error::InvalidTopology(_)
            | Error::TraceFormat(_)
            | Error::Json(_),
        ) => 2,
        Some(Error::ScenarioTooLarge { .. }) => 3,
        Some(Error::ScenarioMismatch { .. } | Error::StateNotFound(_)) => 4,
        Some(Error::Io(_)) => 5,
        Some(_) => 1,
        None if err.chain().any(|e| e.is::<std::io::Error>()) => 5,
        None => 1,
    }
}

pub fn state_cap() -> Result<usize> {
    match std::env::var(STATE_CAP_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::Config(format!("{STATE_CAP_VAR}={v} is not a non-negative integer")).into()
        }),
        Err(_) => Ok(DEFAULT_STATE_CAP),
    }
}

fn seed_overrides(sets: &[String], seed: Option<u64>) -> Vec<String> {
    let mut all = sets.to_vec();
    if let Some(s) = seed {
        all.push(format!("ql.seed={s}"));
        all.push(format!("files.base_seed={s}"));
    }
    all
}

pub fn load_config(common: &Common) -> Result<ScenarioConfig> {
    Ok(ScenarioConfig::load(
        &common.config,
        &seed_overrides(&common.sets, common.seed),
    )?)
}

pub fn parse_algorithms(names: &[String]) -> Result<Vec<Algorithm>> {
    let mut algos: Vec<Algorithm> = names
        .iter()
        .filter(|n| !n.trim().is_empty())
        .map(|n| n.parse::<Algorithm>())
        .collect::<Result<_, _>>()?;
    algos.sort();
    algos.dedup();
    if algos.is_empty() {
        return Err(Error::Config("select at least one algorithm".into()).into());
    }
    Ok(algos)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenTraces(common) => {
            let cfg = load_config(&common)?;
            let written = gen_traces(&cfg, &common.out)?;
            println!("wrote {} trace files to {}", written.len(), common.out.display());
        }
        Command::SolvePi(common) => {
            let cfg = load_config(&common)?;
            let started = Instant::now();
            let report = solve_pi(&cfg, &common.out, state_cap()?)?;
            println!(
                "states {}  iterations {}  sweeps {}  proactive rejections {}  wall time {:.3}s",
                report.states,
                report.iterations,
                report.sweeps,
                report.proactive_rejections,
                started.elapsed().as_secs_f64()
            );
        }
        Command::TrainQl { common, traces } => {
            let cfg = load_config(&common)?;
            let curve = train_ql(&cfg, &common.out, traces.as_deref())?;
            if let Some(last) = curve.last() {
                println!("trained {} episodes, final average reward {last:.4}", curve.len());
            }
        }
        Command::Evaluate {
            common,
            algorithms,
            traces,
            policy,
            qtable,
        } => {
            let cfg = load_config(&common)?;
            let inputs = EvalInputs {
                algorithms: parse_algorithms(&algorithms)?,
                traces,
                policy,
                qtable,
                state_cap: state_cap()?,
            };
            let rows = evaluate(&cfg, &common.out, &inputs)?;
            print_summary(&rows)?;
        }
        Command::Experiment {
            preset,
            out,
            sets,
            seed,
            algorithms,
        } => {
            let mut cfg =
                ExperimentConfig::preset(&preset, &seed_overrides(&sets, seed))?;
            if let Some(s) = seed {
                cfg.agent_seeds = vec![s];
            }
            if let Some(names) = algorithms {
                let keep = parse_algorithms(&names)?;
                cfg.algorithms.retain(|a| keep.contains(a));
            }
            cfg.state_cap = state_cap()?;
            experiment(&cfg, &out)?;
        }
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn trace_name(prefix: &str, i: usize) -> String {
    format!("{prefix}_{i:03}.jsonl")
}

fn write_traces(dir: &Path, prefix: &str, traces: &[Trace]) -> Result<Vec<PathBuf>> {
    traces
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let name = trace_name(prefix, i);
            let mut w = create(dir, &name)?;
            t.write_jsonl(&mut w)?;
            w.flush()?;
            Ok(dir.join(name))
        })
        .collect()
}

/// Reads every `{prefix}_*.jsonl` in `dir`, in file-name order.
pub fn read_traces(dir: &Path, prefix: &str) -> Result<Vec<Trace>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(&format!("{prefix}_")) && n.ends_with(".jsonl"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no {prefix}_*.jsonl in {}", dir.display())).into());
    }
    paths
        .iter()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Trace::read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
        })
        .collect()
}

fn train_set(cfg: &ScenarioConfig) -> Result<Vec<Trace>> {
    let f = &cfg.files;
    Ok(generate_file_set(
        &cfg.vnf_types,
        f.n_train,
        f.n_requests,
        cfg.train_base_seed(),
    )?)
}

fn eval_set(cfg: &ScenarioConfig) -> Result<Vec<Trace>> {
    let f = &cfg.files;
    Ok(generate_file_set(
        &cfg.vnf_types,
        f.n_eval,
        f.n_requests,
        cfg.eval_base_seed(),
    )?)
}

/// `train_000.jsonl ..` then `eval_000.jsonl ..`.
pub fn gen_traces(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = write_traces(out, "train", &train_set(cfg)?)?;
    written.extend(write_traces(out, "eval", &eval_set(cfg)?)?);
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiReport {
    pub states: usize,
    pub iterations: usize,
    pub sweeps: usize,
    pub proactive_rejections: usize,
}

pub fn solve_pi(cfg: &ScenarioConfig, out: &Path, state_cap: usize) -> Result<PiReport> {
    let scenario = cfg.scenario()?;
    let pi_cfg = cfg.pi_config();
    let table = TransitionTable::build(&scenario, state_cap)?;
    let solution = policy_iteration(&table, &pi_cfg)?;
    ensure_dir(out)?;
    write_json(
        out,
        "policy.json",
        &PolicyArtifact::new(&scenario, &table, &solution, &pi_cfg),
    )?;
    Ok(PiReport {
        states: table.len(),
        iterations: solution.iterations,
        sweeps: solution.sweeps,
        proactive_rejections: proactive_rejections(&table, &solution.policy),
    })
}

/// Returns the learning curve that was written to `learning_curve.csv`.
pub fn train_ql(cfg: &ScenarioConfig, out: &Path, traces: Option<&Path>) -> Result<Vec<f64>> {
    let scenario = cfg.scenario()?;
    let traces = match traces {
        Some(dir) => read_traces(dir, "train")?,
        None => train_set(cfg)?,
    };
    let agent = cfg.agent_config();
    let trained = train(&scenario, &traces, cfg.ql.episodes, &agent)?;
    ensure_dir(out)?;
    write_json(
        out,
        "qtable.json",
        &QTableArtifact::new(&trained.table, &agent, &scenario),
    )?;
    let mut w = create(out, "learning_curve.csv")?;
    write_curve_csv(&mut w, &trained.curve)?;
    w.flush()?;
    Ok(trained.curve)
}

#[derive(Clone, Debug)]
pub struct EvalInputs {
    pub algorithms: Vec<Algorithm>,
    pub traces: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub qtable: Option<PathBuf>,
    pub state_cap: usize,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(Error::from)
        .with_context(|| format!("parsing {}", path.display()))
}

/// Writes `results.csv`, `summary.csv` and `deltas.csv`; returns the result rows.
pub fn evaluate(cfg: &ScenarioConfig, out: &Path, inputs: &EvalInputs) -> Result<Vec<ResultRow>> {
    let scenario = cfg.scenario()?;
    let eval = match &inputs.traces {
        Some(dir) => read_traces(dir, "eval")?,
        None => eval_set(cfg)?,
    };
    let label = RunLabel {
        experiment: &cfg.name,
        sweep_param: "base",
        sweep_value: 1.0,
    };

    let mut rows = Vec::new();
    for &algorithm in &inputs.algorithms {
        match algorithm {
            Algorithm::Pi => match &inputs.policy {
                Some(path) => {
                    let artifact: PolicyArtifact = read_json(path)?;
                    let policy = PiPolicy::from_artifact(&artifact, &scenario)?;
                    for t in &eval {
                        let r = run_episode(&mut policy.clone(), t, &scenario)?;
                        rows.push(row(&label, algorithm, t, &r));
                    }
                }
                None => rows.extend(evaluate_pi(&scenario, cfg, &eval, inputs.state_cap, &label)?),
            },
            Algorithm::Ql => match &inputs.qtable {
                Some(path) => {
                    let artifact: QTableArtifact = read_json(path)?;
                    let table = artifact.to_table(&scenario)?;
                    for t in &eval {
                        let (r, _) = evaluate_agent(&table, t, &scenario, &artifact.config)?;
                        rows.push(row(&label, algorithm, t, &r));
                    }
                }
                None => {
                    let train_traces = match &inputs.traces {
                        Some(dir) => read_traces(dir, "train")?,
                        None => train_set(cfg)?,
                    };
                    rows.extend(evaluate_ql(
                        &scenario,
                        cfg,
                        &train_traces,
                        &eval,
                        &[cfg.ql.seed],
                        &label,
                    )?);
                }
            },
            Algorithm::BestFit => rows.extend(evaluate_bestfit(&scenario, cfg, &eval, &label)?),
        }
    }
    write_results(out, &rows)?;
    Ok(rows)
}

fn row(
    label: &RunLabel<'_>,
    algorithm: Algorithm,
    trace: &Trace,
    r: &vnfsim_core::harness::EpisodeResult,
) -> ResultRow {
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

fn write_results(out: &Path, rows: &[ResultRow]) -> Result<()> {
    let summary = compare_algorithms(rows)?;
    ensure_dir(out)?;
    for (name, result) in [
        ("results.csv", write_csv(create(out, "results.csv")?, rows)),
        ("summary.csv", write_csv(create(out, "summary.csv")?, &summary.rows)),
        ("deltas.csv", write_csv(create(out, "deltas.csv")?, &summary.deltas)),
    ] {
        result.with_context(|| format!("writing {name}"))?;
    }
    Ok(())
}

fn print_summary(rows: &[ResultRow]) -> Result<()> {
    for r in compare_algorithms(rows)?.rows {
        println!(
            "{:<8} {}={:<6} runs {:>3}  mean rejection {:.4}  std {:.4}",
            r.algorithm, r.sweep_param, r.sweep_value, r.runs, r.mean, r.std
        );
    }
    Ok(())
}

/// Sweep studies write `results.csv`, `summary.csv`, `deltas.csv` and
/// `params.csv`; learning-curve studies write `learning_curves.csv`.
pub fn experiment(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    if let Study::LearningCurves { .. } = cfg.study {
        let curves = run_learning_study(cfg)?;
        let mut w = create(out, "learning_curves.csv")?;
        write_curves_csv(&mut w, &curves)?;
        w.flush()?;
        for c in &curves {
            if let (Some(first), Some(last)) = (c.curve.first(), c.curve.last()) {
                println!(
                    "{:<10} episodes {:>5}  first {first:.4}  last {last:.4}",
                    c.label, c.episodes
                );
            }
        }
        return Ok(());
    }
    if cfg.algorithms.is_empty() {
        bail!(Error::Config("no algorithm left to run".into()));
    }
    let report = run_experiment(cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut w = create(out, "params.csv")?;
    write_params_csv(&mut w, &report.params)?;
    w.flush()?;
    write_results(out, &report.rows)?;
    print_summary(&report.rows)
}
