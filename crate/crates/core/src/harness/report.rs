use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CurveResult, ParamRow};
use crate::error::{Error, Result};

/// One (algorithm, evaluation trace) run. Written to `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub algorithm: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub trace_seed: u64,
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejection_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub algorithm: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

/// `mean(minuend) − mean(subtrahend)` of the rejection ratio at one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub experiment: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub minuend: String,
    pub subtrahend: String,
    pub delta: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub deltas: Vec<DeltaRow>,
}

impl Summary {
    pub fn mean(&self, algorithm: &str, sweep_value: f64) -> Option<f64> {
        self.row(algorithm, sweep_value).map(|r| r.mean)
    }

    pub fn row(&self, algorithm: &str, sweep_value: f64) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.sweep_value == sweep_value)
    }

    pub fn delta(&self, minuend: &str, subtrahend: &str, sweep_value: f64) -> Option<f64> {
        self.deltas
            .iter()
            .find(|d| {
                d.minuend == minuend && d.subtrahend == subtrahend && d.sweep_value == sweep_value
            })
            .map(|d| d.delta)
    }
}

fn algorithm_rank(name: &str) -> usize {
    match name {
        "pi" => 0,
        "ql" => 1,
        "bestfit" => 2,
        _ => 3,
    }
}

/// (experiment, sweep_param, sweep_value) with sweep values ordered numerically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct PointKey(String, String, u64);

impl PointKey {
    fn of(r: &ResultRow) -> Self {
        // sweep values are positive, where bit order is numeric order
        Self(r.experiment.clone(), r.sweep_param.clone(), r.sweep_value.to_bits())
    }
}

/// Mean and standard deviation per (sweep value, algorithm) plus pairwise
/// deltas. Every algorithm at a sweep value must have run on the same set
/// of traces.
pub fn compare_algorithms(rows: &[ResultRow]) -> Result<Summary> {
    let mut points: BTreeMap<PointKey, BTreeMap<(usize, String), Vec<&ResultRow>>> =
        BTreeMap::new();
    for r in rows {
        points
            .entry(PointKey::of(r))
            .or_default()
            .entry((algorithm_rank(&r.algorithm), r.algorithm.clone()))
            .or_default()
            .push(r);
    }

    let mut summary = Summary::default();
    for (PointKey(experiment, sweep_param, bits), algos) in points {
        let sweep_value = f64::from_bits(bits);
        let trace_sets: Vec<BTreeSet<u64>> = algos
            .values()
            .map(|runs| runs.iter().map(|r| r.trace_seed).collect())
            .collect();
        if trace_sets.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::MismatchedTraces(format!(
                "{experiment}: algorithms at {sweep_param}={sweep_value} ran on different traces"
            )));
        }

        let means: Vec<(String, f64)> = algos
            .iter()
            .map(|((_, name), runs)| {
                let n = runs.len() as f64;
                let mean = runs.iter().map(|r| r.rejection_ratio).sum::<f64>() / n;
                let var = if runs.len() > 1 {
                    runs.iter()
                        .map(|r| (r.rejection_ratio - mean).powi(2))
                        .sum::<f64>()
                        / (n - 1.0)
                } else {
                    0.0
                };
                summary.rows.push(SummaryRow {
                    experiment: experiment.clone(),
                    algorithm: name.clone(),
                    sweep_param: sweep_param.clone(),
                    sweep_value,
                    runs: runs.len(),
                    mean,
                    std: var.sqrt(),
                });
                (name.clone(), mean)
            })
            .collect();

        for (i, (base, base_mean)) in means.iter().enumerate() {
            for (other, other_mean) in &means[i + 1..] {
                summary.deltas.push(DeltaRow {
                    experiment: experiment.clone(),
                    sweep_param: sweep_param.clone(),
                    sweep_value,
                    minuend: other.clone(),
                    subtrahend: base.clone(),
                    delta: other_mean - base_mean,
                });
            }
        }
    }
    Ok(summary)
}

pub fn write_csv<S: Serialize, W: Write>(writer: W, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `episode,avg_reward`, episodes counted from 0.
pub fn write_curve_csv<W: Write>(writer: W, curve: &[f64]) -> Result<()> {
    #[derive(Serialize)]
    struct Point {
        episode: usize,
        avg_reward: f64,
    }
    let points: Vec<Point> = curve
        .iter()
        .enumerate()
        .map(|(episode, &avg_reward)| Point {
            episode,
            avg_reward,
        })
        .collect();
    if points.is_empty() {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["episode", "avg_reward"])?;
        w.flush()?;
        return Ok(());
    }
    write_csv(writer, &points)
}

pub fn write_params_csv<W: Write>(writer: W, rows: &[ParamRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ParamRow::HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// All curves in long form: `label,alpha,gamma,eps_decay,episode,avg_reward`.
pub fn write_curves_csv<W: Write>(writer: W, curves: &[CurveResult]) -> Result<()> {
    #[derive(Serialize)]
    struct Point<'a> {
        label: &'a str,
        alpha: f64,
        gamma: f64,
        eps_decay: f64,
        episode: usize,
        avg_reward: f64,
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(["label", "alpha", "gamma", "eps_decay", "episode", "avg_reward"])?;
    for c in curves {
        for (episode, &avg_reward) in c.curve.iter().enumerate() {
            w.serialize(Point {
                label: &c.label,
                alpha: c.alpha,
                gamma: c.gamma,
                eps_decay: c.eps_decay,
                episode,
                avg_reward,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
