//! Weighted best-fit baseline.
//!
//! Each feasible EC is scored with
//! `l = a·fcpu/100 + (1 − a)·1/hops`, where `a` is the EC's used link
//! bandwidth as a fraction of the total link capacity of the network.
//! An idle network therefore ranks ECs by proximity, and the CPU term gains
//! weight as an EC's link fills up.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::{ArrivalContext, DecisionSource};
use crate::model::{AllocationMatrix, Decision, Scenario};

pub fn metric(free_cpu: u64, used_bw: u64, total_bw: u64, hops: u64) -> Result<f64> {
    if total_bw == 0 {
        return Err(Error::InvalidTopology("total network bandwidth is 0".into()));
    }
    if hops == 0 {
        return Err(Error::InvalidTopology("hop count is 0".into()));
    }
    let a = used_bw as f64 / total_bw as f64;
    Ok(a * free_cpu as f64 / 100.0 + (1.0 - a) / hops as f64)
}

pub fn score(scenario: &Scenario, alloc: &AllocationMatrix, ec: usize) -> Result<f64> {
    metric(
        scenario.free_cpu(alloc, ec),
        scenario.used_bw(alloc, ec),
        scenario.topology.total_bw(),
        scenario.topology.ecs[ec].hops,
    )
}

/// Best-fit decision for one request of `vnf_type`.
///
/// No feasible EC rejects; a single one is taken. Otherwise the ECs with the
/// highest score are kept; if several remain and they all have the same
/// `(free_cpu, free_bw)`, one is drawn uniformly from `rng`, else the lowest
/// index wins.
pub fn place<R: Rng + ?Sized>(
    scenario: &Scenario,
    alloc: &AllocationMatrix,
    vnf_type: usize,
    rng: &mut R,
) -> Result<Decision> {
    let feasible = scenario.feasible_ecs(alloc, vnf_type);
    match feasible.as_slice() {
        [] => return Ok(Decision::Reject),
        [k] => return Ok(Decision::Place(*k)),
        _ => {}
    }
    let scored = feasible
        .iter()
        .map(|&k| Ok((k, score(scenario, alloc, k)?)))
        .collect::<Result<Vec<_>>>()?;
    let best = scored
        .iter()
        .map(|&(_, l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let top: Vec<usize> = scored
        .iter()
        .filter(|&&(_, l)| l == best)
        .map(|&(k, _)| k)
        .collect();

    let availability = |k: usize| (scenario.free_cpu(alloc, k), scenario.free_bw(alloc, k));
    let same_availability = top.iter().all(|&k| availability(k) == availability(top[0]));
    if top.len() > 1 && same_availability {
        Ok(Decision::Place(top[rng.random_range(0..top.len())]))
    } else {
        Ok(Decision::Place(top[0]))
    }
}

/// Best fit as a [`DecisionSource`], with its own seeded tie-break stream.
#[derive(Clone, Debug)]
pub struct BestFit {
    rng: ChaCha8Rng,
}

impl BestFit {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl DecisionSource for BestFit {
    fn decide(&mut self, ctx: &ArrivalContext<'_>) -> Result<Decision> {
        place(ctx.scenario, ctx.alloc, ctx.vnf_type, &mut self.rng)
    }
}
