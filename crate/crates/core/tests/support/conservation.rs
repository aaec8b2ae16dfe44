//! Per-event bookkeeping checks for one simulated episode.

#![allow(dead_code)]

use std::collections::HashSet;

use proptest::prelude::*;
use vnfsim_core::bestfit::BestFit;
use vnfsim_core::harness::{
    run_episode_observed, ArrivalContext, DecisionSource, FirstFit, RejectAll, SimEvent,
};
use vnfsim_core::model::{Decision, EcNode, Scenario, Topology, VnfType};
use vnfsim_core::tracegen::{generate_trace, Trace};

/// Places on a pseudo-random feasible EC or rejects.
pub struct Coin(u64);

impl DecisionSource for Coin {
    fn decide(&mut self, ctx: &ArrivalContext<'_>) -> vnfsim_core::Result<Decision> {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        let feasible = ctx.feasible_ecs();
        let pick = (self.0 % (feasible.len() as u64 + 1)) as usize;
        Ok(feasible.get(pick).map_or(Decision::Reject, |&k| Decision::Place(k)))
    }
}

pub fn policy(kind: u8, seed: u64) -> Box<dyn DecisionSource> {
    match kind % 4 {
        0 => Box::new(RejectAll),
        1 => Box::new(FirstFit),
        2 => Box::new(BestFit::new(seed)),
        _ => Box::new(Coin(seed | 1)),
    }
}

#[derive(Clone, Debug)]
pub struct Case {
    pub scenario: Scenario,
    pub trace: Trace,
    pub policy: u8,
    pub seed: u64,
}

pub fn case() -> impl Strategy<Value = Case> {
    let ecs = prop::collection::vec((0u64..=12, 0u64..=1000, 1u64..=3), 1..=3);
    let types = prop::collection::vec((1u64..=4, 10u64..=400, 0.1f64..5.0, 0.1f64..3.0), 1..=3);
    (ecs, types, 1usize..=300, any::<u64>(), any::<u8>()).prop_map(
        |(ecs, types, n, seed, policy)| {
            let scenario = Scenario::new(
                Topology::new(
                    ecs.into_iter()
                        .map(|(c, b, h)| EcNode::new(c, b).with_hops(h))
                        .collect(),
                )
                .unwrap(),
                types
                    .into_iter()
                    .map(|(c, b, l, m)| VnfType::new(c, b, l, m).unwrap())
                    .collect(),
            )
            .unwrap();
            let trace = generate_trace(&scenario.vnf_types, n, seed).unwrap();
            Case {
                scenario,
                trace,
                policy,
                seed,
            }
        },
    )
}

/// Conservation, capacity at every event, and departures only for
/// accepted requests (each at most once).
pub fn check(case: &Case) -> Result<(), String> {
    let s = &case.scenario;
    let mut placed = HashSet::new();
    let mut departed = HashSet::new();
    let mut problems = Vec::new();
    let mut p = policy(case.policy, case.seed);
    let r = run_episode_observed(p.as_mut(), &case.trace, s, |ev, alloc| {
        if !s.respects_capacity(alloc) {
            problems.push(format!("capacity exceeded after {ev:?}"));
        }
        match *ev {
            SimEvent::Arrival {
                seq,
                decision: Decision::Place(_),
                ..
            } => {
                placed.insert(seq);
            }
            SimEvent::Arrival { .. } => {}
            SimEvent::Departure { seq, .. } => {
                if !placed.contains(&seq) || !departed.insert(seq) {
                    problems.push(format!("unexpected departure of request {seq}"));
                }
            }
        }
    })
    .map_err(|e| e.to_string())?;
    if r.accepted + r.rejected != r.total_arrivals || r.total_arrivals != case.trace.len() {
        problems.push(format!(
            "{} accepted + {} rejected != {} arrivals",
            r.accepted, r.rejected, r.total_arrivals
        ));
    }
    if placed.len() != r.accepted {
        problems.push("accepted count disagrees with placements".into());
    }
    match problems.is_empty() {
        true => Ok(()),
        false => Err(problems.join("; ")),
    }
}
