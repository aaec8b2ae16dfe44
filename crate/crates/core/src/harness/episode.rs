use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::{AllocationMatrix, Decision, Scenario};
use crate::tracegen::Trace;

/// What a placement policy sees when a request arrives.
#[derive(Clone, Copy, Debug)]
pub struct ArrivalContext<'a> {
    pub scenario: &'a Scenario,
    pub alloc: &'a AllocationMatrix,
    pub vnf_type: usize,
    pub seq: u64,
    pub time: f64,
}

impl ArrivalContext<'_> {
    pub fn feasible_ecs(&self) -> Vec<usize> {
        self.scenario.feasible_ecs(self.alloc, self.vnf_type)
    }
}

/// A pluggable placement policy driven by the episode runner.
pub trait DecisionSource {
    fn decide(&mut self, ctx: &ArrivalContext<'_>) -> Result<Decision>;

    /// Called once after the last arrival of an episode.
    fn episode_end(&mut self) {}
}

impl<F> DecisionSource for F
where
    F: FnMut(&ArrivalContext<'_>) -> Decision,
{
    fn decide(&mut self, ctx: &ArrivalContext<'_>) -> Result<Decision> {
        Ok(self(ctx))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RejectAll;

impl DecisionSource for RejectAll {
    fn decide(&mut self, _: &ArrivalContext<'_>) -> Result<Decision> {
        Ok(Decision::Reject)
    }
}

/// Lowest-index EC that fits.
#[derive(Clone, Copy, Debug, Default)]
pub struct FirstFit;

impl DecisionSource for FirstFit {
    fn decide(&mut self, ctx: &ArrivalContext<'_>) -> Result<Decision> {
        Ok(ctx
            .feasible_ecs()
            .first()
            .map_or(Decision::Reject, |&k| Decision::Place(k)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimEvent {
    Arrival {
        seq: u64,
        vnf_type: usize,
        time: f64,
        decision: Decision,
    },
    Departure {
        seq: u64,
        vnf_type: usize,
        ec: usize,
        time: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub seq: u64,
    pub vnf_type: usize,
    pub decision: Decision,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub total_arrivals: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub steps: Vec<StepRecord>,
    /// Sequence numbers of requests whose departure was processed.
    pub departed: Vec<u64>,
}

impl EpisodeResult {
    pub fn rejection_ratio(&self) -> f64 {
        if self.total_arrivals == 0 {
            0.0
        } else {
            self.rejected as f64 / self.total_arrivals as f64
        }
    }

    pub fn avg_reward(&self) -> f64 {
        if self.total_arrivals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.total_arrivals as f64
        }
    }
}

struct PendingDeparture {
    time: f64,
    seq: u64,
    ec: usize,
    vnf_type: usize,
}

impl PartialEq for PendingDeparture {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PendingDeparture {}

impl PartialOrd for PendingDeparture {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PendingDeparture {
    // reversed: BinaryHeap pops the earliest departure first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn run_episode<P: DecisionSource + ?Sized>(
    policy: &mut P,
    trace: &Trace,
    scenario: &Scenario,
) -> Result<EpisodeResult> {
    run_episode_observed(policy, trace, scenario, |_, _| {})
}

/// Replays `trace` against `policy`. Departures of accepted requests are
/// processed in time order between arrivals; on equal timestamps the
/// departure goes first. `observer` sees every event together with the
/// allocation after it.
pub fn run_episode_observed<P, O>(
    policy: &mut P,
    trace: &Trace,
    scenario: &Scenario,
    mut observer: O,
) -> Result<EpisodeResult>
where
    P: DecisionSource + ?Sized,
    O: FnMut(&SimEvent, &AllocationMatrix),
{
    let mut alloc = scenario.empty_allocation();
    let mut pending = BinaryHeap::new();
    let mut result = EpisodeResult {
        total_arrivals: 0,
        accepted: 0,
        rejected: 0,
        steps: Vec::with_capacity(trace.len()),
        departed: Vec::new(),
    };

    let mut now = 0.0;
    for record in &trace.records {
        if record.vnf_type >= scenario.n_types() {
            return Err(Error::TraceFormat(format!(
                "record {} uses VNF type {} but the scenario has {}",
                record.seq,
                record.vnf_type + 1,
                scenario.n_types()
            )));
        }
        now += record.inter_arrival;

        while pending
            .peek()
            .is_some_and(|d: &PendingDeparture| d.time <= now)
        {
            let d = pending.pop().expect("peeked");
            alloc = scenario.apply_departure(&alloc, d.vnf_type, d.ec)?;
            result.departed.push(d.seq);
            observer(
                &SimEvent::Departure {
                    seq: d.seq,
                    vnf_type: d.vnf_type,
                    ec: d.ec,
                    time: d.time,
                },
                &alloc,
            );
        }

        let ctx = ArrivalContext {
            scenario,
            alloc: &alloc,
            vnf_type: record.vnf_type,
            seq: record.seq,
            time: now,
        };
        let decision = policy.decide(&ctx)?;
        match decision {
            Decision::Place(ec) => {
                alloc = scenario
                    .apply_placement(&alloc, record.vnf_type, ec)
                    .map_err(|_| Error::InfeasibleDecision {
                        seq: record.seq,
                        ec,
                    })?;
                pending.push(PendingDeparture {
                    time: now + record.holding,
                    seq: record.seq,
                    ec,
                    vnf_type: record.vnf_type,
                });
                result.accepted += 1;
            }
            Decision::Reject => result.rejected += 1,
        }
        result.total_arrivals += 1;
        result.steps.push(StepRecord {
            seq: record.seq,
            vnf_type: record.vnf_type,
            decision,
        });
        if let Some(ec) = scenario.first_violation(&alloc) {
            return Err(Error::ResourceViolation { ec });
        }
        observer(
            &SimEvent::Arrival {
                seq: record.seq,
                vnf_type: record.vnf_type,
                time: now,
                decision,
            },
            &alloc,
        );
    }
    policy.episode_end();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EcNode, Topology, VnfType};
    use crate::tracegen::{generate_trace, TraceRecord};

    fn scenario(cpu: u64, bw: u64) -> Scenario {
        Scenario::new(
            Topology::new(vec![EcNode::new(cpu, bw), EcNode::new(cpu, bw)]).unwrap(),
            vec![
                VnfType::new(1, 300, 3.0, 1.0).unwrap(),
                VnfType::new(3, 50, 2.0, 0.5).unwrap(),
            ],
        )
        .unwrap()
    }

    fn hand_trace(records: &[(usize, f64, f64)]) -> Trace {
        Trace {
            seed: 0,
            arrival_rates: vec![3.0, 2.0],
            departure_rates: vec![1.0, 0.5],
            records: records
                .iter()
                .enumerate()
                .map(|(seq, &(vnf_type, inter_arrival, holding))| TraceRecord {
                    seq: seq as u64,
                    vnf_type,
                    inter_arrival,
                    holding,
                })
                .collect(),
        }
    }

    #[test]
    fn reject_all_rejects_everything() {
        let s = scenario(4, 1000);
        let t = generate_trace(&s.vnf_types, 100, 1).unwrap();
        let r = run_episode(&mut RejectAll, &t, &s).unwrap();
        assert_eq!(r.rejection_ratio(), 1.0);
        assert!(r.departed.is_empty());
    }

    #[test]
    fn huge_capacity_accepts_everything() {
        let s = scenario(1_000_000, 1_000_000_000);
        let t = generate_trace(&s.vnf_types, 500, 2).unwrap();
        let r = run_episode(&mut FirstFit, &t, &s).unwrap();
        assert_eq!(r.rejection_ratio(), 0.0);
        assert_eq!(r.accepted, 500);
    }

    #[test]
    fn departures_free_resources_before_simultaneous_arrival() {
        let s = Scenario::new(
            Topology::new(vec![EcNode::new(1, 300)]).unwrap(),
            vec![VnfType::new(1, 300, 1.0, 1.0).unwrap()],
        )
        .unwrap();
        // second arrival lands exactly when the first request leaves
        let t = hand_trace(&[(0, 1.0, 2.0), (0, 2.0, 1.0), (0, 0.5, 1.0)]);
        let r = run_episode(&mut FirstFit, &t, &s).unwrap();
        let decisions: Vec<Decision> = r.steps.iter().map(|s| s.decision).collect();
        assert_eq!(
            decisions,
            vec![Decision::Place(0), Decision::Place(0), Decision::Reject]
        );
        assert_eq!(r.departed, vec![0]);
    }

    #[test]
    fn infeasible_decision_fails_fast() {
        let s = scenario(0, 0);
        let t = hand_trace(&[(0, 0.1, 1.0)]);
        let mut always_first = |_: &ArrivalContext<'_>| Decision::Place(0);
        assert!(matches!(
            run_episode(&mut always_first, &t, &s),
            Err(Error::InfeasibleDecision { seq: 0, ec: 0 })
        ));
    }

    #[test]
    fn unknown_type_in_trace() {
        let s = scenario(4, 1000);
        let t = hand_trace(&[(5, 0.1, 1.0)]);
        assert!(matches!(
            run_episode(&mut RejectAll, &t, &s),
            Err(Error::TraceFormat(_))
        ));
    }
}
