use std::collections::{BTreeMap, HashMap};

use super::{MdpAction, MdpState};
use crate::error::{Error, Result};
use crate::model::{AllocationMatrix, Event, EventKind, Scenario};

pub const DEFAULT_STATE_CAP: usize = 10_000_000;

/// All count vectors (one row of the allocation matrix) that fit on EC `k`,
/// in lexicographic order.
fn ec_rows(scenario: &Scenario, k: usize, cap: usize) -> Result<Vec<Vec<u32>>> {
    fn extend(
        scenario: &Scenario,
        cpu_left: u64,
        bw_left: u64,
        prefix: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
        cap: usize,
    ) -> Result<()> {
        let i = prefix.len();
        if i == scenario.n_types() {
            if out.len() >= cap {
                return Err(Error::ScenarioTooLarge { cap });
            }
            out.push(prefix.clone());
            return Ok(());
        }
        let t = &scenario.vnf_types[i];
        let mut n = 0u64;
        while n * t.cpu <= cpu_left && n * t.bw <= bw_left {
            prefix.push(n as u32);
            extend(
                scenario,
                cpu_left - n * t.cpu,
                bw_left - n * t.bw,
                prefix,
                out,
                cap,
            )?;
            prefix.pop();
            n += 1;
        }
        Ok(())
    }

    let ec = &scenario.topology.ecs[k];
    let mut out = Vec::new();
    extend(scenario, ec.cpu, ec.bw, &mut Vec::new(), &mut out, cap)?;
    Ok(out)
}

/// Every capacity-feasible allocation crossed with every admissible event,
/// in canonical order (flattened counts, then event). Fails once the count
/// would exceed `cap`.
pub fn enumerate_states(scenario: &Scenario, cap: usize) -> Result<Vec<MdpState>> {
    let per_ec = (0..scenario.n_ecs())
        .map(|k| ec_rows(scenario, k, cap))
        .collect::<Result<Vec<_>>>()?;
    let n_types = scenario.n_types();

    let mut states = Vec::new();
    let mut cursor = vec![0usize; per_ec.len()];
    loop {
        let counts: Vec<u32> = cursor
            .iter()
            .zip(&per_ec)
            .flat_map(|(&c, rows)| rows[c].iter().copied())
            .collect();
        let alloc = AllocationMatrix::from_counts(n_types, counts);
        let departures = (0..n_types)
            .filter(|&i| alloc.type_total(i) > 0)
            .map(Event::departure);
        let events: Vec<Event> = (0..n_types).map(Event::arrival).chain(departures).collect();
        if states.len() + events.len() > cap {
            return Err(Error::ScenarioTooLarge { cap });
        }
        states.extend(events.into_iter().map(|e| MdpState::new(alloc.clone(), e)));

        // odometer, last EC fastest
        let mut pos = per_ec.len();
        loop {
            if pos == 0 {
                return Ok(states);
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < per_ec[pos].len() {
                break;
            }
            cursor[pos] = 0;
        }
    }
}

pub fn admissible_actions(scenario: &Scenario, state: &MdpState) -> Vec<MdpAction> {
    match state.event.kind {
        EventKind::Arrival => std::iter::once(MdpAction::Reject)
            .chain(
                scenario
                    .feasible_ecs(&state.alloc, state.event.vnf_type)
                    .into_iter()
                    .map(MdpAction::PlaceAt),
            )
            .collect(),
        EventKind::Departure => vec![MdpAction::Void],
    }
}

/// Probability that the departing request of `vnf_type` leaves each EC:
/// `counts[k][i]·μᵢ / Σₖ' counts[k'][i]·μᵢ`.
pub fn departure_sources(
    scenario: &Scenario,
    alloc: &AllocationMatrix,
    vnf_type: usize,
) -> Vec<(usize, f64)> {
    let mu = scenario.vnf_types[vnf_type].departure_rate;
    let total: f64 = (0..scenario.n_ecs())
        .map(|k| f64::from(alloc.get(k, vnf_type)) * mu)
        .sum();
    (0..scenario.n_ecs())
        .filter(|&k| alloc.get(k, vnf_type) > 0)
        .map(|k| (k, f64::from(alloc.get(k, vnf_type)) * mu / total))
        .collect()
}

/// Competing exponentials on the post-decision allocation.
fn next_events(
    scenario: &Scenario,
    alloc: &AllocationMatrix,
    weight: f64,
    out: &mut BTreeMap<MdpState, f64>,
) {
    let total = scenario.total_event_rate(alloc);
    for (i, t) in scenario.vnf_types.iter().enumerate() {
        *out.entry(MdpState::new(alloc.clone(), Event::arrival(i)))
            .or_insert(0.0) += weight * t.arrival_rate / total;
    }
    for (i, t) in scenario.vnf_types.iter().enumerate() {
        let active = alloc.type_total(i);
        if active > 0 {
            *out.entry(MdpState::new(alloc.clone(), Event::departure(i)))
                .or_insert(0.0) += weight * f64::from(active) * t.departure_rate / total;
        }
    }
}

/// Successor distribution of `(state, action)`, sorted by successor.
pub fn transitions(
    scenario: &Scenario,
    state: &MdpState,
    action: MdpAction,
) -> Result<Vec<(MdpState, f64)>> {
    let inadmissible = || Error::InadmissibleAction {
        action: action.to_string(),
    };
    let mut out = BTreeMap::new();
    match (state.event.kind, action) {
        (EventKind::Arrival, MdpAction::PlaceAt(k)) => {
            let placed = scenario
                .apply_placement(&state.alloc, state.event.vnf_type, k)
                .map_err(|_| inadmissible())?;
            next_events(scenario, &placed, 1.0, &mut out);
        }
        (EventKind::Arrival, MdpAction::Reject) => {
            next_events(scenario, &state.alloc, 1.0, &mut out);
        }
        (EventKind::Departure, MdpAction::Void) => {
            let i = state.event.vnf_type;
            for (k, p) in departure_sources(scenario, &state.alloc, i) {
                let left = scenario.apply_departure(&state.alloc, i, k)?;
                next_events(scenario, &left, p, &mut out);
            }
        }
        _ => return Err(inadmissible()),
    }
    Ok(out.into_iter().collect())
}

#[derive(Clone, Debug)]
pub struct StateSpace {
    states: Vec<MdpState>,
    index: HashMap<MdpState, usize>,
}

impl StateSpace {
    pub fn enumerate(scenario: &Scenario, cap: usize) -> Result<Self> {
        let states = enumerate_states(scenario, cap)?;
        let index = states
            .iter()
            .enumerate()
            .map(|(id, s)| (s.clone(), id))
            .collect();
        Ok(Self { states, index })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[MdpState] {
        &self.states
    }

    pub fn state(&self, id: usize) -> &MdpState {
        &self.states[id]
    }

    pub fn id_of(&self, state: &MdpState) -> Option<usize> {
        self.index.get(state).copied()
    }
}

/// Outcomes of one admissible action. The reward does not depend on the
/// successor, so it is stored once per action.
#[derive(Clone, Debug)]
pub struct ActionOutcomes {
    pub action: MdpAction,
    pub reward: f64,
    /// `(successor id, probability)`, ascending by id.
    pub outcomes: Vec<(usize, f64)>,
}

/// The full model, states indexed by their canonical position.
#[derive(Clone, Debug)]
pub struct TransitionTable {
    pub space: StateSpace,
    /// Admissible actions per state, in tie-break order.
    pub actions: Vec<Vec<ActionOutcomes>>,
}

impl TransitionTable {
    pub fn build(scenario: &Scenario, cap: usize) -> Result<Self> {
        let space = StateSpace::enumerate(scenario, cap)?;
        let actions = space
            .states()
            .iter()
            .map(|s| {
                admissible_actions(scenario, s)
                    .into_iter()
                    .map(|action| {
                        let outcomes = transitions(scenario, s, action)?
                            .into_iter()
                            .map(|(next, p)| {
                                space
                                    .id_of(&next)
                                    .map(|id| (id, p))
                                    .ok_or_else(|| Error::StateNotFound(next.to_string()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let reward = if matches!(action, MdpAction::PlaceAt(_)) {
                            1.0
                        } else {
                            0.0
                        };
                        Ok(ActionOutcomes {
                            action,
                            reward,
                            outcomes,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { space, actions })
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }
}
