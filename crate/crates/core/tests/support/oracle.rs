//! Reference MDP written directly from the model definition: nested-loop
//! state enumeration, competing-exponential transitions and plain value
//! iteration. Shares nothing with the crate beyond the scenario numbers.

#![allow(dead_code)]

use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct Net {
    /// (cpu, bw) per EC.
    pub ecs: Vec<(u64, u64)>,
    /// (cpu, bw, arrival rate, departure rate) per type.
    pub types: Vec<(u64, u64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OState {
    /// counts[ec][type]
    pub counts: Vec<Vec<u32>>,
    pub arrival: bool,
    pub vnf_type: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OAction {
    Reject,
    Place(usize),
    Void,
}

impl Net {
    fn fits_counts(&self, ec: usize, row: &[u32]) -> bool {
        let cpu: u64 = row.iter().zip(&self.types).map(|(&n, t)| n as u64 * t.0).sum();
        let bw: u64 = row.iter().zip(&self.types).map(|(&n, t)| n as u64 * t.1).sum();
        cpu <= self.ecs[ec].0 && bw <= self.ecs[ec].1
    }

    fn rows_for(&self, ec: usize) -> Vec<Vec<u32>> {
        let limit = |t: &(u64, u64, f64, f64)| {
            let by_cpu = if t.0 == 0 { u64::MAX } else { self.ecs[ec].0 / t.0 };
            let by_bw = if t.1 == 0 { u64::MAX } else { self.ecs[ec].1 / t.1 };
            by_cpu.min(by_bw).min(64) as u32
        };
        let mut rows = vec![vec![]];
        for t in &self.types {
            let mut next = Vec::new();
            for r in &rows {
                for n in 0..=limit(t) {
                    let mut r2: Vec<u32> = r.clone();
                    r2.push(n);
                    next.push(r2);
                }
            }
            rows = next;
        }
        rows.into_iter().filter(|r| self.fits_counts(ec, r)).collect()
    }

    pub fn allocations(&self) -> Vec<Vec<Vec<u32>>> {
        let mut all: Vec<Vec<Vec<u32>>> = vec![vec![]];
        for ec in 0..self.ecs.len() {
            let rows = self.rows_for(ec);
            all = all
                .iter()
                .flat_map(|a| {
                    rows.iter().map(move |r| {
                        let mut a2 = a.clone();
                        a2.push(r.clone());
                        a2
                    })
                })
                .collect();
        }
        all
    }

    fn type_total(counts: &[Vec<u32>], t: usize) -> u32 {
        counts.iter().map(|row| row[t]).sum()
    }

    pub fn states(&self) -> Vec<OState> {
        let mut out = Vec::new();
        for counts in self.allocations() {
            for t in 0..self.types.len() {
                out.push(OState {
                    counts: counts.clone(),
                    arrival: true,
                    vnf_type: t,
                });
            }
            for t in 0..self.types.len() {
                if Self::type_total(&counts, t) > 0 {
                    out.push(OState {
                        counts: counts.clone(),
                        arrival: false,
                        vnf_type: t,
                    });
                }
            }
        }
        out.sort();
        out
    }

    pub fn actions(&self, s: &OState) -> Vec<OAction> {
        if !s.arrival {
            return vec![OAction::Void];
        }
        let mut acts = vec![OAction::Reject];
        for ec in 0..self.ecs.len() {
            let mut row = s.counts[ec].clone();
            row[s.vnf_type] += 1;
            if self.fits_counts(ec, &row) {
                acts.push(OAction::Place(ec));
            }
        }
        acts
    }

    pub fn reward(a: OAction) -> f64 {
        match a {
            OAction::Place(_) => 1.0,
            _ => 0.0,
        }
    }

    /// Next event from an allocation: arrival of type i at rate λᵢ,
    /// departure of type i at rate nᵢ·μᵢ.
    fn next_events(&self, counts: &[Vec<u32>]) -> Vec<(OState, f64)> {
        let mut rates = Vec::new();
        for (t, ty) in self.types.iter().enumerate() {
            rates.push((true, t, ty.2));
        }
        for (t, ty) in self.types.iter().enumerate() {
            let n = Self::type_total(counts, t);
            if n > 0 {
                rates.push((false, t, n as f64 * ty.3));
            }
        }
        let total: f64 = rates.iter().map(|r| r.2).sum();
        rates
            .into_iter()
            .map(|(arrival, t, r)| {
                (
                    OState {
                        counts: counts.to_vec(),
                        arrival,
                        vnf_type: t,
                    },
                    r / total,
                )
            })
            .collect()
    }

    pub fn successors(&self, s: &OState, a: OAction) -> Vec<(OState, f64)> {
        let mut posts: Vec<(Vec<Vec<u32>>, f64)> = Vec::new();
        match a {
            OAction::Reject => posts.push((s.counts.clone(), 1.0)),
            OAction::Place(ec) => {
                let mut c = s.counts.clone();
                c[ec][s.vnf_type] += 1;
                posts.push((c, 1.0));
            }
            OAction::Void => {
                let n = Self::type_total(&s.counts, s.vnf_type) as f64;
                for ec in 0..self.ecs.len() {
                    let here = s.counts[ec][s.vnf_type];
                    if here > 0 {
                        let mut c = s.counts.clone();
                        c[ec][s.vnf_type] -= 1;
                        posts.push((c, here as f64 / n));
                    }
                }
            }
        }
        let mut acc: BTreeMap<OState, f64> = BTreeMap::new();
        for (c, p) in posts {
            for (next, q) in self.next_events(&c) {
                *acc.entry(next).or_default() += p * q;
            }
        }
        acc.into_iter().collect()
    }
}

pub struct ViResult {
    pub states: Vec<OState>,
    pub values: Vec<f64>,
    /// Q-values per state, aligned with `Net::actions`.
    pub q: Vec<Vec<(OAction, f64)>>,
}

/// Synchronous value iteration until the sup-norm change drops below `tol`.
pub fn value_iteration(net: &Net, gamma: f64, tol: f64) -> ViResult {
    let states = net.states();
    let index: BTreeMap<OState, usize> =
        states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let model: Vec<Vec<(OAction, Vec<(usize, f64)>)>> = states
        .iter()
        .map(|s| {
            net.actions(s)
                .into_iter()
                .map(|a| {
                    let succ = net
                        .successors(s, a)
                        .into_iter()
                        .map(|(n, p)| (index[&n], p))
                        .collect();
                    (a, succ)
                })
                .collect()
        })
        .collect();
    let backup = |v: &[f64], s: usize| -> Vec<(OAction, f64)> {
        model[s]
            .iter()
            .map(|(a, succ)| {
                let future: f64 = succ.iter().map(|&(n, p)| p * v[n]).sum();
                (*a, Net::reward(*a) + gamma * future)
            })
            .collect()
    };
    let mut v = vec![0.0; states.len()];
    loop {
        let next: Vec<f64> = (0..states.len())
            .map(|s| {
                backup(&v, s)
                    .iter()
                    .map(|x| x.1)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta < tol {
            break;
        }
    }
    let q = (0..states.len()).map(|s| backup(&v, s)).collect();
    ViResult {
        states,
        values: v,
        q,
    }
}

/// Tiny scenarios, each well under 200 states.
pub fn tiny_nets() -> Vec<(&'static str, Net)> {
    vec![
        (
            "one EC, one type, capacity 2",
            Net {
                ecs: vec![(2, 100)],
                types: vec![(1, 10, 1.0, 1.0)],
            },
        ),
        (
            "two ECs, one type",
            Net {
                ecs: vec![(2, 100), (3, 100)],
                types: vec![(1, 10, 1.5, 0.5)],
            },
        ),
        (
            "two identical ECs",
            Net {
                ecs: vec![(2, 100), (2, 100)],
                types: vec![(1, 10, 2.0, 1.0)],
            },
        ),
        (
            "two ECs, two types",
            Net {
                ecs: vec![(2, 500), (3, 200)],
                types: vec![(1, 100, 2.0, 1.0), (2, 50, 1.0, 0.5)],
            },
        ),
    ]
}
