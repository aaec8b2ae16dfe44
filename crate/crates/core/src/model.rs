//! Domain types shared by every placement algorithm: VNF types, the EC
//! topology, the per-EC allocation matrix and the resource arithmetic on it.
//!
//! Indices are zero-based in code. EC `k` and VNF type `i` are written as
//! `k + 1` / `i + 1` wherever they leave the process (files, logs).

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A VNF type with its per-request demand and its Poisson rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VnfType {
    /// CPU cores per request.
    pub cpu: u64,
    /// Mbps per request.
    pub bw: u64,
    #[serde(rename = "lambda")]
    pub arrival_rate: f64,
    /// Per active request.
    #[serde(rename = "mu")]
    pub departure_rate: f64,
}

impl VnfType {
    pub fn new(cpu: u64, bw: u64, arrival_rate: f64, departure_rate: f64) -> Result<Self> {
        let t = Self {
            cpu,
            bw,
            arrival_rate,
            departure_rate,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cpu == 0 || self.bw == 0 {
            return Err(Error::InvalidScenario(
                "VNF demands must be at least 1".into(),
            ));
        }
        if !(self.arrival_rate.is_finite() && self.arrival_rate > 0.0) {
            return Err(Error::InvalidRate(format!(
                "arrival rate {} must be positive",
                self.arrival_rate
            )));
        }
        if !(self.departure_rate.is_finite() && self.departure_rate > 0.0) {
            return Err(Error::InvalidRate(format!(
                "departure rate {} must be positive",
                self.departure_rate
            )));
        }
        Ok(())
    }
}

fn default_hops() -> u64 {
    1
}

/// An edge-compute node and the link that reaches it from the base station.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcNode {
    pub cpu: u64,
    pub bw: u64,
    #[serde(default = "default_hops")]
    pub hops: u64,
}

impl EcNode {
    pub fn new(cpu: u64, bw: u64) -> Self {
        Self { cpu, bw, hops: 1 }
    }

    pub fn with_hops(mut self, hops: u64) -> Self {
        self.hops = hops;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub ecs: Vec<EcNode>,
}

impl Topology {
    pub fn new(ecs: Vec<EcNode>) -> Result<Self> {
        let topo = Self { ecs };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ecs.is_empty() {
            return Err(Error::InvalidScenario("topology needs at least one EC".into()));
        }
        if self.ecs.iter().any(|ec| ec.hops == 0) {
            return Err(Error::InvalidScenario("hop counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ecs.is_empty()
    }

    pub fn total_bw(&self) -> u64 {
        self.ecs.iter().map(|ec| ec.bw).sum()
    }
}

/// Placement decision for one arriving request.
///
/// The derived order (`Reject` first, then ECs by index) is the tie-break
/// order used by every argmax in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Decision {
    Reject,
    Place(usize),
}

impl Decision {
    pub fn is_placement(self) -> bool {
        matches!(self, Decision::Place(_))
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Reject => f.write_str("reject"),
            Decision::Place(k) => write!(f, "place:{}", k + 1),
        }
    }
}

impl std::str::FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "reject" {
            return Ok(Decision::Reject);
        }
        s.strip_prefix("place:")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 1)
            .map(|k| Decision::Place(k - 1))
            .ok_or_else(|| Error::Config(format!("unknown action `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Arrival,
    Departure,
}

/// One-hot event vector: `+1` at `vnf_type` for an arrival, `-1` for a departure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub kind: EventKind,
    pub vnf_type: usize,
}

impl Event {
    pub fn arrival(vnf_type: usize) -> Self {
        Self {
            kind: EventKind::Arrival,
            vnf_type,
        }
    }

    pub fn departure(vnf_type: usize) -> Self {
        Self {
            kind: EventKind::Departure,
            vnf_type,
        }
    }

    /// Signed, one-based encoding of the event vector (`+i` / `-i`).
    pub fn signed(self) -> i64 {
        let i = self.vnf_type as i64 + 1;
        match self.kind {
            EventKind::Arrival => i,
            EventKind::Departure => -i,
        }
    }

    pub fn from_signed(d: i64) -> Option<Self> {
        match d {
            0 => None,
            d if d > 0 => Some(Self::arrival(d as usize - 1)),
            d => Some(Self::departure((-d) as usize - 1)),
        }
    }
}

/// Active request counts, `K` rows (ECs) by `I` columns (VNF types),
/// stored row-major so the derived order is lexicographic on the
/// flattened matrix.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AllocationMatrix {
    counts: Vec<u32>,
    n_types: usize,
}

impl AllocationMatrix {
    pub fn empty(n_ecs: usize, n_types: usize) -> Self {
        Self {
            counts: vec![0; n_ecs * n_types],
            n_types,
        }
    }

    pub fn from_counts(n_types: usize, counts: Vec<u32>) -> Self {
        assert!(n_types > 0 && counts.len() % n_types == 0);
        Self { counts, n_types }
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let n_types = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_types));
        Self {
            counts: rows.concat(),
            n_types,
        }
    }

    pub fn n_ecs(&self) -> usize {
        self.counts.len() / self.n_types
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn get(&self, ec: usize, vnf_type: usize) -> u32 {
        self.counts[ec * self.n_types + vnf_type]
    }

    pub fn row(&self, ec: usize) -> &[u32] {
        &self.counts[ec * self.n_types..(ec + 1) * self.n_types]
    }

    pub fn flat(&self) -> &[u32] {
        &self.counts
    }

    /// Active requests of `vnf_type` summed over all ECs.
    pub fn type_total(&self, vnf_type: usize) -> u32 {
        (0..self.n_ecs()).map(|k| self.get(k, vnf_type)).sum()
    }

    fn slot_mut(&mut self, ec: usize, vnf_type: usize) -> &mut u32 {
        &mut self.counts[ec * self.n_types + vnf_type]
    }
}

/// Topology plus VNF catalogue: everything that defines the placement problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: Topology,
    pub vnf_types: Vec<VnfType>,
}

impl Scenario {
    pub fn new(topology: Topology, vnf_types: Vec<VnfType>) -> Result<Self> {
        let s = Self {
            topology,
            vnf_types,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if self.vnf_types.is_empty() {
            return Err(Error::InvalidScenario("need at least one VNF type".into()));
        }
        self.vnf_types.iter().try_for_each(VnfType::validate)
    }

    pub fn n_ecs(&self) -> usize {
        self.topology.len()
    }

    pub fn n_types(&self) -> usize {
        self.vnf_types.len()
    }

    pub fn empty_allocation(&self) -> AllocationMatrix {
        AllocationMatrix::empty(self.n_ecs(), self.n_types())
    }

    /// Short content hash identifying the MDP this scenario induces.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&canonical);
        hex::encode(&digest[..8])
    }

    pub fn used_cpu(&self, alloc: &AllocationMatrix, ec: usize) -> u64 {
        alloc
            .row(ec)
            .iter()
            .zip(&self.vnf_types)
            .map(|(&n, t)| u64::from(n) * t.cpu)
            .sum()
    }

    pub fn used_bw(&self, alloc: &AllocationMatrix, ec: usize) -> u64 {
        alloc
            .row(ec)
            .iter()
            .zip(&self.vnf_types)
            .map(|(&n, t)| u64::from(n) * t.bw)
            .sum()
    }

    pub fn free_cpu(&self, alloc: &AllocationMatrix, ec: usize) -> u64 {
        self.topology.ecs[ec].cpu - self.used_cpu(alloc, ec)
    }

    pub fn free_bw(&self, alloc: &AllocationMatrix, ec: usize) -> u64 {
        self.topology.ecs[ec].bw - self.used_bw(alloc, ec)
    }

    /// Whether every EC stays within its CPU and link capacity.
    pub fn respects_capacity(&self, alloc: &AllocationMatrix) -> bool {
        self.first_violation(alloc).is_none()
    }

    pub fn first_violation(&self, alloc: &AllocationMatrix) -> Option<usize> {
        (0..self.n_ecs()).find(|&k| {
            let ec = &self.topology.ecs[k];
            self.used_cpu(alloc, k) > ec.cpu || self.used_bw(alloc, k) > ec.bw
        })
    }

    pub fn fits(&self, alloc: &AllocationMatrix, vnf_type: usize, ec: usize) -> bool {
        let t = &self.vnf_types[vnf_type];
        self.free_cpu(alloc, ec) >= t.cpu && self.free_bw(alloc, ec) >= t.bw
    }

    /// ECs (ascending) with enough free CPU and link bandwidth for one
    /// request of `vnf_type`. Empty means the request must be rejected.
    pub fn feasible_ecs(&self, alloc: &AllocationMatrix, vnf_type: usize) -> Vec<usize> {
        (0..self.n_ecs())
            .filter(|&k| self.fits(alloc, vnf_type, k))
            .collect()
    }

    pub fn apply_placement(
        &self,
        alloc: &AllocationMatrix,
        vnf_type: usize,
        ec: usize,
    ) -> Result<AllocationMatrix> {
        if ec >= self.n_ecs() || vnf_type >= self.n_types() || !self.fits(alloc, vnf_type, ec) {
            return Err(Error::InfeasiblePlacement { vnf_type, ec });
        }
        let mut next = alloc.clone();
        *next.slot_mut(ec, vnf_type) += 1;
        Ok(next)
    }

    pub fn apply_departure(
        &self,
        alloc: &AllocationMatrix,
        vnf_type: usize,
        ec: usize,
    ) -> Result<AllocationMatrix> {
        if ec >= self.n_ecs() || vnf_type >= self.n_types() || alloc.get(ec, vnf_type) == 0 {
            return Err(Error::DepartureUnderflow { vnf_type, ec });
        }
        let mut next = alloc.clone();
        *next.slot_mut(ec, vnf_type) -= 1;
        Ok(next)
    }

    /// Total rate of every event that can occur next: all arrivals plus
    /// one departure clock per active request.
    pub fn total_event_rate(&self, alloc: &AllocationMatrix) -> f64 {
        self.vnf_types
            .iter()
            .enumerate()
            .map(|(i, t)| t.arrival_rate + f64::from(alloc.type_total(i)) * t.departure_rate)
            .sum()
    }
}
