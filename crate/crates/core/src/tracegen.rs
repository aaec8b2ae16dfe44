//! Seeded Poisson request traces.
//!
//! A trace is the merged arrival stream of all VNF types. Each record
//! carries its own holding time, so the departure schedule of an accepted
//! request does not depend on which algorithm placed it and every algorithm
//! replays exactly the same stochastic input.
//!
//! On disk a trace is JSON Lines: a header line followed by one line per
//! request, with one-based VNF type ids.
//!
//! ```text
//! {"header":{"seed":7,"rates":{"lambda":[3.0,2.0],"mu":[1.0,0.5]},"n":2}}
//! {"seq":0,"type":1,"inter_arrival":0.0412,"holding":0.93}
//! {"seq":1,"type":2,"inter_arrival":0.3318,"holding":2.71}
//! ```

use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VnfType;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub seq: u64,
    pub vnf_type: usize,
    /// Time since the previous arrival; absolute time for the first record.
    pub inter_arrival: f64,
    pub holding: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub arrival_rates: Vec<f64>,
    pub departure_rates: Vec<f64>,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Absolute arrival time of every record.
    pub fn arrival_times(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(0.0, |t, r| {
                *t += r.inter_arrival;
                Some(*t)
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = HeaderLine {
            header: Header {
                seed: self.seed,
                rates: Rates {
                    lambda: self.arrival_rates.clone(),
                    mu: self.departure_rates.clone(),
                },
                n: self.records.len(),
            },
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            let line = WireRecord {
                seq: r.seq,
                vnf_type: r.vnf_type + 1,
                inter_arrival: r.inter_arrival,
                holding: r.holding,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::TraceFormat("empty trace file".into()))??;
        let HeaderLine { header } = serde_json::from_str(&first)
            .map_err(|e| Error::TraceFormat(format!("bad header: {e}")))?;
        if header.rates.lambda.len() != header.rates.mu.len() || header.rates.lambda.is_empty() {
            return Err(Error::TraceFormat("header rates are inconsistent".into()));
        }
        let n_types = header.rates.lambda.len();

        let mut records = Vec::with_capacity(header.n);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let w: WireRecord = serde_json::from_str(&line)
                .map_err(|e| Error::TraceFormat(format!("line {}: {e}", lineno + 2)))?;
            if w.seq != records.len() as u64 {
                return Err(Error::TraceFormat(format!(
                    "expected seq {}, found {}",
                    records.len(),
                    w.seq
                )));
            }
            if w.vnf_type == 0 || w.vnf_type > n_types {
                return Err(Error::TraceFormat(format!(
                    "record {} has unknown type {}",
                    w.seq, w.vnf_type
                )));
            }
            if !(w.inter_arrival >= 0.0 && w.holding > 0.0) {
                return Err(Error::TraceFormat(format!("record {} has bad times", w.seq)));
            }
            records.push(TraceRecord {
                seq: w.seq,
                vnf_type: w.vnf_type - 1,
                inter_arrival: w.inter_arrival,
                holding: w.holding,
            });
        }
        if records.len() != header.n {
            return Err(Error::TraceFormat(format!(
                "header announces {} records, file has {}",
                header.n,
                records.len()
            )));
        }
        Ok(Self {
            seed: header.seed,
            arrival_rates: header.rates.lambda,
            departure_rates: header.rates.mu,
            records,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: Header,
}

#[derive(Serialize, Deserialize)]
struct Header {
    seed: u64,
    rates: Rates,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct Rates {
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    seq: u64,
    #[serde(rename = "type")]
    vnf_type: usize,
    inter_arrival: f64,
    holding: f64,
}

/// Merged arrival stream: inter-arrivals ~ Exp(Σλ), type i with probability
/// λᵢ/Σλ, holding time ~ Exp(μᵢ).
pub fn generate_trace(types: &[VnfType], n_requests: usize, seed: u64) -> Result<Trace> {
    if types.is_empty() {
        return Err(Error::InvalidRate("no VNF types".into()));
    }
    for t in types {
        t.validate()?;
    }
    if n_requests == 0 {
        return Err(Error::Config("a trace needs at least one request".into()));
    }
    let lambdas: Vec<f64> = types.iter().map(|t| t.arrival_rate).collect();
    let total: f64 = lambdas.iter().sum();
    let gap = Exp::new(total).map_err(|e| Error::InvalidRate(e.to_string()))?;
    let pick = WeightedIndex::new(&lambdas).map_err(|e| Error::InvalidRate(e.to_string()))?;
    let holds = types
        .iter()
        .map(|t| Exp::new(t.departure_rate).map_err(|e| Error::InvalidRate(e.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n_requests as u64)
        .map(|seq| {
            let inter_arrival = gap.sample(&mut rng);
            let vnf_type = pick.sample(&mut rng);
            let mut holding = holds[vnf_type].sample(&mut rng);
            while holding == 0.0 {
                holding = holds[vnf_type].sample(&mut rng);
            }
            TraceRecord {
                seq,
                vnf_type,
                inter_arrival,
                holding,
            }
        })
        .collect();
    Ok(Trace {
        seed,
        arrival_rates: lambdas,
        departure_rates: types.iter().map(|t| t.departure_rate).collect(),
        records,
    })
}

/// `n_files` traces seeded `base_seed, base_seed + 1, …`.
pub fn generate_file_set(
    types: &[VnfType],
    n_files: usize,
    n_requests: usize,
    base_seed: u64,
) -> Result<Vec<Trace>> {
    if n_files == 0 {
        return Err(Error::Config("need at least one trace file".into()));
    }
    (0..n_files as u64)
        .map(|i| generate_trace(types, n_requests, base_seed + i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_types() -> Vec<VnfType> {
        vec![
            VnfType::new(1, 300, 3.0, 1.0).unwrap(),
            VnfType::new(3, 50, 2.0, 0.5).unwrap(),
        ]
    }

    #[test]
    fn same_seed_same_trace() {
        let a = generate_trace(&table1_types(), 200, 11).unwrap();
        let b = generate_trace(&table1_types(), 200, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(&table1_types(), 200, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_means_match_rates() {
        let n = 100_000;
        let t = generate_trace(&table1_types(), n, 3).unwrap();
        let mean_gap = t.records.iter().map(|r| r.inter_arrival).sum::<f64>() / n as f64;
        assert!((mean_gap - 0.2).abs() <= 0.2 * 0.01, "mean gap {mean_gap}");

        let type1 = t.records.iter().filter(|r| r.vnf_type == 0).count() as f64 / n as f64;
        assert!((type1 - 0.6).abs() <= 0.01, "type-1 share {type1}");

        for (i, mu) in [1.0, 0.5].into_iter().enumerate() {
            let hs: Vec<f64> = t
                .records
                .iter()
                .filter(|r| r.vnf_type == i)
                .map(|r| r.holding)
                .collect();
            let mean = hs.iter().sum::<f64>() / hs.len() as f64;
            assert!((mean - 1.0 / mu).abs() <= 0.02 / mu, "type {i} holding {mean}");
        }
    }

    #[test]
    fn file_sets_use_consecutive_seeds() {
        let set = generate_file_set(&table1_types(), 3, 5, 40).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(
            set.iter().map(|t| t.seed).collect::<Vec<_>>(),
            vec![40, 41, 42]
        );
        let single = generate_file_set(&table1_types(), 1, 5, 40).unwrap();
        assert_eq!(single[0], generate_trace(&table1_types(), 5, 40).unwrap());
        assert!(generate_file_set(&table1_types(), 0, 5, 40).is_err());
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let t = generate_trace(&table1_types(), 500, 99).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let back = Trace::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, t);

        let mut again = Vec::new();
        back.write_jsonl(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_line_layout() {
        let t = generate_trace(&table1_types(), 1, 7).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            r#"{"header":{"seed":7,"rates":{"lambda":[3.0,2.0],"mu":[1.0,0.5]},"n":1}}"#
        );
        assert!(lines.next().unwrap().starts_with(r#"{"seq":0,"type":"#));
        assert!(lines.next().is_none());
    }

    #[test]
    fn malformed_files_are_rejected() {
        let header = r#"{"header":{"seed":1,"rates":{"lambda":[1.0],"mu":[1.0]},"n":1}}"#;
        let cases = [
            String::new(),
            header.to_string(),
            format!("{header}\n{{\"seq\":0,\"type\":2,\"inter_arrival\":0.1,\"holding\":1.0}}"),
            format!("{header}\n{{\"seq\":3,\"type\":1,\"inter_arrival\":0.1,\"holding\":1.0}}"),
            format!("{header}\n{{\"seq\":0,\"type\":1,\"inter_arrival\":0.1,\"holding\":0.0}}"),
        ];
        for case in cases {
            assert!(Trace::read_jsonl(case.as_bytes()).is_err(), "{case}");
        }
    }

    #[test]
    fn invalid_rates() {
        let mut types = table1_types();
        types[0].arrival_rate = 0.0;
        assert!(matches!(
            generate_trace(&types, 10, 1),
            Err(Error::InvalidRate(_))
        ));
    }
}
