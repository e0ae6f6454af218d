//! M/M/c observation model: simulated datasets of interarrival and service
//! durations, their sufficient statistics, and the exact log-likelihood.
//!
//! Only durations are stored. The likelihood of the arrival/service record
//! depends on the data through `n`, `Σ interarrival` and `Σ service` alone.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::distributions::Exponential;
use crate::error::{Error, Result};
use crate::rng::Seed;

pub const CSV_HEADER: [&str; 2] = ["interarrival", "service"];

/// Arrival rate λ₀ and per-server service rate μ₀ of the data-generating queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub lambda0: f64,
    pub mu0: f64,
}

impl TrueParams {
    pub fn new(lambda0: f64, mu0: f64) -> Result<Self> {
        for (name, v) in [("lambda0", lambda0), ("mu0", mu0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain {
                    func: "TrueParams::new",
                    detail: format!("{name} must be finite and > 0, got {v}"),
                });
            }
        }
        Ok(Self { lambda0, mu0 })
    }

    /// Offered load r = λ₀/μ₀.
    pub fn offered_load(&self) -> f64 {
        self.lambda0 / self.mu0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    interarrivals: Vec<f64>,
    services: Vec<f64>,
}

impl Dataset {
    pub fn new(interarrivals: Vec<f64>, services: Vec<f64>) -> Result<Self> {
        if interarrivals.is_empty() {
            return Err(Error::Domain {
                func: "Dataset::new",
                detail: "dataset must contain at least one customer".into(),
            });
        }
        if interarrivals.len() != services.len() {
            return Err(Error::Domain {
                func: "Dataset::new",
                detail: format!(
                    "column lengths differ: {} interarrivals vs {} services",
                    interarrivals.len(),
                    services.len()
                ),
            });
        }
        if let Some((i, v)) = interarrivals
            .iter()
            .chain(services.iter())
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Domain {
                func: "Dataset::new",
                detail: format!("entry {i} is not a positive finite duration: {v}"),
            });
        }
        Ok(Self {
            interarrivals,
            services,
        })
    }

    pub fn len(&self) -> usize {
        self.interarrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interarrivals.is_empty()
    }

    pub fn interarrivals(&self) -> &[f64] {
        &self.interarrivals
    }

    pub fn services(&self) -> &[f64] {
        &self.services
    }

    pub fn suff_stats(&self) -> SuffStats {
        SuffStats {
            n: self.len(),
            sum_interarrival: self.interarrivals.iter().sum(),
            sum_service: self.services.iter().sum(),
        }
    }

    /// Reads a two-column `interarrival,service` CSV. Rows with nonpositive or
    /// non-numeric entries are rejected with their line number.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                detail: format!("expected header `interarrival,service`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut interarrivals = Vec::new();
        let mut services = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != 2 {
                return Err(Error::Parse {
                    line,
                    detail: format!("expected 2 fields, found {}", rec.len()),
                });
            }
            let t = parse_duration(&rec[0], line)?;
            let s = parse_duration(&rec[1], line)?;
            interarrivals.push(t);
            services.push(s);
        }
        if interarrivals.is_empty() {
            return Err(Error::Parse {
                line: 2,
                detail: "dataset has no rows".into(),
            });
        }
        Self::new(interarrivals, services)
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        Self::read_csv(s.as_bytes())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(CSV_HEADER)?;
        for (t, s) in self.interarrivals.iter().zip(&self.services) {
            wtr.write_record([t.to_string(), s.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn parse_duration(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        line,
        detail: format!("`{field}` is not a number"),
    })?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Parse {
            line,
            detail: format!("duration must be positive and finite, got {v}"),
        });
    }
    Ok(v)
}

/// Sufficient statistics of a dataset for (λ, μ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuffStats {
    pub n: usize,
    pub sum_interarrival: f64,
    pub sum_service: f64,
}

impl SuffStats {
    /// Maximum-likelihood estimates (n/ΣT, n/ΣS).
    pub fn mle(&self) -> (f64, f64) {
        let n = self.n as f64;
        (n / self.sum_interarrival, n / self.sum_service)
    }
}

/// n i.i.d. Exp(λ₀) interarrivals and n i.i.d. Exp(μ₀) services drawn from two
/// independent streams of `seed`.
pub fn simulate_dataset(params: TrueParams, n: usize, seed: Seed) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Domain {
            func: "simulate_dataset",
            detail: "n must be >= 1".into(),
        });
    }
    let arrivals = Exponential::new(params.lambda0)?;
    let service = Exponential::new(params.mu0)?;
    let mut arr_rng = seed.stream(0);
    let mut svc_rng = seed.stream(1);
    // Redraw the (measure-zero) exact zeros.
    let draw = |law: &Exponential, rng: &mut rand_chacha::ChaCha8Rng| loop {
        let v = law.sample_one(rng);
        if v > 0.0 {
            break v;
        }
    };
    let interarrivals = (0..n).map(|_| draw(&arrivals, &mut arr_rng)).collect();
    let services = (0..n).map(|_| draw(&service, &mut svc_rng)).collect();
    Dataset::new(interarrivals, services)
}

/// n·ln λ − λ·ΣT + n·ln μ − μ·ΣS
pub fn log_likelihood(stats: &SuffStats, lambda: f64, mu: f64) -> Result<f64> {
    for (name, v) in [("lambda", lambda), ("mu", mu)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain {
                func: "log_likelihood",
                detail: format!("{name} must be finite and > 0, got {v}"),
            });
        }
    }
    Ok(log_likelihood_unchecked(stats, lambda, mu))
}

pub(crate) fn log_likelihood_unchecked(stats: &SuffStats, lambda: f64, mu: f64) -> f64 {
    let n = stats.n as f64;
    n * lambda.ln() - lambda * stats.sum_interarrival + n * mu.ln() - mu * stats.sum_service
}
