//! Random-walk Metropolis–Hastings over the exact (unnormalized) posterior of
//! the queue rates.
//!
//! Proposals are isotropic Gaussian steps in `(ln λ, ln μ)`. The target in
//! those coordinates carries the Jacobian `λ·μ`, so the chain's stationary law
//! in `(λ, μ)` is the posterior.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queue::{log_likelihood_unchecked, SuffStats};
use crate::rng::Seed;
use crate::vb::PriorSpec;

pub const CSV_HEADER: [&str; 2] = ["lambda", "mu"];

pub const DEFAULT_PROPOSAL_STD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Iterations including burn-in.
    pub total_samples: usize,
    pub burn_in: usize,
    /// Standard deviation of the step in log-parameter space.
    pub proposal_std: f64,
    pub seed: Seed,
}

impl McmcConfig {
    pub fn new(total_samples: usize, burn_in: usize, proposal_std: f64, seed: Seed) -> Result<Self> {
        let cfg = Self {
            total_samples,
            burn_in,
            proposal_std,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.total_samples {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than total_samples ({})",
                self.burn_in, self.total_samples
            )));
        }
        if !(self.proposal_std.is_finite() && self.proposal_std >= 0.0) {
            return Err(Error::Config(format!(
                "proposal_std must be finite and >= 0, got {}",
                self.proposal_std
            )));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: Seed) -> Self {
        Self { seed, ..self }
    }
}

impl Default for McmcConfig {
    /// 1000 iterations, 200 of them burn-in.
    fn default() -> Self {
        Self {
            total_samples: 1000,
            burn_in: 200,
            proposal_std: DEFAULT_PROPOSAL_STD,
            seed: Seed(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcChain {
    /// Post-burn-in `(λ, μ)` states.
    pub samples: Vec<(f64, f64)>,
    pub acceptance_rate: f64,
}

/// log-likelihood + ln π(λ) + ln π(μ); the evidence is omitted.
pub fn log_unnormalized_posterior(stats: &SuffStats, prior: &PriorSpec, lambda: f64, mu: f64) -> Result<f64> {
    for (name, v) in [("lambda", lambda), ("mu", mu)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain {
                func: "log_unnormalized_posterior",
                detail: format!("{name} must be finite and > 0, got {v}"),
            });
        }
    }
    Ok(log_post_unchecked(stats, prior, lambda, mu))
}

fn log_post_unchecked(stats: &SuffStats, prior: &PriorSpec, lambda: f64, mu: f64) -> f64 {
    log_likelihood_unchecked(stats, lambda, mu)
        + prior.prior_lambda.ln_pdf_unchecked(lambda)
        + prior.prior_mu.ln_pdf_unchecked(mu)
}

/// Runs one chain started at the maximum-likelihood rates.
pub fn run_chain(stats: &SuffStats, prior: &PriorSpec, config: &McmcConfig) -> Result<McmcChain> {
    config.validate()?;
    if stats.n == 0 {
        return Err(Error::Domain {
            func: "run_chain",
            detail: "empty dataset".into(),
        });
    }
    let mut rng = config.seed.rng();
    let (l0, m0) = stats.mle();
    let mut x = [l0.ln(), m0.ln()];
    let log_target = |x: &[f64; 2]| {
        let (l, m) = (x[0].exp(), x[1].exp());
        if !(l > 0.0 && m > 0.0 && l.is_finite() && m.is_finite()) {
            return f64::NEG_INFINITY;
        }
        log_post_unchecked(stats, prior, l, m) + x[0] + x[1]
    };
    let mut lp = log_target(&x);
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity(config.total_samples - config.burn_in);
    for i in 0..config.total_samples {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let prop = [x[0] + config.proposal_std * z0, x[1] + config.proposal_std * z1];
        let lp_prop = log_target(&prop);
        let u: f64 = rng.random();
        if lp_prop.is_finite() && (u.ln() < lp_prop - lp || lp_prop >= lp) {
            x = prop;
            lp = lp_prop;
            accepted += 1;
        }
        if i >= config.burn_in {
            samples.push((x[0].exp(), x[1].exp()));
        }
    }
    Ok(McmcChain {
        samples,
        acceptance_rate: accepted as f64 / config.total_samples as f64,
    })
}

impl McmcChain {
    pub fn mean(&self) -> (f64, f64) {
        let n = self.samples.len() as f64;
        let (sl, sm) = self
            .samples
            .iter()
            .fold((0.0, 0.0), |(a, b), (l, m)| (a + l, b + m));
        (sl / n, sm / n)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(CSV_HEADER)?;
        for (l, m) in &self.samples {
            wtr.write_record([l.to_string(), m.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a `lambda,mu` dump. The acceptance rate is not stored in the
    /// file and comes back as NaN.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                detail: "expected header `lambda,mu`".into(),
            });
        }
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let parse = |s: &str| -> Result<f64> {
                let v: f64 = s.parse().map_err(|_| Error::Parse {
                    line,
                    detail: format!("`{s}` is not a number"),
                })?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Parse {
                        line,
                        detail: format!("rate must be positive and finite, got {v}"),
                    });
                }
                Ok(v)
            };
            if rec.len() != 2 {
                return Err(Error::Parse {
                    line,
                    detail: format!("expected 2 fields, found {}", rec.len()),
                });
            }
            samples.push((parse(&rec[0])?, parse(&rec[1])?));
        }
        if samples.is_empty() {
            return Err(Error::Parse {
                line: 2,
                detail: "chain has no samples".into(),
            });
        }
        Ok(Self {
            samples,
            acceptance_rate: f64::NAN,
        })
    }
}

/// Batch-means Monte Carlo standard error of the mean of a correlated series.
pub fn batch_means_se(values: &[f64], batches: usize) -> f64 {
    let batches = batches.max(2).min(values.len());
    let size = values.len() / batches;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..batches)
        .map(|k| values[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}
