//! Chance-constrained staffing: the probability that a server count meets the
//! delay target under a posterior approximation, and the smallest server count
//! whose probability reaches the confidence level.
//!
//! For `c` servers the two constraints `C(λ/μ, c) ≤ α` and `cμ > λ` hold
//! together exactly when `λ/μ ≤ r*(c, α)`, because `r*(c, α) < c` and the
//! delay probability is increasing in the load. The joint chance constraint
//! is therefore a single ratio event.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::erlang::{erlang_c_delay, max_load_for_target};
use crate::error::{Error, Result};
use crate::mcmc::McmcChain;
use crate::queue::TrueParams;
use crate::special::inc_beta_unchecked;
use crate::vb::ProductGammaPosterior;

pub const DEFAULT_C_MAX: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaffingSpec {
    /// Largest acceptable fraction of delayed customers.
    pub alpha: f64,
    /// Confidence level of the chance constraint.
    pub beta: f64,
    pub c_max: u32,
}

impl StaffingSpec {
    pub fn new(alpha: f64, beta: f64, c_max: u32) -> Result<Self> {
        let spec = Self { alpha, beta, c_max };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if self.c_max == 0 {
            return Err(Error::Config("c_max must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for StaffingSpec {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.7,
            c_max: DEFAULT_C_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaffingSolution {
    pub c_star: u32,
    pub attained_probability: f64,
    /// Every probed `(c, probability)` pair, sorted by `c`.
    pub probe_trace: Vec<(u32, f64)>,
}

/// P(λ/μ ≤ r*(c, α)) for independent Gamma factors.
///
/// With X = b_q·λ ~ Gamma(a_q, 1) and Y = b_s·μ ~ Gamma(a_s, 1), the event is
/// X/(X+Y) ≤ u with u = k/(1+k), k = r*·b_q/b_s, and X/(X+Y) ~ Beta(a_q, a_s).
pub fn constraint_probability_gamma(q: &ProductGammaPosterior, c: u32, alpha: f64) -> Result<f64> {
    let t = max_load_for_target(c, alpha)?;
    Ok(ratio_cdf_gamma(q, t))
}

/// P(λ/μ ≤ t) under q.
pub fn ratio_cdf_gamma(q: &ProductGammaPosterior, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let k = t * q.q_lambda.rate() / q.q_mu.rate();
    let u = k / (1.0 + k);
    inc_beta_unchecked(q.q_lambda.shape(), q.q_mu.shape(), u)
}

/// Fraction of chain states with λ/μ ≤ r*(c, α).
pub fn constraint_probability_samples(chain: &McmcChain, c: u32, alpha: f64) -> Result<f64> {
    if chain.samples.is_empty() {
        return Err(Error::Domain {
            func: "constraint_probability_samples",
            detail: "chain has no samples".into(),
        });
    }
    let t = max_load_for_target(c, alpha)?;
    let hits = chain.samples.iter().filter(|(l, m)| l / m <= t).count();
    Ok(hits as f64 / chain.samples.len() as f64)
}

/// Indicator of the deterministic constraints at known rates, i.e. the
/// constraint probability under a point mass at `params`.
pub fn constraint_probability_point(params: TrueParams, c: u32, alpha: f64) -> Result<f64> {
    let t = max_load_for_target(c, alpha)?;
    Ok(if params.offered_load() <= t { 1.0 } else { 0.0 })
}

/// Smallest `c ∈ [1, c_max]` with `prob(c) ≥ β`.
///
/// The scan starts at `⌈start_load⌉` (clamped to the search range), walks down
/// while the constraint still holds and up while it does not. Every probe is
/// memoized and recorded; a decreasing probe sequence is reported as
/// [`Error::NonMonotone`].
pub fn solve_staffing<F>(mut prob: F, start_load: f64, spec: &StaffingSpec) -> Result<StaffingSolution>
where
    F: FnMut(u32) -> Result<f64>,
{
    spec.validate()?;
    let mut probes: BTreeMap<u32, f64> = BTreeMap::new();
    let mut eval = |c: u32, probes: &mut BTreeMap<u32, f64>| -> Result<f64> {
        if let Some(&p) = probes.get(&c) {
            return Ok(p);
        }
        let p = prob(c)?;
        probes.insert(c, p);
        Ok(p)
    };

    let start = if start_load.is_finite() && start_load > 1.0 {
        (start_load.ceil() as u64).min(spec.c_max as u64) as u32
    } else {
        1
    };

    let c_star = if eval(start, &mut probes)? >= spec.beta {
        let mut c = start;
        while c > 1 && eval(c - 1, &mut probes)? >= spec.beta {
            c -= 1;
        }
        Some(c)
    } else {
        let mut found = None;
        for c in start + 1..=spec.c_max {
            if eval(c, &mut probes)? >= spec.beta {
                found = Some(c);
                break;
            }
        }
        found
    };

    let probe_trace: Vec<(u32, f64)> = probes.into_iter().collect();
    for w in probe_trace.windows(2) {
        if w[1].1 < w[0].1 {
            return Err(Error::NonMonotone {
                c_prev: w[0].0,
                prev: w[0].1,
                c_next: w[1].0,
                next: w[1].1,
            });
        }
    }
    match c_star {
        Some(c_star) => {
            let attained_probability = probe_trace
                .iter()
                .find(|(c, _)| *c == c_star)
                .map(|(_, p)| *p)
                .expect("c_star was probed");
            Ok(StaffingSolution {
                c_star,
                attained_probability,
                probe_trace,
            })
        }
        None => Err(Error::InfeasibleWithinCap {
            c_max: spec.c_max,
            beta: spec.beta,
            best: probe_trace.last().map_or(0.0, |(_, p)| *p),
        }),
    }
}

/// (VBJCCP) staffing level under a product-Gamma posterior.
pub fn solve_with_posterior(q: &ProductGammaPosterior, spec: &StaffingSpec) -> Result<StaffingSolution> {
    solve_staffing(
        |c| constraint_probability_gamma(q, c, spec.alpha),
        q.mean_load(),
        spec,
    )
}

/// (BJCCP) staffing level by sample average over chain states.
pub fn solve_with_chain(chain: &McmcChain, spec: &StaffingSpec) -> Result<StaffingSolution> {
    let (ml, mm) = chain.mean();
    solve_staffing(
        |c| constraint_probability_samples(chain, c, spec.alpha),
        ml / mm,
        spec,
    )
}

/// Optimal staffing at known rates: the smallest `c` with `λ₀ < cμ₀` and
/// delay probability at most `alpha`, by direct scan of the delay formula.
pub fn deterministic_optimum(params: TrueParams, alpha: f64, c_max: u32) -> Result<u32> {
    let r = params.offered_load();
    for c in 1..=c_max {
        if r >= c as f64 {
            continue;
        }
        if erlang_c_delay(r, c)? <= alpha {
            return Ok(c);
        }
    }
    Err(Error::InfeasibleWithinCap {
        c_max,
        beta: 1.0,
        best: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::GammaLaw;

    fn q(aq: f64, bq: f64, as_: f64, bs: f64) -> ProductGammaPosterior {
        ProductGammaPosterior::new(GammaLaw::new(aq, bq).unwrap(), GammaLaw::new(as_, bs).unwrap())
    }

    #[test]
    fn symmetric_posterior_at_unit_ratio_is_half() {
        for &a in &[2.0, 30.0, 2000.0] {
            assert!((ratio_cdf_gamma(&q(a, 3.0, a, 3.0), 1.0) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn large_c_probability_is_one() {
        let post = q(2000.0, 125.0, 2000.0, 2000.0);
        let p = constraint_probability_gamma(&post, 200, 0.5).unwrap();
        assert!((p - 1.0).abs() < 1e-6);
    }

    #[test]
    fn probability_nondecreasing_in_c() {
        let post = q(150.0, 9.0, 150.0, 140.0);
        let mut prev = 0.0;
        for c in 1..60 {
            let p = constraint_probability_gamma(&post, c, 0.5).unwrap();
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn sample_evaluator_edges() {
        let chain = McmcChain {
            samples: vec![(1.0, 1.0), (2.0, 1.0), (1.5, 1.0)],
            acceptance_rate: 0.5,
        };
        assert_eq!(constraint_probability_samples(&chain, 20, 0.5).unwrap(), 1.0);
        let far = McmcChain {
            samples: vec![(100.0, 1.0), (90.0, 1.0)],
            acceptance_rate: 0.5,
        };
        assert_eq!(constraint_probability_samples(&far, 5, 0.5).unwrap(), 0.0);
        let empty = McmcChain {
            samples: vec![],
            acceptance_rate: 0.0,
        };
        assert!(constraint_probability_samples(&empty, 5, 0.5).is_err());
    }

    #[test]
    fn point_mass_recovers_deterministic_optimum() {
        let truth = TrueParams::new(16.0, 1.0).unwrap();
        let spec = StaffingSpec::new(0.5, 0.7, 200).unwrap();
        let sol = solve_staffing(
            |c| constraint_probability_point(truth, c, spec.alpha),
            truth.offered_load(),
            &spec,
        )
        .unwrap();
        assert_eq!(sol.c_star, deterministic_optimum(truth, 0.5, 200).unwrap());
        assert_eq!(sol.c_star, 19);
    }

    #[test]
    fn higher_confidence_needs_more_servers() {
        let post = q(300.0, 18.0, 300.0, 290.0);
        let lo = solve_with_posterior(&post, &StaffingSpec::new(0.5, 0.7, 200).unwrap()).unwrap();
        let hi = solve_with_posterior(&post, &StaffingSpec::new(0.5, 0.9, 200).unwrap()).unwrap();
        assert!(hi.c_star >= lo.c_star);
    }

    #[test]
    fn solution_satisfies_definition() {
        let post = q(500.0, 31.0, 500.0, 505.0);
        let spec = StaffingSpec::default();
        let sol = solve_with_posterior(&post, &spec).unwrap();
        assert!(sol.attained_probability >= spec.beta);
        if sol.c_star > 1 {
            assert!(constraint_probability_gamma(&post, sol.c_star - 1, spec.alpha).unwrap() < spec.beta);
        }
    }

    #[test]
    fn infeasible_cap() {
        let post = q(2000.0, 125.0, 2000.0, 2000.0);
        let spec = StaffingSpec::new(0.5, 0.7, 10).unwrap();
        assert!(matches!(
            solve_with_posterior(&post, &spec),
            Err(Error::InfeasibleWithinCap { .. })
        ));
    }

    #[test]
    fn non_monotone_evaluator_is_reported() {
        let spec = StaffingSpec::new(0.5, 0.7, 20).unwrap();
        let r = solve_staffing(|c| Ok(if c == 5 { 0.9 } else if c < 5 { 0.95 } else { 0.1 }), 5.0, &spec);
        assert!(matches!(r, Err(Error::NonMonotone { .. })));
    }
}
