//! Mean-field variational posterior for the queue model.
//!
//! The variational family is the product `Gamma(λ; a_q, b_q) · Gamma(μ; a_s, b_s)`
//! (shape/rate) and the prior is a product of inverse-gamma laws. The ELBO has a
//! closed form that splits into one independent term per rate:
//!
//! ```text
//! E_q[log-lik] = n(ψ(a) − ln b) − (a/b)·S
//! E_q[log-prior] = α ln β − ln Γ(α) − (α+1)(ψ(a) − ln b) − β·b/(a−1)
//! H[q] = a − ln b + ln Γ(a) + (1−a)ψ(a)
//! ```
//!
//! where `S` is the sum of the durations for that rate. `E_q[1/λ] = b/(a−1)`
//! is finite only for `a > 1`, so the optimizer works in the coordinates
//! `u = ln(a − 1 − ε)`, `v = ln b`.

use serde::{Deserialize, Serialize};

use crate::distributions::{GammaLaw, InvGammaLaw};
use crate::error::{Error, Result};
use crate::queue::{SuffStats, TrueParams};
use crate::special::{digamma_unchecked, ln_gamma_unchecked, trigamma};

/// Margin ε keeping variational shapes strictly above one.
pub const SHAPE_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub prior_lambda: InvGammaLaw,
    pub prior_mu: InvGammaLaw,
}

impl Default for PriorSpec {
    /// InvGamma(1, 1) on both rates.
    fn default() -> Self {
        let unit = InvGammaLaw::new(1.0, 1.0).expect("unit inverse-gamma is valid");
        Self {
            prior_lambda: unit,
            prior_mu: unit,
        }
    }
}

/// q(λ, μ) = Gamma(λ; a_q, b_q) · Gamma(μ; a_s, b_s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductGammaPosterior {
    pub q_lambda: GammaLaw,
    pub q_mu: GammaLaw,
}

impl ProductGammaPosterior {
    pub fn new(q_lambda: GammaLaw, q_mu: GammaLaw) -> Self {
        Self { q_lambda, q_mu }
    }

    /// E[λ]/E[μ], the starting point of the staffing search.
    pub fn mean_load(&self) -> f64 {
        self.q_lambda.mean() / self.q_mu.mean()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElboReport {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// ELBO after the initial point and after every accepted step.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VbOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Run the three deterministic starts and keep the best; otherwise only
    /// the MLE-matched start.
    pub multi_start: bool,
}

impl Default for VbOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 500,
            multi_start: true,
        }
    }
}

/// One factor's share of the ELBO: data count, duration sum and prior.
#[derive(Debug, Clone, Copy)]
struct Block {
    n: f64,
    sum: f64,
    alpha: f64,
    beta: f64,
    prior_const: f64,
}

impl Block {
    fn new(n: usize, sum: f64, prior: &InvGammaLaw) -> Self {
        let (alpha, beta) = (prior.shape(), prior.scale());
        Self {
            n: n as f64,
            sum,
            alpha,
            beta,
            prior_const: alpha * beta.ln() - ln_gamma_unchecked(alpha),
        }
    }

    fn value(&self, a: f64, b: f64) -> f64 {
        let psi = digamma_unchecked(a);
        let ln_b = b.ln();
        let e_log = psi - ln_b;
        let loglik = self.n * e_log - a / b * self.sum;
        let log_prior =
            self.prior_const - (self.alpha + 1.0) * e_log - self.beta * b / (a - 1.0);
        let entropy = a - ln_b + ln_gamma_unchecked(a) + (1.0 - a) * psi;
        loglik + log_prior + entropy
    }

    /// (∂/∂a, ∂/∂b)
    fn gradient(&self, a: f64, b: f64) -> (f64, f64) {
        let am1 = a - 1.0;
        let da = (self.n - self.alpha - a) * trigamma(a) - self.sum / b
            + self.beta * b / (am1 * am1)
            + 1.0;
        let db = -(self.n - self.alpha) / b + a * self.sum / (b * b) - self.beta / am1;
        (da, db)
    }

    fn to_natural(u: f64, v: f64) -> (f64, f64) {
        (1.0 + SHAPE_MARGIN + u.exp(), v.exp())
    }

    fn to_unconstrained(a: f64, b: f64) -> (f64, f64) {
        ((a - 1.0 - SHAPE_MARGIN).ln(), b.ln())
    }

    /// Gradient with respect to (u, v).
    fn gradient_uv(&self, u: f64, v: f64) -> [f64; 2] {
        let (a, b) = Self::to_natural(u, v);
        let (da, db) = self.gradient(a, b);
        [da * u.exp(), db * b]
    }

    fn value_uv(&self, u: f64, v: f64) -> f64 {
        let (a, b) = Self::to_natural(u, v);
        self.value(a, b)
    }
}

fn blocks(stats: &SuffStats, prior: &PriorSpec) -> [Block; 2] {
    [
        Block::new(stats.n, stats.sum_interarrival, &prior.prior_lambda),
        Block::new(stats.n, stats.sum_service, &prior.prior_mu),
    ]
}

fn check_shape(q: &GammaLaw, which: &str) -> Result<()> {
    if q.shape() <= 1.0 {
        return Err(Error::Domain {
            func: "elbo",
            detail: format!(
                "{which} shape must exceed 1 for E[1/x] to exist, got {}",
                q.shape()
            ),
        });
    }
    Ok(())
}

/// Closed-form evidence lower bound of `q` for the queue likelihood and prior.
pub fn elbo(stats: &SuffStats, prior: &PriorSpec, q: &ProductGammaPosterior) -> Result<f64> {
    check_shape(&q.q_lambda, "q_lambda")?;
    check_shape(&q.q_mu, "q_mu")?;
    let [bl, bm] = blocks(stats, prior);
    Ok(bl.value(q.q_lambda.shape(), q.q_lambda.rate()) + bm.value(q.q_mu.shape(), q.q_mu.rate()))
}

/// Per-block optimizer outcome.
struct BlockFit {
    a: f64,
    b: f64,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    trace: Vec<f64>,
}

/// Quasi-Newton (BFGS) ascent of one block in (u, v) with backtracking.
fn maximize_block(block: &Block, start: (f64, f64), opts: &VbOptions) -> BlockFit {
    const ARMIJO: f64 = 1e-4;
    const MAX_STEP: f64 = 4.0;
    let norm = |g: &[f64; 2]| g[0].hypot(g[1]);

    let (mut u, mut v) = Block::to_unconstrained(start.0, start.1);
    let mut f = block.value_uv(u, v);
    let mut g = block.gradient_uv(u, v);
    // Inverse-Hessian approximation of −f.
    let mut h = [[1.0, 0.0], [0.0, 1.0]];
    let mut scaled = false;
    let mut restarted = false;
    let mut trace = vec![f];
    let mut iterations = 0;

    // Two blocks share the joint tolerance.
    let tol = opts.grad_tol / std::f64::consts::SQRT_2;
    while iterations < opts.max_iter && norm(&g) > tol {
        iterations += 1;
        // Ascent direction d = H·g.
        let mut d = [
            h[0][0] * g[0] + h[0][1] * g[1],
            h[1][0] * g[0] + h[1][1] * g[1],
        ];
        let mut slope = d[0] * g[0] + d[1] * g[1];
        if !(slope > 0.0) {
            h = [[1.0, 0.0], [0.0, 1.0]];
            d = g;
            slope = norm(&g).powi(2);
        }
        let len = norm(&d);
        let mut t = if len > MAX_STEP { MAX_STEP / len } else { 1.0 };
        let noise = 1e-14 * (f.abs() + 1.0);
        let mut accepted = None;
        for _ in 0..60 {
            let (un, vn) = (u + t * d[0], v + t * d[1]);
            let fnew = block.value_uv(un, vn);
            if fnew.is_finite() {
                let gnew = block.gradient_uv(un, vn);
                let armijo = fnew >= f + ARMIJO * t * slope;
                // At the roundoff floor the ELBO difference is noise; accept
                // steps that shrink the gradient without measurably losing ELBO.
                let floor = fnew >= f - noise && norm(&gnew) < norm(&g);
                if armijo || floor {
                    accepted = Some((un, vn, fnew, gnew));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((un, vn, fnew, gnew)) = accepted else {
            if restarted {
                break;
            }
            // Retry once along the gradient with a fresh metric.
            restarted = true;
            h = [[1.0, 0.0], [0.0, 1.0]];
            scaled = false;
            continue;
        };
        restarted = false;
        let s = [un - u, vn - v];
        // y for the minimization of −f.
        let y = [g[0] - gnew[0], g[1] - gnew[1]];
        let sy = s[0] * y[0] + s[1] * y[1];
        if sy > 1e-300 {
            if !scaled {
                let yy = y[0] * y[0] + y[1] * y[1];
                let gamma = sy / yy;
                h = [[gamma, 0.0], [0.0, gamma]];
                scaled = true;
            }
            h = bfgs_update(h, s, y, sy);
        }
        u = un;
        v = vn;
        f = fnew;
        g = gnew;
        trace.push(f);
    }
    let (a, b) = Block::to_natural(u, v);
    BlockFit {
        a,
        b,
        value: f,
        grad_norm: norm(&g),
        iterations,
        trace,
    }
}

fn bfgs_update(h: [[f64; 2]; 2], s: [f64; 2], y: [f64; 2], sy: f64) -> [[f64; 2]; 2] {
    let rho = 1.0 / sy;
    let hy = [h[0][0] * y[0] + h[0][1] * y[1], h[1][0] * y[0] + h[1][1] * y[1]];
    let yhy = y[0] * hy[0] + y[1] * hy[1];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = h[i][j] - rho * (hy[i] * s[j] + s[i] * hy[j])
                + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
    out
}

/// Deterministic starting points (a, b) for one block.
fn starts(block: &Block, multi: bool) -> Vec<(f64, f64)> {
    let mle = block.n / block.sum;
    let a0 = block.n + 1.5;
    let mut out = vec![(a0, a0 / mle)];
    if multi {
        let mode = block.beta / (block.alpha + 1.0);
        let a1 = block.alpha + 2.0;
        out.push((a1, a1 / mode));
        out.push((2.0, 2.0 / mle));
    }
    out
}

/// Maximizes the ELBO over the product-Gamma family.
///
/// Each rate is fitted independently from three deterministic starts
/// (MLE-matched, prior-matched, wide); the best final ELBO per block wins.
/// Non-convergence is reported through [`ElboReport::converged`].
pub fn fit_vb(
    stats: &SuffStats,
    prior: &PriorSpec,
    opts: &VbOptions,
) -> Result<(ProductGammaPosterior, ElboReport)> {
    if stats.n == 0 || !(stats.sum_interarrival > 0.0 && stats.sum_service > 0.0) {
        return Err(Error::Domain {
            func: "fit_vb",
            detail: "need n >= 1 and positive duration sums".into(),
        });
    }
    let fits: Vec<BlockFit> = blocks(stats, prior)
        .iter()
        .map(|blk| {
            starts(blk, opts.multi_start)
                .into_iter()
                .map(|s| maximize_block(blk, s, opts))
                .fold(None::<BlockFit>, |best, fit| match best {
                    Some(b) if b.value >= fit.value || !fit.value.is_finite() => Some(b),
                    _ => Some(fit),
                })
                .expect("at least one start")
        })
        .collect();
    let (fl, fm) = (&fits[0], &fits[1]);
    let q = ProductGammaPosterior::new(GammaLaw::new(fl.a, fl.b)?, GammaLaw::new(fm.a, fm.b)?);
    let gradient_norm = fl.grad_norm.hypot(fm.grad_norm);
    // Blocks are independent; the joint trace pads the shorter block with its
    // final value.
    let len = fl.trace.len().max(fm.trace.len());
    let at = |t: &[f64], i: usize| t[i.min(t.len() - 1)];
    let trace = (0..len).map(|i| at(&fl.trace, i) + at(&fm.trace, i)).collect();
    let report = ElboReport {
        value: fl.value + fm.value,
        iterations: fl.iterations.max(fm.iterations),
        converged: gradient_norm <= opts.grad_tol,
        gradient_norm,
        trace,
    };
    Ok((q, report))
}

/// Gamma(n, n/λ_a) · Gamma(n, n/μ_a): mean equal to the anchor, variance
/// anchor²/n.
pub fn anchored_baseline(n: usize, anchor: TrueParams) -> Result<ProductGammaPosterior> {
    if n < 2 {
        return Err(Error::Domain {
            func: "anchored_baseline",
            detail: format!("n must be >= 2, got {n}"),
        });
    }
    let nf = n as f64;
    Ok(ProductGammaPosterior::new(
        GammaLaw::new(nf, nf / anchor.lambda0)?,
        GammaLaw::new(nf, nf / anchor.mu0)?,
    ))
}

/// The baseline anchored at the maximum-likelihood rates of `stats`.
pub fn mle_baseline(stats: &SuffStats) -> Result<ProductGammaPosterior> {
    let (l, m) = stats.mle();
    anchored_baseline(stats.n, TrueParams::new(l, m)?)
}

/// Exact value of `KL(Q_n‖Π) + E_{Q_n}[KL(P₀ⁿ‖P_ξⁿ)]` for the baseline
/// `Q_n` anchored at the true rates, with the constant `C₉` of its
/// `C₉·ln n` upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineBound {
    pub n: usize,
    pub kl_to_prior: f64,
    pub expected_data_kl: f64,
    pub c9: f64,
}

impl BaselineBound {
    pub fn total(&self) -> f64 {
        self.kl_to_prior + self.expected_data_kl
    }

    pub fn bound(&self) -> f64 {
        self.c9 * (self.n as f64).ln()
    }
}

pub fn baseline_bound(n: usize, truth: TrueParams, prior: &PriorSpec) -> Result<BaselineBound> {
    let q = anchored_baseline(n, truth)?;
    let nf = n as f64;
    let mut kl_to_prior = 0.0;
    let mut expected_data_kl = 0.0;
    let mut c9 = 1.0;
    for (law, rate0, pr) in [
        (q.q_lambda, truth.lambda0, prior.prior_lambda),
        (q.q_mu, truth.mu0, prior.prior_mu),
    ] {
        let (a, b) = (law.shape(), law.rate());
        let psi = digamma_unchecked(a);
        let e_log = psi - b.ln();
        let neg_entropy = -(a - b.ln() + ln_gamma_unchecked(a) + (1.0 - a) * psi);
        let (alpha, beta) = (pr.shape(), pr.scale());
        let e_log_prior = alpha * beta.ln() - ln_gamma_unchecked(alpha)
            - (alpha + 1.0) * e_log
            - beta * b / (a - 1.0);
        kl_to_prior += neg_entropy - e_log_prior;
        // n·E_q[ln(r₀/r) + r/r₀ − 1] for exponential observations.
        expected_data_kl += nf * (rate0.ln() - e_log + law.mean() / rate0 - 1.0);
        let k = 2.0 + 2.0 * beta / rate0 - (2.0 * std::f64::consts::PI).sqrt().ln()
            - (alpha * beta.ln() - ln_gamma_unchecked(alpha))
            + alpha * rate0.ln();
        c9 += k.max(0.0);
    }
    Ok(BaselineBound {
        n,
        kl_to_prior,
        expected_data_kl,
        c9,
    })
}
