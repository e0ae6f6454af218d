//! Parametric laws used by the staffing model and the Gaussian feasible-region
//! study.
//!
//! Gamma laws are parameterized by shape/rate (mean `a/b`), inverse-gamma laws
//! by shape/scale (density ∝ x^(−α−1) e^(−β/x)). If X ~ Gamma(α, rate β) then
//! 1/X ~ InvGamma(α, scale β).

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::special::{inc_gamma_unchecked, ln_gamma_unchecked};

fn require_positive(func: &'static str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            func,
            detail: format!("{name} must be finite and > 0, got {v}"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaLaw {
    shape: f64,
    rate: f64,
}

impl GammaLaw {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        require_positive("GammaLaw::new", "shape", shape)?;
        require_positive("GammaLaw::new", "rate", rate)?;
        Ok(Self { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    /// a·ln b − ln Γ(a) + (a−1)·ln x − b·x
    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        require_positive("gamma_logpdf", "x", x)?;
        Ok(self.ln_pdf_unchecked(x))
    }

    pub(crate) fn ln_pdf_unchecked(&self, x: f64) -> f64 {
        let (a, b) = (self.shape, self.rate);
        a * b.ln() - ln_gamma_unchecked(a) + (a - 1.0) * x.ln() - b * x
    }

    /// P(a, b·x).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::Domain {
                func: "gamma_cdf",
                detail: format!("x must be >= 0, got {x}"),
            });
        }
        Ok(inc_gamma_unchecked(self.shape, self.rate * x).0)
    }

    /// One draw by the Marsaglia–Tsang squeeze; shapes below one are boosted
    /// to `a + 1` and scaled by `U^(1/a)`.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        standard_gamma(self.shape, rng) / self.rate
    }

    pub fn sample(&self, seed: Seed, count: usize) -> Vec<f64> {
        let mut rng = seed.rng();
        (0..count).map(|_| self.sample_one(&mut rng)).collect()
    }
}

fn standard_gamma<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a < 1.0 {
        let u: f64 = open_unit(rng);
        return standard_gamma(a + 1.0, rng) * u.powf(1.0 / a);
    }
    let d = a - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Uniform on (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaLaw {
    shape: f64,
    scale: f64,
}

impl InvGammaLaw {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        require_positive("InvGammaLaw::new", "shape", shape)?;
        require_positive("InvGammaLaw::new", "scale", scale)?;
        Ok(Self { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mode(&self) -> f64 {
        self.scale / (self.shape + 1.0)
    }

    /// α·ln β − ln Γ(α) − (α+1)·ln x − β/x
    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        require_positive("invgamma_logpdf", "x", x)?;
        Ok(self.ln_pdf_unchecked(x))
    }

    pub(crate) fn ln_pdf_unchecked(&self, x: f64) -> f64 {
        let (a, b) = (self.shape, self.scale);
        a * b.ln() - ln_gamma_unchecked(a) - (a + 1.0) * x.ln() - b / x
    }

    /// Q(α, β/x).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::Domain {
                func: "invgamma_cdf",
                detail: format!("x must be >= 0, got {x}"),
            });
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok(inc_gamma_unchecked(self.shape, self.scale / x).1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponential {
    rate: f64,
}

impl Exponential {
    pub fn new(rate: f64) -> Result<Self> {
        require_positive("Exponential::new", "rate", rate)?;
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        require_positive("exponential_logpdf", "x", x)?;
        Ok(self.rate.ln() - self.rate * x)
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.rate
    }
}

/// Two-dimensional normal law with a symmetric positive-definite covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateNormal {
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
    chol: [f64; 3],
}

impl BivariateNormal {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let chol = cholesky(&cov).ok_or(Error::NotPositiveDefinite)?;
        if !mean.iter().all(|m| m.is_finite()) {
            return Err(Error::Domain {
                func: "BivariateNormal::new",
                detail: "mean must be finite".into(),
            });
        }
        Ok(Self { mean, cov, chol })
    }

    /// Zero mean, unit variances, correlation `sigma12`.
    pub fn standard_correlated(sigma12: f64) -> Result<Self> {
        Self::new([0.0, 0.0], [[1.0, sigma12], [sigma12, 1.0]])
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn cov(&self) -> [[f64; 2]; 2] {
        self.cov
    }

    /// Precision matrix Σ⁻¹.
    pub fn precision(&self) -> [[f64; 2]; 2] {
        let [[a, b], [_, d]] = self.cov;
        let det = a * d - b * b;
        [[d / det, -b / det], [-b / det, a / det]]
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let [l11, l21, l22] = self.chol;
        [self.mean[0] + l11 * z1, self.mean[1] + l21 * z1 + l22 * z2]
    }

    pub fn sample(&self, seed: Seed, count: usize) -> Vec<[f64; 2]> {
        let mut rng = seed.rng();
        (0..count).map(|_| self.sample_one(&mut rng)).collect()
    }
}

/// Lower Cholesky factor `[l11, l21, l22]`, or `None` if not SPD.
fn cholesky(cov: &[[f64; 2]; 2]) -> Option<[f64; 3]> {
    let [[a, b], [c, d]] = *cov;
    if ![a, b, c, d].iter().all(|v| v.is_finite()) {
        return None;
    }
    if (b - c).abs() > 1e-12 * (a.abs() + d.abs()) {
        return None;
    }
    if a <= 0.0 {
        return None;
    }
    let l11 = a.sqrt();
    let l21 = b / l11;
    let rem = d - l21 * l21;
    if rem <= 0.0 {
        return None;
    }
    Some([l11, l21, rem.sqrt()])
}
