//! Feasible regions of the linear Gaussian chance constraint
//! `P(ξᵀx ≤ t) ≥ β`, ξ ~ N(m, Σ), under the exact law, an empirical
//! (sample-average) law, and the mean-field Gaussian approximation.
//!
//! For β > ½ the exact region `mᵀx + Φ⁻¹(β)·‖Σ^{1/2}x‖ ≤ t` is a second-order
//! cone slice and hence convex. The sample-average region is a union of
//! polyhedra and need not be.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::BivariateNormal;
use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::special::std_normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCC {
    pub law: BivariateNormal,
    pub threshold: f64,
    pub beta: f64,
    z_beta: f64,
}

impl LinearCC {
    pub fn new(law: BivariateNormal, threshold: f64, beta: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::Config(format!("threshold must be finite, got {threshold}")));
        }
        let z_beta = std_normal_quantile(beta)?;
        Ok(Self {
            law,
            threshold,
            beta,
            z_beta,
        })
    }

    /// Zero-mean, unit-variance law with correlation `sigma12` and threshold 1.
    pub fn example(sigma12: f64, beta: f64) -> Result<Self> {
        Self::new(BivariateNormal::standard_correlated(sigma12)?, 1.0, beta)
    }

    pub fn with_law(&self, law: BivariateNormal) -> Self {
        Self { law, ..*self }
    }
}

/// mᵀx + Φ⁻¹(β)·√(xᵀΣx) ≤ t
pub fn exact_membership(cc: &LinearCC, x: [f64; 2]) -> bool {
    let m = cc.law.mean();
    let [[s11, s12], [s21, s22]] = cc.law.cov();
    let quad = x[0] * (s11 * x[0] + s12 * x[1]) + x[1] * (s21 * x[0] + s22 * x[1]);
    m[0] * x[0] + m[1] * x[1] + cc.z_beta * quad.max(0.0).sqrt() <= cc.threshold
}

/// Empirical fraction of samples with ξᵀx ≤ t is at least β.
pub fn mc_membership(samples: &[[f64; 2]], cc: &LinearCC, x: [f64; 2]) -> bool {
    if samples.is_empty() {
        return false;
    }
    let hits = samples
        .iter()
        .filter(|s| s[0] * x[0] + s[1] * x[1] <= cc.threshold)
        .count();
    hits as f64 >= cc.beta * samples.len() as f64
}

/// KL(q‖p)-optimal fully factorized Gaussian: the same mean and variances
/// `1/Λ_ii`, Λ = Σ⁻¹.
pub fn mean_field_approx(law: &BivariateNormal) -> Result<BivariateNormal> {
    let prec = law.precision();
    BivariateNormal::new(law.mean(), [[1.0 / prec[0][0], 0.0], [0.0, 1.0 / prec[1][1]]])
}

/// KL(q‖p) between two bivariate normals.
pub fn kl_gaussian(q: &BivariateNormal, p: &BivariateNormal) -> f64 {
    let lp = p.precision();
    let sq = q.cov();
    let sp = p.cov();
    let trace = lp[0][0] * sq[0][0] + lp[0][1] * sq[1][0] + lp[1][0] * sq[0][1] + lp[1][1] * sq[1][1];
    let d = [p.mean()[0] - q.mean()[0], p.mean()[1] - q.mean()[1]];
    let maha = d[0] * (lp[0][0] * d[0] + lp[0][1] * d[1]) + d[1] * (lp[1][0] * d[0] + lp[1][1] * d[1]);
    let det = |s: [[f64; 2]; 2]| s[0][0] * s[1][1] - s[0][1] * s[1][0];
    0.5 * (trace + maha - 2.0 + (det(sp) / det(sq)).ln())
}

/// Random-walk Metropolis draws from a bivariate normal, started at its mean.
pub fn metropolis_samples(
    law: &BivariateNormal,
    count: usize,
    burn_in: usize,
    step: f64,
    seed: Seed,
) -> Vec<[f64; 2]> {
    let prec = law.precision();
    let mean = law.mean();
    let log_density = |x: &[f64; 2]| {
        let d = [x[0] - mean[0], x[1] - mean[1]];
        -0.5 * (d[0] * (prec[0][0] * d[0] + prec[0][1] * d[1]) + d[1] * (prec[1][0] * d[0] + prec[1][1] * d[1]))
    };
    let mut rng = seed.rng();
    let mut x = mean;
    let mut lp = log_density(&x);
    let mut out = Vec::with_capacity(count);
    for i in 0..burn_in + count {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let prop = [x[0] + step * z0, x[1] + step * z1];
        let lq = log_density(&prop);
        let u: f64 = rng.random();
        if u.ln() < lq - lp {
            x = prop;
            lp = lq;
        }
        if i >= burn_in {
            out.push(x);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x1_min: -10.0,
            x1_max: 10.0,
            x2_min: -10.0,
            x2_max: 10.0,
            resolution: 201,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::Config(format!(
                "grid resolution must be >= 2, got {}",
                self.resolution
            )));
        }
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.x1_min, self.x1_max) || !ok(self.x2_min, self.x2_max) {
            return Err(Error::Config("grid bounds must be finite with min < max".into()));
        }
        Ok(())
    }

    pub fn x1(&self, i: usize) -> f64 {
        coord(self.x1_min, self.x1_max, i, self.resolution)
    }

    pub fn x2(&self, j: usize) -> f64 {
        coord(self.x2_min, self.x2_max, j, self.resolution)
    }
}

fn coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionMethod {
    Exact,
    /// Sample average over exact Gaussian draws.
    MonteCarlo { samples: usize },
    /// Sample average over a random-walk Metropolis chain.
    Metropolis { samples: usize, burn_in: usize, step: f64 },
    /// Exact membership under the mean-field approximation.
    MeanField,
}

/// Membership flags in row-major order: row `j` is `x2 = grid.x2(j)`, column
/// `i` is `x1 = grid.x1(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub grid: GridSpec,
    pub flags: Vec<bool>,
}

impl RegionGrid {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.flags[j * self.grid.resolution + i]
    }

    pub fn feasible_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["x1", "x2", "feasible"])?;
        let n = self.grid.resolution;
        for j in 0..n {
            for i in 0..n {
                wtr.write_record([
                    self.grid.x1(i).to_string(),
                    self.grid.x2(j).to_string(),
                    u8::from(self.get(i, j)).to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn emit_region_grid(cc: &LinearCC, method: RegionMethod, grid: &GridSpec, seed: Seed) -> Result<RegionGrid> {
    grid.validate()?;
    let n = grid.resolution;
    let points = (0..n).flat_map(|j| (0..n).map(move |i| [grid.x1(i), grid.x2(j)]));
    let flags: Vec<bool> = match method {
        RegionMethod::Exact => points.map(|x| exact_membership(cc, x)).collect(),
        RegionMethod::MeanField => {
            let vb = cc.with_law(mean_field_approx(&cc.law)?);
            points.map(|x| exact_membership(&vb, x)).collect()
        }
        RegionMethod::MonteCarlo { samples } => {
            require_samples(samples)?;
            let draws = cc.law.sample(seed, samples);
            points.map(|x| mc_membership(&draws, cc, x)).collect()
        }
        RegionMethod::Metropolis { samples, burn_in, step } => {
            require_samples(samples)?;
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::Config(format!("metropolis step must be > 0, got {step}")));
            }
            let draws = metropolis_samples(&cc.law, samples, burn_in, step, seed);
            points.map(|x| mc_membership(&draws, cc, x)).collect()
        }
    };
    Ok(RegionGrid { grid: *grid, flags })
}

fn require_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    Ok(())
}

/// Two feasible cells whose midpoint cell is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvexityWitness {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub midpoint: (usize, usize),
}

/// Exhaustive midpoint scan along rows, columns and both diagonals.
pub fn find_nonconvexity(region: &RegionGrid) -> Option<ConvexityWitness> {
    let n = region.grid.resolution as isize;
    let dirs: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
    for (di, dj) in dirs {
        // Every line in direction (di, dj) starts at a cell whose predecessor
        // lies outside the grid.
        for si in 0..n {
            for sj in 0..n {
                let (pi, pj) = (si - di, sj - dj);
                if pi >= 0 && pi < n && pj >= 0 && pj < n {
                    continue;
                }
                let line: Vec<(usize, usize)> = (0..)
                    .map(|k| (si + k * di, sj + k * dj))
                    .take_while(|&(i, j)| i >= 0 && i < n && j >= 0 && j < n)
                    .map(|(i, j)| (i as usize, j as usize))
                    .collect();
                if let Some(w) = scan_line(region, &line) {
                    return Some(w);
                }
            }
        }
    }
    None
}

fn scan_line(region: &RegionGrid, line: &[(usize, usize)]) -> Option<ConvexityWitness> {
    let feasible: Vec<usize> = (0..line.len())
        .filter(|&k| region.get(line[k].0, line[k].1))
        .collect();
    let (first, last) = (*feasible.first()?, *feasible.last()?);
    // A gap between the first and last feasible cell is a witness once paired
    // with feasible cells equidistant from it.
    for gap in first + 1..last {
        let (gi, gj) = line[gap];
        if region.get(gi, gj) {
            continue;
        }
        for &p in feasible.iter().filter(|&&p| p < gap) {
            let q = 2 * gap - p;
            if q < line.len() && region.get(line[q].0, line[q].1) {
                return Some(ConvexityWitness {
                    a: line[p],
                    b: line[q],
                    midpoint: line[gap],
                });
            }
        }
    }
    None
}

/// Draws `pairs` random pairs of feasible cells with a grid midpoint and
/// counts midpoints that are infeasible.
pub fn random_midpoint_violations(region: &RegionGrid, pairs: usize, seed: Seed) -> usize {
    let n = region.grid.resolution;
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .filter(|&(i, j)| region.get(i, j))
        .collect();
    if cells.len() < 2 {
        return 0;
    }
    // Same-parity pairs have their midpoint on the grid.
    let mut classes: [Vec<(usize, usize)>; 4] = Default::default();
    for &(i, j) in &cells {
        classes[(i % 2) * 2 + j % 2].push((i, j));
    }
    let mut rng = seed.rng();
    let mut violations = 0;
    for _ in 0..pairs {
        let a = cells[rng.random_range(0..cells.len())];
        let class = &classes[(a.0 % 2) * 2 + a.1 % 2];
        let b = class[rng.random_range(0..class.len())];
        let mid = ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
        if !region.get(mid.0, mid.1) {
            violations += 1;
        }
    }
    violations
}
