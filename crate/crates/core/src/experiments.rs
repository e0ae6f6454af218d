//! Replicated staffing experiments: consistency of the chosen server count,
//! decay of spurious feasibility, and the mis-staffing rate.
//!
//! Every `(n, replication)` cell is a pure function of a seed derived from the
//! base seed, `n` and the replication index. Cells run on the current rayon
//! pool and results are merged in `(n, rep)` order, so output never depends on
//! scheduling.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::InvGammaLaw;
use crate::error::{Error, Result};
use crate::gaussian::{GridSpec, RegionMethod};
use crate::mcmc::{run_chain, McmcConfig};
use crate::queue::{simulate_dataset, SuffStats, TrueParams};
use crate::rng::Seed;
use crate::staffing::{
    constraint_probability_gamma, constraint_probability_point, deterministic_optimum, solve_with_chain,
    solve_with_posterior, StaffingSpec,
};
use crate::vb::{fit_vb, PriorSpec, ProductGammaPosterior, VbOptions};

pub const DESK_REPLICATIONS: usize = 50;
pub const FULL_REPLICATIONS: usize = 250;
pub const DEFAULT_N_GRID: [usize; 5] = [125, 250, 500, 1000, 2000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    /// 50 replications per sample size.
    #[serde(rename = "desk")]
    Desk,
    /// 250 replications per sample size; selected as `paper` on the command line.
    #[serde(rename = "paper")]
    Full,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Full),
            other => Err(Error::Config(format!("unknown profile `{other}` (expected desk or paper)"))),
        }
    }
}

/// Flat experiment configuration. Every key is optional in TOML and falls
/// back to the desk profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lambda0: f64,
    pub mu0: f64,
    pub prior_lambda_shape: f64,
    pub prior_lambda_scale: f64,
    pub prior_mu_shape: f64,
    pub prior_mu_scale: f64,
    /// Largest acceptable fraction of delayed customers.
    pub alpha: f64,
    pub beta: f64,
    pub c_max: u32,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub vb_grad_tol: f64,
    pub vb_max_iter: usize,
    /// MCMC iterations including burn-in.
    pub mcmc_total_samples: usize,
    pub mcmc_burn_in: usize,
    /// Random-walk step in log space is `mcmc_proposal_scale / √n`.
    pub mcmc_proposal_scale: f64,
    pub region_sigma: f64,
    pub region_beta: f64,
    pub region_threshold: f64,
    pub region_method: RegionMethodName,
    pub region_samples: usize,
    pub region_burn_in: usize,
    pub region_step: f64,
    pub region_x_min: f64,
    pub region_x_max: f64,
    pub region_y_min: f64,
    pub region_y_max: f64,
    pub region_resolution: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionMethodName {
    Exact,
    Mc,
    Mcmc,
    Vb,
}

impl FromStr for RegionMethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "mc" => Ok(Self::Mc),
            "mcmc" => Ok(Self::Mcmc),
            "vb" => Ok(Self::Vb),
            other => Err(Error::Config(format!(
                "unknown region method `{other}` (expected exact, mc, mcmc or vb)"
            ))),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::profile(Profile::Desk)
    }
}

impl ExperimentConfig {
    pub fn profile(profile: Profile) -> Self {
        let replications = match profile {
            Profile::Desk => DESK_REPLICATIONS,
            Profile::Full => FULL_REPLICATIONS,
        };
        Self {
            lambda0: 16.0,
            mu0: 1.0,
            prior_lambda_shape: 1.0,
            prior_lambda_scale: 1.0,
            prior_mu_shape: 1.0,
            prior_mu_scale: 1.0,
            alpha: 0.5,
            beta: 0.7,
            c_max: crate::staffing::DEFAULT_C_MAX,
            n_grid: DEFAULT_N_GRID.to_vec(),
            replications,
            base_seed: 20_240_601,
            vb_grad_tol: 1e-8,
            vb_max_iter: 500,
            mcmc_total_samples: 1000,
            mcmc_burn_in: 200,
            mcmc_proposal_scale: 1.7,
            region_sigma: -0.1,
            region_beta: 0.9,
            region_threshold: 1.0,
            region_method: RegionMethodName::Mc,
            region_samples: 5000,
            region_burn_in: 3000,
            region_step: 1.0,
            region_x_min: -10.0,
            region_x_max: 10.0,
            region_y_min: -10.0,
            region_y_max: 10.0,
            region_resolution: 201,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Self::from_toml_with_base(s, &Self::default())
    }

    /// Keys present in `s` override the matching fields of `base`.
    pub fn from_toml_with_base(s: &str, base: &Self) -> Result<Self> {
        let overrides: toml::Table = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
        merged.extend(overrides);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.true_params()?;
        self.prior()?;
        self.spec()?;
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid must not be empty".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::Config("every n in n_grid must be >= 2".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if !(self.vb_grad_tol.is_finite() && self.vb_grad_tol > 0.0) || self.vb_max_iter == 0 {
            return Err(Error::Config("vb_grad_tol must be > 0 and vb_max_iter >= 1".into()));
        }
        if !(self.mcmc_proposal_scale.is_finite() && self.mcmc_proposal_scale > 0.0) {
            return Err(Error::Config("mcmc_proposal_scale must be > 0".into()));
        }
        McmcConfig::new(self.mcmc_total_samples, self.mcmc_burn_in, 1.0, Seed(0))?;
        if !(self.region_beta > 0.0 && self.region_beta < 1.0) {
            return Err(Error::Config("region_beta must lie in (0, 1)".into()));
        }
        if !(self.region_sigma.abs() < 1.0) || !self.region_threshold.is_finite() {
            return Err(Error::Config("region_sigma must lie in (-1, 1) and region_threshold be finite".into()));
        }
        if self.region_samples == 0 || !(self.region_step.is_finite() && self.region_step > 0.0) {
            return Err(Error::Config("region_samples must be >= 1 and region_step > 0".into()));
        }
        self.region_grid().validate()
    }

    pub fn true_params(&self) -> Result<TrueParams> {
        TrueParams::new(self.lambda0, self.mu0)
    }

    pub fn prior(&self) -> Result<PriorSpec> {
        Ok(PriorSpec {
            prior_lambda: InvGammaLaw::new(self.prior_lambda_shape, self.prior_lambda_scale)?,
            prior_mu: InvGammaLaw::new(self.prior_mu_shape, self.prior_mu_scale)?,
        })
    }

    pub fn spec(&self) -> Result<StaffingSpec> {
        StaffingSpec::new(self.alpha, self.beta, self.c_max)
    }

    pub fn vb_options(&self) -> VbOptions {
        VbOptions {
            grad_tol: self.vb_grad_tol,
            max_iter: self.vb_max_iter,
            multi_start: true,
        }
    }

    pub fn mcmc_config(&self, n: usize, seed: Seed) -> Result<McmcConfig> {
        McmcConfig::new(
            self.mcmc_total_samples,
            self.mcmc_burn_in,
            self.mcmc_proposal_scale / (n as f64).sqrt(),
            seed,
        )
    }

    pub fn region_grid(&self) -> GridSpec {
        GridSpec {
            x1_min: self.region_x_min,
            x1_max: self.region_x_max,
            x2_min: self.region_y_min,
            x2_max: self.region_y_max,
            resolution: self.region_resolution,
        }
    }

    pub fn region_method(&self) -> RegionMethod {
        match self.region_method {
            RegionMethodName::Exact => RegionMethod::Exact,
            RegionMethodName::Vb => RegionMethod::MeanField,
            RegionMethodName::Mc => RegionMethod::MonteCarlo {
                samples: self.region_samples,
            },
            RegionMethodName::Mcmc => RegionMethod::Metropolis {
                samples: self.region_samples,
                burn_in: self.region_burn_in,
                step: self.region_step,
            },
        }
    }

    pub fn base_seed(&self) -> Seed {
        Seed(self.base_seed)
    }
}

/// Seed of the `(n, rep)` cell.
pub fn derive_seed(base: Seed, n: usize, rep: usize) -> Seed {
    base.derive(&[n as u64, rep as u64])
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Config("threads must be >= 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vb,
    Mcmc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vb => "vb",
            Method::Mcmc => "mcmc",
        }
    }
}

/// Outcome of one `(n, rep)` cell. Failures keep their message.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub n: usize,
    pub rep: usize,
    pub seed: Seed,
    pub vb: std::result::Result<u32, String>,
    pub mcmc: Option<std::result::Result<u32, String>>,
}

/// Simulated data and the VB fit of one cell. A fit that stops short of the
/// gradient tolerance is a failure.
pub fn fit_cell(
    config: &ExperimentConfig,
    n: usize,
    rep: usize,
) -> Result<(SuffStats, std::result::Result<ProductGammaPosterior, String>)> {
    let seed = derive_seed(config.base_seed(), n, rep);
    let data = simulate_dataset(config.true_params()?, n, seed)?;
    let stats = data.suff_stats();
    let fit = match fit_vb(&stats, &config.prior()?, &config.vb_options()) {
        Ok((q, report)) if report.converged => Ok(q),
        Ok((_, report)) => Err(format!(
            "VB did not converge: gradient norm {:e} after {} iterations",
            report.gradient_norm, report.iterations
        )),
        Err(e) => Err(e.to_string()),
    };
    Ok((stats, fit))
}

fn staffing_cell(config: &ExperimentConfig, n: usize, rep: usize, with_mcmc: bool) -> Result<CellOutcome> {
    let spec = config.spec()?;
    let seed = derive_seed(config.base_seed(), n, rep);
    let (stats, fit) = fit_cell(config, n, rep)?;
    let vb = fit.and_then(|q| solve_with_posterior(&q, &spec).map(|s| s.c_star).map_err(|e| e.to_string()));
    let mcmc = if with_mcmc {
        let mc = config.mcmc_config(n, seed.derive(&[1]))?;
        Some(
            run_chain(&stats, &config.prior()?, &mc)
                .and_then(|chain| solve_with_chain(&chain, &spec))
                .map(|s| s.c_star)
                .map_err(|e| e.to_string()),
        )
    } else {
        None
    };
    Ok(CellOutcome {
        n,
        rep,
        seed,
        vb,
        mcmc,
    })
}

fn run_cells<T: Send>(
    config: &ExperimentConfig,
    cell: impl Fn(usize, usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    config.validate()?;
    let keys: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |rep| (n, rep)))
        .collect();
    keys.into_par_iter().map(|(n, rep)| cell(n, rep)).collect()
}

/// Nearest-rank quantile for an integer percentage. `sorted` must be
/// non-empty and ascending.
pub fn nearest_rank(sorted: &[u32], percent: u32) -> u32 {
    let m = sorted.len();
    let rank = (percent as usize * m).div_ceil(100).max(1);
    sorted[rank.min(m) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub n: usize,
    pub method: Method,
    pub q05: Option<u32>,
    pub q50: Option<u32>,
    pub q95: Option<u32>,
    pub used: usize,
    pub excluded: usize,
}

impl QuantileRow {
    fn from_outcomes(n: usize, method: Method, outcomes: &[&std::result::Result<u32, String>]) -> Self {
        let mut values: Vec<u32> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
        values.sort_unstable();
        let q = |p| (!values.is_empty()).then(|| nearest_rank(&values, p));
        Self {
            n,
            method,
            q05: q(5),
            q50: q(50),
            q95: q(95),
            used: values.len(),
            excluded: outcomes.len() - values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    pub rows: Vec<QuantileRow>,
    pub cells: Vec<CellOutcome>,
}

impl QuantileTable {
    pub fn row(&self, n: usize, method: Method) -> Option<&QuantileRow> {
        self.rows.iter().find(|r| r.n == n && r.method == method)
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, usize, Method, &str)> {
        self.cells.iter().flat_map(|c| {
            let vb = c.vb.as_ref().err().map(|e| (c.n, c.rep, Method::Vb, e.as_str()));
            let mc = c
                .mcmc
                .as_ref()
                .and_then(|m| m.as_ref().err())
                .map(|e| (c.n, c.rep, Method::Mcmc, e.as_str()));
            vb.into_iter().chain(mc)
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["n", "method", "q05", "q50", "q95", "used", "excluded"])?;
        let opt = |v: Option<u32>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            wtr.write_record([
                r.n.to_string(),
                r.method.as_str().to_string(),
                opt(r.q05),
                opt(r.q50),
                opt(r.q95),
                r.used.to_string(),
                r.excluded.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Staffing quantiles of the VB and (optionally) MCMC solutions over
/// replications, per sample size.
pub fn run_consistency(config: &ExperimentConfig, with_mcmc: bool) -> Result<QuantileTable> {
    let cells = run_cells(config, |n, rep| staffing_cell(config, n, rep, with_mcmc))?;
    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let at_n: Vec<&CellOutcome> = cells.iter().filter(|c| c.n == n).collect();
        let vb: Vec<_> = at_n.iter().map(|c| &c.vb).collect();
        rows.push(QuantileRow::from_outcomes(n, Method::Vb, &vb));
        if with_mcmc {
            let mc: Vec<_> = at_n.iter().filter_map(|c| c.mcmc.as_ref()).collect();
            rows.push(QuantileRow::from_outcomes(n, Method::Mcmc, &mc));
        }
    }
    Ok(QuantileTable { rows, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub n: usize,
    pub c_probe: u32,
    pub included: usize,
    pub used: usize,
    pub excluded: usize,
    pub frequency: f64,
    /// Binomial standard error of `frequency`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityTable {
    pub rows: Vec<FeasibilityRow>,
}

impl FeasibilityTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["n", "c_probe", "included", "used", "excluded", "frequency", "std_error"])?;
        for r in &self.rows {
            wtr.write_record([
                r.n.to_string(),
                r.c_probe.to_string(),
                r.included.to_string(),
                r.used.to_string(),
                r.excluded.to_string(),
                r.frequency.to_string(),
                r.std_error.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn frequency(hits: usize, used: usize) -> (f64, f64) {
    if used == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / used as f64;
    (p, (p * (1.0 - p) / used as f64).sqrt())
}

/// Fraction of replications whose VB-approximate feasible set contains the
/// truly infeasible `c_probe`.
pub fn run_feasibility_decay(config: &ExperimentConfig, c_probe: u32) -> Result<FeasibilityTable> {
    config.validate()?;
    if c_probe == 0 {
        return Err(Error::Config("c_probe must be >= 1".into()));
    }
    if constraint_probability_point(config.true_params()?, c_probe, config.alpha)? > 0.0 {
        return Err(Error::Config(format!(
            "c_probe = {c_probe} is feasible at the true rates; the probe must be infeasible"
        )));
    }
    let spec = config.spec()?;
    let cells = run_cells(config, |n, rep| -> Result<(usize, Option<bool>)> {
        let (_, fit) = fit_cell(config, n, rep)?;
        let included = match fit {
            Ok(q) => Some(constraint_probability_gamma(&q, c_probe, spec.alpha)? >= spec.beta),
            Err(_) => None,
        };
        Ok((n, included))
    })?;
    let rows = config
        .n_grid
        .iter()
        .map(|&n| {
            let at_n: Vec<Option<bool>> = cells.iter().filter(|c| c.0 == n).map(|c| c.1).collect();
            let used = at_n.iter().flatten().count();
            let included = at_n.iter().flatten().filter(|b| **b).count();
            let (frequency, std_error) = frequency(included, used);
            FeasibilityRow {
                n,
                c_probe,
                included,
                used,
                excluded: at_n.len() - used,
                frequency,
                std_error,
            }
        })
        .collect();
    Ok(FeasibilityTable { rows })
}

/// ε_n² = ln n / n.
pub fn epsilon_sq(n: usize) -> f64 {
    let nf = n as f64;
    nf.ln() / nf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub misstaffed: usize,
    pub used: usize,
    pub excluded: usize,
    pub frequency: f64,
    pub std_error: f64,
    pub epsilon_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub c_star: u32,
    pub rows: Vec<RateRow>,
    /// max over n of frequency / ε_n².
    pub m_hat: f64,
}

impl RateTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "n",
            "c_star",
            "misstaffed",
            "used",
            "excluded",
            "frequency",
            "std_error",
            "epsilon_sq",
            "m_hat",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.n.to_string(),
                self.c_star.to_string(),
                r.misstaffed.to_string(),
                r.used.to_string(),
                r.excluded.to_string(),
                r.frequency.to_string(),
                r.std_error.to_string(),
                r.epsilon_sq.to_string(),
                self.m_hat.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Frequency of `C*_VB ≠ C*` per sample size next to ε_n².
pub fn run_rate_check(config: &ExperimentConfig) -> Result<RateTable> {
    config.validate()?;
    let c_star = deterministic_optimum(config.true_params()?, config.alpha, config.c_max)?;
    let cells = run_cells(config, |n, rep| staffing_cell(config, n, rep, false))?;
    let rows: Vec<RateRow> = config
        .n_grid
        .iter()
        .map(|&n| {
            let at_n: Vec<&CellOutcome> = cells.iter().filter(|c| c.n == n).collect();
            let ok: Vec<u32> = at_n.iter().filter_map(|c| c.vb.as_ref().ok().copied()).collect();
            let misstaffed = ok.iter().filter(|&&c| c != c_star).count();
            let (frequency, std_error) = frequency(misstaffed, ok.len());
            RateRow {
                n,
                misstaffed,
                used: ok.len(),
                excluded: at_n.len() - ok.len(),
                frequency,
                std_error,
                epsilon_sq: epsilon_sq(n),
            }
        })
        .collect();
    let m_hat = rows
        .iter()
        .filter(|r| r.frequency.is_finite())
        .map(|r| r.frequency / r.epsilon_sq)
        .fold(0.0, f64::max);
    Ok(RateTable { c_star, rows, m_hat })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Consistency,
    Feasibility,
    Rate,
    Region,
}

impl Command {
    pub fn output_file(self) -> &'static str {
        match self {
            Command::Consistency => "consistency.csv",
            Command::Feasibility => "feasibility.csv",
            Command::Rate => "rate.csv",
            Command::Region => "region.csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSeed {
    pub n: usize,
    pub rep: usize,
    pub seed: Seed,
}

/// Everything needed to rerun one experiment: the resolved configuration,
/// command options and the derived per-cell seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    #[serde(default)]
    pub with_mcmc: bool,
    #[serde(default)]
    pub c_probe: Option<u32>,
    pub output: String,
    pub config: ExperimentConfig,
    #[serde(default)]
    pub cell_seeds: Vec<CellSeed>,
}

impl RunManifest {
    pub fn new(command: Command, config: ExperimentConfig) -> Self {
        let cell_seeds = match command {
            Command::Region => vec![],
            _ => config
                .n_grid
                .iter()
                .flat_map(|&n| {
                    (0..config.replications).map(move |rep| CellSeed {
                        n,
                        rep,
                        seed: derive_seed(Seed(config.base_seed), n, rep),
                    })
                })
                .collect(),
        };
        Self {
            tool: "ccopt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            with_mcmc: false,
            c_probe: None,
            output: command.output_file().into(),
            config,
            cell_seeds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest always serializes") + "\n"
    }

    /// Parses and checks a manifest: the config must validate and the
    /// recorded cell seeds must match the ones derived from the config.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.config.validate()?;
        let expected = RunManifest::new(m.command, m.config.clone()).cell_seeds;
        if !m.cell_seeds.is_empty() && m.cell_seeds != expected {
            return Err(Error::Config(
                "manifest cell seeds do not match the seeds derived from its config".into(),
            ));
        }
        if m.command == Command::Feasibility && m.c_probe.is_none() {
            return Err(Error::Config("feasibility manifest needs c_probe".into()));
        }
        Ok(m)
    }
}
