use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use ccopt_core::experiments::{
    run_consistency, run_feasibility_decay, run_rate_check, with_threads, Command, ExperimentConfig, Profile,
    RegionMethodName, RunManifest,
};
use ccopt_core::distributions::BivariateNormal;
use ccopt_core::gaussian::{emit_region_grid, LinearCC};
use ccopt_core::mcmc::run_chain;
use ccopt_core::queue::{simulate_dataset, Dataset};
use ccopt_core::staffing::{deterministic_optimum, solve_with_chain, solve_with_posterior};
use ccopt_core::vb::fit_vb;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ccopt", version, about = "Chance-constrained staffing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quantiles of the chosen server count across replications.
    Consistency {
        #[command(flatten)]
        common: Common,
        /// Skip the MCMC comparison.
        #[arg(long)]
        no_mcmc: bool,
    },
    /// Inclusion frequency of an infeasible server count in the VB feasible set.
    Feasibility {
        #[command(flatten)]
        common: Common,
        /// Server count to probe; defaults to one below the true optimum.
        #[arg(long)]
        c_probe: Option<u32>,
    },
    /// Mis-staffing frequency next to ln(n)/n.
    Rate {
        #[command(flatten)]
        common: Common,
    },
    /// Feasible region grid of the linear Gaussian chance constraint.
    Region {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Fit one simulated (or loaded) dataset and print the VB posterior.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Read durations from a `interarrival,service` CSV instead of simulating.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Also run MCMC and write its chain here.
        #[arg(long)]
        chain_out: Option<PathBuf>,
        /// Write the simulated dataset here.
        #[arg(long)]
        data_out: Option<PathBuf>,
    },
    /// Repeat a recorded run.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Defaults to the manifest's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_parser = ["desk", "paper"])]
    profile: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    /// Confidence level of the Gaussian constraint.
    #[arg(long)]
    region_beta: Option<f64>,
    #[arg(long, value_parser = ["exact", "mc", "mcmc", "vb"])]
    method: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y_max: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let profile = match &self.profile {
            Some(p) => p.parse::<Profile>()?,
            None => Profile::Desk,
        };
        let base = ExperimentConfig::profile(profile);
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_toml_with_base(&text, &base)
                    .with_context(|| format!("invalid config {}", path.display()))?
            }
            None => base,
        };
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RegionArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> anyhow::Result<()> {
        macro_rules! set {
            ($($arg:ident => $field:ident),*) => {
                $(if let Some(v) = self.$arg { cfg.$field = v; })*
            };
        }
        set!(sigma => region_sigma, region_beta => region_beta, samples => region_samples,
             burn_in => region_burn_in, step => region_step, x_min => region_x_min,
             x_max => region_x_max, y_min => region_y_min, y_max => region_y_max,
             resolution => region_resolution);
        if let Some(m) = &self.method {
            cfg.region_method = m.parse::<RegionMethodName>()?;
        }
        cfg.validate()?;
        Ok(())
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn execute(manifest: &RunManifest, out_dir: &Path, threads: Option<usize>) -> anyhow::Result<()> {
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let cfg = &manifest.config;
    let out = out_dir.join(&manifest.output);
    let started = Instant::now();
    match manifest.command {
        Command::Consistency => {
            let table = with_threads(threads, || run_consistency(cfg, manifest.with_mcmc))??;
            for (n, rep, method, msg) in table.failures() {
                eprintln!("excluded n={n} rep={rep} {}: {msg}", method.as_str());
            }
            table.write_csv(create(&out)?)?;
        }
        Command::Feasibility => {
            let c_probe = manifest.c_probe.context("feasibility run needs c_probe")?;
            let table = with_threads(threads, || run_feasibility_decay(cfg, c_probe))??;
            table.write_csv(create(&out)?)?;
        }
        Command::Rate => {
            let table = with_threads(threads, || run_rate_check(cfg))??;
            eprintln!("C* = {}, M_hat = {}", table.c_star, table.m_hat);
            table.write_csv(create(&out)?)?;
        }
        Command::Region => {
            let law = BivariateNormal::standard_correlated(cfg.region_sigma)?;
            let cc = LinearCC::new(law, cfg.region_threshold, cfg.region_beta)?;
            let grid = emit_region_grid(&cc, cfg.region_method(), &cfg.region_grid(), cfg.base_seed())?;
            grid.write_csv(create(&out)?)?;
        }
    }
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, manifest.to_json())
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;
    eprintln!("wrote {} in {:.2?}", out.display(), started.elapsed());
    Ok(())
}

fn fit(common: &Common, n: usize, data: Option<&Path>, chain_out: Option<&Path>, data_out: Option<&Path>) -> anyhow::Result<()> {
    let cfg = common.resolve()?;
    let seed = cfg.base_seed();
    let dataset = match data {
        Some(path) => {
            let f = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
            Dataset::read_csv(f).with_context(|| format!("invalid dataset {}", path.display()))?
        }
        None => simulate_dataset(cfg.true_params()?, n, seed)?,
    };
    if let Some(path) = data_out {
        dataset.write_csv(create(path)?)?;
    }
    let stats = dataset.suff_stats();
    let prior = cfg.prior()?;
    let spec = cfg.spec()?;
    let (q, report) = fit_vb(&stats, &prior, &cfg.vb_options())?;
    println!("n = {}", stats.n);
    println!("seed = {}", seed.0);
    println!("q_lambda: shape = {}, rate = {}", q.q_lambda.shape(), q.q_lambda.rate());
    println!("q_mu: shape = {}, rate = {}", q.q_mu.shape(), q.q_mu.rate());
    println!("elbo = {}", report.value);
    println!(
        "iterations = {}, converged = {}, gradient_norm = {:e}",
        report.iterations, report.converged, report.gradient_norm
    );
    let sol = solve_with_posterior(&q, &spec)?;
    println!(
        "c_star_vb = {} (probability {:.4}, alpha = {}, beta = {})",
        sol.c_star, sol.attained_probability, spec.alpha, spec.beta
    );
    if data.is_none() {
        let c = deterministic_optimum(cfg.true_params()?, spec.alpha, spec.c_max)?;
        println!("c_star_true = {c}");
    }
    if let Some(path) = chain_out {
        let mc = cfg.mcmc_config(stats.n, seed.derive(&[1]))?;
        let chain = run_chain(&stats, &prior, &mc)?;
        let sol = solve_with_chain(&chain, &spec)?;
        println!(
            "c_star_mcmc = {} (acceptance rate {:.3})",
            sol.c_star, chain.acceptance_rate
        );
        chain.write_csv(create(path)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Cmd::Consistency { common, no_mcmc } => {
            let mut m = RunManifest::new(Command::Consistency, common.resolve()?);
            m.with_mcmc = !no_mcmc;
            execute(&m, &common.out_dir, common.threads)
        }
        Cmd::Feasibility { common, c_probe } => {
            let cfg = common.resolve()?;
            let c_probe = match c_probe {
                Some(c) => c,
                None => {
                    let c = deterministic_optimum(cfg.true_params()?, cfg.alpha, cfg.c_max)?;
                    if c < 2 {
                        bail!("optimum is {c}; no smaller server count to probe");
                    }
                    c - 1
                }
            };
            let mut m = RunManifest::new(Command::Feasibility, cfg);
            m.c_probe = Some(c_probe);
            execute(&m, &common.out_dir, common.threads)
        }
        Cmd::Rate { common } => execute(
            &RunManifest::new(Command::Rate, common.resolve()?),
            &common.out_dir,
            common.threads,
        ),
        Cmd::Region { common, region } => {
            let mut cfg = common.resolve()?;
            region.apply(&mut cfg)?;
            execute(&RunManifest::new(Command::Region, cfg), &common.out_dir, common.threads)
        }
        Cmd::Fit {
            common,
            n,
            data,
            chain_out,
            data_out,
        } => fit(&common, n, data.as_deref(), chain_out.as_deref(), data_out.as_deref()),
        Cmd::Rerun {
            manifest,
            out_dir,
            threads,
        } => {
            let text = fs::read_to_string(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let m = RunManifest::from_json_str(&text).with_context(|| format!("invalid manifest {}", manifest.display()))?;
            let dir = match out_dir {
                Some(d) => d,
                None => manifest.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
            };
            execute(&m, &dir, threads)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
