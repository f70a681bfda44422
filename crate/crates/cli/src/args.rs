use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use stgp_core::model::Mode;
use stgp_core::simdata::Shape;

use crate::config::{parse_knots, Command, CovarianceKind, Fault, Manifest, RunConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "stgp",
    version,
    about = "Soft-thresholded GP scalar-on-image regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Simulate replicate datasets from a benchmark scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Fit the model to one or more datasets.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Score fitted summaries against the true coefficients.
    Summarize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Fit directories or summary.csv files.
        #[arg(long, num_args = 1..)]
        fits: Vec<PathBuf>,
        #[arg(long = "gp-fits", num_args = 1..)]
        gp_fits: Vec<PathBuf>,
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Stratified k-fold cross-validated ROC/AUC (probit).
    Crossval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Run the property suite.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Full-size checks instead of the quick gate.
        #[arg(long)]
        full: bool,
        #[arg(long = "inject-fault", value_enum)]
        inject_fault: Option<FaultArg>,
    },
    /// Re-run the command recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FaultArg {
    None,
    Variance,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Knot array, e.g. `15x15` or `5x5x64`.
    #[arg(long, value_parser = parse_knots)]
    pub knots: Option<Vec<usize>>,
    #[arg(long = "sigma-h")]
    pub sigma_h: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long = "lambda-fixed")]
    pub lambda_fixed: Option<f64>,
    /// Pin λ = 0 (plain GP prior).
    #[arg(long)]
    pub gp: bool,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long, num_args = 1..)]
    pub dataset: Vec<PathBuf>,
    #[arg(long)]
    pub locations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub shape: Option<Shape>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub covariance: Option<CovArg>,
    #[arg(long = "theta-x")]
    pub theta_x: Option<f64>,
    #[arg(long)]
    pub upsilon: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum CovArg {
    Exp,
    Shared,
}

fn base_config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn apply_common(c: &mut RunConfig, a: &Common) {
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src.clone() {
                $dst = v;
            }
        };
    }
    set!(c.run.seed, a.seed);
    set!(c.run.out, a.out);
    set!(c.model.mode, a.mode);
    set!(c.model.knots, a.knots);
    set!(c.mcmc.iterations, a.iters);
    set!(c.mcmc.burn_in, a.burnin);
    set!(c.mcmc.thin, a.thin);
    if a.sigma_h.is_some() {
        c.model.sigma_h = a.sigma_h;
    }
    if a.lambda_fixed.is_some() {
        c.model.lambda_fixed = a.lambda_fixed;
        c.model.gp = false;
    }
    if a.gp {
        c.model.gp = true;
    }
    if a.workers.is_some() {
        c.run.workers = a.workers;
    }
}

fn apply_data(c: &mut RunConfig, d: &DataArgs) {
    if !d.dataset.is_empty() {
        c.data.datasets = d.dataset.clone();
    }
    if d.locations.is_some() {
        c.data.locations = d.locations.clone();
    }
}

/// Merges config file and flags (flags win) into the effective config.
pub fn effective_config(cli: Cli) -> Result<RunConfig> {
    let (mut c, command) = match cli.command {
        Sub::Simulate { common, sim } => {
            let mut c = base_config(&common)?;
            apply_common(&mut c, &common);
            let s = &mut c.simulate;
            if let Some(v) = sim.shape {
                s.shape = v;
            }
            if let Some(v) = sim.covariance {
                s.covariance = match v {
                    CovArg::Exp => CovarianceKind::Exp,
                    CovArg::Shared => CovarianceKind::Shared,
                };
            }
            for (dst, src) in [
                (&mut s.m, sim.m),
                (&mut s.n, sim.n),
                (&mut s.replicates, sim.replicates),
            ] {
                if let Some(v) = src {
                    *dst = v;
                }
            }
            for (dst, src) in [
                (&mut s.theta_x, sim.theta_x),
                (&mut s.upsilon, sim.upsilon),
                (&mut s.sigma, sim.sigma),
            ] {
                if let Some(v) = src {
                    *dst = v;
                }
            }
            (c, Command::Simulate)
        }
        Sub::Fit { common, data } => {
            let mut c = base_config(&common)?;
            apply_common(&mut c, &common);
            apply_data(&mut c, &data);
            (c, Command::Fit)
        }
        Sub::Summarize {
            common,
            truth,
            fits,
            gp_fits,
            cutoff,
        } => {
            let mut c = base_config(&common)?;
            apply_common(&mut c, &common);
            if truth.is_some() {
                c.data.truth = truth;
            }
            if !fits.is_empty() {
                c.data.fits = fits;
            }
            if !gp_fits.is_empty() {
                c.data.gp_fits = gp_fits;
            }
            if let Some(v) = cutoff {
                c.summarize.cutoff = v;
            }
            (c, Command::Summarize)
        }
        Sub::Crossval {
            common,
            data,
            folds,
        } => {
            let mut c = base_config(&common)?;
            apply_common(&mut c, &common);
            apply_data(&mut c, &data);
            if let Some(v) = folds {
                c.crossval.folds = v;
            }
            (c, Command::Crossval)
        }
        Sub::Validate {
            common,
            full,
            inject_fault,
        } => {
            let mut c = base_config(&common)?;
            apply_common(&mut c, &common);
            c.validate.full |= full;
            if let Some(f) = inject_fault {
                c.validate.inject_fault = match f {
                    FaultArg::None => Fault::None,
                    FaultArg::Variance => Fault::Variance,
                };
            }
            (c, Command::Validate)
        }
        Sub::Rerun { manifest, out } => {
            let mut c = RunConfig::load(&manifest)?;
            let command = c.run.command.ok_or_else(|| {
                CliError::Usage(format!("{} records no command", manifest.display()))
            })?;
            if let Some(o) = out {
                c.run.out = o;
            }
            (c, command)
        }
    };
    c.run.command = Some(command);
    c.resolve()
}

/// Parses arguments and runs the command. Clap usage errors come back as
/// [`CliError::Usage`]; `--help`/`--version` print and return `Ok(None)`.
pub fn run_from<I, T>(args: I) -> Result<Option<Manifest>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(None);
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let cfg = effective_config(cli)?;
    crate::commands::dispatch(cfg).map(Some)
}
