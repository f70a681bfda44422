//! Run configuration: a TOML file with one section per concern, every key
//! overridable by a flag. A manifest is the effective configuration plus
//! `[results]` and `[timing]` tables, so it can be fed back as `--config`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stgp_core::mcmc::{LambdaPrior, McmcConfig};
use stgp_core::model::Mode;
use stgp_core::simdata::{Covariance, Scenario, Shape};

use crate::error::{io_err, CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
/// Manifest tables that are not configuration.
const REPORT_TABLES: [&str; 2] = ["results", "timing"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Fit,
    Summarize,
    Crossval,
    Validate,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Summarize => "summarize",
            Command::Crossval => "crossval",
            Command::Validate => "validate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub command: Option<Command>,
    /// Master seed; copied into `mcmc.seed`.
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            command: None,
            seed: 1,
            out: PathBuf::from("out"),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub datasets: Vec<PathBuf>,
    pub locations: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Fit output directories (or `summary.csv` files) to summarize.
    pub fits: Vec<PathBuf>,
    /// Optional λ = 0 fits scored alongside.
    pub gp_fits: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mode: Mode,
    /// Knot array dims; empty picks half the distinct coordinates per axis.
    pub knots: Vec<usize>,
    pub sigma_h: Option<f64>,
    /// Pin λ = 0 (plain GP prior).
    pub gp: bool,
    pub lambda_fixed: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            mode: Mode::Gaussian,
            knots: Vec::new(),
            sigma_h: None,
            gp: false,
            lambda_fixed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    Exp,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub shape: Shape,
    pub m: usize,
    pub n: usize,
    pub covariance: CovarianceKind,
    pub theta_x: f64,
    pub upsilon: f64,
    pub sigma: f64,
    pub replicates: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            shape: Shape::FivePeaks,
            m: 30,
            n: 100,
            covariance: CovarianceKind::Exp,
            theta_x: 3.0,
            upsilon: 2.0,
            sigma: 5.0,
            replicates: 1,
        }
    }
}

impl SimulateSection {
    pub fn scenario(&self, mode: Mode) -> Scenario {
        Scenario {
            shape: self.shape,
            m: self.m,
            n: self.n,
            covariance: match self.covariance {
                CovarianceKind::Exp => Covariance::Exp {
                    theta_x: self.theta_x,
                },
                CovarianceKind::Shared => Covariance::Shared {
                    upsilon: self.upsilon,
                },
            },
            sigma: self.sigma,
            mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossvalSection {
    pub folds: usize,
}

impl Default for CrossvalSection {
    fn default() -> Self {
        CrossvalSection { folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeSection {
    pub cutoff: f64,
}

impl Default for SummarizeSection {
    fn default() -> Self {
        SummarizeSection {
            cutoff: stgp_core::metrics::DEFAULT_CUTOFF,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fault {
    #[default]
    None,
    /// Divide kernel rows by the variance instead of the standard deviation.
    Variance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    /// Full-size suite instead of the quick gate.
    pub full: bool,
    pub inject_fault: Fault,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub mcmc: McmcConfig,
    pub simulate: SimulateSection,
    pub crossval: CrossvalSection,
    pub summarize: SummarizeSection,
    pub validate: ValidateSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err("read", path))?;
        Self::parse(&text).map_err(|reason| CliError::Parse {
            what: "config",
            path: path.to_path_buf(),
            reason,
        })
    }

    /// Parses a config or manifest; report tables are dropped.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        for t in REPORT_TABLES {
            table.remove(t);
        }
        table.try_into().map_err(|e: toml::de::Error| e.to_string())
    }

    /// Applies the model-level overrides to the chain settings and checks
    /// consistency. Call after all flags are merged.
    pub fn resolve(mut self) -> Result<Self> {
        self.mcmc.seed = self.run.seed;
        self.mcmc.mode = self.model.mode;
        match (self.model.gp, self.model.lambda_fixed) {
            (true, Some(v)) if v != 0.0 => {
                return Err(CliError::Usage(format!(
                    "--gp pins λ = 0 but --lambda-fixed is {v}"
                )));
            }
            (true, _) => self.mcmc.lambda_prior = LambdaPrior::Fixed { value: 0.0 },
            (false, Some(v)) => self.mcmc.lambda_prior = LambdaPrior::Fixed { value: v },
            (false, None) => {}
        }
        if let LambdaPrior::Fixed { value } = self.mcmc.lambda_prior {
            self.model.gp = value == 0.0;
            self.model.lambda_fixed = Some(value);
        }
        if self.run.workers == Some(0) {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        self.mcmc.validate()?;
        Ok(self)
    }

    pub fn mcmc(&self) -> &McmcConfig {
        &self.mcmc
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }
}

/// Effective configuration plus deterministic results and (excluded from
/// reproducibility comparisons) wall-clock timing.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub config: RunConfig,
    pub results: toml::Table,
    pub timing: toml::Table,
}

impl Manifest {
    pub fn new(config: RunConfig) -> Self {
        Manifest {
            config,
            results: toml::Table::new(),
            timing: toml::Table::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(io_err("create directory", dir))?;
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).expect("manifest is serializable");
        std::fs::write(&path, text).map_err(io_err("write", &path))?;
        Ok(path)
    }
}

/// Manifest text with the `[timing]` table removed, for byte comparisons.
pub fn strip_timing(manifest: &str) -> String {
    let mut out = String::new();
    let mut skipping = false;
    for line in manifest.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with('[') {
            skipping = trimmed.starts_with("[timing");
        }
        if !skipping {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Parses `15x15`, `15,15` or `5x5x64`.
pub fn parse_knots(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(['x', ','])
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad knot count `{t}` in `{s}`"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn manifest_reloads_as_config() {
        let mut c = RunConfig::default();
        c.run.command = Some(Command::Fit);
        c.model.knots = vec![5, 5];
        c.mcmc.lambda_prior = LambdaPrior::Uniform {
            lower: 0.5,
            upper: 1.5,
        };
        let mut m = Manifest::new(c.clone());
        m.results.insert("auc".into(), toml::Value::Float(0.75));
        m.timing
            .insert("wall_seconds".into(), toml::Value::Float(1.5));
        let text = toml::to_string(&m).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        assert!(!strip_timing(&text).contains("wall_seconds"));
        assert!(strip_timing(&text).contains("auc"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[model]\nknotz = [3, 3]\n").is_err());
        let c = RunConfig::parse("[mcmc]\niterations = 50\nburn_in = 10\n").unwrap();
        assert_eq!(c.mcmc.iterations, 50);
    }

    #[test]
    fn gp_flag_pins_lambda() {
        let mut c = RunConfig::default();
        c.model.gp = true;
        let r = c.resolve().unwrap();
        assert_eq!(r.mcmc.lambda_prior, LambdaPrior::Fixed { value: 0.0 });
        let mut bad = RunConfig::default();
        bad.model.gp = true;
        bad.model.lambda_fixed = Some(1.0);
        assert_eq!(bad.resolve().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn knot_syntax() {
        assert_eq!(parse_knots("15x15").unwrap(), vec![15, 15]);
        assert_eq!(parse_knots("5,5,64").unwrap(), vec![5, 5, 64]);
        assert!(parse_knots("5xx").is_err());
    }
}
