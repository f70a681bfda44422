use std::path::{Path, PathBuf};

use rayon::prelude::*;
use stgp_core::mcmc::{run_chain, Block, ChainSummary};
use stgp_core::model::{normalize_dataset, NormalizeOptions};

use super::{build_basis, float_array, load_domain};
use crate::config::{Manifest, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{self, fmt_real, FitSummary};

/// Output directory of dataset `i`: the run directory itself for a single
/// dataset, else a subdirectory named after the file stem.
fn fit_dir(cfg: &RunConfig, path: &Path) -> PathBuf {
    if cfg.data.datasets.len() == 1 {
        cfg.run.out.clone()
    } else {
        let stem = path
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
        cfg.run.out.join(stem)
    }
}

/// Fits each dataset (in parallel) and writes `summary.csv`, `traces.csv`
/// and `adaptation.csv` per fit.
pub fn cmd_fit(cfg: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    if cfg.data.datasets.is_empty() {
        return Err(CliError::Usage("--dataset is required".into()));
    }
    io::require_all(&cfg.data.datasets)?;
    let domain = load_domain(cfg)?;
    let (basis, dims) = build_basis(cfg, &domain)?;
    let fits: Vec<(PathBuf, ChainSummary)> = cfg
        .data
        .datasets
        .par_iter()
        .map(|path| {
            let raw = io::read_dataset(path, domain.clone())?;
            let data = normalize_dataset(&raw, cfg.model.mode, NormalizeOptions::default())?;
            let s = run_chain(&data, &basis, cfg.mcmc())?;
            let dir = fit_dir(cfg, path);
            let norm = data.normalization();
            let intervals = s.credible_intervals(0.95).map(|iv| {
                let lo: Vec<f64> = iv.iter().map(|v| v.0).collect();
                let hi: Vec<f64> = iv.iter().map(|v| v.1).collect();
                norm.beta_to_original(&lo, true)
                    .into_iter()
                    .zip(norm.beta_to_original(&hi, true))
                    .collect()
            });
            let summary = FitSummary {
                beta: norm.beta_to_original(&s.beta_mean, true),
                beta_normalized: s.beta_mean.clone(),
                inclusion: s.inclusion.clone(),
                intervals,
            };
            io::write_summary(&dir.join("summary.csv"), &summary)?;
            io::write_traces(
                &dir.join("traces.csv"),
                &s.traces,
                cfg.mcmc.burn_in,
                cfg.mcmc.thin,
            )?;
            write_adaptation(&dir.join("adaptation.csv"), &s)?;
            Ok((dir, s))
        })
        .collect::<Result<_>>()?;

    manifest.results.insert(
        "knots".into(),
        toml::Value::Array(dims.iter().map(|&d| (d as i64).into()).collect()),
    );
    manifest
        .results
        .insert("sigma_h".into(), basis.sigma_h().into());
    for ((dir, s), path) in fits.iter().zip(&cfg.data.datasets) {
        let key = if fits.len() == 1 {
            "fit".to_string()
        } else {
            dir.file_name()
                .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
        };
        let mut r = toml::Table::new();
        r.insert("dataset".into(), path.display().to_string().into());
        r.insert("kept".into(), (s.kept as i64).into());
        r.insert("acceptance_knots".into(), s.acceptance.knots.rate().into());
        r.insert("acceptance_theta".into(), s.acceptance.theta.rate().into());
        r.insert(
            "acceptance_lambda".into(),
            s.acceptance.lambda.rate().into(),
        );
        r.insert("final_theta_scale".into(), s.final_theta_scale.into());
        r.insert("final_lambda_sd".into(), s.final_lambda_sd.into());
        r.insert(
            "lambda_bounds".into(),
            float_array([s.lambda_bounds.0, s.lambda_bounds.1]),
        );
        if let Some(c) = &s.calibration {
            r.insert("calibration_fraction".into(), c.fraction.into());
        }
        manifest.results.insert(key.clone(), r.into());
        let mut t = toml::Table::new();
        t.insert("chain_seconds".into(), s.elapsed.as_secs_f64().into());
        if let Some(c) = &s.calibration {
            t.insert("pilot_seconds".into(), c.pilot_elapsed.as_secs_f64().into());
        }
        manifest.timing.insert(key, t.into());
    }
    Ok(())
}

fn write_adaptation(path: &Path, s: &ChainSummary) -> Result<()> {
    let rows = s.adaptation.iter().map(|e| {
        let block = match e.block {
            Block::Theta => "theta_scale",
            Block::Lambda => "lambda_sd",
        };
        vec![
            (e.iteration + 1).to_string(),
            block.to_string(),
            fmt_real(e.sd),
        ]
    });
    io::write_table(path, &["iteration", "parameter", "value"], rows)
}
