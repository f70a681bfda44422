use std::path::{Path, PathBuf};

use stgp_core::metrics::{mean_report, selection_flags, selection_metrics, SelectionReport};

use crate::config::{Manifest, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{self, fmt_real};

fn summary_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("summary.csv")
    } else {
        p.to_path_buf()
    }
}

fn score_all(fits: &[PathBuf], truth: &[f64], cutoff: f64) -> Result<Vec<SelectionReport>> {
    let paths: Vec<PathBuf> = fits.iter().map(|p| summary_path(p)).collect();
    io::require_all(&paths)?;
    paths
        .iter()
        .map(|p| {
            let s = io::read_summary(p)?;
            let flags = selection_flags(&s.inclusion, cutoff);
            Ok(selection_metrics(&flags, truth, &s.beta)?)
        })
        .collect()
}

/// Scores fitted summaries against the true coefficients and writes
/// `replicates.csv` (one row per fit) and `report.csv` (metric rows, one
/// column per method, means over replicates; MSE multiplied by 1000).
pub fn cmd_summarize(cfg: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    let truth_path = cfg
        .data
        .truth
        .as_deref()
        .ok_or_else(|| CliError::Usage("--truth is required".into()))?;
    if cfg.data.fits.is_empty() {
        return Err(CliError::Usage("no fits to summarize (use --fits)".into()));
    }
    if !cfg.data.gp_fits.is_empty() && cfg.data.gp_fits.len() != cfg.data.fits.len() {
        return Err(CliError::Usage(format!(
            "{} fits but {} GP fits",
            cfg.data.fits.len(),
            cfg.data.gp_fits.len()
        )));
    }
    let mut required: Vec<PathBuf> = vec![truth_path.to_path_buf()];
    required.extend(
        cfg.data
            .fits
            .iter()
            .chain(&cfg.data.gp_fits)
            .map(|p| summary_path(p)),
    );
    io::require_all(&required)?;
    let truth = io::read_coefficients(truth_path)?;
    let cutoff = cfg.summarize.cutoff;
    let stgp = score_all(&cfg.data.fits, &truth, cutoff)?;
    let gp = if cfg.data.gp_fits.is_empty() {
        None
    } else {
        Some(score_all(&cfg.data.gp_fits, &truth, cutoff)?)
    };

    let out = &cfg.run.out;
    let mut header = vec!["replicate", "mse_x1000", "type1", "power"];
    if gp.is_some() {
        header.push("gp_mse_x1000");
    }
    let rows = stgp.iter().enumerate().map(|(k, r)| {
        let mut row = vec![
            (k + 1).to_string(),
            fmt_real(r.mse_x1000()),
            fmt_real(r.type1),
            fmt_real(r.power),
        ];
        if let Some(g) = &gp {
            row.push(fmt_real(g[k].mse_x1000()));
        }
        row
    });
    io::write_table(&out.join("replicates.csv"), &header, rows)?;

    let means = mean_report(&stgp).expect("at least one fit");
    let gp_means = gp.as_ref().and_then(|g| mean_report(g));
    let mut header = vec!["metric", "STGP"];
    if gp_means.is_some() {
        header.push("GP");
    }
    let line = |name: &str, f: fn(&(f64, f64, f64)) -> f64| {
        let mut row = vec![name.to_string(), fmt_real(f(&means))];
        if let Some(g) = &gp_means {
            row.push(fmt_real(f(g)));
        }
        row
    };
    let table = vec![
        line("mse_x1000", |m| 1000.0 * m.0),
        line("type1", |m| m.1),
        line("power", |m| m.2),
    ];
    io::write_table(&out.join("report.csv"), &header, table)?;

    let r = &mut manifest.results;
    r.insert("replicates".into(), (stgp.len() as i64).into());
    r.insert("mse_x1000".into(), (1000.0 * means.0).into());
    r.insert("type1".into(), means.1.into());
    r.insert("power".into(), means.2.into());
    if let Some(g) = gp_means {
        r.insert("gp_mse_x1000".into(), (1000.0 * g.0).into());
    }
    Ok(())
}
