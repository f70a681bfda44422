use stgp_core::metrics::cross_validate_auc;
use stgp_core::model::Mode;

use super::{build_basis, first_dataset, load_domain};
use crate::config::{Manifest, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{self, fmt_real};

/// Stratified k-fold cross-validation of the probit model; writes `roc.csv`
/// and per-observation held-out scores to `scores.csv`.
pub fn cmd_crossval(cfg: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    if cfg.model.mode != Mode::Probit {
        return Err(CliError::Usage("crossval requires --mode probit".into()));
    }
    let path = first_dataset(cfg)?;
    io::require_all(&[path.to_path_buf()])?;
    let domain = load_domain(cfg)?;
    let (basis, _) = build_basis(cfg, &domain)?;
    let raw = io::read_dataset(path, domain)?;
    let cv = cross_validate_auc(&raw, &basis, cfg.mcmc(), cfg.crossval.folds)?;
    let out = &cfg.run.out;
    io::write_roc(&out.join("roc.csv"), &cv.roc.points)?;
    let rows = (0..cv.scores.len()).map(|i| {
        vec![
            (i + 1).to_string(),
            (cv.fold_of[i] + 1).to_string(),
            u8::from(cv.labels[i]).to_string(),
            fmt_real(cv.scores[i]),
        ]
    });
    io::write_table(
        &out.join("scores.csv"),
        &["observation", "fold", "label", "score"],
        rows,
    )?;
    manifest.results.insert("auc".into(), cv.roc.auc.into());
    manifest
        .results
        .insert("folds".into(), (cfg.crossval.folds as i64).into());
    Ok(())
}
