mod crossval;
mod fit;
mod simulate;
mod summarize;
mod validate;

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

pub use crossval::cmd_crossval;
pub use fit::cmd_fit;
pub use simulate::cmd_simulate;
pub use summarize::cmd_summarize;
pub use validate::cmd_validate;

use stgp_core::model::FieldBasis;
use stgp_core::spatial::SpatialDomain;

use crate::config::{Command, Manifest, RunConfig};
use crate::error::{CliError, Result};
use crate::io;

/// Runs the configured command on a pool of `run.workers` threads and
/// returns the written manifest.
pub fn dispatch(cfg: RunConfig) -> Result<Manifest> {
    let command = cfg
        .run
        .command
        .ok_or_else(|| CliError::Usage("no command given".into()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.run.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {:?} workers: {e}", cfg.run.workers)))?;
    let start = Instant::now();
    let mut manifest = Manifest::new(cfg.clone());
    let outcome = pool.install(|| match command {
        Command::Simulate => cmd_simulate(&cfg, &mut manifest),
        Command::Fit => cmd_fit(&cfg, &mut manifest),
        Command::Summarize => cmd_summarize(&cfg, &mut manifest),
        Command::Crossval => cmd_crossval(&cfg, &mut manifest),
        Command::Validate => cmd_validate(&cfg, &mut manifest),
    });
    manifest
        .timing
        .insert("wall_seconds".into(), start.elapsed().as_secs_f64().into());
    // Written even when validation fails, so the report is inspectable.
    if outcome.is_ok() || matches!(outcome, Err(CliError::Validation(_))) {
        manifest.write(&cfg.run.out)?;
    }
    outcome.map(|_| manifest)
}

pub(crate) fn load_domain(cfg: &RunConfig) -> Result<Arc<SpatialDomain>> {
    let path = cfg
        .data
        .locations
        .as_deref()
        .ok_or_else(|| CliError::Usage("--locations is required".into()))?;
    Ok(Arc::new(io::read_locations(path)?))
}

/// Half the number of distinct coordinates along each axis (at least 2).
pub fn default_knot_dims(domain: &SpatialDomain) -> Vec<usize> {
    (0..domain.dim())
        .map(|k| {
            let mut v: Vec<f64> = (0..domain.len()).map(|j| domain.location(j)[k]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            (v.len() / 2).max(2)
        })
        .collect()
}

pub(crate) fn build_basis(
    cfg: &RunConfig,
    domain: &SpatialDomain,
) -> Result<(FieldBasis, Vec<usize>)> {
    let dims = if cfg.model.knots.is_empty() {
        default_knot_dims(domain)
    } else {
        cfg.model.knots.clone()
    };
    Ok((FieldBasis::new(domain, &dims, cfg.model.sigma_h)?, dims))
}

pub(crate) fn first_dataset(cfg: &RunConfig) -> Result<&Path> {
    match cfg.data.datasets.as_slice() {
        [one] => Ok(one),
        [] => Err(CliError::Usage("--dataset is required".into())),
        _ => Err(CliError::Usage(
            "this command takes exactly one --dataset".into(),
        )),
    }
}

pub(crate) fn float_array(xs: impl IntoIterator<Item = f64>) -> toml::Value {
    toml::Value::Array(xs.into_iter().map(toml::Value::Float).collect())
}
