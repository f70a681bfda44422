use stgp_core::checks::{run_property_suite, SuiteOptions};
use stgp_core::spatial::WeightRule;

use crate::config::{Fault, Manifest, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{self, fmt_real};

/// Runs the property suite and writes `validate.csv`; any failed check is
/// a validation error (after the report is written).
pub fn cmd_validate(cfg: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    let mut opts = if cfg.validate.full {
        SuiteOptions::full(cfg.run.seed)
    } else {
        SuiteOptions::quick(cfg.run.seed)
    };
    opts.weight_rule = match cfg.validate.inject_fault {
        Fault::None => WeightRule::StdDev,
        Fault::Variance => WeightRule::Variance,
    };
    let outcomes = run_property_suite(&opts)?;
    let rows = outcomes.iter().map(|c| {
        vec![
            c.name.clone(),
            if c.passed { "pass" } else { "fail" }.to_string(),
            fmt_real(c.statistic),
            fmt_real(c.threshold),
            c.detail.clone(),
        ]
    });
    io::write_table(
        &cfg.run.out.join("validate.csv"),
        &["check", "result", "statistic", "threshold", "detail"],
        rows,
    )?;
    for c in &outcomes {
        manifest.results.insert(c.name.clone(), c.passed.into());
    }
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}
