use nalgebra::DMatrix;
use rayon::prelude::*;
use stgp_core::model::Mode;
use stgp_core::simdata::{generate_replicate, make_true_beta, Covariance, ExpFieldSampler};
use stgp_core::spatial::SpatialDomain;

use crate::config::{Manifest, RunConfig};
use crate::error::Result;
use crate::io;

pub fn dataset_file(k: usize) -> String {
    format!("dataset_{k:03}.csv")
}

/// Writes `locations.csv`, `beta0.csv` and one `dataset_NNN.csv` per
/// replicate. Probit datasets carry an intercept column `w_1`.
pub fn cmd_simulate(cfg: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    let scenario = cfg.simulate.scenario(cfg.model.mode);
    scenario.validate()?;
    let out = &cfg.run.out;
    let truth = make_true_beta(scenario.shape, scenario.m)?;
    let domain = SpatialDomain::square_grid(scenario.m);
    io::write_locations(&out.join("locations.csv"), &domain)?;
    io::write_coefficients(&out.join("beta0.csv"), &truth.beta)?;
    let sampler = match scenario.covariance {
        Covariance::Exp { theta_x } if cfg.simulate.replicates > 1 => {
            Some(ExpFieldSampler::new(scenario.m, theta_x)?)
        }
        _ => None,
    };
    (0..cfg.simulate.replicates)
        .into_par_iter()
        .try_for_each(|k| -> Result<()> {
            let rep = generate_replicate(&scenario, &truth, sampler.as_ref(), cfg.run.seed, k)?;
            let q = usize::from(scenario.mode == Mode::Probit);
            let w = DMatrix::from_element(rep.y.len(), q, 1.0);
            io::write_dataset(&out.join(dataset_file(k)), &rep.y, &w, &rep.x)
        })?;
    let r = &mut manifest.results;
    r.insert("scenario".into(), scenario_label(&scenario).into());
    r.insert("replicates".into(), (cfg.simulate.replicates as i64).into());
    r.insert("locations".into(), (truth.p() as i64).into());
    r.insert("truth_zero_fraction".into(), truth.zero_fraction().into());
    Ok(())
}

pub fn scenario_label(s: &stgp_core::simdata::Scenario) -> String {
    format!(
        "{} {} sigma={} n={} m={}",
        s.shape, s.covariance, s.sigma, s.n, s.m
    )
}
