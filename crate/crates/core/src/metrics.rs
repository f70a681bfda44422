//! Estimation and selection scores, ROC/AUC, and cross-validated
//! prediction for the probit model.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, StgpError};
use crate::mcmc::{run_chain, McmcConfig};
use crate::model::{
    covariate_predictor, image_predictor, normalize_dataset, Dataset, FieldBasis, Mode,
    NormalizeOptions,
};
use crate::stats::{derive_seed, rng_from_seed, std_normal_cdf};

const TAG_FOLDS: u64 = 0xF01D;
const TAG_FOLD_CHAIN: u64 = 0xF0C4;

/// Default posterior-inclusion cutoff for flagging a location.
pub const DEFAULT_CUTOFF: f64 = 0.5;

fn same_len(context: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(StgpError::DimensionMismatch {
            context,
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Mean squared error over locations (unscaled; reports multiply by 1000).
pub fn coefficient_mse(beta_hat: &[f64], beta0: &[f64]) -> Result<f64> {
    same_len("coefficient_mse", beta0.len(), beta_hat.len())?;
    if beta0.is_empty() {
        return Err(invalid("beta0", "empty coefficient vector"));
    }
    let ss: f64 = beta_hat
        .iter()
        .zip(beta0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ss / beta0.len() as f64)
}

/// `freq_j > cutoff`.
pub fn selection_flags(nonzero_freq: &[f64], cutoff: f64) -> Vec<bool> {
    nonzero_freq.iter().map(|&f| f > cutoff).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub mse: f64,
    /// Percent of truly-zero locations flagged.
    pub type1: f64,
    /// Percent of truly-nonzero locations flagged.
    pub power: f64,
    pub flags: Vec<bool>,
}

impl SelectionReport {
    pub fn mse_x1000(&self) -> f64 {
        1000.0 * self.mse
    }
}

/// Type I error and power (percent) of `flags` against the support of `beta0`.
pub fn selection_rates(flags: &[bool], beta0: &[f64]) -> Result<(f64, f64)> {
    same_len("selection_metrics", beta0.len(), flags.len())?;
    let (mut zeros, mut fp, mut nonzeros, mut tp) = (0usize, 0usize, 0usize, 0usize);
    for (&f, &b) in flags.iter().zip(beta0) {
        if b == 0.0 {
            zeros += 1;
            fp += f as usize;
        } else {
            nonzeros += 1;
            tp += f as usize;
        }
    }
    if zeros == 0 || nonzeros == 0 {
        return Err(StgpError::DegenerateTruth(format!(
            "{zeros} zero and {nonzeros} nonzero locations; both must be present"
        )));
    }
    Ok((
        100.0 * fp as f64 / zeros as f64,
        100.0 * tp as f64 / nonzeros as f64,
    ))
}

pub fn selection_metrics(
    flags: &[bool],
    beta0: &[f64],
    beta_hat: &[f64],
) -> Result<SelectionReport> {
    let (type1, power) = selection_rates(flags, beta0)?;
    Ok(SelectionReport {
        mse: coefficient_mse(beta_hat, beta0)?,
        type1,
        power,
        flags: flags.to_vec(),
    })
}

/// Element-wise mean of per-replicate reports (flags are not averaged).
pub fn mean_report(reports: &[SelectionReport]) -> Option<(f64, f64, f64)> {
    if reports.is_empty() {
        return None;
    }
    let k = reports.len() as f64;
    let sum = |f: fn(&SelectionReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    Some((sum(|r| r.mse), sum(|r| r.type1), sum(|r| r.power)))
}

/// One ROC vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn class_counts(labels: &[bool]) -> Result<(u64, u64)> {
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(StgpError::InvalidData("ROC needs both classes".into()));
    }
    Ok((pos, neg))
}

/// ROC over all thresholds (tied scores move together) and the trapezoidal
/// area. The area is accumulated in integer counts, so it equals the
/// Mann–Whitney statistic exactly.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    same_len("roc_curve", labels.len(), scores.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(StgpError::InvalidData("NaN score".into()));
    }
    let (pos, neg) = class_counts(labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area = 0u64;
    let mut k = 0;
    while k < idx.len() {
        let s = scores[idx[k]];
        let (tp0, fp0) = (tp, fp);
        while k < idx.len() && scores[idx[k]] == s {
            if labels[idx[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        twice_area += (fp - fp0) * (tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(Roc {
        points,
        auc: twice_area as f64 / (2 * pos * neg) as f64,
    })
}

/// P(score_pos > score_neg) + ½ P(tie), by enumerating all pairs.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    same_len("mann_whitney_auc", labels.len(), scores.len())?;
    let (pos, neg) = class_counts(labels)?;
    let mut twice = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            twice += if si > sj {
                2
            } else if si == sj {
                1
            } else {
                0
            };
        }
    }
    Ok(twice as f64 / (2 * pos * neg) as f64)
}

/// Fold index per observation; each class is shuffled separately and dealt
/// round-robin, so fold class counts differ by at most one.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(invalid("folds", "need at least 2"));
    }
    let mut rng = rng_from_seed(derive_seed(seed, TAG_FOLDS, 0));
    let mut fold_of = vec![0; labels.len()];
    for class in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(StgpError::Stratification(format!(
                "class {} has {} observations for {folds} folds",
                class as u8,
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (k, i) in members.into_iter().enumerate() {
            fold_of[i] = k % folds;
        }
    }
    Ok(fold_of)
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub fold_of: Vec<usize>,
    /// Held-out Φ(η̂) per observation.
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub roc: Roc,
}

/// Out-of-sample Φ(Wα̂ + p^{-1/2}Xβ̂) for rows `test` of `raw`, after fitting
/// a probit chain to the complementary rows.
fn fold_scores(
    raw: &Dataset,
    basis: &FieldBasis,
    cfg: &McmcConfig,
    train: &[usize],
    test: &[usize],
) -> Result<Vec<f64>> {
    let train_data = normalize_dataset(
        &raw.select_rows(train),
        Mode::Probit,
        NormalizeOptions {
            allow_constant_image_columns: true,
        },
    )?;
    let summary = run_chain(&train_data, basis, cfg)?;
    let test_data = raw
        .select_rows(test)
        .apply_normalization(train_data.normalization());
    let wa = covariate_predictor(&test_data, &summary.alpha_mean);
    let xb = image_predictor(&test_data, &summary.beta_mean);
    Ok(wa
        .iter()
        .zip(&xb)
        .map(|(a, b)| std_normal_cdf(a + b))
        .collect())
}

/// Stratified k-fold cross-validation of the probit model on raw (not yet
/// normalized) data; folds run in parallel with independent seeds.
pub fn cross_validate_auc(
    raw: &Dataset,
    basis: &FieldBasis,
    cfg: &McmcConfig,
    folds: usize,
) -> Result<CvResult> {
    raw.check_mode(Mode::Probit)?;
    if cfg.mode != Mode::Probit {
        return Err(invalid("mode", "cross-validation requires probit mode"));
    }
    let labels: Vec<bool> = raw.y().iter().map(|&v| v == 1.0).collect();
    let fold_of = stratified_folds(&labels, folds, cfg.seed)?;
    let per_fold: Vec<(Vec<usize>, Vec<f64>)> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| fold_of[i] == k);
            let fold_cfg = McmcConfig {
                seed: derive_seed(cfg.seed, TAG_FOLD_CHAIN, k as u64),
                ..cfg.clone()
            };
            fold_scores(raw, basis, &fold_cfg, &train, &test).map(|s| (test, s))
        })
        .collect::<Result<_>>()?;
    let mut scores = vec![0.0; labels.len()];
    for (test, s) in per_fold {
        for (i, v) in test.into_iter().zip(s) {
            scores[i] = v;
        }
    }
    let roc = roc_curve(&scores, &labels)?;
    Ok(CvResult {
        fold_of,
        scores,
        labels,
        roc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::std_normal;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn mse_examples() {
        let b0 = [0.0, 1.0, -2.0, 0.5];
        assert_eq!(coefficient_mse(&b0, &b0).unwrap(), 0.0);
        let shifted: Vec<f64> = b0.iter().map(|b| b + 0.1).collect();
        assert!((coefficient_mse(&shifted, &b0).unwrap() - 0.01).abs() < 1e-15);
        assert!(coefficient_mse(&[1.0], &b0).is_err());

        let mut rng = rng_from_seed(1);
        let a: Vec<f64> = (0..500).map(|_| std_normal(&mut rng)).collect();
        let b: Vec<f64> = (0..500).map(|_| std_normal(&mut rng)).collect();
        let mut naive = 0.0;
        for j in 0..500 {
            naive += (a[j] - b[j]).powi(2);
        }
        assert!((coefficient_mse(&a, &b).unwrap() - naive / 500.0).abs() < 1e-12);
    }

    #[test]
    fn flags_use_strict_cutoff() {
        assert_eq!(selection_flags(&[0.0; 3], DEFAULT_CUTOFF), vec![false; 3]);
        assert_eq!(selection_flags(&[0.49, 0.51], 0.5), vec![false, true]);
        assert_eq!(selection_flags(&[0.5], 0.5), vec![false]);
        assert_eq!(
            selection_flags(&[0.0, 1e-9, 0.3], 0.0),
            vec![false, true, true]
        );
    }

    #[test]
    fn selection_rate_examples() {
        let b0 = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, -1.0, 0.3];
        let perfect: Vec<bool> = b0.iter().map(|b| *b != 0.0).collect();
        assert_eq!(selection_rates(&perfect, &b0).unwrap(), (0.0, 100.0));
        assert_eq!(selection_rates(&[true; 10], &b0).unwrap(), (100.0, 100.0));
        // Hand count: flags at 0, 1 (false positives) and 6, 8 (hits).
        let flags = [
            true, true, false, false, false, false, true, false, true, false,
        ];
        let (t1, pw) = selection_rates(&flags, &b0).unwrap();
        assert!((t1 - 100.0 * 2.0 / 6.0).abs() < 1e-12);
        assert!((pw - 50.0).abs() < 1e-12);
        let r = selection_metrics(&flags, &b0, &b0).unwrap();
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.flags, flags.to_vec());
    }

    #[test]
    fn degenerate_truth_is_named() {
        assert!(matches!(
            selection_rates(&[true, false], &[0.0, 0.0]),
            Err(StgpError::DegenerateTruth(_))
        ));
        assert!(matches!(
            selection_rates(&[true, false], &[1.0, 2.0]),
            Err(StgpError::DegenerateTruth(_))
        ));
    }

    #[test]
    fn mean_report_averages() {
        let r = |mse, type1, power| SelectionReport {
            mse,
            type1,
            power,
            flags: vec![],
        };
        assert_eq!(mean_report(&[]), None);
        assert_eq!(mean_report(&[r(1.0, 2.0, 3.0)]), Some((1.0, 2.0, 3.0)));
        assert_eq!(
            mean_report(&[r(1.0, 2.0, 30.0), r(3.0, 4.0, 50.0)]),
            Some((2.0, 3.0, 40.0))
        );
    }

    #[test]
    fn separated_scores_give_unit_auc() {
        let roc = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(
            roc.points.first().unwrap(),
            &RocPoint { fpr: 0.0, tpr: 0.0 }
        );
        assert_eq!(roc.points.last().unwrap(), &RocPoint { fpr: 1.0, tpr: 1.0 });
        let flipped = roc_curve(&[0.1, 0.2, 0.8, 0.9], &[true, true, false, false]).unwrap();
        assert_eq!(flipped.auc, 0.0);
        let tied = roc_curve(&[0.5; 4], &[true, false, true, false]).unwrap();
        assert_eq!(tied.auc, 0.5);
        assert_eq!(tied.points.len(), 2);
        assert!(roc_curve(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn null_scores_have_auc_near_half() {
        let mut rng = rng_from_seed(2);
        let labels: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
        let mut aucs = Vec::new();
        for _ in 0..200 {
            let s: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
            aucs.push(roc_curve(&s, &labels).unwrap().auc);
        }
        assert!(aucs.iter().all(|a| (a - 0.5).abs() < 0.15));
        let m = aucs.iter().sum::<f64>() / 200.0;
        // SE of the mean ≈ 0.041 / sqrt(200).
        assert!((m - 0.5).abs() < 0.01, "{m}");
    }

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let labels: Vec<bool> = (0..53).map(|i| i % 3 == 0).collect();
        let f = stratified_folds(&labels, 5, 9).unwrap();
        assert_eq!(f, stratified_folds(&labels, 5, 9).unwrap());
        assert_ne!(f, stratified_folds(&labels, 5, 10).unwrap());
        for class in [false, true] {
            let counts: Vec<usize> = (0..5)
                .map(|k| (0..53).filter(|&i| labels[i] == class && f[i] == k).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{counts:?}");
        }
        let few: Vec<bool> = (0..20).map(|i| i < 3).collect();
        assert!(matches!(
            stratified_folds(&few, 5, 1),
            Err(StgpError::Stratification(_))
        ));
        assert!(stratified_folds(&labels, 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn trapezoid_auc_equals_mann_whitney(
            raw in prop::collection::vec((0u8..12, any::<bool>()), 2..200)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 4.0).collect();
            let labels: Vec<bool> = raw.iter().map(|(_, l)| *l).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let roc = roc_curve(&scores, &labels).unwrap();
            prop_assert_eq!(roc.auc, mann_whitney_auc(&scores, &labels).unwrap());
            for w in roc.points.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
            prop_assert_eq!(roc.points[0], RocPoint { fpr: 0.0, tpr: 0.0 });
            prop_assert_eq!(*roc.points.last().unwrap(), RocPoint { fpr: 1.0, tpr: 1.0 });
        }

        #[test]
        fn rates_ignore_order_of_tied_frequencies(
            freqs in prop::collection::vec(0u8..5, 4..60),
            seed in any::<u64>()
        ) {
            // Truth: first half nonzero. Shuffling frequencies within each
            // truth class does not change the rates.
            let p = freqs.len();
            let b0: Vec<f64> = (0..p).map(|j| if j < p / 2 { 1.0 } else { 0.0 }).collect();
            let f: Vec<f64> = freqs.iter().map(|&v| v as f64 / 4.0).collect();
            let mut g = f.clone();
            let mut rng = rng_from_seed(seed);
            g[..p / 2].shuffle(&mut rng);
            g[p / 2..].shuffle(&mut rng);
            prop_assert_eq!(
                selection_rates(&selection_flags(&f, 0.5), &b0).unwrap(),
                selection_rates(&selection_flags(&g, 0.5), &b0).unwrap()
            );
        }
    }
}
