use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StgpError};
use crate::spatial::SpatialDomain;

/// Response family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Gaussian,
    Probit,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Gaussian => "gaussian",
            Mode::Probit => "probit",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(Mode::Gaussian),
            "probit" => Ok(Mode::Probit),
            other => Err(format!(
                "unknown mode `{other}` (expected gaussian or probit)"
            )),
        }
    }
}

/// Affine map `x -> (x - center) / scale` applied to one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub center: f64,
    pub scale: f64,
}

impl ColumnScaling {
    pub const IDENTITY: ColumnScaling = ColumnScaling {
        center: 0.0,
        scale: 1.0,
    };
}

/// Record of the scalings applied by [`normalize_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub y: ColumnScaling,
    pub w: Vec<ColumnScaling>,
    pub x: Vec<ColumnScaling>,
}

impl Normalization {
    pub fn identity(q: usize, p: usize) -> Self {
        Normalization {
            y: ColumnScaling::IDENTITY,
            w: vec![ColumnScaling::IDENTITY; q],
            x: vec![ColumnScaling::IDENTITY; p],
        }
    }

    /// Converts coefficients fitted on the normalized scale into effects of
    /// raw image columns on the raw response. With `absorb_root_p`, the
    /// model's `p^{-1/2}` factor is folded into the returned values.
    pub fn beta_to_original(&self, beta: &[f64], absorb_root_p: bool) -> Vec<f64> {
        let root_p = if absorb_root_p {
            (beta.len() as f64).sqrt()
        } else {
            1.0
        };
        beta.iter()
            .zip(&self.x)
            .map(|(b, sx)| b * self.y.scale / (sx.scale * root_p))
            .collect()
    }
}

/// Responses, scalar covariates and image predictors over a spatial domain.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: DVector<f64>,
    w: DMatrix<f64>,
    x: DMatrix<f64>,
    domain: Arc<SpatialDomain>,
    normalization: Normalization,
}

impl Dataset {
    pub fn new(
        y: DVector<f64>,
        w: DMatrix<f64>,
        x: DMatrix<f64>,
        domain: Arc<SpatialDomain>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(StgpError::InvalidData("dataset has no observations".into()));
        }
        if w.nrows() != n {
            return Err(StgpError::DimensionMismatch {
                context: "rows of W",
                expected: n,
                found: w.nrows(),
            });
        }
        if x.nrows() != n {
            return Err(StgpError::DimensionMismatch {
                context: "rows of X",
                expected: n,
                found: x.nrows(),
            });
        }
        if x.ncols() != domain.len() {
            return Err(StgpError::DimensionMismatch {
                context: "image columns vs locations",
                expected: domain.len(),
                found: x.ncols(),
            });
        }
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if !finite(y.as_slice()) || !finite(w.as_slice()) || !finite(x.as_slice()) {
            return Err(StgpError::InvalidData("non-finite value in dataset".into()));
        }
        let normalization = Normalization::identity(w.ncols(), x.ncols());
        Ok(Dataset {
            y,
            w,
            x,
            domain,
            normalization,
        })
    }

    /// Swaps in a new response vector, keeping the design.
    pub fn replace_response(&mut self, y: DVector<f64>) -> Result<()> {
        if y.len() != self.y.len() {
            return Err(StgpError::DimensionMismatch {
                context: "response length",
                expected: self.y.len(),
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(StgpError::InvalidData("non-finite response".into()));
        }
        self.y = y;
        Ok(())
    }

    /// Dataset without scalar covariates.
    pub fn without_covariates(
        y: DVector<f64>,
        x: DMatrix<f64>,
        domain: Arc<SpatialDomain>,
    ) -> Result<Self> {
        let n = y.len();
        Dataset::new(y, DMatrix::zeros(n, 0), x, domain)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.w.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Column `j` of X (contiguous, length n).
    pub fn x_col(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    pub fn domain(&self) -> &Arc<SpatialDomain> {
        &self.domain
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn check_mode(&self, mode: Mode) -> Result<()> {
        if mode == Mode::Probit {
            if let Some(i) = self.y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(StgpError::InvalidData(format!(
                    "probit mode requires y in {{0, 1}}; observation {i} is {}",
                    self.y[i]
                )));
            }
        }
        Ok(())
    }

    /// Subset of observations, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let w = self.w.select_rows(rows);
        let x = self.x.select_rows(rows);
        Dataset {
            y,
            w,
            x,
            domain: self.domain.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Applies another dataset's scaling record (e.g. training-fold
    /// normalization applied to held-out rows).
    pub fn apply_normalization(&self, norm: &Normalization) -> Dataset {
        let mut out = self.clone();
        out.y.apply(|v| *v = (*v - norm.y.center) / norm.y.scale);
        for (k, s) in norm.w.iter().enumerate() {
            out.w
                .column_mut(k)
                .apply(|v| *v = (*v - s.center) / s.scale);
        }
        for (j, s) in norm.x.iter().enumerate() {
            out.x
                .column_mut(j)
                .apply(|v| *v = (*v - s.center) / s.scale);
        }
        out.normalization = norm.clone();
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NormalizeOptions {
    /// Leave zero-variance image columns centred instead of failing.
    pub allow_constant_image_columns: bool,
}

fn column_moments(col: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = col.clone().count() as f64;
    let mean = col.clone().sum::<f64>() / n;
    let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn is_intercept(col: nalgebra::DVectorView<'_, f64>) -> bool {
    col.iter().all(|&v| v == 1.0)
}

/// Centers and scales the response (Gaussian mode only) and every column of
/// W and X to mean 0 and unit sample variance. All-ones W columns are left
/// alone as intercepts.
pub fn normalize_dataset(raw: &Dataset, mode: Mode, opts: NormalizeOptions) -> Result<Dataset> {
    let n = raw.n();
    if n < 2 {
        return Err(StgpError::InvalidData(
            "normalization needs at least two observations".into(),
        ));
    }
    raw.check_mode(mode)?;
    let mut out = raw.clone();
    let y_scaling = match mode {
        Mode::Gaussian => {
            let (m, s) = column_moments(raw.y.iter().copied());
            if !(s > 0.0) {
                return Err(StgpError::ZeroVariance("y".into()));
            }
            ColumnScaling {
                center: m,
                scale: s,
            }
        }
        Mode::Probit => ColumnScaling::IDENTITY,
    };
    out.y
        .apply(|v| *v = (*v - y_scaling.center) / y_scaling.scale);

    let mut w_scaling = Vec::with_capacity(raw.q());
    for k in 0..raw.q() {
        let col = raw.w.column(k);
        if is_intercept(col) {
            w_scaling.push(ColumnScaling::IDENTITY);
            continue;
        }
        let (m, s) = column_moments(col.iter().copied());
        if !(s > 0.0) {
            return Err(StgpError::ZeroVariance(format!("w_{}", k + 1)));
        }
        let sc = ColumnScaling {
            center: m,
            scale: s,
        };
        out.w
            .column_mut(k)
            .apply(|v| *v = (*v - sc.center) / sc.scale);
        w_scaling.push(sc);
    }

    let mut x_scaling = Vec::with_capacity(raw.p());
    for j in 0..raw.p() {
        let (m, s) = column_moments(raw.x_col(j).iter().copied());
        let sc = if s > 0.0 {
            ColumnScaling {
                center: m,
                scale: s,
            }
        } else if opts.allow_constant_image_columns {
            ColumnScaling {
                center: m,
                scale: 1.0,
            }
        } else {
            return Err(StgpError::ZeroVariance(format!("x_{}", j + 1)));
        };
        out.x
            .column_mut(j)
            .apply(|v| *v = (*v - sc.center) / sc.scale);
        x_scaling.push(sc);
    }
    out.normalization = Normalization {
        y: y_scaling,
        w: w_scaling,
        x: x_scaling,
    };
    Ok(out)
}
