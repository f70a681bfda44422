use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use super::band::BandCholesky;
use super::grid::{Adjacency, KnotGrid};
use crate::error::{invalid, Result, StgpError};
use crate::stats::std_normal;

/// Unit-scale CAR prior `a ~ N(0, Q(ϑ)^{-1})` with `Q(ϑ) = M - ϑA`.
#[derive(Debug, Clone)]
pub struct CarStructure {
    adjacency: Arc<Adjacency>,
    theta: f64,
    chol: BandCholesky,
}

pub fn car_precision(grid: &KnotGrid, theta: f64) -> Result<CarStructure> {
    CarStructure::new(grid.adjacency().clone(), theta)
}

impl CarStructure {
    pub fn new(adjacency: Arc<Adjacency>, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid("theta", format!("must lie in (0, 1), got {theta}")));
        }
        if let Some(l) = (0..adjacency.len()).find(|&l| adjacency.degree(l) == 0) {
            return Err(StgpError::IsolatedKnot(l));
        }
        let chol = BandCholesky::factor(adjacency.len(), adjacency.bandwidth(), |i, j| {
            if i == j {
                adjacency.degree(i) as f64
            } else if adjacency.neighbors(i).contains(&j) {
                -theta
            } else {
                0.0
            }
        })?;
        Ok(CarStructure {
            adjacency,
            theta,
            chol,
        })
    }

    /// Same graph, different dependence parameter.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        CarStructure::new(self.adjacency.clone(), theta)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn adjacency(&self) -> &Arc<Adjacency> {
        &self.adjacency
    }

    pub fn cholesky(&self) -> &BandCholesky {
        &self.chol
    }

    pub fn precision_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        for l in 0..n {
            q[(l, l)] = self.adjacency.degree(l) as f64;
            for &k in self.adjacency.neighbors(l) {
                q[(l, k)] = -self.theta;
            }
        }
        q
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    /// `aᵀ Q a`.
    pub fn quad_form(&self, a: &[f64]) -> f64 {
        let mut s = 0.0;
        for (l, &al) in a.iter().enumerate() {
            let nb: f64 = self.adjacency.neighbors(l).iter().map(|&k| a[k]).sum();
            s += al * (self.adjacency.degree(l) as f64 * al - self.theta * nb);
        }
        s
    }

    /// Log density of `a` under `N(0, Q^{-1})`.
    pub fn log_density(&self, a: &[f64]) -> f64 {
        let n = a.len() as f64;
        -0.5 * n * (2.0 * std::f64::consts::PI).ln() + 0.5 * self.log_det()
            - 0.5 * self.quad_form(a)
    }

    /// Full conditional of `a_l` given the rest: mean `(ϑ/n_l) Σ_{k~l} a_k`,
    /// variance `1/n_l`.
    pub fn conditional(&self, a: &[f64], l: usize) -> (f64, f64) {
        let n_l = self.adjacency.degree(l) as f64;
        let s: f64 = self.adjacency.neighbors(l).iter().map(|&k| a[k]).sum();
        (self.theta * s / n_l, 1.0 / n_l)
    }

    /// One draw from `N(0, Q^{-1})` via `L^{-T} z`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut z: Vec<f64> = (0..self.len()).map(|_| std_normal(rng)).collect();
        self.chol.solve_upper_in_place(&mut z);
        z
    }
}

/// Free-function form of [`CarStructure::conditional`].
pub fn car_conditional(a: &[f64], l: usize, car: &CarStructure) -> (f64, f64) {
    car.conditional(a, l)
}

pub fn sample_car<R: Rng + ?Sized>(car: &CarStructure, rng: &mut R) -> Vec<f64> {
    car.sample(rng)
}
