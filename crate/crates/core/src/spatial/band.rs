//! Cholesky factorization for symmetric positive definite band matrices.
//!
//! CAR precisions on a lexicographically ordered knot array have half
//! bandwidth equal to the largest index stride, so the factor costs
//! `O(L * bw^2)` instead of `O(L^3)`.

use crate::error::{Result, StgpError};

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // Row i holds L[i, i-bw ..= i] at offsets 0 ..= bw (entries with j < 0 are zero).
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factors the matrix whose lower band is given by `entry(i, j)` for
    /// `i - bw <= j <= i`.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = entry(i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= data[i * w + (k + bw - i)] * data[j * w + (k + bw - j)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(StgpError::NotPositiveDefinite("band Cholesky pivot"));
                    }
                    data[i * w + bw] = s.sqrt();
                } else {
                    data[i * w + (j + bw - i)] = s / data[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.bw + 1) + (j + self.bw - i)]
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.at(i, i).ln()).sum::<f64>()
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, x: &mut [f64]) {
        self.solve_lower_from(x, 0);
    }

    // Assumes x[..start] == 0.
    fn solve_lower_from(&self, x: &mut [f64], start: usize) {
        for i in start..self.n {
            let k0 = i.saturating_sub(self.bw).max(start);
            let mut s = x[i];
            for k in k0..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, x: &mut [f64]) {
        for i in (0..self.n).rev() {
            let k1 = (i + self.bw).min(self.n - 1);
            let mut s = x[i];
            for k in i + 1..=k1 {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
    }

    /// Solves `(L Lᵀ) x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.solve_lower_in_place(x);
        self.solve_upper_in_place(x);
    }

    /// Dense inverse of `L Lᵀ`, row-major.
    pub fn inverse_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[c] = 1.0;
            self.solve_lower_from(&mut col, c);
            self.solve_upper_in_place(&mut col);
            for (r, v) in col.iter().enumerate() {
                inv[r * n + c] = *v;
            }
        }
        // Symmetrize away rounding asymmetry.
        for r in 0..n {
            for c in r + 1..n {
                let v = 0.5 * (inv[r * n + c] + inv[c * n + r]);
                inv[r * n + c] = v;
                inv[c * n + r] = v;
            }
        }
        inv
    }
}
