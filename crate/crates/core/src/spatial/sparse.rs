/// Sparse matrix held in both row-compressed and column-compressed form.
///
/// Rows are locations and columns are knots: the likelihood needs the row
/// view for `K a`, while single-knot updates walk one column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists; columns must be ascending.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in &rows {
            for &(c, v) in r {
                debug_assert!(c < ncols);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let mut counts = vec![0usize; ncols + 1];
        for &c in &col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0; col_idx.len()];
        let mut col_values = vec![0.0; col_idx.len()];
        for r in 0..nrows {
            for k in row_ptr[r]..row_ptr[r + 1] {
                let c = col_idx[k];
                row_idx[next[c]] = r;
                col_values[next[c]] = values[k];
                next[c] += 1;
            }
        }
        SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            col_ptr,
            row_idx,
            col_values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn col(&self, c: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[c], self.col_ptr[c + 1]);
        (&self.row_idx[a..b], &self.col_values[a..b])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (idx, vals) = self.row(r);
                idx.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// Same pattern with row `r` divided by `divisors[r]`.
    pub fn divide_rows(&self, divisors: &[f64]) -> SparseMatrix {
        assert_eq!(divisors.len(), self.nrows);
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.values[k] = self.values[k] / divisors[r];
            }
        }
        for k in 0..self.col_values.len() {
            out.col_values[k] = self.col_values[k] / divisors[self.row_idx[k]];
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_and_column_views_agree() {
        let m = SparseMatrix::from_rows(
            3,
            vec![vec![(0, 1.0), (2, 2.0)], vec![], vec![(1, 3.0), (2, 4.0)]],
        );
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.col(2), (&[0usize, 2][..], &[2.0, 4.0][..]));
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 0.0, 7.0]);
        let d = m.divide_rows(&[2.0, 1.0, 4.0]);
        assert_eq!(d.col(2), (&[0usize, 2][..], &[1.0, 1.0][..]));
        assert_eq!(d.row(0).1, &[0.5, 1.0]);
    }
}
