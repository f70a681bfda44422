use std::sync::Arc;

use crate::error::{invalid, Result, StgpError};

/// Locations `s_1, ..., s_p` in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDomain {
    dim: usize,
    coords: Vec<f64>,
}

impl SpatialDomain {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension", "must be >= 1"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(invalid(
                "locations",
                format!(
                    "{} coordinates do not form rows of width {dim}",
                    coords.len()
                ),
            ));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(StgpError::InvalidData(format!(
                "non-finite coordinate at location {}",
                i / dim
            )));
        }
        // `+ 0.0` folds -0.0 into 0.0 so bit patterns compare as values.
        let mut keys: Vec<(Vec<u64>, usize)> = coords
            .chunks(dim)
            .enumerate()
            .map(|(i, row)| (row.iter().map(|c| (c + 0.0).to_bits()).collect(), i))
            .collect();
        keys.sort();
        if let Some(w) = keys.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(StgpError::InvalidData(format!(
                "duplicate locations {} and {}",
                w[0].1, w[1].1
            )));
        }
        Ok(SpatialDomain { dim, coords })
    }

    /// The `m x m` integer lattice `{1..m}^2`; location `j = row * m + col`
    /// sits at `(col + 1, row + 1)`.
    pub fn square_grid(m: usize) -> Self {
        let mut coords = Vec::with_capacity(2 * m * m);
        for row in 0..m {
            for col in 0..m {
                coords.push((col + 1) as f64);
                coords.push((row + 1) as f64);
            }
        }
        SpatialDomain { dim: 2, coords }
    }

    /// Space-time product domain: every spatial location at every time
    /// `t = 1..=n_times`, with time multiplied by `time_scale`. Location
    /// index is `t * p_space + s`.
    pub fn spatiotemporal(space: &SpatialDomain, n_times: usize, time_scale: f64) -> Result<Self> {
        if !(time_scale > 0.0) {
            return Err(invalid("time_scale", "must be positive"));
        }
        let d = space.dim + 1;
        let mut coords = Vec::with_capacity(d * space.len() * n_times);
        for t in 0..n_times {
            for s in 0..space.len() {
                coords.extend_from_slice(space.location(s));
                coords.push((t + 1) as f64 * time_scale);
            }
        }
        SpatialDomain::new(d, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn location(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|k| {
                self.coords
                    .iter()
                    .skip(k)
                    .step_by(self.dim)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
                        (lo.min(c), hi.max(c))
                    })
            })
            .collect()
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        SpatialDomain {
            dim: self.dim,
            coords: self.coords.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Rook adjacency over a knot array.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
    bandwidth: usize,
}

impl Adjacency {
    pub fn from_neighbors(neighbors: Vec<Vec<usize>>) -> Self {
        let bandwidth = neighbors
            .iter()
            .enumerate()
            .flat_map(|(l, ns)| ns.iter().map(move |&k| l.abs_diff(k)))
            .max()
            .unwrap_or(0);
        Adjacency {
            neighbors,
            bandwidth,
        }
    }

    /// A path graph `0 - 1 - ... - (n-1)`.
    pub fn chain(n: usize) -> Self {
        let neighbors = (0..n)
            .map(|l| {
                let mut v = Vec::new();
                if l > 0 {
                    v.push(l - 1);
                }
                if l + 1 < n {
                    v.push(l + 1);
                }
                v
            })
            .collect();
        Adjacency::from_neighbors(neighbors)
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, l: usize) -> &[usize] {
        &self.neighbors[l]
    }

    pub fn degree(&self, l: usize) -> usize {
        self.neighbors[l].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Largest `|l - k|` over adjacent pairs, the half bandwidth of `M - ϑA`.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }
}

/// Knots `t_1..t_L` on an `m_1 x ... x m_d` array, axis 0 varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotGrid {
    dims: Vec<usize>,
    coords: Vec<f64>,
    adjacency: Arc<Adjacency>,
    spacing: Vec<Option<f64>>,
}

impl KnotGrid {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn knot(&self, l: usize) -> &[f64] {
        let d = self.dims.len();
        &self.coords[l * d..(l + 1) * d]
    }

    pub fn adjacency(&self) -> &Arc<Adjacency> {
        &self.adjacency
    }

    pub fn neighbor_counts(&self) -> Vec<usize> {
        self.adjacency.degrees()
    }

    /// Smallest distance between two knots, `None` for a single knot.
    pub fn min_spacing(&self) -> Option<f64> {
        self.spacing.iter().flatten().copied().reduce(f64::min)
    }
}

/// Places `dims[k]` equally spaced knots along axis `k` spanning the exact
/// bounding box of the locations (a single knot sits at the midpoint).
pub fn build_knot_grid(domain: &SpatialDomain, dims: &[usize]) -> Result<KnotGrid> {
    let d = domain.dim();
    if dims.len() != d {
        return Err(StgpError::DimensionMismatch {
            context: "knot dims",
            expected: d,
            found: dims.len(),
        });
    }
    if dims.contains(&0) {
        return Err(invalid("knots", "every axis needs at least one knot"));
    }
    let bbox = domain.bounding_box();
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut spacing = Vec::with_capacity(d);
    for (k, (&m, &(lo, hi))) in dims.iter().zip(&bbox).enumerate() {
        if m == 1 {
            axes.push(vec![0.5 * (lo + hi)]);
            spacing.push(None);
            continue;
        }
        if hi <= lo {
            return Err(invalid(
                "knots",
                format!("axis {k} has zero extent but {m} knots were requested"),
            ));
        }
        let step = (hi - lo) / (m - 1) as f64;
        axes.push(
            (0..m)
                .map(|i| if i + 1 == m { hi } else { lo + step * i as f64 })
                .collect(),
        );
        spacing.push(Some(step));
    }

    let total: usize = dims.iter().product();
    let mut strides = vec![1usize; d];
    for k in 1..d {
        strides[k] = strides[k - 1] * dims[k - 1];
    }
    let mut coords = Vec::with_capacity(total * d);
    let mut neighbors = Vec::with_capacity(total);
    for l in 0..total {
        let mut ns = Vec::new();
        for k in 0..d {
            let i = (l / strides[k]) % dims[k];
            coords.push(axes[k][i]);
            if i > 0 {
                ns.push(l - strides[k]);
            }
            if i + 1 < dims[k] {
                ns.push(l + strides[k]);
            }
        }
        ns.sort_unstable();
        neighbors.push(ns);
    }
    Ok(KnotGrid {
        dims: dims.to_vec(),
        coords,
        adjacency: Arc::new(Adjacency::from_neighbors(neighbors)),
        spacing,
    })
}
