//! Time grids and grid-sampled vector trajectories.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative distance (in units of the step) under which a required node
/// replaces the nearest lattice node instead of being inserted next to it.
const SNAP_FRACTION: f64 = 1e-6;

/// An ordered set of nodes `0 = s_0 < s_1 < ... < s_M = t_max`.
///
/// Built from a uniform lattice of step `h` into which every required
/// abscissa (the nonlocal horizon `t0`, point-mass locations, seminorm
/// horizons, density breakpoints) is inserted as an exact node.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    t_max: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn uniform(t_max: f64, h: f64) -> Result<Self> {
        Self::with_nodes(t_max, h, &[])
    }

    /// Uniform lattice of step `h` on `[0, t_max]` with `required` snapped in.
    pub fn with_nodes(t_max: f64, h: f64, required: &[f64]) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::config(format!("t_max must be finite and positive, got {t_max}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config(format!("grid step h must be finite and positive, got {h}")));
        }
        if h > t_max {
            return Err(Error::config(format!("grid step h = {h} exceeds t_max = {t_max}")));
        }
        let count = (t_max / h + 1e-9).floor() as usize;
        let mut nodes: Vec<f64> = (0..=count).map(|i| i as f64 * h).collect();
        let snap = SNAP_FRACTION * h;
        if t_max - nodes[count] <= snap {
            nodes[count] = t_max;
        } else {
            nodes.push(t_max);
        }
        let mut pinned = vec![false; nodes.len()];
        pinned[0] = true;
        *pinned.last_mut().unwrap() = true;

        for &r in required {
            if !r.is_finite() || r < 0.0 || r > t_max {
                return Err(Error::config(format!(
                    "required node {r} lies outside [0, {t_max}]"
                )));
            }
            let pos = nodes.partition_point(|&s| s < r);
            if pos < nodes.len() && nodes[pos] == r {
                pinned[pos] = true;
                continue;
            }
            let mut best: Option<usize> = None;
            for cand in [pos.checked_sub(1), Some(pos)].into_iter().flatten() {
                if cand < nodes.len() && (nodes[cand] - r).abs() <= snap && !pinned[cand] {
                    best = Some(cand);
                }
            }
            match best {
                Some(i) => {
                    nodes[i] = r;
                    pinned[i] = true;
                }
                None => {
                    nodes.insert(pos, r);
                    pinned.insert(pos, true);
                }
            }
        }
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        Ok(Grid { t_max, h, nodes })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node equal to `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        let pos = self.nodes.partition_point(|&s| s < t - tol);
        (pos < self.nodes.len() && (self.nodes[pos] - t).abs() <= tol).then_some(pos)
    }

    /// Like [`Grid::index_of`], but a missing node is a configuration error.
    pub fn require_node(&self, t: f64, what: &str) -> Result<usize> {
        self.index_of(t)
            .ok_or_else(|| Error::config(format!("{what} = {t} is not a grid node")))
    }
}

/// A vector-valued function sampled on a grid: row `i` holds
/// `(x_1(s_i), ..., x_N(s_i))`.
///
/// Component indices in the Rust API are zero-based; component `j` is the
/// mathematical component `x_{j+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Arc<Grid>,
    n_components: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(grid: Arc<Grid>, n_components: usize) -> Self {
        let values = vec![0.0; grid.len() * n_components];
        Trajectory {
            grid,
            n_components,
            values,
        }
    }

    pub fn from_fn(
        grid: Arc<Grid>,
        n_components: usize,
        mut f: impl FnMut(f64, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * n_components);
        for &t in grid.nodes() {
            for j in 0..n_components {
                values.push(f(t, j));
            }
        }
        Self::from_values(grid, n_components, values)
    }

    /// Row-major values, `grid.len()` rows of `n_components` entries.
    pub fn from_values(grid: Arc<Grid>, n_components: usize, values: Vec<f64>) -> Result<Self> {
        if n_components == 0 {
            return Err(Error::config("trajectory needs at least one component"));
        }
        if values.len() != grid.len() * n_components {
            return Err(Error::config(format!(
                "trajectory has {} values, expected {} x {}",
                values.len(),
                grid.len(),
                n_components
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Internal(format!(
                "non-finite trajectory entry at node {}, component {}",
                k / n_components,
                k % n_components
            )));
        }
        Ok(Trajectory {
            grid,
            n_components,
            values,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_components..(i + 1) * self.n_components]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_components)
    }

    pub fn value(&self, i: usize, component: usize) -> f64 {
        self.values[i * self.n_components + component]
    }

    pub fn component(&self, component: usize) -> Vec<f64> {
        self.rows().map(|r| r[component]).collect()
    }

    /// The first `k` components.
    pub fn restrict_components(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_components {
            return Err(Error::Index {
                index: k,
                len: self.n_components,
            });
        }
        let values = self.rows().flat_map(|r| r[..k].iter().copied()).collect();
        Ok(Trajectory {
            grid: Arc::clone(&self.grid),
            n_components: k,
            values,
        })
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Trajectory, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::from_values(Arc::clone(&self.grid), self.n_components, values)
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Self> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Entrywise maximum absolute difference.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
    }

    fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        if self.n_components != other.n_components || self.grid.nodes() != other.grid.nodes() {
            return Err(Error::config(
                "trajectories live on different grids or component counts",
            ));
        }
        Ok(())
    }
}
