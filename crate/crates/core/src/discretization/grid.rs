use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DomainGeometry;

/// Uniform partition of one segment; both endpoints are nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub cells: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl Segment {
    fn new(start: f64, end: f64, target_h: f64) -> Self {
        let len = end - start;
        // Guard against ratios such as 0.2 / 0.05 = 4.000000000000001.
        let cells = ((len / target_h) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = len / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|i| start + i as f64 * h).collect();
        nodes[cells] = end;
        Self {
            start,
            end,
            cells,
            h,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trapezoidal weights.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.h; self.len()];
        w[0] *= 0.5;
        w[self.cells] *= 0.5;
        w
    }
}

/// Nodes on `[0, L1]`, `[L1, L2]`, `[L2, L3]`. Interface nodes appear in both
/// adjacent segments.
///
/// Fields on Ω are stored as one vector: the left segment's nodes followed by
/// the right segment's nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialGrid {
    pub left: Segment,
    pub middle: Segment,
    pub right: Segment,
}

impl SpatialGrid {
    pub fn omega_len(&self) -> usize {
        self.left.len() + self.right.len()
    }

    /// Offset of the right segment inside an Ω vector.
    pub fn right_offset(&self) -> usize {
        self.left.len()
    }

    pub fn omega_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        self.left.nodes.iter().chain(self.right.nodes.iter()).copied()
    }

    pub fn omega_weights(&self) -> Vec<f64> {
        let mut w = self.left.weights();
        w.extend(self.right.weights());
        w
    }

    pub fn h_min(&self) -> f64 {
        self.left.h.min(self.middle.h).min(self.right.h)
    }

    pub fn h_max(&self) -> f64 {
        self.left.h.max(self.middle.h).max(self.right.h)
    }

    /// Splits an Ω vector into its left and right segment parts.
    pub fn split<'a>(&self, field: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        field.split_at(self.right_offset())
    }

    pub fn split_mut<'a>(&self, field: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64]) {
        field.split_at_mut(self.right_offset())
    }
}

/// Uniform nodes on `[0, 1]` for the delay variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoGrid {
    pub nodes: Vec<f64>,
    pub d_rho: f64,
}

impl RhoGrid {
    pub fn new(n_rho: usize) -> Result<Self> {
        if n_rho < 2 {
            return Err(Error::Resolution(format!("n_rho must be at least 2, got {n_rho}")));
        }
        let d_rho = 1.0 / (n_rho - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_rho).map(|j| j as f64 * d_rho).collect();
        nodes[n_rho - 1] = 1.0;
        Ok(Self { nodes, d_rho })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        let n = self.len();
        let mut w = vec![self.d_rho; n];
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
        w
    }
}

/// Builds the three-segment grid (each segment gets ⌈length / target_h⌉ cells)
/// and the ρ-grid with `n_rho` nodes.
pub fn build_grid(geom: &DomainGeometry, target_h: f64, n_rho: usize) -> Result<(SpatialGrid, RhoGrid)> {
    geom.check()?;
    let shortest = geom.l1.min(geom.l2 - geom.l1).min(geom.l3 - geom.l2);
    if !(target_h > 0.0) || target_h >= shortest {
        return Err(Error::Resolution(format!(
            "target_h = {target_h} must be positive and below the shortest segment ({shortest})"
        )));
    }
    let grid = SpatialGrid {
        left: Segment::new(0.0, geom.l1, target_h),
        middle: Segment::new(geom.l1, geom.l2, target_h),
        right: Segment::new(geom.l2, geom.l3, target_h),
    };
    Ok((grid, RhoGrid::new(n_rho)?))
}
