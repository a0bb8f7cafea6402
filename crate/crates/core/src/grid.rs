//! Uniform tensor grids and functions sampled on them.
//!
//! Nodes are addressed by a flat index with axis 0 varying fastest.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::geometry::ConvexBody;

/// Interior membership uses `contains(body, x, MEMBERSHIP_MARGIN·h)` so that
/// nodes lying on the boundary belong to the Dirichlet set.
pub const MEMBERSHIP_MARGIN: f64 = 1e-9;

pub const MIN_NODES_PER_AXIS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        let n = origin.len();
        if !(1..=3).contains(&n) || spacing.len() != n || nodes.len() != n {
            bail!(
                Operator,
                "grid: origin, spacing and nodes must share a dimension in 1..3"
            );
        }
        if spacing.iter().any(|h| !(h.is_finite() && *h > 0.0))
            || origin.iter().any(|o| !o.is_finite())
        {
            bail!(Operator, "grid: spacing must be positive and finite");
        }
        if let Some(k) = nodes.iter().find(|&&k| k < MIN_NODES_PER_AXIS) {
            bail!(
                Operator,
                "grid: {k} nodes on an axis, need ≥ {MIN_NODES_PER_AXIS}"
            );
        }
        Ok(GridSpec {
            origin,
            spacing,
            nodes,
        })
    }

    /// Grid with spacing `h` per axis whose nodes include `lo` and `hi` (up to
    /// rounding) and which extends at least `clearance` cells beyond them.
    pub fn covering(lo: &[f64], hi: &[f64], h: &[f64], clearance: usize) -> Result<Self> {
        let n = lo.len();
        let mut origin = Vec::with_capacity(n);
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let cells = ((hi[i] - lo[i]) / h[i] - 1e-9).ceil().max(1.0) as usize;
            let mut pad = clearance.max(1);
            while cells + 1 + 2 * pad < MIN_NODES_PER_AXIS {
                pad += 1;
            }
            origin.push(lo[i] - pad as f64 * h[i]);
            nodes.push(cells + 1 + 2 * pad);
        }
        Self::new(origin, h.to_vec(), nodes)
    }

    /// Grid over the body's bounding box with `cells` cells along its longest
    /// side and equal spacing on every axis.
    pub fn for_body(body: &ConvexBody, cells: usize) -> Result<Self> {
        let (lo, hi) = body.bounding_box();
        let ext = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let h = ext / cells as f64;
        Self::covering(&lo, &hi, &vec![h; lo.len()], 1)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.origin[i] + (self.nodes[i] - 1) as f64 * self.spacing[i])
            .collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut k = [0; 3];
        for i in 0..self.dim() {
            k[i] = flat % self.nodes[i];
            flat /= self.nodes[i];
        }
        k
    }

    pub fn flat_index(&self, k: &[usize]) -> usize {
        let mut f = 0;
        for i in (0..self.dim()).rev() {
            f = f * self.nodes[i] + k[i];
        }
        f
    }

    pub fn coord(&self, flat: usize) -> Vec<f64> {
        let k = self.multi_index(flat);
        (0..self.dim())
            .map(|i| self.origin[i] + k[i] as f64 * self.spacing[i])
            .collect()
    }

    /// Flat index of the neighbour `k + off`, if inside the grid.
    pub fn offset(&self, flat: usize, off: &[isize]) -> Option<usize> {
        let k = self.multi_index(flat);
        let mut m = [0usize; 3];
        for i in 0..self.dim() {
            let v = k[i] as isize + off[i];
            if v < 0 || v >= self.nodes[i] as isize {
                return None;
            }
            m[i] = v as usize;
        }
        Some(self.flat_index(&m[..self.dim()]))
    }

    /// Checks that the box leaves at least one cell between the body and
    /// the outermost nodes.
    pub fn check_clearance(&self, body: &ConvexBody) -> Result<()> {
        if body.dim() != self.dim() {
            bail!(
                Operator,
                "grid dimension {} does not match body dimension {}",
                self.dim(),
                body.dim()
            );
        }
        let (lo, hi) = body.bounding_box();
        let up = self.upper();
        for i in 0..self.dim() {
            let h = self.spacing[i];
            let slack = 1e-9 * h;
            if lo[i] < self.origin[i] + h - slack || hi[i] > up[i] - h + slack {
                bail!(
                    Operator,
                    "grid box does not clear the body by one cell on axis {i}: body [{}, {}], box [{}, {}]",
                    lo[i],
                    hi[i],
                    self.origin[i],
                    up[i]
                );
            }
        }
        Ok(())
    }
}

/// The grid together with its interior (in-body) node set.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub grid: GridSpec,
    /// Flat grid indices of interior nodes, ascending.
    pub interior: Vec<usize>,
    /// Flat grid index to dense interior index.
    lookup: Vec<Option<u32>>,
}

impl Lattice {
    pub fn new(grid: GridSpec, body: &ConvexBody) -> Result<Self> {
        if body.dim() != grid.dim() {
            bail!(
                Operator,
                "grid dimension {} does not match body dimension {}",
                grid.dim(),
                body.dim()
            );
        }
        let margin = MEMBERSHIP_MARGIN * grid.min_spacing();
        let mut lookup = vec![None; grid.len()];
        let mut interior = Vec::new();
        for (f, slot) in lookup.iter_mut().enumerate() {
            if body.contains(&grid.coord(f), margin) {
                *slot = Some(interior.len() as u32);
                interior.push(f);
            }
        }
        Ok(Lattice {
            grid,
            interior,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn index_of(&self, flat: usize) -> Option<usize> {
        self.lookup.get(flat).copied().flatten().map(|i| i as usize)
    }

    pub fn coord(&self, dense: usize) -> Vec<f64> {
        self.grid.coord(self.interior[dense])
    }

    /// Dense index of the interior neighbour `node + off`.
    pub fn neighbour(&self, dense: usize, off: &[isize]) -> Option<usize> {
        self.grid
            .offset(self.interior[dense], off)
            .and_then(|f| self.index_of(f))
    }

    /// Number of distinct interior node positions along each axis.
    pub fn extent(&self) -> Vec<usize> {
        (0..self.dim())
            .map(|i| {
                let ks = self.interior.iter().map(|&f| self.grid.multi_index(f)[i]);
                let (mn, mx) = ks.fold((usize::MAX, 0), |(a, b), k| (a.min(k), b.max(k)));
                if mn == usize::MAX {
                    0
                } else {
                    mx - mn + 1
                }
            })
            .collect()
    }

    /// Dense index of the interior node closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        (0..self.len())
            .min_by(|&a, &b| dist2(&self.coord(a), x).total_cmp(&dist2(&self.coord(b), x)))
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Samples on the interior nodes of a lattice.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub lattice: Arc<Lattice>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(lattice: Arc<Lattice>, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            bail!(
                Operator,
                "grid function has {} values for {} interior nodes",
                values.len(),
                lattice.len()
            );
        }
        if values.iter().any(|v| v.is_nan()) {
            bail!(Operator, "grid function contains NaN");
        }
        Ok(GridFunction { lattice, values })
    }

    pub fn from_fn(lattice: Arc<Lattice>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..lattice.len()).map(|i| f(&lattice.coord(i))).collect();
        GridFunction { lattice, values }
    }

    pub fn constant(lattice: Arc<Lattice>, c: f64) -> Self {
        let n = lattice.len();
        GridFunction {
            lattice,
            values: vec![c; n],
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.lattice.grid.cell_volume()
    }

    /// Grid inner product `h^N Σ u v`.
    pub fn inner(&self, other: &GridFunction) -> f64 {
        self.cell_volume() * crate::linalg::dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Scales to unit grid-L² norm; returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
        n
    }

    pub fn integral(&self) -> f64 {
        self.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_distance(&self, other: &GridFunction) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (self.cell_volume() * s).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Extends by zero to every node of the grid.
    pub fn to_box(&self) -> BoxFunction {
        let g = &self.lattice.grid;
        let mut values = vec![0.0; g.len()];
        for (i, &f) in self.lattice.interior.iter().enumerate() {
            values[f] = self.values[i];
        }
        BoxFunction {
            grid: g.clone(),
            values,
        }
    }
}

/// Samples on every node of a grid box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxFunction {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl BoxFunction {
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coord(i))).collect();
        BoxFunction { grid, values }
    }

    /// Trapezoid-rule integral over the box.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for (f, v) in self.values.iter().enumerate() {
            let k = g.multi_index(f);
            let mut w = 1.0;
            for i in 0..g.dim() {
                if k[i] == 0 || k[i] == g.nodes[i] - 1 {
                    w *= 0.5;
                }
            }
            s += w * v;
        }
        s * g.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cell containing `x` as `(lower corner multi-index, local coordinates)`.
    fn locate(&self, x: &[f64]) -> Option<([usize; 3], [f64; 3])> {
        let g = &self.grid;
        let mut k = [0usize; 3];
        let mut t = [0.0; 3];
        for i in 0..g.dim() {
            let s = (x[i] - g.origin[i]) / g.spacing[i];
            let last = (g.nodes[i] - 1) as f64;
            if !(s >= -1e-9 && s <= last + 1e-9) {
                return None;
            }
            let s = s.clamp(0.0, last);
            let c = (s.floor() as usize).min(g.nodes[i] - 2);
            k[i] = c;
            t[i] = s - c as f64;
        }
        Some((k, t))
    }

    /// Multilinear interpolation; `None` outside the box.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let (k, t) = self.locate(x)?;
        let n = self.grid.dim();
        let mut acc = 0.0;
        for mask in 0..1usize << n {
            let mut w = 1.0;
            let mut m = [0usize; 3];
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    w *= t[i];
                    m[i] = k[i] + 1;
                } else {
                    w *= 1.0 - t[i];
                    m[i] = k[i];
                }
            }
            if w != 0.0 {
                acc += w * self.values[self.grid.flat_index(&m[..n])];
            }
        }
        Some(acc)
    }

    /// Values at the corners of the cell containing `x` that carry nonzero
    /// interpolation weight.
    pub fn cell_corner_values(&self, x: &[f64]) -> Option<Vec<f64>> {
        let (k, t) = self.locate(x)?;
        let n = self.grid.dim();
        let mut out = Vec::new();
        for mask in 0..1usize << n {
            let mut m = [0usize; 3];
            let mut w = 1.0;
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    m[i] = k[i] + 1;
                    w *= t[i];
                } else {
                    m[i] = k[i];
                    w *= 1.0 - t[i];
                }
            }
            if w != 0.0 {
                out.push(self.values[self.grid.flat_index(&m[..n])]);
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_lattice_excludes_boundary_nodes() {
        let body = ConvexBody::interval(0.0, 1.0).unwrap();
        let g = GridSpec::covering(&[0.0], &[1.0], &[0.25], 1).unwrap();
        assert!(g.nodes[0] >= MIN_NODES_PER_AXIS);
        let lat = Lattice::new(g, &body).unwrap();
        let xs: Vec<f64> = (0..lat.len()).map(|i| lat.coord(i)[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
        assert_eq!(lat.extent(), vec![3]);
    }

    #[test]
    fn flat_indexing_round_trips() {
        let g = GridSpec::new(vec![0.0, 0.0, 0.0], vec![1.0, 0.5, 0.25], vec![8, 9, 10]).unwrap();
        for f in [0, 7, 8, 71, 72, 719] {
            let k = g.multi_index(f);
            assert_eq!(g.flat_index(&k), f);
        }
        assert_eq!(g.offset(0, &[-1, 0, 0]), None);
        assert_eq!(g.offset(0, &[1, 1, 1]), Some(1 + 8 + 72));
    }

    #[test]
    fn interpolation_is_exact_for_multilinear_functions() {
        let g = GridSpec::new(vec![-1.0, -1.0], vec![0.25, 0.25], vec![9, 9]).unwrap();
        let f = BoxFunction::from_fn(g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
        let x = [0.13, -0.41];
        let want = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        assert!((f.interpolate(&x).unwrap() - want).abs() < 1e-14);
        assert!(f.interpolate(&[1.5, 0.0]).is_none());
        assert!((f.interpolate(&[1.0, 1.0]).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_integral_of_linear_function() {
        let g = GridSpec::new(vec![0.0], vec![0.125], vec![9]).unwrap();
        let f = BoxFunction::from_fn(g, |x| 3.0 * x[0]);
        assert!((f.integral() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn clearance_is_checked() {
        let body = ConvexBody::interval(0.0, 1.0).unwrap();
        let tight = GridSpec::new(vec![0.0], vec![0.125], vec![9]).unwrap();
        assert!(tight.check_clearance(&body).is_err());
        let ok = GridSpec::covering(&[0.0], &[1.0], &[0.125], 1).unwrap();
        assert!(ok.check_clearance(&body).is_ok());
    }
}
