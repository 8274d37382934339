//! Uniform axis-aligned grids on periodic tori and Neumann boxes.
//!
//! Nodes are vertex-centred. A periodic axis with `n` points has spacing
//! `L / n` and identifies `x = L` with `x = 0`; a box axis with `n` points
//! has spacing `L / (n - 1)` and carries nodes on both walls. Box nodes on a
//! wall own half a control volume along that axis, so the quadrature weights
//! always sum to the physical volume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Boundary treatment along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    NeumannBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    extents: Vec<f64>,
    points: Vec<usize>,
    boundary: Vec<Boundary>,
}

impl GridSpec {
    /// Grid with one boundary kind on every axis.
    pub fn new(extents: &[f64], points: &[usize], boundary: Boundary) -> Result<Self> {
        Self::mixed(extents, points, &vec![boundary; extents.len()])
    }

    pub fn periodic(extents: &[f64], points: &[usize]) -> Result<Self> {
        Self::new(extents, points, Boundary::Periodic)
    }

    pub fn neumann_box(extents: &[f64], points: &[usize]) -> Result<Self> {
        Self::new(extents, points, Boundary::NeumannBox)
    }

    /// Grid with a boundary kind chosen per axis. Mixed grids arise from
    /// reflecting a box along a subset of its axes.
    pub fn mixed(extents: &[f64], points: &[usize], boundary: &[Boundary]) -> Result<Self> {
        let d = extents.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if points.len() != d || boundary.len() != d {
            return Err(Error::InvalidGrid("extents, points and boundary lengths differ".into()));
        }
        if let Some(l) = extents.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGrid(format!("extent {l} must be positive")));
        }
        if let Some(n) = points.iter().find(|n| **n < 4) {
            return Err(Error::InvalidGrid(format!("{n} points per axis, need at least 4")));
        }
        Ok(Self { extents: extents.to_vec(), points: points.to_vec(), boundary: boundary.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn boundary(&self, axis: usize) -> Boundary {
        self.boundary[axis]
    }

    pub fn boundaries(&self) -> &[Boundary] {
        &self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary.iter().all(|b| *b == Boundary::Periodic)
    }

    pub fn is_box(&self) -> bool {
        self.boundary.iter().all(|b| *b == Boundary::NeumannBox)
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let n = self.points[axis] as f64;
        match self.boundary[axis] {
            Boundary::Periodic => self.extents[axis] / n,
            Boundary::NeumannBox => self.extents[axis] / (n - 1.0),
        }
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.spacing(k)).collect()
    }

    /// Product of spacings, the volume of an interior control cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    /// |Omega|.
    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Row-major strides: axis 0 varies slowest.
    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1; d];
        for k in (0..d.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.points[k + 1];
        }
        s
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.points).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for k in (0..self.dim()).rev() {
            out[k] = idx % self.points[k];
            idx /= self.points[k];
        }
        out
    }

    pub fn coordinate(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim() {
            x[k] = m[k] as f64 * self.spacing(k);
        }
        x
    }

    /// True when the node sits on a box wall along `axis`.
    pub fn on_wall(&self, multi: &[usize], axis: usize) -> bool {
        self.boundary[axis] == Boundary::NeumannBox
            && (multi[axis] == 0 || multi[axis] + 1 == self.points[axis])
    }

    /// Quadrature weight (control volume) of every node.
    pub fn weights(&self) -> Vec<f64> {
        let cv = self.cell_volume();
        (0..self.len())
            .map(|idx| {
                let m = self.multi_index(idx);
                (0..self.dim()).fold(cv, |w, k| if self.on_wall(&m, k) { 0.5 * w } else { w })
            })
            .collect()
    }

    /// Neighbour index one step along `axis` in direction `dir` (+1 or -1).
    /// Returns `None` when stepping off a box wall.
    pub fn neighbor(&self, multi: &[usize], axis: usize, dir: isize) -> Option<usize> {
        let n = self.points[axis] as isize;
        let j = multi[axis] as isize + dir;
        let j = match self.boundary[axis] {
            Boundary::Periodic => j.rem_euclid(n),
            Boundary::NeumannBox if (0..n).contains(&j) => j,
            Boundary::NeumannBox => return None,
        };
        let mut m = [0; MAX_DIM];
        m[..self.dim()].copy_from_slice(&multi[..self.dim()]);
        m[axis] = j as usize;
        Some(self.index(&m[..self.dim()]))
    }

    /// Bitmask with bit `k` set when axis `k` is a Neumann box axis.
    pub fn boundary_mask(&self) -> u8 {
        self.boundary
            .iter()
            .enumerate()
            .fold(0, |m, (k, b)| if *b == Boundary::NeumannBox { m | (1 << k) } else { m })
    }

    pub fn from_boundary_mask(extents: &[f64], points: &[usize], mask: u8) -> Result<Self> {
        let b: Vec<Boundary> = (0..extents.len())
            .map(|k| if mask & (1 << k) != 0 { Boundary::NeumannBox } else { Boundary::Periodic })
            .collect();
        Self::mixed(extents, points, &b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::periodic(&[1.0], &[3]).is_err());
        assert!(GridSpec::periodic(&[0.0], &[8]).is_err());
        assert!(GridSpec::periodic(&[1.0; 4], &[4; 4]).is_err());
        assert!(GridSpec::periodic(&[1.0, 1.0], &[4]).is_err());
    }

    #[test]
    fn spacing_by_boundary_kind() {
        let t = GridSpec::periodic(&[2.0], &[8]).unwrap();
        assert_eq!(t.spacing(0), 0.25);
        let b = GridSpec::neumann_box(&[2.0], &[9]).unwrap();
        assert_eq!(b.spacing(0), 0.25);
    }

    #[test]
    fn weights_sum_to_volume() {
        for g in [
            GridSpec::periodic(&[1.0, 2.0], &[8, 6]).unwrap(),
            GridSpec::neumann_box(&[1.0, 2.0, 0.5], &[5, 6, 4]).unwrap(),
            GridSpec::mixed(&[1.5, 1.0], &[6, 7], &[Boundary::Periodic, Boundary::NeumannBox]).unwrap(),
        ] {
            let s: f64 = g.weights().iter().sum();
            assert!((s - g.volume()).abs() < 1e-12 * g.volume());
        }
    }

    #[test]
    fn index_roundtrip_and_neighbors() {
        let g = GridSpec::mixed(&[1.0, 1.0], &[4, 5], &[Boundary::Periodic, Boundary::NeumannBox]).unwrap();
        for idx in 0..g.len() {
            let m = g.multi_index(idx);
            assert_eq!(g.index(&m[..2]), idx);
        }
        assert_eq!(g.neighbor(&[0, 0], 0, -1), Some(g.index(&[3, 0])));
        assert_eq!(g.neighbor(&[0, 0], 1, -1), None);
        assert_eq!(g.neighbor(&[0, 4], 1, 1), None);
        assert_eq!(g.boundary_mask(), 0b10);
    }
}
