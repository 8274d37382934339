//! Per-node conductivity tensors with ellipticity and boundary-eigenvector
//! validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, MAX_DIM};

/// Symmetric tensors must agree with their transpose to this level.
pub const SYMMETRY_TOL: f64 = 1e-14;
/// Boundary eigenvector defect allowed by the (EV) check.
pub const EV_TOL: f64 = 1e-12;
/// Fibre directions must be unit vectors to this level.
pub const UNIT_TOL: f64 = 1e-12;

/// Real d x d tensor, stored in the top-left block of a 3 x 3 array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub dim: usize,
    pub m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Tensor {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, m: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::isotropic(dim, 1.0)
    }

    pub fn isotropic(dim: usize, k: f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.m[i][i] = k;
        }
        t
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut t = Self::zeros(diag.len());
        for (i, v) in diag.iter().enumerate() {
            t.m[i][i] = *v;
        }
        t
    }

    /// Build from row slices; rows must be `dim` long.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 || d > MAX_DIM || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("tensor must be a square d x d array, d <= 3".into()));
        }
        let mut t = Self::zeros(d);
        for (i, r) in rows.iter().enumerate() {
            t.m[i][..d].copy_from_slice(r);
        }
        Ok(t)
    }

    /// `k_t I + (k_l - k_t) a a^T`.
    pub fn fiber(dim: usize, k_l: f64, k_t: f64, a: &[f64]) -> Self {
        let mut t = Self::isotropic(dim, k_t);
        for i in 0..dim {
            for j in 0..dim {
                t.m[i][j] += (k_l - k_t) * a[i] * a[j];
            }
        }
        t
    }

    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.m[i][j] * xi[i] * xi[j]).sum::<f64>()).sum()
    }

    pub fn apply(&self, v: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.m[i][j] * v[j]).sum();
        }
        out
    }

    pub fn symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.m[i][j] - self.m[j][i]).abs());
            }
        }
        worst
    }

    /// Is diagonal in the canonical basis.
    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.m[i][j] == 0.0))
    }

    /// Smallest and largest Rayleigh quotients over the probe set.
    pub fn probe_bounds(&self) -> (f64, f64) {
        probe_set(self.dim).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), xi| {
            let q = self.quadratic_form(xi) / xi.iter().map(|x| x * x).sum::<f64>();
            (lo.min(q), hi.max(q))
        })
    }
}

/// Canonical basis vectors plus every {-1, 0, 1} vector with at least two
/// nonzero entries, up to sign. For symmetric tensors the Rayleigh quotients
/// over this set bracket the spectrum to within a factor of sqrt(d).
pub fn probe_set(dim: usize) -> Vec<[f64; MAX_DIM]> {
    let mut out = Vec::new();
    let total = 3usize.pow(dim as u32);
    for code in 0..total {
        let mut xi = [0.0; MAX_DIM];
        let mut c = code;
        for x in xi.iter_mut().take(dim) {
            *x = (c % 3) as f64 - 1.0;
            c /= 3;
        }
        // keep one representative of {xi, -xi}: first nonzero entry positive
        match xi[..dim].iter().find(|v| **v != 0.0) {
            Some(v) if *v > 0.0 => out.push(xi),
            _ => {}
        }
    }
    out
}

/// Optional fibre description the tensors were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberData {
    pub k_l: Vec<f64>,
    pub k_t: Vec<f64>,
    pub direction: Vec<[f64; MAX_DIM]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityTensorField {
    grid: GridSpec,
    tensors: Vec<Tensor>,
    lower: f64,
    upper: f64,
    fibers: Option<FiberData>,
}

impl ConductivityTensorField {
    /// Validate arbitrary per-node tensors: symmetry, (UE) on the probe set
    /// and, on box walls, (EV).
    pub fn from_tensors(grid: &GridSpec, tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} tensors for {} grid points",
                tensors.len(),
                grid.len()
            )));
        }
        let mut lower = f64::INFINITY;
        let mut upper: f64 = 0.0;
        for (cell, t) in tensors.iter().enumerate() {
            if t.dim != grid.dim() {
                return Err(Error::InvalidArgument("tensor dimension does not match grid".into()));
            }
            if t.m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::EllipticityViolation { cell, detail: "non-finite entry".into() });
            }
            let defect = t.symmetry_defect();
            if defect > SYMMETRY_TOL {
                return Err(Error::NonSymmetric { cell, defect });
            }
            let (lo, hi) = t.probe_bounds();
            if lo <= 0.0 {
                return Err(Error::EllipticityViolation {
                    cell,
                    detail: format!("probe quotient {lo:.3e} is not positive"),
                });
            }
            lower = lower.min(lo);
            upper = upper.max(hi);
        }
        let field = Self { grid: grid.clone(), tensors, lower, upper, fibers: None };
        field.check_ev()?;
        Ok(field)
    }

    pub fn constant(grid: &GridSpec, t: Tensor) -> Result<Self> {
        Self::from_tensors(grid, vec![t; grid.len()])
    }

    pub fn isotropic(grid: &GridSpec, k: f64) -> Result<Self> {
        Self::constant(grid, Tensor::isotropic(grid.dim(), k))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensor(&self, idx: usize) -> &Tensor {
        &self.tensors[idx]
    }

    /// Ellipticity bounds (lower, upper).
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn fibers(&self) -> Option<&FiberData> {
        self.fibers.as_ref()
    }

    /// The common tensor if every node carries the same one.
    pub fn as_constant(&self) -> Option<Tensor> {
        let first = self.tensors[0];
        self.tensors.iter().all(|t| *t == first).then_some(first)
    }

    /// Largest (EV) defect over box-wall nodes.
    pub fn ev_defect(&self) -> f64 {
        let d = self.grid.dim();
        let mut worst: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let m = self.grid.multi_index(idx);
            for k in 0..d {
                if self.grid.on_wall(&m[..d], k) {
                    worst = worst.max(ev_defect_at(&self.tensors[idx], k));
                }
            }
        }
        worst
    }

    fn check_ev(&self) -> Result<()> {
        let d = self.grid.dim();
        for idx in 0..self.grid.len() {
            let m = self.grid.multi_index(idx);
            for k in 0..d {
                if self.grid.on_wall(&m[..d], k) {
                    let defect = ev_defect_at(&self.tensors[idx], k);
                    if defect > EV_TOL {
                        return Err(Error::EvViolation { cell: idx, defect });
                    }
                }
            }
        }
        Ok(())
    }
}

/// `|sigma n - <sigma n, n> n|` for the axis normal `n = e_axis`.
fn ev_defect_at(t: &Tensor, axis: usize) -> f64 {
    let mut n = [0.0; MAX_DIM];
    n[axis] = 1.0;
    let sn = t.apply(&n);
    let along = sn[axis];
    (0..t.dim)
        .map(|i| {
            let r = sn[i] - along * n[i];
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Fibre-based tensors `k_t I + (k_l - k_t) a (x) a` at every node.
pub fn make_conductivity(
    grid: &GridSpec,
    k_l: &[f64],
    k_t: &[f64],
    direction: &[[f64; MAX_DIM]],
) -> Result<ConductivityTensorField> {
    let n = grid.len();
    if k_l.len() != n || k_t.len() != n || direction.len() != n {
        return Err(Error::InvalidArgument("fibre data length does not match grid".into()));
    }
    let d = grid.dim();
    let mut tensors = Vec::with_capacity(n);
    for cell in 0..n {
        let (l, t) = (k_l[cell], k_t[cell]);
        if !(l > 0.0 && t > 0.0 && l.is_finite() && t.is_finite()) {
            return Err(Error::EllipticityViolation {
                cell,
                detail: format!("conductances k_l = {l}, k_t = {t} must be positive"),
            });
        }
        let a = &direction[cell];
        let norm = a[..d].iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL || a[d..].iter().any(|x| *x != 0.0) {
            return Err(Error::InvalidArgument(format!("fibre direction at cell {cell} is not a unit vector")));
        }
        tensors.push(Tensor::fiber(d, l, t, a));
    }
    let mut field = ConductivityTensorField::from_tensors(grid, tensors)?;
    let lo = k_l.iter().chain(k_t).copied().fold(f64::INFINITY, f64::min);
    let hi = k_l.iter().chain(k_t).copied().fold(0.0, f64::max);
    field.lower = lo;
    field.upper = hi;
    field.fibers = Some(FiberData { k_l: k_l.to_vec(), k_t: k_t.to_vec(), direction: direction.to_vec() });
    Ok(field)
}

/// Uniform fibre tensors.
pub fn make_uniform_conductivity(
    grid: &GridSpec,
    k_l: f64,
    k_t: f64,
    direction: [f64; MAX_DIM],
) -> Result<ConductivityTensorField> {
    let n = grid.len();
    make_conductivity(grid, &vec![k_l; n], &vec![k_t; n], &vec![direction; n])
}
