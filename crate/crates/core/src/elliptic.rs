//! Zero-flux elliptic operators `-div(sigma grad u)` and the mean-zero
//! inverse of their sum.
//!
//! The discretization is built from a quadratic energy. Every grid cell
//! (the box spanned by `2^d` neighbouring nodes) contributes, at each of its
//! corners, `|cell| / 2^d * g^T S g`, where `g` collects the edge differences
//! leaving that corner and `S` is the corner tensor with its diagonal
//! replaced by the harmonic mean of the two edge end-point values (a
//! positive diagonal congruence, so `S` stays positive definite). The
//! stiffness matrix `K` is the Hessian of that energy, the operator is
//! `L = W^{-1} K` with `W` the nodal quadrature weights. Consequences:
//!
//! * `K` is symmetric and positive semidefinite with kernel the constants,
//!   so `L` is self-adjoint in the weighted inner product and conserves
//!   flux (`sum W L u = 0`).
//! * On box walls only interior cells contribute, which for diagonal
//!   tensors coincides with the mirrored-ghost Neumann stencil.
//! * For constant tensors on a torus the symbol is
//!   `sum_k s_kk (2 - 2 cos t_k) / h_k^2 + sum_{k != l} s_kl sin t_k sin t_l / (h_k h_l)`.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conductivity::ConductivityTensorField;
use crate::error::{Error, Result};
use crate::field::{project_mean_zero, ScalarField};
use crate::grid::{Boundary, GridSpec, MAX_DIM};
use crate::linalg::{conjugate_gradient, SparseLu};
use crate::sparse::CsrMatrix;

/// Default cap on grid points for explicit assembly and sparse factorization.
pub const DEFAULT_ASSEMBLY_CAP: usize = 1 << 16;
/// Default cap on grid points for dense spectral work.
pub const DEFAULT_DENSE_CAP: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumSolveMethod {
    /// Sparse LU of the bordered system under the assembly cap, CG above it.
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol_lin: f64,
    /// CG iteration cap as a multiple of the number of grid points.
    pub max_iter_factor: usize,
    pub method: SumSolveMethod,
    pub assembly_cap: usize,
    pub dense_cap: usize,
    pub gmres_restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_lin: 1e-10,
            max_iter_factor: 10,
            method: SumSolveMethod::Direct,
            assembly_cap: DEFAULT_ASSEMBLY_CAP,
            dense_cap: DEFAULT_DENSE_CAP,
            gmres_restart: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipticKind {
    Intra,
    Extra,
    Sum,
}

/// One corner contribution: edge differences `u[nb[k]] - u[origin]` feed
/// the quadratic form `coeff`.
#[derive(Debug, Clone)]
struct CornerTerm {
    origin: usize,
    nb: [usize; MAX_DIM],
    coeff: [[f64; MAX_DIM]; MAX_DIM],
}

#[derive(Debug)]
pub struct EllipticOperator {
    grid: GridSpec,
    kind: EllipticKind,
    weights: Vec<f64>,
    corners: Vec<CornerTerm>,
    stiffness: Option<CsrMatrix>,
    diag: Vec<f64>,
    config: SolverConfig,
    bordered: OnceLock<std::result::Result<SparseLu, String>>,
}

impl EllipticOperator {
    pub fn new(kind: EllipticKind, sigma: &ConductivityTensorField, config: SolverConfig) -> Self {
        let grid = sigma.grid().clone();
        let corners = corner_terms(sigma);
        Self::from_corners(grid, kind, corners, config)
    }

    /// `A_i + A_e` from the two operators' energies.
    pub fn sum(a: &EllipticOperator, b: &EllipticOperator) -> Result<Self> {
        if a.grid != b.grid {
            return Err(Error::GridMismatch);
        }
        let mut corners = a.corners.clone();
        corners.extend(b.corners.iter().cloned());
        Ok(Self::from_corners(a.grid.clone(), EllipticKind::Sum, corners, a.config))
    }

    fn from_corners(grid: GridSpec, kind: EllipticKind, corners: Vec<CornerTerm>, config: SolverConfig) -> Self {
        let weights = grid.weights();
        let n = grid.len();
        let d = grid.dim();
        let mut diag = vec![0.0; n];
        for c in &corners {
            for k in 0..d {
                diag[c.nb[k]] += c.coeff[k][k];
                for l in 0..d {
                    diag[c.origin] += c.coeff[k][l];
                }
            }
        }
        let stiffness = (n <= config.assembly_cap).then(|| stiffness_from_corners(n, d, &corners));
        Self { grid, kind, weights, corners, stiffness, diag, config, bordered: OnceLock::new() }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> EllipticKind {
        self.kind
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Symmetric stiffness matrix `K`, present under the assembly cap.
    pub fn stiffness(&self) -> Option<&CsrMatrix> {
        self.stiffness.as_ref()
    }

    pub(crate) fn stiffness_diag(&self) -> &[f64] {
        &self.diag
    }

    /// `K u` evaluated from the corner terms.
    pub fn apply_stiffness(&self, u: &[Complex64]) -> Vec<Complex64> {
        let d = self.grid.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        for c in &self.corners {
            let mut delta = [Complex64::new(0.0, 0.0); MAX_DIM];
            for k in 0..d {
                delta[k] = u[c.nb[k]] - u[c.origin];
            }
            let mut total = Complex64::new(0.0, 0.0);
            for k in 0..d {
                let r: Complex64 = (0..d).map(|l| delta[l] * c.coeff[k][l]).sum();
                out[c.nb[k]] += r;
                total += r;
            }
            out[c.origin] -= total;
        }
        out
    }

    fn apply_stiffness_fast(&self, u: &[Complex64]) -> Vec<Complex64> {
        match &self.stiffness {
            Some(k) => k.mul_vec(u),
            None => self.apply_stiffness(u),
        }
    }

    /// Matrix-free `L f = W^{-1} K f`.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let ku = self.apply_stiffness(f.values());
        ScalarField::new(self.grid.clone(), self.unweight(ku))
    }

    pub(crate) fn apply_raw(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.unweight(self.apply_stiffness_fast(u))
    }

    fn unweight(&self, mut v: Vec<Complex64>) -> Vec<Complex64> {
        for (x, w) in v.iter_mut().zip(&self.weights) {
            *x /= w;
        }
        v
    }

    /// Explicit sparse rows of `L`.
    pub fn assemble(&self) -> Result<CsrMatrix> {
        let n = self.grid.len();
        let k = self.stiffness.as_ref().ok_or(Error::TooLargeToAssemble { points: n, cap: self.config.assembly_cap })?;
        let inv: Vec<f64> = self.weights.iter().map(|w| 1.0 / w).collect();
        Ok(k.scale_rows(&inv))
    }

    /// Mean-zero solution of `L u = f` for mean-zero `f`.
    pub fn solve_mean_zero(&self, f: &ScalarField) -> Result<ScalarField> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let rel = f.relative_mean();
        if rel > 1e-10 {
            return Err(Error::NotMeanZero { relative_mean: rel });
        }
        let pf = project_mean_zero(f);
        let u = self.solve_raw(pf.values())?;
        ScalarField::new(self.grid.clone(), u)
    }

    /// Solve with a right-hand side already known to be mean-zero.
    pub(crate) fn solve_raw(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.grid.len();
        let rhs: Vec<Complex64> = f.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        if rhs.iter().all(|v| v.norm() == 0.0) {
            return Ok(vec![Complex64::new(0.0, 0.0); n]);
        }
        if self.config.method == SumSolveMethod::Direct && self.stiffness.is_some() {
            let lu = self
                .bordered
                .get_or_init(|| self.factor_bordered().map_err(|e| e.to_string()))
                .as_ref()
                .map_err(|e| Error::Factorization(e.clone()))?;
            let mut b = rhs;
            b.push(Complex64::new(0.0, 0.0));
            let mut x = lu.solve(&b);
            x.truncate(n);
            self.project(&mut x);
            return Ok(x);
        }
        let w = &self.weights;
        let measure = |r: &[Complex64]| r.iter().zip(w).map(|(v, w)| v.norm_sqr() / w).sum::<f64>().sqrt();
        let (x, _) = conjugate_gradient(
            |u| self.apply_stiffness_fast(u),
            &self.diag,
            &rhs,
            self.config.tol_lin,
            self.config.max_iter_factor * n,
            measure,
            |x| self.project(x),
        )?;
        Ok(x)
    }

    pub(crate) fn project(&self, x: &mut [Complex64]) {
        let vol: f64 = self.weights.iter().sum();
        let m: Complex64 = x.iter().zip(&self.weights).map(|(v, w)| v * w).sum::<Complex64>() / vol;
        x.iter_mut().for_each(|v| *v -= m);
    }

    /// `[[K, rho w], [rho w^T, 0]]`: the multiplier row pins the weighted mean.
    fn factor_bordered(&self) -> Result<SparseLu> {
        let k = self.stiffness.as_ref().expect("checked by caller");
        let n = self.grid.len();
        let rho = border_scale(&self.diag, &self.weights);
        let mut t: Vec<(usize, usize, Complex64)> =
            k.triplets().into_iter().map(|(r, c, v)| (r, c, Complex64::new(v, 0.0))).collect();
        for (i, w) in self.weights.iter().enumerate() {
            t.push((i, n, Complex64::new(rho * w, 0.0)));
            t.push((n, i, Complex64::new(rho * w, 0.0)));
        }
        SparseLu::factor(n + 1, &t)
    }
}

/// Scale for the mean-pinning border so its entries match the stiffness.
pub(crate) fn border_scale(diag: &[f64], weights: &[f64]) -> f64 {
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let wmax = weights.iter().copied().fold(0.0, f64::max);
    if wmax > 0.0 && dmax > 0.0 {
        dmax / wmax
    } else {
        1.0
    }
}

fn stiffness_from_corners(n: usize, d: usize, corners: &[CornerTerm]) -> CsrMatrix {
    let mut t = Vec::with_capacity(corners.len() * 4 * d * d);
    for c in corners {
        for k in 0..d {
            for l in 0..d {
                let b = c.coeff[k][l];
                t.push((c.nb[k], c.nb[l], b));
                t.push((c.nb[k], c.origin, -b));
                t.push((c.origin, c.nb[l], -b));
                t.push((c.origin, c.origin, b));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

fn corner_terms(sigma: &ConductivityTensorField) -> Vec<CornerTerm> {
    let g = sigma.grid();
    let d = g.dim();
    let h = g.spacings();
    let share = g.cell_volume() / (1usize << d) as f64;
    let mut out = Vec::new();
    for lower in 0..g.len() {
        let base = g.multi_index(lower);
        // a cell hangs off every node except the last layer of a box axis
        if (0..d).any(|k| g.boundary(k) == Boundary::NeumannBox && base[k] + 1 == g.points()[k]) {
            continue;
        }
        for bits in 0..(1usize << d) {
            let mut corner = base;
            for k in 0..d {
                if bits & (1 << k) != 0 {
                    corner[k] = (corner[k] + 1) % g.points()[k];
                }
            }
            let origin = g.index(&corner[..d]);
            let t = sigma.tensor(origin);
            let mut nb = [0; MAX_DIM];
            let mut sign = [1.0; MAX_DIM];
            let mut scale = [1.0; MAX_DIM];
            for k in 0..d {
                let dir = if bits & (1 << k) != 0 { -1 } else { 1 };
                nb[k] = g.neighbor(&corner[..d], k, dir).expect("cell corner has in-cell neighbours");
                sign[k] = dir as f64;
                let own = t.m[k][k];
                let other = sigma.tensor(nb[k]).m[k][k];
                scale[k] = (harmonic(own, other) / own).sqrt();
            }
            let mut coeff = [[0.0; MAX_DIM]; MAX_DIM];
            for k in 0..d {
                for l in 0..d {
                    coeff[k][l] = share * scale[k] * t.m[k][l] * scale[l] * sign[k] * sign[l] / (h[k] * h[l]);
                }
            }
            out.push(CornerTerm { origin, nb, coeff });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductivity::{make_conductivity, Tensor};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    /// Smoothly varying, boundary-tangent fibres on a box.
    pub(crate) fn variable_box_sigma(n: usize) -> ConductivityTensorField {
        let g = GridSpec::neumann_box(&[1.0, 1.0], &[n, n]).unwrap();
        let kl: Vec<f64> = (0..g.len()).map(|i| 1.5 + 0.5 * (3.0 * g.coordinate(i)[0]).sin()).collect();
        let kt: Vec<f64> = (0..g.len()).map(|i| 0.4 + 0.2 * (2.0 * g.coordinate(i)[1]).cos()).collect();
        let dir: Vec<[f64; 3]> = (0..g.len())
            .map(|i| {
                let m = g.multi_index(i);
                let wall_x = m[0] == 0 || m[0] == n - 1;
                let wall_y = m[1] == 0 || m[1] == n - 1;
                let x = g.coordinate(i);
                let ang = if wall_x && wall_y {
                    0.0
                } else if wall_x {
                    PI / 2.0
                } else if wall_y {
                    0.0
                } else {
                    0.8 * (x[0] + 2.0 * x[1])
                };
                [ang.cos(), ang.sin(), 0.0]
            })
            .collect();
        // corners can only be tangent to both walls when the tensor is isotropic there
        let kl: Vec<f64> = (0..g.len())
            .map(|i| {
                let m = g.multi_index(i);
                let corner = (m[0] == 0 || m[0] == n - 1) && (m[1] == 0 || m[1] == n - 1);
                if corner {
                    kt[i]
                } else {
                    kl[i]
                }
            })
            .collect();
        make_conductivity(&g, &kl, &kt, &dir).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let s = variable_box_sigma(7);
        let op = EllipticOperator::new(EllipticKind::Intra, &s, SolverConfig::default());
        let out = op.apply(&ScalarField::constant(s.grid(), c(2.5))).unwrap();
        assert!(out.max_abs() < 1e-12 * 2.5 * op.diag.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn one_dimensional_torus_matrix() {
        let g = GridSpec::periodic(&[1.0], &[4]).unwrap();
        let s = ConductivityTensorField::isotropic(&g, 1.0).unwrap();
        let op = EllipticOperator::new(EllipticKind::Intra, &s, SolverConfig::default());
        let m = op.assemble().unwrap().to_dense();
        let h2 = 0.25f64 * 0.25;
        let expected = [2.0, -1.0, 0.0, -1.0];
        for (r, row) in m.iter().enumerate() {
            for (cidx, v) in row.iter().enumerate() {
                let e = expected[(cidx + 4 - r) % 4] / h2;
                assert!((v - e).abs() < 1e-12, "{r} {cidx} {v} {e}");
            }
        }
    }

    #[test]
    fn neumann_rows_sum_to_zero() {
        let g = GridSpec::neumann_box(&[1.0], &[4]).unwrap();
        let kl = [1.0, 2.0, 0.5, 3.0];
        let s = make_conductivity(&g, &kl, &kl, &[[1.0, 0.0, 0.0]; 4]).unwrap();
        let op = EllipticOperator::new(EllipticKind::Intra, &s, SolverConfig::default());
        for row in op.assemble().unwrap().to_dense() {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn face_coefficients_are_harmonic_means() {
        let g = GridSpec::periodic(&[4.0], &[4]).unwrap();
        let k = [1.0, 3.0, 2.0, 6.0];
        let s = make_conductivity(&g, &k, &k, &[[1.0, 0.0, 0.0]; 4]).unwrap();
        let op = EllipticOperator::new(EllipticKind::Intra, &s, SolverConfig::default());
        let kmat = op.stiffness().unwrap();
        // h = 1: off-diagonal stiffness between nodes 0 and 1 is -harm(1, 3)
        assert!((kmat.get(0, 1) + 1.5).abs() < 1e-14);
        assert!((kmat.get(2, 3) + 3.0).abs() < 1e-14);
    }

    #[test]
    fn torus_cosine_eigenfunction() {
        let l = 2.0;
        let err = |n: usize| {
            let g = GridSpec::periodic(&[l], &[n]).unwrap();
            let s = ConductivityTensorField::isotropic(&g, 1.0).unwrap();
            let op = EllipticOperator::new(EllipticKind::Intra, &s, SolverConfig::default());
            let f = ScalarField::from_fn(&g, |x| c((2.0 * PI * x[0] / l).cos()));
            let lf = op.apply(&f).unwrap();
            let k2 = (2.0 * PI / l).powi(2);
            lf.values().iter().zip(f.values()).map(|(a, b)| (a - k2 * b).norm()).fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn matrix_free_matches_assembled() {
        let s = variable_box_sigma(9);
        let op = EllipticOperator::new(EllipticKind::Intra, &s, SolverConfig::default());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let f = ScalarField::random_real(s.grid(), &mut rng);
        let a = op.apply(&f).unwrap();
        let m = op.assemble().unwrap().mul_vec(f.values());
        let scale = a.max_abs();
        for (x, y) in a.values().iter().zip(&m) {
            assert!((x - y).norm() <= 1e-13 * scale);
        }
        let n = s.grid().len();
        for _ in 0..20 {
            let j = rng.gen_range(0..n);
            let mut e = vec![c(0.0); n];
            e[j] = c(1.0);
            let col = op.apply(&ScalarField::new(s.grid().clone(), e).unwrap()).unwrap();
            let asm = op.assemble().unwrap();
            for i in 0..n {
                assert!((col.values()[i].re - asm.get(i, j)).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn weighted_symmetry_and_flux_conservation() {
        let s = variable_box_sigma(8);
        let op = EllipticOperator::new(EllipticKind::Extra, &s, SolverConfig::default());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let u = ScalarField::random_real(s.grid(), &mut rng);
            let v = ScalarField::random_real(s.grid(), &mut rng);
            let lu = op.apply(&u).unwrap();
            let lv = op.apply(&v).unwrap();
            let lhs = lu.inner(&v).unwrap();
            let rhs = u.inner(&lv).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
            assert!(lu.integral().norm() <= 1e-12 * lu.max_abs());
        }
    }

    #[test]
    fn kernel_is_constants_and_spectral_gap_positive() {
        use crate::linalg::{dense_from_rows, symmetric_eigen};
        let s = variable_box_sigma(6);
        let op = EllipticOperator::new(EllipticKind::Intra, &s, SolverConfig::default());
        let w = op.weights().to_vec();
        let k = op.stiffness().unwrap().to_dense();
        // W^{-1/2} K W^{-1/2}
        let n = w.len();
        let sym: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| k[i][j] / (w[i] * w[j]).sqrt()).collect()).collect();
        let (vals, vecs) = symmetric_eigen(&dense_from_rows(&sym)).unwrap();
        let top = vals[n - 1];
        assert!(vals[0].abs() <= 1e-12 * top);
        assert!(vals[1] > 1e-3 * top, "second eigenvalue {}", vals[1]);
        // null vector W^{-1/2} q is constant
        let f: Vec<f64> = (0..n).map(|i| vecs[(i, 0)] / w[i].sqrt()).collect();
        let spread = f.iter().copied().fold(f64::NEG_INFINITY, f64::max) - f.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread <= 1e-8 * f[0].abs());
    }

    fn sum_op(sigma_i: &ConductivityTensorField, sigma_e: &ConductivityTensorField, cfg: SolverConfig) -> EllipticOperator {
        let a = EllipticOperator::new(EllipticKind::Intra, sigma_i, cfg);
        let b = EllipticOperator::new(EllipticKind::Extra, sigma_e, cfg);
        EllipticOperator::sum(&a, &b).unwrap()
    }

    #[test]
    fn sum_inverse_of_zero_is_zero() {
        let s = variable_box_sigma(6);
        let op = sum_op(&s, &s, SolverConfig::default());
        let u = op.solve_mean_zero(&ScalarField::zeros(s.grid())).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn sum_inverse_rejects_nonzero_mean() {
        let s = variable_box_sigma(6);
        let op = sum_op(&s, &s, SolverConfig::default());
        let r = op.solve_mean_zero(&ScalarField::constant(s.grid(), c(1.0)));
        assert!(matches!(r, Err(Error::NotMeanZero { .. })));
    }

    #[test]
    fn sum_inverse_on_torus_mode() {
        let g = GridSpec::periodic(&[1.0, 1.0], &[16, 16]).unwrap();
        let s = ConductivityTensorField::constant(&g, Tensor::identity(2)).unwrap();
        let single = EllipticOperator::new(EllipticKind::Intra, &s, SolverConfig::default());
        let f = ScalarField::from_fn(&g, |x| c((2.0 * PI * x[0]).cos()));
        // discrete symbol measured by one stencil application
        let lf = single.apply(&f).unwrap();
        let a = lf.values()[0].re / f.values()[0].re;
        for method in [SumSolveMethod::Direct, SumSolveMethod::ConjugateGradient] {
            let cfg = SolverConfig { method, ..Default::default() };
            let op = sum_op(&s, &s, cfg);
            let u = op.solve_mean_zero(&f).unwrap();
            for (x, y) in u.values().iter().zip(f.values()) {
                assert!((x - y / (2.0 * a)).norm() < 1e-10, "{method:?}");
            }
        }
    }

    #[test]
    fn sum_inverse_roundtrip_both_methods() {
        let s = variable_box_sigma(9);
        let s_e = variable_box_sigma(9);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for method in [SumSolveMethod::Direct, SumSolveMethod::ConjugateGradient] {
            let cfg = SolverConfig { method, ..Default::default() };
            let op = sum_op(&s, &s_e, cfg);
            for _ in 0..3 {
                let f = project_mean_zero(&ScalarField::random_real(s.grid(), &mut rng));
                let u = op.solve_mean_zero(&f).unwrap();
                assert!(u.relative_mean() < 1e-10);
                let r = op.apply(&u).unwrap().sub(&f).unwrap();
                assert!(r.norm2() <= cfg.tol_lin * f.norm2(), "{method:?}: {}", r.norm2() / f.norm2());
                // inverse after apply
                let back = op.solve_mean_zero(&op.apply(&f).unwrap()).unwrap();
                assert!(back.sub(&f).unwrap().norm2() <= 1e-8 * f.norm2());
            }
        }
    }

    #[test]
    fn too_large_to_assemble() {
        let g = GridSpec::periodic(&[1.0, 1.0], &[8, 8]).unwrap();
        let s = ConductivityTensorField::isotropic(&g, 1.0).unwrap();
        let cfg = SolverConfig { assembly_cap: 32, ..Default::default() };
        let op = EllipticOperator::new(EllipticKind::Intra, &s, cfg);
        assert!(matches!(op.assemble(), Err(Error::TooLargeToAssemble { points: 64, cap: 32 })));
        // solves fall back to CG
        let f = ScalarField::from_fn(&g, |x| c((2.0 * PI * x[1]).sin()));
        let u = op.solve_mean_zero(&f).unwrap();
        assert!(op.apply(&u).unwrap().sub(&f).unwrap().norm2() < 1e-9);
    }
}
