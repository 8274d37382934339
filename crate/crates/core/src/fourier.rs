//! Constant-coefficient periodic problems solved exactly in Fourier space,
//! and even reflection of box fields onto tori.
//!
//! The lattice symbol of the stencil for a constant tensor `s` is
//!
//! ```text
//! a(t) = sum_k s_kk (2 - 2 cos t_k) / h_k^2 + sum_{k != l} s_kl sin t_k sin t_l / (h_k h_l),
//! t_k = 2 pi m_k / n_k,
//! ```
//!
//! evaluated here in closed form and never by calling the stencil code.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::bidomain::{check_lambda, BidomainOperator};
use crate::conductivity::{ConductivityTensorField, Tensor, SYMMETRY_TOL};
use crate::elliptic::{EllipticKind, EllipticOperator, SolverConfig};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Boundary, GridSpec, MAX_DIM};

/// Mean mismatch tolerated between the two dual right-hand sides.
pub const DUAL_MEAN_TOL: f64 = 1e-10;

/// In-place multi-dimensional DFT over a row-major array. The inverse
/// transform includes the `1/N` factor.
pub fn fft_nd(points: &[usize], data: &mut [Complex64], inverse: bool) {
    let total: usize = points.iter().product();
    assert_eq!(total, data.len(), "fft buffer length");
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = total;
    for &n in points {
        stride /= n;
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let s = 1.0 / total as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Signed lattice frequency of DFT index `j` on an axis with `n` points.
pub fn signed_frequency(j: usize, n: usize) -> i64 {
    if 2 * j <= n {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Closed-form lattice symbol of the constant-tensor stencil at DFT
/// multi-index `m`.
pub fn discrete_symbol(sigma: &Tensor, grid: &GridSpec, m: &[usize]) -> f64 {
    let d = grid.dim();
    let mut s = [0.0; MAX_DIM];
    let mut c = [0.0; MAX_DIM];
    let h = grid.spacings();
    for k in 0..d {
        let t = 2.0 * PI * m[k] as f64 / grid.points()[k] as f64;
        s[k] = t.sin() / h[k];
        c[k] = (2.0 - 2.0 * t.cos()) / (h[k] * h[k]);
    }
    let mut a = 0.0;
    for k in 0..d {
        a += sigma.m[k][k] * c[k];
        for l in 0..d {
            if l != k {
                a += sigma.m[k][l] * s[k] * s[l];
            }
        }
    }
    a
}

/// `<sigma k, k>` with `k = 2 pi m / L` (signed frequencies).
pub fn continuous_symbol(sigma: &Tensor, extents: &[f64], m: &[i64]) -> f64 {
    let k: Vec<f64> = m.iter().zip(extents).map(|(m, l)| 2.0 * PI * *m as f64 / l).collect();
    sigma.quadratic_form(&k)
}

/// `a_i a_e / (a_i + a_e)`, zero when both vanish.
pub fn harmonic_mean(a_i: f64, a_e: f64) -> f64 {
    if a_i + a_e == 0.0 {
        0.0
    } else {
        a_i * a_e / (a_i + a_e)
    }
}

#[derive(Debug, Clone)]
pub struct ConstantCoeffProblem {
    sigma_i: Tensor,
    sigma_e: Tensor,
    theta: f64,
    grid: GridSpec,
    bounds: (f64, f64),
    a_i: Vec<f64>,
    a_e: Vec<f64>,
}

fn check_tensor(t: &Tensor, d: usize) -> Result<(f64, f64)> {
    if t.dim != d {
        return Err(Error::InvalidArgument(format!("tensor dimension {} on a {d}-d grid", t.dim)));
    }
    let defect = t.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(Error::NonSymmetric { cell: 0, defect });
    }
    let (lo, hi) = t.probe_bounds();
    if !(lo > 0.0) {
        return Err(Error::EllipticityViolation { cell: 0, detail: format!("probe minimum {lo}") });
    }
    Ok((lo, hi))
}

/// Reject `|theta| >= pi`.
pub fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta.abs() < PI {
        Ok(())
    } else {
        Err(Error::ThetaOutOfSector(theta))
    }
}

impl ConstantCoeffProblem {
    pub fn new(sigma_i: Tensor, sigma_e: Tensor, theta: f64, grid: &GridSpec) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(Error::InvalidGrid("constant-coefficient oracle needs a periodic grid".into()));
        }
        check_theta(theta)?;
        let (li, hi) = check_tensor(&sigma_i, grid.dim())?;
        let (le, he) = check_tensor(&sigma_e, grid.dim())?;
        let mut a_i = Vec::with_capacity(grid.len());
        let mut a_e = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let m = grid.multi_index(idx);
            a_i.push(discrete_symbol(&sigma_i, grid, &m));
            a_e.push(discrete_symbol(&sigma_e, grid, &m));
        }
        Ok(Self { sigma_i, sigma_e, theta, grid: grid.clone(), bounds: (li.min(le), hi.max(he)), a_i, a_e })
    }

    /// Problem matching a bidomain operator with constant tensors on a torus.
    pub fn from_operator(op: &BidomainOperator, theta: f64) -> Result<Self> {
        let (si, se) = op
            .constant_coefficients()
            .ok_or_else(|| Error::InvalidArgument("operator is not constant-coefficient periodic".into()))?;
        Self::new(si, se, theta, op.grid())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self { theta, ..self.clone() })
    }

    pub fn sigma_i(&self) -> &Tensor {
        &self.sigma_i
    }

    pub fn sigma_e(&self) -> &Tensor {
        &self.sigma_e
    }

    /// Probe-set ellipticity bounds over both tensors.
    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// `(a_i, a_e)` at DFT multi-index `m`.
    pub fn symbols(&self, m: &[usize]) -> (f64, f64) {
        let idx = self.grid.index(m);
        (self.a_i[idx], self.a_e[idx])
    }

    /// Harmonic symbol at DFT multi-index `m`; zero at `m = 0`.
    pub fn harmonic_symbol(&self, m: &[usize]) -> f64 {
        let (a, b) = self.symbols(m);
        harmonic_mean(a, b)
    }

    /// Harmonic symbol for every DFT index in row-major order.
    pub fn harmonic_symbols(&self) -> Vec<f64> {
        self.a_i.iter().zip(&self.a_e).map(|(a, b)| harmonic_mean(*a, *b)).collect()
    }

    fn check_field(&self, f: &ScalarField) -> Result<()> {
        if f.grid() == &self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn transform(&self, f: &ScalarField) -> Vec<Complex64> {
        let mut v = f.values().to_vec();
        fft_nd(self.grid.points(), &mut v, false);
        v
    }

    fn inverse(&self, mut v: Vec<Complex64>) -> Result<ScalarField> {
        fft_nd(self.grid.points(), &mut v, true);
        ScalarField::new(self.grid.clone(), v)
    }

    /// Apply an arbitrary function of the harmonic symbol mode by mode.
    pub fn apply_multiplier(&self, f: &ScalarField, mult: impl Fn(f64) -> Complex64) -> Result<ScalarField> {
        self.check_field(f)?;
        let mut v = self.transform(f);
        for (x, h) in v.iter_mut().zip(self.harmonic_symbols()) {
            *x *= mult(h);
        }
        self.inverse(v)
    }

    /// `A f` by diagonal action.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        self.apply_multiplier(f, |h| Complex64::new(h, 0.0))
    }

    /// `u_hat = s_hat / (lambda + h)`.
    pub fn oracle_resolvent(&self, lambda: Complex64, s: &ScalarField) -> Result<ScalarField> {
        check_lambda(lambda)?;
        self.apply_multiplier(s, |h| (lambda + h).inv())
    }

    /// `u_e_hat = -a_i / (a_i + a_e) * u_hat` (zero at the zero mode).
    pub fn oracle_extracellular(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check_field(u)?;
        let mut v = self.transform(u);
        for (k, x) in v.iter_mut().enumerate() {
            let s = self.a_i[k] + self.a_e[k];
            *x = if s == 0.0 { Complex64::new(0.0, 0.0) } else { -*x * (self.a_i[k] / s) };
        }
        self.inverse(v)
    }

    /// `a_i a_e + e^{i theta} (a_i + a_e)` at flat DFT index `k`.
    pub fn denominator(&self, k: usize) -> Complex64 {
        let e = Complex64::from_polar(1.0, self.theta);
        self.a_i[k] * self.a_e[k] + e * (self.a_i[k] + self.a_e[k])
    }

    /// Minimum over nonzero modes of
    /// `|D| / (sin((pi - |theta|)/2) (a_i a_e + a_i + a_e))`; at least one
    /// whenever the lower bound holds.
    pub fn denominator_bound_ratio(&self) -> f64 {
        let c = ((PI - self.theta.abs()) / 2.0).sin();
        (1..self.grid.len())
            .map(|k| {
                let (a, b) = (self.a_i[k], self.a_e[k]);
                self.denominator(k).norm() / (c * (a * b + a + b))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Solve
    ///
    /// ```text
    /// e^{i theta} (phi_i + phi_e) + A_i phi_i = psi_i
    /// e^{i theta} (phi_i + phi_e) + A_e phi_e = psi_e
    /// ```
    ///
    /// on the torus. The zero mode requires `mean(psi_i) = mean(psi_e)` and
    /// splits evenly between `phi_i` and `phi_e`.
    pub fn dual_solution(&self, psi_i: &ScalarField, psi_e: &ScalarField) -> Result<(ScalarField, ScalarField)> {
        self.check_field(psi_i)?;
        self.check_field(psi_e)?;
        let scale = psi_i.max_abs().max(psi_e.max_abs());
        let diff = (psi_i.mean() - psi_e.mean()).norm();
        if scale > 0.0 && diff > DUAL_MEAN_TOL * scale {
            return Err(Error::IncompatibleMeans { difference: diff });
        }
        let e = Complex64::from_polar(1.0, self.theta);
        let pi_hat = self.transform(psi_i);
        let pe_hat = self.transform(psi_e);
        let mut fi = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        let mut fe = fi.clone();
        for k in 0..self.grid.len() {
            let (a, b) = (self.a_i[k], self.a_e[k]);
            if a + b == 0.0 {
                let half = 0.25 * (pi_hat[k] + pe_hat[k]) / e;
                fi[k] = half;
                fe[k] = half;
                continue;
            }
            let dk = self.denominator(k);
            fi[k] = ((b + e) * pi_hat[k] - e * pe_hat[k]) / dk;
            fe[k] = ((a + e) * pe_hat[k] - e * pi_hat[k]) / dk;
        }
        Ok((self.inverse(fi)?, self.inverse(fe)?))
    }

    /// Relative L^2 residuals of both dual equations, evaluated with the
    /// real-space stencil.
    pub fn dual_residuals(
        &self,
        phi_i: &ScalarField,
        phi_e: &ScalarField,
        psi_i: &ScalarField,
        psi_e: &ScalarField,
    ) -> Result<(f64, f64)> {
        let cfg = SolverConfig::default();
        let ai = EllipticOperator::new(
            EllipticKind::Intra,
            &ConductivityTensorField::constant(&self.grid, self.sigma_i)?,
            cfg,
        );
        let ae = EllipticOperator::new(
            EllipticKind::Extra,
            &ConductivityTensorField::constant(&self.grid, self.sigma_e)?,
            cfg,
        );
        let e = Complex64::from_polar(1.0, self.theta);
        let sum = phi_i.add(phi_e)?.scale(e);
        let ri = sum.add(&ai.apply(phi_i)?)?.sub(psi_i)?;
        let re = sum.add(&ae.apply(phi_e)?)?.sub(psi_e)?;
        let rel = |r: &ScalarField, p: &ScalarField| r.norm2() / p.norm2().max(f64::MIN_POSITIVE);
        let scale = psi_i.norm2().max(psi_e.norm2());
        if scale == 0.0 {
            return Ok((ri.norm2(), re.norm2()));
        }
        Ok((rel(&ri, psi_i).min(ri.norm2() / scale), rel(&re, psi_e).min(re.norm2() / scale)))
    }
}

/// Grid obtained by reflecting `grid` evenly across the far wall of `axis`.
pub fn extended_grid(grid: &GridSpec, axis: usize) -> Result<GridSpec> {
    if axis >= grid.dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    if grid.boundary(axis) != Boundary::NeumannBox {
        return Err(Error::InvalidGrid(format!("axis {axis} is not a box axis")));
    }
    let mut ext = grid.extents().to_vec();
    let mut pts = grid.points().to_vec();
    let mut bnd = grid.boundaries().to_vec();
    ext[axis] *= 2.0;
    pts[axis] = 2 * (pts[axis] - 1);
    bnd[axis] = Boundary::Periodic;
    GridSpec::mixed(&ext, &pts, &bnd)
}

/// Even extension along one box axis onto a doubled periodic axis:
/// `Ef(j) = f(j)` for `j < n`, `f(2(n-1) - j)` beyond.
pub fn even_extension(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    let grid = f.grid();
    let ext = extended_grid(grid, axis)?;
    let n = grid.points()[axis];
    let mut values = Vec::with_capacity(ext.len());
    for idx in 0..ext.len() {
        let mut m = ext.multi_index(idx);
        if m[axis] >= n {
            m[axis] = 2 * (n - 1) - m[axis];
        }
        values.push(f.values()[grid.index(&m[..grid.dim()])]);
    }
    ScalarField::new(ext, values)
}

/// Even extension along every box axis.
pub fn even_extension_all(f: &ScalarField) -> Result<ScalarField> {
    let mut out = f.clone();
    for axis in 0..f.grid().dim() {
        if f.grid().boundary(axis) == Boundary::NeumannBox {
            out = even_extension(&out, axis)?;
        }
    }
    Ok(out)
}

/// Restrict an extended field back to the original box grid.
pub fn restrict(f: &ScalarField, grid: &GridSpec) -> Result<ScalarField> {
    let ext = f.grid();
    if ext.dim() != grid.dim() {
        return Err(Error::GridMismatch);
    }
    for k in 0..grid.dim() {
        let expected = if grid.boundary(k) == Boundary::NeumannBox && ext.boundary(k) == Boundary::Periodic {
            2 * (grid.points()[k] - 1)
        } else {
            grid.points()[k]
        };
        if ext.points()[k] != expected {
            return Err(Error::GridMismatch);
        }
    }
    let values = (0..grid.len())
        .map(|idx| {
            let m = grid.multi_index(idx);
            f.values()[ext.index(&m[..grid.dim()])]
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

/// Torus problem equivalent to a box operator with constant diagonal
/// tensors via even reflection across every wall.
pub fn reflected_problem(op: &BidomainOperator, theta: f64) -> Result<ConstantCoeffProblem> {
    let grid = op.grid();
    let si = op.sigma_i().as_constant();
    let se = op.sigma_e().as_constant();
    let (si, se) = match (si, se) {
        (Some(a), Some(b)) if a.is_diagonal() && b.is_diagonal() => (a, b),
        _ => {
            return Err(Error::InvalidArgument("reflection needs constant diagonal tensors".into()));
        }
    };
    let mut ext = grid.clone();
    for axis in 0..grid.dim() {
        if grid.boundary(axis) == Boundary::NeumannBox {
            ext = extended_grid(&ext, axis)?;
        }
    }
    ConstantCoeffProblem::new(si, se, theta, &ext)
}
