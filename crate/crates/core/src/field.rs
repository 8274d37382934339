//! Grid functions, discrete norms, the mean-zero projection and finite
//! difference derivatives.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{Boundary, GridSpec, MAX_DIM};

/// Complex grid function, values stored row-major (axis 0 slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Promote real samples.
    pub fn from_real(grid: GridSpec, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self { values: vec![Complex64::new(0.0, 0.0); grid.len()], grid: grid.clone() }
    }

    pub fn constant(grid: &GridSpec, c: Complex64) -> Self {
        Self { values: vec![c; grid.len()], grid: grid.clone() }
    }

    /// Sample `f` at every node coordinate.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let d = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.coordinate(i)[..d])).collect();
        Self { grid: grid.clone(), values }
    }

    /// Independent uniform samples in [-1, 1].
    pub fn random_real<R: Rng + ?Sized>(grid: &GridSpec, rng: &mut R) -> Self {
        let values = (0..grid.len()).map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), 0.0)).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn scale(&self, a: Complex64) -> Self {
        self.map(|v| a * v)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: Complex64, other: &ScalarField) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// Volume-weighted integral.
    pub fn integral(&self) -> Complex64 {
        self.grid.weights().iter().zip(&self.values).map(|(w, v)| v * w).sum()
    }

    /// Volume-weighted mean.
    pub fn mean(&self) -> Complex64 {
        self.integral() / self.grid.volume()
    }

    /// `|mean| / max|f|`, zero for the zero field.
    pub fn relative_mean(&self) -> f64 {
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            self.mean().norm() / m
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Volume-weighted inner product `sum w f conj(g)`.
    pub fn inner(&self, other: &ScalarField) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (f, g))| f * g.conj() * w)
            .sum())
    }

    pub fn norm2(&self) -> f64 {
        weighted_lp_norm(&self.values, &self.grid.weights(), 2.0)
    }
}

/// `P_av f = f - mean(f)`.
pub fn project_mean_zero(f: &ScalarField) -> ScalarField {
    let values = project_mean_zero_weighted(f.values(), &f.grid().weights());
    ScalarField { grid: f.grid().clone(), values }
}

/// Mean-zero projection of raw samples under quadrature weights.
pub fn project_mean_zero_weighted(values: &[Complex64], weights: &[f64]) -> Vec<Complex64> {
    let vol: f64 = weights.iter().sum();
    let mean: Complex64 = values.iter().zip(weights).map(|(v, w)| v * w).sum::<Complex64>() / vol;
    values.iter().map(|v| v - mean).collect()
}

/// Discrete `L^p` norm, `p = f64::INFINITY` for the sup norm.
pub fn discrete_norm(f: &ScalarField, p: f64) -> Result<f64> {
    check_norm_index(p)?;
    Ok(weighted_lp_norm(f.values(), &f.grid().weights(), p))
}

pub fn check_norm_index(p: f64) -> Result<()> {
    if p.is_nan() || p <= 1.0 {
        Err(Error::InvalidNormIndex(p))
    } else {
        Ok(())
    }
}

pub fn weighted_lp_norm(values: &[Complex64], weights: &[f64], p: f64) -> f64 {
    real_weighted_lp_norm(values.iter().map(|v| v.norm()), weights, p)
}

/// `L^p` norm of nonnegative pointwise magnitudes.
pub fn real_weighted_lp_norm(magnitudes: impl Iterator<Item = f64>, weights: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return magnitudes.fold(0.0, f64::max);
    }
    let sum: f64 = magnitudes.zip(weights).map(|(m, w)| m.powf(p) * w).sum();
    sum.powf(1.0 / p)
}

/// First derivative along every axis: central differences in the interior,
/// second-order one-sided stencils on box walls, wraparound on periodic axes.
pub fn discrete_gradient(f: &ScalarField) -> Vec<ScalarField> {
    (0..f.grid().dim()).map(|k| derivative(f, k)).collect()
}

fn derivative(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid();
    let h = g.spacing(axis);
    let n = g.points()[axis];
    let stride = g.strides()[axis];
    let v = f.values();
    let values = (0..g.len())
        .map(|idx| {
            let j = g.multi_index(idx)[axis];
            let at = |off: isize| v[(idx as isize + off * stride as isize) as usize];
            match g.boundary(axis) {
                Boundary::Periodic => {
                    let up = if j + 1 == n { idx + stride - n * stride } else { idx + stride };
                    let dn = if j == 0 { idx + (n - 1) * stride } else { idx - stride };
                    (v[up] - v[dn]) / (2.0 * h)
                }
                Boundary::NeumannBox if j == 0 => (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h),
                Boundary::NeumannBox if j + 1 == n => (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h),
                Boundary::NeumannBox => (at(1) - at(-1)) / (2.0 * h),
            }
        })
        .collect();
    ScalarField { grid: g.clone(), values }
}

fn second_derivative(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid();
    let h2 = g.spacing(axis).powi(2);
    let n = g.points()[axis];
    let stride = g.strides()[axis];
    let v = f.values();
    let values = (0..g.len())
        .map(|idx| {
            let j = g.multi_index(idx)[axis];
            let at = |off: isize| v[(idx as isize + off * stride as isize) as usize];
            match g.boundary(axis) {
                Boundary::Periodic => {
                    let up = if j + 1 == n { idx + stride - n * stride } else { idx + stride };
                    let dn = if j == 0 { idx + (n - 1) * stride } else { idx - stride };
                    (v[up] - 2.0 * v[idx] + v[dn]) / h2
                }
                Boundary::NeumannBox if j == 0 => (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2,
                Boundary::NeumannBox if j + 1 == n => {
                    (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / h2
                }
                Boundary::NeumannBox => (at(1) - 2.0 * at(0) + at(-1)) / h2,
            }
        })
        .collect();
    ScalarField { grid: g.clone(), values }
}

/// Pointwise Euclidean magnitude of a vector field.
pub fn pointwise_magnitude(components: &[ScalarField]) -> Vec<f64> {
    let n = components.first().map_or(0, |c| c.len());
    (0..n)
        .map(|i| components.iter().map(|c| c.values()[i].norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// Pointwise Frobenius magnitude of the matrix of all second differences.
pub fn second_difference_magnitude(f: &ScalarField) -> Vec<f64> {
    let d = f.grid().dim();
    let grads = discrete_gradient(f);
    let mut acc = vec![0.0; f.len()];
    for k in 0..d {
        let dkk = second_derivative(f, k);
        for (a, v) in acc.iter_mut().zip(dkk.values()) {
            *a += v.norm_sqr();
        }
        for l in 0..d {
            if l == k {
                continue;
            }
            let dkl = derivative(&grads[l], k);
            for (a, v) in acc.iter_mut().zip(dkl.values()) {
                *a += v.norm_sqr();
            }
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

/// `L^p` norm of the gradient magnitude.
pub fn gradient_norm(f: &ScalarField, p: f64) -> Result<f64> {
    check_norm_index(p)?;
    let mag = pointwise_magnitude(&discrete_gradient(f));
    Ok(real_weighted_lp_norm(mag.into_iter(), &f.grid().weights(), p))
}

/// `L^p` norm of the second-difference magnitude.
pub fn second_difference_norm(f: &ScalarField, p: f64) -> Result<f64> {
    check_norm_index(p)?;
    let mag = second_difference_magnitude(f);
    Ok(real_weighted_lp_norm(mag.into_iter(), &f.grid().weights(), p))
}

/// Multi-index and coordinate of a point, used by the CSV exporter.
pub(crate) fn coordinates(grid: &GridSpec, idx: usize) -> ([usize; MAX_DIM], [f64; MAX_DIM]) {
    (grid.multi_index(idx), grid.coordinate(idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn projection_kills_constants() {
        let g = GridSpec::neumann_box(&[1.0, 2.0], &[5, 6]).unwrap();
        let p = project_mean_zero(&ScalarField::constant(&g, Complex64::new(3.0, -1.0)));
        assert!(p.max_abs() < 1e-14);
    }

    #[test]
    fn projection_two_cells() {
        let out = project_mean_zero_weighted(&[c(1.0), c(3.0)], &[0.5, 0.5]);
        assert_eq!(out, vec![c(-1.0), c(1.0)]);
    }

    #[test]
    fn projection_of_mean_zero_field_is_identity() {
        let g = GridSpec::periodic(&[1.0], &[4]).unwrap();
        let f = ScalarField::from_real(g, &[1.0, 3.0, 1.0, 3.0]).unwrap();
        let p = project_mean_zero(&f);
        assert_eq!(p.real_parts(), vec![-1.0, 1.0, -1.0, 1.0]);
        let pp = project_mean_zero(&p);
        for (a, b) in pp.values().iter().zip(p.values()) {
            assert!((a - b).norm() <= 1e-14);
        }
    }

    #[test]
    fn norm_examples() {
        let g = GridSpec::periodic(&[1.0, 1.0], &[6, 4]).unwrap();
        assert_eq!(discrete_norm(&ScalarField::zeros(&g), 3.0).unwrap(), 0.0);
        let cst = ScalarField::constant(&g, Complex64::new(0.0, -2.5));
        assert!((discrete_norm(&cst, 2.0).unwrap() - 2.5).abs() < 1e-14);
        assert!((discrete_norm(&cst, f64::INFINITY).unwrap() - 2.5).abs() < 1e-14);
        let n = weighted_lp_norm(&[c(3.0), c(-4.0)], &[0.5, 0.5], 2.0);
        assert!((n - 12.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn norm_rejects_small_p() {
        let g = GridSpec::periodic(&[1.0], &[4]).unwrap();
        let f = ScalarField::zeros(&g);
        assert!(matches!(discrete_norm(&f, 1.0), Err(Error::InvalidNormIndex(_))));
        assert!(matches!(discrete_norm(&f, 0.5), Err(Error::InvalidNormIndex(_))));
        assert!(discrete_norm(&f, f64::NAN).is_err());
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = GridSpec::neumann_box(&[1.0, 1.0], &[5, 7]).unwrap();
        for comp in discrete_gradient(&ScalarField::constant(&g, c(2.0))) {
            assert!(comp.max_abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_exact_on_linear_field() {
        let g = GridSpec::neumann_box(&[2.0], &[9]).unwrap();
        let f = ScalarField::from_fn(&g, |x| c(3.0 * x[0]));
        let d = &discrete_gradient(&f)[0];
        for v in d.values() {
            assert!((v.re - 3.0).abs() < 1e-12);
        }
    }

    fn torus_gradient_error(n: usize) -> f64 {
        let l = 2.0;
        let g = GridSpec::periodic(&[l], &[n]).unwrap();
        let f = ScalarField::from_fn(&g, |x| c((2.0 * PI * x[0] / l).sin()));
        let d = &discrete_gradient(&f)[0];
        (0..n)
            .map(|i| {
                let x = g.coordinate(i)[0];
                (d.values()[i].re - 2.0 * PI / l * (2.0 * PI * x / l).cos()).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn torus_gradient_converges_at_second_order() {
        let e: Vec<f64> = [16, 32, 64, 128].iter().map(|n| torus_gradient_error(*n)).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn second_differences_of_quadratic() {
        let g = GridSpec::neumann_box(&[1.0, 1.0], &[6, 6]).unwrap();
        // f = x^2 + x y: Hessian [[2, 1], [1, 0]], Frobenius sqrt(6)
        let f = ScalarField::from_fn(&g, |x| c(x[0] * x[0] + x[0] * x[1]));
        for m in second_difference_magnitude(&f) {
            assert!((m - 6f64.sqrt()).abs() < 1e-9, "{m}");
        }
    }

    proptest! {
        #[test]
        fn projection_linear_and_idempotent(seed in any::<u64>(), alpha in -3.0f64..3.0) {
            let g = GridSpec::neumann_box(&[1.0, 0.7], &[5, 6]).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = ScalarField::random_real(&g, &mut rng);
            let h = ScalarField::random_real(&g, &mut rng);
            let pf = project_mean_zero(&f);
            let ppf = project_mean_zero(&pf);
            for (a, b) in pf.values().iter().zip(ppf.values()) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
            let lhs = project_mean_zero(&f.axpy(c(alpha), &h).unwrap());
            let rhs = pf.axpy(c(alpha), &project_mean_zero(&h)).unwrap();
            for (a, b) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
            prop_assert!(pf.mean().norm() <= 1e-12 * pf.max_abs().max(1e-300) * g.volume());
        }

        #[test]
        fn norm_monotone_in_p_on_unit_volume(seed in any::<u64>()) {
            let g = GridSpec::periodic(&[1.0, 1.0], &[6, 5]).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = ScalarField::random_real(&g, &mut rng);
            let ps = [1.5, 2.0, 3.0, 7.0, f64::INFINITY];
            let norms: Vec<f64> = ps.iter().map(|p| discrete_norm(&f, *p).unwrap()).collect();
            for w in norms.windows(2) {
                prop_assert!(w[0] <= w[1] * (1.0 + 1e-12));
            }
        }
    }
}
