//! Dense spectral calculus for weighted self-adjoint operators on small grids.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bidomain::BidomainOperator;
use crate::error::{Error, Result};
use crate::field::{weighted_lp_norm, ScalarField};
use crate::linalg::symmetric_eigen;

/// Eigendecomposition of `S = W^{1/2} M W^{-1/2}` for an operator `M` that
/// is self-adjoint in the `W`-weighted inner product.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    values: Vec<f64>,
    vectors: Mat<f64>,
    sqrt_w: Vec<f64>,
    symmetry_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerSign {
    #[default]
    /// `(A + a)^alpha`
    Positive,
    /// `(A + a)^{-alpha}`
    Negative,
}

#[derive(Debug, Clone)]
pub struct FractionalResult {
    pub field: ScalarField,
    /// `||(A + a)^alpha f||_2`, the `Z^alpha` norm of `f`.
    pub z_norm: f64,
}

impl DenseSpectrum {
    /// `s` must already be the weighted symmetrization. Rejected when its
    /// relative asymmetry exceeds `threshold`.
    pub fn new(s: &Mat<f64>, weights: &[f64], threshold: f64) -> Result<Self> {
        let n = s.nrows();
        if s.ncols() != n || weights.len() != n {
            return Err(Error::InvalidArgument("dimension mismatch in dense spectrum".into()));
        }
        let mut scale: f64 = 0.0;
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(s[(i, j)].abs());
                defect = defect.max((s[(i, j)] - s[(j, i)]).abs());
            }
        }
        let rel = if scale > 0.0 { defect / scale } else { 0.0 };
        if rel > threshold {
            return Err(Error::NonSymmetricOperator { defect: rel });
        }
        let sym = Mat::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
        let (values, vectors) = symmetric_eigen(&sym)?;
        Ok(Self { values, vectors, sqrt_w: weights.iter().map(|w| w.sqrt()).collect(), symmetry_defect: rel })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Ascending eigenvalues.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.symmetry_defect
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Nodal-space eigenvectors (columns of `W^{-1/2} Q`) whose eigenvalue
    /// magnitude is at most `tol` times the largest one.
    pub fn kernel(&self, tol: f64) -> Vec<Vec<f64>> {
        let top = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (0..self.len())
            .filter(|&j| self.values[j].abs() <= tol * top)
            .map(|j| (0..self.len()).map(|i| self.vectors[(i, j)] / self.sqrt_w[i]).collect())
            .collect()
    }

    /// `phi(M) f = W^{-1/2} Q phi(mu) Q^T W^{1/2} f`.
    pub fn apply_function(&self, f: &[Complex64], phi: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        let n = self.len();
        let g: Vec<Complex64> = f.iter().zip(&self.sqrt_w).map(|(v, s)| v * s).collect();
        let mut coeff = vec![Complex64::new(0.0, 0.0); n];
        for (j, c) in coeff.iter_mut().enumerate() {
            let dot: Complex64 = (0..n).map(|i| g[i] * self.vectors[(i, j)]).sum();
            *c = dot * phi(self.values[j]);
        }
        (0..n)
            .map(|i| (0..n).map(|j| coeff[j] * self.vectors[(i, j)]).sum::<Complex64>() / self.sqrt_w[i])
            .collect()
    }
}

/// `(A + a)^{+-alpha} f` by spectral mapping of the dense weighted
/// symmetrization. `alpha = 0` returns `f` without any decomposition.
pub fn fractional_apply(
    op: &BidomainOperator,
    alpha: f64,
    a: f64,
    f: &ScalarField,
    sign: PowerSign,
) -> Result<FractionalResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside [0, 1]")));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("shift a = {a} must be positive")));
    }
    if f.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    if alpha == 0.0 {
        return Ok(FractionalResult { field: f.clone(), z_norm: f.norm2() });
    }
    let spec = op.spectrum()?;
    let w = op.elliptic_sum().weights();
    let pow = |mu: f64| Complex64::new((mu.max(0.0) + a).powf(alpha), 0.0);
    let positive = spec.apply_function(f.values(), pow);
    let z_norm = weighted_lp_norm(&positive, w, 2.0);
    let out = match sign {
        PowerSign::Positive => positive,
        PowerSign::Negative => spec.apply_function(f.values(), |mu| pow(mu).inv()),
    };
    Ok(FractionalResult { field: ScalarField::new(f.grid().clone(), out)?, z_norm })
}
