//! The linear flow `e^{-tA}` and its smoothing diagnostic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bidomain::BidomainOperator;
use crate::error::{Error, Result};
use crate::fourier::ConstantCoeffProblem;
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    BackwardEuler,
    CrankNicolson,
    /// Exact mode-wise propagation; constant tensors on a torus only.
    Spectral,
}

/// Number of substeps and the uniform step that covers `[0, t]` with steps
/// no longer than `dt`.
pub fn substeps(t: f64, dt: f64) -> (usize, f64) {
    let n = (t / dt - 1e-9).ceil().max(1.0) as usize;
    (n, t / n as f64)
}

/// Approximate `e^{-tA} u0`.
pub fn step_semigroup(op: &BidomainOperator, u0: &ScalarField, t: f64, scheme: Scheme, dt: f64) -> Result<ScalarField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time {t} must be finite and >= 0")));
    }
    if u0.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    match scheme {
        Scheme::Spectral => {
            let p = ConstantCoeffProblem::from_operator(op, 0.0).map_err(|_| Error::SpectralUnsupported)?;
            p.apply_multiplier(u0, |h| Complex64::new((-t * h).exp(), 0.0))
        }
        Scheme::BackwardEuler | Scheme::CrankNicolson => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidArgument(format!("step {dt} must be positive")));
            }
            let (n, k) = substeps(t, dt);
            let mut u = u0.clone();
            for _ in 0..n {
                u = if scheme == Scheme::BackwardEuler {
                    let lam = Complex64::new(1.0 / k, 0.0);
                    op.resolvent(lam, &u.scale(lam))?
                } else {
                    let lam = Complex64::new(2.0 / k, 0.0);
                    let rhs = u.scale(lam).sub(&op.apply(&u)?)?;
                    op.resolvent(lam, &rhs)?
                };
            }
            Ok(u)
        }
    }
}

/// `e^{-tA} u0` to solver precision: Fourier on constant-coefficient tori,
/// dense eigendecomposition otherwise.
pub fn exact_semigroup(op: &BidomainOperator, u0: &ScalarField, t: f64) -> Result<ScalarField> {
    apply_flow_function(op, u0, |mu| Complex64::new((-t * mu).exp(), 0.0))
}

fn apply_flow_function(
    op: &BidomainOperator,
    u0: &ScalarField,
    phi: impl Fn(f64) -> Complex64,
) -> Result<ScalarField> {
    if u0.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    if let Ok(p) = ConstantCoeffProblem::from_operator(op, 0.0) {
        return p.apply_multiplier(u0, phi);
    }
    let spec = op.spectrum()?;
    ScalarField::new(u0.grid().clone(), spec.apply_function(u0.values(), |mu| phi(mu.max(0.0))))
}

/// `t ||A e^{-tA} u0||_2 / ||u0||_2` for each `t`; bounded by `1/e` for a
/// non-negative self-adjoint `A`.
pub fn analyticity_diagnostic(op: &BidomainOperator, u0: &ScalarField, ts: &[f64]) -> Result<Vec<f64>> {
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument(format!("diagnostic time {t} must be positive")));
    }
    let norm = u0.norm2();
    ts.iter()
        .map(|&t| {
            if norm == 0.0 {
                return Ok(0.0);
            }
            let v = apply_flow_function(op, u0, |mu| Complex64::new(t * mu * (-t * mu).exp(), 0.0))?;
            Ok(v.norm2() / norm)
        })
        .collect()
}
