//! Linear solvers: preconditioned CG for the singular elliptic systems,
//! restarted GMRES for matrix-free resolvents, and thin wrappers over faer
//! for sparse LU and dense spectral work.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeStats {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn nrm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Jacobi-preconditioned conjugate gradients for a real symmetric positive
/// semidefinite operator with consistent right-hand side.
///
/// `measure` maps a residual vector to the norm used by the stopping test;
/// `project` is applied to the iterate every step (used to pin the constant
/// mode of singular systems).
#[allow(clippy::too_many_arguments)]
pub fn conjugate_gradient(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    diag: &[f64],
    rhs: &[Complex64],
    tol: f64,
    max_iter: usize,
    measure: impl Fn(&[Complex64]) -> f64,
    project: impl Fn(&mut [Complex64]),
) -> Result<(Vec<Complex64>, IterativeStats)> {
    let n = rhs.len();
    let mut x = vec![ZERO; n];
    let target = tol * measure(rhs);
    let mut history = Vec::new();
    let mut r = rhs.to_vec();
    let res0 = measure(&r);
    history.push(res0);
    if res0 <= target || res0 == 0.0 {
        return Ok((x, IterativeStats { iterations: 0, residual_history: history }));
    }
    let precond = |r: &[Complex64]| -> Vec<Complex64> {
        r.iter().zip(diag).map(|(v, d)| if *d > 0.0 { v / d } else { *v }).collect()
    };
    let mut z = precond(&r);
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap.norm() == 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut x);
        let res = measure(&r);
        history.push(res);
        if res <= target {
            return Ok((x, IterativeStats { iterations: it, residual_history: history }));
        }
        z = precond(&r);
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolveDivergence { iterations: history.len() - 1, history })
}

/// Restarted GMRES (modified Gram-Schmidt Arnoldi) for a general complex
/// operator. Stops on relative Euclidean residual `tol`.
pub fn gmres(
    apply: impl Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    rhs: &[Complex64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<Complex64>, IterativeStats)> {
    let n = rhs.len();
    let mut x = vec![ZERO; n];
    let bnorm = nrm(rhs);
    let mut history = vec![bnorm];
    if bnorm == 0.0 {
        return Ok((x, IterativeStats { iterations: 0, residual_history: history }));
    }
    let mut total = 0;
    while total < max_iter {
        let ax = apply(&x)?;
        let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = nrm(&r);
        if beta <= tol * bnorm {
            *history.last_mut().unwrap() = beta;
            return Ok((x, IterativeStats { iterations: total, residual_history: history }));
        }
        let m = restart.min(max_iter - total).max(1);
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![ZERO; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let mut w = apply(&v[k])?;
            for (j, vj) in v.iter().enumerate() {
                let hjk = dot(vj, &w);
                h[j][k] = hjk;
                for i in 0..n {
                    w[i] -= hjk * vj[i];
                }
            }
            let wn = nrm(&w);
            h[k + 1][k] = Complex64::new(wn, 0.0);
            for j in 0..k {
                let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let (a, b) = (h[k][k], h[k + 1][k]);
            let den = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if den == 0.0 {
                cs[k] = Complex64::new(1.0, 0.0);
                sn[k] = ZERO;
            } else {
                cs[k] = a / den;
                sn[k] = b / den;
            }
            h[k][k] = cs[k].conj() * a + sn[k].conj() * b;
            h[k + 1][k] = ZERO;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            total += 1;
            history.push(g[k + 1].norm());
            if g[k + 1].norm() <= tol * bnorm || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / wn).collect());
        }
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let s: Complex64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * v[j][i];
            }
        }
    }
    let ax = apply(&x)?;
    let res = nrm(&rhs.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
    if res <= tol * bnorm {
        return Ok((x, IterativeStats { iterations: total, residual_history: history }));
    }
    history.push(res);
    Err(Error::LinearSolveDivergence { iterations: total, history })
}

/// Sparse LU of a square complex system with one step of iterative
/// refinement against the original entries.
pub struct SparseLu {
    n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
    lu: Lu<usize, Complex64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn factor(n: usize, triplets: &[(usize, usize, Complex64)]) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, Complex64>> =
            triplets.iter().map(|(r, c, v)| Triplet::new(*r, *c, *v)).collect();
        let a = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let mut rows = vec![Vec::new(); n];
        for (r, c, v) in triplets {
            rows[*r].push((*c, *v));
        }
        Ok(Self { n, rows, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn raw_solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let b = Mat::<Complex64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.rows.iter().map(|row| row.iter().map(|(c, v)| v * x[*c]).sum()).collect()
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut x = self.raw_solve(rhs);
        let ax = self.mul(&x);
        let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = self.raw_solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x
    }
}

/// Row-major dense real matrix helpers on top of faer.
pub fn dense_from_rows(rows: &[Vec<f64>]) -> Mat<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a real symmetric
/// matrix.
pub fn symmetric_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..a.nrows()).map(|i| e.S()[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Largest singular value of a complex matrix.
pub fn spectral_norm(a: &Mat<Complex64>) -> Result<f64> {
    let s = a.singular_values().map_err(|e| Error::Factorization(format!("{e:?}")))?;
    Ok(s.into_iter().fold(0.0, f64::max))
}

/// Dense inverse via partial-pivoting LU.
pub fn dense_inverse(a: &Mat<Complex64>) -> Mat<Complex64> {
    let lu = a.partial_piv_lu();
    lu.solve(Mat::<Complex64>::identity(a.nrows(), a.ncols()))
}
