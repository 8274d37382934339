//! Oracles shared by the integration tests. Written independently of the
//! library's own Fourier and reflection helpers.
#![allow(dead_code)]

use std::f64::consts::PI;

use bidomain::bidomain::BidomainOperator;
use bidomain::conductivity::{ConductivityTensorField, Tensor};
use bidomain::config::ConductivityConfig;
use bidomain::elliptic::SolverConfig;
use bidomain::field::ScalarField;
use bidomain::grid::GridSpec;
use num_complex::Complex64;

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn constant_op(grid: &GridSpec, si: Tensor, se: Tensor) -> BidomainOperator {
    BidomainOperator::new(
        ConductivityTensorField::constant(grid, si).unwrap(),
        ConductivityTensorField::constant(grid, se).unwrap(),
        SolverConfig::default(),
    )
    .unwrap()
}

/// Variable fibres tangent to the box walls, with unequal intra/extra
/// anisotropy.
pub fn swirl_op(grid: &GridSpec) -> BidomainOperator {
    let si = ConductivityConfig::Swirl { k_l: 3.0, k_t: 0.3, variation: 0.25, phase: 0.4 };
    let se = ConductivityConfig::Swirl { k_l: 2.0, k_t: 0.8, variation: 0.2, phase: -0.3 };
    BidomainOperator::new(si.build(grid).unwrap(), se.build(grid).unwrap(), SolverConfig::default()).unwrap()
}

/// Eigenvalue of the constant-tensor stencil on the lattice mode with
/// angles `theta_k = 2 pi m_k / n_k`.
pub fn lattice_symbol(sigma: &Tensor, h: &[f64], theta: &[f64]) -> f64 {
    let d = h.len();
    let mut a = 0.0;
    for k in 0..d {
        a += sigma.m[k][k] * (2.0 - 2.0 * theta[k].cos()) / (h[k] * h[k]);
        for l in 0..d {
            if l != k {
                a += sigma.m[k][l] * theta[k].sin() * theta[l].sin() / (h[k] * h[l]);
            }
        }
    }
    a
}

/// `exp(i sum_k theta_k j_k)` on a periodic grid.
pub fn lattice_mode(grid: &GridSpec, m: &[usize]) -> (ScalarField, Vec<f64>) {
    let d = grid.dim();
    let theta: Vec<f64> = (0..d).map(|k| 2.0 * PI * m[k] as f64 / grid.points()[k] as f64).collect();
    let vals = (0..grid.len())
        .map(|idx| {
            let j = grid.multi_index(idx);
            Complex64::from_polar(1.0, (0..d).map(|k| theta[k] * j[k] as f64).sum())
        })
        .collect();
    (ScalarField::new(grid.clone(), vals).unwrap(), theta)
}

/// Even reflection of a box field onto the doubled torus, every axis.
pub fn reflect(f: &ScalarField, torus: &GridSpec) -> ScalarField {
    let g = f.grid();
    let d = g.dim();
    let vals = (0..torus.len())
        .map(|idx| {
            let j = torus.multi_index(idx);
            let mut src = [0usize; 3];
            for k in 0..d {
                let n = g.points()[k];
                src[k] = if j[k] < n { j[k] } else { 2 * (n - 1) - j[k] };
            }
            f.values()[g.index(&src[..d])]
        })
        .collect();
    ScalarField::new(torus.clone(), vals).unwrap()
}

/// Box-sized corner of a torus field.
pub fn corner(f: &ScalarField, boxed: &GridSpec) -> ScalarField {
    let d = boxed.dim();
    let vals = (0..boxed.len())
        .map(|idx| {
            let j = boxed.multi_index(idx);
            f.values()[f.grid().index(&j[..d])]
        })
        .collect();
    ScalarField::new(boxed.clone(), vals).unwrap()
}

/// Adaptive Dormand-Prince 5(4) integration of `y' = rhs(y)` from 0,
/// returning `y` at each requested (increasing) output time.
pub fn dopri45(rhs: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], outputs: &[f64], tol: f64) -> Vec<Vec<f64>> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut h: f64 = 1e-3;
    let mut out = Vec::with_capacity(outputs.len());
    for &target in outputs {
        while t < target {
            let step = h.min(target - t);
            let mut k: Vec<Vec<f64>> = vec![rhs(&y)];
            for s in 0..6 {
                let ys: Vec<f64> = (0..n).map(|i| y[i] + step * (0..=s).map(|j| A[s][j] * k[j][i]).sum::<f64>()).collect();
                k.push(rhs(&ys));
            }
            let y5: Vec<f64> = (0..n).map(|i| y[i] + step * (0..7).map(|j| B5[j] * k[j][i]).sum::<f64>()).collect();
            let err = (0..n)
                .map(|i| {
                    let e = step * (0..7).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>();
                    (e / (tol * (1.0 + y[i].abs().max(y5[i].abs())))).powi(2)
                })
                .sum::<f64>()
                .sqrt()
                / (n as f64).sqrt();
            if err <= 1.0 {
                t += step;
                y = y5;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 && step < h {
                // landed on an output time; keep the unclipped step size
                continue;
            }
            h = step * fac;
        }
        out.push(y.clone());
    }
    out
}
