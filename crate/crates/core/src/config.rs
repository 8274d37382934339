//! Serializable descriptions of grids, conductivities and initial fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bidomain::BidomainOperator;
use crate::conductivity::{make_conductivity, ConductivityTensorField, Tensor};
use crate::elliptic::SolverConfig;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Boundary, GridSpec, MAX_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundarySpec {
    All(Boundary),
    PerAxis(Vec<Boundary>),
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::All(Boundary::Periodic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub extents: Vec<f64>,
    pub points: Vec<usize>,
    #[serde(default)]
    pub boundary: BoundarySpec,
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec> {
        match &self.boundary {
            BoundarySpec::All(b) => GridSpec::new(&self.extents, &self.points, *b),
            BoundarySpec::PerAxis(b) => GridSpec::mixed(&self.extents, &self.points, b),
        }
    }
}

/// Conductivity description. `swirl` is a variable fibre field whose
/// direction turns across the domain and is made tangent on box walls
/// (isotropic where two walls meet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConductivityConfig {
    Isotropic { k: f64 },
    Diagonal { diag: Vec<f64> },
    Tensor { rows: Vec<Vec<f64>> },
    Fiber { k_l: f64, k_t: f64, direction: Vec<f64> },
    Swirl {
        k_l: f64,
        k_t: f64,
        #[serde(default)]
        variation: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl ConductivityConfig {
    pub fn build(&self, grid: &GridSpec) -> Result<ConductivityTensorField> {
        let d = grid.dim();
        let n = grid.len();
        match self {
            Self::Isotropic { k } => {
                make_conductivity(grid, &vec![*k; n], &vec![*k; n], &vec![unit(0); n])
            }
            Self::Diagonal { diag } => {
                if diag.len() != d {
                    return Err(Error::InvalidArgument(format!("diagonal has {} entries on a {d}-d grid", diag.len())));
                }
                ConductivityTensorField::constant(grid, Tensor::diagonal(diag))
            }
            Self::Tensor { rows } => {
                let t = Tensor::from_rows(rows)?;
                if t.dim != d {
                    return Err(Error::InvalidArgument(format!("{}x{} tensor on a {d}-d grid", t.dim, t.dim)));
                }
                ConductivityTensorField::constant(grid, t)
            }
            Self::Fiber { k_l, k_t, direction } => {
                if direction.len() != d {
                    return Err(Error::InvalidArgument("fibre direction length does not match grid".into()));
                }
                let mut a = [0.0; MAX_DIM];
                a[..d].copy_from_slice(direction);
                make_conductivity(grid, &vec![*k_l; n], &vec![*k_t; n], &vec![a; n])
            }
            Self::Swirl { k_l, k_t, variation, phase } => swirl(grid, *k_l, *k_t, *variation, *phase),
        }
    }
}

fn unit(k: usize) -> [f64; MAX_DIM] {
    let mut a = [0.0; MAX_DIM];
    a[k] = 1.0;
    a
}

fn swirl(grid: &GridSpec, k_l: f64, k_t: f64, variation: f64, phase: f64) -> Result<ConductivityTensorField> {
    let d = grid.dim();
    let ext = grid.extents();
    let n = grid.len();
    let (mut kl, mut kt, mut dir) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for idx in 0..n {
        let x = grid.coordinate(idx);
        let m = grid.multi_index(idx);
        let l = k_l * (1.0 + variation * (2.0 * PI * x[0] / ext[0] + phase).sin());
        let t = k_t * (1.0 + variation * (2.0 * PI * x[d - 1] / ext[d - 1] + phase).cos());
        let mut a = [0.0; MAX_DIM];
        if d == 1 {
            a[0] = 1.0;
        } else {
            let psi = PI * (x[0] / ext[0] - x[1] / ext[1]) + phase;
            a[0] = psi.cos();
            a[1] = psi.sin();
        }
        let walls: Vec<usize> = (0..d).filter(|&k| grid.on_wall(&m[..d], k)).collect();
        for &k in &walls {
            a[k] = 0.0;
        }
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if walls.len() >= 2 || norm < 0.5 {
            let free = (0..d).find(|k| !walls.contains(k)).unwrap_or(0);
            kl.push(t);
            kt.push(t);
            dir.push(unit(free));
        } else {
            a.iter_mut().for_each(|v| *v /= norm);
            kl.push(l);
            kt.push(t);
            dir.push(a);
        }
    }
    make_conductivity(grid, &kl, &kt, &dir)
}

/// Build the bidomain operator from its parts.
pub fn build_operator(
    grid: &GridConfig,
    sigma_i: &ConductivityConfig,
    sigma_e: &ConductivityConfig,
    solver: SolverConfig,
) -> Result<BidomainOperator> {
    let g = grid.build()?;
    BidomainOperator::new(sigma_i.build(&g)?, sigma_e.build(&g)?, solver)
}

/// Initial field description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldInit {
    Constant { value: f64 },
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
        #[serde(default)]
        background: f64,
    },
    /// `value` where `x[axis] < below`, `background` elsewhere.
    Step {
        axis: usize,
        below: f64,
        value: f64,
        #[serde(default)]
        background: f64,
    },
    /// Uniform `[-amplitude, amplitude]` values from the run seed.
    Random { amplitude: f64 },
}

impl Default for FieldInit {
    fn default() -> Self {
        Self::Constant { value: 0.0 }
    }
}

/// Squared distance with periodic wrap on periodic axes.
pub fn wrapped_distance_sq(grid: &GridSpec, x: &[f64], c: &[f64]) -> f64 {
    (0..grid.dim())
        .map(|k| {
            let mut dx = (x[k] - c[k]).abs();
            if grid.boundary(k) == Boundary::Periodic {
                dx = dx.min(grid.extents()[k] - dx);
            }
            dx * dx
        })
        .sum()
}

impl FieldInit {
    pub fn build(&self, grid: &GridSpec, seed: u64) -> Result<ScalarField> {
        let d = grid.dim();
        let re = |v: f64| Complex64::new(v, 0.0);
        match self {
            Self::Constant { value } => Ok(ScalarField::constant(grid, re(*value))),
            Self::Gaussian { center, width, amplitude, background } => {
                if center.len() != d || !(*width > 0.0) {
                    return Err(Error::InvalidArgument("gaussian needs a d-vector center and positive width".into()));
                }
                Ok(ScalarField::from_fn(grid, |x| {
                    re(background + amplitude * (-wrapped_distance_sq(grid, x, center) / (width * width)).exp())
                }))
            }
            Self::Step { axis, below, value, background } => {
                if *axis >= d {
                    return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
                }
                Ok(ScalarField::from_fn(grid, |x| re(if x[*axis] < *below { *value } else { *background })))
            }
            Self::Random { amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(ScalarField::random_real(grid, &mut rng).scale(re(*amplitude)))
            }
        }
    }
}
