//! The bidomain operator `A = A_i (A_i + A_e)^{-1} A_e P_av`, its resolvent
//! and the extracellular potential recovery.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use faer::Mat;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conductivity::{ConductivityTensorField, Tensor};
use crate::elliptic::{border_scale, EllipticKind, EllipticOperator, SolverConfig};
use crate::error::{Error, Result};
use crate::field::{project_mean_zero_weighted, ScalarField};
use crate::grid::GridSpec;
use crate::linalg::{gmres, SparseLu};
use crate::spectral::DenseSpectrum;

/// Mean-zero tolerance on data that must cancel (sources, dual data).
pub const COMPATIBILITY_TOL: f64 = 1e-10;
/// Largest weighted symmetry defect accepted before a spectral decomposition.
pub const SYMMETRY_THRESHOLD: f64 = 1e-9;

const MAX_CACHED_FACTORIZATIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolventMethod {
    /// Sparse LU of the coupled (u, u_e) block system.
    BlockDirect { cached: bool },
    /// GMRES on the Schur complement in `u` with inner elliptic solves.
    SchurGmres { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventResiduals {
    /// `|lambda u + A_i u_i - s| / |s|`.
    pub parabolic: f64,
    /// `|A_i u_i + A_e u_e| / |s|`.
    pub elliptic: f64,
    /// `|mean(u_e)| / max|u_e|`.
    pub mean_ue: f64,
    /// `|(lambda + A) u - s| / |s|`, all norms weighted L^2.
    pub operator: f64,
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub lambda: Complex64,
    pub u: ScalarField,
    pub u_i: ScalarField,
    pub u_e: ScalarField,
    pub residuals: ResolventResiduals,
    pub method: ResolventMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointReport {
    /// `max |<Af, g> - <f, Ag>| / (|f| |g|)` over the probes.
    pub defect: f64,
    /// `min <Af, f> / |f|^2` over the probes.
    pub min_form: f64,
}

pub struct BidomainOperator {
    grid: GridSpec,
    sigma_i: ConductivityTensorField,
    sigma_e: ConductivityTensorField,
    a_i: EllipticOperator,
    a_e: EllipticOperator,
    sum: EllipticOperator,
    config: SolverConfig,
    factorizations: Mutex<HashMap<(u64, u64), Arc<SparseLu>>>,
    spectrum: OnceLock<Arc<DenseSpectrum>>,
}

impl std::fmt::Debug for BidomainOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BidomainOperator").field("grid", &self.grid).field("config", &self.config).finish()
    }
}

/// Reject `lambda` on the closed negative real axis.
pub fn check_lambda(lambda: Complex64) -> Result<()> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite lambda {lambda}")));
    }
    if lambda.im == 0.0 && lambda.re <= 0.0 {
        return Err(Error::LambdaOnCut { re: lambda.re, im: lambda.im });
    }
    Ok(())
}

impl BidomainOperator {
    pub fn new(
        sigma_i: ConductivityTensorField,
        sigma_e: ConductivityTensorField,
        config: SolverConfig,
    ) -> Result<Self> {
        if sigma_i.grid() != sigma_e.grid() {
            return Err(Error::GridMismatch);
        }
        let a_i = EllipticOperator::new(EllipticKind::Intra, &sigma_i, config);
        let a_e = EllipticOperator::new(EllipticKind::Extra, &sigma_e, config);
        let sum = EllipticOperator::sum(&a_i, &a_e)?;
        Ok(Self {
            grid: sigma_i.grid().clone(),
            sigma_i,
            sigma_e,
            a_i,
            a_e,
            sum,
            config,
            factorizations: Mutex::new(HashMap::new()),
            spectrum: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn sigma_i(&self) -> &ConductivityTensorField {
        &self.sigma_i
    }

    pub fn sigma_e(&self) -> &ConductivityTensorField {
        &self.sigma_e
    }

    pub fn intra(&self) -> &EllipticOperator {
        &self.a_i
    }

    pub fn extra(&self) -> &EllipticOperator {
        &self.a_e
    }

    pub fn elliptic_sum(&self) -> &EllipticOperator {
        &self.sum
    }

    /// Both tensors if they are constant and the grid is a full torus.
    pub fn constant_coefficients(&self) -> Option<(Tensor, Tensor)> {
        if !self.grid.is_periodic() {
            return None;
        }
        Some((self.sigma_i.as_constant()?, self.sigma_e.as_constant()?))
    }

    fn check_grid(&self, f: &ScalarField) -> Result<()> {
        if f.grid() == &self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn project(&self, v: &[Complex64]) -> Vec<Complex64> {
        project_mean_zero_weighted(v, self.sum.weights())
    }

    pub(crate) fn apply_raw(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let pf = self.project(f);
        let mut rhs = self.a_e.apply_raw(&pf);
        self.sum.project(&mut rhs);
        let g = self.sum.solve_raw(&rhs)?;
        Ok(self.a_i.apply_raw(&g))
    }

    /// `A f` through the harmonic-mean composition.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check_grid(f)?;
        ScalarField::new(self.grid.clone(), self.apply_raw(f.values())?)
    }

    /// `A_i P f - A_i (A_i + A_e)^{-1} A_i P f`, the algebraically equivalent
    /// form obtained by eliminating `u_e`.
    pub fn apply_alternative(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check_grid(f)?;
        let pf = self.project(f.values());
        let aip = self.a_i.apply_raw(&pf);
        let mut rhs = aip.clone();
        self.sum.project(&mut rhs);
        let g = self.sum.solve_raw(&rhs)?;
        let corr = self.a_i.apply_raw(&g);
        let out = aip.iter().zip(&corr).map(|(a, b)| a - b).collect();
        ScalarField::new(self.grid.clone(), out)
    }

    /// `u_e = (A_i + A_e)^{-1} ((s_i + s_e) - A_i P u)`, mean-zero.
    pub fn recover_extracellular(
        &self,
        u: &ScalarField,
        sources: Option<(&ScalarField, &ScalarField)>,
    ) -> Result<ScalarField> {
        self.check_grid(u)?;
        let pu = self.project(u.values());
        let mut rhs: Vec<Complex64> = self.a_i.apply_raw(&pu).iter().map(|v| -v).collect();
        if let Some((s_i, s_e)) = sources {
            self.check_grid(s_i)?;
            self.check_grid(s_e)?;
            let total = s_i.add(s_e)?;
            check_compatibility(s_i, s_e, &total)?;
            for (r, s) in rhs.iter_mut().zip(total.values()) {
                *r += s;
            }
        }
        self.sum.project(&mut rhs);
        ScalarField::new(self.grid.clone(), self.sum.solve_raw(&rhs)?)
    }

    /// Solve `(lambda + A) u = s` and return the full triplet.
    ///
    /// The mean of `s` is handled exactly (`u_2 = mean(s) / lambda`, a
    /// constant in the kernel of `A`); the mean-zero part goes through the
    /// coupled system in `(u, u_e)`.
    pub fn solve_resolvent(&self, lambda: Complex64, s: &ScalarField) -> Result<ResolventSolution> {
        check_lambda(lambda)?;
        self.check_grid(s)?;
        let n = self.grid.len();
        let w = self.sum.weights();
        let mean = s.mean();
        let s1 = self.project(s.values());

        let (u1, u_e, method) = if self.sum.stiffness().is_some() {
            let (lu, cached) = self.block_factorization(lambda)?;
            let mut rhs: Vec<Complex64> = s1.iter().zip(w).map(|(v, w)| v * w).collect();
            rhs.resize(2 * n + 1, Complex64::new(0.0, 0.0));
            let x = lu.solve(&rhs);
            let mut u1 = x[..n].to_vec();
            self.sum.project(&mut u1);
            let mut u_e = x[n..2 * n].to_vec();
            self.sum.project(&mut u_e);
            (u1, u_e, ResolventMethod::BlockDirect { cached })
        } else {
            let (u1, stats) = gmres(
                |x| {
                    let ax = self.apply_raw(x)?;
                    Ok(x.iter().zip(&ax).map(|(x, a)| lambda * x + a).collect())
                },
                &s1,
                self.config.tol_lin * 1e-2,
                self.config.gmres_restart,
                self.config.max_iter_factor * n,
            )?;
            let pu = self.project(&u1);
            let mut rhs: Vec<Complex64> = self.a_i.apply_raw(&pu).iter().map(|v| -v).collect();
            self.sum.project(&mut rhs);
            let u_e = self.sum.solve_raw(&rhs)?;
            (u1, u_e, ResolventMethod::SchurGmres { iterations: stats.iterations })
        };

        let shift = mean / lambda;
        let u: Vec<Complex64> = u1.iter().map(|v| v + shift).collect();
        let u_i: Vec<Complex64> = u.iter().zip(&u_e).map(|(a, b)| a + b).collect();
        let residuals = self.resolvent_residuals(lambda, s.values(), &u, &u_i, &u_e)?;
        Ok(ResolventSolution {
            lambda,
            u: ScalarField::new(self.grid.clone(), u)?,
            u_i: ScalarField::new(self.grid.clone(), u_i)?,
            u_e: ScalarField::new(self.grid.clone(), u_e)?,
            residuals,
            method,
        })
    }

    /// `R(lambda) s` without the residual bookkeeping.
    pub fn resolvent(&self, lambda: Complex64, s: &ScalarField) -> Result<ScalarField> {
        Ok(self.solve_resolvent(lambda, s)?.u)
    }

    fn resolvent_residuals(
        &self,
        lambda: Complex64,
        s: &[Complex64],
        u: &[Complex64],
        u_i: &[Complex64],
        u_e: &[Complex64],
    ) -> Result<ResolventResiduals> {
        let w = self.sum.weights();
        let wn = |v: &[Complex64]| v.iter().zip(w).map(|(x, w)| x.norm_sqr() * w).sum::<f64>().sqrt();
        let s_norm = wn(s).max(f64::MIN_POSITIVE);
        let ai_ui = self.a_i.apply_raw(u_i);
        let ae_ue = self.a_e.apply_raw(u_e);
        let parabolic: Vec<Complex64> =
            (0..u.len()).map(|k| lambda * u[k] + ai_ui[k] - s[k]).collect();
        let elliptic: Vec<Complex64> = ai_ui.iter().zip(&ae_ue).map(|(a, b)| a + b).collect();
        let au = self.apply_raw(u)?;
        let operator: Vec<Complex64> = (0..u.len()).map(|k| lambda * u[k] + au[k] - s[k]).collect();
        let ue_max = u_e.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let vol: f64 = w.iter().sum();
        let ue_mean = u_e.iter().zip(w).map(|(v, w)| v * w).sum::<Complex64>().norm() / vol;
        Ok(ResolventResiduals {
            parabolic: wn(&parabolic) / s_norm,
            elliptic: wn(&elliptic) / s_norm,
            mean_ue: if ue_max > 0.0 { ue_mean / ue_max } else { 0.0 },
            operator: wn(&operator) / s_norm,
        })
    }

    fn block_factorization(&self, lambda: Complex64) -> Result<(Arc<SparseLu>, bool)> {
        let key = (lambda.re.to_bits(), lambda.im.to_bits());
        if let Some(lu) = self.factorizations.lock().expect("cache lock").get(&key) {
            return Ok((lu.clone(), true));
        }
        let lu = Arc::new(self.factor_block(lambda)?);
        let mut cache = self.factorizations.lock().expect("cache lock");
        if cache.len() >= MAX_CACHED_FACTORIZATIONS {
            cache.clear();
        }
        cache.insert(key, lu.clone());
        Ok((lu, false))
    }

    /// ```text
    /// [ lambda W + K_i   K_i          0     ] [u  ]   [W s]
    /// [ K_i              K_i + K_e    rho w ] [u_e] = [0  ]
    /// [ 0                rho w^T      0     ] [mu ]   [0  ]
    /// ```
    fn factor_block(&self, lambda: Complex64) -> Result<SparseLu> {
        let n = self.grid.len();
        let ki = self.a_i.stiffness().expect("checked by caller");
        let ks = self.sum.stiffness().expect("checked by caller");
        let w = self.sum.weights();
        let rho = border_scale(self.sum.stiffness_diag(), w);
        let re = |v: f64| Complex64::new(v, 0.0);
        let mut t = Vec::with_capacity(3 * ki.nnz() + ks.nnz() + 3 * n);
        for (r, c, v) in ki.triplets() {
            t.push((r, c, re(v)));
            t.push((r, n + c, re(v)));
            t.push((n + r, c, re(v)));
        }
        for (r, c, v) in ks.triplets() {
            t.push((n + r, n + c, re(v)));
        }
        for (i, wi) in w.iter().enumerate() {
            t.push((i, i, lambda * wi));
            t.push((n + i, 2 * n, re(rho * wi)));
            t.push((2 * n, n + i, re(rho * wi)));
        }
        SparseLu::factor(2 * n + 1, &t)
    }

    /// Weighted adjoint defect and quadratic-form minimum over random real
    /// probes drawn from `seed`.
    pub fn adjoint_defect(&self, trials: usize, seed: u64) -> Result<AdjointReport> {
        if trials == 0 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut defect: f64 = 0.0;
        let mut min_form = f64::INFINITY;
        for _ in 0..trials {
            let f = ScalarField::random_real(&self.grid, &mut rng);
            let g = ScalarField::random_real(&self.grid, &mut rng);
            let af = self.apply(&f)?;
            let ag = self.apply(&g)?;
            let lhs = af.inner(&g)?;
            let rhs = f.inner(&ag)?;
            defect = defect.max((lhs - rhs).norm() / (f.norm2() * g.norm2()));
            min_form = min_form.min(af.inner(&f)?.re / f.norm2().powi(2));
        }
        Ok(AdjointReport { defect, min_form })
    }

    /// Dense matrix of `A` built column by column from `apply`.
    pub fn dense_matrix(&self) -> Result<Mat<f64>> {
        let n = self.grid.len();
        if n > self.config.dense_cap {
            return Err(Error::TooLargeToAssemble { points: n, cap: self.config.dense_cap });
        }
        let mut m = Mat::<f64>::zeros(n, n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply_raw(&e)?;
            e[j] = Complex64::new(0.0, 0.0);
            for i in 0..n {
                m[(i, j)] = col[i].re;
            }
        }
        Ok(m)
    }

    /// `W^{1/2} A W^{-1/2}`, symmetric exactly when `A` is weighted
    /// self-adjoint.
    pub fn weighted_dense_matrix(&self) -> Result<Mat<f64>> {
        let m = self.dense_matrix()?;
        let sw: Vec<f64> = self.sum.weights().iter().map(|w| w.sqrt()).collect();
        let n = sw.len();
        Ok(Mat::from_fn(n, n, |i, j| sw[i] * m[(i, j)] / sw[j]))
    }

    /// Cached eigendecomposition of the weighted symmetrization.
    pub fn spectrum(&self) -> Result<Arc<DenseSpectrum>> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s.clone());
        }
        let s = self.weighted_dense_matrix()?;
        let spec = Arc::new(DenseSpectrum::new(&s, self.sum.weights(), SYMMETRY_THRESHOLD)?);
        Ok(self.spectrum.get_or_init(|| spec).clone())
    }
}

/// `|mean(s_i + s_e)|` relative to the larger source amplitude.
pub fn check_compatibility(s_i: &ScalarField, s_e: &ScalarField, total: &ScalarField) -> Result<()> {
    let scale = s_i.max_abs().max(s_e.max_abs());
    if scale == 0.0 {
        return Ok(());
    }
    let rel = total.mean().norm() / scale;
    if rel > COMPATIBILITY_TOL {
        return Err(Error::CompatibilityViolation { relative_mean: rel });
    }
    Ok(())
}
