//! Resolvent-estimate harness: sector sampling, the N functional, operator
//! norm estimates and sweep reports.

use std::f64::consts::PI;
use std::io::Write;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bidomain::{check_lambda, BidomainOperator, ResolventSolution};
use crate::error::{Error, Result};
use crate::field::{
    check_norm_index, discrete_gradient, discrete_norm, gradient_norm, pointwise_magnitude,
    second_difference_norm, weighted_lp_norm, ScalarField,
};
use crate::grid::{Boundary, GridSpec};
use crate::linalg::{dense_inverse, spectral_norm};

/// Slack allowed on the closed sector boundary `|arg lambda| = pi - eps`.
pub const ANGLE_TOL: f64 = 1e-12;
/// Default flatness tolerance on log-log slopes.
pub const SLOPE_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    pub epsilon: f64,
    #[serde(default)]
    pub m: f64,
    pub moduli: Vec<f64>,
    pub angles: Vec<f64>,
    /// Norm indices; `f64::INFINITY` is the sup norm.
    #[serde(with = "p_list")]
    pub p_list: Vec<f64>,
}

/// `10^lo, ..., 10^hi` with `per_decade` points per decade.
pub fn geometric_ladder(lo: i32, hi: i32, per_decade: usize) -> Vec<f64> {
    let steps = (hi - lo).max(0) as usize * per_decade.max(1);
    (0..=steps).map(|k| 10f64.powf(lo as f64 + k as f64 / per_decade.max(1) as f64)).collect()
}

/// `count` equally spaced angles covering the closed sector
/// `[-(pi - eps), pi - eps]`.
pub fn angle_grid(epsilon: f64, count: usize) -> Vec<f64> {
    let top = PI - epsilon;
    match count {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..count).map(|k| -top + 2.0 * top * k as f64 / (count - 1) as f64).collect(),
    }
}

impl SectorSpec {
    pub fn new(epsilon: f64, m: f64, moduli: Vec<f64>, angles: Vec<f64>, p_list: Vec<f64>) -> Result<Self> {
        let s = Self { epsilon, m, moduli, angles, p_list };
        s.validate()?;
        Ok(s)
    }

    /// Moduli `10^0..10^6`, angles `{0, +-(pi - eps)}`, `p in {2, inf}`.
    pub fn desk(epsilon: f64) -> Result<Self> {
        let top = PI - epsilon;
        Self::new(epsilon, 0.0, geometric_ladder(0, 6, 1), vec![-top, 0.0, top], vec![2.0, f64::INFINITY])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < PI / 2.0) {
            return Err(Error::InvalidArgument(format!("epsilon {} not in (0, pi/2)", self.epsilon)));
        }
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidArgument(format!("M = {} must be finite and >= 0", self.m)));
        }
        if self.moduli.is_empty() || self.angles.is_empty() || self.p_list.is_empty() {
            return Err(Error::InvalidArgument("moduli, angles and p-list must be nonempty".into()));
        }
        for &p in &self.p_list {
            check_norm_index(p)?;
        }
        if let Some(t) = self.angles.iter().find(|t| t.abs() >= PI) {
            let lam = Complex64::from_polar(self.moduli[0], *t);
            return Err(Error::LambdaOnCut { re: lam.re, im: 0.0 });
        }
        for lam in self.lambdas() {
            check_lambda(lam)?;
        }
        for &r in &self.moduli {
            if !(r.is_finite() && r > self.m) {
                return Err(Error::OutsideSector { re: r, im: 0.0, detail: format!("|lambda| = {r} not above M = {}", self.m) });
            }
        }
        for &t in &self.angles {
            if !(t.abs() <= PI - self.epsilon + ANGLE_TOL) {
                let lam = Complex64::from_polar(self.moduli[0], t);
                return Err(Error::OutsideSector {
                    re: lam.re,
                    im: lam.im,
                    detail: format!("|arg| = {} exceeds pi - eps = {}", t.abs(), PI - self.epsilon),
                });
            }
        }
        Ok(())
    }

    /// Every sampled `lambda = r e^{i theta}` with its modulus and angle.
    pub fn samples(&self) -> Vec<(f64, f64, Complex64)> {
        let mut out = Vec::with_capacity(self.moduli.len() * self.angles.len());
        for &r in &self.moduli {
            for &t in &self.angles {
                out.push((r, t, sample_lambda(r, t)));
            }
        }
        out
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.samples().into_iter().map(|s| s.2).collect()
    }
}

/// `r e^{i theta}`, with the imaginary part pinned to zero at `theta = 0` so
/// real samples stay exactly real.
fn sample_lambda(r: f64, theta: f64) -> Complex64 {
    if theta == 0.0 {
        Complex64::new(r, 0.0)
    } else {
        Complex64::from_polar(r, theta)
    }
}

/// Human-facing label of a norm index.
pub fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

fn parse_p(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "inf" | "infinity" | "Inf" | "INF" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| format!("bad norm index {t:?}")),
    }
}

mod p_list {
    use super::{p_label, parse_p};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum P {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let out: Vec<P> = v.iter().map(|p| if p.is_finite() { P::Num(*p) } else { P::Text(p_label(*p)) }).collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<P> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|p| match p {
                P::Num(x) => Ok(x),
                P::Text(t) => parse_p(&t).map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

/// `sup_x |lambda||u| + |lambda|^{1/2} (|grad u| + |grad u_i| + |grad u_e|)`.
pub fn n_functional(sol: &ResolventSolution) -> f64 {
    let lam = sol.lambda.norm();
    let gu = pointwise_magnitude(&discrete_gradient(&sol.u));
    let gi = pointwise_magnitude(&discrete_gradient(&sol.u_i));
    let ge = pointwise_magnitude(&discrete_gradient(&sol.u_e));
    (0..sol.u.len())
        .map(|k| lam * sol.u.values()[k].norm() + lam.sqrt() * (gu[k] + gi[k] + ge[k]))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub kind: EstimateKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormMethod {
    /// Dense formula under the dense cap for `p = 2, inf`, probing otherwise.
    Auto,
    /// Random-sign probing with `probes` starts and Hager refinement.
    Probe { probes: usize, seed: u64 },
}

/// Dense resolvent `(lambda + A)^{-1}` in nodal coordinates.
pub fn dense_resolvent(op: &BidomainOperator, lambda: Complex64) -> Result<Mat<Complex64>> {
    check_lambda(lambda)?;
    let m = op.dense_matrix()?;
    let n = m.nrows();
    let shifted = Mat::<Complex64>::from_fn(n, n, |i, j| {
        let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
        d + m[(i, j)]
    });
    Ok(dense_inverse(&shifted))
}

/// Operator norm of `(lambda + A)^{-1}` on discrete `L^p`.
pub fn resolvent_norm(op: &BidomainOperator, lambda: Complex64, p: f64, method: NormMethod) -> Result<NormEstimate> {
    check_lambda(lambda)?;
    check_norm_index(p)?;
    let dense_ok = op.grid().len() <= op.config().dense_cap;
    match method {
        NormMethod::Auto if dense_ok && (p == 2.0 || p.is_infinite()) => {
            let r = dense_resolvent(op, lambda)?;
            let n = r.nrows();
            let value = if p == 2.0 {
                let sw: Vec<f64> = op.elliptic_sum().weights().iter().map(|w| w.sqrt()).collect();
                spectral_norm(&Mat::from_fn(n, n, |i, j| r[(i, j)] * (sw[i] / sw[j])))?
            } else {
                (0..n).map(|i| (0..n).map(|j| r[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
            };
            Ok(NormEstimate { value, kind: EstimateKind::Exact })
        }
        NormMethod::Auto => probe_norm(op, lambda, p, 8, 0),
        NormMethod::Probe { probes, seed } => probe_norm(op, lambda, p, probes, seed),
    }
}

/// Lower bound `max ||R f||_p / ||f||_p` over random sign vectors, refined
/// for `p = inf` by Hager-style row sweeps (row `i` of `R` is
/// `W R W^{-1} e_i` by weighted self-adjointness).
fn probe_norm(op: &BidomainOperator, lambda: Complex64, p: f64, probes: usize, seed: u64) -> Result<NormEstimate> {
    let grid = op.grid().clone();
    let w = op.elliptic_sum().weights().to_vec();
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    let norm = |v: &[Complex64]| weighted_lp_norm(v, &w, p);
    for _ in 0..probes.max(1) {
        let x: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0)).collect();
        let mut x = ScalarField::new(grid.clone(), x)?;
        let mut y = op.resolvent(lambda, &x)?;
        let mut est = norm(y.values()) / norm(x.values());
        if p.is_infinite() {
            for _ in 0..5 {
                let i = argmax_abs(y.values());
                let mut e = vec![Complex64::new(0.0, 0.0); n];
                e[i] = Complex64::new(1.0 / w[i], 0.0);
                let col = op.resolvent(lambda, &ScalarField::new(grid.clone(), e)?)?;
                let row: Vec<Complex64> = col.values().iter().zip(&w).map(|(v, w)| v * w).collect();
                let row_sum: f64 = row.iter().map(|v| v.norm()).sum();
                if row_sum <= est * (1.0 + 1e-12) {
                    est = est.max(row_sum);
                    break;
                }
                est = row_sum;
                let signs: Vec<Complex64> = row
                    .iter()
                    .map(|v| if v.norm() > 0.0 { v.conj() / v.norm() } else { Complex64::new(1.0, 0.0) })
                    .collect();
                x = ScalarField::new(grid.clone(), signs)?;
                y = op.resolvent(lambda, &x)?;
                est = est.max(norm(y.values()) / norm(x.values()));
            }
        }
        best = best.max(est);
    }
    Ok(NormEstimate { value: best, kind: EstimateKind::LowerBound })
}

fn argmax_abs(v: &[Complex64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.norm() > v[best].norm() {
            best = i;
        }
    }
    best
}

/// `max ||R(l)s - R(m)s - (m - l) R(l) R(m) s||_2 / ||s||_2` over random
/// real sources.
pub fn pseudo_resolvent_defect(
    op: &BidomainOperator,
    lambda: Complex64,
    mu: Complex64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_lambda(mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let s = ScalarField::random_real(op.grid(), &mut rng);
        let rl = op.resolvent(lambda, &s)?;
        let rm = op.resolvent(mu, &s)?;
        let rlrm = op.resolvent(lambda, &rm)?;
        let d = rl.sub(&rm)?.sub(&rlrm.scale(mu - lambda))?;
        worst = worst.max(d.norm2() / s.norm2());
    }
    Ok(worst)
}

/// Smooth random source: a few low-frequency products of cosines with
/// random amplitudes (random phases on periodic axes), scaled to sup norm 1.
pub fn smooth_random_source<R: Rng + ?Sized>(grid: &GridSpec, rng: &mut R) -> ScalarField {
    let d = grid.dim();
    let terms: Vec<(f64, Vec<(f64, f64)>)> = (0..6)
        .map(|_| {
            let amp = rng.gen_range(-1.0..1.0);
            let axes = (0..d)
                .map(|k| {
                    let m = rng.gen_range(0..=3) as f64;
                    let l = grid.extents()[k];
                    match grid.boundary(k) {
                        Boundary::Periodic => (2.0 * PI * m / l, rng.gen_range(0.0..2.0 * PI)),
                        Boundary::NeumannBox => (PI * m / l, 0.0),
                    }
                })
                .collect();
            (amp, axes)
        })
        .collect();
    let f = ScalarField::from_fn(grid, |x| {
        let v: f64 = terms
            .iter()
            .map(|(a, axes)| a * axes.iter().enumerate().map(|(k, (w, ph))| (w * x[k] + ph).cos()).product::<f64>())
            .sum();
        Complex64::new(v, 0.0)
    });
    let m = f.max_abs();
    if m > 0.0 {
        f.scale(Complex64::new(1.0 / m, 0.0))
    } else {
        ScalarField::constant(grid, Complex64::new(1.0, 0.0))
    }
}

/// Source 0 is the constant one; the rest are smooth random sources drawn
/// from `seed`.
pub fn sweep_sources(grid: &GridSpec, random: usize, seed: u64) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![ScalarField::constant(grid, Complex64::new(1.0, 0.0))];
    out.extend((0..random).map(|_| smooth_random_source(grid, &mut rng)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub modulus: f64,
    pub theta: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub p: f64,
    pub source_id: usize,
    /// `|lambda| ||u||_p / ||s||_p`
    pub norm_ratio: f64,
    /// `|lambda|^{1/2} ||grad u||_p / ||s||_p`
    pub grad_ratio: f64,
    /// `||D^2 u||_p / ||s||_p`
    pub hess_ratio: f64,
    /// `N(u, u_i, u_e, lambda) / ||s||_inf`
    pub n_value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub source_id: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSummary {
    pub p: String,
    /// Largest `|lambda| ||u||_p / ||s||_p` over the sweep.
    pub c_hat: f64,
    pub grad_max: f64,
    pub hess_max: f64,
    pub slope_norm: f64,
    pub slope_grad: f64,
    pub slope_hess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub epsilon: f64,
    pub per_p: Vec<NormSummary>,
    pub n_max: f64,
    pub slope_n: f64,
    /// Smallest modulus included in the slope fits.
    pub fit_from: f64,
    pub max_residual: f64,
    pub slope_tol: f64,
    /// No ratio grows faster than `|lambda|^{slope_tol}` over the fit range.
    pub flat: bool,
    pub failures: Vec<SampleFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorSweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

pub const CSV_HEADER: &str = "lambda_re,lambda_im,p,source_id,norm_ratio,grad_ratio,hess_ratio,n_value,residual";

impl SectorSweepReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:e},{:e},{},{},{:e},{:e},{:e},{:e},{:e}",
                r.lambda_re,
                r.lambda_im,
                p_label(r.p),
                r.source_id,
                r.norm_ratio,
                r.grad_ratio,
                r.hess_ratio,
                r.n_value,
                r.residual
            )?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// Least-squares slope of `log y` against `log x`; points with
/// non-positive coordinates are skipped.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Per-modulus maximum of `metric` over the rows passing `keep`, as
/// `(modulus, max)` pairs in increasing modulus.
fn envelope(rows: &[SweepRow], keep: impl Fn(&SweepRow) -> bool, metric: impl Fn(&SweepRow) -> f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for r in rows.iter().filter(|r| keep(r)) {
        match out.iter_mut().find(|(m, _)| *m == r.modulus) {
            Some(e) => e.1 = e.1.max(metric(r)),
            None => out.push((r.modulus, metric(r))),
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Slope of the envelope over the top two decades of moduli.
fn top_slope(env: &[(f64, f64)], fit_from: f64) -> f64 {
    let pts: Vec<(f64, f64)> = env.iter().copied().filter(|(m, _)| *m >= fit_from).collect();
    loglog_slope(&pts)
}

/// Rebuild the summary from rows alone.
pub fn summarize(spec: &SectorSpec, rows: &[SweepRow], failures: Vec<SampleFailure>, slope_tol: f64) -> SweepSummary {
    let top = rows.iter().map(|r| r.modulus).fold(0.0, f64::max);
    let fit_from = top / 100.0 * (1.0 - 1e-12);
    let mut per_p = Vec::new();
    let mut flat = failures.is_empty();
    for &p in &spec.p_list {
        let is_p = |r: &SweepRow| r.p == p;
        let en = envelope(rows, is_p, |r| r.norm_ratio);
        let eg = envelope(rows, is_p, |r| r.grad_ratio);
        let eh = envelope(rows, is_p, |r| r.hess_ratio);
        let s = NormSummary {
            p: p_label(p),
            c_hat: en.iter().map(|e| e.1).fold(0.0, f64::max),
            grad_max: eg.iter().map(|e| e.1).fold(0.0, f64::max),
            hess_max: eh.iter().map(|e| e.1).fold(0.0, f64::max),
            slope_norm: top_slope(&en, fit_from),
            slope_grad: top_slope(&eg, fit_from),
            slope_hess: top_slope(&eh, fit_from),
        };
        flat &= s.slope_norm <= slope_tol && s.slope_grad <= slope_tol && s.slope_hess <= slope_tol;
        per_p.push(s);
    }
    let en = envelope(rows, |_| true, |r| r.n_value);
    let slope_n = top_slope(&en, fit_from);
    flat &= slope_n <= slope_tol;
    SweepSummary {
        epsilon: spec.epsilon,
        per_p,
        n_max: en.iter().map(|e| e.1).fold(0.0, f64::max),
        slope_n,
        fit_from: if rows.is_empty() { 0.0 } else { fit_from },
        max_residual: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        slope_tol,
        flat,
        failures,
    }
}

/// Solve every `(lambda, source)` sample in parallel and tabulate the
/// graded ratios for each `p`. Sample failures are collected rather than
/// aborting the sweep.
pub fn sweep_sector(op: &BidomainOperator, spec: &SectorSpec, sources: &[ScalarField]) -> Result<SectorSweepReport> {
    spec.validate()?;
    if sources.is_empty() {
        return Err(Error::InvalidArgument("no sources".into()));
    }
    for s in sources {
        if s.grid() != op.grid() {
            return Err(Error::GridMismatch);
        }
    }
    let results: Vec<(Vec<SweepRow>, Vec<SampleFailure>)> = spec
        .samples()
        .into_par_iter()
        .map(|(r, t, lam)| {
            let mut rows = Vec::new();
            let mut fails = Vec::new();
            for (sid, s) in sources.iter().enumerate() {
                match sample_rows(op, spec, r, t, lam, sid, s) {
                    Ok(mut v) => rows.append(&mut v),
                    Err(e) => fails.push(SampleFailure {
                        lambda_re: lam.re,
                        lambda_im: lam.im,
                        source_id: sid,
                        message: e.to_string(),
                    }),
                }
            }
            (rows, fails)
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in results {
        rows.extend(r);
        failures.extend(f);
    }
    rows.sort_by(|a, b| {
        a.modulus
            .total_cmp(&b.modulus)
            .then(a.theta.total_cmp(&b.theta))
            .then(a.p.total_cmp(&b.p))
            .then(a.source_id.cmp(&b.source_id))
    });
    failures.sort_by(|a, b| {
        (a.lambda_re, a.lambda_im, a.source_id)
            .partial_cmp(&(b.lambda_re, b.lambda_im, b.source_id))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let summary = summarize(spec, &rows, failures, SLOPE_TOL);
    Ok(SectorSweepReport { rows, summary })
}

fn sample_rows(
    op: &BidomainOperator,
    spec: &SectorSpec,
    modulus: f64,
    theta: f64,
    lam: Complex64,
    source_id: usize,
    s: &ScalarField,
) -> Result<Vec<SweepRow>> {
    let sol = op.solve_resolvent(lam, s)?;
    let n_value = n_functional(&sol) / discrete_norm(s, f64::INFINITY)?;
    let residual = sol.residuals.operator.max(sol.residuals.elliptic);
    let mut rows = Vec::with_capacity(spec.p_list.len());
    for &p in &spec.p_list {
        let sn = discrete_norm(s, p)?;
        rows.push(SweepRow {
            modulus,
            theta,
            lambda_re: lam.re,
            lambda_im: lam.im,
            p,
            source_id,
            norm_ratio: modulus * discrete_norm(&sol.u, p)? / sn,
            grad_ratio: modulus.sqrt() * gradient_norm(&sol.u, p)? / sn,
            hess_ratio: second_difference_norm(&sol.u, p)? / sn,
            n_value,
            residual,
        });
    }
    Ok(rows)
}

/// `C_hat(eps)` (largest `|lambda| ||u||_p / ||s||_p`) for each `eps`,
/// sampling the closed sector with `angles` equally spaced angles.
pub fn epsilon_trend(
    op: &BidomainOperator,
    epsilons: &[f64],
    moduli: &[f64],
    angles: usize,
    p: f64,
    sources: &[ScalarField],
) -> Result<Vec<(f64, f64)>> {
    epsilons
        .iter()
        .map(|&eps| {
            let spec = SectorSpec::new(eps, 0.0, moduli.to_vec(), angle_grid(eps, angles), vec![p])?;
            let rep = sweep_sector(op, &spec, sources)?;
            Ok((eps, rep.summary.per_p[0].c_hat))
        })
        .collect()
}
