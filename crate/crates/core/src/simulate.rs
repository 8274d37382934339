//! IMEX time stepping of the nonlinear bidomain system
//!
//! ```text
//! u_t + A u + f(u, w) = s(t),   w_t + g(u, w) = 0,
//! s(t) = s_i(t) - A_i (A_i + A_e)^{-1} (s_i(t) + s_e(t)),
//! ```
//!
//! with `A` implicit (one resolvent solve at `lambda = 1/dt` per step) and
//! `f`, `g`, `s` explicit. `u_e` is recovered after every step.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bidomain::{check_compatibility, BidomainOperator};
use crate::config::{wrapped_distance_sq, ConductivityConfig, FieldInit, GridConfig};
use crate::elliptic::SolverConfig;
use crate::error::{Error, Result};
use crate::field::{project_mean_zero, ScalarField};
use crate::grid::GridSpec;
use crate::ionic::{IonicConfig, IonicModel};
use crate::semigroup::substeps;
use crate::spectral::{fractional_apply, PowerSign};

const SOURCE_CACHE: usize = 8;

/// Source pair `(s_i(t), s_e(t))`.
pub trait SourceTerm: Send + Sync {
    fn sources(&self, t: f64) -> Result<(ScalarField, ScalarField)>;
}

/// No applied current.
#[derive(Debug, Clone)]
pub struct NoSource {
    grid: GridSpec,
}

impl NoSource {
    pub fn new(grid: &GridSpec) -> Self {
        Self { grid: grid.clone() }
    }
}

impl SourceTerm for NoSource {
    fn sources(&self, _t: f64) -> Result<(ScalarField, ScalarField)> {
        Ok((ScalarField::zeros(&self.grid), ScalarField::zeros(&self.grid)))
    }
}

/// Sampled sources, linearly interpolated in time and held constant
/// outside the sampled range.
#[derive(Debug, Clone)]
pub struct SourceSchedule {
    times: Vec<f64>,
    s_i: Vec<ScalarField>,
    s_e: Vec<ScalarField>,
}

impl SourceSchedule {
    pub fn new(times: Vec<f64>, s_i: Vec<ScalarField>, s_e: Vec<ScalarField>) -> Result<Self> {
        if times.is_empty() || times.len() != s_i.len() || times.len() != s_e.len() {
            return Err(Error::InvalidArgument("schedule needs matching nonempty samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("schedule times must increase strictly".into()));
        }
        for (a, b) in s_i.iter().zip(&s_e) {
            a.check_same_grid(b)?;
            a.check_same_grid(&s_i[0])?;
            check_compatibility(a, b, &a.add(b)?)?;
        }
        Ok(Self { times, s_i, s_e })
    }
}

impl SourceTerm for SourceSchedule {
    fn sources(&self, t: f64) -> Result<(ScalarField, ScalarField)> {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return Ok((self.s_i[0].clone(), self.s_e[0].clone()));
        }
        if t >= self.times[last] {
            return Ok((self.s_i[last].clone(), self.s_e[last].clone()));
        }
        let k = self.times.partition_point(|x| *x <= t) - 1;
        let th = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        let lerp = |a: &ScalarField, b: &ScalarField| a.scale(Complex64::new(1.0 - th, 0.0)).axpy(Complex64::new(th, 0.0), b);
        Ok((lerp(&self.s_i[k], &self.s_i[k + 1])?, lerp(&self.s_e[k], &self.s_e[k + 1])?))
    }
}

/// How the extracellular source balances a stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnPath {
    /// `s_e = -s_i`.
    #[default]
    Opposite,
    /// `s_e = -mean(s_i)`, spread uniformly.
    Uniform,
    /// `s_e = 0`; only compatible for mean-zero stimuli.
    None,
}

/// Box-shaped stimulus active on `[t_on, t_off)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusConfig {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub amplitude: f64,
    pub t_on: f64,
    pub t_off: f64,
    #[serde(default)]
    pub return_path: ReturnPath,
}

#[derive(Debug, Clone)]
pub struct StimulusSet {
    grid: GridSpec,
    items: Vec<(ScalarField, ScalarField, f64, f64)>,
}

impl StimulusSet {
    pub fn new(grid: &GridSpec, stimuli: &[StimulusConfig]) -> Result<Self> {
        let mut items = Vec::new();
        for s in stimuli {
            if s.center.len() != grid.dim() || !(s.half_width > 0.0) || !(s.t_off >= s.t_on) {
                return Err(Error::InvalidArgument("stimulus needs a d-vector center, positive width, t_off >= t_on".into()));
            }
            let r2 = s.half_width * s.half_width;
            let si = ScalarField::from_fn(grid, |x| {
                Complex64::new(if wrapped_distance_sq(grid, x, &s.center) <= r2 { s.amplitude } else { 0.0 }, 0.0)
            });
            let se = match s.return_path {
                ReturnPath::Opposite => si.scale(Complex64::new(-1.0, 0.0)),
                ReturnPath::Uniform => ScalarField::constant(grid, -si.mean()),
                ReturnPath::None => ScalarField::zeros(grid),
            };
            check_compatibility(&si, &se, &si.add(&se)?)?;
            items.push((si, se, s.t_on, s.t_off));
        }
        Ok(Self { grid: grid.clone(), items })
    }
}

impl SourceTerm for StimulusSet {
    fn sources(&self, t: f64) -> Result<(ScalarField, ScalarField)> {
        let mut si = ScalarField::zeros(&self.grid);
        let mut se = ScalarField::zeros(&self.grid);
        for (a, b, on, off) in &self.items {
            if t >= *on && t < *off {
                si = si.add(a)?;
                se = se.add(b)?;
            }
        }
        Ok((si, se))
    }
}

/// `t -> s_i(t) - A_i (A_i + A_e)^{-1} (s_i(t) + s_e(t))`, cached per `t`.
pub struct ModifiedSource<'a> {
    op: &'a BidomainOperator,
    term: &'a dyn SourceTerm,
    cache: Mutex<HashMap<u64, ScalarField>>,
}

pub fn make_source<'a>(op: &'a BidomainOperator, term: &'a dyn SourceTerm) -> ModifiedSource<'a> {
    ModifiedSource { op, term, cache: Mutex::new(HashMap::new()) }
}

impl ModifiedSource<'_> {
    pub fn eval(&self, t: f64) -> Result<ScalarField> {
        if let Some(s) = self.cache.lock().expect("source cache").get(&t.to_bits()) {
            return Ok(s.clone());
        }
        let (si, se) = self.term.sources(t)?;
        let s = modified_source(self.op, &si, &se)?;
        let mut cache = self.cache.lock().expect("source cache");
        if cache.len() >= SOURCE_CACHE {
            cache.clear();
        }
        cache.insert(t.to_bits(), s.clone());
        Ok(s)
    }

    pub fn raw(&self, t: f64) -> Result<(ScalarField, ScalarField)> {
        self.term.sources(t)
    }
}

/// One evaluation of the modified source.
pub fn modified_source(op: &BidomainOperator, s_i: &ScalarField, s_e: &ScalarField) -> Result<ScalarField> {
    if s_i.grid() != op.grid() || s_e.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    let total = s_i.add(s_e)?;
    check_compatibility(s_i, s_e, &total)?;
    if total.max_abs() == 0.0 {
        return Ok(s_i.clone());
    }
    let v = op.elliptic_sum().solve_mean_zero(&project_mean_zero(&total))?;
    s_i.sub(&op.intra().apply(&v)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// `||(u1 - u0)/dt + A u1 + f(u1, w1) - s(t1)||_2`, consistent at O(dt).
    pub step_residual: f64,
    /// Relative mean of `s_i + s_e` at the new time.
    pub compatibility_defect: f64,
    /// Relative residual of `A_i u + (A_i + A_e) u_e = s_i + s_e`.
    pub elliptic_residual: f64,
    /// Relative mean of `u_e`.
    pub mean_ue: f64,
    pub u_sup: f64,
    pub w_sup: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t: f64,
    pub step: usize,
    pub u: ScalarField,
    pub w: Vec<ScalarField>,
    pub u_e: ScalarField,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub u_sup: f64,
    pub w_sup: f64,
    pub compatibility_defect: f64,
    pub step_residual: f64,
    /// Rightmost downward crossing of the front level (1-d grids only).
    pub front: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States at `t = 0`, every `stride` steps, and the final time.
    pub states: Vec<SimulationState>,
    pub series: Vec<TimeSeriesRow>,
    pub dt: f64,
}

pub const SERIES_HEADER: &str = "t,u_sup,w_sup,compatibility_defect,step_residual,front";

impl Trajectory {
    pub fn final_state(&self) -> &SimulationState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn write_series_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_series_csv(&self.series, out)
    }
}

pub fn write_series_csv<W: Write>(series: &[TimeSeriesRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SERIES_HEADER}")?;
    for r in series {
        let front = r.front.map(|x| format!("{x:e}")).unwrap_or_default();
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{}",
            r.t, r.u_sup, r.w_sup, r.compatibility_defect, r.step_residual, front
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    /// Overrides the model's trust radius.
    pub trust_radius: Option<f64>,
    /// Level tracked by the front position column.
    pub front_level: Option<f64>,
}

/// Rightmost `x` where a 1-d field drops through `level` (linear
/// interpolation, periodic wrap ignored).
pub fn front_position(u: &ScalarField, level: f64) -> Option<f64> {
    let g = u.grid();
    if g.dim() != 1 {
        return None;
    }
    let h = g.spacing(0);
    let v = u.real_parts();
    (0..v.len() - 1)
        .rev()
        .find(|&j| v[j] >= level && v[j + 1] < level)
        .map(|j| (j as f64 + (v[j] - level) / (v[j] - v[j + 1])) * h)
}

fn sup(fields: &[ScalarField]) -> f64 {
    fields.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
}

fn reaction(model: &dyn IonicModel, u: &ScalarField, w: &[ScalarField]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = model.gating_dim();
    let n = u.len();
    let mut f = Vec::with_capacity(n);
    let mut g = vec![vec![0.0; n]; m];
    let mut wk = vec![0.0; m];
    let mut gk = vec![0.0; m];
    for k in 0..n {
        for (j, wf) in w.iter().enumerate() {
            wk[j] = wf.values()[k].re;
        }
        let uk = u.values()[k].re;
        f.push(model.current(uk, &wk));
        model.gating_rate(uk, &wk, &mut gk);
        for j in 0..m {
            g[j][k] = gk[j];
        }
    }
    (f, g)
}

/// Run the IMEX scheme. `observer` sees every accepted state; the returned
/// trajectory keeps the strided ones.
pub fn simulate_bidomain(
    op: &BidomainOperator,
    model: &dyn IonicModel,
    u0: &ScalarField,
    w0: &[ScalarField],
    sources: &dyn SourceTerm,
    params: &SimulationParams,
    mut observer: impl FnMut(&SimulationState),
) -> Result<Trajectory> {
    let grid = op.grid().clone();
    if u0.grid() != &grid || w0.iter().any(|w| w.grid() != &grid) {
        return Err(Error::GridMismatch);
    }
    if w0.len() != model.gating_dim() {
        return Err(Error::InvalidArgument(format!("model needs {} gating fields, got {}", model.gating_dim(), w0.len())));
    }
    if !(params.dt > 0.0 && params.t_end > 0.0 && params.dt.is_finite() && params.t_end.is_finite()) {
        return Err(Error::InvalidArgument("dt and t_end must be positive".into()));
    }
    let radius = params.trust_radius.unwrap_or(model.trust_radius());
    let stride = params.stride.max(1);
    let (steps, dt) = substeps(params.t_end, params.dt);
    let lam = Complex64::new(1.0 / dt, 0.0);
    let src = make_source(op, sources);
    let re = |v: f64| Complex64::new(v, 0.0);

    let sup0 = u0.max_abs().max(sup(w0));
    if sup0 > radius {
        return Err(Error::TrustRegionExceeded { time: 0.0, blowup_estimate: 0.0 });
    }
    let (si0, se0) = src.raw(0.0)?;
    let ue0 = op.recover_extracellular(u0, Some((&si0, &se0)))?;
    let diag0 = StepDiagnostics {
        step_residual: 0.0,
        compatibility_defect: compat_defect(&si0, &se0)?,
        elliptic_residual: elliptic_residual(op, u0, &ue0, &si0, &se0)?,
        mean_ue: ue0.relative_mean(),
        u_sup: u0.max_abs(),
        w_sup: sup(w0),
    };
    let mut state = SimulationState { t: 0.0, step: 0, u: u0.clone(), w: w0.to_vec(), u_e: ue0, diagnostics: diag0 };
    observer(&state);
    let front = |u: &ScalarField| params.front_level.and_then(|l| front_position(u, l));
    let mut series = vec![row(&state, front(&state.u))];
    let mut states = vec![state.clone()];

    for n in 0..steps {
        let t0 = n as f64 * dt;
        let t1 = (n + 1) as f64 * dt;
        let s0 = src.eval(t0)?;
        let (f0, g0) = reaction(model, &state.u, &state.w);
        let rhs: Vec<Complex64> = (0..grid.len())
            .map(|k| state.u.values()[k] * lam + s0.values()[k] - f0[k])
            .collect();
        let u1 = op.resolvent(lam, &ScalarField::new(grid.clone(), rhs)?)?;
        let w1: Vec<ScalarField> = state
            .w
            .iter()
            .zip(&g0)
            .map(|(w, g)| {
                let v = w.values().iter().zip(g).map(|(w, g)| w - re(dt * g)).collect();
                ScalarField::new(grid.clone(), v)
            })
            .collect::<Result<_>>()?;

        let sup1 = u1.max_abs().max(sup(&w1));
        if !(sup1 <= radius) {
            let before = state.u.max_abs().max(sup(&state.w));
            let frac = if sup1.is_finite() && sup1 > before { (radius - before) / (sup1 - before) } else { 0.0 };
            return Err(Error::TrustRegionExceeded { time: t1, blowup_estimate: t0 + dt * frac.clamp(0.0, 1.0) });
        }

        let (si1, se1) = src.raw(t1)?;
        let s1 = src.eval(t1)?;
        let u_e = op.recover_extracellular(&u1, Some((&si1, &se1)))?;
        let (f1, _) = reaction(model, &u1, &w1);
        let au1 = op.apply(&u1)?;
        let resid: Vec<Complex64> = (0..grid.len())
            .map(|k| (u1.values()[k] - state.u.values()[k]) / dt + au1.values()[k] + f1[k] - s1.values()[k])
            .collect();
        let diagnostics = StepDiagnostics {
            step_residual: ScalarField::new(grid.clone(), resid)?.norm2(),
            compatibility_defect: compat_defect(&si1, &se1)?,
            elliptic_residual: elliptic_residual(op, &u1, &u_e, &si1, &se1)?,
            mean_ue: u_e.relative_mean(),
            u_sup: u1.max_abs(),
            w_sup: sup(&w1),
        };
        state = SimulationState { t: t1, step: n + 1, u: u1, w: w1, u_e, diagnostics };
        observer(&state);
        series.push(row(&state, front(&state.u)));
        if (n + 1) % stride == 0 || n + 1 == steps {
            states.push(state.clone());
        }
    }
    Ok(Trajectory { states, series, dt })
}

fn row(s: &SimulationState, front: Option<f64>) -> TimeSeriesRow {
    TimeSeriesRow {
        t: s.t,
        u_sup: s.diagnostics.u_sup,
        w_sup: s.diagnostics.w_sup,
        compatibility_defect: s.diagnostics.compatibility_defect,
        step_residual: s.diagnostics.step_residual,
        front,
    }
}

fn compat_defect(si: &ScalarField, se: &ScalarField) -> Result<f64> {
    let scale = si.max_abs().max(se.max_abs());
    Ok(if scale == 0.0 { 0.0 } else { si.add(se)?.mean().norm() / scale })
}

fn elliptic_residual(
    op: &BidomainOperator,
    u: &ScalarField,
    u_e: &ScalarField,
    si: &ScalarField,
    se: &ScalarField,
) -> Result<f64> {
    let ai_u = op.intra().apply(u)?;
    let rhs = si.add(se)?;
    let r = ai_u.add(&op.elliptic_sum().apply(u_e)?)?.sub(&rhs)?;
    let scale = ai_u.norm2().max(rhs.norm2());
    Ok(if scale == 0.0 { r.norm2() } else { r.norm2() / scale })
}

/// Complete description of a run, loadable from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub grid: GridConfig,
    pub sigma_i: ConductivityConfig,
    pub sigma_e: ConductivityConfig,
    #[serde(default)]
    pub ionic: IonicConfig,
    #[serde(default)]
    pub initial_u: FieldInit,
    /// Constant initial value of each gating variable.
    #[serde(default = "default_w0")]
    pub initial_w: Vec<f64>,
    #[serde(default)]
    pub stimuli: Vec<StimulusConfig>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub trust_radius: Option<f64>,
    #[serde(default)]
    pub front_level: Option<f64>,
    /// Report `||u0||_{Z^alpha}` (small grids only).
    #[serde(default)]
    pub z_alpha: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_w0() -> Vec<f64> {
    vec![0.0]
}

fn default_stride() -> usize {
    1
}

/// Everything needed to call [`simulate_bidomain`], built from a config.
pub struct PreparedRun {
    pub op: BidomainOperator,
    pub model: Box<dyn IonicModel>,
    pub u0: ScalarField,
    pub w0: Vec<ScalarField>,
    pub sources: StimulusSet,
    pub params: SimulationParams,
    /// `||(A + 1)^alpha u0||_2` when requested.
    pub z_alpha_norm: Option<f64>,
}

impl SimulationConfig {
    pub fn prepare(&self, seed: u64) -> Result<PreparedRun> {
        let grid = self.grid.build()?;
        let op = BidomainOperator::new(self.sigma_i.build(&grid)?, self.sigma_e.build(&grid)?, self.solver)?;
        let model = self.ionic.build()?;
        if self.initial_w.len() != model.gating_dim() {
            return Err(Error::InvalidArgument(format!(
                "initial_w has {} entries, model needs {}",
                self.initial_w.len(),
                model.gating_dim()
            )));
        }
        let u0 = self.initial_u.build(&grid, seed)?;
        let w0 = self.initial_w.iter().map(|w| ScalarField::constant(&grid, Complex64::new(*w, 0.0))).collect();
        let sources = StimulusSet::new(&grid, &self.stimuli)?;
        let params = SimulationParams {
            dt: self.dt,
            t_end: self.t_end,
            stride: self.stride,
            trust_radius: self.trust_radius,
            front_level: self.front_level,
        };
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return Err(Error::InvalidArgument("dt and t_end must be positive".into()));
        }
        let z_alpha_norm = match self.z_alpha {
            Some(alpha) => Some(fractional_apply(&op, alpha, 1.0, &u0, PowerSign::Positive)?.z_norm),
            None => None,
        };
        Ok(PreparedRun { op, model, u0, w0, sources, params, z_alpha_norm })
    }
}

impl PreparedRun {
    pub fn run(&self, observer: impl FnMut(&SimulationState)) -> Result<Trajectory> {
        simulate_bidomain(&self.op, self.model.as_ref(), &self.u0, &self.w0, &self.sources, &self.params, observer)
    }
}
