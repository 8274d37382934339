use std::fs::File;
use std::io::{BufWriter, Write};

use bidomain::bidomain::check_lambda;
use bidomain::field::{project_mean_zero, ScalarField};
use bidomain::fourier::{even_extension_all, reflected_problem, restrict, ConstantCoeffProblem};
use bidomain::io::{write_field, write_fields_csv};
use bidomain::probe::{pseudo_resolvent_defect, summarize, sweep_sector, sweep_sources};
use bidomain::simulate::{front_position, write_series_csv, SimulationState, TimeSeriesRow};
use bidomain::spectral::{fractional_apply, PowerSign};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::Outputs;
use crate::CliError;

#[derive(Debug, Serialize)]
struct CheckLine {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
    note: String,
}

impl CheckLine {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, value, threshold, pass: value <= threshold, note: String::new() }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, value, threshold, pass: value >= threshold, note: String::new() }
    }
}

fn json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn finish(lines: &[CheckLine], what: &str) -> Result<(), CliError> {
    for l in lines {
        println!("{:<28} {:>12.3e}  (threshold {:.1e})  {}", l.name, l.value, l.threshold, if l.pass { "ok" } else { "FAIL" });
    }
    let failed: Vec<_> = lines.iter().filter(|l| !l.pass).map(|l| l.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{what}: {} failed", failed.join(", "))))
    }
}

/// Random `lambda` with `|lambda|` log-uniform in `[1, 1e4]` inside the
/// sector `|arg| < pi - eps`.
fn sector_lambda(rng: &mut ChaCha8Rng, eps: f64) -> Complex64 {
    let top = std::f64::consts::PI - eps;
    Complex64::from_polar(10f64.powf(rng.gen_range(0.0..4.0)), rng.gen_range(-top..top))
}

pub fn check_operator(cfg: &RunConfig, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let c = &cfg.check;
    let op = cfg.operator()?;
    let g = op.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();

    let adj = op.adjoint_defect(c.adjoint_trials, seed)?;
    lines.push(CheckLine::at_most("adjoint_defect", adj.defect, c.symmetry_tol));
    lines.push(CheckLine::at_least("min_quadratic_form", adj.min_form, -c.symmetry_tol));

    let ones = ScalarField::constant(&g, Complex64::new(1.0, 0.0));
    lines.push(CheckLine::at_most("constants_in_kernel", op.apply(&ones)?.norm2(), 1e-10));

    let f = ScalarField::random_real(&g, &mut rng);
    let af = op.apply(&f)?;
    let alt = op.apply_alternative(&f)?;
    lines.push(CheckLine::at_most("alternative_form", alt.sub(&af)?.norm2() / af.norm2().max(f64::MIN_POSITIVE), c.symmetry_tol));

    match op.spectrum() {
        Ok(spec) => {
            lines.push(CheckLine::at_least("min_eigenvalue", spec.min_eigenvalue(), -c.eigen_tol));
            let k = spec.kernel(1e-9).len() as f64;
            let mut l = CheckLine::at_most("kernel_dimension", k, 1.0);
            l.pass = k == 1.0;
            lines.push(l);
        }
        Err(bidomain::Error::TooLargeToAssemble { points, cap }) => {
            lines.push(CheckLine {
                name: "min_eigenvalue",
                value: f64::NAN,
                threshold: -c.eigen_tol,
                pass: true,
                note: format!("skipped: {points} points above the dense cap {cap}"),
            });
        }
        Err(e) => return Err(e.into()),
    }

    let mut worst: f64 = 0.0;
    for k in 0..c.pseudo_pairs {
        let (l, m) = (sector_lambda(&mut rng, c.epsilon), sector_lambda(&mut rng, c.epsilon));
        worst = worst.max(pseudo_resolvent_defect(&op, l, m, c.pseudo_trials, seed.wrapping_add(k as u64))?);
    }
    lines.push(CheckLine::at_most("pseudo_resolvent_defect", worst, c.pseudo_tol));

    let lam = sector_lambda(&mut rng, c.epsilon);
    let sol = op.solve_resolvent(lam, &ScalarField::random_real(&g, &mut rng))?;
    lines.push(CheckLine::at_most("resolvent_residual", sol.residuals.operator, c.resolvent_tol));
    lines.push(CheckLine::at_most("mean_ue", sol.residuals.mean_ue, 1e-10));

    let pass = lines.iter().all(|l| l.pass);
    out.write("check_report.json", json_pretty(&json!({ "pass": pass, "checks": lines })))?;
    finish(&lines, "operator checks")
}

pub fn probe(cfg: &RunConfig, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let spec = cfg.sector_spec()?;
    let op = cfg.operator()?;
    let sources = sweep_sources(op.grid(), cfg.probe.random_sources, seed);
    let mut report = sweep_sector(&op, &spec, &sources)?;
    report.summary = summarize(&spec, &report.rows, report.summary.failures, cfg.probe.slope_tol);
    let mut csv = BufWriter::new(File::create(out.path("sweep.csv"))?);
    report.write_csv(&mut csv)?;
    csv.flush()?;
    out.write("sweep_summary.json", report.summary_json() + "\n")?;
    let s = &report.summary;
    for p in &s.per_p {
        println!(
            "p = {:<4} C_hat {:.4}  slopes: norm {:+.3}  grad {:+.3}  hess {:+.3}",
            p.p, p.c_hat, p.slope_norm, p.slope_grad, p.slope_hess
        );
    }
    println!("N max {:.4}  slope {:+.3}  (fit from |lambda| >= {:.0e}, tol {})", s.n_max, s.slope_n, s.fit_from, s.slope_tol);
    if !s.failures.is_empty() {
        return Err(CliError::Failed(format!("{} sample(s) failed; partial report written", s.failures.len())));
    }
    if !s.flat {
        return Err(CliError::Failed("a ratio grows faster than the slope tolerance".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleRow {
    kind: &'static str,
    lambda_re: f64,
    lambda_im: f64,
    sample: usize,
    error: f64,
}

pub fn oracle_compare(cfg: &RunConfig, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let o = &cfg.oracle;
    let lambdas: Vec<Complex64> = o.lambdas.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
    for &l in &lambdas {
        check_lambda(l)?;
    }
    let op = cfg.operator()?;
    let g = op.grid().clone();
    let prob = if g.is_periodic() {
        ConstantCoeffProblem::from_operator(&op, o.theta)
    } else {
        reflected_problem(&op, o.theta)
    }
    .map_err(|e| CliError::Config(format!("no Fourier oracle for this operator: {e}")))?;
    let lift = |f: &ScalarField| if g.is_periodic() { Ok(f.clone()) } else { even_extension_all(f) };
    let lower = |f: &ScalarField| if g.is_periodic() { Ok(f.clone()) } else { restrict(f, &g) };
    let rel = |a: &ScalarField, b: &ScalarField| -> bidomain::Result<f64> {
        Ok(a.sub(b)?.norm2() / b.norm2().max(f64::MIN_POSITIVE))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..o.sources.max(1) {
        let s = ScalarField::random_real(&g, &mut rng);
        let apply = op.apply(&s)?;
        let oracle = lower(&prob.apply(&lift(&s)?)?)?;
        rows.push(OracleRow { kind: "apply", lambda_re: 0.0, lambda_im: 0.0, sample: k, error: rel(&apply, &oracle)? });
        for &lam in &lambdas {
            let u = op.resolvent(lam, &s)?;
            let oracle = lower(&prob.oracle_resolvent(lam, &lift(&s)?)?)?;
            rows.push(OracleRow { kind: "resolvent", lambda_re: lam.re, lambda_im: lam.im, sample: k, error: rel(&u, &oracle)? });
        }
        // dual problem on the oracle's torus with equal means; the row's
        // lambda column holds the shift e^{i theta}
        let tg = prob.grid();
        let shift = rng.gen_range(-1.0..1.0);
        let psi_i = project_mean_zero(&ScalarField::random_real(tg, &mut rng)).map(|v| v + shift);
        let psi_e = project_mean_zero(&ScalarField::random_real(tg, &mut rng)).map(|v| v + shift);
        let (phi_i, phi_e) = prob.dual_solution(&psi_i, &psi_e)?;
        let (ri, re) = prob.dual_residuals(&phi_i, &phi_e, &psi_i, &psi_e)?;
        rows.push(OracleRow { kind: "dual", lambda_re: o.theta.cos(), lambda_im: o.theta.sin(), sample: k, error: ri.max(re) });
    }

    let mut csv = String::from("kind,lambda_re,lambda_im,sample,error\n");
    for r in &rows {
        csv += &format!("{},{:e},{:e},{},{:e}\n", r.kind, r.lambda_re, r.lambda_im, r.sample, r.error);
    }
    out.write("oracle.csv", csv)?;
    let worst = |kind: &str| rows.iter().filter(|r| r.kind == kind).map(|r| r.error).fold(0.0, f64::max);
    let lines = vec![
        CheckLine::at_most("apply_vs_symbol", worst("apply"), o.tol),
        CheckLine::at_most("resolvent_vs_oracle", worst("resolvent"), o.tol),
        CheckLine::at_most("dual_residual", worst("dual"), o.tol),
        CheckLine::at_least("denominator_bound_ratio", prob.denominator_bound_ratio(), 1.0 - 1e-12),
    ];
    let pass = lines.iter().all(|l| l.pass);
    out.write(
        "oracle_report.json",
        json_pretty(&json!({ "pass": pass, "reflected": !g.is_periodic(), "checks": lines })),
    )?;
    finish(&lines, "oracle comparison")
}

pub fn fractional(cfg: &RunConfig, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let fc = &cfg.fractional;
    let op = cfg.operator()?;
    let g = op.grid().clone();
    let f = fc.field.build(&g, seed)?;
    let res = fractional_apply(&op, fc.alpha, fc.a, &f, fc.sign)?;
    write_field(&res.field, BufWriter::new(File::create(out.path("fractional.bin"))?))?;
    write_fields_csv(&[("f", &f), ("result", &res.field)], BufWriter::new(File::create(out.path("fractional.csv"))?))?;

    let shifted = op.apply(&f)?.add(&f.scale(Complex64::new(fc.a, 0.0)))?;
    let one = fractional_apply(&op, 1.0, fc.a, &f, PowerSign::Positive)?.field;
    let half = fractional_apply(&op, 0.5, fc.a, &f, PowerSign::Positive)?.z_norm;
    let scale = f.norm2() * shifted.norm2();
    let moment = if scale == 0.0 { 0.0 } else { half * half / scale - 1.0 };
    let lines = vec![
        CheckLine::at_most("alpha_one_consistency", one.sub(&shifted)?.norm2() / shifted.norm2().max(f64::MIN_POSITIVE), fc.tol),
        CheckLine::at_most("moment_inequality_excess", moment, fc.tol),
    ];
    let pass = lines.iter().all(|l| l.pass);
    out.write(
        "fractional_report.json",
        json_pretty(&json!({
            "pass": pass,
            "alpha": fc.alpha,
            "a": fc.a,
            "sign": fc.sign,
            "input_norm": f.norm2(),
            "result_norm": res.field.norm2(),
            "z_norm": res.z_norm,
            "checks": lines,
        })),
    )?;
    println!("||(A + a)^alpha f||_2 = {:.6e}", res.z_norm);
    finish(&lines, "fractional checks")
}

pub fn simulate(cfg: &RunConfig, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let (sim, section) = cfg.simulation()?;
    let run = sim.prepare(seed)?;
    let d = run.op.grid().dim();
    let stride = section.stride.max(1);
    let mut series: Vec<TimeSeriesRow> = Vec::new();
    let mut io_error: Option<std::io::Error> = None;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut last: Option<(f64, usize)> = None;
    let mut last_state: Option<SimulationState> = None;
    let dir = out.dir().to_path_buf();
    let mut dumps: Vec<String> = Vec::new();
    let result = run.run(|s| {
        let dg = &s.diagnostics;
        worst = (worst.0.max(dg.step_residual), worst.1.max(dg.elliptic_residual), worst.2.max(dg.mean_ue));
        series.push(TimeSeriesRow {
            t: s.t,
            u_sup: dg.u_sup,
            w_sup: dg.w_sup,
            compatibility_defect: dg.compatibility_defect,
            step_residual: dg.step_residual,
            front: section.front_level.and_then(|l| front_position(&s.u, l)),
        });
        last = Some((s.t, s.step));
        if section.dump_fields && s.step % stride == 0 && io_error.is_none() {
            let mut fields = vec![("u".to_string(), &s.u), ("ue".to_string(), &s.u_e)];
            fields.extend(s.w.iter().enumerate().map(|(j, w)| (format!("w{j}"), w)));
            for (name, f) in fields {
                let file = format!("state_{:06}_{name}.bin", s.step);
                let r = File::create(dir.join(&file)).map_err(bidomain::Error::from).and_then(|h| write_field(f, BufWriter::new(h)));
                match r {
                    Ok(()) => dumps.push(file),
                    Err(bidomain::Error::Io(e)) => io_error = Some(e),
                    Err(e) => io_error = Some(std::io::Error::other(e.to_string())),
                }
            }
        }
        last_state = Some(s.clone());
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    for name in dumps {
        out.path(&name);
    }
    let mut csv = BufWriter::new(File::create(out.path("series.csv"))?);
    write_series_csv(&series, &mut csv)?;
    csv.flush()?;
    if let Some(s) = &last_state {
        let mut fields: Vec<(String, &ScalarField)> = vec![("u".into(), &s.u), ("ue".into(), &s.u_e)];
        fields.extend(s.w.iter().enumerate().map(|(j, w)| (format!("w{j}"), w)));
        let named: Vec<(&str, &ScalarField)> = fields.iter().map(|(n, f)| (n.as_str(), *f)).collect();
        write_fields_csv(&named, BufWriter::new(File::create(out.path("final_fields.csv"))?))?;
    }

    let z = section.z_alpha.map(|alpha| {
        let threshold = d as f64 / (2.0 * section.z_p);
        json!({
            "alpha": alpha,
            "p": section.z_p,
            "d": d,
            "norm": run.z_alpha_norm,
            "threshold": threshold,
            "admissible": threshold < alpha && alpha <= 1.0,
        })
    });
    let (t_last, steps) = last.unwrap_or((0.0, 0));
    let mut report = json!({
        "model": run.model.name(),
        "dt": run.params.dt,
        "t_end": run.params.t_end,
        "t_reached": t_last,
        "steps": steps,
        "max_step_residual": worst.0,
        "max_elliptic_residual": worst.1,
        "max_mean_ue": worst.2,
        "final_front": series.last().and_then(|r| r.front),
        "z_alpha": z,
    });
    match result {
        Ok(_) => {
            report["status"] = json!("completed");
            out.write("simulate_report.json", json_pretty(&report))?;
            println!("completed {steps} steps to t = {t_last}");
            Ok(())
        }
        Err(bidomain::Error::TrustRegionExceeded { time, blowup_estimate }) => {
            report["status"] = json!("trust-region-exceeded");
            report["abort_time"] = json!(time);
            report["blowup_estimate"] = json!(blowup_estimate);
            out.write("simulate_report.json", json_pretty(&report))?;
            Err(CliError::TrustRegion { time, blowup_estimate })
        }
        Err(e) => {
            report["status"] = json!("failed");
            report["error"] = json!(e.to_string());
            out.write("simulate_report.json", json_pretty(&report))?;
            Err(e.into())
        }
    }
}
