use std::io::Write;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use singulim::descent::{check_conditions, optimize, ConditionReport, DescentTrace, TrialStep};
use singulim::homog::{build_cp_objective, CPModel, Tensor};
use singulim::io::{
    bundled, fmt_f64, level_grid_csv, parse_exact_csv, parse_point_csv, read_text, trace_from_csv, trace_to_csv,
    write_text, ProblemFile, BUNDLED,
};
use singulim::limits::{
    classify_limit, direction_trail, find_cluster_point, lojasiewicz_scan, rate_classify, LimitVerdict, ProbeReport,
    RateEstimate,
};
use singulim::poly::{f64_to_rat, format_rational, rat_to_f64};
use singulim::singan::{analyze_singularity, direction_verdict_exact, taylor_line, DirectionVerdict, LinePencil};
use singulim::{Error, Point, RationalFunction, Result};

use crate::config::RunConfig;

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        reason: e.to_string(),
    }
}

fn exact_string(v: &[BigRational]) -> String {
    let parts: Vec<String> = v.iter().map(format_rational).collect();
    format!("({})", parts.join(", "))
}

fn check_dim(field: &str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::parse(
            field,
            format!("has {found} coordinates, the problem has {expected} variables"),
        ));
    }
    Ok(())
}

fn load_problem(path: &Path) -> Result<(ProblemFile, RationalFunction)> {
    let problem = ProblemFile::read(path)?;
    let f = problem.function()?;
    Ok((problem, f))
}

pub struct OptimizeArgs {
    pub problem: PathBuf,
    pub x0: String,
    pub config: Option<PathBuf>,
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub step0: Option<f64>,
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub fixed_step: bool,
    pub trace_out: Option<PathBuf>,
}

pub fn cmd_optimize(args: &OptimizeArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    let d = &mut cfg.descent;
    if let Some(v) = args.sigma {
        d.sigma_armijo = v;
    }
    if let Some(v) = args.beta {
        d.backtrack_factor = v;
    }
    if let Some(v) = args.step0 {
        d.initial_step = v;
    }
    if let Some(v) = args.max_iters {
        d.max_iters = v;
    }
    if let Some(v) = args.grad_tol {
        d.grad_tol = v;
    }
    if args.fixed_step {
        d.trial_step = TrialStep::Fixed;
    }
    if let Some(p) = &args.trace_out {
        cfg.trace_out = Some(p.clone());
    }
    cfg.validate()?;
    let trace_out = cfg
        .trace_out
        .clone()
        .ok_or_else(|| Error::config("trace_out", "no output path given (--trace-out or config)"))?;
    let (_, f) = load_problem(&args.problem)?;
    let x0 = parse_point_csv("x0", &args.x0)?;
    check_dim("x0", x0.dim(), f.n_vars())?;
    let trace = optimize(&f, &x0, &cfg.descent)?;
    write_text(&trace_out, &trace_to_csv(&trace))?;
    let last = trace.last().expect("a run records its start");
    let stop = trace.stop_reason.map_or("none", |s| s.as_str());
    writeln!(out, "iterations: {}", trace.n_steps()).map_err(io_err)?;
    writeln!(out, "stop_reason: {stop}").map_err(io_err)?;
    if let Some(d) = &trace.diagnostic {
        writeln!(out, "diagnostic: {d}").map_err(io_err)?;
    }
    writeln!(out, "x_final: {last}").map_err(io_err)?;
    writeln!(out, "f_final: {}", fmt_f64(*trace.f_values.last().unwrap())).map_err(io_err)?;
    writeln!(out, "grad_norm_final: {}", fmt_f64(*trace.grad_norms.last().unwrap())).map_err(io_err)?;
    Ok(())
}

pub struct AnalyzeArgs {
    pub problem: PathBuf,
    pub point: String,
    pub directions: Vec<String>,
    pub random_directions: usize,
    pub seed: Option<u64>,
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<BigRational> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().any(|c| *c != 0.0) {
            return v.iter().map(|&c| f64_to_rat(c).expect("finite")).collect();
        }
    }
}

fn write_verdict(out: &mut dyn Write, label: &str, exact: &[BigRational], v: &DirectionVerdict) -> Result<()> {
    let status = if v.in_safe_set { "safe" } else { "unsafe" };
    let limit = v.limit_value.map_or_else(|| "-".to_string(), fmt_f64);
    writeln!(
        out,
        "{label} {}: {status}, f_n_min = {}, limit = {limit}",
        if exact.len() <= 4 { exact_string(exact) } else { v.direction.to_string() },
        fmt_f64(v.pencil_value)
    )
    .map_err(io_err)
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let (_, f) = load_problem(&args.problem)?;
    let x_star = parse_exact_csv("point", &args.point)?;
    check_dim("point", x_star.len(), f.n_vars())?;
    let pencil = analyze_singularity(&f, &x_star)?;
    let p = pencil.pencil_polynomial();
    let terms = serde_json::to_string(&p.to_records()).expect("records serialize");
    writeln!(out, "point: {}", exact_string(&x_star)).map_err(io_err)?;
    writeln!(out, "n_min: {}", pencil.n_min()).map_err(io_err)?;
    writeln!(out, "f_n_min: {p}").map_err(io_err)?;
    writeln!(out, "f_n_min_terms: {terms}").map_err(io_err)?;
    if pencil.is_regular() {
        writeln!(out, "regular: f is defined at the point").map_err(io_err)?;
    }
    for (i, d) in args.directions.iter().enumerate() {
        let field = format!("direction[{i}]");
        let exact = parse_exact_csv(&field, d)?;
        check_dim(&field, exact.len(), f.n_vars())?;
        let v = direction_verdict_exact(&pencil, &exact).map_err(|e| Error::config(field.clone(), e))?;
        write_verdict(out, "direction", &exact, &v)?;
    }
    if args.random_directions > 0 {
        let seed = RunConfig::default().resolve_seed(args.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut unsafe_count = 0;
        for _ in 0..args.random_directions {
            let d = random_direction(&mut rng, f.n_vars());
            let v = direction_verdict_exact(&pencil, &d)?;
            if !v.in_safe_set {
                unsafe_count += 1;
            }
            write_verdict(out, "random", &d, &v)?;
        }
        writeln!(
            out,
            "random directions: {} of {} safe (seed {seed})",
            args.random_directions - unsafe_count,
            args.random_directions
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub struct DiagnoseArgs {
    pub trace: PathBuf,
    pub problem: PathBuf,
    pub x_star: Option<String>,
    pub config: Option<PathBuf>,
    pub tail_fraction: Option<f64>,
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrailSummary {
    center: String,
    n_min: usize,
    entries: usize,
    skipped: usize,
    tail_start: usize,
    min_tail_pencil: Option<f64>,
    a4_certified: bool,
    tail_limit_spread: Option<f64>,
}

#[derive(Serialize)]
struct DiagnoseReport {
    iterates: usize,
    stop_reason: Option<&'static str>,
    tail_start: usize,
    conditions: ConditionReport,
    cluster_point: Option<Point>,
    limit: LimitVerdict,
    x_star: Option<String>,
    trail: Option<TrailSummary>,
    lojasiewicz: ProbeReport,
    rate: Option<RateEstimate>,
    notes: Vec<String>,
}

fn trail_summary(trace: &DescentTrace, pencil: &LinePencil, tail_start: usize) -> Result<TrailSummary> {
    let trail = direction_trail(trace, pencil, tail_start)?;
    Ok(TrailSummary {
        center: exact_string(pencil.base()),
        n_min: pencil.n_min(),
        entries: trail.indices.len(),
        skipped: trail.skipped,
        tail_start,
        min_tail_pencil: trail.min_tail_pencil,
        a4_certified: trail.a4_certified_default(),
        tail_limit_spread: trail.tail_limit_spread(),
    })
}

pub fn cmd_diagnose(args: &DiagnoseArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(t) = args.tail_fraction {
        cfg.tail_fraction = t;
    }
    if let Some(r) = &args.report {
        cfg.report_out = Some(r.clone());
    }
    cfg.validate()?;
    let report_out = cfg
        .report_out
        .clone()
        .ok_or_else(|| Error::config("report", "no output path given (--report or config)"))?;
    let trace = trace_from_csv(&read_text(&args.trace)?).map_err(|e| match e {
        Error::InvalidTrace(m) => Error::InvalidTrace(format!("{}: {m}", args.trace.display())),
        other => other,
    })?;
    if trace.len() < 2 {
        return Err(Error::InvalidTrace(format!(
            "{}: {} iterate(s); diagnostics need at least 2",
            args.trace.display(),
            trace.len()
        )));
    }
    let (problem, f) = load_problem(&args.problem)?;
    check_dim("trace", trace.dim(), f.n_vars())?;
    let tail_start = cfg.tail_start(trace.len());
    let mut notes = Vec::new();
    let conditions = check_conditions(&trace, tail_start)?;
    let cluster = find_cluster_point(&trace);
    let singular: Vec<Point> = problem
        .singular_points()?
        .iter()
        .map(|p| Point::new(p.iter().map(rat_to_f64).collect()))
        .collect::<Result<_>>()?;
    let limit = classify_limit(&f, &trace, &singular)?;
    let x_star: Option<Vec<BigRational>> = match &args.x_star {
        Some(s) => {
            let v = parse_exact_csv("x-star", s)?;
            check_dim("x-star", v.len(), f.n_vars())?;
            Some(v)
        }
        None => match (&cluster, &limit) {
            (Some(c), _) if c.exact.is_some() => c.exact.clone(),
            (_, LimitVerdict::Singular { index, .. }) => Some(problem.singular_points()?[*index].clone()),
            (Some(c), _) => Some(c.point.iter().map(|&v| f64_to_rat(v)).collect::<Result<_>>()?),
            (None, _) => {
                notes.push("no cluster point detected and no --x-star given; trail and rate skipped".into());
                None
            }
        },
    };
    let (trail, rate) = match &x_star {
        Some(xs) => {
            let trail = match analyze_singularity(&f, xs) {
                Ok(pencil) => Some(trail_summary(&trace, &pencil, tail_start)?),
                Err(e) => {
                    notes.push(format!("x-star {}: {e}", exact_string(xs)));
                    None
                }
            };
            let xp = Point::new(xs.iter().map(rat_to_f64).collect())?;
            (trail, Some(rate_classify(&trace, &xp, tail_start)?))
        }
        None => (None, None),
    };
    let lojasiewicz = lojasiewicz_scan(&trace, tail_start, &cfg.theta_grid)?;
    if !lojasiewicz.monotone {
        notes.push("f-values are not monotone on the tail; certificates use the last value as L".into());
    }
    let report = DiagnoseReport {
        iterates: trace.len(),
        stop_reason: trace.stop_reason.map(|s| s.as_str()),
        tail_start,
        conditions,
        cluster_point: cluster.map(|c| c.point),
        limit,
        x_star: x_star.as_deref().map(exact_string),
        trail,
        lojasiewicz,
        rate,
        notes,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_text(&report_out, &text)?;
    let c = &report.conditions;
    let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
    writeln!(out, "tail_start: {tail_start}").map_err(io_err)?;
    writeln!(
        out,
        "sigma_hat: {}  kappa_hat: {}  a2_violations: {}",
        show(c.sigma_hat),
        show(c.kappa_hat),
        c.a2_violations
    )
    .map_err(io_err)?;
    if let Some(t) = &report.trail {
        writeln!(
            out,
            "min_tail_pencil: {}  a4_certified: {}",
            show(t.min_tail_pencil),
            t.a4_certified
        )
        .map_err(io_err)?;
    }
    let thetas: Vec<String> = report.lojasiewicz.feasible_thetas().iter().map(|t| format!("{t:.2}")).collect();
    writeln!(out, "feasible theta: [{}]", thetas.join(", ")).map_err(io_err)?;
    if let Some(r) = &report.rate {
        writeln!(out, "rate: {:?}", r.regime).map_err(io_err)?;
    }
    Ok(())
}

pub struct TensorArgs {
    pub dims: String,
    pub rank: usize,
    pub target: PathBuf,
    pub emit_problem: PathBuf,
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|d| {
            d.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse("dims", format!("`{}` is not a positive integer", d.trim())))
        })
        .collect()
}

pub fn cmd_tensor(args: &TensorArgs, out: &mut dyn Write) -> Result<()> {
    let dims = parse_dims(&args.dims)?;
    let model = CPModel::new(dims, args.rank)?;
    let text = read_text(&args.target)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::parse("target", e))?;
    let target = Tensor::from_json(&value)?;
    let obj = build_cp_objective(&model, &target)?;
    let name = format!("cp rank {} {:?}", model.rank(), model.dims());
    ProblemFile::from_function(Some(&name), &obj.f_hat, &[]).write(&args.emit_problem)?;
    writeln!(out, "parameters: {}", model.n_params()).map_err(io_err)?;
    writeln!(out, "target_norm_sq: {}", fmt_f64(obj.target_norm_sq)).map_err(io_err)?;
    writeln!(out, "wrote {}", args.emit_problem.display()).map_err(io_err)?;
    Ok(())
}

pub struct SeriesArgs {
    pub problem: PathBuf,
    pub point: String,
    pub direction: String,
    pub terms: usize,
}

pub fn cmd_series(args: &SeriesArgs, out: &mut dyn Write) -> Result<()> {
    if args.terms == 0 {
        return Err(Error::config("terms", "must be positive"));
    }
    let (_, f) = load_problem(&args.problem)?;
    let x_star = parse_exact_csv("point", &args.point)?;
    check_dim("point", x_star.len(), f.n_vars())?;
    let d = parse_point_csv("direction", &args.direction)?;
    check_dim("direction", d.dim(), f.n_vars())?;
    let line = taylor_line(&f, &x_star, &d, args.terms)?;
    writeln!(out, "direction: {}", line.direction).map_err(io_err)?;
    for (n, (c, v)) in line.exact_coeffs.iter().zip(&line.coeffs).enumerate() {
        writeln!(out, "c_{n} = {} ({})", format_rational(c), fmt_f64(*v)).map_err(io_err)?;
    }
    writeln!(out, "recurrence_order: {}", line.recurrence_order).map_err(io_err)?;
    writeln!(out, "recurrence_start: {}", line.recurrence_start).map_err(io_err)?;
    writeln!(out, "companion_norm: {}", fmt_f64(line.companion_norm())).map_err(io_err)?;
    writeln!(out, "radius_lower_bound: {}", fmt_f64(line.radius_lower_bound)).map_err(io_err)?;
    Ok(())
}

pub fn cmd_examples(dir: &Path, out: &mut dyn Write) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        reason: e.to_string(),
    })?;
    for name in BUNDLED {
        let problem = bundled(name).expect("bundled names resolve");
        let path = dir.join(format!("{name}.problem"));
        problem.write(&path)?;
        writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    }
    Ok(())
}

pub struct PlotArgs {
    pub problem: PathBuf,
    pub x0: Option<String>,
    pub trajectory_out: Option<PathBuf>,
    pub grid_out: Option<PathBuf>,
    pub lo: String,
    pub hi: String,
    pub n: usize,
}

fn parse_pair(field: &str, s: &str) -> Result<(f64, f64)> {
    let p = parse_point_csv(field, s)?;
    check_dim(field, p.dim(), 2)?;
    Ok((p[0], p[1]))
}

pub fn cmd_plot_data(args: &PlotArgs, out: &mut dyn Write) -> Result<()> {
    let (_, f) = load_problem(&args.problem)?;
    if args.trajectory_out.is_none() && args.grid_out.is_none() {
        return Err(Error::config("trajectory-out", "give --trajectory-out, --grid-out or both"));
    }
    if let Some(path) = &args.trajectory_out {
        let x0 = args
            .x0
            .as_deref()
            .ok_or_else(|| Error::config("x0", "required with --trajectory-out"))?;
        let x0 = parse_point_csv("x0", x0)?;
        check_dim("x0", x0.dim(), f.n_vars())?;
        let trace = optimize(&f, &x0, &RunConfig::default().descent)?;
        let mut csv = String::from("k");
        for i in 1..=trace.dim() {
            csv.push_str(&format!(",x_{i}"));
        }
        csv.push_str(",f\n");
        for (k, (x, v)) in trace.iterates.iter().zip(&trace.f_values).enumerate() {
            csv.push_str(&k.to_string());
            for c in x.iter() {
                csv.push(',');
                csv.push_str(&fmt_f64(*c));
            }
            csv.push(',');
            csv.push_str(&fmt_f64(*v));
            csv.push('\n');
        }
        write_text(path, &csv)?;
        writeln!(out, "wrote {} ({} points)", path.display(), trace.len()).map_err(io_err)?;
    }
    if let Some(path) = &args.grid_out {
        if args.n < 2 {
            return Err(Error::config("n", "need at least 2 samples per axis"));
        }
        let lo = parse_pair("lo", &args.lo)?;
        let hi = parse_pair("hi", &args.hi)?;
        if !(lo.0 < hi.0 && lo.1 < hi.1) {
            return Err(Error::config("hi", "must exceed lo in both coordinates"));
        }
        write_text(path, &level_grid_csv(&f, lo, hi, args.n)?)?;
        writeln!(out, "wrote {} ({}x{} grid)", path.display(), args.n, args.n).map_err(io_err)?;
    }
    Ok(())
}

pub fn cmd_config(out: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(&RunConfig::default()).expect("config serializes");
    writeln!(out, "{text}").map_err(io_err)
}
