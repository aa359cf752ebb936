use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::{usage, write_json, write_table, CliError, CliResult};
use super::{CovarianceArgs, QcaSweepArgs, QecMemoryArgs, SampleArgs, SourceArgs, StormSweepArgs, VerifyArgs};
use crate::correlation::{covariance_series, spectral_summary, stationary_mean, TransferOperator};
use crate::pauli::{format_labels, index_to_labels};
use crate::process::SeDilation;
use crate::qca::{run_series, Boundary, Lattice, QcaParams, SeriesConfig};
use crate::qec::{run_memory, Basis, MemoryConfig, MemoryResult, NoiseSource};
use crate::rng::{key, StreamRng};
use crate::spp::{build_spp_mps, sample_trajectories, worked_hamiltonian, SppMps, WorkedModel};
use crate::storm::{solve_params, storm_hmm, ErrorProfile, StormHmm, StormParams};
use crate::verify::{run_criterion, Scale, ORACLE_CRITERIA};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn echo<T: Serialize>(command: &str, args: &T) -> Value {
    let mut v = serde_json::to_value(args).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.insert("command".into(), Value::String(command.into()));
    }
    v
}

fn require_seed(seed: Option<u64>) -> CliResult<u64> {
    seed.ok_or_else(|| CliError::Usage("--seed is required".into()))
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "not_fittable".into(), num)
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// A process built from the source flags.
enum Source {
    Storm(StormHmm),
    Quantum(SppMps),
}

fn parse_list(text: &str, name: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{name}: cannot parse '{t}'"))))
        .collect()
}

fn parse_q(text: &str, name: &str) -> CliResult<[f64; 4]> {
    parse_list(text, name)?
        .try_into()
        .map_err(|_| CliError::Usage(format!("{name} needs four comma-separated entries (I, X, Y, Z)")))
}

/// `a`, `b` directly, or `xi` with `marginal` and optional `q1_budget`; `q0`/`q1` override the emissions.
pub(crate) fn parse_storm(pairs: &[String]) -> CliResult<StormParams> {
    let mut kv = BTreeMap::new();
    for p in pairs {
        let Some((k, v)) = p.split_once('=') else {
            return usage(format!("--storm expects key=value, got '{p}'"));
        };
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let scalar = |k: &str| -> CliResult<Option<f64>> {
        kv.get(k)
            .map(|v| v.parse::<f64>().map_err(|_| CliError::Usage(format!("--storm {k}: cannot parse '{v}'"))))
            .transpose()
    };
    for k in kv.keys() {
        if !["a", "b", "xi", "marginal", "q1_budget", "q0", "q1"].contains(&k.as_str()) {
            return usage(format!("--storm: unknown key '{k}'"));
        }
    }
    let profile = ErrorProfile::default();
    let mut params = match (scalar("a")?, scalar("b")?, scalar("xi")?) {
        (Some(a), Some(b), None) => StormParams {
            a,
            b,
            q0: [1.0, 0.0, 0.0, 0.0],
            q1: [1.0 - profile.q1_error_total, 0.01, 0.01, 0.01],
        },
        (None, None, Some(xi)) => {
            let marginal = scalar("marginal")?.unwrap_or(1e-3);
            let budget = scalar("q1_budget")?.unwrap_or(profile.q1_error_total);
            solve_params(xi, marginal, &ErrorProfile { q1_error_total: budget, ..profile })?
        }
        _ => return usage("--storm needs either a= and b=, or xi= (with optional marginal=, q1_budget=)"),
    };
    if let Some(q) = kv.get("q0") {
        params.q0 = parse_q(q, "q0")?;
    }
    if let Some(q) = kv.get("q1") {
        params.q1 = parse_q(q, "q1")?;
    }
    params.validate()?;
    Ok(params)
}

fn load_source(args: &SourceArgs, default_steps: usize) -> CliResult<Source> {
    let chosen = [args.dilation.is_some(), args.model.is_some(), !args.storm.is_empty()];
    if chosen.iter().filter(|&&c| c).count() != 1 {
        return usage("choose exactly one of --dilation, --model, --storm");
    }
    let steps = args.steps.unwrap_or(default_steps);
    if steps == 0 {
        return usage("--steps must be positive");
    }
    if !args.storm.is_empty() {
        return Ok(Source::Storm(storm_hmm(parse_storm(&args.storm)?)?));
    }
    let dilation = if let Some(path) = &args.dilation {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        SeDilation::from_json(&text)?
    } else {
        let model: WorkedModel = args.model.as_deref().unwrap_or_default().parse()?;
        let theta = args.theta.ok_or_else(|| CliError::Usage("--model needs --theta".into()))?;
        worked_hamiltonian(model, theta, steps - 1)?
    };
    Ok(Source::Quantum(build_spp_mps(&dilation)?))
}

impl Source {
    fn mps(&self, steps: usize) -> CliResult<SppMps> {
        match self {
            Source::Storm(h) => Ok(h.to_mps(steps)?),
            Source::Quantum(m) => Ok(m.clone()),
        }
    }

    /// Transfer operator of a bulk site; quantum sources need at least three steps.
    fn transfer(&self) -> CliResult<TransferOperator> {
        match self {
            Source::Storm(h) => Ok(h.transfer_operator()?),
            Source::Quantum(m) => {
                if m.steps() < 3 {
                    return usage("the transfer operator needs a process with at least three steps");
                }
                Ok(TransferOperator::from_mps(m, 1)?)
            }
        }
    }

    fn qubits(&self) -> usize {
        match self {
            Source::Storm(_) => 1,
            Source::Quantum(m) => (m.labels().trailing_zeros() / 2) as usize,
        }
    }
}

pub fn twirl(args: SourceArgs) -> CliResult<()> {
    let source = load_source(&args, 3)?;
    let mps = source.mps(args.steps.unwrap_or(3))?;
    let report = json!({
        "config": echo("twirl", &args),
        "version": VERSION,
        "bond_dims": mps.bond_dims(),
        "mps": mps.to_json(),
    });
    write_json(args.out.as_deref(), &report)
}

pub fn sample(args: SampleArgs) -> CliResult<()> {
    let seed = require_seed(args.seed)?;
    let count = args.count.unwrap_or(1000);
    let source = load_source(&args.source, 10)?;
    let mps = source.mps(args.source.steps.unwrap_or(10))?;
    let n = source.qubits();
    let mut rng = StreamRng::new(&[seed]);
    let samples = sample_trajectories(&mps, count, &mut rng)?;
    let steps = mps.steps();
    let mut header = vec!["shot".to_string()];
    header.extend((0..steps).map(|t| format!("t{t}")));
    let rows: Vec<Vec<String>> = samples
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            let mut row = vec![i.to_string()];
            row.extend(traj.iter().map(|&x| format_labels(&index_to_labels(x as usize, n))));
            row
        })
        .collect();
    write_table(args.source.out.as_deref(), &echo("sample", &args), &header, &rows)
}

pub fn spectrum(args: SourceArgs) -> CliResult<()> {
    let source = load_source(&args, 3)?;
    let op = source.transfer()?;
    let summary = spectral_summary(&op)?;
    let analytic = match &source {
        Source::Storm(h) => Some(h.params.analytic_summary()?),
        Source::Quantum(_) => None,
    };
    let report = json!({
        "config": echo("spectrum", &args),
        "version": VERSION,
        "lambda_star": summary.lambda_star,
        "gap": summary.gap,
        "correlation_length": summary.correlation_length.map_or(Value::String("inf".into()), Value::from),
        "non_ergodic": summary.non_ergodic,
        "summary": summary,
        "analytic": analytic,
    });
    write_json(args.out.as_deref(), &report)
}

fn error_indicator() -> Vec<f64> {
    vec![0.0, 1.0, 1.0, 1.0]
}

pub fn covariance(args: CovarianceArgs) -> CliResult<()> {
    let source = load_source(&args.source, 3)?;
    let op = source.transfer()?;
    let labels = op.labels();
    let f = if args.f.is_empty() {
        if labels != 4 {
            return usage("--f is required for multi-qubit processes");
        }
        error_indicator()
    } else {
        args.f.clone()
    };
    let g = if args.g.is_empty() { f.clone() } else { args.g.clone() };
    if f.len() != labels || g.len() != labels {
        return usage(format!("observables need {labels} entries"));
    }
    let max_tau = args.max_tau.unwrap_or(20);
    let series = covariance_series(&op, &f, &g, max_tau)?;
    let (mf, mg) = (stationary_mean(&op, &f)?, stationary_mean(&op, &g)?);
    let rows: Vec<Vec<String>> = series
        .iter()
        .enumerate()
        .map(|(i, c)| vec![(i + 1).to_string(), num(*c), num(mf), num(mg)])
        .collect();
    let header = strings(&["tau", "covariance", "mean_f", "mean_g"]);
    write_table(args.source.out.as_deref(), &echo("covariance", &args), &header, &rows)
}

/// Empirical storm fraction, error rate and lag-1 state autocorrelation of one chain.
fn storm_empirics(params: StormParams, steps: usize, seed: u64) -> (f64, f64, f64) {
    let mut chain = crate::storm::StormChain::new(params, &[seed]);
    let (mut storm, mut errors) = (0u64, 0u64);
    let mut states = Vec::with_capacity(steps);
    for _ in 0..steps {
        let label = chain.step();
        errors += u64::from(label != 0);
        storm += u64::from(chain.state());
        states.push(f64::from(chain.state()));
    }
    let n = steps as f64;
    let mean = storm as f64 / n;
    let var = states.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let lag1 = if var > 0.0 && steps > 1 {
        states.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0) / var
    } else {
        f64::NAN
    };
    (mean, errors as f64 / n, lag1)
}

pub fn storm_sweep(args: StormSweepArgs) -> CliResult<()> {
    let seed = require_seed(args.seed)?;
    if args.xi.is_empty() {
        return usage("--xi needs at least one value");
    }
    let marginal = args.marginal.unwrap_or(1e-3);
    let profile = ErrorProfile { q1_error_total: args.q1_budget.unwrap_or(0.03), ..Default::default() };
    let rounds = args.rounds.unwrap_or(1_000_000);
    let mut rows = Vec::new();
    for (i, &xi) in args.xi.iter().enumerate() {
        let p = solve_params(xi, marginal, &profile)?;
        let s = p.analytic_summary()?;
        let (storm, err, lag1) = storm_empirics(p, rounds, key(&[seed, i as u64]));
        rows.push(vec![
            num(xi),
            num(p.a),
            num(p.b),
            num(s.stationary[1]),
            num(1.0 - s.marginals[0]),
            num(s.lambda_star),
            opt_num(s.correlation_length),
            rounds.to_string(),
            num(storm),
            num(err),
            num(lag1),
        ]);
    }
    let header = strings(&[
        "xi_target",
        "a",
        "b",
        "pi_storm",
        "error_rate",
        "lambda_star",
        "xi",
        "steps",
        "empirical_pi_storm",
        "empirical_error_rate",
        "empirical_lag1",
    ]);
    write_table(args.out.as_deref(), &echo("storm-sweep", &args), &header, &rows)
}

pub(crate) fn parse_layout(spec: &str) -> CliResult<Lattice> {
    let bad = || CliError::Usage(format!("layout '{spec}' is not surface:D, rect:WxH, torus:WxH or path:N"));
    let (kind, dims) = spec.split_once(':').ok_or_else(bad)?;
    let one = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let two = |s: &str| -> CliResult<(usize, usize)> {
        let (w, h) = s.split_once('x').ok_or_else(bad)?;
        Ok((one(w)?, one(h)?))
    };
    Ok(match kind {
        "surface" => Lattice::rotated_surface_code(one(dims)?)?,
        "rect" => {
            let (w, h) = two(dims)?;
            Lattice::rectangular(w, h, Boundary::Open)?
        }
        "torus" => {
            let (w, h) = two(dims)?;
            Lattice::rectangular(w, h, Boundary::Periodic)?
        }
        "path" => Lattice::path(one(dims)?)?,
        _ => return Err(bad()),
    })
}

pub fn qca_sweep(args: QcaSweepArgs) -> CliResult<()> {
    let seed = require_seed(args.seed)?;
    if args.theta.is_empty() {
        return usage("--theta needs at least one value (units of π)");
    }
    let lattice = match (&args.layout, args.d) {
        (Some(l), None) => parse_layout(l)?,
        (None, Some(d)) => Lattice::rotated_surface_code(d)?,
        (None, None) => Lattice::rotated_surface_code(9)?,
        _ => return usage("give --layout or --d, not both"),
    };
    let defaults = SeriesConfig::default();
    let config = SeriesConfig {
        cycles: args.cycles.unwrap_or(defaults.cycles),
        burn_in: args.burn_in.unwrap_or(defaults.burn_in),
        trajectories: args.trajectories.unwrap_or(defaults.trajectories),
        ..defaults
    };
    let (a, b) = (args.a.unwrap_or(1e-4), args.b.unwrap_or(0.5));
    let mut rows = Vec::new();
    let mut dump = Vec::new();
    for (i, &t) in args.theta.iter().enumerate() {
        let params = QcaParams::unbiased(a, b, t * PI)?;
        let s = run_series(params, &lattice, &config, key(&[seed, i as u64]))?;
        rows.push(vec![
            num(t),
            num(s.mean),
            num(s.scaled_variance),
            opt_num(s.fit.xi),
            opt_num(s.fit.r2),
            s.fit.points.to_string(),
        ]);
        if args.dump.is_some() {
            for (traj, eta) in s.eta.iter().enumerate() {
                for (c, e) in eta.iter().enumerate() {
                    dump.push(vec![num(t), traj.to_string(), (config.burn_in + c).to_string(), num(*e)]);
                }
            }
        }
    }
    let cfg = echo("qca-sweep", &args);
    let header = strings(&["theta_over_pi", "mean_eta", "scaled_variance", "xi", "r2", "fit_points"]);
    write_table(args.out.as_deref(), &cfg, &header, &rows)?;
    if let Some(path) = &args.dump {
        let header = strings(&["theta_over_pi", "trajectory", "cycle", "eta"]);
        write_table(Some(path), &cfg, &header, &dump)?;
    }
    Ok(())
}

/// One point of a memory sweep: the noise parameter columns and the source.
struct MemoryPoint {
    columns: Vec<String>,
    json: Value,
    source: NoiseSource,
}

fn memory_points(args: &QecMemoryArgs) -> CliResult<Vec<MemoryPoint>> {
    let noise = args.noise.as_deref().unwrap_or("storm");
    let marginal = args.marginal.unwrap_or(1e-3);
    let mut points = Vec::new();
    match noise {
        "storm" => {
            if args.xi.is_empty() {
                return usage("--noise storm needs --xi");
            }
            let profile = ErrorProfile { q1_error_total: args.q1_budget.unwrap_or(0.03), ..Default::default() };
            for &xi in &args.xi {
                let p = solve_params(xi, marginal, &profile)?;
                points.push(MemoryPoint {
                    columns: vec![num(xi), num(p.a), num(p.b), num(marginal)],
                    json: json!({"xi": xi, "a": p.a, "b": p.b, "marginal": marginal}),
                    source: NoiseSource::Storm(p),
                });
            }
        }
        "qca" => {
            if args.theta.is_empty() {
                return usage("--noise qca needs --theta (units of π)");
            }
            let (a, b) = (args.a.unwrap_or(1e-4), args.b.unwrap_or(0.5));
            let prior_cycles = args.prior_cycles.unwrap_or(20_000);
            for &t in &args.theta {
                points.push(MemoryPoint {
                    columns: vec![num(t), num(a), num(b)],
                    json: json!({"theta_over_pi": t, "a": a, "b": b, "prior_cycles": prior_cycles}),
                    source: NoiseSource::Qca { params: QcaParams::unbiased(a, b, t * PI)?, prior_cycles },
                });
            }
        }
        "iid" => points.push(MemoryPoint {
            columns: vec![num(marginal)],
            json: json!({"marginal": marginal}),
            source: NoiseSource::Iid { marginals: [marginal / 3.0; 3] },
        }),
        "none" => points.push(MemoryPoint { columns: vec![], json: json!({}), source: NoiseSource::None }),
        other => return usage(format!("unknown --noise '{other}' (storm, qca, iid, none)")),
    }
    Ok(points)
}

fn noise_header(noise: &str) -> Vec<String> {
    match noise {
        "storm" => strings(&["xi", "a", "b", "marginal"]),
        "qca" => strings(&["theta_over_pi", "a", "b"]),
        "iid" => strings(&["marginal"]),
        _ => vec![],
    }
}

fn result_row(r: &MemoryResult) -> Vec<String> {
    vec![
        r.d.to_string(),
        r.rounds.to_string(),
        r.shots.to_string(),
        r.failures.to_string(),
        num(r.p_shot),
        num(r.stderr),
        num(r.p_round),
        num(r.p_round_stderr),
        r.saturated.to_string(),
        num(r.greedy_shots as f64 / r.shots as f64),
    ]
}

pub fn qec_memory(args: QecMemoryArgs) -> CliResult<()> {
    let started = Instant::now();
    let seed = require_seed(args.seed)?;
    let d_list = if args.d_list.is_empty() { vec![3, 5] } else { args.d_list.clone() };
    let factor = args.rounds_factor.unwrap_or(3);
    let basis = match args.basis.as_deref().unwrap_or("z") {
        "z" | "Z" => Basis::Z,
        "x" | "X" => Basis::X,
        other => return usage(format!("unknown --basis '{other}' (z, x)")),
    };
    let p = args.p.unwrap_or(1e-3);
    let shots = args.shots.unwrap_or(100_000);
    let noise = args.noise.clone().unwrap_or_else(|| "storm".into());
    let points = memory_points(&args)?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for point in &points {
        for &d in &d_list {
            let config = MemoryConfig { d, rounds: factor * d, basis, p, shots, seed, source: point.source.clone() };
            let r = run_memory(&config)?;
            let mut row = point.columns.clone();
            row.push(num(p));
            row.extend(result_row(&r));
            rows.push(row);
            results.push(json!({"noise": point.json, "p": p, "result": r}));
        }
    }
    let mut header = noise_header(&noise);
    header.push("p".into());
    header.extend(strings(&[
        "d",
        "rounds",
        "shots",
        "failures",
        "p_shot",
        "stderr",
        "p_round",
        "p_round_stderr",
        "saturated",
        "frac_shots_greedy_decoded",
    ]));
    let cfg = echo("qec-memory", &args);
    let (csv_path, json_path) = match &args.out {
        Some(prefix) => (Some(with_suffix(prefix, "csv")), Some(with_suffix(prefix, "json"))),
        None => (None, None),
    };
    write_table(csv_path.as_deref(), &cfg, &header, &rows)?;
    if let Some(path) = json_path {
        let report = json!({
            "config": cfg,
            "version": VERSION,
            "wall_time_seconds": started.elapsed().as_secs_f64(),
            "results": results,
        });
        write_json(Some(&path), &report)?;
    }
    Ok(())
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn verify(args: VerifyArgs) -> CliResult<()> {
    let started = Instant::now();
    let scale = if args.quick { Scale::Quick } else { Scale::Full };
    let ids: Vec<usize> = if !args.criteria.is_empty() {
        args.criteria.clone()
    } else if args.reproduction {
        (1..=10).collect()
    } else {
        ORACLE_CRITERIA.to_vec()
    };
    if let Some(bad) = ids.iter().find(|&&i| !(1..=10).contains(&i)) {
        return usage(format!("no criterion {bad} (1..=10)"));
    }
    let mut reports = Vec::new();
    let mut all_passed = true;
    for id in ids {
        match run_criterion(id, scale) {
            Ok(r) => {
                println!("{}", r.line());
                all_passed &= r.passed();
                reports.push(json!(r));
            }
            Err(e) => {
                println!("criterion {id:>2} FAIL: {e}");
                all_passed = false;
                reports.push(json!({"id": id, "error": e.to_string()}));
            }
        }
    }
    if let Some(path) = &args.out {
        let report = json!({
            "config": echo("verify", &args),
            "version": VERSION,
            "wall_time_seconds": started.elapsed().as_secs_f64(),
            "passed": all_passed,
            "criteria": reports,
        });
        write_json(Some(path), &report)?;
    }
    if all_passed {
        Ok(())
    } else {
        Err(CliError::Verification)
    }
}
