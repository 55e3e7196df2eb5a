use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use buzzload_core::estimation::log_grid;
use buzzload_core::experiment::{self, ClosureReport};
use buzzload_core::provisioning::{max_servers, reconfiguration_scale, safety_margin};
use buzzload_core::series::{load_workload, write_sessions_csv, WorkloadInput};
use buzzload_core::spectrum::{
    empirical_spectrum_path, linspace, load_spectra_csv, save_spectra_csv, theoretical_spectrum_of,
    PowerConfig, RateMatrix,
};
use buzzload_core::{
    estimate_all, mean_workload, presets, simulate as run_simulation, EstimationConfig, Horizon,
    ModelParams, SpectrumCurve, SystemState,
};
use serde_json::json;

use crate::{
    ClosureArgs, EstimateArgs, ExperimentCommand, IngestArgs, MseArgs, ProvisionArgs,
    ReplicationArgs, SimulateArgs, SpectraArgs, SpectrumArgs,
};

/// Malformed flag value; exits with the usage status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("BUZZLOAD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("BUZZLOAD_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn load_params(src: &str) -> Result<ModelParams> {
    match src.strip_prefix("preset:") {
        Some(name) => presets::by_name(name).map_err(|e| usage(e.to_string())),
        None => ModelParams::load(src).with_context(|| format!("reading parameters `{src}`")),
    }
}

/// Parses `lo:hi:n`.
fn parse_range(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || usage(format!("expected lo:hi:n, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite()) || n == 0 || hi < lo {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating `{}`", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing `{}`", path.display()))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating `{}`", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

fn load_input(path: &Path, scale: f64) -> Result<WorkloadInput> {
    load_workload(path, scale).with_context(|| format!("reading `{}`", path.display()))
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let params = load_params(&a.params)?;
    let horizon = match (a.events, a.until) {
        (Some(n), _) => Horizon::Events(n),
        (None, Some(t)) => Horizon::Until(t),
        (None, None) => return Err(usage("one of --events or --until is required")),
    };
    let initial = if a.from_empty {
        SystemState::empty()
    } else {
        SystemState::mean_field(&params)?
    };
    let trace = run_simulation(&params, initial, horizon, a.seed)?;
    if a.out.extension().is_some_and(|e| e == "bin") {
        trace.save_binary(&a.out)?;
    } else {
        trace.save_csv(&a.out)?;
    }
    if let (Some(path), Some(dt)) = (&a.series_out, a.dt) {
        trace.sample_series(dt)?.save_csv(path)?;
    }
    if let Some(path) = &a.sessions_out {
        let mut log = buzzload_core::series::sessions_from_trace(&trace);
        for s in &mut log {
            s.start *= a.session_scale;
        }
        write_sessions_csv(&log, create(path)?)?;
    }
    let summary = json!({
        "events": trace.len(),
        "duration": trace.duration(),
        "time_average_i": trace.time_average_i(trace.t0),
        "mean_workload": mean_workload(&params).ok(),
        "seed": a.seed,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let series = match load_input(&a.sessions, a.scale)? {
        WorkloadInput::Trace(t) => t.sample_series(a.dt)?,
        WorkloadInput::Series(_) => {
            return Err(usage("ingest expects a session log or event trace"))
        }
    };
    series.save_csv(&a.out)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "samples": series.len(),
            "t0": series.t0,
            "dt": series.dt,
            "mean_i": series.mean(),
        }))?
    );
    Ok(())
}

pub fn estimate(a: EstimateArgs) -> Result<()> {
    let mut cfg = EstimationConfig::default();
    if let Some(g) = &a.mu_grid {
        let (lo, hi, n) = parse_range(g)?;
        cfg.mu_grid = Some(log_grid(lo, hi, n).map_err(|e| usage(e.to_string()))?);
    }
    if let Some(q) = a.buzz_quantile {
        if !(q > 0.0 && q < 1.0) {
            return Err(usage(format!(
                "--buzz-quantile must lie in (0, 1), got {q}"
            )));
        }
        cfg.buzz_quantile = q;
    }
    if let Some(p) = a.buzz_persistence {
        cfg.buzz_persistence = p;
    }
    if let Some(k) = a.switch_penalty {
        cfg.switch_penalty = k;
    }
    let input = load_input(&a.series, a.scale)?;
    let path = input.to_path();
    let res = estimate_all(&path, &cfg)?;
    write_text(&a.out, &res.to_json_pretty())?;
    if let Some(out) = &a.series_out {
        let series = match &input {
            WorkloadInput::Series(s) => s.clone(),
            WorkloadInput::Trace(t) => t.sample_series(1.0 / res.params_hat.gamma / 10.0)?,
        };
        res.annotate(&series, &path)?.save_csv(out)?;
    }
    println!("{}", serde_json::to_string_pretty(&res.params_hat)?);
    Ok(())
}

pub fn spectrum(a: SpectrumArgs) -> Result<()> {
    let (lo, hi, n) = parse_range(&a.q)?;
    let params = a.params.as_deref().map(load_params).transpose()?;
    let curves = if a.theoretical {
        let p = params.ok_or_else(|| usage("--theoretical needs --params"))?;
        let q: Vec<f64> = linspace(lo, hi, n)
            .iter()
            .map(|v| v / f64::from(p.i_max))
            .collect();
        let m = RateMatrix::build(&p)?;
        vec![theoretical_spectrum_of(&m, &q, &PowerConfig::default())?]
    } else {
        let src = a
            .series
            .as_ref()
            .ok_or_else(|| usage("--series or --theoretical is required"))?;
        let path = load_input(src, a.scale)?.to_path();
        let top = params.map_or(path.max_level(), |p| p.i_max).max(1);
        let q: Vec<f64> = linspace(lo, hi, n)
            .iter()
            .map(|v| v / f64::from(top))
            .collect();
        if a.tau.is_empty() {
            return Err(usage("--tau needs at least one scale"));
        }
        a.tau
            .iter()
            .map(|&t| empirical_spectrum_path(&path, t, &q))
            .collect::<buzzload_core::Result<Vec<_>>>()?
    };
    save_spectra_csv(&curves, &a.out)?;
    for c in &curves {
        let apex = c.apex();
        let support = c.support();
        log::info!(
            "tau {}: apex {:?}, support {:?}",
            c.tau,
            apex.map(|p| p.alpha),
            support
        );
    }
    Ok(())
}

fn pick_curve(curves: &[SpectrumCurve], tau: Option<f64>) -> Result<&SpectrumCurve> {
    match tau {
        Some(t) => curves
            .iter()
            .find(|c| c.tau == t || (c.tau - t).abs() <= 1e-9 * t.abs())
            .ok_or_else(|| anyhow!("no curve with tau = {t} in the spectrum file")),
        None => curves
            .iter()
            .find(|c| c.is_theoretical())
            .or_else(|| curves.iter().max_by(|a, b| a.tau.total_cmp(&b.tau)))
            .ok_or_else(|| anyhow!("spectrum file holds no curve")),
    }
}

pub fn provision(a: ProvisionArgs) -> Result<()> {
    if a.alpha_star.is_none() && a.p_loss.is_none() {
        return Err(usage(
            "give --alpha-star/--sigma-star, --p-loss/--buffer, or both",
        ));
    }
    let curves = load_spectra_csv(&a.spectrum)
        .with_context(|| format!("reading `{}`", a.spectrum.display()))?;
    let mut out = serde_json::Map::new();
    out.insert("spectrum".into(), json!(a.spectrum.display().to_string()));
    if let (Some(alpha_star), Some(sigma_star)) = (a.alpha_star, a.sigma_star) {
        let r = reconfiguration_scale(&curves, alpha_star, sigma_star)?;
        out.insert(
            "reconfiguration".into(),
            json!({
                "alpha_star": alpha_star,
                "sigma_star": sigma_star,
                "tau_star": r.tau_star,
                "probability": r.probability,
                "not_found": r.not_found,
            }),
        );
    }
    if let (Some(p_loss), Some(q)) = (a.p_loss, a.buffer) {
        let curve = pick_curve(&curves, a.tau)?;
        let alpha_as = curve
            .apex()
            .ok_or_else(|| anyhow!("selected curve has no finite point"))?
            .alpha;
        let m = safety_margin(curve, alpha_as, q, p_loss)?;
        let mut margin = json!({
            "tau": if curve.tau.is_finite() { json!(curve.tau) } else { json!("inf") },
            "p_loss": p_loss,
            "buffer": q,
            "alpha_as": alpha_as,
            "c0": m.c0,
            "margin_capacity": m.capacity,
            "loss": m.loss,
            "iterations": m.iterations,
            "unreachable": m.unreachable,
        });
        if let Some(c) = a.capacity {
            let k = max_servers(c, alpha_as, m.c0)?;
            margin["capacity"] = json!(c);
            margin["servers"] = json!(k.k);
            margin["insufficient"] = json!(k.insufficient);
        }
        out.insert("safety_margin".into(), margin);
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(out))?;
    match &a.out {
        Some(p) => write_text(p, &text)?,
        None => println!("{text}"),
    }
    Ok(())
}

pub fn experiment(cmd: ExperimentCommand) -> Result<()> {
    match cmd {
        ExperimentCommand::Boxplot(a) => boxplot(a),
        ExperimentCommand::Mse(a) => mse(a),
        ExperimentCommand::Spectra(a) => spectra(a),
        ExperimentCommand::Closure(a) => closure(a),
    }
}

fn boxplot(a: ReplicationArgs) -> Result<()> {
    let params = load_params(&a.params)?;
    if a.replications == 0 {
        return Err(usage("--replications must be >= 1"));
    }
    ensure_dir(&a.out_dir)?;
    let rows = experiment::replicate_estimates(
        &params,
        &[a.events],
        a.replications,
        a.seed,
        &EstimationConfig::default(),
    )?;
    report_failures(&rows);
    let summary = experiment::summarize_errors(&params, &rows, a.events)?;
    experiment::write_replications_csv(
        &params,
        &rows,
        create(&a.out_dir.join("replications.csv"))?,
    )?;
    experiment::write_error_summary_csv(&summary, create(&a.out_dir.join("summary.csv"))?)?;
    println!(
        "{:<8} {:>12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10}",
        "param", "truth", "min", "q1", "median", "q3", "max", "med|err|"
    );
    for s in &summary {
        println!(
            "{:<8} {:>12.4e} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>10.3}",
            s.parameter, s.truth, s.min, s.q1, s.median, s.q3, s.max, s.median_abs
        );
    }
    Ok(())
}

fn mse(a: MseArgs) -> Result<()> {
    let params = load_params(&a.params)?;
    if a.replications == 0 || a.lengths.len() < 2 {
        return Err(usage("need --replications >= 1 and at least two --lengths"));
    }
    ensure_dir(&a.out_dir)?;
    let rows = experiment::replicate_estimates(
        &params,
        &a.lengths,
        a.replications,
        a.seed,
        &EstimationConfig::default(),
    )?;
    report_failures(&rows);
    let table = experiment::mse_table(&params, &rows);
    experiment::write_replications_csv(
        &params,
        &rows,
        create(&a.out_dir.join("replications.csv"))?,
    )?;
    experiment::write_mse_csv(&table, create(&a.out_dir.join("mse.csv"))?)?;
    let slopes: serde_json::Map<String, serde_json::Value> = experiment::PARAM_NAMES
        .iter()
        .map(|n| (n.to_string(), json!(experiment::mse_slope(&table, n).ok())))
        .collect();
    let text = serde_json::to_string_pretty(&slopes)?;
    write_text(&a.out_dir.join("slopes.json"), &text)?;
    println!("{text}");
    Ok(())
}

fn spectra(a: SpectraArgs) -> Result<()> {
    let params = load_params(&a.params)?;
    ensure_dir(&a.out_dir)?;
    let curves = experiment::spectra(&params, a.events, a.seed, &a.tau, a.points)?;
    save_spectra_csv(&curves, a.out_dir.join("spectra.csv"))?;
    for c in &curves {
        let (lo, hi) = c.support().unwrap_or((f64::NAN, f64::NAN));
        let apex = c.apex().map_or(f64::NAN, |p| p.alpha);
        println!(
            "tau {:>6}: apex {apex:.4}, support [{lo:.4}, {hi:.4}]",
            c.tau
        );
    }
    Ok(())
}

fn closure(a: ClosureArgs) -> Result<()> {
    ensure_dir(&a.out_dir)?;
    let path = load_input(&a.sessions, a.scale)?.to_path();
    let r: ClosureReport = experiment::closure(&path, &EstimationConfig::default(), a.dt, a.seed)?;
    let dir: PathBuf = a.out_dir;
    experiment::write_histograms_csv(&r, create(&dir.join("histogram.csv"))?)?;
    experiment::write_autocorrelation_csv(&r, create(&dir.join("autocorrelation.csv"))?)?;
    let summary = json!({
        "params_hat": r.params_hat,
        "dt": r.dt,
        "observed_mean": r.observed_mean,
        "simulated_mean": r.simulated_mean,
        "model_mean": r.model_mean,
        "mean_gap": r.mean_gap,
        "tv_distance": r.tv_distance,
        "decorrelation_lag": r.decorrelation_lag,
        "acf_gap": r.acf_gap,
        "flags": r.flags,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    write_text(&dir.join("closure.json"), &text)?;
    println!("{text}");
    if !r.tv_distance.is_finite() {
        bail!("closure produced a non-finite distance");
    }
    Ok(())
}

fn report_failures(rows: &[experiment::ReplicationEstimate]) {
    for r in rows {
        if let Some(e) = &r.error {
            log::warn!(
                "replication {} ({} events) failed: {e}",
                r.replication,
                r.events
            );
        }
    }
}
