//! `kq` — quench-dynamics runner for the dissipative Kitaev chain.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kq::analysis::{
    classify_decay, default_relaxation_window, fit_exponential, fit_power_law,
    fit_shifted_power_law, numerical_floor, theory_exponent, FitResult, TheoryPrediction,
};
use kq::bath::{BathSpec, Statistics};
use kq::chain::{build_grid, spectrum, ChainParams};
use kq::config::{RunConfig, Sampling, FORMAT_VERSION};
use kq::dynamics::{thermal_density, TimeSeries, Tolerances};
use kq::error::{Error, Result};
use kq::runner::{kz_sweep, log_times, relaxation_trace, Protocol, SweepPoint};
use kq::schedule::{QuenchSchedule, ScheduleKind, SweepSpec};
use kq::validate::oracle_triangle;

#[derive(Parser)]
#[command(
    name = "kq",
    about = "Quench dynamics of a dissipative Kitaev chain",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one protocol: trace CSV, optional sweep CSV, JSON report.
    Run(ProtocolArgs),
    /// Scan ramp rates (or chemical potentials) and emit the endpoint CSV.
    Sweep(ProtocolArgs),
    /// Fit a decay law to a previously written CSV.
    Fit(FitArgs),
    /// Print the thermal excitation density of a chain.
    Thermal(ThermalArgs),
    /// Cross-check all evolution routes against each other on a small grid.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BathKind {
    Fermionic,
    Bosonic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleName {
    Sudden,
    LinearRamp,
    RampThenRelax,
}

#[derive(Args)]
struct ProtocolArgs {
    /// JSON run config; explicit flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    bath: Option<BathKind>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    schedule: Option<ScheduleName>,
    #[arg(long = "Ti")]
    temp_i: Option<f64>,
    #[arg(long = "Tf")]
    temp_f: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Relaxation window after the ramp (ramp-then-relax only).
    #[arg(long)]
    relax: Option<f64>,
    /// Pre-quench chemical potential (sudden parameter jump at t = 0).
    #[arg(long)]
    pre_mu: Option<f64>,
    /// Pre-quench pairing strength (sudden parameter jump at t = 0).
    #[arg(long)]
    pre_chi: Option<f64>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Sample points per decade on the log time grid.
    #[arg(long)]
    ppd: Option<usize>,
    /// Comma-separated ramp rates for a tau sweep.
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Comma-separated chemical potentials for a mu scan (one trace each).
    #[arg(long, value_delimiter = ',')]
    mus: Option<Vec<f64>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    prefix: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV written by `kq run` or `kq sweep`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "power")]
    model: String,
    /// Fixed decay-exponent magnitude for the shifted model.
    #[arg(long)]
    alpha: Option<f64>,
    /// Abscissa column name (default: first column).
    #[arg(long)]
    x_col: Option<String>,
    /// Ordinate column name.
    #[arg(long, default_value = "excess")]
    y_col: String,
    /// Fit window as `lo,hi` on the abscissa.
    #[arg(long, value_delimiter = ',')]
    window: Option<Vec<f64>>,
}

#[derive(Args)]
struct ThermalArgs {
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    chi: f64,
    #[arg(long = "L", default_value_t = 10_000)]
    l: usize,
    #[arg(long = "T")]
    temp: f64,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args, false),
        Cmd::Sweep(args) => cmd_run(args, true),
        Cmd::Fit(args) => cmd_fit(args),
        Cmd::Thermal(args) => cmd_thermal(args),
        Cmd::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Cap the worker pool from `KQ_WORKERS`; computation stays deterministic
/// regardless (ordered reductions), this only bounds parallelism.
fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var("KQ_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("KQ_WORKERS must be a positive integer, got {raw:?}")))?;
    if n == 0 {
        return Err(Error::InvalidConfig("KQ_WORKERS must be >= 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("failed to size worker pool: {e}")))?;
    Ok(())
}

fn assemble_config(args: &ProtocolArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig {
            format_version: FORMAT_VERSION,
            chain: ChainParams { mu: 1.0, chi: 1.0, l: 10_000 },
            bath: BathSpec {
                zeta: Statistics::Fermionic,
                s: 1.0,
                gamma0: 0.01,
            },
            schedule: QuenchSchedule::sudden(5.0, 0.0),
            sweep: None,
            sampling: Sampling::default(),
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("out"),
            prefix: "kq".into(),
        },
    };
    if let Some(v) = args.mu {
        cfg.chain.mu = v;
    }
    if let Some(v) = args.chi {
        cfg.chain.chi = v;
    }
    if let Some(v) = args.l {
        cfg.chain.l = v;
    }
    if let Some(v) = args.bath {
        cfg.bath.zeta = match v {
            BathKind::Fermionic => Statistics::Fermionic,
            BathKind::Bosonic => Statistics::Bosonic,
        };
    }
    if let Some(v) = args.s {
        cfg.bath.s = v;
    }
    if let Some(v) = args.gamma0 {
        cfg.bath.gamma0 = v;
    }
    if let Some(v) = args.temp_i {
        cfg.schedule.temp_i = v;
    }
    if let Some(v) = args.temp_f {
        cfg.schedule.temp_f = v;
    }
    if let Some(kind) = args.schedule {
        let tau = args
            .tau
            .or(match cfg.schedule.kind {
                ScheduleKind::LinearRamp { tau } | ScheduleKind::RampThenRelax { tau, .. } => {
                    Some(tau)
                }
                ScheduleKind::Sudden => None,
            })
            // a tau sweep does not need a standalone ramp rate; seed it from
            // the scan so `kq sweep --taus ...` works without `--tau`
            .or_else(|| args.taus.as_ref().and_then(|v| v.first().copied()));
        cfg.schedule.kind = match kind {
            ScheduleName::Sudden => ScheduleKind::Sudden,
            ScheduleName::LinearRamp => ScheduleKind::LinearRamp {
                tau: tau.ok_or_else(|| Error::InvalidConfig("--tau required for a ramp".into()))?,
            },
            ScheduleName::RampThenRelax => ScheduleKind::RampThenRelax {
                tau: tau.ok_or_else(|| Error::InvalidConfig("--tau required for a ramp".into()))?,
                relax_duration: args.relax.unwrap_or(0.0),
            },
        };
    } else if let Some(tau) = args.tau {
        cfg.schedule.kind = match cfg.schedule.kind {
            ScheduleKind::RampThenRelax { relax_duration, .. } => ScheduleKind::RampThenRelax {
                tau,
                relax_duration: args.relax.unwrap_or(relax_duration),
            },
            _ => ScheduleKind::LinearRamp { tau },
        };
    }
    match (args.pre_mu, args.pre_chi) {
        (None, None) => {}
        (pm, pc) => {
            cfg.schedule = cfg.schedule.with_pre_quench(
                pm.unwrap_or(cfg.chain.mu),
                pc.unwrap_or(cfg.chain.chi),
            );
        }
    }
    if let Some(v) = args.t_min {
        cfg.sampling.t_min = v;
    }
    if let Some(v) = args.t_max {
        cfg.sampling.t_max = v;
    }
    if let Some(v) = args.ppd {
        cfg.sampling.points_per_decade = v;
    }
    if args.taus.is_some() || args.mus.is_some() {
        cfg.sweep = Some(SweepSpec {
            taus: args.taus.clone(),
            mus: args.mus.clone(),
        });
    }
    if let Some(v) = &args.out_dir {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = &args.prefix {
        cfg.prefix = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Report<'a> {
    format_version: u32,
    config: &'a RunConfig,
    ramp_end_time: f64,
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theory: Option<TheoryPrediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_fit: Option<FitResult>,
    artifacts: Vec<String>,
}

fn cmd_run(args: ProtocolArgs, sweep_only: bool) -> Result<()> {
    let cfg = assemble_config(&args)?;
    let proto = Protocol {
        chain: cfg.chain,
        bath: cfg.bath,
        schedule: cfg.schedule,
    };
    let sp = proto.spectrum()?;
    let mut warnings = Vec::new();
    if let Some(w) = proto.coupling_warning(&sp) {
        eprintln!("warning: {w}");
        warnings.push(w);
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let mut artifacts = Vec::new();
    let mut trace_fit = None;
    let mut sweep_fit = None;

    if !sweep_only {
        let times = log_times(
            cfg.sampling.t_min,
            cfg.sampling.t_max,
            cfg.sampling.points_per_decade,
        )?;
        let trace = relaxation_trace(&proto, &times, &cfg.tolerances)?;
        let path = cfg.output_dir.join(format!("{}_trace.csv", cfg.prefix));
        write_trace_csv(&path, &trace, &proto.schedule)?;
        artifacts.push(path.display().to_string());
        trace_fit = fit_trace_excess(&trace, proto.chain.l);
    }

    if let Some(sweep) = &cfg.sweep {
        if let Some(taus) = &sweep.taus {
            let points = kz_sweep(&proto, taus, &cfg.tolerances)?;
            let path = cfg.output_dir.join(format!("{}_sweep.csv", cfg.prefix));
            write_sweep_csv(&path, &points)?;
            artifacts.push(path.display().to_string());
            let xs: Vec<f64> = points.iter().map(|p| p.tau).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.excess.abs()).collect();
            sweep_fit = fit_power_law(&xs, &ys, None).ok();
        }
        if let Some(mus) = &sweep.mus {
            let times = log_times(
                cfg.sampling.t_min,
                cfg.sampling.t_max,
                cfg.sampling.points_per_decade,
            )?;
            for &mu in mus {
                let p = Protocol {
                    chain: proto.chain.with_quantum(mu, proto.chain.chi)?,
                    ..proto.clone()
                };
                let trace = relaxation_trace(&p, &times, &cfg.tolerances)?;
                let path = cfg
                    .output_dir
                    .join(format!("{}_mu{mu}_trace.csv", cfg.prefix));
                write_trace_csv(&path, &trace, &p.schedule)?;
                artifacts.push(path.display().to_string());
            }
        }
        if sweep.taus.is_none() && sweep.mus.is_none() && sweep_only {
            return Err(Error::InvalidConfig(
                "sweep requested but neither --taus nor --mus given".into(),
            ));
        }
    } else if sweep_only {
        return Err(Error::InvalidConfig(
            "sweep requested but neither --taus nor --mus given".into(),
        ));
    }

    let report = Report {
        format_version: FORMAT_VERSION,
        config: &cfg,
        ramp_end_time: proto.schedule.ramp_end_time(),
        warnings,
        theory: theory_exponent(&proto.regime_query()),
        trace_fit,
        sweep_fit,
        artifacts: artifacts.clone(),
    };
    let report_path = cfg.output_dir.join(format!("{}_report.json", cfg.prefix));
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    for a in &artifacts {
        println!("wrote {a}");
    }
    println!("wrote {}", report_path.display());
    if let Some(f) = &report.sweep_fit {
        println!("sweep exponent: {:.6} (r2 = {:.6})", f.exponent, f.r2);
    }
    if let Some(f) = &report.trace_fit {
        println!("trace exponent: {:.6} (r2 = {:.6})", f.exponent, f.r2);
    }
    if let Some(t) = &report.theory {
        println!("predicted |exponent|: {} [{}]", t.exponent, t.regime);
    }
    Ok(())
}

fn fit_trace_excess(trace: &TimeSeries, l: usize) -> Option<FitResult> {
    let ys: Vec<f64> = trace.excess.iter().map(|e| e.abs()).collect();
    let window = default_relaxation_window(&trace.times, &ys, numerical_floor(l))?;
    fit_power_law(&trace.times, &ys, Some(window)).ok()
}

fn write_trace_csv(path: &Path, trace: &TimeSeries, schedule: &QuenchSchedule) -> Result<()> {
    let mut out = String::from("t,T,D,D_th_final,D_th_inst,excess\n");
    for j in 0..trace.times.len() {
        let t = trace.times[j];
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            t,
            schedule.temperature_at(t),
            trace.d[j],
            trace.d_th_final,
            trace.d_th_inst[j],
            trace.excess[j]
        ));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut out = String::from("tau,t_f,D_final,D_th_final,excess\n");
    for p in points {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            p.tau, p.t_f, p.d_final, p.d_th_final, p.excess
        ));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn read_csv_columns(path: &Path, x_col: Option<&str>, y_col: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidConfig("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let xi = match x_col {
        Some(name) => cols
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::InvalidConfig(format!("no column {name:?} in {header:?}")))?,
        None => 0,
    };
    let yi = cols
        .iter()
        .position(|c| *c == y_col)
        .ok_or_else(|| Error::InvalidConfig(format!("no column {y_col:?} in {header:?}")))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("bad value in line {} of {path:?}", lineno + 2))
                })
        };
        xs.push(parse(xi)?);
        ys.push(parse(yi)?);
    }
    Ok((xs, ys))
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let (xs, ys) = read_csv_columns(&args.input, args.x_col.as_deref(), &args.y_col)?;
    let ys: Vec<f64> = ys.iter().map(|v| v.abs()).collect();
    let window = match args.window.as_deref() {
        Some([lo, hi]) => Some((*lo, *hi)),
        Some(_) => {
            return Err(Error::InvalidConfig("--window expects lo,hi".into()));
        }
        None => None,
    };
    #[derive(Serialize)]
    struct FitReport {
        model: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        class: Option<String>,
        fit: FitResult,
    }
    let report = match args.model.as_str() {
        "power" => FitReport {
            model: "power".into(),
            class: None,
            fit: fit_power_law(&xs, &ys, window)?,
        },
        "exponential" => FitReport {
            model: "exponential".into(),
            class: None,
            fit: fit_exponential(&xs, &ys, window)?,
        },
        "shifted" => FitReport {
            model: "shifted".into(),
            class: None,
            fit: fit_shifted_power_law(&xs, &ys, args.alpha, window)?,
        },
        "classify" => {
            let (class, fit) = classify_decay(&xs, &ys, window)?;
            FitReport {
                model: "classify".into(),
                class: Some(format!("{class:?}")),
                fit,
            }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown model {other:?} (expected power, shifted, exponential, classify)"
            )));
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_thermal(args: ThermalArgs) -> Result<()> {
    let chain = ChainParams::new(args.mu, args.chi, args.l)?;
    let grid = build_grid(&chain)?;
    let sp = spectrum(&chain, &grid);
    if args.temp < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "temperature must be >= 0, got {}",
            args.temp
        )));
    }
    println!("{:.16e}", thermal_density(&sp, args.temp)?);
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let reports = oracle_triangle(args.cases, args.seed)?;
    let mut max_dev: f64 = 0.0;
    for r in &reports {
        println!("{}: max deviation {:.3e}", r.description, r.max_deviation);
        max_dev = max_dev.max(r.max_deviation);
    }
    println!("all {} cases agree; max pairwise deviation {max_dev:.3e}", reports.len());
    Ok(())
}
