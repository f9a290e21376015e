//! `tclflex`: analytic quotes, sweeps, planning, simulation and verification
//! for fleets of thermostatically controlled loads.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 invalid or infeasible
//! input, 3 I/O error.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use tclflex::analytics::{coord_max_duration, quote, scheme_fraction, RequestKind, Scheme};
use tclflex::protocol::{promised_watts, Amplitude, PlanMode};
use tclflex::scenario::{ClassSpec, RequestSpec, Scenario, ScenarioScheme};
use tclflex::sim::Sampling;
use tclflex::thermo::{cycle_length, ApplianceParams};

use output::{sig6, KeyValues};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] tclflex::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) | CliError::Io { .. } => 3,
            CliError::Usage(_) => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "tclflex",
    version,
    about = "Flexibility engine for fleets of thermostatically controlled loads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form flexibility of one class for one duration.
    Analytic(AnalyticArgs),
    /// Fraction curves of every scheme over a grid of durations, as CSV.
    Sweep(SweepArgs),
    /// Broadcast message(s) that serve a request.
    Plan(ScenarioArgs),
    /// Simulate a scenario and report on delivery and rebound.
    Simulate(SimulateArgs),
    /// Simulate and compare with the analytic value.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Auto,
    Upper,
    Indiv,
    Coord,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Reduce,
    Increase,
}

impl From<KindArg> for RequestKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Reduce => RequestKind::Reduce,
            KindArg::Increase => RequestKind::Increase,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Longest,
    Probabilistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Stratified,
    UniformRandom,
}

#[derive(Args)]
struct ClassArgs {
    /// Width of the temperature band.
    #[arg(long)]
    delta: Option<f64>,
    /// Temperature rate while ON, degrees per hour.
    #[arg(long)]
    v: Option<f64>,
    /// Temperature rate while OFF, degrees per hour.
    #[arg(long)]
    w: Option<f64>,
    /// Power drawn while ON, watts.
    #[arg(long)]
    p: Option<f64>,
    /// Number of appliances.
    #[arg(long)]
    n: Option<u64>,
}

impl ClassArgs {
    fn params(&self) -> CliResult<ApplianceParams> {
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("missing --{flag}")));
        Ok(ApplianceParams::from_band(
            need(self.delta, "delta")?,
            need(self.v, "v")?,
            need(self.w, "w")?,
            need(self.p, "p")?,
        )?)
    }

    fn count(&self) -> CliResult<u64> {
        self.n.ok_or_else(|| CliError::Usage("missing --n".into()))
    }

    fn any_set(&self) -> bool {
        self.delta.is_some() || self.v.is_some() || self.w.is_some() || self.p.is_some() || self.n.is_some()
    }
}

#[derive(Args)]
struct AnalyticArgs {
    #[command(flatten)]
    class: ClassArgs,
    /// Request duration in hours.
    #[arg(long)]
    t: f64,
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long, value_enum, default_value = "reduce")]
    kind: KindArg,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    v: f64,
    #[arg(long)]
    w: f64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, value_enum, default_value = "reduce")]
    kind: KindArg,
    /// Largest duration of an evenly spaced grid starting at 0 (default: twice
    /// the band traversal time while OFF).
    #[arg(long, conflicts_with = "times")]
    t_max: Option<f64>,
    /// Number of grid intervals.
    #[arg(long, default_value_t = 100, conflicts_with = "times")]
    steps: u32,
    /// Explicit comma-separated durations instead of a grid.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A scenario either from a JSON file or from flags describing one class.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file; excludes the per-class and request flags.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    class: ClassArgs,
    /// Request duration in hours; without it the scenario has no request.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Watts, or "max".
    #[arg(long)]
    amplitude: Option<String>,
    #[arg(long, value_enum)]
    sampling: Option<SamplingArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation horizon in hours (default: request duration plus two cycles).
    #[arg(long)]
    horizon: Option<f64>,
    /// Write the effective scenario as JSON before running.
    #[arg(long)]
    emit_scenario: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Trace CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Baseline (no request) trace CSV destination.
    #[arg(long)]
    baseline_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Allowed gap between simulated and analytic average, watts.
    #[arg(long, default_value_t = 2.0)]
    tolerance: f64,
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

impl ScenarioArgs {
    fn load(&self) -> CliResult<Scenario> {
        let scenario = match &self.scenario {
            Some(path) => {
                let flags_set = self.class.any_set()
                    || self.t.is_some()
                    || self.kind.is_some()
                    || self.amplitude.is_some()
                    || self.sampling.is_some();
                if flags_set {
                    return Err(CliError::Usage(
                        "--scenario excludes --delta/--v/--w/--p/--n/--t/--kind/--amplitude/--sampling".into(),
                    ));
                }
                let mut s = Scenario::from_json(&read_file(path)?)?;
                // run-level settings may still be overridden
                if let Some(scheme) = self.scheme {
                    s.scheme = scenario_scheme(scheme);
                }
                if let Some(mode) = self.mode {
                    s.mode = plan_mode(mode);
                }
                if let Some(seed) = self.seed {
                    s.seed = seed;
                }
                if let Some(h) = self.horizon {
                    s.horizon_hours = h;
                }
                s
            }
            None => self.scenario_from_flags()?,
        };
        scenario.validate()?;
        if let Some(path) = &self.emit_scenario {
            let mut text = scenario.to_json()?;
            text.push('\n');
            write_file(path, text.as_bytes())?;
        }
        Ok(scenario)
    }

    fn scenario_from_flags(&self) -> CliResult<Scenario> {
        let params = self.class.params()?;
        let request = match self.t {
            Some(t) => {
                let amplitude = match &self.amplitude {
                    Some(a) => a.parse::<Amplitude>()?,
                    None => Amplitude::MAX,
                };
                Some(RequestSpec {
                    kind: self.kind.unwrap_or(KindArg::Reduce).into(),
                    duration_hours: t,
                    amplitude_watts: amplitude,
                })
            }
            None => None,
        };
        let t = request.map_or(0.0, |r| r.duration_hours);
        Ok(Scenario {
            classes: vec![ClassSpec {
                name: "fleet".into(),
                params,
                count: self.class.count()?,
                sampling: match self.sampling.unwrap_or(SamplingArg::Stratified) {
                    SamplingArg::Stratified => Sampling::Stratified,
                    SamplingArg::UniformRandom => Sampling::UniformRandom,
                },
            }],
            request,
            scheme: scenario_scheme(self.scheme.unwrap_or(SchemeArg::Auto)),
            mode: plan_mode(self.mode.unwrap_or(ModeArg::Probabilistic)),
            horizon_hours: self.horizon.unwrap_or(t + 2.0 * cycle_length(&params)),
            seed: self.seed.unwrap_or(0),
        })
    }
}

fn scenario_scheme(s: SchemeArg) -> ScenarioScheme {
    match s {
        SchemeArg::Auto => ScenarioScheme::Auto,
        SchemeArg::Upper => ScenarioScheme::Upper,
        SchemeArg::Indiv => ScenarioScheme::Indiv,
        SchemeArg::Coord => ScenarioScheme::Coord,
    }
}

fn plan_mode(m: ModeArg) -> PlanMode {
    match m {
        ModeArg::Longest => PlanMode::Longest,
        ModeArg::Probabilistic => PlanMode::Probabilistic,
    }
}

fn cmd_analytic(args: &AnalyticArgs) -> CliResult<u8> {
    let params = args.class.params()?;
    let n = args.class.count()?;
    let scheme = match args.scheme {
        SchemeArg::Upper => Scheme::UpperBound,
        SchemeArg::Indiv => Scheme::Indiv,
        SchemeArg::Coord => Scheme::Coord,
        SchemeArg::Auto => return Err(CliError::Usage("analytic needs an explicit --scheme".into())),
    };
    let q = quote(&params, n, args.t, scheme, args.kind.into())?;
    println!("fraction {}, {} W", sig6(q.fraction), sig6(q.watts));
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<u8> {
    let params = ApplianceParams::from_band(args.delta, args.v, args.w, args.p)?;
    let kind: RequestKind = args.kind.into();
    let eff = kind.effective_params(&params);
    let times: Vec<f64> = match &args.times {
        Some(ts) => ts.clone(),
        None => {
            if args.steps == 0 {
                return Err(CliError::Usage("--steps must be at least 1".into()));
            }
            let t_max = args.t_max.unwrap_or(2.0 * eff.drift_limit());
            (0..=args.steps)
                .map(|k| t_max * f64::from(k) / f64::from(args.steps))
                .collect()
        }
    };
    let coord_limit = coord_max_duration(&eff);
    let mut csv = String::from("t_hours,upper,indiv,coord\n");
    for t in times {
        let upper = scheme_fraction(&eff, t, Scheme::UpperBound)?;
        let indiv = scheme_fraction(&eff, t, Scheme::Indiv)?;
        let coord = match scheme_fraction(&eff, t, Scheme::Coord) {
            Ok(c) => c.to_string(),
            Err(tclflex::Error::InfeasibleDuration { .. }) if t > coord_limit => String::new(),
            Err(e) => return Err(e.into()),
        };
        csv.push_str(&format!("{t},{upper},{indiv},{coord}\n"));
    }
    match &args.out {
        Some(path) => write_file(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn cmd_plan(args: &ScenarioArgs) -> CliResult<u8> {
    let scenario = args.load()?;
    if scenario.request.is_none() {
        return Err(CliError::Usage("nothing to plan: the scenario has no request".into()));
    }
    let messages = scenario.plan()?;
    let mut kv = KeyValues::default();
    for (class, message) in scenario.classes.iter().zip(&messages) {
        kv.prefix(scenario.classes.len() > 1, &class.name);
        match message {
            Some(m) => {
                kv.push("kind", m.kind().as_str());
                kv.push("scheme", m.scheme().as_scheme().as_str());
                kv.num("threshold_hours", m.threshold());
                kv.num("participation", m.participation());
                if let Some(s) = m.schedule() {
                    kv.num("t_tilde", s.t_tilde);
                    kv.num("y1", s.y1);
                    kv.num("y2", s.y2);
                }
                kv.num("promised_watts", promised_watts(m, &class.params, class.count)?);
            }
            None if scenario.scheme == ScenarioScheme::Upper => {
                kv.push("scheme", "upper");
                kv.push("policy", "min_energy");
            }
            None => kv.push("scheme", "none"),
        }
    }
    kv.prefix(false, "");
    kv.num("analytic_watts", scenario.analytic_watts()?);
    print!("{kv}");
    Ok(0)
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<u8> {
    let scenario = args.scenario.load()?;
    let run = scenario.run()?;
    for (path, trace) in [(&args.out, &run.trace), (&args.baseline_out, &run.baseline)] {
        if let Some(path) = path {
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            write_file(path, &buf)?;
        }
    }
    let mut kv = KeyValues::default();
    output::push_report(&mut kv, &run);
    print!("{kv}");
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<u8> {
    if !(args.tolerance.is_finite() && args.tolerance >= 0.0) {
        return Err(CliError::Usage(format!(
            "--tolerance must be >= 0, got {}",
            args.tolerance
        )));
    }
    let scenario = args.scenario.load()?;
    let analytic = scenario.analytic_watts()?;
    let run = scenario.run()?;
    let simulated = run.report.avg_reduction_watts;
    let gap = (simulated - analytic).abs();
    // a constant-power scheme must also stay flat; the bound policy need not
    let constancy_checked = scenario.scheme != ScenarioScheme::Upper && scenario.request.is_some();
    let mut failures = Vec::new();
    if gap > args.tolerance {
        failures.push("mismatch");
    }
    if run.report.temp_violations > 0 {
        failures.push("temperature_violation");
    }
    if constancy_checked && run.report.over_delivery {
        failures.push("over_delivery");
    }

    let mut kv = KeyValues::default();
    kv.num("simulated_watts", simulated);
    kv.num("analytic_watts", analytic);
    kv.num("difference_watts", gap);
    kv.num("tolerance_watts", args.tolerance);
    kv.push("temp_violations", run.report.temp_violations);
    kv.push("over_delivery", run.report.over_delivery);
    kv.num("max_excess_watts", run.report.max_excess_watts);
    if failures.is_empty() {
        kv.push("result", "pass");
    } else {
        kv.push("result", "fail");
        kv.push("reasons", failures.join(","));
    }
    print!("{kv}");
    Ok(if failures.is_empty() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analytic(a) => cmd_analytic(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
