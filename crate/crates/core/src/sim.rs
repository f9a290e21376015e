//! Exact event-driven fleet simulation.
//!
//! Every appliance follows piecewise-linear temperature dynamics, so all
//! switching instants are closed-form. Each appliance produces a short list of
//! power-change events; the aggregate trace is the exact step function of
//! their sum, with no time discretisation.
//!
//! Alongside the events, each appliance's temperature is integrated along its
//! actual ON/OFF timeline and checked against the band at every switch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{steady_state_power, RequestKind};
use crate::error::{Error, Result};
use crate::protocol::{interpret, participation_draw, ApplianceAction, BroadcastMessage, ReductionRequest};
use crate::thermo::{cycle_length, wrap_phase, ApplianceParams, CyclePhase};
use crate::trace::PowerTrace;

/// Temperature excursions beyond this many degrees count as violations.
/// Event-time tolerance in hours for window edges and trace comparisons.
pub const TIME_TOLERANCE: f64 = 1e-9;

pub const TEMPERATURE_TOLERANCE: f64 = 1e-9;

const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Phase `i` sits at the midpoint of the `i`-th of `n` equal strata.
    Stratified,
    /// Independent uniform phases from a seeded generator.
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FleetSpec {
    pub params: ApplianceParams,
    pub n: u64,
    pub sampling: Sampling,
    pub seed: u64,
}

/// Initial cycle phases of a desynchronised fleet.
pub fn build_fleet(spec: &FleetSpec) -> Result<Vec<CyclePhase>> {
    if spec.n == 0 {
        return Err(Error::EmptyClass);
    }
    let cycle = cycle_length(&spec.params);
    let n = spec.n as usize;
    let phases = match spec.sampling {
        Sampling::Stratified => (0..n)
            .map(|i| CyclePhase::wrapped((i as f64 + 0.5) * cycle / n as f64, &spec.params))
            .collect(),
        Sampling::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..n)
                .map(|_| CyclePhase::wrapped(rng.gen_range(0.0..cycle), &spec.params))
                .collect()
        }
    };
    Ok(phases)
}

/// Fleet behaviour besides the broadcast message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Nominal hysteresis control, plus the message actions if any.
    Normal,
    /// Everyone switches OFF at time 0, drifts to the limit and is then held
    /// there at the fractional power `P·w/(v+w)`.
    MinEnergy,
}

/// Result of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRun {
    pub trace: PowerTrace,
    /// Appliances whose forced episode took effect.
    pub acting: u64,
    /// Forced switches that found the appliance already in the target state.
    pub noop_forced: u64,
    pub temp_violations: u64,
    /// Largest excursion outside the band seen at any switch, in degrees.
    pub max_temp_excursion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Off,
    On,
    Pinned,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    full: i32,
    pinned: i32,
}

#[derive(Default)]
struct Audit {
    acting: u64,
    noop_forced: u64,
    violations: u64,
    max_excursion: f64,
}

/// One appliance's switching history, with its temperature integrated along it.
struct Timeline<'a> {
    params: &'a ApplianceParams,
    horizon: f64,
    level: Level,
    since: f64,
    // distance to the drift-side limit at `since`
    distance: f64,
    events: &'a mut Vec<Event>,
    audit: &'a mut Audit,
}

impl<'a> Timeline<'a> {
    fn start(
        params: &'a ApplianceParams,
        horizon: f64,
        level: Level,
        distance: f64,
        events: &'a mut Vec<Event>,
        audit: &'a mut Audit,
    ) -> Self {
        let mut tl = Self {
            params,
            horizon,
            level: Level::Off,
            since: 0.0,
            distance,
            events,
            audit,
        };
        tl.check();
        tl.emit(0.0, level);
        tl
    }

    fn rate(&self) -> f64 {
        match self.level {
            Level::On => self.params.drive_rate(),
            Level::Off => -self.params.drift_rate(),
            Level::Pinned => 0.0,
        }
    }

    fn check(&mut self) {
        let over = (self.distance - self.params.delta()).max(-self.distance).max(0.0);
        if over > TEMPERATURE_TOLERANCE {
            self.audit.violations += 1;
        }
        self.audit.max_excursion = self.audit.max_excursion.max(over);
    }

    fn emit(&mut self, time: f64, level: Level) {
        if level == self.level {
            return;
        }
        let count = |l: Level| match l {
            Level::On => (1, 0),
            Level::Pinned => (0, 1),
            Level::Off => (0, 0),
        };
        let (f0, p0) = count(self.level);
        let (f1, p1) = count(level);
        self.events.push(Event {
            time,
            full: f1 - f0,
            pinned: p1 - p0,
        });
        self.level = level;
    }

    fn advance(&mut self, time: f64) {
        self.distance += self.rate() * (time - self.since);
        self.since = time;
        self.check();
    }

    /// Switches to `level` at `time`. Returns false once past the horizon.
    fn switch(&mut self, time: f64, level: Level) -> bool {
        if time >= self.horizon {
            return false;
        }
        self.advance(time.max(self.since));
        self.emit(time, level);
        true
    }

    /// Nominal cycling from phase `y` at `t0`, with switches strictly before `until`.
    fn nominal(&mut self, t0: f64, y: f64, until: f64) {
        let on = self.params.on_duration();
        let cycle = cycle_length(self.params);
        let origin = t0 - y;
        let stop = until.min(self.horizon);
        for k in 0.. {
            let base = origin + k as f64 * cycle;
            let off_at = base + on;
            if off_at > t0 {
                if off_at >= stop {
                    break;
                }
                self.switch(off_at, Level::Off);
            }
            let on_at = base + cycle;
            if on_at >= stop {
                break;
            }
            self.switch(on_at, Level::On);
        }
    }

    fn finish(mut self) {
        let end = self.horizon.max(self.since);
        self.advance(end);
    }
}

fn initial_state(params: &ApplianceParams, y: f64) -> (Level, f64) {
    let on = params.on_duration();
    if y < on {
        (Level::On, params.drive_rate() * y)
    } else {
        (Level::Off, params.delta() - params.drift_rate() * (y - on))
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_one(
    params: &ApplianceParams,
    y: f64,
    action: ApplianceAction,
    kind: RequestKind,
    policy: Policy,
    horizon: f64,
    events: &mut Vec<Event>,
    audit: &mut Audit,
) {
    let on = params.on_duration();
    let cycle = cycle_length(params);
    let v = params.drive_rate();
    let w = params.drift_rate();
    let (level, distance) = initial_state(params, y);

    if policy == Policy::MinEnergy {
        let mut tl = Timeline::start(params, horizon, Level::Off, distance, events, audit);
        let pin_at = if level == Level::On { v * y / w } else { cycle - y };
        tl.switch(pin_at, Level::Pinned);
        tl.finish();
        return;
    }

    let start = match action {
        ApplianceAction::None => None,
        ApplianceAction::OffNow => Some(0.0),
        ApplianceAction::OffAt(s) => Some(s),
    };
    let mut tl = Timeline::start(params, horizon, level, distance, events, audit);
    let Some(s) = start.filter(|&s| s < horizon) else {
        tl.nominal(0.0, y, f64::INFINITY);
        tl.finish();
        return;
    };
    tl.nominal(0.0, y, s);
    let ys = wrap_phase(y + s, cycle);
    match kind {
        RequestKind::Reduce if ys < on => {
            // OFF until the drift-side limit, then a fresh cycle from phase 0.
            tl.audit.acting += 1;
            let end = s + v * ys / w;
            tl.switch(s, Level::Off);
            if tl.switch(end, Level::On) {
                tl.nominal(end, 0.0, f64::INFINITY);
            }
        }
        RequestKind::Increase if ys >= on => {
            // ON until the drive-side limit, then OFF from phase Δ/v.
            tl.audit.acting += 1;
            let end = s + w * (ys - on) / v;
            tl.switch(s, Level::On);
            if tl.switch(end, Level::Off) {
                tl.nominal(end, on, f64::INFINITY);
            }
        }
        _ => {
            tl.audit.noop_forced += 1;
            tl.nominal(s, ys, f64::INFINITY);
        }
    }
    tl.finish();
}

/// Simulates `fleet` from the broadcast instant to `horizon`.
///
/// `seed` feeds the participation draws; appliance `i` uses
/// `participation_draw(seed, i)`. Blocks of appliances are evaluated in
/// parallel and merged in index order, so the output is bit-identical across
/// runs and thread counts.
pub fn simulate(
    fleet: &[CyclePhase],
    params: &ApplianceParams,
    message: Option<&BroadcastMessage>,
    policy: Policy,
    horizon: f64,
    seed: u64,
) -> Result<SimRun> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidSimulation(format!("horizon must be > 0, got {horizon}")));
    }
    if fleet.is_empty() {
        return Err(Error::EmptyClass);
    }
    let kind = message.map_or(RequestKind::Reduce, |m| m.kind());
    let blocks: Vec<(Vec<Event>, Audit)> = fleet
        .par_chunks(BLOCK)
        .enumerate()
        .map(|(b, chunk)| -> Result<(Vec<Event>, Audit)> {
            let mut events = Vec::with_capacity(chunk.len() * 8);
            let mut audit = Audit::default();
            for (j, &phase) in chunk.iter().enumerate() {
                let index = (b * BLOCK + j) as u64;
                let action = match (policy, message) {
                    (Policy::Normal, Some(m)) => {
                        let draw = if m.participation() >= 1.0 {
                            0.0
                        } else {
                            participation_draw(seed, index)
                        };
                        interpret(m, params, phase, draw)?
                    }
                    _ => ApplianceAction::None,
                };
                simulate_one(
                    params,
                    phase.hours(),
                    action,
                    kind,
                    policy,
                    horizon,
                    &mut events,
                    &mut audit,
                );
            }
            Ok((events, audit))
        })
        .collect::<Result<_>>()?;

    let mut audit = Audit::default();
    let mut events = Vec::with_capacity(blocks.iter().map(|b| b.0.len()).sum());
    for (ev, a) in blocks {
        events.extend(ev);
        audit.acting += a.acting;
        audit.noop_forced += a.noop_forced;
        audit.violations += a.violations;
        audit.max_excursion = audit.max_excursion.max(a.max_excursion);
    }
    let trace = aggregate(events, params, horizon)?;
    Ok(SimRun {
        trace,
        acting: audit.acting,
        noop_forced: audit.noop_forced,
        temp_violations: audit.violations,
        max_temp_excursion: audit.max_excursion,
    })
}

fn aggregate(mut events: Vec<Event>, params: &ApplianceParams, horizon: f64) -> Result<PowerTrace> {
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let pinned_power = params.power() * params.on_fraction();
    let power = |full: i64, pinned: i64| full as f64 * params.power() + pinned as f64 * pinned_power;
    let (mut full, mut pinned) = (0i64, 0i64);
    let mut out: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut i = 0;
    while i < events.len() {
        let t = events[i].time;
        while i < events.len() && events[i].time == t {
            full += events[i].full as i64;
            pinned += events[i].pinned as i64;
            i += 1;
        }
        let p = power(full, pinned);
        let last = out.last_mut().expect("trace starts with a breakpoint");
        if last.0 == t {
            last.1 = p;
            if out.len() >= 2 && out[out.len() - 2].1 == p {
                out.pop();
            }
        } else if last.1 != p {
            out.push((t, p));
        }
    }
    PowerTrace::new(out, horizon)
}

/// `trace − baseline` over the merged breakpoints. Values may be negative.
pub fn baseline_delta(trace: &PowerTrace, baseline: &PowerTrace) -> Result<PowerTrace> {
    trace.zip_with(baseline, |a, b| a - b)
}

/// Delivery and rebound figures of one request.
///
/// "Delivered" is `baseline − trace` for reductions and `trace − baseline`
/// for increases; rebound is the opposite excursion after the window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub window_hours: f64,
    pub promised_watts: f64,
    pub avg_reduction_watts: f64,
    pub sup_deviation_watts: f64,
    /// Largest shortfall of delivery below the promise inside the window.
    pub max_shortfall_watts: f64,
    /// Largest excess of delivery above the promise inside the window.
    pub max_excess_watts: f64,
    pub rebound_peak_watts: f64,
    pub rebound_energy_watt_hours: f64,
    pub temp_violations: u64,
    pub over_delivery: bool,
}

/// Compares a run with its no-request baseline over the request window.
///
/// `quantum` is the one-appliance power granularity used by the
/// over-delivery test.
pub fn report(
    trace: &PowerTrace,
    baseline: &PowerTrace,
    request: &ReductionRequest,
    promised_watts: f64,
    quantum: f64,
    temp_violations: u64,
) -> Result<SimReport> {
    let t = request.duration;
    if !(trace.horizon() > t) {
        return Err(Error::InvalidSimulation(format!(
            "horizon {} must exceed the request duration {t}",
            trace.horizon()
        )));
    }
    let sign = match request.kind {
        RequestKind::Reduce => -1.0,
        RequestKind::Increase => 1.0,
    };
    let delivered = baseline_delta(trace, baseline)?.map(|d| sign * d + 0.0);
    let avg = if t > 0.0 {
        delivered.mean(0.0, t)
    } else {
        delivered.value_at(0.0)
    };
    // Events that land on `t` exactly in real arithmetic may round to just
    // before it; pieces narrower than the time tolerance there are ignored.
    let window_end = if t > 0.0 {
        (t - TIME_TOLERANCE * t.max(1.0)).max(t * 0.5)
    } else {
        f64::MIN_POSITIVE
    };
    let (lo, hi) = delivered.range_in(0.0, window_end).unwrap_or((avg, avg));
    let sup_deviation = (hi - avg).max(avg - lo).max(0.0);

    let rebound = delivered.map(|d| (-d).max(0.0));
    let rebound_peak = rebound
        .segments()
        .filter(|&(s, e, _)| e > t && s < trace.horizon())
        .map(|(_, _, p)| p)
        .fold(0.0, f64::max);
    let rebound_energy = rebound.integral(t, trace.horizon());

    Ok(SimReport {
        window_hours: t,
        promised_watts,
        avg_reduction_watts: avg,
        sup_deviation_watts: sup_deviation,
        max_shortfall_watts: (promised_watts - lo).max(0.0),
        max_excess_watts: (hi - promised_watts).max(0.0),
        rebound_peak_watts: rebound_peak,
        rebound_energy_watt_hours: rebound_energy,
        temp_violations,
        over_delivery: hi > promised_watts + quantum,
    })
}

/// Average reduction over `[0, t]` achieved by the drift-then-pin policy on a
/// stratified fleet of `n`.
pub fn min_energy_average_reduction(params: &ApplianceParams, n: u64, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidSimulation(format!("duration must be > 0, got {t}")));
    }
    let spec = FleetSpec {
        params: *params,
        n,
        sampling: Sampling::Stratified,
        seed: 0,
    };
    let fleet = build_fleet(&spec)?;
    let horizon = t + cycle_length(params);
    let baseline = simulate(&fleet, params, None, Policy::Normal, horizon, 0)?;
    let run = simulate(&fleet, params, None, Policy::MinEnergy, horizon, 0)?;
    let delta = baseline_delta(&baseline.trace, &run.trace)?;
    Ok(delta.mean(0.0, t))
}

/// Continuum steady-state power of the fleet, for comparisons.
pub fn expected_baseline(spec: &FleetSpec) -> f64 {
    steady_state_power(&spec.params, spec.n)
}
