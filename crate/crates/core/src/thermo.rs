//! Single-appliance thermostat model.
//!
//! An appliance keeps its temperature inside `[temp_min, temp_max]` by
//! switching a temperature modifier ON and OFF. While ON the temperature moves
//! at `drive_rate` away from the drift-side limit; while OFF it drifts back at
//! `drift_rate`. The modifier switches ON only when the drift-side limit is
//! reached and stays ON until the opposite limit.
//!
//! The canonical state of an appliance is its [`CyclePhase`]: the time in
//! hours since the modifier last switched ON. Temperatures are derived from it.
//!
//! Units are hours, degrees, watts and watt-hours throughout.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Whether the temperature modifier cools or heats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApplianceKind {
    Cooling,
    Heating,
}

impl ApplianceKind {
    pub fn flipped(self) -> Self {
        match self {
            ApplianceKind::Cooling => ApplianceKind::Heating,
            ApplianceKind::Heating => ApplianceKind::Cooling,
        }
    }
}

/// Physical parameters shared by every appliance of a class.
///
/// `delta` is always `temp_max - temp_min`; it is computed at construction and
/// never set independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApplianceParams {
    temp_min: f64,
    temp_max: f64,
    delta: f64,
    drive_rate: f64,
    drift_rate: f64,
    power: f64,
    kind: ApplianceKind,
}

impl ApplianceParams {
    pub fn new(
        temp_min: f64,
        temp_max: f64,
        drive_rate: f64,
        drift_rate: f64,
        power: f64,
        kind: ApplianceKind,
    ) -> Result<Self, Error> {
        let finite = [temp_min, temp_max, drive_rate, drift_rate, power]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        let delta = temp_max - temp_min;
        if !(delta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "temperature band must be non-empty (temp_min={temp_min}, temp_max={temp_max})"
            )));
        }
        if !(drive_rate > 0.0) {
            return Err(Error::InvalidParams(format!(
                "drive rate must be > 0, got {drive_rate}"
            )));
        }
        if !(drift_rate > 0.0) {
            return Err(Error::InvalidParams(format!(
                "drift rate must be > 0, got {drift_rate}"
            )));
        }
        if !(power > 0.0) {
            return Err(Error::InvalidParams(format!("power must be > 0, got {power}")));
        }
        Ok(Self {
            temp_min,
            temp_max,
            delta,
            drive_rate,
            drift_rate,
            power,
            kind,
        })
    }

    /// Cooling appliance with band `[0, delta]`.
    pub fn from_band(delta: f64, drive_rate: f64, drift_rate: f64, power: f64) -> Result<Self, Error> {
        Self::new(0.0, delta, drive_rate, drift_rate, power, ApplianceKind::Cooling)
    }

    pub fn temp_min(&self) -> f64 {
        self.temp_min
    }

    pub fn temp_max(&self) -> f64 {
        self.temp_max
    }

    /// Width of the allowed temperature band.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Temperature speed while ON, in degrees per hour.
    pub fn drive_rate(&self) -> f64 {
        self.drive_rate
    }

    /// Temperature speed while OFF, in degrees per hour.
    pub fn drift_rate(&self) -> f64 {
        self.drift_rate
    }

    /// Power drawn while ON, in watts.
    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn kind(&self) -> ApplianceKind {
        self.kind
    }

    /// Duration of the ON part of a nominal cycle.
    pub fn on_duration(&self) -> f64 {
        self.delta / self.drive_rate
    }

    /// Duration of the OFF part of a nominal cycle.
    pub fn off_duration(&self) -> f64 {
        self.delta / self.drift_rate
    }

    /// Steady-state share of time spent ON, `w/(v+w)`.
    pub fn on_fraction(&self) -> f64 {
        self.drift_rate / (self.drive_rate + self.drift_rate)
    }

    /// Temperature at the limit the appliance drifts towards while OFF.
    pub fn drift_limit(&self) -> f64 {
        match self.kind {
            ApplianceKind::Cooling => self.temp_max,
            ApplianceKind::Heating => self.temp_min,
        }
    }

    /// Temperature for a given distance to the drift-side limit.
    pub fn temperature_at_distance(&self, distance: f64) -> f64 {
        match self.kind {
            ApplianceKind::Cooling => self.temp_max - distance,
            ApplianceKind::Heating => self.temp_min + distance,
        }
    }
}

// Deserialization goes through `new` so the invariants hold for parsed values.
impl<'de> Deserialize<'de> for ApplianceParams {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            temp_min: f64,
            temp_max: f64,
            #[serde(default)]
            delta: Option<f64>,
            drive_rate: f64,
            drift_rate: f64,
            power: f64,
            kind: ApplianceKind,
        }
        let raw = Raw::deserialize(deserializer)?;
        let params = ApplianceParams::new(
            raw.temp_min,
            raw.temp_max,
            raw.drive_rate,
            raw.drift_rate,
            raw.power,
            raw.kind,
        )
        .map_err(serde::de::Error::custom)?;
        if let Some(d) = raw.delta {
            if d != params.delta {
                return Err(serde::de::Error::custom(format!(
                    "delta {d} does not equal temp_max - temp_min = {}",
                    params.delta
                )));
            }
        }
        Ok(params)
    }
}

/// Position of one appliance inside its nominal cycle.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct CyclePhase(f64);

impl CyclePhase {
    pub fn new(y: f64, params: &ApplianceParams) -> Result<Self, Error> {
        let cycle = cycle_length(params);
        if !(y >= 0.0 && y < cycle) {
            return Err(Error::InvalidPhase { y, cycle });
        }
        Ok(Self(y))
    }

    /// Reduces any finite time offset into `[0, cycle_length)`.
    pub fn wrapped(y: f64, params: &ApplianceParams) -> Self {
        Self(wrap_phase(y, cycle_length(params)))
    }

    pub fn hours(self) -> f64 {
        self.0
    }
}

pub(crate) fn wrap_phase(y: f64, cycle: f64) -> f64 {
    let r = y.rem_euclid(cycle);
    // rem_euclid can round up to exactly `cycle` for tiny negative inputs.
    if r >= cycle {
        0.0
    } else {
        r
    }
}

/// A homogeneous group of appliances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApplianceClass {
    pub params: ApplianceParams,
    count: u64,
}

impl ApplianceClass {
    pub fn new(params: ApplianceParams, count: u64) -> Result<Self, Error> {
        if count == 0 {
            return Err(Error::EmptyClass);
        }
        Ok(Self { params, count })
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// Length of one nominal ON/OFF cycle, `Δ/v + Δ/w`.
pub fn cycle_length(params: &ApplianceParams) -> f64 {
    params.on_duration() + params.off_duration()
}

/// Power drawn at `phase` without any request. ON covers `[0, Δ/v)`.
pub fn natural_power(params: &ApplianceParams, phase: CyclePhase) -> f64 {
    if phase.hours() < params.on_duration() {
        params.power()
    } else {
        0.0
    }
}

/// Gap `δ_T` between the current temperature and the drift-side limit.
pub fn distance_to_limit(params: &ApplianceParams, phase: CyclePhase) -> f64 {
    let y = phase.hours();
    let on = params.on_duration();
    let d = if y <= on {
        params.drive_rate() * y
    } else {
        params.delta() - params.drift_rate() * (y - on)
    };
    d.clamp(0.0, params.delta())
}

/// Temperature of an appliance at `phase`.
pub fn temperature(params: &ApplianceParams, phase: CyclePhase) -> f64 {
    params.temperature_at_distance(distance_to_limit(params, phase))
}

/// Longest constant reduction an appliance at `phase` can offer by switching
/// OFF now: `min(y·v/w, [Δ/v − y]⁺)`.
pub fn reduction_capacity(params: &ApplianceParams, phase: CyclePhase) -> f64 {
    let y = phase.hours();
    let remaining_on = params.on_duration() - y;
    if remaining_on <= 0.0 {
        return 0.0;
    }
    (y * params.drive_rate() / params.drift_rate()).min(remaining_on)
}

/// Swaps drive and drift rates and flips the kind.
///
/// Demand-increase questions on `params` are answered by running the
/// reduction machinery on `mirror(params)`.
pub fn mirror(params: &ApplianceParams) -> ApplianceParams {
    ApplianceParams {
        drive_rate: params.drift_rate,
        drift_rate: params.drive_rate,
        kind: params.kind.flipped(),
        ..*params
    }
}
