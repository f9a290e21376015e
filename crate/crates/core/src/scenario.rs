//! Scenario files: a JSON description of a fleet and a request.
//!
//! ```json
//! {
//!   "classes": [
//!     {
//!       "name": "fridges",
//!       "params": {"temp_min": 0, "temp_max": 1, "drive_rate": 0.4,
//!                  "drift_rate": 1, "power": 1, "kind": "cooling"},
//!       "count": 1400,
//!       "sampling": "stratified"
//!     }
//!   ],
//!   "request": {"kind": "reduce", "duration_hours": 0.35, "amplitude_watts": "max"},
//!   "scheme": "indiv",
//!   "mode": "probabilistic",
//!   "horizon_hours": 4.0,
//!   "seed": 42
//! }
//! ```
//!
//! Unknown fields are rejected. With several classes a numeric amplitude is
//! split across classes in proportion to their maxima, so every class obeys
//! with the same relative effort.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::analytics::{portfolio_quote, Portfolio, RequestKind, Scheme};
use crate::error::{Error, Result};
use crate::protocol::{
    plan, promised_watts, Amplitude, BroadcastMessage, PlanMode, ReductionRequest, SchemePreference,
};
use crate::sim::{build_fleet, report, simulate, FleetSpec, Policy, Sampling, SimReport};
use crate::thermo::{ApplianceClass, ApplianceParams};
use crate::trace::PowerTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    pub params: ApplianceParams,
    pub count: u64,
    #[serde(default = "default_sampling")]
    pub sampling: Sampling,
}

fn default_sampling() -> Sampling {
    Sampling::Stratified
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSpec {
    pub kind: RequestKind,
    pub duration_hours: f64,
    pub amplitude_watts: Amplitude,
}

impl RequestSpec {
    pub fn to_request(&self) -> Result<ReductionRequest> {
        ReductionRequest::new(self.kind, self.duration_hours, self.amplitude_watts)
    }
}

/// Scheme selection in a scenario. `upper` runs the drift-then-pin policy
/// instead of broadcasting a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioScheme {
    Auto,
    Indiv,
    Coord,
    Upper,
}

impl ScenarioScheme {
    fn preference(self) -> Option<SchemePreference> {
        match self {
            ScenarioScheme::Auto => Some(SchemePreference::Auto),
            ScenarioScheme::Indiv => Some(SchemePreference::Indiv),
            ScenarioScheme::Coord => Some(SchemePreference::Coord),
            ScenarioScheme::Upper => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub classes: Vec<ClassSpec>,
    #[serde(default)]
    pub request: Option<RequestSpec>,
    #[serde(default = "default_scheme")]
    pub scheme: ScenarioScheme,
    #[serde(default = "default_mode")]
    pub mode: PlanMode,
    pub horizon_hours: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_scheme() -> ScenarioScheme {
    ScenarioScheme::Auto
}

fn default_mode() -> PlanMode {
    PlanMode::Probabilistic
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRun {
    pub messages: Vec<Option<BroadcastMessage>>,
    pub baseline: PowerTrace,
    pub trace: PowerTrace,
    pub report: SimReport,
    pub acting: u64,
    pub noop_forced: u64,
    pub max_temp_excursion: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidScenario("at least one class is required".into()));
        }
        let mut names = HashSet::new();
        for c in &self.classes {
            if c.count == 0 {
                return Err(Error::InvalidScenario(format!("class {:?} has count 0", c.name)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::InvalidScenario(format!("duplicate class name {:?}", c.name)));
            }
        }
        if !(self.horizon_hours.is_finite() && self.horizon_hours > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "horizon_hours must be > 0, got {}",
                self.horizon_hours
            )));
        }
        if let Some(r) = &self.request {
            r.to_request()?;
            if !(self.horizon_hours > r.duration_hours) {
                return Err(Error::InvalidScenario(format!(
                    "horizon_hours {} must exceed the request duration {}",
                    self.horizon_hours, r.duration_hours
                )));
            }
        }
        Ok(())
    }

    pub fn portfolio(&self) -> Result<Portfolio> {
        let classes = self
            .classes
            .iter()
            .map(|c| ApplianceClass::new(c.params, c.count))
            .collect::<Result<Vec<_>>>()?;
        Portfolio::new(classes)
    }

    /// Analytic flexibility of the scenario's request, in watts.
    pub fn analytic_watts(&self) -> Result<f64> {
        let Some(r) = &self.request else { return Ok(0.0) };
        let request = r.to_request()?;
        if self.scheme == ScenarioScheme::Upper {
            let q = portfolio_quote(&self.portfolio()?, request.duration, Scheme::UpperBound, request.kind)?;
            return Ok(q.watts);
        }
        let messages = self.plan()?;
        let mut total = 0.0;
        for (c, m) in self.classes.iter().zip(&messages) {
            if let Some(m) = m {
                total += promised_watts(m, &c.params, c.count)?;
            }
        }
        Ok(total)
    }

    /// One message per class; `None` for classes that sit the request out.
    pub fn plan(&self) -> Result<Vec<Option<BroadcastMessage>>> {
        let (Some(r), Some(pref)) = (&self.request, self.scheme.preference()) else {
            return Ok(vec![None; self.classes.len()]);
        };
        let request = r.to_request()?;
        if self.classes.len() == 1 {
            let c = &self.classes[0];
            return Ok(vec![Some(plan(&request, &c.params, c.count, self.mode, pref)?)]);
        }
        let max_request = ReductionRequest {
            amplitude: Amplitude::MAX,
            ..request
        };
        let mut maxima = Vec::with_capacity(self.classes.len());
        let mut first_error = None;
        for c in &self.classes {
            match plan(&max_request, &c.params, c.count, self.mode, pref) {
                Ok(m) => maxima.push(promised_watts(&m, &c.params, c.count)?),
                Err(e @ (Error::InfeasibleDuration { .. } | Error::InfeasibleAmplitude { .. })) => {
                    first_error.get_or_insert(e);
                    maxima.push(0.0);
                }
                Err(e) => return Err(e),
            }
        }
        let total: f64 = maxima.iter().sum();
        if total <= 0.0 {
            return Err(first_error.unwrap_or(Error::InvalidRequest("no class can respond".into())));
        }
        let share = match request.amplitude {
            Amplitude::Max(_) => 1.0,
            Amplitude::Watts(a) => {
                if a > total * (1.0 + 1e-12) {
                    return Err(Error::InfeasibleAmplitude {
                        requested: a,
                        max: total,
                        t: request.duration,
                        scheme: "portfolio",
                    });
                }
                (a / total).min(1.0)
            }
        };
        self.classes
            .iter()
            .zip(&maxima)
            .map(|(c, &max)| {
                if max <= 0.0 {
                    return Ok(None);
                }
                let amplitude = match request.amplitude {
                    Amplitude::Max(_) => Amplitude::MAX,
                    Amplitude::Watts(_) => Amplitude::Watts(max * share),
                };
                let req = ReductionRequest { amplitude, ..request };
                plan(&req, &c.params, c.count, self.mode, pref).map(Some)
            })
            .collect()
    }

    /// Plans, simulates every class with and without the request, and
    /// reports on the summed traces.
    pub fn run(&self) -> Result<ScenarioRun> {
        self.validate()?;
        let messages = self.plan()?;
        let policy = match (self.scheme, &self.request) {
            (ScenarioScheme::Upper, Some(_)) => Policy::MinEnergy,
            _ => Policy::Normal,
        };
        let mut baseline: Option<PowerTrace> = None;
        let mut trace: Option<PowerTrace> = None;
        let (mut acting, mut noop, mut violations) = (0, 0, 0);
        let mut excursion: f64 = 0.0;
        let mut quantum = 0.0;
        for (index, (c, message)) in self.classes.iter().zip(&messages).enumerate() {
            let seed = self.seed.wrapping_add(index as u64);
            let spec = FleetSpec {
                params: c.params,
                n: c.count,
                sampling: c.sampling,
                seed,
            };
            let fleet = build_fleet(&spec)?;
            let base = simulate(&fleet, &c.params, None, Policy::Normal, self.horizon_hours, seed)?;
            let run = simulate(&fleet, &c.params, message.as_ref(), policy, self.horizon_hours, seed)?;
            acting += run.acting;
            noop += run.noop_forced;
            violations += base.temp_violations + run.temp_violations;
            excursion = excursion.max(run.max_temp_excursion).max(base.max_temp_excursion);
            quantum += c.params.power();
            baseline = Some(match baseline {
                None => base.trace,
                Some(b) => b.zip_with(&base.trace, |x, y| x + y)?,
            });
            trace = Some(match trace {
                None => run.trace,
                Some(t) => t.zip_with(&run.trace, |x, y| x + y)?,
            });
        }
        let baseline = baseline.expect("scenario has at least one class");
        let trace = trace.expect("scenario has at least one class");
        let request = match &self.request {
            Some(r) => r.to_request()?,
            None => ReductionRequest::new(RequestKind::Reduce, 0.0, Amplitude::MAX)?,
        };
        let promised = self.analytic_watts()?;
        let report = report(&trace, &baseline, &request, promised, quantum, violations)?;
        Ok(ScenarioRun {
            messages,
            baseline,
            trace,
            report,
            acting,
            noop_forced: noop,
            max_temp_excursion: excursion,
        })
    }
}
