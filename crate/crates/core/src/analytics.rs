//! Closed-form flexibility of a homogeneous fleet.
//!
//! All fractions are relative to a reference power: the steady-state
//! consumption `N·P·w/(v+w)` for reductions, or the steady-state
//! non-consumption `N·P·v/(v+w)` for increases. Increase figures are the
//! reduction figures of the mirrored appliance (drive and drift rates
//! swapped).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermo::{mirror, ApplianceClass, ApplianceParams};

/// Direction of a demand-response request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    Reduce,
    Increase,
}

impl RequestKind {
    /// Parameters whose reduction figures answer this kind of request.
    pub fn effective_params(self, params: &ApplianceParams) -> ApplianceParams {
        match self {
            RequestKind::Reduce => *params,
            RequestKind::Increase => mirror(params),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::Reduce => "reduce",
            RequestKind::Increase => "increase",
        }
    }
}

/// How the fleet delivers the flexibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Best average over the window, ignoring the constant-power constraint.
    UpperBound,
    /// Only appliances that can individually hold the reduction for the whole window.
    Indiv,
    /// Two batches, the second entering as the first expires.
    Coord,
    /// The drift-then-pin policy that attains the upper bound.
    MinEnergyPolicy,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::UpperBound => "upper_bound",
            Scheme::Indiv => "indiv",
            Scheme::Coord => "coord",
            Scheme::MinEnergyPolicy => "min_energy_policy",
        }
    }

    /// Whether the scheme holds a constant power over the window.
    pub fn is_constant(self) -> bool {
        matches!(self, Scheme::Indiv | Scheme::Coord)
    }
}

/// Flexibility available from one class over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionQuote {
    pub fraction: f64,
    pub watts: f64,
    pub reference_watts: f64,
    pub scheme: Scheme,
    pub duration: f64,
    pub kind: RequestKind,
}

/// CoordRed plan for one duration.
///
/// `t_tilde` is the end of the constant phase of the first batch, `[y1, y2]`
/// the first-batch phase interval, `y3` the lowest (wrapped) phase of the
/// second batch, `hat_t` the time at which the first batch has entirely
/// stopped reducing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordSchedule {
    pub duration: f64,
    pub t_tilde: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub hat_t: f64,
    pub fraction: f64,
}

impl CoordSchedule {
    /// Slack of the four feasibility constraints, in order:
    /// `y3 − y2`, `y3 − (Δ/v + Δ/w − t)`, `(Δ/v − t) − y1`,
    /// `(v/w)(t̃ + y1) − (t − t̃)`. All are non-negative for a feasible plan.
    pub fn constraint_slacks(&self, params: &ApplianceParams) -> [f64; 4] {
        let v = params.drive_rate();
        let w = params.drift_rate();
        let on = params.on_duration();
        let cycle = on + params.off_duration();
        let t = self.duration;
        [
            self.y3 - self.y2,
            self.y3 - (cycle - t),
            (on - t) - self.y1,
            v / w * (self.t_tilde + self.y1) - (t - self.t_tilde),
        ]
    }

    /// Second-batch phases sweep `y1 − rate·x` for `x ∈ [0, t − t̃]`.
    pub fn entry_rate(params: &ApplianceParams) -> f64 {
        1.0 + params.drift_rate() / params.drive_rate()
    }
}

/// A set of appliance classes whose flexibilities add up.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Portfolio {
    classes: Vec<ApplianceClass>,
}

impl Portfolio {
    pub fn new(classes: Vec<ApplianceClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::EmptyPortfolio);
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> &[ApplianceClass] {
        &self.classes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassQuote {
    pub watts: f64,
    pub fraction: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioQuote {
    pub watts: f64,
    pub per_class: Vec<ClassQuote>,
}

// Durations within this relative margin of a scheme maximum are treated as
// equal to it, so values printed and re-parsed stay feasible.
const DURATION_REL_TOL: f64 = 1e-12;

fn check_duration(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDuration(t))
    }
}

/// Steady-state aggregate consumption `N·P·w/(v+w)`.
pub fn steady_state_power(params: &ApplianceParams, n: u64) -> f64 {
    n as f64 * params.power() * params.on_fraction()
}

/// Probability that an appliance drawn from the steady state can hold a
/// reduction for at least `t`.
pub fn survival(params: &ApplianceParams, t: f64) -> Result<f64> {
    Ok(params.on_fraction() * indiv_fraction(params, t)?)
}

/// Longest window with a non-zero IndivRed reduction, `Δ/(v+w)`.
pub fn indiv_max_duration(params: &ApplianceParams) -> f64 {
    params.delta() / (params.drive_rate() + params.drift_rate())
}

/// IndivRed relative reduction `[1 − t(v+w)/Δ]⁺`.
pub fn indiv_fraction(params: &ApplianceParams, t: f64) -> Result<f64> {
    check_duration(t)?;
    let r = 1.0 - t * (params.drive_rate() + params.drift_rate()) / params.delta();
    Ok(r.clamp(0.0, 1.0))
}

/// Upper bound on the average relative reduction over `t`.
///
/// `1 − w·t/(2Δ)` up to `t = Δ/w`, then `Δ/(2·w·t)`.
pub fn upper_bound_fraction(params: &ApplianceParams, t: f64) -> Result<f64> {
    check_duration(t)?;
    let w = params.drift_rate();
    let delta = params.delta();
    let r = if w * t <= delta {
        1.0 - w * t / (2.0 * delta)
    } else {
        delta / (2.0 * w * t)
    };
    Ok(r.clamp(0.0, 1.0))
}

/// Expected energy one appliance consumes over `t` under the drift-then-pin
/// policy, in watt-hours.
pub fn min_energy_per_appliance(params: &ApplianceParams, t: f64) -> Result<f64> {
    check_duration(t)?;
    let v = params.drive_rate();
    let w = params.drift_rate();
    let delta = params.delta();
    let p = params.power();
    let wt = w * t;
    Ok(if wt <= delta {
        p / (v + w) * wt * wt / (2.0 * delta)
    } else {
        p * w / (v + w) * (t - delta / (2.0 * w))
    })
}

/// Longest window CoordRed can cover, `Δ(v+2w)/(v+w)²`.
pub fn coord_max_duration(params: &ApplianceParams) -> f64 {
    let v = params.drive_rate();
    let w = params.drift_rate();
    params.delta() * (v + 2.0 * w) / ((v + w) * (v + w))
}

fn coord_duration(params: &ApplianceParams, t: f64) -> Result<f64> {
    check_duration(t)?;
    let max = coord_max_duration(params);
    if t > max * (1.0 + DURATION_REL_TOL) {
        return Err(Error::InfeasibleDuration {
            t,
            max,
            scheme: Scheme::Coord.as_str(),
        });
    }
    Ok(t.min(max))
}

/// CoordRed plan maximising the constant reduction over `t`.
pub fn coord_schedule(params: &ApplianceParams, t: f64) -> Result<CoordSchedule> {
    let t = coord_duration(params, t)?;
    let v = params.drive_rate();
    let w = params.drift_rate();
    let on = params.on_duration();
    let cycle = on + params.off_duration();
    let t_tilde = w * t / (v + 2.0 * w);
    let y1 = t_tilde * w / v;
    let y2 = on - t_tilde;
    let y3 = cycle + t_tilde * w / v - (1.0 + w / v) * (t - t_tilde);
    let hat_t = (on - y1).min(y2 * v / w);
    let fraction = (1.0 - (v + w) * t_tilde / params.delta()).clamp(0.0, 1.0);
    Ok(CoordSchedule {
        duration: t,
        t_tilde,
        y1,
        y2,
        y3,
        hat_t,
        fraction,
    })
}

/// CoordRed relative reduction `1 − t·(v+w)/(v+2w)·w/Δ`.
pub fn coord_fraction(params: &ApplianceParams, t: f64) -> Result<f64> {
    let t = coord_duration(params, t)?;
    let v = params.drive_rate();
    let w = params.drift_rate();
    let r = 1.0 - t * (v + w) / (v + 2.0 * w) * w / params.delta();
    Ok(r.clamp(0.0, 1.0))
}

/// Relative flexibility of `scheme` for a reduction on `params`.
pub fn scheme_fraction(params: &ApplianceParams, t: f64, scheme: Scheme) -> Result<f64> {
    match scheme {
        Scheme::UpperBound | Scheme::MinEnergyPolicy => upper_bound_fraction(params, t),
        Scheme::Indiv => indiv_fraction(params, t),
        Scheme::Coord => coord_fraction(params, t),
    }
}

/// Flexibility of `n` appliances over `t`.
pub fn quote(params: &ApplianceParams, n: u64, t: f64, scheme: Scheme, kind: RequestKind) -> Result<ReductionQuote> {
    let effective = kind.effective_params(params);
    let fraction = scheme_fraction(&effective, t, scheme)?;
    let reference_watts = steady_state_power(&effective, n);
    Ok(ReductionQuote {
        fraction,
        watts: fraction * reference_watts,
        reference_watts,
        scheme,
        duration: t,
        kind,
    })
}

/// Sum of per-class quotes. Classes for which `t` exceeds the CoordRed
/// maximum contribute zero and are marked infeasible.
pub fn portfolio_quote(portfolio: &Portfolio, t: f64, scheme: Scheme, kind: RequestKind) -> Result<PortfolioQuote> {
    check_duration(t)?;
    let mut per_class = Vec::with_capacity(portfolio.classes().len());
    for class in portfolio.classes() {
        let entry = match quote(&class.params, class.count(), t, scheme, kind) {
            Ok(q) => ClassQuote {
                watts: q.watts,
                fraction: q.fraction,
                feasible: true,
            },
            Err(Error::InfeasibleDuration { .. }) => ClassQuote {
                watts: 0.0,
                fraction: 0.0,
                feasible: false,
            },
            Err(e) => return Err(e),
        };
        per_class.push(entry);
    }
    let watts = per_class.iter().map(|c| c.watts).sum();
    Ok(PortfolioQuote { watts, per_class })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_a() -> ApplianceParams {
        ApplianceParams::from_band(1.0, 0.4, 1.0, 1.0).unwrap()
    }

    fn set_b() -> ApplianceParams {
        ApplianceParams::from_band(1.0, 2.0, 1.0, 1.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn steady_state_examples() {
        assert!(close(steady_state_power(&set_a(), 1400), 1000.0, 1e-9));
        let sym = ApplianceParams::from_band(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(steady_state_power(&sym, 2), 1.0);
        assert!(close(steady_state_power(&set_b(), 3000), 1000.0, 1e-9));
    }

    #[test]
    fn survival_examples() {
        let p = set_a();
        assert!(close(survival(&p, 0.35).unwrap(), 0.364286, 1e-6));
        assert_eq!(survival(&p, 1.0 / 1.4).unwrap(), 0.0);
        assert_eq!(survival(&p, 0.9).unwrap(), 0.0);
        assert!(close(survival(&p, 0.0).unwrap(), 0.714286, 1e-6));
        assert!(survival(&p, -0.1).is_err());
    }

    #[test]
    fn indiv_examples() {
        let p = set_a();
        assert_eq!(indiv_fraction(&p, 0.0).unwrap(), 1.0);
        assert!(close(indiv_fraction(&p, 0.35).unwrap(), 0.51, 1e-12));
        assert!(close(indiv_fraction(&p, 0.714286).unwrap(), 0.0, 1e-6));
    }

    #[test]
    fn upper_bound_examples() {
        let p = set_a();
        assert!(close(upper_bound_fraction(&p, 1.0).unwrap(), 0.5, 1e-12));
        assert!(close(upper_bound_fraction(&p, 0.5).unwrap(), 0.75, 1e-12));
        assert!(close(upper_bound_fraction(&p, 2.0).unwrap(), 0.25, 1e-12));
        assert_eq!(upper_bound_fraction(&p, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn min_energy_examples() {
        let p = set_a();
        assert!(close(min_energy_per_appliance(&p, 0.5).unwrap(), 0.089286, 1e-6));
        assert!(close(min_energy_per_appliance(&p, 2.0).unwrap(), 1.071429, 1e-6));
        assert_eq!(min_energy_per_appliance(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn min_energy_matches_upper_bound() {
        // E_min/(t·P·w/(v+w)) is the consumed share, one minus the bound.
        let p = set_a();
        for &t in &[0.1, 0.5, 1.0, 1.7, 3.0] {
            let consumed = min_energy_per_appliance(&p, t).unwrap() / (t * p.power() * p.on_fraction());
            assert!(close(1.0 - consumed, upper_bound_fraction(&p, t).unwrap(), 1e-12));
        }
    }

    #[test]
    fn coord_max_examples() {
        assert!(close(coord_max_duration(&set_a()), 1.224490, 1e-6));
        assert!(close(coord_max_duration(&set_b()), 0.444444, 1e-6));
        let sym = ApplianceParams::from_band(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(coord_max_duration(&sym), 0.75);
    }

    #[test]
    fn coord_schedule_examples() {
        let s = coord_schedule(&set_a(), 0.8).unwrap();
        assert!(close(s.t_tilde, 0.333333, 1e-6));
        assert!(close(s.y1, 0.833333, 1e-6));
        assert!(close(s.y2, 2.166667, 1e-6));
        assert!(close(s.y3, 2.7, 1e-9));
        assert!(close(s.fraction, 0.533333, 1e-6));
        // second constraint is tight at this point
        assert!(close(s.constraint_slacks(&set_a())[1], 0.0, 1e-12));

        let s = coord_schedule(&set_b(), 0.4).unwrap();
        assert!(close(s.t_tilde, 0.1, 1e-12));
        assert!(close(s.y1, 0.05, 1e-12));
        assert!(close(s.y2, 0.4, 1e-12));
        assert!(close(s.fraction, 0.7, 1e-12));
        assert!(close(s.hat_t, 0.45, 1e-12));

        assert!(matches!(
            coord_schedule(&set_a(), 1.3),
            Err(Error::InfeasibleDuration { .. })
        ));
    }

    #[test]
    fn coord_fraction_examples() {
        assert!(close(coord_fraction(&set_a(), 0.8).unwrap(), 0.533333, 1e-6));
        assert!(close(coord_fraction(&set_b(), 0.4).unwrap(), 0.7, 1e-12));
        for p in [set_a(), set_b()] {
            let at_max = coord_fraction(&p, coord_max_duration(&p)).unwrap();
            let expected = p.drive_rate() / (p.drive_rate() + p.drift_rate());
            assert!(close(at_max, expected, 1e-12));
        }
        assert!(coord_fraction(&set_a(), 1.3).is_err());
    }

    #[test]
    fn quote_examples() {
        let q = quote(&set_a(), 1400, 0.35, Scheme::Indiv, RequestKind::Reduce).unwrap();
        assert!(close(q.watts, 510.0, 1e-9));
        let q = quote(&set_a(), 1400, 0.35, Scheme::Indiv, RequestKind::Increase).unwrap();
        assert!(close(q.watts, 204.0, 1e-9));
        assert!(close(q.reference_watts, 400.0, 1e-9));
        let q = quote(&set_b(), 3000, 0.4, Scheme::Coord, RequestKind::Reduce).unwrap();
        assert!(close(q.watts, 700.0, 1e-9));
    }

    #[test]
    fn increase_coord_matches_closed_form() {
        // (1 − t(v+w)/(2v+w)·v/Δ) · N·P·v/(v+w)
        let p = set_a();
        let (v, w) = (0.4, 1.0);
        let t = 0.5;
        let expected = (1.0 - t * (v + w) / (2.0 * v + w) * v) * 1400.0 * v / (v + w);
        let q = quote(&p, 1400, t, Scheme::Coord, RequestKind::Increase).unwrap();
        assert!(close(q.watts, expected, 1e-9));
        let max = coord_max_duration(&mirror(&p));
        assert!(close(max, (w + 2.0 * v) / ((v + w) * (v + w)), 1e-12));
    }

    #[test]
    fn portfolio_examples() {
        let a = ApplianceClass::new(set_a(), 1400).unwrap();
        let b = ApplianceClass::new(set_b(), 3000).unwrap();
        let pf = Portfolio::new(vec![a, b]).unwrap();
        let q = portfolio_quote(&pf, 0.35, Scheme::Indiv, RequestKind::Reduce).unwrap();
        assert!(close(q.watts, 510.0, 1e-9));

        let single = Portfolio::new(vec![a]).unwrap();
        let q1 = portfolio_quote(&single, 0.35, Scheme::Indiv, RequestKind::Reduce).unwrap();
        let direct = quote(&set_a(), 1400, 0.35, Scheme::Indiv, RequestKind::Reduce).unwrap();
        assert_eq!(q1.watts, direct.watts);

        let twice = Portfolio::new(vec![a, a]).unwrap();
        let q2 = portfolio_quote(&twice, 0.35, Scheme::Indiv, RequestKind::Reduce).unwrap();
        assert!(close(q2.watts, 1020.0, 1e-9));

        let q3 = portfolio_quote(&pf, 0.8, Scheme::Coord, RequestKind::Reduce).unwrap();
        assert!(q3.per_class[0].feasible);
        assert!(!q3.per_class[1].feasible);
        assert!(close(q3.watts, 533.333333, 1e-5));

        assert!(Portfolio::new(vec![]).is_err());
    }
}
