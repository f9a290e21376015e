//! The single broadcast message of a request.
//!
//! The aggregator turns a request into one [`BroadcastMessage`] with
//! [`plan`]. Every appliance turns that message into at most one action with
//! [`interpret`], using only its own parameters, its own cycle phase and a
//! private uniform draw.
//!
//! Increase requests are planned and interpreted on the mirrored appliance:
//! an "off" action in the mirrored frame switches the real temperature
//! modifier ON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    coord_fraction, coord_schedule, indiv_fraction, indiv_max_duration, steady_state_power, CoordSchedule, RequestKind,
    Scheme,
};
use crate::error::{Error, Result};
use crate::thermo::{reduction_capacity, wrap_phase, ApplianceParams, CyclePhase};

// Relative slack when comparing an amplitude to a scheme maximum.
const AMPLITUDE_REL_TOL: f64 = 1e-12;
// Tolerance for cross-checking carried schedule anchors.
const ANCHOR_TOL: f64 = 1e-9;

/// Requested amplitude: a power in watts or the most the fleet can give.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Watts(f64),
    Max(MaxKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxKeyword {
    Max,
}

impl Amplitude {
    pub const MAX: Amplitude = Amplitude::Max(MaxKeyword::Max);

    pub fn watts(&self) -> Option<f64> {
        match *self {
            Amplitude::Watts(a) => Some(a),
            Amplitude::Max(_) => None,
        }
    }
}

impl std::str::FromStr for Amplitude {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(Amplitude::MAX);
        }
        s.parse::<f64>()
            .map(Amplitude::Watts)
            .map_err(|_| Error::InvalidRequest(format!("amplitude must be a number of watts or 'max', got {s:?}")))
    }
}

/// What the grid asks the aggregator for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionRequest {
    pub kind: RequestKind,
    pub duration: f64,
    pub amplitude: Amplitude,
}

impl ReductionRequest {
    pub fn new(kind: RequestKind, duration: f64, amplitude: Amplitude) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::InvalidRequest(format!("duration must be >= 0, got {duration}")));
        }
        if let Amplitude::Watts(a) = amplitude {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidRequest(format!("amplitude must be > 0 W, got {a}")));
            }
        }
        Ok(Self {
            kind,
            duration,
            amplitude,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageScheme {
    Indiv,
    Coord,
}

impl MessageScheme {
    pub fn as_scheme(self) -> Scheme {
        match self {
            MessageScheme::Indiv => Scheme::Indiv,
            MessageScheme::Coord => Scheme::Coord,
        }
    }
}

/// How a smaller-than-maximum amplitude is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    /// Stretch the IndivRed threshold so only the longest reducers act.
    Longest,
    /// Keep the threshold and let each appliance obey with probability `p`.
    Probabilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemePreference {
    Auto,
    Indiv,
    Coord,
}

/// CoordRed schedule anchors carried in the message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleAnchors {
    pub t_tilde: f64,
    pub y1: f64,
    pub y2: f64,
}

impl From<&CoordSchedule> for ScheduleAnchors {
    fn from(s: &CoordSchedule) -> Self {
        Self {
            t_tilde: s.t_tilde,
            y1: s.y1,
            y2: s.y2,
        }
    }
}

/// The aggregator-to-fleet message. Serialized as a flat record with keys
/// `kind, scheme, threshold_hours, participation, t_tilde, y1, y2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MessageRecord", into = "MessageRecord")]
pub struct BroadcastMessage {
    kind: RequestKind,
    scheme: MessageScheme,
    threshold: f64,
    schedule: Option<ScheduleAnchors>,
    participation: f64,
}

impl BroadcastMessage {
    pub fn new(
        kind: RequestKind,
        scheme: MessageScheme,
        threshold: f64,
        schedule: Option<ScheduleAnchors>,
        participation: f64,
    ) -> Result<Self> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Error::InvalidMessage(format!(
                "threshold must be >= 0, got {threshold}"
            )));
        }
        if !(0.0..=1.0).contains(&participation) {
            return Err(Error::InvalidMessage(format!(
                "participation must lie in [0, 1], got {participation}"
            )));
        }
        match (scheme, &schedule) {
            (MessageScheme::Indiv, Some(_)) => {
                return Err(Error::InvalidMessage("an indiv message carries no schedule".into()))
            }
            (MessageScheme::Coord, None) => {
                return Err(Error::InvalidMessage("a coord message needs t_tilde, y1 and y2".into()))
            }
            (MessageScheme::Coord, Some(s)) => {
                let finite = s.t_tilde.is_finite() && s.y1.is_finite() && s.y2.is_finite();
                if !finite || s.t_tilde < 0.0 || s.t_tilde > threshold || s.y1 < 0.0 || s.y1 > s.y2 {
                    return Err(Error::InvalidMessage(format!(
                        "schedule {s:?} inconsistent with threshold {threshold}"
                    )));
                }
            }
            (MessageScheme::Indiv, None) => {}
        }
        Ok(Self {
            kind,
            scheme,
            threshold,
            schedule,
            participation,
        })
    }

    pub fn indiv(kind: RequestKind, threshold: f64, participation: f64) -> Result<Self> {
        Self::new(kind, MessageScheme::Indiv, threshold, None, participation)
    }

    pub fn coord(kind: RequestKind, schedule: &CoordSchedule, participation: f64) -> Result<Self> {
        Self::new(
            kind,
            MessageScheme::Coord,
            schedule.duration,
            Some(schedule.into()),
            participation,
        )
    }

    pub fn kind(&self) -> RequestKind {
        self.kind
    }

    pub fn scheme(&self) -> MessageScheme {
        self.scheme
    }

    /// IndivRed: the (possibly stretched) hold duration. CoordRed: the request duration.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn schedule(&self) -> Option<ScheduleAnchors> {
        self.schedule
    }

    pub fn participation(&self) -> f64 {
        self.participation
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageRecord {
    kind: RequestKind,
    scheme: MessageScheme,
    threshold_hours: f64,
    participation: f64,
    #[serde(default)]
    t_tilde: Option<f64>,
    #[serde(default)]
    y1: Option<f64>,
    #[serde(default)]
    y2: Option<f64>,
}

impl TryFrom<MessageRecord> for BroadcastMessage {
    type Error = Error;

    fn try_from(r: MessageRecord) -> Result<Self> {
        let schedule = match (r.t_tilde, r.y1, r.y2) {
            (Some(t_tilde), Some(y1), Some(y2)) => Some(ScheduleAnchors { t_tilde, y1, y2 }),
            (None, None, None) => None,
            _ => {
                return Err(Error::InvalidMessage(
                    "t_tilde, y1 and y2 must be given together".into(),
                ))
            }
        };
        BroadcastMessage::new(r.kind, r.scheme, r.threshold_hours, schedule, r.participation)
    }
}

impl From<BroadcastMessage> for MessageRecord {
    fn from(m: BroadcastMessage) -> Self {
        MessageRecord {
            kind: m.kind,
            scheme: m.scheme,
            threshold_hours: m.threshold,
            participation: m.participation,
            t_tilde: m.schedule.map(|s| s.t_tilde),
            y1: m.schedule.map(|s| s.y1),
            y2: m.schedule.map(|s| s.y2),
        }
    }
}

/// One appliance's reaction to a message. Times are hours after receipt;
/// "off" is in the request's frame (forced ON for increase requests).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ApplianceAction {
    None,
    OffNow,
    OffAt(f64),
}

fn scheme_max(params: &ApplianceParams, n: u64, t: f64, scheme: MessageScheme) -> Result<f64> {
    let reference = steady_state_power(params, n);
    let fraction = match scheme {
        MessageScheme::Indiv => indiv_fraction(params, t)?,
        MessageScheme::Coord => coord_fraction(params, t)?,
    };
    Ok(reference * fraction)
}

/// Expected power a message delivers from `n` appliances, in watts.
pub fn promised_watts(message: &BroadcastMessage, params: &ApplianceParams, n: u64) -> Result<f64> {
    let eff = message.kind.effective_params(params);
    Ok(scheme_max(&eff, n, message.threshold, message.scheme)? * message.participation)
}

/// Builds the broadcast message answering `request` for `n` appliances.
pub fn plan(
    request: &ReductionRequest,
    params: &ApplianceParams,
    n: u64,
    mode: PlanMode,
    preference: SchemePreference,
) -> Result<BroadcastMessage> {
    let eff = request.kind.effective_params(params);
    let t = request.duration;
    let indiv_max = scheme_max(&eff, n, t, MessageScheme::Indiv)?;
    let fits = |max: f64, a: f64| a <= max * (1.0 + AMPLITUDE_REL_TOL);

    let scheme = match (preference, request.amplitude) {
        (SchemePreference::Indiv, _) => MessageScheme::Indiv,
        (SchemePreference::Coord, _) => MessageScheme::Coord,
        (SchemePreference::Auto, Amplitude::Max(_)) => {
            if coord_fraction(&eff, t).is_ok() {
                MessageScheme::Coord
            } else {
                MessageScheme::Indiv
            }
        }
        (SchemePreference::Auto, Amplitude::Watts(a)) => {
            if indiv_max > 0.0 && fits(indiv_max, a) {
                MessageScheme::Indiv
            } else {
                match scheme_max(&eff, n, t, MessageScheme::Coord) {
                    Ok(_) => MessageScheme::Coord,
                    Err(Error::InfeasibleDuration { .. }) if indiv_max > 0.0 => {
                        return Err(Error::InfeasibleAmplitude {
                            requested: a,
                            max: indiv_max,
                            t,
                            scheme: Scheme::Indiv.as_str(),
                        })
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    };

    let max = match scheme {
        MessageScheme::Indiv => {
            if indiv_max <= 0.0 {
                return Err(Error::InfeasibleDuration {
                    t,
                    max: indiv_max_duration(&eff),
                    scheme: Scheme::Indiv.as_str(),
                });
            }
            indiv_max
        }
        MessageScheme::Coord => scheme_max(&eff, n, t, MessageScheme::Coord)?,
    };
    if let Amplitude::Watts(a) = request.amplitude {
        if !fits(max, a) {
            return Err(Error::InfeasibleAmplitude {
                requested: a,
                max,
                t,
                scheme: scheme.as_scheme().as_str(),
            });
        }
    }

    match (scheme, mode, request.amplitude) {
        (MessageScheme::Indiv, PlanMode::Longest, Amplitude::Watts(a)) => {
            let v = eff.drive_rate();
            let w = eff.drift_rate();
            let stretched = eff.delta() * (1.0 / (v + w) - a / (n as f64 * eff.power() * w));
            BroadcastMessage::indiv(request.kind, stretched.max(t), 1.0)
        }
        (MessageScheme::Indiv, _, amplitude) => {
            let p = amplitude.watts().map_or(1.0, |a| (a / max).min(1.0));
            BroadcastMessage::indiv(request.kind, t, p)
        }
        // CoordRed has no threshold to stretch; smaller amplitudes always use p.
        (MessageScheme::Coord, _, amplitude) => {
            let schedule = coord_schedule(&eff, t)?;
            let p = amplitude.watts().map_or(1.0, |a| (a / max).min(1.0));
            BroadcastMessage::coord(request.kind, &schedule, p)
        }
    }
}

/// Phase of the appliance in the request's frame.
fn frame_phase(kind: RequestKind, params: &ApplianceParams, phase: CyclePhase) -> f64 {
    match kind {
        RequestKind::Reduce => phase.hours(),
        RequestKind::Increase => {
            let cycle = params.on_duration() + params.off_duration();
            wrap_phase(phase.hours() - params.on_duration(), cycle)
        }
    }
}

/// The action an appliance at `phase` takes on receiving `message`.
///
/// `draw` is the appliance's private uniform sample; it ignores the message
/// when `draw >= participation`. CoordRed anchors are recomputed from the
/// appliance's own parameters and rejected if they disagree.
pub fn interpret(
    message: &BroadcastMessage,
    params: &ApplianceParams,
    phase: CyclePhase,
    draw: f64,
) -> Result<ApplianceAction> {
    if draw >= message.participation {
        return Ok(ApplianceAction::None);
    }
    let eff = message.kind.effective_params(params);
    let y = frame_phase(message.kind, params, phase);
    let frame = CyclePhase::wrapped(y, &eff);
    match message.scheme {
        MessageScheme::Indiv => {
            let on = y < eff.on_duration();
            if on && reduction_capacity(&eff, frame) >= message.threshold {
                Ok(ApplianceAction::OffNow)
            } else {
                Ok(ApplianceAction::None)
            }
        }
        MessageScheme::Coord => {
            let schedule = coord_schedule(&eff, message.threshold)?;
            if let Some(carried) = message.schedule {
                let same = |a: f64, b: f64| (a - b).abs() <= ANCHOR_TOL * b.abs().max(1.0);
                if !(same(carried.t_tilde, schedule.t_tilde)
                    && same(carried.y1, schedule.y1)
                    && same(carried.y2, schedule.y2))
                {
                    return Err(Error::InvalidMessage(format!(
                        "carried anchors {carried:?} disagree with recomputed schedule {schedule:?}"
                    )));
                }
            }
            Ok(coord_action(&eff, &schedule, y))
        }
    }
}

fn coord_action(params: &ApplianceParams, schedule: &CoordSchedule, y: f64) -> ApplianceAction {
    if y >= schedule.y1 && y <= schedule.y2 {
        return ApplianceAction::OffNow;
    }
    let cycle = params.on_duration() + params.off_duration();
    let gap = wrap_phase(schedule.y1 - y, cycle);
    let x = gap / CoordSchedule::entry_rate(params);
    if x <= schedule.duration - schedule.t_tilde {
        ApplianceAction::OffAt(schedule.t_tilde + x)
    } else {
        ApplianceAction::None
    }
}

/// Deterministic uniform sample in `[0, 1)` for appliance `index`.
///
/// Each index reads its own ChaCha8 stream of the seed, so draws do not depend
/// on evaluation order or thread count.
pub fn participation_draw(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.gen::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::survival;

    fn set_a() -> ApplianceParams {
        ApplianceParams::from_band(1.0, 0.4, 1.0, 1.0).unwrap()
    }

    fn req(a: Amplitude, t: f64) -> ReductionRequest {
        ReductionRequest::new(RequestKind::Reduce, t, a).unwrap()
    }

    fn phase(y: f64) -> CyclePhase {
        CyclePhase::new(y, &set_a()).unwrap()
    }

    #[test]
    fn request_validation() {
        assert!(ReductionRequest::new(RequestKind::Reduce, -1.0, Amplitude::MAX).is_err());
        assert!(ReductionRequest::new(RequestKind::Reduce, 1.0, Amplitude::Watts(0.0)).is_err());
        assert!(ReductionRequest::new(RequestKind::Reduce, 1.0, Amplitude::Watts(5.0)).is_ok());
        assert_eq!("MAX".parse::<Amplitude>().unwrap(), Amplitude::MAX);
        assert_eq!("12.5".parse::<Amplitude>().unwrap(), Amplitude::Watts(12.5));
        assert!("lots".parse::<Amplitude>().is_err());
    }

    #[test]
    fn plan_longest() {
        let m = plan(
            &req(Amplitude::Watts(300.0), 0.35),
            &set_a(),
            1400,
            PlanMode::Longest,
            SchemePreference::Indiv,
        )
        .unwrap();
        assert_eq!(m.scheme(), MessageScheme::Indiv);
        assert!((m.threshold() - 0.5).abs() < 1e-12);
        assert_eq!(m.participation(), 1.0);
        assert!((promised_watts(&m, &set_a(), 1400).unwrap() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn plan_probabilistic() {
        let m = plan(
            &req(Amplitude::Watts(300.0), 0.35),
            &set_a(),
            1400,
            PlanMode::Probabilistic,
            SchemePreference::Indiv,
        )
        .unwrap();
        assert!((m.threshold() - 0.35).abs() < 1e-15);
        assert!((m.participation() - 0.588235).abs() < 1e-6);
        // the closed form A/(NP)·(v+w)/(w·R)
        let closed = 300.0 / 1400.0 * 1.4 / (1.0 * 0.51);
        assert!((m.participation() - closed).abs() < 1e-12);
    }

    #[test]
    fn plan_infeasible() {
        for mode in [PlanMode::Longest, PlanMode::Probabilistic] {
            for pref in [SchemePreference::Auto, SchemePreference::Indiv, SchemePreference::Coord] {
                let r = plan(&req(Amplitude::Watts(2000.0), 0.35), &set_a(), 1400, mode, pref);
                assert!(
                    matches!(r, Err(Error::InfeasibleAmplitude { .. })),
                    "{mode:?} {pref:?}: {r:?}"
                );
            }
        }
        let r = plan(
            &req(Amplitude::MAX, 1.3),
            &set_a(),
            1400,
            PlanMode::Probabilistic,
            SchemePreference::Coord,
        );
        assert!(matches!(r, Err(Error::InfeasibleDuration { .. })));
        let r = plan(
            &req(Amplitude::Watts(10.0), 0.8),
            &set_a(),
            1400,
            PlanMode::Longest,
            SchemePreference::Indiv,
        );
        assert!(matches!(r, Err(Error::InfeasibleDuration { .. })));
        let r = plan(
            &req(Amplitude::Watts(10.0), 1.3),
            &set_a(),
            1400,
            PlanMode::Longest,
            SchemePreference::Auto,
        );
        assert!(matches!(r, Err(Error::InfeasibleDuration { .. })));
    }

    #[test]
    fn plan_auto_choices() {
        let m = plan(
            &req(Amplitude::MAX, 0.35),
            &set_a(),
            1400,
            PlanMode::Longest,
            SchemePreference::Auto,
        )
        .unwrap();
        assert_eq!(m.scheme(), MessageScheme::Coord);
        assert_eq!(m.threshold(), 0.35);
        assert_eq!(m.participation(), 1.0);
        let m = plan(
            &req(Amplitude::Watts(300.0), 0.35),
            &set_a(),
            1400,
            PlanMode::Longest,
            SchemePreference::Auto,
        )
        .unwrap();
        assert_eq!(m.scheme(), MessageScheme::Indiv);
        // 600 W over 0.35 h exceeds IndivRed (510 W) but not CoordRed.
        let m = plan(
            &req(Amplitude::Watts(600.0), 0.35),
            &set_a(),
            1400,
            PlanMode::Longest,
            SchemePreference::Auto,
        )
        .unwrap();
        assert_eq!(m.scheme(), MessageScheme::Coord);
        assert!((promised_watts(&m, &set_a(), 1400).unwrap() - 600.0).abs() < 1e-9);
    }

    #[test]
    fn interpret_indiv_examples() {
        let m = BroadcastMessage::indiv(RequestKind::Reduce, 0.35, 1.0).unwrap();
        assert_eq!(
            interpret(&m, &set_a(), phase(1.0), 0.0).unwrap(),
            ApplianceAction::OffNow
        );
        assert_eq!(interpret(&m, &set_a(), phase(3.0), 0.0).unwrap(), ApplianceAction::None);
        let zero = BroadcastMessage::indiv(RequestKind::Reduce, 0.0, 1.0).unwrap();
        assert_eq!(
            interpret(&zero, &set_a(), phase(3.0), 0.0).unwrap(),
            ApplianceAction::None
        );
        let half = BroadcastMessage::indiv(RequestKind::Reduce, 0.35, 0.5).unwrap();
        assert_eq!(
            interpret(&half, &set_a(), phase(1.0), 0.7).unwrap(),
            ApplianceAction::None
        );
        assert_eq!(
            interpret(&half, &set_a(), phase(1.0), 0.2).unwrap(),
            ApplianceAction::OffNow
        );
    }

    #[test]
    fn interpret_coord_example() {
        let s = coord_schedule(&set_a(), 0.8).unwrap();
        let m = BroadcastMessage::coord(RequestKind::Reduce, &s, 1.0).unwrap();
        match interpret(&m, &set_a(), phase(0.6), 0.0).unwrap() {
            ApplianceAction::OffAt(t) => assert!((t - 0.4).abs() < 1e-12, "{t}"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            interpret(&m, &set_a(), phase(1.5), 0.0).unwrap(),
            ApplianceAction::OffNow
        );
        // y3 = 2.7 is the last wrapped second-batch phase
        assert!(matches!(
            interpret(&m, &set_a(), phase(2.75), 0.0).unwrap(),
            ApplianceAction::OffAt(_)
        ));
        assert_eq!(interpret(&m, &set_a(), phase(2.6), 0.0).unwrap(), ApplianceAction::None);
    }

    #[test]
    fn interpret_rejects_forged_anchors() {
        let s = coord_schedule(&set_a(), 0.8).unwrap();
        let forged = ScheduleAnchors {
            y1: s.y1 + 0.1,
            ..(&s).into()
        };
        let m = BroadcastMessage::new(RequestKind::Reduce, MessageScheme::Coord, 0.8, Some(forged), 1.0).unwrap();
        assert!(matches!(
            interpret(&m, &set_a(), phase(1.0), 0.0),
            Err(Error::InvalidMessage(_))
        ));
    }

    #[test]
    fn message_validation() {
        assert!(BroadcastMessage::indiv(RequestKind::Reduce, 0.3, 1.5).is_err());
        assert!(BroadcastMessage::indiv(RequestKind::Reduce, -0.3, 1.0).is_err());
        assert!(BroadcastMessage::new(RequestKind::Reduce, MessageScheme::Coord, 0.3, None, 1.0).is_err());
        let bad = ScheduleAnchors {
            t_tilde: 0.5,
            y1: 0.1,
            y2: 1.0,
        };
        assert!(BroadcastMessage::new(RequestKind::Reduce, MessageScheme::Coord, 0.3, Some(bad), 1.0).is_err());
    }

    #[test]
    fn message_record_format() {
        let s = coord_schedule(&set_a(), 0.8).unwrap();
        let m = BroadcastMessage::coord(RequestKind::Reduce, &s, 0.5).unwrap();
        let json = serde_json::to_value(m).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        for k in [
            "kind",
            "scheme",
            "threshold_hours",
            "participation",
            "t_tilde",
            "y1",
            "y2",
        ] {
            assert!(keys.contains(&k.to_string()), "missing {k}");
        }
        let back: BroadcastMessage = serde_json::from_value(json).unwrap();
        assert_eq!(back, m);
        let partial = r#"{"kind":"reduce","scheme":"coord","threshold_hours":0.8,"participation":1,"y1":0.8}"#;
        assert!(serde_json::from_str::<BroadcastMessage>(partial).is_err());
        let unknown = r#"{"kind":"reduce","scheme":"indiv","threshold_hours":0.8,"participation":1,"v":2}"#;
        assert!(serde_json::from_str::<BroadcastMessage>(unknown).is_err());
    }

    #[test]
    fn draws_are_deterministic_and_uniform() {
        assert_eq!(participation_draw(42, 0), participation_draw(42, 0));
        assert_ne!(participation_draw(42, 0), participation_draw(43, 0));
        let n = 100_000u64;
        let mean = (0..n).map(|i| participation_draw(42, i)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
        assert!((0..1000).all(|i| (0.0..1.0).contains(&participation_draw(7, i))));
    }

    #[test]
    fn indiv_acting_share_matches_survival() {
        let p = set_a();
        let cycle = 3.5;
        let n = 20_000;
        let m = BroadcastMessage::indiv(RequestKind::Reduce, 0.35, 1.0).unwrap();
        let acting = (0..n)
            .filter(|&i| {
                let y = CyclePhase::new((i as f64 + 0.5) * cycle / n as f64, &p).unwrap();
                interpret(&m, &p, y, 0.0).unwrap() == ApplianceAction::OffNow
            })
            .count();
        let expected = survival(&p, 0.35).unwrap() * n as f64;
        assert!((acting as f64 - expected).abs() <= 1.0, "{acting} vs {expected}");
    }
}
