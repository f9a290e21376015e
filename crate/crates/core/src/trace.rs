//! Piecewise-constant power traces.
//!
//! A trace is an ordered list of `(time_hours, power_watts)` breakpoints on
//! `[0, horizon)`. The power of a breakpoint holds until the next breakpoint
//! (or the horizon).

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerTrace {
    breakpoints: Vec<(f64, f64)>,
    horizon: f64,
}

impl PowerTrace {
    pub fn new(breakpoints: Vec<(f64, f64)>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::TraceMismatch(format!("horizon must be positive, got {horizon}")));
        }
        match breakpoints.first() {
            Some(&(0.0, _)) => {}
            _ => return Err(Error::TraceMismatch("trace must start at time 0".into())),
        }
        for pair in breakpoints.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::TraceMismatch(format!(
                    "breakpoint times must be strictly increasing ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if let Some(&(t, _)) = breakpoints.last() {
            if t >= horizon {
                return Err(Error::TraceMismatch(format!(
                    "breakpoint at {t} beyond horizon {horizon}"
                )));
            }
        }
        if breakpoints.iter().any(|(_, p)| !p.is_finite()) {
            return Err(Error::TraceMismatch("non-finite power value".into()));
        }
        Ok(Self { breakpoints, horizon })
    }

    pub fn constant(power: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![(0.0, power)], horizon)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// `(start, end, power)` for every constant piece.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints.iter().enumerate().map(move |(i, &(t, p))| {
            let end = self.breakpoints.get(i + 1).map_or(self.horizon, |b| b.0);
            (t, end, p)
        })
    }

    /// Power at `t`; right-continuous. Times past the horizon read the last value.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&(bt, _)| bt <= t);
        self.breakpoints[idx.saturating_sub(1)].1
    }

    /// Energy over `[a, b]` in watt-hours, clipped to `[0, horizon]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.min(self.horizon));
        if b <= a {
            return 0.0;
        }
        self.segments()
            .map(|(s, e, p)| {
                let len = e.min(b) - s.max(a);
                if len > 0.0 {
                    p * len
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn mean(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = (a.max(0.0), b.min(self.horizon));
        if hi <= lo {
            return self.value_at(lo);
        }
        self.integral(lo, hi) / (hi - lo)
    }

    /// Values of the pieces that intersect `[a, b)`.
    pub fn values_in(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.segments()
            .filter(move |&(s, e, _)| s < b && e > a)
            .map(|(_, _, p)| p)
    }

    /// `(min, max)` over the pieces intersecting `[a, b)`.
    pub fn range_in(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        self.values_in(a, b).fold(None, |acc, p| match acc {
            None => Some((p, p)),
            Some((lo, hi)) => Some((lo.min(p), hi.max(p))),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PowerTrace {
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(self.breakpoints.len());
        for &(t, p) in &self.breakpoints {
            push_merged(&mut out, t, f(p));
        }
        PowerTrace {
            breakpoints: out,
            horizon: self.horizon,
        }
    }

    /// Pointwise combination over the union of both breakpoint sets.
    pub fn zip_with(&self, other: &PowerTrace, f: impl Fn(f64, f64) -> f64) -> Result<PowerTrace> {
        if self.horizon != other.horizon {
            return Err(Error::TraceMismatch(format!(
                "horizons differ: {} vs {}",
                self.horizon, other.horizon
            )));
        }
        let (a, b) = (&self.breakpoints, &other.breakpoints);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        let (mut va, mut vb) = (a[0].1, b[0].1);
        while i < a.len() || j < b.len() {
            let ta = a.get(i).map_or(f64::INFINITY, |x| x.0);
            let tb = b.get(j).map_or(f64::INFINITY, |x| x.0);
            let t = ta.min(tb);
            if ta == t {
                va = a[i].1;
                i += 1;
            }
            if tb == t {
                vb = b[j].1;
                j += 1;
            }
            push_merged(&mut out, t, f(va, vb));
        }
        Ok(PowerTrace {
            breakpoints: out,
            horizon: self.horizon,
        })
    }

    /// CSV with header `time_hours,power_watts`, full double precision.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time_hours", "power_watts"])?;
        for &(t, p) in &self.breakpoints {
            w.write_record([t.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, horizon: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["time_hours", "power_watts"] {
            return Err(Error::TraceMismatch(format!("unexpected CSV header {headers:?}")));
        }
        let mut breakpoints = Vec::new();
        for record in r.deserialize() {
            let (t, p): (f64, f64) = record?;
            breakpoints.push((t, p));
        }
        Self::new(breakpoints, horizon)
    }
}

fn push_merged(out: &mut Vec<(f64, f64)>, t: f64, p: f64) {
    match out.last() {
        Some(&(_, last)) if last == p => {}
        _ => out.push((t, p)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PowerTrace {
        PowerTrace::new(vec![(0.0, 2.0), (1.0, 5.0), (2.5, 1.0)], 4.0).unwrap()
    }

    #[test]
    fn validation() {
        assert!(PowerTrace::new(vec![], 1.0).is_err());
        assert!(PowerTrace::new(vec![(0.5, 1.0)], 1.0).is_err());
        assert!(PowerTrace::new(vec![(0.0, 1.0), (0.0, 2.0)], 1.0).is_err());
        assert!(PowerTrace::new(vec![(0.0, 1.0), (1.0, 2.0)], 1.0).is_err());
        assert!(PowerTrace::new(vec![(0.0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn step_semantics() {
        let tr = sample();
        assert_eq!(tr.value_at(0.0), 2.0);
        assert_eq!(tr.value_at(0.999), 2.0);
        assert_eq!(tr.value_at(1.0), 5.0);
        assert_eq!(tr.value_at(3.9), 1.0);
    }

    #[test]
    fn integral_and_mean() {
        let tr = sample();
        assert!((tr.integral(0.0, 4.0) - (2.0 + 7.5 + 1.5)).abs() < 1e-12);
        assert!((tr.integral(0.5, 1.5) - (1.0 + 2.5)).abs() < 1e-12);
        assert!((tr.mean(0.0, 1.0) - 2.0).abs() < 1e-12);
        assert_eq!(tr.integral(2.0, 1.0), 0.0);
    }

    #[test]
    fn range_in_window() {
        let tr = sample();
        assert_eq!(tr.range_in(0.0, 1.0), Some((2.0, 2.0)));
        assert_eq!(tr.range_in(0.0, 1.0001), Some((2.0, 5.0)));
        assert_eq!(tr.range_in(2.0, 4.0), Some((1.0, 5.0)));
    }

    #[test]
    fn zip_difference() {
        let tr = sample();
        let other = PowerTrace::new(vec![(0.0, 1.0), (2.0, 3.0)], 4.0).unwrap();
        let d = tr.zip_with(&other, |a, b| a - b).unwrap();
        assert_eq!(d.breakpoints(), &[(0.0, 1.0), (1.0, 4.0), (2.0, 2.0), (2.5, -2.0)]);
        let zero = tr.zip_with(&tr, |a, b| a - b).unwrap();
        assert_eq!(zero.breakpoints(), &[(0.0, 0.0)]);
        let short = PowerTrace::constant(1.0, 3.0).unwrap();
        assert!(tr.zip_with(&short, |a, b| a - b).is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let tr = PowerTrace::new(vec![(0.0, 1000.0), (0.1 + 0.2, 1.0 / 3.0)], 1.0).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_hours,power_watts\n"));
        let back = PowerTrace::read_csv(buf.as_slice(), 1.0).unwrap();
        assert_eq!(back, tr);
        assert!(PowerTrace::read_csv("t,p\n0,1\n".as_bytes(), 1.0).is_err());
    }
}
