use std::fmt;

use tclflex::scenario::ScenarioRun;

/// Six significant digits, without trailing zeros.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    // avoid printing "-0"
    let rounded = rounded + 0.0;
    if rounded != 0.0 && !(1e-4..1e15).contains(&rounded.abs()) {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}

/// `key=value` lines, optionally namespaced by a class name.
#[derive(Default)]
pub struct KeyValues {
    lines: Vec<String>,
    prefix: Option<String>,
}

impl KeyValues {
    pub fn prefix(&mut self, enabled: bool, name: &str) {
        self.prefix = enabled.then(|| name.to_owned());
    }

    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        let line = match &self.prefix {
            Some(p) => format!("{p}.{key}={value}"),
            None => format!("{key}={value}"),
        };
        self.lines.push(line);
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.push(key, sig6(value));
    }
}

impl fmt::Display for KeyValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

pub fn push_report(kv: &mut KeyValues, run: &ScenarioRun) {
    let r = &run.report;
    kv.num("window_hours", r.window_hours);
    kv.num("promised_watts", r.promised_watts);
    kv.num("avg_reduction_watts", r.avg_reduction_watts);
    kv.num("sup_deviation_watts", r.sup_deviation_watts);
    kv.num("max_shortfall_watts", r.max_shortfall_watts);
    kv.num("max_excess_watts", r.max_excess_watts);
    kv.num("rebound_peak_watts", r.rebound_peak_watts);
    kv.num("rebound_energy_watt_hours", r.rebound_energy_watt_hours);
    kv.push("temp_violations", r.temp_violations);
    kv.push("over_delivery", r.over_delivery);
    kv.push("acting", run.acting);
    kv.push("noop_forced", run.noop_forced);
    kv.push("max_temp_excursion", format!("{:e}", run.max_temp_excursion));
}
