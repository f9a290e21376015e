use std::path::PathBuf;
use std::process::{Command, Output};

const SET_A: [&str; 10] = ["--delta", "1", "--v", "0.4", "--w", "1", "--p", "1", "--n", "1400"];
const SET_B: [&str; 10] = ["--delta", "1", "--v", "2", "--w", "1", "--p", "1", "--n", "3000"];

fn tclflex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tclflex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(cmd: &str, base: &[&str], extra: &[&str]) -> Output {
    let mut args = vec![cmd.to_string()];
    args.extend(with(base, extra));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    tclflex(&refs)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(o: &Output, key: &str) -> f64 {
    let text = stdout(o);
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in:\n{text}"));
    line.parse().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tclflex-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn analytic_quotes() {
    let o = run("analytic", &SET_A, &["--t", "0.35", "--scheme", "indiv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "fraction 0.51, 510 W");

    let o = run("analytic", &SET_A, &["--t", "0", "--scheme", "indiv"]);
    assert!(stdout(&o).starts_with("fraction 1,"));

    let o = run("analytic", &SET_A, &["--t", "1.3", "--scheme", "coord"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible duration"));
}

#[test]
fn invalid_parameters_exit_2() {
    let o = tclflex(&[
        "analytic", "--delta", "1", "--v", "-1", "--w", "1", "--p", "1", "--n", "5", "--t", "0.1", "--scheme", "indiv",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = tclflex(&["analytic", "--t", "0.1", "--scheme", "indiv"]);
    assert_eq!(o.status.code(), Some(2));
}

fn sweep_rows(args: &[&str]) -> Vec<Vec<String>> {
    let o = tclflex(args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_hours,upper,indiv,coord"));
    lines.map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn sweep_reference_rows() {
    let rows = sweep_rows(&[
        "sweep",
        "--delta",
        "1",
        "--v",
        "0.4",
        "--w",
        "1",
        "--times",
        "1,0.714286",
    ]);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.5);
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), 0.0);

    let rows = sweep_rows(&[
        "sweep",
        "--delta",
        "1",
        "--v",
        "2",
        "--w",
        "1",
        "--times",
        "0.444444,0.5",
    ]);
    let coord: f64 = rows[0][3].parse().unwrap();
    assert!((coord - 2.0 / 3.0).abs() < 1e-5);
    assert_eq!(rows[1][3], "", "coord is empty past its maximum duration");
}

#[test]
fn sweep_rows_are_ordered() {
    for (v, w) in [("0.4", "1"), ("2", "1"), ("1", "3")] {
        let rows = sweep_rows(&["sweep", "--delta", "1", "--v", v, "--w", w, "--steps", "40"]);
        assert_eq!(rows.len(), 41);
        for row in rows {
            let upper: f64 = row[1].parse().unwrap();
            let indiv: f64 = row[2].parse().unwrap();
            assert!(indiv <= upper + 1e-12);
            if !row[3].is_empty() {
                let coord: f64 = row[3].parse().unwrap();
                assert!(indiv <= coord + 1e-12 && coord <= upper + 1e-12, "{row:?}");
            }
        }
    }
}

#[test]
fn plan_examples() {
    let o = run(
        "plan",
        &SET_A,
        &[
            "--t",
            "0.35",
            "--amplitude",
            "300",
            "--mode",
            "longest",
            "--scheme",
            "indiv",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "threshold_hours"), 0.5);
    assert_eq!(value(&o, "participation"), 1.0);

    let o = run("plan", &SET_A, &["--t", "0.35", "--amplitude", "max"]);
    assert_eq!(value(&o, "threshold_hours"), 0.35);
    assert_eq!(value(&o, "participation"), 1.0);

    let o = run("plan", &SET_A, &["--t", "0.35", "--amplitude", "2000"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn emitted_scenario_reproduces_the_plan() {
    let path = scratch("emitted.json");
    let path_s = path.to_str().unwrap();
    let direct = run(
        "plan",
        &SET_B,
        &[
            "--t",
            "0.3",
            "--amplitude",
            "250",
            "--scheme",
            "coord",
            "--emit-scenario",
            path_s,
        ],
    );
    assert_eq!(direct.status.code(), Some(0));
    let replay = tclflex(&["plan", "--scenario", path_s]);
    assert_eq!(replay.status.code(), Some(0));
    assert_eq!(stdout(&direct), stdout(&replay));
}

#[test]
fn simulate_reports() {
    let out = scratch("indiv.csv");
    let base = scratch("indiv-baseline.csv");
    let o = run(
        "simulate",
        &SET_A,
        &[
            "--t",
            "0.35",
            "--scheme",
            "indiv",
            "--horizon",
            "4",
            "--out",
            out.to_str().unwrap(),
            "--baseline-out",
            base.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!((value(&o, "avg_reduction_watts") - 510.0).abs() <= 2.0);
    assert_eq!(value(&o, "temp_violations"), 0.0);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("time_hours,power_watts\n0,490\n"));
    assert!(std::fs::read_to_string(&base)
        .unwrap()
        .starts_with("time_hours,power_watts\n"));

    let o = run("simulate", &SET_A, &["--horizon", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(value(&o, "avg_reduction_watts").abs() < 1e-9);

    let o = run("simulate", &SET_B, &["--t", "0.4", "--scheme", "coord"]);
    assert!(value(&o, "sup_deviation_watts") <= 2.0);
}

#[test]
fn simulate_is_deterministic() {
    let paths = [scratch("det-1.csv"), scratch("det-2.csv")];
    for p in &paths {
        let o = run(
            "simulate",
            &SET_A,
            &[
                "--t",
                "0.5",
                "--amplitude",
                "200",
                "--sampling",
                "uniform-random",
                "--seed",
                "11",
                "--out",
                p.to_str().unwrap(),
            ],
        );
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
}

#[test]
fn io_failures_exit_3() {
    let o = run(
        "simulate",
        &SET_A,
        &["--t", "0.35", "--out", "/nonexistent-dir/trace.csv"],
    );
    assert_eq!(o.status.code(), Some(3));
    let o = tclflex(&["verify", "--scenario", "/nonexistent-dir/scenario.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_outcomes() {
    let o = run(
        "verify",
        &SET_A,
        &["--t", "0.35", "--scheme", "indiv", "--tolerance", "5"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let o = run(
        "verify",
        &SET_A,
        &["--t", "1.0", "--scheme", "coord", "--tolerance", "5"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("over_delivery=true"));

    let bad = scratch("corrupt.json");
    std::fs::write(&bad, "{\"classes\": [").unwrap();
    let o = tclflex(&["verify", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let unknown = scratch("unknown-field.json");
    std::fs::write(&unknown, r#"{"classes": [], "horizon_hours": 2, "colour": "blue"}"#).unwrap();
    let o = tclflex(&["verify", "--scenario", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
