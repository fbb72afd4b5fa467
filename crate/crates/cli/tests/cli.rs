use std::fs;
use std::process::{Command, Output};

fn sos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sos"))
        .args(args)
        .env_remove("SOS_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows, after the config comment and the header.
fn rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: "));
    lines.next().expect("header row");
    lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn bottom_mass(text: &str) -> f64 {
    let r = rows(text);
    assert_eq!(r[0][1], "0 0");
    r[0][2].parse().unwrap()
}

#[test]
fn exact_two_sites_matches_enumeration() {
    let full = sos(&[
        "exact",
        "--n",
        "2",
        "--beta",
        &std::f64::consts::LN_2.to_string(),
    ]);
    assert!(full.status.success());
    assert!((bottom_mass(&stdout(&full)) - 16.0 / 33.0).abs() < 1e-9);
    // the six-digit beta moves the mass by about 1e-7
    let rounded = sos(&["exact", "--n", "2", "--beta", "0.693147"]);
    assert!((bottom_mass(&stdout(&rounded)) - 16.0 / 33.0).abs() < 1e-6);
}

#[test]
fn coalesce_is_deterministic_and_thread_independent() {
    let args = [
        "coalesce",
        "--kind",
        "column",
        "--n",
        "16",
        "--beta",
        "1.0",
        "--seed",
        "7",
        "--replicas",
        "4",
    ];
    let a = sos(&args);
    assert!(a.status.success());
    assert_eq!(rows(&stdout(&a)).len(), 4);
    let b = sos(&args);
    assert_eq!(a.stdout, b.stdout);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "2"]);
    assert_eq!(a.stdout, sos(&threaded).stdout);
}

#[test]
fn sweep_reports_a_slope() {
    let o = sos(&[
        "sweep",
        "--kind",
        "column",
        "--n",
        "8,16,32,64",
        "--replicas",
        "16",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let r = rows(&text);
    assert_eq!(r.len(), 4);
    let slope: f64 = r[0][5].parse().expect("slope column filled");
    assert!(slope > 2.0 && slope < 4.0, "slope {slope}");
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let o = sos(&["coalesce", "--n", "4", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn oversized_exact_is_rejected_as_config_error() {
    let o = sos(&["exact", "--n", "12"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn timeouts_exit_3_and_still_write_csv() {
    let o = sos(&["coalesce", "--n", "8", "--replicas", "2", "--t-max", "3"]);
    assert_eq!(o.status.code(), Some(3));
    let r = rows(&stdout(&o));
    assert!(r.iter().all(|row| row[5] == "true"));
}

#[test]
fn config_file_matches_flags_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        "# two-site chain\nn = 2\nbeta = 0.5\nreport = check\n",
    )
    .unwrap();
    let from_file = sos(&["exact", "--config", conf.to_str().unwrap()]);
    let from_flags = sos(&["exact", "--n", "2", "--beta", "0.5", "--report", "check"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, from_flags.stdout);
    let overridden = sos(&["exact", "--config", conf.to_str().unwrap(), "--beta", "2"]);
    assert!(stdout(&overridden).contains(" beta=2 "));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sos"))
        .args(["equilibrium", "--n", "3", "--event", "A:1,B:2"])
        .env("SOS_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(dir.path().join("equilibrium.csv")).unwrap();
    assert!(text.contains("event=A:1,B:2"));
    assert_eq!(rows(&text).len(), 2);
    let named = Command::new(env!("CARGO_BIN_EXE_sos"))
        .args(["equilibrium", "--n", "3", "--output", "sub/events.csv"])
        .env("SOS_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(named.status.success());
    assert!(dir.path().join("sub/events.csv").exists());
}

#[test]
fn every_command_writes_self_describing_csv() {
    let runs: [&[&str]; 9] = [
        &[
            "simulate",
            "--n",
            "5",
            "--steps",
            "50",
            "--statistic",
            "mean,max,distance",
        ],
        &["coalesce", "--n", "5", "--replicas", "2"],
        &["sweep", "--n", "4,6,8", "--replicas", "2"],
        &["drift-check", "--n", "4", "--pairs", "50"],
        &[
            "exact",
            "--n",
            "2",
            "--report",
            "gap",
            "--kind",
            "single-site",
        ],
        &[
            "equilibrium",
            "--n",
            "4",
            "--samples",
            "5",
            "--condition",
            "pinned:2",
        ],
        &[
            "relax",
            "--n",
            "4,6,8",
            "--replicas",
            "2",
            "--start",
            "at-least:sqrt",
        ],
        &["descent", "--n", "4"],
        &["column-walk", "--ell", "4", "--replicas", "256"],
    ];
    for args in runs {
        let a = sos(args);
        assert!(
            a.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&a.stderr)
        );
        let text = stdout(&a);
        assert!(
            text.starts_with(&format!("# config: command={}", args[0])),
            "{text}"
        );
        assert!(!rows(&text).is_empty());
        assert_eq!(a.stdout, sos(args).stdout, "{args:?} not reproducible");
    }
}

#[test]
fn bad_values_are_config_errors() {
    for args in [
        &[
            "simulate", "--n", "4", "--steps", "5", "--start", "sideways",
        ][..],
        &["equilibrium", "--n", "4", "--event", "Z:1"],
        &["exact", "--n", "2", "--report", "nothing"],
        &["coalesce", "--n", "0"],
        &["coalesce", "--n", "4", "--kind", "diagonal"],
        &["sweep", "--n", "8,4"],
    ] {
        assert_eq!(sos(args).status.code(), Some(2), "{args:?}");
    }
}
