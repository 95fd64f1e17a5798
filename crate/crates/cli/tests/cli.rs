use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eventstudy"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_event")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn study_fixture(out_dir: &Path) -> Output {
    run(bin()
        .current_dir(fixture())
        .args(["study", "--data-dir", ".", "--events", "events.csv", "--fixed-clock", "--out"])
        .arg(out_dir))
}

#[test]
fn help_lists_subcommands_and_flags() {
    let out = run(bin().arg("--help"));
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for word in ["study", "simulate", "power", "EVENTSTUDY_THREADS"] {
        assert!(text.contains(word), "missing {word}");
    }
    let out = run(bin().args(["study", "--help"]));
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--data-dir", "--events", "--out", "--alpha", "--min-run", "--strict-day0", "--fixed-clock"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(bin().args(["study", "--no-such-flag"]));
    assert_eq!(code(&out), 1);
    let out = run(&mut bin());
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_inputs_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args(["study", "--data-dir"])
        .arg(tmp.path().join("absent"))
        .arg("--events")
        .arg(fixture().join("events.csv"))
        .arg("--out")
        .arg(tmp.path().join("out")));
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("does not exist"));

    let out = run(bin().args(["study", "--data-dir", "."]));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--events"));
}

#[test]
fn invalid_alpha_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin()
        .current_dir(fixture())
        .args(["study", "--data-dir", ".", "--events", "events.csv", "--alpha", "1.5", "--out"])
        .arg(tmp.path()));
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn malformed_events_file_is_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let events = tmp.path().join("events.csv");
    fs::write(&events, "ticker,date\nS001,2015-05-11\n").unwrap();
    let out = run(bin()
        .args(["study", "--data-dir"])
        .arg(fixture())
        .arg("--events")
        .arg(&events)
        .arg("--out")
        .arg(tmp.path().join("out")));
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn too_few_usable_events_is_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let events = tmp.path().join("events.csv");
    fs::write(
        &events,
        "security_id,market_id,announcement_date,label\nS001,MKT,2015-05-11,a\nS404,MKT,2015-05-11,b\n",
    )
    .unwrap();
    let out = run(bin()
        .args(["study", "--data-dir"])
        .arg(fixture())
        .arg("--events")
        .arg(&events)
        .arg("--out")
        .arg(tmp.path().join("out")));
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn study_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = study_fixture(tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["report.json", "day_stats.csv", "aar.csv", "caar.csv"] {
        assert!(tmp.path().join(name).is_file(), "missing {name}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("decision: "));
    let aar = fs::read_to_string(tmp.path().join("aar.csv")).unwrap();
    assert_eq!(aar.lines().count(), 42);
    assert_eq!(aar.lines().nth(1).unwrap().split(',').next(), Some("-30"));
}

#[test]
fn output_matches_golden_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = study_fixture(tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["report.json", "day_stats.csv"] {
        let got = fs::read(tmp.path().join(name)).unwrap();
        let want = fs::read(fixture().join("expected").join(name)).unwrap();
        assert!(got == want, "{name} differs from golden copy");
    }
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("study.toml");
    fs::write(
        &cfg,
        format!(
            "data_dir = {:?}\nevents = {:?}\nout = {:?}\nalpha = 0.10\nmin_run = 2\nfixed_clock = true\n",
            fixture().display().to_string(),
            fixture().join("events.csv").display().to_string(),
            tmp.path().join("from_file").display().to_string(),
        ),
    )
    .unwrap();

    let out = run(bin().args(["study", "--config"]).arg(&cfg));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = fs::read_to_string(tmp.path().join("from_file/report.json")).unwrap();
    assert!(report.contains("\"alpha_level\": 0.1"));
    assert!(report.contains("\"min_run\": 2"));
    assert!(report.contains("1970-01-01T00:00:00Z"));

    let out = run(bin()
        .args(["study", "--config"])
        .arg(&cfg)
        .args(["--alpha", "0.01", "--out"])
        .arg(tmp.path().join("flag")));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = fs::read_to_string(tmp.path().join("flag/report.json")).unwrap();
    assert!(report.contains("\"alpha_level\": 0.01"));
    assert!(report.contains("\"min_run\": 2"));
}

#[test]
fn unknown_config_key_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("study.toml");
    fs::write(&cfg, "alpah = 0.05\n").unwrap();
    let out = run(bin().args(["study", "--config"]).arg(&cfg));
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(bin()
            .args(["simulate", "--seed", "7", "--events", "5", "--leak-drift", "0.004", "--out"])
            .arg(dir));
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 8, "{names:?}");
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn simulated_strong_leakage_is_detected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = run(bin()
        .args(["simulate", "--seed", "3", "--events", "40", "--leak-drift", "0.02", "--out"])
        .arg(&data));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(bin()
        .args(["study", "--fixed-clock", "--data-dir"])
        .arg(&data)
        .arg("--events")
        .arg(data.join("events.csv"))
        .arg("--out")
        .arg(tmp.path().join("report")));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = fs::read_to_string(tmp.path().join("report/report.json")).unwrap();
    assert!(report.contains("\"hypothesis_decision\": \"reject_H0\""));
    assert!(report.contains("\"n_events_used\": 40"));
}

#[test]
fn power_writes_grid_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("power.csv");
    let out = run(bin()
        .args(["power", "--drifts", "0,0.03", "--events", "10,20", "--replications", "5", "--seed", "1", "--out"])
        .arg(&csv));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "daily_drift,n_events,replications,rejections,rejection_rate");
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("0.03,10,5,"));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let dir = tmp.path().join(threads);
        let out = run(bin()
            .env("EVENTSTUDY_THREADS", threads)
            .current_dir(fixture())
            .args(["study", "--data-dir", ".", "--events", "events.csv", "--fixed-clock", "--out"])
            .arg(&dir));
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        reports.push(fs::read(dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn bad_thread_count_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin()
        .env("EVENTSTUDY_THREADS", "zero")
        .current_dir(fixture())
        .args(["study", "--data-dir", ".", "--events", "events.csv", "--out"])
        .arg(tmp.path()));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("EVENTSTUDY_THREADS"));
}
