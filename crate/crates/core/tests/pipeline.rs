use std::collections::BTreeSet;
use std::fs;

use eventstudy::event_study::{aar, caar};
use eventstudy::report::{emit_report, read_report, run_study, StudyConfig, StudyError};
use eventstudy::synthetic::{replicate, simulate_panel, LeakageProfile, SimConfig};
use eventstudy::{
    align_event, build_panel, AlignOptions, Decision, DecisionPolicy, WindowConfig,
};

fn write_sim(cfg: &SimConfig) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    simulate_panel(cfg).unwrap().write_to(dir.path()).unwrap();
    dir
}

fn study_cfg(dir: &std::path::Path) -> StudyConfig {
    StudyConfig {
        fixed_clock: true,
        ..StudyConfig::new(dir, dir.join("events.csv"))
    }
}

#[test]
fn noiseless_market_gives_zero_abnormal_returns() {
    let cfg = SimConfig {
        n_events: 5,
        seed: 3,
        idio_vol: 1e-14,
        ..SimConfig::default()
    };
    let dir = write_sim(&cfg);
    let report = run_study(&study_cfg(dir.path())).unwrap();
    assert_eq!(report.n_events_used, 5);
    assert!(report.day_stats.iter().all(|d| d.aar.abs() < 1e-8));
    assert!(report.day_stats.iter().all(|d| d.caar.abs() < 1e-8));
}

#[test]
fn panel_has_forty_by_forty_one_cells() {
    let sim = simulate_panel(&SimConfig {
        seed: 5,
        ..SimConfig::default()
    })
    .unwrap();
    let w = WindowConfig::default();
    let aligned: Vec<_> = sim
        .events
        .iter()
        .zip(&sim.stocks)
        .map(|(e, s)| align_event(e, s, &sim.market, &w, AlignOptions::default()).unwrap())
        .collect();
    let built = build_panel(&aligned, &w).unwrap();
    assert_eq!(built.panel.n_events(), 40);
    assert_eq!(built.panel.event_days().len(), 41);
    assert!(built.panel.rows().iter().all(|r| r.abnormal.len() == 41));
}

#[test]
fn ground_truth_parameters_are_recovered() {
    let cfg = SimConfig {
        seed: 17,
        idio_vol: 1e-6,
        true_alpha: 0.0003,
        true_beta_range: (0.2, 3.5),
        ..SimConfig::default()
    };
    let dir = write_sim(&cfg);
    let report = run_study(&study_cfg(dir.path())).unwrap();
    let truth = simulate_panel(&cfg).unwrap().truth;
    for (fit, t) in report.events.iter().zip(&truth.events) {
        assert_eq!(fit.security_id, t.security_id);
        assert!((fit.fit.alpha - t.alpha).abs() < 1e-4);
        assert!((fit.fit.beta - t.beta).abs() < 1e-4);
    }
}

#[test]
fn leakage_does_not_touch_estimation_fits() {
    let base = SimConfig {
        seed: 23,
        ..SimConfig::default()
    };
    let leaky = SimConfig {
        leakage: Some(LeakageProfile {
            onset_day: -16,
            daily_drift: 0.01,
            announcement_jump: 0.05,
        }),
        ..base.clone()
    };
    let a = run_study(&study_cfg(write_sim(&base).path())).unwrap();
    let b = run_study(&study_cfg(write_sim(&leaky).path())).unwrap();
    for (x, y) in a.events.iter().zip(&b.events) {
        assert_eq!(x.fit, y.fit);
    }
    // Only the leakage days move.
    for (x, y) in a.day_stats.iter().zip(&b.day_stats) {
        let shift = y.aar - x.aar;
        let expected = match x.event_day {
            -16..=-1 => 0.01,
            0 => 0.05,
            _ => 0.0,
        };
        assert!((shift - expected).abs() < 1e-9, "day {}: {shift}", x.event_day);
    }
}

#[test]
fn caar_before_announcement_converges_to_injected_drift() {
    // Expected CAAR(-1) = 16 * 0.004 = 0.064. The AR noise has sd ~0.02 per
    // event-day, so the mean over R replications of 40 events has sd
    // 0.02 * sqrt(30) / sqrt(40 R); with R = 100 that is ~0.0017.
    let cfg = SimConfig {
        seed: 41,
        leakage: Some(LeakageProfile {
            onset_day: -16,
            daily_drift: 0.004,
            announcement_jump: 0.0,
        }),
        ..SimConfig::default()
    };
    let results = replicate(&cfg, 100, 0.05, &DecisionPolicy::default()).unwrap();
    let mean: f64 = results
        .iter()
        .map(|r| r.stats.iter().find(|s| s.event_day == -1).unwrap().caar)
        .sum::<f64>()
        / results.len() as f64;
    assert!((mean - 0.064).abs() < 4.0 * 0.0017, "{mean}");
}

#[test]
fn replication_results_do_not_depend_on_thread_count() {
    let cfg = SimConfig {
        n_events: 12,
        seed: 8,
        ..SimConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| replicate(&cfg, 16, 0.05, &DecisionPolicy::default()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn emitted_files_are_consistent() {
    let dir = write_sim(&SimConfig {
        n_events: 10,
        seed: 12,
        ..SimConfig::default()
    });
    let report = run_study(&study_cfg(dir.path())).unwrap();
    let out = tempfile::tempdir().unwrap();
    emit_report(&report, out.path()).unwrap();

    let day_stats = fs::read_to_string(out.path().join("day_stats.csv")).unwrap();
    assert_eq!(day_stats.lines().count(), 1 + 41);
    assert!(day_stats.starts_with("event_day,aar,sigma,n,t_stat,p_value,significant,caar\n"));

    let caar_csv = fs::read_to_string(out.path().join("caar.csv")).unwrap();
    let last: f64 = caar_csv.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(last, report.day_stats.last().unwrap().caar);
    let aar_csv = fs::read_to_string(out.path().join("aar.csv")).unwrap();
    assert_eq!(aar_csv.lines().count(), 42);

    // report.json -> Report -> report.json is byte-identical
    let first = fs::read(out.path().join("report.json")).unwrap();
    let parsed = read_report(&out.path().join("report.json")).unwrap();
    assert_eq!(parsed, report);
    let again = tempfile::tempdir().unwrap();
    emit_report(&parsed, again.path()).unwrap();
    for name in ["report.json", "day_stats.csv", "aar.csv", "caar.csv"] {
        assert_eq!(
            fs::read(out.path().join(name)).unwrap(),
            fs::read(again.path().join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(fs::read(again.path().join("report.json")).unwrap(), first);
}

#[test]
fn every_event_is_used_or_excluded_once() {
    let dir = write_sim(&SimConfig {
        n_events: 6,
        seed: 30,
        ..SimConfig::default()
    });
    let p = dir.path();
    // S002: missing file; S003: truncated history; S004: flat market proxy.
    fs::remove_file(p.join("S002.csv")).unwrap();
    let s3 = fs::read_to_string(p.join("S003.csv")).unwrap();
    let tail: Vec<&str> = s3.lines().skip(80).collect();
    fs::write(p.join("S003.csv"), format!("date,adj_close\n{}\n", tail.join("\n"))).unwrap();
    let mut flat = String::from("date,adj_close\n");
    for line in fs::read_to_string(p.join("MKT.csv")).unwrap().lines().skip(1) {
        flat.push_str(&format!("{},100\n", line.split(',').next().unwrap()));
    }
    fs::write(p.join("FLAT.csv"), flat).unwrap();
    let events = fs::read_to_string(p.join("events.csv"))
        .unwrap()
        .replace("S004,MKT", "S004,FLAT");
    fs::write(p.join("events.csv"), events).unwrap();

    let report = run_study(&study_cfg(p)).unwrap();
    assert_eq!(report.n_events_input, 6);
    assert_eq!(report.n_events_used, 3);
    let reasons: Vec<(&str, &str)> = report
        .excluded
        .iter()
        .map(|e| (e.security_id.as_str(), e.reason.as_str()))
        .collect();
    assert_eq!(
        reasons,
        [("S002", "Io"), ("S003", "InsufficientHistory"), ("S004", "DegenerateRegressor")]
    );
    let used: BTreeSet<&str> = report.events.iter().map(|e| e.security_id.as_str()).collect();
    let dropped: BTreeSet<&str> = report.excluded.iter().map(|e| e.security_id.as_str()).collect();
    assert!(used.is_disjoint(&dropped));
    assert_eq!(used.len() + dropped.len(), 6);
}

#[test]
fn fewer_than_two_usable_events_is_an_error() {
    let dir = write_sim(&SimConfig {
        n_events: 2,
        seed: 2,
        ..SimConfig::default()
    });
    fs::remove_file(dir.path().join("S001.csv")).unwrap();
    match run_study(&study_cfg(dir.path())) {
        Err(StudyError::NoUsableEvents { usable: 1, excluded: 1 }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn gaps_are_flagged_and_statistics_stay_defined() {
    let dir = write_sim(&SimConfig {
        n_events: 8,
        seed: 4,
        ..SimConfig::default()
    });
    // Drop event-day -5 (row index 85) from the first stock.
    let path = dir.path().join("S001.csv");
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .enumerate()
        .filter(|(i, _)| *i != 1 + 85)
        .map(|(_, l)| l)
        .collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();

    let report = run_study(&study_cfg(dir.path())).unwrap();
    assert_eq!(report.events[0].gaps, vec![-5, -4]);
    let day = |d: i32| report.day_stats.iter().find(|s| s.event_day == d).unwrap();
    assert_eq!(day(-5).n, 7);
    assert_eq!(day(-6).n, 8);
}

#[test]
fn strict_mode_rejects_non_trading_announcement() {
    let dir = write_sim(&SimConfig {
        n_events: 3,
        seed: 9,
        ..SimConfig::default()
    });
    let path = dir.path().join("events.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // Move the first announcement onto the preceding Sunday.
    let fields: Vec<&str> = lines[1].split(',').collect();
    let date = chrono::NaiveDate::parse_from_str(fields[2], "%Y-%m-%d").unwrap();
    let sunday = date - chrono::Duration::days(chrono::Datelike::weekday(&date).num_days_from_sunday() as i64);
    lines[1] = format!("{},{},{},{}", fields[0], fields[1], sunday, fields[3]);
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let lenient = run_study(&study_cfg(dir.path())).unwrap();
    assert_eq!(lenient.n_events_used, 3);

    let strict = run_study(&StudyConfig {
        strict_day0: true,
        ..study_cfg(dir.path())
    })
    .unwrap();
    assert_eq!(strict.n_events_used, 2);
    assert_eq!(strict.excluded[0].reason, "AnnouncementNotTradingDay");
}

#[test]
fn complete_panels_keep_caar_equal_to_summed_aar() {
    for seed in 0..5 {
        let sim = simulate_panel(&SimConfig {
            seed,
            n_events: 15,
            ..SimConfig::default()
        })
        .unwrap();
        let w = WindowConfig::default();
        let aligned: Vec<_> = sim
            .events
            .iter()
            .zip(&sim.stocks)
            .map(|(e, s)| align_event(e, s, &sim.market, &w, AlignOptions::default()).unwrap())
            .collect();
        let panel = build_panel(&aligned, &w).unwrap().panel;
        let mut running = 0.0;
        for d in w.event_days() {
            running += aar(&panel, d).unwrap().0;
            assert!((caar(&panel, d).unwrap() - running).abs() < 1e-12);
        }
    }
}

#[test]
fn strong_leakage_is_detected() {
    let dir = write_sim(&SimConfig {
        seed: 7,
        leakage: Some(LeakageProfile {
            onset_day: -16,
            daily_drift: 0.02,
            announcement_jump: 0.0,
        }),
        ..SimConfig::default()
    });
    let report = run_study(&study_cfg(dir.path())).unwrap();
    assert_eq!(report.hypothesis_decision, Decision::RejectH0);
}
