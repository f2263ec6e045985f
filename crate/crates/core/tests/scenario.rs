use std::fs;

use tubechan::scenario::commands::{self, Invocation};
use tubechan::scenario::{
    cluster_log, cluster_logs, load_config, load_config_with, streams, ConfigError, DOMAIN_PHASES, PRESETS,
};
use tubechan::stats::{self, CorrelationQuery};
use tubechan::{Error, ScenarioConfig};

fn small(out: &std::path::Path) -> Invocation {
    Invocation {
        preset: Some("tube".into()),
        realizations: Some(4),
        overrides: vec!["duration_s=0.2".into(), "si_window_ms=0.2".into()],
        out: out.to_path_buf(),
        ..Invocation::default()
    }
}

#[test]
fn unknown_key_reports_its_line() {
    let text = "preset = tube\n# comment\nmotion.v_kmh = 900\nbogus.key = 1\n";
    match load_config(text) {
        Err(ConfigError::UnknownKey { key, line }) => {
            assert_eq!(key, "bogus.key");
            assert_eq!(line, Some(4));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_line_reports_line_and_column() {
    match load_config("preset = tube\n  no equals sign\n") {
        Err(ConfigError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn overrides_apply_after_the_document() {
    let c = load_config_with(
        "preset = tube\nmotion.v_kmh = 540\n",
        None,
        &[("v_kmh".into(), "2160".into())],
    )
    .unwrap();
    assert_eq!(c.motion.v_kmh, 2160.0);
    let explicit = load_config_with("preset = tube\n", Some("tunnel"), &[]).unwrap();
    assert_eq!(explicit, ScenarioConfig::preset("tunnel").unwrap());
}

#[test]
fn missing_keys_without_preset() {
    match load_config("motion.v_kmh = 540\n") {
        Err(ConfigError::MissingKeys(keys)) => {
            assert!(!keys.is_empty());
            assert!(!keys.iter().any(|k| k == "motion.v_kmh"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn full_document_without_preset_loads() {
    for name in PRESETS {
        let c = ScenarioConfig::preset(name).unwrap();
        assert_eq!(load_config(&c.to_text()).unwrap(), c);
    }
}

#[test]
fn validation_rejects_bad_values() {
    assert!(matches!(
        load_config("preset = tube\nrun.realizations = 0\n"),
        Err(ConfigError::Validation { .. })
    ));
    assert!(matches!(
        load_config("preset = tube\nmotion.v_kmh = fast\n"),
        Err(ConfigError::BadValue { line: Some(2), .. })
    ));
    let err = ScenarioConfig::preset("maglev").unwrap_err();
    for p in PRESETS {
        assert!(err.to_string().contains(p));
    }
}

#[test]
fn logs_do_not_depend_on_thread_count() {
    let mut c = ScenarioConfig::preset("tube").unwrap();
    c.run.realizations = 8;
    c.run.duration_s = 0.5;
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| cluster_logs(&c)).unwrap();
    let b = four.install(|| cluster_logs(&c)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ensemble_does_not_depend_on_thread_count() {
    let c = ScenarioConfig::preset("tube").unwrap();
    let model = c.channel_model().unwrap();
    let r = (0..)
        .map(|i| model.realize(streams(&c).stream(i)))
        .find(|r| !r.clusters().is_empty())
        .unwrap();
    let tx = model.tx_array.element_positions[0];
    let rx = r.rx_array().element_positions[0];
    let qs: Vec<_> = (0..8).map(|k| CorrelationQuery::temporal(0.0, 0.0, k as f64 * 1e-5)).collect();
    let phases = streams(&c).with_domain(DOMAIN_PHASES);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| stats::stfcf_ensemble(&r.view(), tx, rx, &qs, 300, &phases).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn logs_land_on_the_spacing_grid() {
    let mut c = ScenarioConfig::preset("tube").unwrap();
    c.run.duration_s = 0.4;
    let model = c.channel_model().unwrap();
    let (log, snaps) = cluster_log(&c, &model, 0, true).unwrap();
    assert_eq!(snaps.len(), 1);
    assert_eq!(log.snapshots.len(), 1);
    let period = c.run.log_spacing_m / c.speed();
    assert_eq!(log.records.len(), (c.run.duration_s / period).floor() as usize + 1);
    for (k, rec) in log.records.iter().enumerate() {
        assert!((rec.time - k as f64 * period).abs() < 1e-9, "record {k}: {}", rec.time);
    }
}

#[test]
fn run_and_stats_write_footed_tables() {
    let dir = tempfile::tempdir().unwrap();
    let inv = small(dir.path());
    let loaded = inv.load().unwrap();
    commands::run(&loaded, dir.path()).unwrap();
    let summary = commands::stats(&loaded, dir.path()).unwrap();
    assert_eq!(summary.intervals.len(), 4);
    for name in ["clusters.csv", "acf.csv", "ccf.csv", "fcf.csv", "pdp.csv", "si_ccdf.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("# seed=1 config_sha256="), "{name}: {last}");
        assert!(last.ends_with("overrides=run.duration_s=0.2;stats.si_window_ms=0.2"), "{name}: {last}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("snapshot.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 1);
    assert_eq!(json["snapshot"]["entries"].as_array().unwrap().len(), 4);
    assert_eq!(
        fs::read_to_string(dir.path().join("config.txt")).unwrap(),
        loaded.config.to_text()
    );
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let inv = small(dir.path());
    commands::sweep(&inv, "v_kmh", &["540".into(), "1080".into()]).unwrap();
    for v in ["540", "1080"] {
        assert!(dir.path().join(format!("motion.v_kmh={v}")).join("acf.csv").exists());
    }
    let summary = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "value,acf_half_lag_s,si_median_s");
    assert_eq!(lines.len(), 4);
    assert!(commands::sweep(&inv, "nonsense", &["1".into()]).is_err());
}

#[test]
fn missing_preset_and_file_is_a_config_error() {
    let inv = Invocation::default();
    assert!(matches!(inv.load(), Err(Error::Config(_))));
    let bad = Invocation {
        preset: Some("tube".into()),
        overrides: vec!["v_kmh".into()],
        ..Invocation::default()
    };
    assert!(matches!(bad.load(), Err(Error::Config(_))));
}
