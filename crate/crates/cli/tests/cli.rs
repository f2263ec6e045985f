use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tubechan(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tubechan"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("TUBECHAN_OUT")
        .output()
        .expect("spawn")
}

const QUICK: [&str; 6] = [
    "--realizations",
    "3",
    "--set",
    "duration_s=0.2",
    "--set",
    "si_window_ms=0.1",
];

#[test]
fn help_exits_zero() {
    let out = Command::new(env!("CARGO_BIN_EXE_tubechan")).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["run", "stats", "compare", "sweep"] {
        assert!(text.contains(cmd), "{text}");
    }
}

#[test]
fn unknown_preset_exits_one_and_lists_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = tubechan(&["run", "--preset", "maglev"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for p in ["tube", "tunnel", "open-hst-approx"] {
        assert!(err.contains(p), "{err}");
    }
}

#[test]
fn bad_arguments_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tubechan(&["run"], dir.path()).status.code(), Some(1));
    assert_eq!(tubechan(&["run", "--preset", "tube", "--set", "nope=1"], dir.path()).status.code(), Some(1));
    assert_eq!(tubechan(&["frobnicate"], dir.path()).status.code(), Some(1));
    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "preset = tube\nmotion.v_kmh = 1\nwhat\n").unwrap();
    let out = tubechan(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let mut args = vec!["run", "--preset", "tube"];
    args.extend(QUICK);
    let out = tubechan(&args, &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn override_appears_in_footer() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["stats", "--preset", "tube", "--set", "v_kmh=2160"];
    args.extend(QUICK);
    let out = tubechan(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let acf = fs::read_to_string(dir.path().join("acf.csv")).unwrap();
    let footer = acf.lines().last().unwrap();
    assert!(footer.starts_with("# seed="));
    assert!(footer.contains("motion.v_kmh=2160"), "{footer}");
    assert!(fs::read_to_string(dir.path().join("config.txt")).unwrap().contains("motion.v_kmh = 2160"));
}

#[test]
fn config_file_is_layered_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.txt");
    fs::write(&cfg, "preset = tunnel\nrun.seed = 4\nmotion.v_kmh = 700\n").unwrap();
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--seed", "9"];
    args.extend(QUICK);
    let out_dir = dir.path().join("out");
    let out = tubechan(&args, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("config.txt")).unwrap();
    assert!(text.contains("run.seed = 9"));
    assert!(text.contains("motion.v_kmh = 700"));
    assert!(text.contains("evolution.roughness_m = 0.002"));
    assert!(out_dir.join("snapshot.json").exists());
}

#[test]
fn runs_are_reproducible_across_job_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--preset", "tube", "--seed", "7", "--instants", "0,0.1"];
    args.extend(QUICK);
    let mut one = args.clone();
    one.extend(["--jobs", "1"]);
    let mut three = args.clone();
    three.extend(["--jobs", "3"]);
    assert!(tubechan(&one, a.path()).status.success());
    assert!(tubechan(&three, b.path()).status.success());
    for name in ["clusters.csv", "snapshot_0.json", "snapshot_1.json", "config.txt"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}
