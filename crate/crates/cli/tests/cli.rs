use std::path::Path;
use std::process::{Command, Output};

fn warnsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warnsim")).args(args).current_dir(cwd).output().expect("spawn warnsim")
}

const SMALL: &str = r#"
name = "small"
duration = 4.0
seeds = [1, 2]
densities = [50.0]
protocols = ["gpsr", "3mrp-dsw"]

[area]
width = 1700.0
height = 580.0
block_size = 170.0

[routing]
rsus = [[1700.0, 340.0]]

[warning]
origin = [0.0, 170.0]
frames = 5
"#;

#[test]
fn validate_accepts_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = warnsim(&["validate", "leganes-add"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
}

#[test]
fn validate_lists_every_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = "seeds = []\nprotocols = [\"add-vod\"]\nduration = -1.0\n[radio]\nper_link_loss = 2.0\n";
    std::fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let out = warnsim(&["validate", "bad.toml"], dir.path());
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("seeds"), "{text}");
    assert!(text.contains("duration"), "{text}");
    assert!(text.contains("per_link_loss"), "{text}");
}

#[test]
fn unknown_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = warnsim(&["run", "no-such-thing"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no such file or preset"));
}

#[test]
fn presets_listed_and_printed() {
    let dir = tempfile::tempdir().unwrap();
    let out = warnsim(&["presets"], dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["leganes-add", "timers-25", "ctd-1000", "routing-3mrp"] {
        assert!(text.contains(name));
    }
    let out = warnsim(&["presets", "timers-25"], dir.path());
    assert!(String::from_utf8_lossy(&out.stdout).contains("timer-speed"));
}

#[test]
fn run_writes_reproducible_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let a = warnsim(&["run", "small.toml", "--out", "a", "--jobs", "2"], dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = warnsim(&["run", "small.toml", "--out", "b"], dir.path());
    assert!(b.status.success());
    for f in ["runs.csv", "summary.csv", "series.csv", "summary.json"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let stdout = String::from_utf8_lossy(&a.stdout);
    assert!(stdout.contains("3mrp-dsw"));
}

#[test]
fn seeds_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = warnsim(&["run", "small.toml", "--seeds", "7", "--out", "o"], dir.path());
    assert!(out.status.success());
    let json = std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap();
    assert!(json.contains("\"seeds\": [\n    7\n  ]"), "{json}");
}

#[test]
fn invalid_run_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seeds = [1]\nprotocols = [\"gpsr\"]\nduration = 0.0\n").unwrap();
    let out = warnsim(&["run", "bad.toml"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("duration"));
}
