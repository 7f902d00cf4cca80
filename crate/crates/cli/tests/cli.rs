use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_threshold-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("TLAB_GRID_N")
        .output()
        .expect("binary runs")
}

fn small(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(&p, "[grid]\nn = 1000\nrmax = 20.0\n").unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn ground_writes_profile_and_identities() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let out = tmp.path().join("g");
    let o = lab(&["ground", "--N", "3", "--p", "3", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let q = std::fs::read_to_string(out.join("q.csv")).unwrap();
    assert!(q.starts_with("r,re,im\n"));
    assert_eq!(q.lines().count(), 1 + 1001);
    let ids = std::fs::read_to_string(out.join("identities.txt")).unwrap();
    assert!(ids.contains("pohozaev_check=pass"));
    let m = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(m.contains("status=complete"));
    assert!(m.contains("grid.sha256="));
    assert!(m.contains("[grid]\nn = 1000\nrmax = 20.0\n"), "config echoed verbatim");
}

#[test]
fn evolve_without_initial_data_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["evolve"], &tmp.path().join("e"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("initial datum"));
}

#[test]
fn config_errors_exit_2_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\nn = 1000\nrmx = 20.0\n").unwrap();
    let o = lab(&["ground", "--config", bad.to_str().unwrap()], &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("rmx"), "{err}");

    let o = lab(&["ground", "--N", "3", "--p", "2.0"], &tmp.path().join("y"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.p"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn env_override_reaches_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let o = Command::new(env!("CARGO_BIN_EXE_threshold-lab"))
        .args(["ground", "--out"])
        .arg(&out)
        .env("TLAB_GRID_N", "800")
        .env("TLAB_GRID_RMAX", "16.0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = std::fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("n = 800"));
}

#[test]
fn resolved_config_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let a = tmp.path().join("a");
    assert!(lab(&["evolve", "--config", &cfg, "--datum", "scaled:1.01", "--t-end", "0.2"], &a).status.success());
    let resolved = a.join("config.resolved.toml");
    let b = tmp.path().join("b");
    let o = lab(&["evolve", "--config", resolved.to_str().unwrap(), "--datum", "scaled:1.01"], &b);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["series.csv", "series_extra.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn check_passes_for_one_dimensional_septic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = lab(&["check", "--N", "1", "--p", "7"], &out);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    let m = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(m.contains("check.pohozaev=pass") && m.contains("spectrum.e0="));
}

#[test]
fn failing_check_exits_1() {
    // A tolerance no discretization can meet.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("strict.toml");
    std::fs::write(&cfg, "[grid]\nn = 1000\nrmax = 20.0\n[ground]\nidentity_tol = 1e-30\n[spectrum]\ncoercivity = false\n").unwrap();
    let o = lab(&["check", "--config", cfg.to_str().unwrap()], &tmp.path().join("c"));
    assert_eq!(o.status.code(), Some(1));
    let m = std::fs::read_to_string(tmp.path().join("c").join("manifest.txt")).unwrap();
    assert!(m.contains("status=complete_with_failures"));
}

#[test]
fn modulate_reads_evolve_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("m.toml");
    std::fs::write(&cfg, "[grid]\nn = 1000\nrmax = 20.0\n[evolution]\nt_end = 0.3\nsnapshot_every = 10\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = tmp.path().join("m");
    assert!(lab(&["evolve", "--config", cfg, "--datum", "q"], &out).status.success());
    let o = lab(&["modulate", "--config", cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let frames = std::fs::read_to_string(out.join("frames.csv")).unwrap();
    assert!(frames.starts_with("t,theta,alpha,hnorm,d,res1,res2\n"));
    assert_eq!(frames.lines().count(), 1 + 4);
}
