use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use til_core::report::TRUTH_COLUMNS;

fn til(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_til")).args(args).arg("--quiet").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_ok(args: &[&str]) {
    let o = til(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn code(args: &[&str]) -> i32 {
    til(args).status.code().unwrap()
}

fn lines(p: &Path) -> Vec<String> {
    std::fs::read_to_string(p).unwrap().lines().map(String::from).collect()
}

const MASS_STAGE: &str = "[[observer.stage]]\nkind = \"mass\"\nduration = inf\n";

#[test]
fn empty_duration_gives_header_only() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", "[scenario]\nkind = \"urban\"\nduration = 0.0\n");
    let out = d.path().join("out");
    run_ok(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(lines(&out.join("truth.csv")), vec![TRUTH_COLUMNS.join(",")]);
}

#[test]
fn simulate_is_deterministic_and_documented() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", "[scenario]\nkind = \"urban\"\nduration = 4.0\nnoise = { snr = 10.0 }\n");
    let c = cfg.to_str().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    run_ok(&["simulate", "--config", c, "--out", a.to_str().unwrap(), "--seed", "7"]);
    run_ok(&["--seed", "7", "simulate", "--config", c, "--out", b.to_str().unwrap()]);
    let ta = std::fs::read(a.join("truth.csv")).unwrap();
    assert_eq!(ta, std::fs::read(b.join("truth.csv")).unwrap());
    let rows = lines(&a.join("truth.csv"));
    assert_eq!(rows.len(), 401);
    assert_eq!(rows[0], TRUTH_COLUMNS.join(","));
    assert!(rows[1..].iter().all(|r| r.split(',').count() == TRUTH_COLUMNS.len()));
    let other = d.path().join("c");
    run_ok(&["simulate", "--config", c, "--out", other.to_str().unwrap(), "--seed", "8"]);
    assert_ne!(ta, std::fs::read(other.join("truth.csv")).unwrap());
}

#[test]
fn config_errors_name_the_line() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", "[scenario]\nkind = \"urban\"\nduraton = 1.0\n");
    let o = til(&["simulate", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert_eq!(code(&["simulate", "--out", d.path().to_str().unwrap()]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn missing_gains_file_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", "[scenario]\nduration = 2.0\n[observer]\ngains = \"nope.toml\"\n");
    let o = til(&["estimate", "--config", cfg.to_str().unwrap(), "--out", d.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"));
}

#[test]
fn three_conditions_give_three_rows() {
    let d = tempfile::tempdir().unwrap();
    let text = format!(
        "[scenario]\nduration = 20.0\n{MASS_STAGE}\
         [[estimate.conditions]]\nname = \"clean\"\n\
         [[estimate.conditions]]\nname = \"snr 10\"\nscenario = {{ noise = {{ snr = 10.0 }} }}\n\
         [[estimate.conditions]]\nname = \"wrong cm\"\nscenario = {{ prior = {{ cm = false }} }}\n"
    );
    let cfg = write(d.path(), "c.toml", &text);
    let out = d.path().join("o");
    run_ok(&["estimate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let rows = lines(&out.join("rms.csv"));
    assert_eq!(rows[0], "condition,param,truth_deviation,rms,rms_percent");
    let names: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names, ["clean", "snr 10", "wrong cm"]);
    for i in 0..3 {
        assert!(out.join(format!("estimation_{i}.csv")).exists());
        let gp = std::fs::read_to_string(out.join(format!("estimation_{i}_mass.gp"))).unwrap();
        assert!(gp.contains(&format!("'estimation_{i}.csv' using 1:3")));
    }
}

#[test]
fn zero_gains_reproduce_the_open_loop_error() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "zero.toml", "k_wheel = 0.0\nk_ax_dm = 0.0\nk_dwx_djxx = 0.0\nk_dwy_djyy = 0.0\nk_dwz_djzz = 0.0\n");
    let text = format!("[scenario]\nduration = 10.0\n[observer]\ngains = \"zero.toml\"\ninitial = {{ mass = -100.0 }}\n{MASS_STAGE}");
    let cfg = write(d.path(), "c.toml", &text);
    let out = d.path().join("o");
    run_ok(&["estimate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let row: Vec<f64> = lines(&out.join("rms.csv"))[1].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
    let (truth, rms, pct) = (row[0], row[1], row[2]);
    assert_eq!(rms, (truth + 100.0).abs());
    assert!((pct - 100.0 * (truth + 100.0).abs() / truth.abs()).abs() < 1e-9);
}

#[test]
fn tune_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let base = format!("[scenario]\nkind = \"lane-change-braking\"\nduration = 20.0\n{MASS_STAGE}");
    let ok = write(
        d.path(),
        "ok.toml",
        &format!("{base}[tune]\nnames = [\"k_ax_dm\"]\n[tune.bo]\niterations = 6\nn_seed = 3\ncandidates = 64\n"),
    );
    let out = d.path().join("o");
    assert_eq!(code(&["tune", "--config", ok.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    assert_eq!(lines(&out.join("history.csv")).len(), 7);
    assert!(std::fs::read_to_string(out.join("gains.toml")).unwrap().contains("k_ax_dm"));

    let bad = write(d.path(), "bad.toml", &format!("{base}[tune.bo]\niterations = 3\nn_seed = 5\n"));
    assert_eq!(code(&["tune", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);

    // positive velocity injection diverges once the lane changes start
    let long = format!("[scenario]\nkind = \"lane-change-braking\"\nduration = 30.0\n{MASS_STAGE}");
    let div = write(
        d.path(),
        "div.toml",
        &format!("{long}[tune]\nnames = [\"k_ax_vx\"]\nbounds = {{ k_ax_vx = [0.05, 0.1] }}\n[tune.bo]\niterations = 4\nn_seed = 4\n"),
    );
    let o = til(&["tune", "--config", div.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn sweep_row_counts() {
    let d = tempfile::tempdir().unwrap();
    let base = format!("[scenario]\nduration = 5.0\n{MASS_STAGE}");
    let one = write(d.path(), "one.toml", &format!("{base}[sweep]\naxis = \"snr\"\nvalues = [10.0]\nparam = \"mass\"\n"));
    let out = d.path().join("o1");
    run_ok(&["sweep", "--config", one.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(lines(&out.join("sweep.csv")).len(), 2);

    let many = write(
        d.path(),
        "many.toml",
        &format!("{base}[sweep]\naxis = \"snr\"\nvalues = [5.0, 10.0, 20.0]\nrepetitions = 5\nparam = \"mass\"\n"),
    );
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    run_ok(&["sweep", "--config", many.to_str().unwrap(), "--out", a.to_str().unwrap(), "--jobs", "1"]);
    run_ok(&["sweep", "--config", many.to_str().unwrap(), "--out", b.to_str().unwrap(), "--jobs", "3"]);
    let rows = lines(&a.join("sweep.csv"));
    assert_eq!(rows.len(), 16);
    assert_eq!(rows[0], "snr,seed,param,rms_percent,diverged");
    assert_eq!(std::fs::read(a.join("sweep.csv")).unwrap(), std::fs::read(b.join("sweep.csv")).unwrap());

    let unsorted = write(d.path(), "u.toml", &format!("{base}[sweep]\naxis = \"snr\"\nvalues = [10.0, 5.0]\nparam = \"mass\"\n"));
    assert_eq!(code(&["sweep", "--config", unsorted.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn report_detects_tampering() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", &format!("[scenario]\nduration = 3.0\nnoise = {{ snr = 10.0 }}\n{MASS_STAGE}"));
    let out = d.path().join("o");
    run_ok(&["estimate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let manifest = out.join("manifest.json");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    let files: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["estimation_0.csv", "estimation_0_mass.gp", "sideslip_0.gp", "rms.csv"]);
    run_ok(&["report", manifest.to_str().unwrap()]);

    std::fs::write(out.join("rms.csv"), "tampered\n").unwrap();
    assert_eq!(code(&["report", manifest.to_str().unwrap(), "--verify-only"]), 1);
    std::fs::write(&cfg, "[scenario]\nduration = 4.0\n").unwrap();
    assert_eq!(code(&["report", manifest.to_str().unwrap()]), 1);
}
