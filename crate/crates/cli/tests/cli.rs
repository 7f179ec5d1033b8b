use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chs-dynbc"));
    c.env_remove("CHS_DYNBC_JOBS");
    c
}

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn demo_run_writes_series_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["run", "--config", demo().to_str().unwrap(), "--out", out.to_str().unwrap(), "--vtk"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ts = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(ts.starts_with(
        "step,t,energy_total,mu_energy,dissipation_cum,mu_min,mu_max,rho_min,rho_max,xi_max_abs,newton_iters,dt_used\n"
    ));
    assert_eq!(ts.lines().count(), 102);
    assert!(out.join("snapshots/snapshot_000100.csv").exists());
    assert!(out.join("snapshots/snapshot_000100.vtk").exists());

    // same config, same bytes
    let again = dir.path().join("p");
    assert_eq!(code(&run(&["run", "--config", demo().to_str().unwrap(), "--out", again.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read(again.join("timeseries.csv")).unwrap(), ts.as_bytes());
    assert_eq!(
        std::fs::read(again.join("snapshots/snapshot_000040.csv")).unwrap(),
        std::fs::read(out.join("snapshots/snapshot_000040.csv")).unwrap()
    );
}

#[test]
fn zero_data_run_has_zero_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "zero.toml",
        r#"
[mesh]
kind = "interval"
elements = 8
[potential.bulk]
name = "logarithmic"
c = 2.0
[scheme]
final_time = 0.01
n_blocks = 2
[initial.mu]
profile = "constant"
value = 0.0
[initial.rho]
profile = "constant"
value = 0.0
[control]
kind = "zero"
"#,
    );
    let out = dir.path().join("o");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    for line in lines {
        for (name, v) in header.iter().zip(line.split(',')) {
            if !matches!(*name, "step" | "t" | "dt_used") {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{name} in {line}");
            }
        }
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[potential.bulk]\nname = \"logarithmic\"\nc = 0.5\n");
    let o = run(&["run", "--config", &bad, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("c > 1"));

    let syntax = write(dir.path(), "syntax.toml", "seed = 1\n[scheme\n");
    let o = run(&["run", "--config", &syntax]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o =
        bin().args(["sweep", "--out", dir.path().to_str().unwrap()]).env("CHS_DYNBC_JOBS", "zero").output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn solver_failure_exits_3_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "hard.toml",
        "[scheme]\nnewton_max = 1\nnewton_tol = 1e-300\ndt_min = 1e-4\n[mesh]\nkind = \"interval\"\nelements = 8\n",
    );
    let out = dir.path().join("o");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let rec = std::fs::read_to_string(out.join("failure.csv")).unwrap();
    assert!(rec.starts_with("command,kind,recoverable,message\nrun,dt_underflow,false,"), "{rec}");
}

#[test]
fn verify_subset_and_sabotage() {
    let o = run(&["verify", "--only", "yosida,compatibility"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("yosida") && text.contains("compatibility") && !text.contains("dense-oracle"));

    let o = run(&["verify", "--only", "yosida,compatibility", "--sabotage", "compatibility"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("compatibility"));

    assert_eq!(code(&run(&["verify", "--only", "nonsense"])), 2);
}

#[test]
fn stability_with_identical_controls_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        "[mesh]\nkind = \"interval\"\nelements = 8\n[scheme]\nfinal_time = 0.02\nn_blocks = 2\n[stability]\nperturbation = { kind = \"constant\", value = 1.0 }\nscales = [0.0, 0.1]\n",
    );
    let out = dir.path().join("o");
    let o = bin()
        .args(["stability", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "4"])
        .env("CHS_DYNBC_JOBS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("stability.csv")).unwrap();
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert!(first[1..9].iter().all(|v| v.parse::<f64>().unwrap() == 0.0), "{first:?}");
    assert_eq!(first[9], "");
    let second: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert!(second[9].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn stability_refuses_obstacle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "o.toml",
        "[potential.bulk]\nname = \"obstacle\"\n[mesh]\nkind = \"interval\"\nelements = 8\n",
    );
    let o = run(&["stability", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn convergence_in_dt_reports_two_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["convergence", "--config", demo().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let pairs = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(pairs.lines().count(), 3);
    let rich = std::fs::read_to_string(out.join("richardson.csv")).unwrap();
    let rows: Vec<&str> = rich.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let ratio: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!(ratio > 1.5 && ratio < 2.5, "{row}");
    }
}

#[test]
fn sweep_empty_grid_and_failing_point() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "e.toml", "[sweep]\nparameter = \"eps\"\nvalues = []\n");
    let out = dir.path().join("e");
    assert_eq!(code(&run(&["sweep", "--config", &empty, "--out", out.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 1);

    let mixed = write(
        dir.path(),
        "m.toml",
        "[mesh]\nkind = \"interval\"\nelements = 8\n[scheme]\nfinal_time = 0.02\nn_blocks = 2\n[sweep]\nparameter = \"eps\"\nvalues = [0.1, -1.0, 0.05]\n",
    );
    let out = dir.path().join("m");
    assert_eq!(code(&run(&["sweep", "--config", &mixed, "--out", out.to_str().unwrap(), "--jobs", "2"])), 3);
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let status: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(status, ["ok", "config_error", "ok"]);
    assert!(out.join("sweep/point_002/timeseries.csv").exists());
}
