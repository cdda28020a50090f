use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bess-track"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn short_config(dir: &Path, steps: usize) -> String {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        format!("[tracking]\nn_seg = 2\n\n[simulation]\nsteps = {steps}\n"),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn help_lists_subcommands() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for sub in ["fit", "solve-one", "simulate", "validate", "plot", "gen-data"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn gen_data_is_seed_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let out = run(&["--seed", seed, "--out", dir.path().to_str().unwrap(), "gen-data"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |d: &tempfile::TempDir, f: &str| fs::read_to_string(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "p_wind_f.csv"), read(&b, "p_wind_f.csv"));
    assert_ne!(read(&a, "p_wind_f.csv"), read(&c, "p_wind_f.csv"));
    assert_eq!(read(&a, "p_sch.csv").lines().count(), 105);
    assert!(read(&a, "c_e.csv").starts_with("timestamp,value\n"));
    let schema: serde_json::Value = serde_json::from_str(&read(&a, "series_schema.json")).unwrap();
    assert_eq!(schema["series"]["p_sch.csv"]["unit"], "MW");
}

#[test]
fn generated_files_drive_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&run(&["--out", data.to_str().unwrap(), "gen-data"])), 0);
    let cfg = dir.path().join("files.toml");
    fs::write(
        &cfg,
        "[tracking]\nn_seg = 2\n\n[simulation]\nsteps = 3\n\n[data]\np_sch = \"data/p_sch.csv\"\np_wind_f = \"data/p_wind_f.csv\"\nc_e = \"data/c_e.csv\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let traj = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 4);
    assert!(traj.lines().nth(1).unwrap().starts_with("2019-01-01T00:00:00,"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[battery]\nsoc_min = 0.9\nsoc_max = 0.1\n").unwrap();
    let out = run(&["--config", bad.to_str().unwrap(), "validate"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "[battery]\ncapacity = 3\n").unwrap();
    assert_eq!(code(&run(&["--config", unknown.to_str().unwrap(), "validate"])), 2);

    assert_eq!(code(&run(&["--config", "/nonexistent/run.toml", "validate"])), 2);
    assert_eq!(code(&run(&["--mode", "case3", "validate"])), 2);
    assert_eq!(code(&run(&["--lambda", "0", "validate"])), 2);
}

#[test]
fn short_series_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir_all(&data).unwrap();
    let mut text = String::from("timestamp,value\n");
    for k in 0..96 {
        text += &format!("2019-01-01T{:02}:{:02}:00,100\n", k / 4, (k % 4) * 15);
    }
    for f in ["p_sch.csv", "p_wind_f.csv", "c_e.csv"] {
        fs::write(data.join(f), &text).unwrap();
    }
    let cfg = dir.path().join("files.toml");
    fs::write(&cfg, "[data]\np_sch = \"data/p_sch.csv\"\np_wind_f = \"data/p_wind_f.csv\"\nc_e = \"data/c_e.csv\"\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("103"));
}

#[test]
fn validate_prints_pwl_table_and_rainflow() {
    let dir = tempfile::tempdir().unwrap();
    let soc = dir.path().join("soc.csv");
    fs::write(
        &soc,
        "timestamp,value\n2019-01-01T00:00:00,0.5\n2019-01-01T00:15:00,0.3\n2019-01-01T00:30:00,0.5\n",
    )
    .unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "validate", "--soc", soc.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let (csv, json) = text.split_once("\n\n").unwrap();
    assert!(csv.starts_with("quantity,index,soc,value\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("breakpoint,")).count(), 11);
    assert_eq!(csv.lines().filter(|l| l.starts_with("slope,")).count(), 10);
    assert_eq!(csv.lines().filter(|l| l.starts_with("max_abs_error,")).count(), 1);
    let report: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(report["full_cycles"].as_u64().unwrap() + report["half_cycles"].as_u64().unwrap(), 2);
    assert!(dir.path().join("rainflow.json").exists());
}

#[test]
fn solve_one_from_slice() {
    let dir = tempfile::tempdir().unwrap();
    let slice = dir.path().join("slice.csv");
    let mut text = String::from("p_sch,p_wind_f,c_e\n");
    for k in 0..8 {
        text += &format!("100,{},70\n", if k < 4 { 90 } else { 100 });
    }
    fs::write(&slice, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--lambda",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
        "solve-one",
        "--input",
        slice.to_str().unwrap(),
        "--soc",
        "0.6",
        "--dump-lp",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sol: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("solution.json")).unwrap()).unwrap();
    assert_eq!(sol["solution"]["steps"].as_array().unwrap().len(), 8);
    assert_eq!(sol["solution"]["soc_init"], 0.6);
    let csv = fs::read_to_string(out_dir.join("solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    let lp = fs::read_to_string(out_dir.join("model.lp")).unwrap();
    assert!(lp.starts_with("Minimize") && lp.contains("Binaries") && lp.trim_end().ends_with("End"));

    // Wrong number of rows for the 2 h window.
    fs::write(&slice, "p_sch,p_wind_f,c_e\n100,90,70\n").unwrap();
    let out = run(&["--out", out_dir.to_str().unwrap(), "solve-one", "--input", slice.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn solver_limit_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("limit.toml");
    fs::write(&cfg, "[tracking]\nn_seg = 4\n\n[solver.options]\nnode_limit = 1\n").unwrap();
    let slice = dir.path().join("slice.csv");
    let mut text = String::from("p_sch,p_wind_f,c_e\n");
    for k in 0..8 {
        text += &format!("100,{},70\n", 88 + 3 * (k % 3));
    }
    fs::write(&slice, text).unwrap();
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "solve-one",
        "--input",
        slice.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_pair_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 6);
    let out_dir = dir.path().join("out");
    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "simulate", "--pair"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pair: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("case_pair.json")).unwrap()).unwrap();
    for case in ["case1", "case2"] {
        assert_eq!(pair[case].as_object().unwrap().len(), 4);
        let totals: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join(case).join("totals.json")).unwrap()).unwrap();
        assert_eq!(totals["indices"].as_object().unwrap().len(), 5);
        assert_eq!(
            fs::read_to_string(out_dir.join(case).join("trajectory.csv")).unwrap().lines().count(),
            7
        );
    }
    let traj = out_dir.join("case1").join("trajectory.csv");
    let plots = dir.path().join("plots");
    let out = run(&["--out", plots.to_str().unwrap(), "plot", traj.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["schedule.svg", "power.svg", "soc.svg"] {
        let svg = fs::read_to_string(plots.join(f)).unwrap();
        assert!(svg.contains("<svg"));
    }
}

#[test]
fn mode_flag_selects_case2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 2);
    let out = run(&["--config", &cfg, "--mode", "case2", "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let totals: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("totals.json")).unwrap()).unwrap();
    assert_eq!(totals["diagnostics"]["mode"], "case2");
}

#[test]
fn fit_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("cycles.csv");
    let mut text = String::from("dod,cycles\n");
    for k in 1..=10 {
        let d = k as f64 / 10.0;
        text += &format!("{d},{}\n", 12000.0 - 9000.0 * d + 1000.0 * d * d);
    }
    fs::write(&samples, text).unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "fit", samples.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["curve"]["family"], "poly4");
    assert!(report["max_rel_residual"].as_f64().unwrap() < 1e-9);
    assert!(dir.path().join("curve.json").exists());

    fs::write(&samples, "depth,n\n0.5,100\n").unwrap();
    assert_eq!(code(&run(&["--out", dir.path().to_str().unwrap(), "fit", samples.to_str().unwrap()])), 2);
}

#[test]
fn missing_trajectory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "plot"]);
    assert_ne!(code(&out), 0);
    assert!(!dir.path().join("schedule.svg").exists());
}
