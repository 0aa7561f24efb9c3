use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aqurate_cli::manifest::RunManifest;

fn aqurate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aqurate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(str::to_string)
        .collect()
}

fn out_arg(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn characterize_default_grid_has_five_points() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aqurate(&["characterize", "--out", out_arg(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = lines(&tmp.path().join("characterization.csv"));
    assert_eq!(csv[0], "vin_volts,probability,n_samples");
    let vins: Vec<f64> = csv[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(vins, vec![0.0, 0.2, 0.4, 0.6, 0.8]);
    assert!(csv[1].ends_with(",0,100") && csv[5].ends_with(",1,100"));

    let stair = lines(&tmp.path().join("staircase.csv"));
    assert_eq!(stair[0], "cycle,time_ns,vin_volts,bit");
    assert_eq!(stair.len(), 1 + 5 * 100);
    assert!(stair[1..101].iter().all(|l| l.ends_with(",0")));
}

#[test]
fn characterize_fine_grid_and_analytic_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aqurate(&[
        "characterize",
        "--grid-step",
        "0.1",
        "--analytic",
        "--out",
        out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0);
    let csv = lines(&tmp.path().join("characterization.csv"));
    assert_eq!(csv.len(), 1 + 9);
    assert!(csv.iter().any(|l| l == "0.4,0.5,0"));
    assert!(!tmp.path().join("staircase.csv").exists());
}

#[test]
fn calibrate_writes_monotone_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aqurate(&[
        "calibrate",
        "--grid-step",
        "0.1",
        "--samples",
        "200",
        "--out",
        out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0);
    let csv = lines(&tmp.path().join("calibration.csv"));
    assert_eq!(csv[0], "vin_volts,probability");
    let p: Vec<f64> = csv[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(p.len(), 9);
    assert!(p.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn experiment_summary_is_cartesian_product() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aqurate(&[
        "experiment",
        "--rates",
        "0.05,0.10,0.15",
        "--solvers",
        "omp,cosamp",
        "--trials",
        "2",
        "--frames",
        "3",
        "--warmup-frames",
        "1",
        "--n",
        "256",
        "--out",
        out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = lines(&tmp.path().join("summary.csv"));
    assert_eq!(
        summary[0],
        "algorithm,sparsity_rate,mean_normalized_error,std_error,mean_m,frames,trials"
    );
    assert_eq!(summary.len(), 1 + 6);
    let results = lines(&tmp.path().join("results.csv"));
    assert_eq!(
        results[0],
        "trial,algorithm,sparsity_rate,m,normalized_error,iterations"
    );
    // 3 rates x 2 trials x 2 steady frames x 2 solvers
    assert_eq!(results.len(), 1 + 24);
    assert_eq!(lines(&tmp.path().join("frames.csv")).len(), 1 + 36);

    let signal = lines(&tmp.path().join("signal.csv"));
    assert_eq!(signal[0], "index,x");
    assert_eq!(signal.len(), 1 + 256);
    let meas = lines(&tmp.path().join("measurements.csv"));
    assert_eq!(meas[0], "instant,value");
    let trace = lines(&tmp.path().join("aclk_trace.csv"));
    assert_eq!(trace[0], "frame_id,cycle_index");
    let last_frame = trace[1..].iter().filter(|l| l.starts_with("2,")).count();
    assert_eq!(last_frame, meas.len() - 1);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        let o = aqurate(&[
            "experiment",
            "--trials",
            "2",
            "--frames",
            "2",
            "--warmup-frames",
            "1",
            "--n",
            "128",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        fs::read(out.join("frames.csv")).unwrap()
    };
    let a = run("a", "42");
    assert_eq!(a, run("b", "42"));
    assert_ne!(a, run("c", "43"));
}

#[test]
fn manifest_records_the_run_and_replays_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "trials = 2\nframes = 2\nwarmup_frames = 1\nn = 64\nrates = [0.1]\n",
    )
    .unwrap();
    let first = tmp.path().join("first");
    let o = aqurate(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        out_arg(&first),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::load(&first.join("manifest.toml")).unwrap();
    assert_eq!(m.subcommand, "experiment");
    assert_eq!(m.seed, 5);
    assert_eq!(m.tool_version, env!("CARGO_PKG_VERSION"));
    assert!(m.config.as_deref().unwrap().contains("n = 64"));
    assert!(m.files.contains(&"summary.csv".to_string()));

    fs::remove_file(&cfg).unwrap();
    let second = tmp.path().join("second");
    let manifest = first.join("manifest.toml");
    let o = aqurate(&[
        "replay",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out_arg(&second),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in &m.files {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn scaling_bundled_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aqurate(&["scaling", "--out", out_arg(tmp.path())]);
    assert_eq!(code(&o), 0);
    let report = lines(&tmp.path().join("report.csv"));
    assert_eq!(report[0], "design,technology,power_norm,area_norm");
    assert!(report.contains(&"This Work,14nm (0.8V),1,1".to_string()));
    assert!(report
        .iter()
        .any(|l| l.starts_with("Bellasi2014,") && l.ends_with(",N/A")));
    let table = fs::read_to_string(tmp.path().join("table.txt")).unwrap();
    assert!(table.starts_with("Design"));
    assert_eq!(table, String::from_utf8(o.stdout).unwrap());
}

#[test]
fn scaling_inverse_back_solves_published_factors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aqurate(&["scaling", "--inverse", "--out", out_arg(tmp.path())]);
    assert_eq!(code(&o), 0);
    let rows = lines(&tmp.path().join("back_solved.csv"));
    assert_eq!(rows[0], "name,node_nm,v_nominal,power_watts,area,provenance");
    let bellasi: Vec<&str> = rows
        .iter()
        .find(|l| l.starts_with("Bellasi2014,"))
        .unwrap()
        .split(',')
        .collect();
    let power: f64 = bellasi[3].parse().unwrap();
    assert!((power - 636.75e-6).abs() < 1e-15, "{power}");
    assert_eq!(bellasi[4], "");
    assert!(bellasi[5].contains("back-solved"));
}

#[test]
fn scaling_empty_entries_gives_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, content) in [
        ("empty.csv", ""),
        ("header.csv", "name,node_nm,v_nominal,power_watts,area\n"),
    ] {
        let entries = tmp.path().join(name);
        fs::write(&entries, content).unwrap();
        let out = tmp.path().join(format!("out-{name}"));
        let o = aqurate(&[
            "scaling",
            "--entries",
            entries.to_str().unwrap(),
            "--out",
            out_arg(&out),
        ]);
        assert_eq!(code(&o), 0);
        assert_eq!(
            lines(&out.join("report.csv")),
            vec!["design,technology,power_norm,area_norm"]
        );
    }
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_entries = tmp.path().join("bad.csv");
    fs::write(&bad_entries, "name,node_nm,v_nominal,power_watts,area\nX,-5,1.0,,\n").unwrap();
    let bad_cfg = tmp.path().join("bad.toml");
    fs::write(&bad_cfg, "trails = 3\n").unwrap();
    let out = tmp.path().join("out");
    let cases: Vec<Vec<&str>> = vec![
        vec!["experiment", "--rates", "0"],
        vec!["experiment", "--solvers", "lasso"],
        vec!["experiment", "--config", bad_cfg.to_str().unwrap()],
        vec!["experiment", "--config", "/nonexistent/run.toml"],
        vec!["experiment", "--jobs", "0"],
        vec!["characterize", "--grid-step=-0.1"],
        vec!["scaling", "--entries", bad_entries.to_str().unwrap()],
        vec!["replay", "--manifest", "/nonexistent/manifest.toml"],
        vec!["no-such-command"],
    ];
    for mut args in cases {
        args.extend(["--out", out.to_str().unwrap()]);
        let o = aqurate(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.exists(), "config errors must not create outputs");
}

#[test]
fn runtime_errors_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = aqurate(&["scaling", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn help_exits_cleanly() {
    let o = aqurate(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for cmd in ["characterize", "calibrate", "experiment", "scaling"] {
        assert!(text.contains(cmd));
    }
}
