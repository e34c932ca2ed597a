use std::path::Path;
use std::process::Command;

fn vemflux(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vemflux"))
        .args(args)
        .output()
        .expect("spawn vemflux")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn fixed_sweep_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = vemflux(&[
        "run",
        "--p-sweep",
        "1:3",
        "--mesh",
        "lshape(2)",
        "--timings",
        "false",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out.join("results.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iter,ncells,ndofs,pmin,pmax,error,eta,eta_loc,I,I_loc,t_solve,t_estimate");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("2,12,"));
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["config"]["p_sweep"], serde_json::json!([1, 3]));
    assert_eq!(summary["final"]["pmax"], 3);
    assert!(summary["version"].is_string());

    let again = dir.path().join("again");
    vemflux(&[
        "run",
        "--p-sweep",
        "1:3",
        "--mesh",
        "lshape(2)",
        "--timings",
        "false",
        "--output",
        again.to_str().unwrap(),
    ]);
    assert_eq!(csv, read(&again.join("results.csv")));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "# adaptive\nmode = h-adaptive\np = 2\ndof_budget = 400\noutput = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = vemflux(&[
        "--threads",
        "2",
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--p",
        "1",
        "--snapshots",
        "true",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["config"]["mode"], "h-adaptive");
    assert_eq!(summary["config"]["p"], 1);
    let rows = summary["rows"].as_u64().unwrap();
    assert!(rows >= 2);
    assert!(out.join("mesh_000.json").exists());
    assert!(out.join(format!("mesh_{:03}.json", rows - 1)).exists());
}

#[test]
fn invalid_configuration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    for args in [
        vec!["run", "--p", "0"],
        vec!["run", "--p", "4", "--p-max", "3"],
        vec!["run", "--p-max", "11"],
        vec!["run", "--theta", "0"],
        vec!["run", "--dof-budget", "0"],
        vec!["run", "--mode", "sideways"],
        vec!["run", "--mesh", "/nonexistent/mesh.json"],
        vec!["run", "--config", "/nonexistent.cfg"],
        vec!["run", "--bogus"],
        vec!["verify", "nothing"],
    ] {
        let mut a = args.clone();
        a.extend(["--output", out.to_str().unwrap()]);
        if args[0] == "verify" {
            a.truncate(2);
        }
        let r = vemflux(&a);
        assert_eq!(r.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
    }
    assert!(!out.exists());
}

#[test]
fn mesh_gen_round_trips_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("m.json");
    let o = vemflux(&["mesh-gen", "square(3)", "--refine", "1", "--output", mesh.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(&mesh)).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 36);
    assert_eq!(v["vertices"][0].as_array().unwrap().len(), 2);
    let out = dir.path().join("out");
    let o = vemflux(&[
        "run",
        "--problem",
        "square-sin",
        "--mesh",
        mesh.to_str().unwrap(),
        "--p",
        "2",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_equilibration_passes() {
    let o = vemflux(&["verify", "equilibration"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("equilibration: PASS"));
}
