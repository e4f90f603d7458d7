use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_contract-lab");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CONTRACT_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn records(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn write_config(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_uniform_emits_closed_forms() {
    let o = run(&["solve", "--config", &config("uniform-3.6.1.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 2);
    let f = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();
    assert_eq!(&rows[0][0], "concealed");
    assert_eq!(f(&rows[0], 2), 0.625);
    assert_eq!(f(&rows[0], 6), 0.2421875);
    assert_eq!(&rows[1][0], "revealed");
    assert_eq!((f(&rows[1], 2), f(&rows[1], 3)), (0.75, 0.5));
    assert_eq!(f(&rows[1], 6), 0.234375);
    assert!(stderr(&o).contains("quantity lemma: holds"));
}

#[test]
fn solve_json_carries_schema_and_lemma() {
    let o = run(&["solve", "--config", &config("uniform-3.6.1.json"), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["rows"][0]["p0"], 0.625);
    assert_eq!(v["quantity_lemma"]["holds"], true);
}

#[test]
fn identical_environments_give_equal_utilities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "same.json",
        r#"{"b": 1.0, "theta": 0.3,
            "f0": {"family": "exponential", "mean": 0.4},
            "f1": {"family": "exponential", "mean": 0.4}}"#,
    );
    let o = run(&["solve", "--config", &cfg]);
    let rows = records(&stdout(&o));
    for (col, (a, b)) in rows[0].iter().zip(rows[1].iter()).enumerate().skip(2) {
        let (a, b): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
        assert!((a - b).abs() < 1e-9, "column {col}: {a} vs {b}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("uniform-3.6.1.json")).unwrap();
    let bad = write_config(&dir, "bad.json", &text.replace("\"theta\": 0.5", "\"theta\": 1.5"));
    let o = run(&["solve", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("theta must lie in (0,1)"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());

    let unknown = write_config(&dir, "unknown.json", &text.replace("\"b\": 1.0", "\"b\": 1.0, \"seed\": 7"));
    assert_eq!(run(&["solve", "--config", &unknown]).status.code(), Some(2));
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--config", "/nonexistent.json"]).status.code(), Some(2));

    let o = run(&["verify", "--seedless"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seedless"));

    let o = Command::new(BIN)
        .args(["solve", "--config", &config("uniform-3.6.1.json")])
        .env("CONTRACT_LAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn short_trajectories_are_a_config_error() {
    let o = run(&["sweep", "trajectories", "--config", &config("fig6-trajectories.json"), "--grid-n", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 11"), "{}", stderr(&o));
}

#[test]
fn trajectory_config_sweeps_locate_the_argmax() {
    let cfg = config("fig6-trajectories.json");
    let o = run(&["sweep", "garbling", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(records(&stdout(&o)).len(), 101);
    let msg = stderr(&o);
    assert!(msg.contains("interior"), "{msg}");
    let field = |key: &str| -> f64 {
        let start = msg.find(key).unwrap() + key.len();
        msg[start..].split_whitespace().next().unwrap().parse().unwrap()
    };
    assert!(field("V_garb(eps*)=") > field("V_con="));

    let o = run(&["sweep", "restriction", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("boundary"), "{}", stderr(&o));
}

#[test]
fn two_point_sweeps_hold_only_endpoints() {
    let cfg = config("fig6-trajectories.json");
    let o = run(&["sweep", "garbling", "--config", &cfg, "--grid-n", "2"]);
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert_eq!((&rows[0][0], &rows[1][0]), ("0.0", "1.0"));
    let o = run(&["sweep", "restriction", "--config", &cfg, "--grid-n", "2"]);
    assert_eq!(records(&stdout(&o)).len(), 2);
    assert_eq!(run(&["sweep", "garbling", "--config", &cfg, "--grid-n", "1"]).status.code(), Some(2));
}

#[test]
fn trajectories_export_both_paths() {
    let o = run(&["sweep", "trajectories", "--config", &config("fig6-trajectories.json"), "--grid-n", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("scenario_id,kind,param,v,pi,w\r\n"));
    let rows = records(&text);
    assert_eq!(rows.len(), 22);
    assert_eq!(&rows[0][0], "fig6-trajectories");
    assert_eq!((&rows[0][1], &rows[21][1]), ("Garbling", "Restriction"));
}

#[test]
fn single_cell_grid_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "cell.json",
        r#"{"b": 1.0, "theta": 0.5,
            "f0": {"family": "exponential", "mean": 0.5},
            "f1": {"family": "exponential", "mean": 0.01},
            "grids": {"lambda0": [0.5], "lambda1": [0.01]}}"#,
    );
    let o = run(&["grid", "garbling_prime", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert!(rows[0][2].parse::<f64>().unwrap() < 0.0);
}

#[test]
fn revelation_grid_diagonal_and_sign_changes() {
    let o = run(&["grid", "revelation", "--config", &config("fig2-grid.json"), "--grid-n", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 64);
    for r in rows.iter().filter(|r| r[0] == r[1]) {
        assert!(r[2].parse::<f64>().unwrap().abs() < 1e-9);
    }
    let first = stderr(&o).lines().find(|l| l.starts_with("lambda1=0.01:")).unwrap().to_string();
    assert!(!first.contains(": 0 sign"), "{first}");
}

#[test]
fn check_conditions_reports_verdicts_as_data() {
    let verdict = |name: &str, cond: &str| -> (bool, bool) {
        let o = run(&["check-conditions", "--config", &config(name), "--format", "csv"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = stdout(&o);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().unwrap().clone();
        let col = |k: &str| header.iter().position(|h| h == k).unwrap();
        let row = rdr.records().map(Result::unwrap).find(|r| &r[col("name")] == cond).unwrap();
        (&row[col("holds")] == "true", &row[col("preconditions_hold")] == "true")
    };
    assert_eq!(verdict("anchored-exponential.json", "prop1"), (true, true));
    assert_eq!(verdict("anchored-exponential.json", "garbling_zerocost"), (true, true));
    assert!(!verdict("exponential-pair.json", "prop2").0);
    assert!(!verdict("exponential-pair.json", "prop3").0);
    assert!(!verdict("anchored-weibull.json", "garbling_zerocost").0);
    assert_eq!(verdict("mixture-concealment.json", "prop2"), (true, true));
}

#[test]
fn files_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("fig6-trajectories.json");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "0"].iter().enumerate() {
        let path = dir.path().join(format!("run{i}.csv"));
        let o = Command::new(BIN)
            .args(["sweep", "garbling", "--config", &cfg, "--grid-n", "21", "--out"])
            .arg(&path)
            .env("CONTRACT_LAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert!(!outputs[0].is_empty());
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn verify_passes_and_lists_invariants() {
    let o = run(&["verify", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert!(rows.len() >= 25);
    assert!(rows.iter().all(|r| r["passed"] == true));
    assert!(stderr(&o).contains("PASS "));
}
