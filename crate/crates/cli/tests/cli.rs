use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mic_cli::artifact::sha256_hex;
use mic_cli::formats::read_params;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn mic(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mic"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn simulate_small(dir: &Path, out_dir: &str, seed: &str) -> Output {
    mic(
        dir,
        &[
            "simulate", "--out-dir", out_dir, "--users", "6", "--cascades", "2", "--T", "50", "--tau", "2", "--beta",
            "3", "--edge-prob", "0.3", "--seed", seed,
        ],
    )
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for (out, seed) in [("a", "4"), ("b", "4"), ("c", "5")] {
        let res = simulate_small(dir.path(), out, seed);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
    }
    for file in ["events.csv", "graph.csv", "params.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        let c = fs::read(dir.path().join("c").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
        assert_ne!(a, c, "{file}");
    }
}

#[test]
fn manifests_record_inputs_seed_and_output_digest() {
    let dir = tempfile::tempdir().unwrap();
    let truth = fixtures().join("truth.json");
    let res = mic(
        dir.path(),
        &["simulate", "--params", truth.to_str().unwrap(), "--out-dir", "sim", "--T", "20", "--seed", "9"],
    );
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("sim/events.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["args"][0], "mic");
    assert_eq!(manifest["inputs"][0]["sha256"], sha256_hex(&fs::read(&truth).unwrap()));
    let events = fs::read(dir.path().join("sim/events.csv")).unwrap();
    assert_eq!(manifest["output_sha256"], sha256_hex(&events));
    assert!(manifest["version"].is_string());
}

#[test]
fn parameters_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_small(dir.path(), "a", "1")), 0);
    let first = dir.path().join("a/params.json");
    let res = mic(dir.path(), &["simulate", "--params", "a/params.json", "--out-dir", "b", "--T", "5"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let second = dir.path().join("b/params.json");
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    assert_eq!(read_params(&first).unwrap(), read_params(&second).unwrap());
}

#[test]
fn durations_accept_units() {
    let dir = tempfile::tempdir().unwrap();
    let res = mic(
        dir.path(),
        &["simulate", "--out-dir", "s", "--users", "3", "--cascades", "1", "--T", "1h", "--tau", "6min", "--mu-max", "0.001"],
    );
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let params = read_params(&dir.path().join("s/params.json")).unwrap();
    assert_eq!(params.kernel.tau, 360.0);
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mic(dir.path(), &["simulate", "--no-such-flag"])), 2);
    assert_eq!(code(&mic(dir.path(), &["simulate", "--out-dir", "x", "--tau", "3 weeks"])), 2);
    let res = mic(dir.path(), &["simulate", "--out-dir", "x", "--mixing", "boltzmann"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--beta"));
    assert_eq!(code(&mic(dir.path(), &["--help"])), 0);
}

#[test]
fn malformed_data_exits_with_3_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("bad.csv"), "user,cascade,timestamp\n0,0,1.0\n1,0,oops\n").unwrap();
    fs::write(p.join("g.csv"), "src,dst\n0,1\n").unwrap();
    let res = mic(p, &["fit", "--events", "bad.csv", "--graph", "g.csv", "--tau", "1", "--out", "f.json"]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
    assert!(stderr(&res).contains("bad.csv:3:"), "{}", stderr(&res));

    fs::write(p.join("ok.csv"), "user,cascade,timestamp\n0,0,1.0\n1,0,2.0\n").unwrap();
    fs::write(p.join("neg.csv"), "src,dst,weight\n0,1,0.5\n1,0,-0.2\n").unwrap();
    let res = mic(p, &["fit", "--events", "ok.csv", "--graph", "neg.csv", "--tau", "1", "--out", "f.json"]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));

    fs::write(p.join("hdr.csv"), "who,what,when\n0,0,1\n").unwrap();
    let res = mic(p, &["fit", "--events", "hdr.csv", "--graph", "g.csv", "--tau", "1", "--out", "f.json"]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
    assert!(!p.join("f.json").exists());
}

#[test]
fn dangling_graph_ids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("ok.csv"), "user,cascade,timestamp\n0,0,1.0\n1,0,2.0\n").unwrap();
    fs::write(p.join("g.csv"), "src,dst\n0,1\n1,7\n").unwrap();
    let res = mic(
        p,
        &["fit", "--events", "ok.csv", "--graph", "g.csv", "--users", "2", "--tau", "1", "--out", "f.json"],
    );
    assert_ne!(code(&res), 0);
    assert!(stderr(&res).contains('7'), "{}", stderr(&res));
}

#[test]
fn singular_moment_system_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    // τ w = 1 on a self-loop: I − τWᵀ is singular
    let doc = r#"{"schema":"mic.params/1","n_users":1,"n_cascades":1,"kernel":{"tau":2.0},
        "mixing":{"kind":"linear"},"baseline":[[0.1]],"interaction":[[1.0]],
        "influence":[{"src":0,"dst":0,"weight":0.5}]}"#;
    fs::write(dir.path().join("p.json"), doc).unwrap();
    let res = mic(dir.path(), &["moments", "--params", "p.json", "--out", "m.json"]);
    assert_eq!(code(&res), 4, "{}", stderr(&res));
}

#[test]
fn moments_report_per_cascade_system_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let truth = fixtures().join("truth.json");
    let res = mic(
        dir.path(),
        &["moments", "--params", truth.to_str().unwrap(), "--times", "0,10,1min", "--per-cascade-ode", "--out", "m.json"],
    );
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(doc["times"], serde_json::json!([0.0, 10.0, 60.0]));
    assert_eq!(doc["expected_intensity"].as_array().unwrap().len(), 5);
    assert_eq!(doc["per_cascade_ode"][0].as_array().unwrap().len(), 2);
    assert_eq!(doc["expected_counts"][0][0], 0.0);
}

#[test]
fn fit_variants_write_params_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let events = fixtures().join("events.csv");
    let graph = fixtures().join("graph.csv");
    let (events, graph) = (events.to_str().unwrap(), graph.to_str().unwrap());
    for variant in ["mic", "linmic", "ic", "cc"] {
        let out = format!("{variant}.json");
        let mut args = vec!["fit", "--events", events, "--graph", graph, "--tau", "3", "--variant", variant, "--out", &out];
        if variant == "mic" || variant == "cc" {
            args.extend(["--beta", "2"]);
        }
        let res = mic(dir.path(), &args);
        assert_eq!(code(&res), 0, "{variant}: {}", stderr(&res));
        let params = read_params(&dir.path().join(&out)).unwrap();
        if variant == "ic" || variant == "cc" {
            assert!(params.has_identity_interaction());
        }
        let traj: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join(format!("{variant}.trajectory.json"))).unwrap()).unwrap();
        let values: Vec<f64> = traj["trajectory"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{values:?}");
    }
    let res = mic(dir.path(), &["fit", "--events", events, "--graph", graph, "--tau", "3", "--variant", "cc", "--out", "x.json"]);
    assert_eq!(code(&res), 2);
}

#[test]
fn sweep_resumes_and_reports_replication_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--betas", "1", "--sigmas", "0,1", "--replications", "2", "--users", "5", "--edge-prob", "0.3",
        "--horizon", "60", "--out", "table.json",
    ];
    let res = mic(dir.path(), &args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let journal = fs::read_to_string(dir.path().join("table.jsonl")).unwrap();
    assert_eq!(journal.lines().count(), 4);
    let table = fs::read(dir.path().join("table.json")).unwrap();

    let res = mic(dir.path(), &args);
    assert_eq!(code(&res), 0);
    assert_eq!(fs::read_to_string(dir.path().join("table.jsonl")).unwrap(), journal);
    assert_eq!(fs::read(dir.path().join("table.json")).unwrap(), table);
    let doc: serde_json::Value = serde_json::from_slice(&table).unwrap();
    for cell in doc["cells"].as_array().unwrap() {
        assert_eq!(cell["replications"].as_u64().unwrap() + cell["failures"].as_u64().unwrap(), 2);
    }
}
