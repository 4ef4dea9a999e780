use std::path::Path;
use std::process::{Command, Output};

fn furst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_furst")).args(args).env("FURST_THREADS", "2").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_verify_stats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for g in ["cantor_target", "train_track", "random"] {
        let out = dir.path().join(g);
        let o = furst(&["generate", "--generator", g, "--alpha", "0.5", "--beta", "0.5", "--k-min", "6", "--seeds", "3", "--out", p(&out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let run = out.join(format!("{g}_k06_s3"));
        assert_eq!(code(&furst(&["verify", p(&run)])), 0);
        let csv = dir.path().join(format!("{g}.csv"));
        let o = furst(&["stats", p(&run), "--csv", p(&csv)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["k"], 6);
        assert!(std::fs::read_to_string(&csv).unwrap().starts_with("name,k,measured,predicted,ratio"));
    }
}

#[test]
fn generation_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = furst(&["generate", "--generator", "random", "--alpha", "0.6", "--beta", "0.8", "--k-min", "6", "--out", p(&out)]);
        assert_eq!(code(&o), 0);
    }
    for file in ["manifest.json", "family.json", "r_sets/r_000000.bin.gz"] {
        let a = std::fs::read(dir.path().join("a/random_k06_s0").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b/random_k06_s0").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let write = |body: &str| std::fs::write(&cfg, body).unwrap();
    write(r#"{"generator":"cantor_target","alpha":0.5,"beta":0.5,"k_min":6,"k_max":7,"seeds":[],"out":"x"}"#);
    assert_eq!(code(&furst(&["generate", "--config", p(&cfg)])), 2);
    write(r#"{"generator":"cantor_target","alpha":0.5,"beta":0.5,"k_min":3,"k_max":7,"seeds":[1],"out":"x"}"#);
    assert_eq!(code(&furst(&["generate", "--config", p(&cfg)])), 2);
    write("{not json");
    assert_eq!(code(&furst(&["generate", "--config", p(&cfg)])), 2);
    assert_eq!(code(&furst(&["generate", "--generator", "nope", "--alpha", "0.5", "--beta", "0.5", "--k-min", "6", "--out", "x"])), 2);
    assert_eq!(code(&furst(&["frobnicate"])), 2);
}

#[test]
fn config_file_drives_generation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("runs");
    let body = serde_json::json!({
        "generator": "train_track", "alpha": 0.5, "beta": 1.0, "k_min": 5, "k_max": 6,
        "seeds": [1, 2], "out": out,
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    assert_eq!(code(&furst(&["generate", "--config", p(&cfg)])), 0);
    for run in ["train_track_k05_s1", "train_track_k05_s2", "train_track_k06_s1", "train_track_k06_s2"] {
        assert!(out.join(run).join("manifest.json").exists(), "{run}");
    }
}

#[test]
fn pipeline_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pipe");
    let o = furst(&["pipeline", "run", "--alpha", "0.4", "--beta", "0.8", "--k", "8", "--generator", "cantor_target", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace.json", "stages.csv", "e1.bin", "e2.bin", "e3.bin", "e_prime.bin", "psi_image.bin", "a.json", "a_star.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let trace: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["accounting"]["sound"], true);
    let stages = std::fs::read_to_string(out.join("stages.csv")).unwrap();
    assert!(stages.starts_with("stage,measured,predicted,ratio"));
}

#[test]
fn pipeline_rejects_alpha_above_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = furst(&["pipeline", "run", "--alpha", "0.7", "--beta", "0.7", "--k", "6", "--out", p(&dir.path().join("x"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn degenerate_pipeline_exits_with_three() {
    // A single parallel family has no related pair off the joining strip.
    let dir = tempfile::tempdir().unwrap();
    let o = furst(&["pipeline", "run", "--alpha", "0.3", "--beta", "0.2", "--k", "6", "--generator", "train_track", "--out", p(&dir.path().join("x"))]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = furst(&["sweep", "--generator", "cantor_target", "--alpha", "0.4", "--beta", "0.8", "--k-min", "6", "--k-max", "8", "--seeds", "0,1", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("generator,alpha,beta,k,seed,e_cells,e_measure,gamma_measured,appendix_ratio,pipeline,certified_bound,ratio_e,"));
    assert_eq!(csv.lines().count(), 7);
    assert!(out.join("fit.json").exists());
    let o = furst(&["fit", p(&out.join("sweep.csv"))]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("a+min(b,a)") && text.contains("2a"), "{text}");
}

#[test]
fn one_scale_sweep_refuses_to_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = furst(&["sweep", "--generator", "random", "--alpha", "0.5", "--beta", "0.5", "--k-min", "6", "--seeds", "0,1", "--no-pipeline", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient data"));
    assert!(!out.join("fit.json").exists());
    assert_eq!(code(&furst(&["fit", p(&out.join("sweep.csv"))])), 2);
}

#[test]
fn fit_recovers_exact_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("synthetic.csv");
    let mut body = String::from("alpha,beta,k,e_measure\n");
    for k in 5..=9 {
        // |E| = 3·δ^{0.75}, dimension 1.25.
        body += &format!("0.5,0.5,{k},{}\n", 3.0 * 2f64.powf(-0.75 * k as f64));
    }
    std::fs::write(&csv, body).unwrap();
    let json = dir.path().join("fit.json");
    assert_eq!(code(&furst(&["fit", p(&csv), "--out", p(&json)])), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert!((v["fit"]["dimension"].as_f64().unwrap() - 1.25).abs() < 1e-12);
    assert!(v["fit"]["residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn malformed_csv_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "alpha,beta,k,e_measure\n0.5,0.5,six,0.1\n").unwrap();
    let o = furst(&["fit", p(&csv)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1"));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_furst")).args(["fit", "x.csv"]).env("FURST_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 2);
}
