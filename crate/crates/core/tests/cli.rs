use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blpv::cli::{self, manifest_path, trace_path, BenchmarkSummary, PipelineConfig, RunManifest};
use blpv::eval::{bfr, snr_db, Score};
use blpv::io::{self, ResultFile};
use blpv::model::{benchmark_generator, BenchmarkPlant, Dataset, SchedulingGrid};
use blpv::qsvbw::DegreeScore;
use tempfile::TempDir;

const QUICK: &str = r#"{
  "generator": {"n_samples": 160},
  "identify": {
    "degree_candidates": [2],
    "max_iters": 15,
    "restarts": 1,
    "swarm": {"n_particles": 10, "n_iters": 10}
  }
}"#;

fn blpv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blpv"))
        .args(args)
        .env("BLPV_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr);
    let obj: serde_json::Value = serde_json::from_str(line.trim()).expect("stderr is one JSON object");
    assert!(obj["error"]["message"].is_string());
    obj["error"]["kind"].as_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn quick_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, QUICK).unwrap();
    path
}

/// Every output listed in a manifest exists and hashes to the recorded value.
fn check_manifest(path: &Path) -> RunManifest {
    let m: RunManifest = io::read_json(path).unwrap();
    assert!(!m.outputs.is_empty());
    for d in m.outputs.iter().chain(&m.inputs) {
        assert_eq!(cli::sha256_hex(&fs::read(&d.path).unwrap()), d.sha256, "{}", d.path);
    }
    m
}

#[test]
fn generate_identify_evaluate_round_trip_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path());
    let data = tmp.path().join("data.csv");
    let result = tmp.path().join("result.json");
    let score = tmp.path().join("score.json");

    let mut snapshots = Vec::new();
    for _ in 0..2 {
        ok(&blpv(&["generate", "--config", s(&cfg), "--seed", "7", "--out", s(&data)]));
        ok(&blpv(&["identify", s(&data), "--config", s(&cfg), "--seed", "7", "--out", s(&result)]));
        ok(&blpv(&["evaluate", s(&result), s(&data), "--benchmark-truth", "--out", s(&score)]));
        let files = [
            data.clone(),
            manifest_path(&data),
            result.clone(),
            trace_path(&result),
            manifest_path(&result),
            score.clone(),
            manifest_path(&score),
        ];
        snapshots.push(files.iter().map(|f| fs::read(f).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(snapshots[0], snapshots[1]);

    let m = check_manifest(&manifest_path(&data));
    assert_eq!((m.command.as_str(), m.seeds.as_slice()), ("generate", &[7][..]));
    assert_eq!(m.config["seed"], 7);
    let m = check_manifest(&manifest_path(&result));
    assert_eq!(m.inputs.len(), 1);
    assert_eq!(m.outputs.len(), 2);
    check_manifest(&manifest_path(&score));

    let res: ResultFile = io::read_json(&result).unwrap();
    assert_eq!(res.n_train, Some(80));
    assert_eq!(res.path.len(), 80);
    let trace = fs::read_to_string(trace_path(&result)).unwrap();
    assert_eq!(trace.lines().next(), Some("iteration,loglik"));
    assert_eq!(trace.lines().count(), res.loglik_trace.len() + 1);

    let sc: Score = io::read_json(&score).unwrap();
    assert!(sc.bfr_output_noise_free.is_some() && sc.bfr_scheduling.is_some());
    assert!((sc.snr_db.unwrap() - 21.57).abs() < 0.1);

    // stdout form carries the same numbers
    let out = blpv(&["evaluate", s(&result), s(&data), "--benchmark-truth"]);
    ok(&out);
    let printed: Score = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, sc);
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"seed": 3, "generator": {"n_samples": 50}}"#).unwrap();
    let (a, b, c) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"), tmp.path().join("c.csv"));
    ok(&blpv(&["generate", "--config", s(&cfg), "--out", s(&a)]));
    ok(&blpv(&["generate", "--config", s(&cfg), "--seed", "3", "--out", s(&b)]));
    ok(&blpv(&["generate", "--config", s(&cfg), "--seed", "4", "--out", s(&c)]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert_eq!(io::read_dataset(&a).unwrap(), benchmark_generator(50, 21.57, 3).unwrap().with_seed_cleared());
}

trait ClearSeed {
    fn with_seed_cleared(self) -> Self;
}

impl ClearSeed for Dataset {
    /// The CSV does not carry the generator seed.
    fn with_seed_cleared(mut self) -> Self {
        self.seed = None;
        self
    }
}

#[test]
fn benchmark_with_one_seed_summarizes_that_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path());
    let out_dir = tmp.path().join("bench");
    let out = blpv(&["benchmark", "--seeds", "5", "--config", s(&cfg), "--out", s(&out_dir)]);
    ok(&out);
    let summary: BenchmarkSummary = io::read_json(&out_dir.join("summary.json")).unwrap();
    let score: Score = io::read_json(&out_dir.join("seed_5/score.json")).unwrap();
    assert_eq!(summary.seeds.len(), 1);
    assert_eq!(summary.seeds[0].score, score);
    let nf = summary.bfr_output_noise_free.unwrap();
    assert_eq!((nf.mean, nf.std), (score.bfr_output_noise_free.unwrap(), 0.0));

    let series = fs::read_to_string(out_dir.join("seed_5/series.csv")).unwrap();
    assert_eq!(series.lines().next(), Some("k,y,y_clean,y_hat,p,p_hat"));
    assert_eq!(series.lines().count(), 80 + 1);
    assert!(series.lines().nth(1).unwrap().starts_with("81,"));

    let m = check_manifest(&manifest_path(&out_dir.join("summary.json")));
    assert_eq!(m.outputs.len(), 5);
    assert_eq!(m.seeds, vec![5]);
}

#[test]
fn failures_exit_nonzero_with_a_json_error() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = tmp.path().join("r.json");

    assert_eq!(error_kind(&blpv(&["identify", s(&missing), "--out", s(&out)])), "io");
    assert!(!out.exists());

    let bad_csv = tmp.path().join("bad.csv");
    fs::write(&bad_csv, "k,u,y\n1,1.0,oops\n").unwrap();
    assert_eq!(error_kind(&blpv(&["identify", s(&bad_csv), "--out", s(&out)])), "invalid_input");

    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"identify": {"max_iter": 3}}"#).unwrap();
    assert_eq!(error_kind(&blpv(&["generate", "--config", s(&cfg), "--out", s(&out)])), "json");
    fs::write(&cfg, r#"{"identify": {"restarts": 0}}"#).unwrap();
    assert_eq!(error_kind(&blpv(&["generate", "--config", s(&cfg), "--out", s(&out)])), "invalid_input");
    fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(error_kind(&blpv(&["generate", "--config", s(&cfg), "--out", s(&out)])), "invalid_input");

    assert_eq!(error_kind(&blpv(&["benchmark", "--seeds", "1,x", "--out", s(tmp.path())])), "usage");
    assert_eq!(error_kind(&blpv(&["frobnicate"])), "usage");

    let data = tmp.path().join("d.csv");
    fs::write(&data, "k,u,y\n1,1,2\n2,0,1\n").unwrap();
    assert_eq!(error_kind(&blpv(&["evaluate", s(&out), s(&data), "--benchmark-truth"])), "io");
}

#[test]
fn partial_config_keeps_pipeline_defaults() {
    let cfg = PipelineConfig::from_json(br#"{"identify": {"max_iters": 3}}"#).unwrap();
    let defaults = PipelineConfig::default();
    assert_eq!(cfg.identify.max_iters, 3);
    assert_eq!(cfg.identify.restarts, defaults.identify.restarts);
    assert_eq!(cfg.identify.orientation, defaults.identify.orientation);
    assert_eq!(cfg.generator, defaults.generator);
}

/// A single-tap model whose gain `c` is the same at both levels: `y = c·u`.
fn scalar_result(c: f64, n_train: usize) -> ResultFile {
    ResultFile {
        h: vec![vec![c]],
        a: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        pi: vec![0.5, 0.5],
        sigma2: 0.01,
        path: vec![0.5; n_train],
        loglik_trace: vec![0.0],
        chosen_degree: 0,
        iterations_run: 1,
        n_taps: 1,
        grid: SchedulingGrid::new(vec![0.5, 1.0]).unwrap(),
        n_train: Some(n_train),
        degree_scores: Vec::<DegreeScore>::new(),
    }
}

#[test]
fn perfect_and_mean_predictors_score_the_extremes() {
    let u: Vec<f64> = (0..20).map(|k| ((k * 7) % 5) as f64 - 1.0).collect();
    let y: Vec<f64> = u.iter().map(|x| 2.5 * x).collect();
    let data = Dataset::new(u, y).unwrap();
    let perfect = cli::evaluate(&scalar_result(2.5, 10), &data, false).unwrap();
    assert_eq!(perfect.bfr_output, 100.0);
    assert_eq!(perfect.bfr_scheduling, None);

    // constant input: the model output is the constant c, set to the test mean
    let test_y = [3.0, 1.0, 2.0, 6.0, -1.0];
    let mut y = vec![0.0; 5];
    y.extend(test_y);
    let data = Dataset::new(vec![1.0; 10], y).unwrap();
    let mean = test_y.iter().sum::<f64>() / 5.0;
    let flat = cli::evaluate(&scalar_result(mean, 5), &data, false).unwrap();
    assert!(flat.bfr_output.abs() < 1e-12);
}

#[test]
fn generator_noise_hits_the_requested_snr() {
    for seed in 0..10 {
        let data = benchmark_generator(500, 21.57, seed).unwrap();
        let p = data.p_true.as_ref().unwrap();
        let clean = BenchmarkPlant::clean_output(&data.u, p);
        let noise: Vec<f64> = data.y.iter().zip(&clean).map(|(y, c)| y - c).collect();
        assert!((snr_db(&clean, &noise).unwrap() - 21.57).abs() < 0.1);
        assert!(bfr(&clean, &data.y).unwrap() > 80.0);
    }
}
