//! Subcommands behind the `blpv` binary: `generate`, `identify`, `evaluate`
//! and `benchmark`.
//!
//! Every command that writes files also writes a `<output>.manifest.json`
//! next to its primary output, listing the config snapshot, seed, inputs and
//! outputs with their SHA-256 digests. All of it, manifest included, is
//! byte-for-byte reproducible for a fixed config, seed and output path.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::eval::{snr_db, split, Score};
use crate::io::{self, fmt_real, ResultFile};
use crate::math::mean;
use crate::model::{benchmark_generator, BenchmarkPlant, Dataset};
use crate::qsvbw::{self, Orientation, QsvbwConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_samples: usize,
    pub snr_db: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_samples: 500,
            snr_db: 21.57,
        }
    }
}

/// JSON config shared by all subcommands. Missing fields take the defaults of
/// the reference benchmark pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed: drives data generation and is copied into the identifier.
    pub seed: u64,
    pub generator: GeneratorConfig,
    /// Length of the training prefix; `None` uses the first half.
    pub n_train: Option<usize>,
    pub identify: QsvbwConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            generator: GeneratorConfig::default(),
            n_train: None,
            identify: QsvbwConfig {
                orientation: Orientation::GainIncreasing,
                restarts: 8,
                ..QsvbwConfig::default()
            },
        }
    }
}

impl PipelineConfig {
    /// Reads a config file; fields it leaves out, at any nesting depth, keep
    /// their pipeline defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::from_json(&fs::read(p)?),
            None => Ok(Self::default()),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let overrides: serde_json::Value = serde_json::from_slice(bytes)?;
        if !overrides.is_object() {
            return Err(invalid("config must be a JSON object"));
        }
        let mut merged = serde_json::to_value(Self::default())?;
        merge_json(&mut merged, overrides);
        let cfg: Self = serde_json::from_value(merged)?;
        cfg.identify.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.identify.seed = self.seed;
        self
    }

    fn train_len(&self, n: usize) -> Result<usize> {
        let n_train = self.n_train.unwrap_or(n / 2);
        if n_train == 0 || n_train > n {
            return Err(invalid(format!("n_train {n_train} out of range for {n} samples")));
        }
        Ok(n_train)
    }
}

fn merge_json(base: &mut serde_json::Value, overrides: serde_json::Value) {
    match (base, overrides) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[derive(Debug, Parser)]
#[command(name = "blpv", version, about = "Blind identification of LPV-FIR systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON pipeline config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark dataset (CSV).
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Identify a model from a dataset (result JSON + log-likelihood trace CSV).
    Identify {
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an identification result on the held-out part of a dataset.
    Evaluate {
        result: PathBuf,
        dataset: PathBuf,
        /// The dataset comes from the benchmark plant: also score against
        /// its noise-free output, recomputed from the `p` column.
        #[arg(long)]
        benchmark_truth: bool,
        /// Write the score JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, identify and evaluate for several seeds.
    Benchmark {
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub version: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&fs::read(path)?),
    })
}

/// Writes `bytes` and re-reads the file to confirm the content landed intact.
fn write_verified(path: &Path, bytes: &[u8]) -> Result<FileDigest> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    let digest = digest_file(path)?;
    if digest.sha256 != sha256_hex(bytes) {
        return Err(Error::Io(std::io::Error::other(format!(
            "verification failed for {}",
            path.display()
        ))));
    }
    Ok(digest)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn trace_path(out: &Path) -> PathBuf {
    out.with_extension("trace.csv")
}

struct ManifestBuilder {
    command: &'static str,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl ManifestBuilder {
    fn new<C: Serialize>(command: &'static str, config: &C, seeds: Vec<u64>) -> Result<Self> {
        Ok(Self {
            command,
            config: serde_json::to_value(config)?,
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn finish(self, path: &Path) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.config,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        write_verified(path, &io::to_json_bytes(&manifest)?)?;
        Ok(manifest)
    }
}

pub fn cmd_generate(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    let data = benchmark_generator(cfg.generator.n_samples, cfg.generator.snr_db, cfg.seed)?;
    let mut mb = ManifestBuilder::new("generate", cfg, vec![cfg.seed])?;
    mb.outputs.push(write_verified(out, &io::dataset_to_csv(&data)?)?);
    mb.finish(&manifest_path(out))
}

pub fn cmd_identify(dataset: &Path, cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    let data = io::read_dataset(dataset)?;
    let n_train = cfg.train_len(data.len())?;
    let train = if n_train < data.len() {
        split(&data, n_train)?.0
    } else {
        data
    };
    let result = qsvbw::run(&train, &cfg.identify)?;
    log::info!(
        "degree {} after {} iterations, final loglik {:.4}",
        result.chosen_degree,
        result.iterations_run,
        result.loglik_trace.last().copied().unwrap_or(f64::NAN)
    );

    let mut mb = ManifestBuilder::new("identify", cfg, vec![cfg.seed])?;
    mb.inputs.push(digest_file(dataset)?);
    let file = ResultFile::from_result(&result, Some(n_train));
    mb.outputs.push(write_verified(out, &io::to_json_bytes(&file)?)?);

    let mut trace = String::from("iteration,loglik\n");
    for (i, ll) in result.loglik_trace.iter().enumerate() {
        trace.push_str(&format!("{},{}\n", i + 1, fmt_real(*ll)));
    }
    mb.outputs.push(write_verified(&trace_path(out), trace.as_bytes())?);
    mb.finish(&manifest_path(out))
}

/// First sample of the held-out part of `data` according to the result's
/// training length; 0 when the result was fitted on the whole record.
fn held_out_start(data: &Dataset, n_train: Option<usize>) -> Result<usize> {
    match n_train {
        Some(n) if n < data.len() => Ok(n),
        Some(n) if n > data.len() => Err(invalid(format!(
            "result was trained on {n} samples but the dataset has {}",
            data.len()
        ))),
        _ => Ok(0),
    }
}

/// Scores a result on the held-out samples of `data`. Regressors of the
/// held-out samples use the measured inputs that precede them.
pub fn evaluate(result: &ResultFile, data: &Dataset, benchmark_truth: bool) -> Result<Score> {
    let model = result.model()?;
    let start = held_out_start(data, result.n_train)?;
    let clean = match (&data.p_true, benchmark_truth) {
        (Some(p), true) => Some(BenchmarkPlant::clean_output(&data.u, p)),
        (None, true) => return Err(invalid("benchmark truth requested but the dataset has no p column")),
        _ => None,
    };
    let mut score = model.score_from(data, start, clean.as_ref().map(|c| &c[start..]))?;
    if let Some(clean) = &clean {
        let noise: Vec<f64> = data.y.iter().zip(clean).map(|(y, c)| y - c).collect();
        score.snr_db = snr_db(clean, &noise).ok();
    }
    Ok(score)
}

pub fn cmd_evaluate(
    result_path: &Path,
    dataset: &Path,
    benchmark_truth: bool,
    out: Option<&Path>,
) -> Result<Score> {
    let result: ResultFile = io::read_json(result_path)?;
    let data = io::read_dataset(dataset)?;
    let score = evaluate(&result, &data, benchmark_truth)?;
    match out {
        Some(out) => {
            let mut mb = ManifestBuilder::new("evaluate", &serde_json::json!({ "benchmark_truth": benchmark_truth }), vec![])?;
            mb.inputs.push(digest_file(result_path)?);
            mb.inputs.push(digest_file(dataset)?);
            mb.outputs.push(write_verified(out, &io::to_json_bytes(&score)?)?);
            mb.finish(&manifest_path(out))?;
        }
        None => println!("{}", serde_json::to_string_pretty(&score)?),
    }
    Ok(score)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub chosen_degree: usize,
    pub iterations_run: usize,
    pub score: Score,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> Option<MeanStd> {
    if xs.is_empty() {
        return None;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    Some(MeanStd { mean: m, std: var.sqrt() })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub seeds: Vec<SeedReport>,
    pub bfr_output: Option<MeanStd>,
    pub bfr_output_noise_free: Option<MeanStd>,
    pub bfr_scheduling: Option<MeanStd>,
    pub state_accuracy: Option<MeanStd>,
}

impl BenchmarkSummary {
    pub fn from_reports(seeds: Vec<SeedReport>) -> Self {
        let collect = |f: &dyn Fn(&Score) -> Option<f64>| -> Vec<f64> {
            seeds.iter().filter_map(|r| f(&r.score)).collect()
        };
        Self {
            bfr_output: mean_std(&collect(&|s| Some(s.bfr_output))),
            bfr_output_noise_free: mean_std(&collect(&|s| s.bfr_output_noise_free)),
            bfr_scheduling: mean_std(&collect(&|s| s.bfr_scheduling)),
            state_accuracy: mean_std(&collect(&|s| s.state_accuracy)),
            seeds,
        }
    }
}

/// One seed of the benchmark pipeline, in memory.
pub struct BenchmarkRun {
    pub data: Dataset,
    pub result: ResultFile,
    pub score: Score,
    /// Plot-ready test-set series `k,y,y_clean,y_hat,p,p_hat`, `k` indexing the
    /// full record.
    pub series_csv: Vec<u8>,
}

pub fn benchmark_seed(cfg: &PipelineConfig, seed: u64) -> Result<BenchmarkRun> {
    let cfg = cfg.clone().with_seed(Some(seed));
    let data = benchmark_generator(cfg.generator.n_samples, cfg.generator.snr_db, seed)?;
    let n_train = cfg.train_len(data.len())?;
    if n_train >= data.len() {
        return Err(invalid("benchmark needs a non-empty test part"));
    }
    let (train, _) = split(&data, n_train)?;
    let result = qsvbw::run(&train, &cfg.identify)?;
    let file = ResultFile::from_result(&result, Some(n_train));
    let score = evaluate(&file, &data, true)?;

    let dec = file.model()?.decode_from(&data, n_train)?;
    let p = data.p_true.as_ref().expect("benchmark data carries its path");
    let clean = BenchmarkPlant::clean_output(&data.u, p);
    let mut series = String::from("k,y,y_clean,y_hat,p,p_hat\n");
    for (i, k) in (n_train..data.len()).enumerate() {
        series.push_str(&format!(
            "{},{},{},{},{},{}\n",
            k + 1,
            fmt_real(data.y[k]),
            fmt_real(clean[k]),
            fmt_real(dec.y_hat[i]),
            fmt_real(p[k]),
            fmt_real(dec.path[i]),
        ));
    }
    Ok(BenchmarkRun {
        data,
        result: file,
        score,
        series_csv: series.into_bytes(),
    })
}

pub fn cmd_benchmark(seeds: &[u64], cfg: &PipelineConfig, out_dir: &Path) -> Result<BenchmarkSummary> {
    if seeds.is_empty() {
        return Err(invalid("at least one seed is required"));
    }
    fs::create_dir_all(out_dir)?;
    let runs: Vec<Result<(u64, BenchmarkRun)>> = seeds
        .par_iter()
        .map(|&s| benchmark_seed(cfg, s).map(|r| (s, r)))
        .collect();

    let mut mb = ManifestBuilder::new("benchmark", cfg, seeds.to_vec())?;
    let mut reports = Vec::with_capacity(seeds.len());
    for run in runs {
        let (seed, run) = run?;
        let dir = out_dir.join(format!("seed_{seed}"));
        mb.outputs.push(write_verified(&dir.join("dataset.csv"), &io::dataset_to_csv(&run.data)?)?);
        mb.outputs.push(write_verified(&dir.join("result.json"), &io::to_json_bytes(&run.result)?)?);
        mb.outputs.push(write_verified(&dir.join("score.json"), &io::to_json_bytes(&run.score)?)?);
        mb.outputs.push(write_verified(&dir.join("series.csv"), &run.series_csv)?);
        reports.push(SeedReport {
            seed,
            chosen_degree: run.result.chosen_degree,
            iterations_run: run.result.iterations_run,
            score: run.score,
        });
    }
    let summary = BenchmarkSummary::from_reports(reports);
    let summary_path = out_dir.join("summary.json");
    mb.outputs.push(write_verified(&summary_path, &io::to_json_bytes(&summary)?)?);
    mb.finish(&manifest_path(&summary_path))?;
    Ok(summary)
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, out } => {
            let cfg = PipelineConfig::load(common.config.as_deref())?.with_seed(common.seed);
            cmd_generate(&cfg, &out)?;
        }
        Command::Identify { dataset, common, out } => {
            let cfg = PipelineConfig::load(common.config.as_deref())?.with_seed(common.seed);
            cmd_identify(&dataset, &cfg, &out)?;
        }
        Command::Evaluate {
            result,
            dataset,
            benchmark_truth,
            out,
        } => {
            cmd_evaluate(&result, &dataset, benchmark_truth, out.as_deref())?;
        }
        Command::Benchmark { seeds, config, out } => {
            let cfg = PipelineConfig::load(config.as_deref())?;
            let summary = cmd_benchmark(&seeds, &cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(())
}

/// Machine-readable error object printed on failure.
pub fn error_object(err: &Error) -> serde_json::Value {
    serde_json::json!({ "error": { "kind": err.kind(), "message": err.to_string() } })
}
