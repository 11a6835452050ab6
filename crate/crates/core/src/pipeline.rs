//! Deterministic end-to-end runs.
//!
//! A [`RunConfig`] (TOML file plus CLI overrides) drives six pipelines:
//!
//! - `simulate` — draw a network and dump the edge list with ground truth;
//! - `moments` — expected interaction/edge/node counts for the configured
//!   hyperparameters;
//! - `fit` — the two-stage posterior sampler with trace and estimate
//!   artifacts;
//! - `predict` — time split, fit on the training part, predict the test
//!   window with one model;
//! - `evaluate` — the same split scored for every requested model;
//! - `degrees` — posterior-predictive degree envelope from a fitted model.
//!
//! Runs are reproducible: the same seed and configuration produce
//! byte-identical artifacts. Every emitted file carries the software version
//! and a configuration hash (the hash covers everything that affects
//! numbers; the output directory is excluded). Artifacts land in one
//! directory per run, one subdirectory per stage, and are listed in a
//! `manifest.json`. A failing stage reports its name and leaves earlier
//! artifacts in place.

use crate::dataset::{binary_projection, InteractionDataset};
use crate::error::{Error, Result};
use crate::generator::{generate, GeneratorConfig};
use crate::hawkes::KernelParams;
use crate::inference::{
    mbr_point_estimate, run_stage1, run_stage2, PointEstimate, Stage1Config, Stage1Samples,
    Stage2Config, Stage2Data, Stage2Samples,
};
use crate::io::{parse_edge_list, write_edge_list, EdgeListSpec};
use crate::measures::{CcrmHyper, GgpHyper, DEFAULT_TRUNCATION};
use crate::moments::{expected_interactions, expected_edges, expected_nodes, MomentEstimate, MomentMethod};
use crate::predict::{
    evaluate_fitted, fit_model, posterior_predictive_degrees, split_by_time, DegreeEnvelope,
    FitConfig, FittedModel, ModelKind, PredictMethod, PredictionReport, SplitDataset,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// The six pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Moments,
    Fit,
    Predict,
    Evaluate,
    Degrees,
}

impl Command {
    pub fn tag(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Moments => "moments",
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Evaluate => "evaluate",
            Command::Degrees => "degrees",
        }
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(Command::Simulate),
            "moments" => Ok(Command::Moments),
            "fit" => Ok(Command::Fit),
            "predict" => Ok(Command::Predict),
            "evaluate" => Ok(Command::Evaluate),
            "degrees" => Ok(Command::Degrees),
            other => Err(Error::Config(format!("unknown command `{other}`"))),
        }
    }
}

/// Ground-truth parameters: the generator model behind `simulate`,
/// `moments`, and the synthetic data source of the fitting pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub sigma: f64,
    pub tau: f64,
    /// Community score shapes; empty means 1 for every community.
    pub a: Vec<f64>,
    /// Community score rates; empty means 1 for every community.
    pub b: Vec<f64>,
    pub eta: f64,
    pub delta: f64,
    pub horizon: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            alpha: 3.0,
            sigma: -0.5,
            tau: 1.0,
            a: Vec::new(),
            b: Vec::new(),
            eta: 0.5,
            delta: 2.0,
            horizon: 5.0,
        }
    }
}

/// Where to read observed data. Without this section the fitting pipelines
/// generate their dataset from [`ModelSection`] under the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub path: PathBuf,
    /// Column order, e.g. `"src,dst,time"`.
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default)]
    pub delimiter: Option<char>,
    #[serde(default = "one")]
    pub time_scale: f64,
    #[serde(default = "yes")]
    pub zero_base: bool,
}

fn default_format() -> String {
    "src,dst,time".into()
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl InputSection {
    /// Points at an edge list with the default column layout.
    pub fn new(path: impl Into<PathBuf>) -> Self {
        InputSection {
            path: path.into(),
            format: default_format(),
            delimiter: None,
            time_scale: one(),
            zero_base: yes(),
        }
    }

    fn spec(&self) -> Result<EdgeListSpec> {
        let spec = EdgeListSpec {
            columns: EdgeListSpec::parse_columns(&self.format)?,
            delimiter: self.delimiter,
            time_scale: self.time_scale,
            zero_base: self.zero_base,
            comment: Some('#'),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Prediction settings shared by `predict` and `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// `"analytic"` or `"simulate"`.
    pub method: String,
    /// Forward-simulation replicates in `simulate` mode.
    pub replicates: usize,
    /// Models scored by `evaluate`; `predict` uses the first entry.
    pub models: Vec<ModelKind>,
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection {
            method: "analytic".into(),
            replicates: 100,
            models: ModelKind::ALL.to_vec(),
        }
    }
}

impl PredictSection {
    fn method(&self) -> Result<PredictMethod> {
        match self.method.as_str() {
            "analytic" => Ok(PredictMethod::Analytic),
            "simulate" => Ok(PredictMethod::Simulate { replicates: self.replicates }),
            other => Err(Error::Config(format!(
                "unknown prediction method `{other}` (expected analytic or simulate)"
            ))),
        }
    }
}

/// Moment-calculator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsSection {
    /// Monte Carlo sample count (used when p > 1 or when forced).
    pub mc_samples: usize,
    /// Use Monte Carlo even for p = 1 (where quadrature is available).
    pub force_monte_carlo: bool,
}

impl Default for MomentsSection {
    fn default() -> Self {
        MomentsSection { mc_samples: 20_000, force_monte_carlo: false }
    }
}

/// One run's full configuration. Defaults follow the experimental settings
/// the samplers were tuned at: 100k stage-1 sweeps, 10k stage-2 sweeps, two
/// chains, an 85% training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Number of latent communities (generator and fit).
    pub p: usize,
    /// Training fraction of the temporal split.
    pub split: f64,
    pub chains: usize,
    pub iters_stage1: usize,
    pub iters_stage2: usize,
    /// Jump truncation level for infinite-activity measures.
    pub truncation: f64,
    /// Replicate networks behind the `degrees` envelope.
    pub degrees_replicates: usize,
    pub model: ModelSection,
    pub input: Option<InputSection>,
    pub predict: PredictSection,
    pub moments: MomentsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out_dir: PathBuf::from("runs/out"),
            p: 1,
            split: 0.85,
            chains: 2,
            iters_stage1: 100_000,
            iters_stage2: 10_000,
            truncation: DEFAULT_TRUNCATION,
            degrees_replicates: 50,
            model: ModelSection::default(),
            input: None,
            predict: PredictSection::default(),
            moments: MomentsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::invalid("p", 0.0, "at least one community required"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::invalid("split", self.split, "must lie strictly between 0 and 1"));
        }
        if self.predict.models.is_empty() {
            return Err(Error::Config("predict.models must not be empty".into()));
        }
        self.predict.method()?;
        self.scores()?;
        self.stage1_config()?;
        self.stage2_config()?;
        Ok(())
    }

    /// SHA-256 over the canonical TOML rendering, with the output directory
    /// blanked so relocating a run does not change its identity.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        let text = toml::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = std::fmt::Write::write_fmt(&mut hex, format_args!("{byte:02x}"));
        }
        hex
    }

    /// Community score hyperparameters, broadcasting scalars to `p`.
    fn scores(&self) -> Result<CcrmHyper> {
        let expand = |v: &Vec<f64>, name: &'static str| -> Result<Vec<f64>> {
            match v.len() {
                0 => Ok(vec![1.0; self.p]),
                1 => Ok(vec![v[0]; self.p]),
                n if n == self.p => Ok(v.clone()),
                n => Err(Error::DimensionMismatch { what: name, expected: self.p, got: n }),
            }
        };
        CcrmHyper::new(
            expand(&self.model.a, "model.a")?,
            expand(&self.model.b, "model.b")?,
        )
    }

    fn generator_config(&self) -> Result<GeneratorConfig> {
        let mut cfg = GeneratorConfig::new(
            GgpHyper::new(self.model.alpha, self.model.sigma, self.model.tau)?,
            self.scores()?,
            KernelParams::new(self.model.eta, self.model.delta)?,
            self.model.horizon,
        )?;
        cfg.truncation = self.truncation;
        Ok(cfg)
    }

    fn stage1_config(&self) -> Result<Stage1Config> {
        let mut cfg = Stage1Config::new(self.p, self.iters_stage1)?;
        cfg.chains = self.chains;
        cfg.truncation = self.truncation;
        Ok(cfg)
    }

    fn stage2_config(&self) -> Result<Stage2Config> {
        let mut cfg = Stage2Config::new(self.iters_stage2)?;
        cfg.chains = self.chains;
        Ok(cfg)
    }

    fn fit_config(&self) -> Result<FitConfig> {
        Ok(FitConfig { stage1: self.stage1_config()?, stage2: self.stage2_config()? })
    }
}

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Artifact paths relative to the run directory.
    pub artifacts: Vec<String>,
}

/// Dispatches one pipeline run.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Manifest> {
    match command {
        Command::Simulate => run_simulate(cfg),
        Command::Moments => run_moments(cfg),
        Command::Fit => run_fit(cfg),
        Command::Predict => run_predict(cfg),
        Command::Evaluate => run_evaluate(cfg),
        Command::Degrees => run_degrees(cfg),
    }
}

// ---------------------------------------------------------------------------
// Artifact plumbing
// ---------------------------------------------------------------------------

/// Collects artifacts under the run directory and stamps every file with
/// the version/config header.
struct Emitter<'a> {
    cfg: &'a RunConfig,
    hash: String,
    artifacts: Vec<String>,
}

/// Version + config-hash block embedded in JSON artifacts.
#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    version: String,
    config: String,
}

#[derive(Serialize)]
struct JsonArtifact<'a, T: Serialize> {
    meta: Meta,
    report: &'a T,
}

impl<'a> Emitter<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.out_dir)?;
        Ok(Emitter { cfg, hash: cfg.config_hash(), artifacts: Vec::new() })
    }

    fn header(&self) -> Vec<String> {
        vec![
            format!("hawkes-ccrm {}", env!("CARGO_PKG_VERSION")),
            format!("config {}", self.hash),
        ]
    }

    fn target(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.cfg.out_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.artifacts.push(rel.to_string());
        Ok(path)
    }

    fn write_csv(&mut self, rel: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut out = String::new();
        for line in self.header() {
            out.push_str("# ");
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&columns.join(","));
        out.push('\n');
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(self.target(rel)?, out)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, report: &T) -> Result<()> {
        let artifact = JsonArtifact {
            meta: Meta {
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: self.hash.clone(),
            },
            report,
        };
        let mut text = serde_json::to_string_pretty(&artifact)?;
        text.push('\n');
        std::fs::write(self.target(rel)?, text)?;
        Ok(())
    }

    fn write_edges(&mut self, rel: &str, dataset: &InteractionDataset) -> Result<()> {
        let header = self.header();
        write_edge_list(self.target(rel)?, dataset, &header)
    }

    fn finish(mut self, command: Command) -> Result<Manifest> {
        let manifest = Manifest {
            command: command.tag().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            artifacts: self.artifacts.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.target("manifest.json")?, text)?;
        Ok(manifest)
    }
}

/// Wraps a stage so failures carry the stage name and the run directory.
fn stage<T>(name: &'static str, dir: &Path, body: impl FnOnce() -> Result<T>) -> Result<T> {
    body().map_err(|source| Error::Stage {
        stage: name,
        dir: dir.display().to_string(),
        source: Box::new(source),
    })
}

/// Where a fitted dataset came from, for run summaries.
#[derive(Debug, Serialize)]
struct DataSource {
    kind: &'static str,
    path: Option<String>,
    self_loops_dropped: Option<usize>,
    n_nodes: usize,
    n_edges: usize,
    n_interactions: usize,
    horizon: f64,
}

fn load_dataset(cfg: &RunConfig) -> Result<(InteractionDataset, DataSource)> {
    let (dataset, kind, path, dropped) = match &cfg.input {
        Some(input) => {
            let parsed = parse_edge_list(&input.path, &input.spec()?)?;
            let path = input.path.display().to_string();
            (parsed.dataset, "file", Some(path), Some(parsed.self_loops_dropped))
        }
        None => {
            let net = generate(&cfg.generator_config()?, cfg.seed)?;
            (net.dataset, "synthetic", None, None)
        }
    };
    let source = DataSource {
        kind,
        path,
        self_loops_dropped: dropped,
        n_nodes: dataset.n_nodes(),
        n_edges: binary_projection(&dataset).n_edges(),
        n_interactions: dataset.n_interactions(),
        horizon: dataset.horizon(),
    };
    Ok((dataset, source))
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct NetworkSummary {
    n_nodes: usize,
    n_edges: usize,
    n_interactions: usize,
    horizon: f64,
}

/// `simulate`: one network draw, dumped as an edge list plus latent ground
/// truth.
pub fn run_simulate(cfg: &RunConfig) -> Result<Manifest> {
    let mut em = Emitter::new(cfg)?;
    let gen_cfg = cfg.generator_config()?;
    let net = stage("simulate", &cfg.out_dir, || generate(&gen_cfg, cfg.seed))?;
    em.write_edges("simulate/edges.txt", &net.dataset)?;
    em.write_json("simulate/ground_truth.json", &net)?;
    em.write_json(
        "simulate/summary.json",
        &NetworkSummary {
            n_nodes: net.dataset.n_nodes(),
            n_edges: binary_projection(&net.dataset).n_edges(),
            n_interactions: net.dataset.n_interactions(),
            horizon: net.dataset.horizon(),
        },
    )?;
    em.finish(Command::Simulate)
}

/// Expected counts for the configured hyperparameters.
#[derive(Debug, Serialize, Deserialize)]
pub struct MomentsReport {
    pub expected_interactions: f64,
    pub expected_edges: MomentEstimate,
    pub expected_nodes: MomentEstimate,
    /// `"quadrature"` or `"monte_carlo"`.
    pub method: String,
}

/// `moments`: closed-form expected interactions plus edge/node counts by
/// quadrature (p = 1) or Monte Carlo.
pub fn run_moments(cfg: &RunConfig) -> Result<Manifest> {
    let mut em = Emitter::new(cfg)?;
    let report = stage("moments", &cfg.out_dir, || {
        let ggp = GgpHyper::new(cfg.model.alpha, cfg.model.sigma, cfg.model.tau)?;
        let ccrm = cfg.scores()?;
        let kernel = KernelParams::new(cfg.model.eta, cfg.model.delta)?;
        let horizon = cfg.model.horizon;
        let (method, tag) = if cfg.p == 1 && !cfg.moments.force_monte_carlo {
            (MomentMethod::Quadrature, "quadrature")
        } else {
            (
                MomentMethod::MonteCarlo {
                    samples: cfg.moments.mc_samples,
                    seed: cfg.seed,
                    truncation: 1e-6,
                },
                "monte_carlo",
            )
        };
        Ok(MomentsReport {
            expected_interactions: expected_interactions(&ggp, &ccrm, &kernel, horizon)?,
            expected_edges: expected_edges(&ggp, &ccrm, horizon, method)?,
            expected_nodes: expected_nodes(&ggp, &ccrm, horizon, method)?,
            method: tag.to_string(),
        })
    })?;
    em.write_json("moments/report.json", &report)?;
    em.finish(Command::Moments)
}

fn float(x: f64) -> String {
    format!("{x}")
}

fn write_stage1_artifacts(
    em: &mut Emitter,
    samples: &Stage1Samples,
    p: usize,
) -> Result<()> {
    let mut columns = vec![
        "chain".to_string(),
        "draw".to_string(),
        "alpha".to_string(),
        "sigma".to_string(),
        "tau".to_string(),
    ];
    for k in 0..p {
        columns.push(format!("a_{k}"));
    }
    for k in 0..p {
        columns.push(format!("b_{k}"));
    }
    columns.push("w_rem_total".to_string());
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();

    let mut rows = Vec::new();
    for (c, chain) in samples.chains.iter().enumerate() {
        for (d, snap) in chain.snapshots.iter().enumerate() {
            let mut row = vec![
                c.to_string(),
                d.to_string(),
                float(snap.ggp.alpha),
                float(snap.ggp.sigma),
                float(snap.ggp.tau),
            ];
            row.extend(snap.ccrm.a.iter().copied().map(float));
            row.extend(snap.ccrm.b.iter().copied().map(float));
            row.push(float(snap.w_rem.iter().sum()));
            rows.push(row);
        }
    }
    em.write_csv("fit/stage1_trace.csv", &column_refs, &rows)?;

    let logpost_rows: Vec<Vec<String>> = samples
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, chain)| {
            chain
                .logpost
                .iter()
                .enumerate()
                .map(move |(i, &lp)| vec![c.to_string(), i.to_string(), float(lp)])
        })
        .collect();
    em.write_csv(
        "fit/stage1_logpost.csv",
        &["chain", "sweep", "logpost"],
        &logpost_rows,
    )?;

    #[derive(Serialize)]
    struct Stage1Diagnostics {
        hmc_accept: Vec<f64>,
        hyper_accept: Vec<f64>,
        guard_rejects: Vec<usize>,
        logpost_psrf: Option<f64>,
        snapshots_per_chain: Vec<usize>,
    }
    em.write_json(
        "fit/stage1_diagnostics.json",
        &Stage1Diagnostics {
            hmc_accept: samples.chains.iter().map(|c| c.hmc_accept).collect(),
            hyper_accept: samples.chains.iter().map(|c| c.hyper_accept).collect(),
            guard_rejects: samples.chains.iter().map(|c| c.guard_rejects).collect(),
            logpost_psrf: samples.logpost_psrf().ok(),
            snapshots_per_chain: samples.chains.iter().map(|c| c.snapshots.len()).collect(),
        },
    )
}

/// Fitted-kernel summary emitted by `fit`.
#[derive(Debug, Serialize, Deserialize)]
pub struct KernelReport {
    pub eta_mean: f64,
    pub delta_mean: f64,
    pub eta_ci: (f64, f64),
    pub delta_ci: (f64, f64),
    pub nonstationary_fraction: f64,
    pub psrf: Option<(f64, f64)>,
    pub accept_eta: Vec<f64>,
    pub accept_delta: Vec<f64>,
}

fn write_stage2_artifacts(em: &mut Emitter, samples: &Stage2Samples) -> Result<KernelReport> {
    let rows: Vec<Vec<String>> = samples
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, chain)| {
            chain.samples.iter().enumerate().map(move |(d, &(eta, delta))| {
                vec![c.to_string(), d.to_string(), float(eta), float(delta)]
            })
        })
        .collect();
    em.write_csv("fit/stage2_trace.csv", &["chain", "draw", "eta", "delta"], &rows)?;

    let (eta_mean, delta_mean) = samples.posterior_mean();
    let (eta_ci, delta_ci) = samples.credible_intervals(0.95)?;
    let report = KernelReport {
        eta_mean,
        delta_mean,
        eta_ci,
        delta_ci,
        nonstationary_fraction: samples.nonstationary_fraction(),
        psrf: samples.psrf().ok(),
        accept_eta: samples.chains.iter().map(|c| c.accept_eta).collect(),
        accept_delta: samples.chains.iter().map(|c| c.accept_delta).collect(),
    };
    em.write_json("fit/kernel_estimate.json", &report)?;
    Ok(report)
}

/// `fit`: two-stage posterior sampling with traces, diagnostics, and point
/// estimates as artifacts.
pub fn run_fit(cfg: &RunConfig) -> Result<Manifest> {
    let mut em = Emitter::new(cfg)?;
    let (dataset, source) = stage("input", &cfg.out_dir, || load_dataset(cfg))?;
    em.write_json("fit/input_summary.json", &source)?;

    let s1cfg = cfg.stage1_config()?;
    let graph = binary_projection(&dataset);
    let samples = stage("stage1", &cfg.out_dir, || {
        run_stage1(&graph, dataset.horizon(), &s1cfg, cfg.seed)
    })?;
    write_stage1_artifacts(&mut em, &samples, cfg.p)?;
    let estimate = stage("stage1", &cfg.out_dir, || mbr_point_estimate(&samples))?;
    em.write_json("fit/point_estimate.json", &estimate)?;

    let s2cfg = cfg.stage2_config()?;
    let kernel_samples = stage("stage2", &cfg.out_dir, || {
        let data = Stage2Data::from_dataset(&dataset, |i, j| {
            estimate.pair_rates(i as usize, j as usize)
        })?;
        run_stage2(&data, &s2cfg, cfg.seed)
    })?;
    write_stage2_artifacts(&mut em, &kernel_samples)?;
    em.finish(Command::Fit)
}

fn prediction_rows(report: &PredictionReport) -> Vec<Vec<String>> {
    report
        .pairs
        .iter()
        .map(|p| {
            vec![
                p.src.to_string(),
                p.dst.to_string(),
                float(p.predicted),
                float(p.actual),
                (p.in_train as u8).to_string(),
            ]
        })
        .collect()
}

const PREDICTION_COLUMNS: [&str; 5] = ["src", "dst", "predicted", "actual", "in_train"];

/// Scores for one model in an `evaluate` run.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: ModelKind,
    pub rmse_all: f64,
    pub rmse_train_active: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SplitSummary {
    t_split: f64,
    window: f64,
    train_interactions: usize,
    test_interactions: usize,
}

fn split_summary(split: &SplitDataset) -> SplitSummary {
    SplitSummary {
        t_split: split.t_split,
        window: split.window(),
        train_interactions: split.train.n_interactions(),
        test_interactions: split.test.n_interactions(),
    }
}

/// `predict`: temporal split, fit the first configured model on the
/// training part, predict the test window.
pub fn run_predict(cfg: &RunConfig) -> Result<Manifest> {
    let mut em = Emitter::new(cfg)?;
    let (dataset, source) = stage("input", &cfg.out_dir, || load_dataset(cfg))?;
    em.write_json("predict/input_summary.json", &source)?;
    let split = stage("split", &cfg.out_dir, || split_by_time(&dataset, cfg.split))?;
    em.write_json("predict/split_summary.json", &split_summary(&split))?;

    let kind = cfg.predict.models[0];
    let fit_cfg = cfg.fit_config()?;
    let model = stage("fit", &cfg.out_dir, || {
        fit_model(kind, &split.train, &fit_cfg, cfg.seed)
    })?;
    let report = stage("predict", &cfg.out_dir, || {
        evaluate_fitted(&model, &split, cfg.predict.method()?, cfg.seed)
    })?;
    em.write_csv("predict/predictions.csv", &PREDICTION_COLUMNS, &prediction_rows(&report))?;
    em.write_json(
        "predict/summary.json",
        &ModelScore {
            model: report.model,
            rmse_all: report.rmse_all,
            rmse_train_active: report.rmse_train_active,
        },
    )?;
    em.finish(Command::Predict)
}

/// `evaluate`: one split, every requested model fitted on the training part
/// and scored on the test window.
pub fn run_evaluate(cfg: &RunConfig) -> Result<Manifest> {
    let mut em = Emitter::new(cfg)?;
    let (dataset, source) = stage("input", &cfg.out_dir, || load_dataset(cfg))?;
    em.write_json("evaluate/input_summary.json", &source)?;
    let split = stage("split", &cfg.out_dir, || split_by_time(&dataset, cfg.split))?;
    em.write_json("evaluate/split_summary.json", &split_summary(&split))?;

    let fit_cfg = cfg.fit_config()?;
    let method = cfg.predict.method()?;
    let mut scores = Vec::new();
    let mut community_estimate: Option<PointEstimate> = None;
    for &kind in &cfg.predict.models {
        let model = stage("fit", &cfg.out_dir, || {
            // The stage-1 posterior is shared between the community models:
            // with the same seed and settings a separate ccrm fit would
            // reproduce it draw for draw, so reuse it.
            if kind == ModelKind::Ccrm {
                if let Some(estimate) = &community_estimate {
                    return Ok(FittedModel::Ccrm { estimate: estimate.clone() });
                }
            }
            fit_model(kind, &split.train, &fit_cfg, cfg.seed)
        })?;
        if let FittedModel::HawkesCcrm { estimate, .. } | FittedModel::Ccrm { estimate } = &model
        {
            community_estimate.get_or_insert_with(|| estimate.clone());
        }
        let report = stage("predict", &cfg.out_dir, || {
            evaluate_fitted(&model, &split, method, cfg.seed)
        })?;
        em.write_csv(
            &format!("evaluate/predictions_{}.csv", kind.tag()),
            &PREDICTION_COLUMNS,
            &prediction_rows(&report),
        )?;
        scores.push(ModelScore {
            model: kind,
            rmse_all: report.rmse_all,
            rmse_train_active: report.rmse_train_active,
        });
    }
    em.write_json("evaluate/summary.json", &scores)?;
    em.finish(Command::Evaluate)
}

#[derive(Debug, Serialize)]
struct DegreesSummary {
    coverage: f64,
    replicates: usize,
    fitted_ggp: GgpHyper,
    fitted_scores: CcrmHyper,
    fitted_kernel: KernelParams,
}

/// `degrees`: full fit, then replicate networks from the fitted
/// hyperparameters and the degree envelope against the observed graph.
pub fn run_degrees(cfg: &RunConfig) -> Result<Manifest> {
    let mut em = Emitter::new(cfg)?;
    let (dataset, source) = stage("input", &cfg.out_dir, || load_dataset(cfg))?;
    em.write_json("degrees/input_summary.json", &source)?;

    let fit_cfg = cfg.fit_config()?;
    let model = stage("fit", &cfg.out_dir, || {
        fit_model(ModelKind::HawkesCcrm, &dataset, &fit_cfg, cfg.seed)
    })?;
    let FittedModel::HawkesCcrm { estimate, kernel, .. } = &model else {
        unreachable!("fit_model returns the requested variant");
    };
    let envelope = stage("degrees", &cfg.out_dir, || {
        let mut gen_cfg = GeneratorConfig::new(
            estimate.ggp,
            estimate.ccrm.clone(),
            *kernel,
            dataset.horizon(),
        )?;
        gen_cfg.truncation = cfg.truncation;
        posterior_predictive_degrees(
            &binary_projection(&dataset),
            &gen_cfg,
            cfg.degrees_replicates,
            cfg.seed,
        )
    })?;
    write_degree_artifacts(&mut em, &envelope)?;
    em.write_json(
        "degrees/summary.json",
        &DegreesSummary {
            coverage: envelope.coverage(),
            replicates: cfg.degrees_replicates,
            fitted_ggp: estimate.ggp,
            fitted_scores: estimate.ccrm.clone(),
            fitted_kernel: *kernel,
        },
    )?;
    em.finish(Command::Degrees)
}

fn write_degree_artifacts(em: &mut Emitter, envelope: &DegreeEnvelope) -> Result<()> {
    let rows: Vec<Vec<String>> = envelope
        .degrees
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            vec![
                d.to_string(),
                float(envelope.lower[i]),
                float(envelope.mean[i]),
                float(envelope.upper[i]),
                float(envelope.empirical[i]),
            ]
        })
        .collect();
    em.write_csv(
        "degrees/histogram.csv",
        &["degree", "lower", "mean", "upper", "empirical"],
        &rows,
    )
}
