//! Temporal hold-out evaluation: time splits, per-pair count prediction,
//! RMSE scoring, baseline models, and posterior-predictive degree checks.
//!
//! The protocol: split a dataset in time so training holds a target fraction
//! of the interactions, fit a model on the training window, predict the
//! expected number of events for every directed pair over the test window,
//! and score by root-mean-square error against the realized counts.
//!
//! For reciprocating models the analytic prediction integrates the mean
//! conditional intensities `m_ij(t) = E[λ_ij(t)]` of one pair, which obey
//! the linear system
//!
//! ```text
//!   d/dt [m_ij]   [-δ  η] [m_ij]     [μ_ij]
//!        [    ] = [    ]·[    ] + δ·[    ]
//!        [m_ji]   [ η -δ] [m_ji]     [μ_ji]
//! ```
//!
//! started from the realized intensities at the split time (training events
//! enter through their decayed excitation). The sum and difference
//! `m_ij ± m_ji` decouple into scalar equations with decay rates `δ ∓ η`,
//! each integrable in closed form; the predicted count is the time integral
//! of `m_ij` over the window. Simulation mode instead continues the training
//! history by thinning and averages replicate counts. Both modes refuse
//! non-stationary kernels (`η ≥ δ`), where the mean system diverges.

use crate::dataset::{binary_projection, degree_distribution, BinaryGraph, InteractionDataset};
use crate::error::{require_positive, Error, Result};
use crate::exec;
use crate::generator::{generate, GeneratorConfig};
use crate::hawkes::{simulate_pair_from, KernelParams, PairHistory, PairRates};
use crate::inference::{
    mbr_point_estimate, quantile, run_global_hawkes, run_stage1, run_stage2, PointEstimate,
    Stage1Config, Stage2Config, Stage2Data,
};
use crate::rng::{pair_rank, stream, Domain};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// A dataset cut at `t_split`: `train` holds every interaction with
/// `t ≤ t_split` (horizon reset to `t_split`), `test` the remainder on the
/// original horizon. Nothing is dropped and nothing leaks across the cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: InteractionDataset,
    pub test: InteractionDataset,
    pub t_split: f64,
}

impl SplitDataset {
    /// Length of the test window `(t_split, horizon]`.
    pub fn window(&self) -> f64 {
        self.test.horizon() - self.t_split
    }
}

/// Splits at the timestamp of the `⌈fraction·n⌉`-th interaction. Ties at
/// the split time all land in training, so the realized training share can
/// exceed `fraction`; the test part may be empty.
pub fn split_by_time(dataset: &InteractionDataset, fraction: f64) -> Result<SplitDataset> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(
            "fraction",
            fraction,
            "must lie strictly between 0 and 1",
        ));
    }
    let events = dataset.interactions();
    if events.is_empty() {
        return Err(Error::EmptyInput("cannot split a dataset without interactions"));
    }
    let n = events.len();
    let idx = (fraction * n as f64).ceil() as usize - 1;
    let t_split = events[idx.min(n - 1)].time;
    if t_split <= 0.0 {
        return Err(Error::invalid(
            "t_split",
            t_split,
            "split time must be positive to form a training window",
        ));
    }
    let train_events = events.iter().copied().filter(|e| e.time <= t_split).collect();
    let test_events = events.iter().copied().filter(|e| e.time > t_split).collect();
    let mut train = InteractionDataset::new(train_events, dataset.n_nodes(), t_split)?;
    let mut test = InteractionDataset::new(test_events, dataset.n_nodes(), dataset.horizon())?;
    train.ground_truth = dataset.ground_truth.clone();
    train.labels = dataset.labels.clone();
    test.ground_truth = dataset.ground_truth.clone();
    test.labels = dataset.labels.clone();
    Ok(SplitDataset { train, test, t_split })
}

/// The four fitted/compared models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Community base rates from stage 1, reciprocity kernel from stage 2.
    HawkesCcrm,
    /// Community base rates only; no excitation (η = 0).
    Ccrm,
    /// One shared base rate with a shared reciprocity kernel.
    HawkesGlobal,
    /// One shared constant rate for every directed pair.
    PoissonGlobal,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::HawkesCcrm,
        ModelKind::Ccrm,
        ModelKind::HawkesGlobal,
        ModelKind::PoissonGlobal,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::HawkesCcrm => "hawkes_ccrm",
            ModelKind::Ccrm => "ccrm",
            ModelKind::HawkesGlobal => "hawkes_global",
            ModelKind::PoissonGlobal => "poisson_global",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}`")))
    }
}

/// MCMC budgets for fitting; stage 2 settings double as the global-baseline
/// sampler settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
}

/// A model fitted on a training window, carrying exactly what prediction
/// needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FittedModel {
    HawkesCcrm {
        estimate: PointEstimate,
        kernel: KernelParams,
        /// Posterior mass of the η ≥ δ region in the stage-2 chains.
        nonstationary_fraction: f64,
    },
    Ccrm {
        estimate: PointEstimate,
    },
    HawkesGlobal {
        mu: f64,
        kernel: KernelParams,
        nonstationary_fraction: f64,
    },
    PoissonGlobal {
        mu: f64,
    },
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::HawkesCcrm { .. } => ModelKind::HawkesCcrm,
            FittedModel::Ccrm { .. } => ModelKind::Ccrm,
            FittedModel::HawkesGlobal { .. } => ModelKind::HawkesGlobal,
            FittedModel::PoissonGlobal { .. } => ModelKind::PoissonGlobal,
        }
    }

    /// Base rates for the unordered pair `(i, j)`. Every model here is
    /// symmetric in its base rates, so orientation does not matter.
    pub fn pair_rates(&self, i: u32, j: u32) -> PairRates {
        match self {
            FittedModel::HawkesCcrm { estimate, .. } | FittedModel::Ccrm { estimate } => {
                estimate.pair_rates(i as usize, j as usize)
            }
            FittedModel::HawkesGlobal { mu, .. } | FittedModel::PoissonGlobal { mu } => {
                PairRates { forward: *mu, backward: *mu }
            }
        }
    }

    /// The reciprocity kernel, for the models that have one.
    pub fn kernel(&self) -> Option<KernelParams> {
        match self {
            FittedModel::HawkesCcrm { kernel, .. } | FittedModel::HawkesGlobal { kernel, .. } => {
                Some(*kernel)
            }
            FittedModel::Ccrm { .. } | FittedModel::PoissonGlobal { .. } => None,
        }
    }
}

/// Fits one model on a training window.
///
/// `hawkes_ccrm` runs the two-stage procedure (stage 1 on the binary
/// projection, stage 2 on event times given the stage-1 base rates) and
/// summarizes the kernel by its posterior mean. `ccrm` stops after stage 1.
/// `hawkes_global` reuses the stage-2 machinery with one shared base rate.
/// `poisson_global` sets the shared rate to
/// `total interactions / (observed directed pairs × horizon)`.
pub fn fit_model(
    kind: ModelKind,
    train: &InteractionDataset,
    cfg: &FitConfig,
    seed: u64,
) -> Result<FittedModel> {
    if train.n_interactions() == 0 {
        return Err(Error::EmptyInput("cannot fit on an empty training window"));
    }
    match kind {
        ModelKind::HawkesCcrm => {
            let estimate = fit_stage1(train, &cfg.stage1, seed)?;
            let data = Stage2Data::from_dataset(train, |i, j| {
                estimate.pair_rates(i as usize, j as usize)
            })?;
            let samples = run_stage2(&data, &cfg.stage2, seed)?;
            let (eta, delta) = samples.posterior_mean();
            Ok(FittedModel::HawkesCcrm {
                estimate,
                kernel: KernelParams::new(eta, delta)?,
                nonstationary_fraction: samples.nonstationary_fraction(),
            })
        }
        ModelKind::Ccrm => Ok(FittedModel::Ccrm {
            estimate: fit_stage1(train, &cfg.stage1, seed)?,
        }),
        ModelKind::HawkesGlobal => {
            let data = Stage2Data::from_dataset(train, |_, _| PairRates {
                forward: 1.0,
                backward: 1.0,
            })?;
            let fit = run_global_hawkes(&data, &cfg.stage2, seed)?;
            Ok(FittedModel::HawkesGlobal {
                mu: fit.mu,
                kernel: KernelParams::new(fit.eta, fit.delta)?,
                nonstationary_fraction: fit.nonstationary_fraction,
            })
        }
        ModelKind::PoissonGlobal => {
            let observed = train.directed_pair_counts().len();
            let mu = train.n_interactions() as f64 / (observed as f64 * train.horizon());
            Ok(FittedModel::PoissonGlobal { mu })
        }
    }
}

fn fit_stage1(
    train: &InteractionDataset,
    cfg: &Stage1Config,
    seed: u64,
) -> Result<PointEstimate> {
    let graph = binary_projection(train);
    let samples = run_stage1(&graph, train.horizon(), cfg, seed)?;
    mbr_point_estimate(&samples)
}

/// How to turn a fitted model into expected counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMethod {
    /// Closed-form integral of the mean-intensity system.
    Analytic,
    /// Average of forward thinning runs continued from the training
    /// history.
    Simulate { replicates: usize },
}

impl PredictMethod {
    /// Simulation with the default replicate count (100).
    pub fn simulate_default() -> Self {
        PredictMethod::Simulate { replicates: 100 }
    }
}

/// Expected event counts over `(t, t + window]` for one pair with realized
/// history up to `t`, by integrating the mean-intensity system from the
/// realized state. Events at exactly `t` have fired, so they excite with
/// full weight `e^0`.
fn expected_window_counts(
    history: &PairHistory,
    rates: &PairRates,
    kernel: &KernelParams,
    t: f64,
    window: f64,
) -> (f64, f64) {
    let decayed = |events: &[f64]| {
        events
            .iter()
            .take_while(|&&u| u <= t)
            .map(|&u| (-kernel.delta * (t - u)).exp())
            .sum::<f64>()
    };
    let m_f = rates.forward + kernel.eta * decayed(history.backward());
    let m_b = rates.backward + kernel.eta * decayed(history.forward());
    let int_sum = linear_mean_integral(
        m_f + m_b,
        kernel.delta - kernel.eta,
        kernel.delta * (rates.forward + rates.backward),
        window,
    );
    let int_diff = linear_mean_integral(
        m_f - m_b,
        kernel.delta + kernel.eta,
        kernel.delta * (rates.forward - rates.backward),
        window,
    );
    (0.5 * (int_sum + int_diff), 0.5 * (int_sum - int_diff))
}

/// `∫_0^Δ x(s) ds` for `x' = −rate·x + forcing`, `x(0) = x0`. The `rate → 0`
/// limit is the linear ramp `x0·Δ + forcing·Δ²/2`.
fn linear_mean_integral(x0: f64, rate: f64, forcing: f64, delta_t: f64) -> f64 {
    if rate.abs() < 1e-12 {
        return x0 * delta_t + 0.5 * forcing * delta_t * delta_t;
    }
    let level = forcing / rate;
    level * delta_t + (x0 - level) * (-(-rate * delta_t).exp_m1()) / rate
}

/// Predicted event counts over `(t_split, t_split + window]` for the given
/// directed pairs, aligned with `pairs`. `t_split` is the training horizon.
///
/// Kernel-based models refuse non-stationary draws with a distinguished
/// error. Models without excitation reduce to `μ̂_ij · window` in both
/// methods. Simulation uses one seeded stream per unordered pair, so results
/// do not depend on iteration order or thread count.
pub fn predict_counts(
    model: &FittedModel,
    train: &InteractionDataset,
    pairs: &[(u32, u32)],
    window: f64,
    method: PredictMethod,
    seed: u64,
) -> Result<Vec<f64>> {
    require_positive("window", window)?;
    for &(src, dst) in pairs {
        if src == dst {
            return Err(Error::invalid(
                "pair",
                src as f64,
                "self-pairs have no interaction process",
            ));
        }
    }
    let kernel = match model.kernel() {
        Some(k) => {
            if !k.is_stationary() {
                return Err(Error::NonStationary { eta: k.eta, delta: k.delta });
            }
            k
        }
        // No excitation: the window count is exactly μ̂_ij · window under
        // either method.
        None => {
            return Ok(pairs
                .iter()
                .map(|&(src, dst)| {
                    let (a, b) = unordered(src, dst);
                    let rates = model.pair_rates(a, b);
                    let mu = if src < dst { rates.forward } else { rates.backward };
                    mu * window
                })
                .collect());
        }
    };

    let t_split = train.horizon();
    if let PredictMethod::Simulate { replicates } = method {
        if replicates == 0 {
            return Err(Error::invalid("replicates", 0.0, "need at least one simulation"));
        }
    }

    // One computation per unordered pair covers both directions.
    let histories = train.pair_histories();
    let keys: Vec<(u32, u32)> = pairs
        .iter()
        .map(|&(src, dst)| unordered(src, dst))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let predicted: Vec<Result<(f64, f64)>> = exec::map_slice(&keys, |&(a, b)| {
        let rates = model.pair_rates(a, b);
        let owned;
        let history = match histories.get(&(a, b)) {
            Some(h) => h,
            None => {
                owned = PairHistory::empty(t_split)?;
                &owned
            }
        };
        match method {
            PredictMethod::Analytic => {
                Ok(expected_window_counts(history, &rates, &kernel, t_split, window))
            }
            PredictMethod::Simulate { replicates } => {
                let mut rng = stream(seed, Domain::Predict, pair_rank(a as usize, b as usize));
                let mut fwd = 0.0;
                let mut bwd = 0.0;
                for _ in 0..replicates {
                    let future = simulate_pair_from(
                        history,
                        t_split,
                        t_split + window,
                        &rates,
                        &kernel,
                        &mut rng,
                    )?;
                    fwd += future.forward().len() as f64;
                    bwd += future.backward().len() as f64;
                }
                let m = replicates as f64;
                Ok((fwd / m, bwd / m))
            }
        }
    });
    let by_key: BTreeMap<(u32, u32), (f64, f64)> = keys
        .iter()
        .copied()
        .zip(predicted.into_iter().collect::<Result<Vec<_>>>()?)
        .collect();
    Ok(pairs
        .iter()
        .map(|&(src, dst)| {
            let counts = by_key[&unordered(src, dst)];
            if src < dst {
                counts.0
            } else {
                counts.1
            }
        })
        .collect())
}

fn unordered(src: u32, dst: u32) -> (u32, u32) {
    if src < dst {
        (src, dst)
    } else {
        (dst, src)
    }
}

/// Root-mean-square error between aligned prediction and actual vectors.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction vectors",
            expected: predicted.len(),
            got: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput("no pairs to score"));
    }
    let mse = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / predicted.len() as f64;
    Ok(mse.sqrt())
}

/// Directed pairs with at least one interaction in train ∪ test, sorted,
/// each flagged with whether it already appears in training.
pub fn evaluation_pairs(split: &SplitDataset) -> Vec<((u32, u32), bool)> {
    let train_counts = split.train.directed_pair_counts();
    let mut keys: BTreeSet<(u32, u32)> = train_counts.keys().copied().collect();
    keys.extend(split.test.directed_pair_counts().keys().copied());
    keys.into_iter()
        .map(|k| (k, train_counts.contains_key(&k)))
        .collect()
}

/// One scored directed pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub src: u32,
    pub dst: u32,
    pub predicted: f64,
    pub actual: f64,
    /// Whether the pair has training interactions. Pairs first active in
    /// the test window are scored only in the all-pairs RMSE.
    pub in_train: bool,
}

/// Predicted-versus-actual counts for one model over the test window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub model: ModelKind,
    pub t_split: f64,
    pub window: f64,
    pub pairs: Vec<PairPrediction>,
    /// RMSE over every directed pair active in train ∪ test.
    pub rmse_all: f64,
    /// RMSE restricted to pairs with training activity; `None` when no
    /// scored pair was active in training.
    pub rmse_train_active: Option<f64>,
}

/// Predicts the full test window with an already-fitted model and scores
/// the result both over all active directed pairs and over the train-active
/// subset.
pub fn evaluate_fitted(
    model: &FittedModel,
    split: &SplitDataset,
    method: PredictMethod,
    seed: u64,
) -> Result<PredictionReport> {
    let window = split.window();
    let flagged = evaluation_pairs(split);
    if flagged.is_empty() {
        return Err(Error::EmptyInput("no directed pairs to score"));
    }
    let directed: Vec<(u32, u32)> = flagged.iter().map(|&(k, _)| k).collect();
    let predicted = predict_counts(model, &split.train, &directed, window, method, seed)?;
    let test_counts = split.test.directed_pair_counts();
    let pairs: Vec<PairPrediction> = flagged
        .iter()
        .zip(&predicted)
        .map(|(&((src, dst), in_train), &pred)| PairPrediction {
            src,
            dst,
            predicted: pred,
            actual: test_counts.get(&(src, dst)).copied().unwrap_or(0) as f64,
            in_train,
        })
        .collect();
    let all_pred: Vec<f64> = pairs.iter().map(|p| p.predicted).collect();
    let all_actual: Vec<f64> = pairs.iter().map(|p| p.actual).collect();
    let train_pred: Vec<f64> = pairs.iter().filter(|p| p.in_train).map(|p| p.predicted).collect();
    let train_actual: Vec<f64> = pairs.iter().filter(|p| p.in_train).map(|p| p.actual).collect();
    Ok(PredictionReport {
        model: model.kind(),
        t_split: split.t_split,
        window,
        rmse_all: rmse(&all_pred, &all_actual)?,
        rmse_train_active: if train_pred.is_empty() {
            None
        } else {
            Some(rmse(&train_pred, &train_actual)?)
        },
        pairs,
    })
}

/// Fits `kind` on the training window, then scores the test window.
pub fn evaluate_model(
    kind: ModelKind,
    split: &SplitDataset,
    cfg: &FitConfig,
    method: PredictMethod,
    seed: u64,
) -> Result<PredictionReport> {
    let model = fit_model(kind, &split.train, cfg, seed)?;
    evaluate_fitted(&model, split, method, seed)
}

/// Posterior-predictive check of the binary degree distribution: per-degree
/// node counts of replicate networks simulated from fitted hyperparameters,
/// summarized by their 5–95% envelope, beside the empirical histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeEnvelope {
    /// Degree bins `1..=max` (degree-0 nodes are unobservable).
    pub degrees: Vec<usize>,
    /// 5th percentile of replicate node counts per bin.
    pub lower: Vec<f64>,
    /// 95th percentile of replicate node counts per bin.
    pub upper: Vec<f64>,
    pub mean: Vec<f64>,
    /// Empirical node counts per bin.
    pub empirical: Vec<f64>,
}

impl DegreeEnvelope {
    /// Fraction of nonempty empirical bins whose count falls inside the
    /// envelope; vacuously 1 for an empty empirical histogram.
    pub fn coverage(&self) -> f64 {
        let mut active = 0usize;
        let mut covered = 0usize;
        for (i, &emp) in self.empirical.iter().enumerate() {
            if emp > 0.0 {
                active += 1;
                if self.lower[i] <= emp && emp <= self.upper[i] {
                    covered += 1;
                }
            }
        }
        if active == 0 {
            1.0
        } else {
            covered as f64 / active as f64
        }
    }
}

/// Simulates `replicates` networks from fitted hyperparameters and overlays
/// their binary degree histograms on the observed graph's. Replicates run in
/// parallel on seeded streams.
pub fn posterior_predictive_degrees(
    observed: &BinaryGraph,
    fitted: &GeneratorConfig,
    replicates: usize,
    seed: u64,
) -> Result<DegreeEnvelope> {
    if replicates == 0 {
        return Err(Error::invalid("replicates", 0.0, "need at least one replicate"));
    }
    let results: Vec<Result<Vec<usize>>> = exec::map_indexed(replicates, |r| {
        let run_seed = stream(seed, Domain::Replicates, r as u64).random::<u64>();
        let net = generate(fitted, run_seed)?;
        Ok(degree_distribution(&binary_projection(&net.dataset)))
    });
    let histograms = results.into_iter().collect::<Result<Vec<_>>>()?;
    let empirical_hist = degree_distribution(observed);
    let max_degree = histograms
        .iter()
        .map(|h| h.len().saturating_sub(1))
        .chain([empirical_hist.len().saturating_sub(1)])
        .max()
        .unwrap_or(0);

    let mut envelope = DegreeEnvelope {
        degrees: (1..=max_degree).collect(),
        lower: Vec::new(),
        upper: Vec::new(),
        mean: Vec::new(),
        empirical: Vec::new(),
    };
    for d in 1..=max_degree {
        let counts: Vec<f64> = histograms
            .iter()
            .map(|h| h.get(d).copied().unwrap_or(0) as f64)
            .collect();
        envelope.lower.push(quantile(&counts, 0.05)?);
        envelope.upper.push(quantile(&counts, 0.95)?);
        envelope.mean.push(counts.iter().sum::<f64>() / counts.len() as f64);
        envelope
            .empirical
            .push(empirical_hist.get(d).copied().unwrap_or(0) as f64);
    }
    Ok(envelope)
}
