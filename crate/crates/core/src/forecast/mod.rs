//! Day-ahead demand forecasting with a small feed-forward network.
//!
//! The network sees yesterday's profile, a one-hot day kind and optional
//! exogenous features, and emits a coarse profile (24 hourly points by
//! default) that is interpolated back to the slot resolution.

mod mlp;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{mean_std, DayKind, ForecastConfig, HistoryWindow};

pub use mlp::{Activation, Gradients, Mlp, Normalization, TrainParams, TrainingTrace};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("training diverged in epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("network has no normalisation bounds; train it first")]
    UntrainedNetwork,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid learning rate {0}")]
    InvalidLearningRate(f64),
    #[error("every actual value is zero")]
    AllSlotsExcluded,
    #[error("history needs at least {0} days")]
    NotEnoughHistory(usize),
    #[error("unknown activation {0:?}")]
    UnknownActivation(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastSource {
    Simple,
    Repredicted,
    Oracle,
}

/// A predicted day. Statistics are derived from the samples on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ForecastRepr", try_from = "ForecastRepr")]
pub struct Forecast {
    samples: Vec<f64>,
    mean_kw: f64,
    std_kw: f64,
    pub source: ForecastSource,
}

#[derive(Serialize, Deserialize)]
struct ForecastRepr {
    samples: Vec<f64>,
    source: ForecastSource,
}

impl From<Forecast> for ForecastRepr {
    fn from(f: Forecast) -> Self {
        Self {
            samples: f.samples,
            source: f.source,
        }
    }
}

impl TryFrom<ForecastRepr> for Forecast {
    type Error = String;

    fn try_from(r: ForecastRepr) -> Result<Self, String> {
        if r.samples.iter().any(|v| !v.is_finite()) {
            return Err("forecast samples must be finite".into());
        }
        Ok(Forecast::new(r.samples, r.source))
    }
}

impl Forecast {
    /// Negative values are clamped to zero.
    pub fn new(samples: Vec<f64>, source: ForecastSource) -> Self {
        let samples: Vec<f64> = samples.into_iter().map(|v| v.max(0.0)).collect();
        let (mean_kw, std_kw) = mean_std(&samples);
        Self {
            samples,
            mean_kw,
            std_kw,
            source,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn mean_kw(&self) -> f64 {
        self.mean_kw
    }

    pub fn std_kw(&self) -> f64 {
        self.std_kw
    }
}

/// MAPE in percent together with the number of excluded zero-actual slots.
pub fn mape_detail(actual: &[f64], predicted: &[f64]) -> Result<(f64, usize), ForecastError> {
    if actual.len() != predicted.len() {
        return Err(ForecastError::ShapeMismatch {
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    let (mut sum, mut used) = (0.0, 0usize);
    for (&a, &p) in actual.iter().zip(predicted) {
        if a > 0.0 {
            sum += (a - p).abs() / a;
            used += 1;
        }
    }
    if used == 0 {
        return Err(ForecastError::AllSlotsExcluded);
    }
    Ok((100.0 * sum / used as f64, actual.len() - used))
}

pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, ForecastError> {
    mape_detail(actual, predicted).map(|(m, _)| m)
}

/// Expands `points` anchors to `slots` values. Anchor `k` sits at slot
/// `k·slots/points`; slots in between are linear blends and slots after the
/// last anchor hold its value.
pub fn interpolate(points: &[f64], slots: usize) -> Vec<f64> {
    assert!(
        !points.is_empty() && slots.is_multiple_of(points.len()),
        "slots must be a multiple of points"
    );
    let r = slots / points.len();
    (0..slots)
        .map(|s| {
            let (k, off) = (s / r, s % r);
            match points.get(k + 1) {
                Some(&next) if off > 0 => {
                    let t = off as f64 / r as f64;
                    points[k] * (1.0 - t) + next * t
                }
                _ => points[k],
            }
        })
        .collect()
}

/// Anchor values whose interpolation is the least-squares fit to `samples`.
/// Training on these rather than on the raw anchor slots lets the coarse
/// output follow peaks that fall between anchors.
pub fn fit_anchors(samples: &[f64], points: usize) -> Vec<f64> {
    let slots = samples.len();
    let basis: Vec<Vec<f64>> = (0..points)
        .map(|k| {
            let mut e = vec![0.0; points];
            e[k] = 1.0;
            interpolate(&e, slots)
        })
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut a: Vec<Vec<f64>> = (0..points)
        .map(|i| (0..points).map(|j| dot(&basis[i], &basis[j])).collect())
        .collect();
    let mut b: Vec<f64> = basis.iter().map(|col| dot(col, samples)).collect();
    // Gaussian elimination; the normal matrix is symmetric positive definite.
    for c in 0..points {
        for r in c + 1..points {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..points {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; points];
    for c in (0..points).rev() {
        let tail: f64 = (c + 1..points).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - tail) / a[c][c];
    }
    x
}

/// Raw feature vector for predicting a day of `kind` from the day before.
pub fn features(prev_day: &[f64], kind: DayKind, exogenous: &[f64]) -> Vec<f64> {
    let mut x = prev_day.to_vec();
    x.extend(kind.one_hot());
    x.extend_from_slice(exogenous);
    x
}

/// Mean demand of a profile, floored so all-zero days stay usable.
fn profile_level(samples: &[f64]) -> f64 {
    (samples.iter().sum::<f64>() / samples.len() as f64).max(1e-9)
}

fn relative(samples: &[f64], level: f64) -> Vec<f64> {
    samples.iter().map(|v| v / level).collect()
}

/// Supervised pairs from consecutive days: yesterday's profile and today's
/// kind as input, today's least-squares anchors as target. Both sides are
/// expressed relative to yesterday's mean level, so the network learns the
/// shape and the day-over-day change rather than absolute kW.
pub fn build_dataset(history: &HistoryWindow, points: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    build_dataset_excluding(history, points, &[])
}

/// As [`build_dataset`], skipping every pair that touches a day flagged in
/// `exclude` (indexed like `history.days()`; missing flags mean keep).
pub fn build_dataset_excluding(
    history: &HistoryWindow,
    points: usize,
    exclude: &[bool],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let days = history.days();
    let flagged = |i: usize| exclude.get(i).copied().unwrap_or(false);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (i, w) in days.windows(2).enumerate() {
        if flagged(i) || flagged(i + 1) {
            continue;
        }
        let level = profile_level(w[0].samples());
        inputs.push(features(&relative(w[0].samples(), level), w[1].kind, &[]));
        targets.push(fit_anchors(&relative(w[1].samples(), level), points));
    }
    (inputs, targets)
}

/// Fits normalisation bounds and trains a fresh network on `history`.
pub fn train_forecaster(
    history: &HistoryWindow,
    cfg: &ForecastConfig,
    seed: u64,
) -> Result<(Mlp, TrainingTrace), ForecastError> {
    train_forecaster_excluding(history, cfg, seed, &[])
}

/// Trains on the pairs of `history` that avoid days flagged in `exclude`
/// (known anomalies), so the network learns normal day-to-day behaviour.
pub fn train_forecaster_excluding(
    history: &HistoryWindow,
    cfg: &ForecastConfig,
    seed: u64,
    exclude: &[bool],
) -> Result<(Mlp, TrainingTrace), ForecastError> {
    if history.len() < 2 {
        return Err(ForecastError::NotEnoughHistory(2));
    }
    let slots = history.days()[0].len();
    if cfg.output_points == 0 || !slots.is_multiple_of(cfg.output_points) {
        return Err(ForecastError::ShapeMismatch {
            expected: slots,
            got: cfg.output_points,
        });
    }
    let (inputs, targets) = build_dataset_excluding(history, cfg.output_points, exclude);
    if inputs.is_empty() {
        return Err(ForecastError::EmptyDataset);
    }
    let norm = Normalization::fit(&inputs, &targets);
    let mut xs: Vec<Vec<f64>> = inputs.iter().map(|x| norm.input(x)).collect();
    let mut ts: Vec<Vec<f64>> = targets.iter().map(|t| norm.target(t)).collect();
    // Every k-th pair is held out for model selection.
    let (mut vx, mut vt) = (Vec::new(), Vec::new());
    if let Some(k) =
        (cfg.validation_fraction > 0.0).then(|| (1.0 / cfg.validation_fraction).round() as usize)
    {
        if xs.len() >= 2 * k {
            let mut i = xs.len();
            while i >= k {
                i -= k;
                vx.push(xs.remove(i));
                vt.push(ts.remove(i));
            }
        }
    }
    let activation = match cfg.activation.as_str() {
        "sigmoid" => Activation::Sigmoid,
        "tanh" => Activation::Tanh,
        other => return Err(ForecastError::UnknownActivation(other.to_string())),
    };
    let mut net = Mlp::new(
        &[inputs[0].len(), cfg.hidden_units, cfg.output_points],
        activation,
        seed,
    );
    let validation = (!vx.is_empty()).then_some((vx.as_slice(), vt.as_slice()));
    let trace = net.train_validated(
        &xs,
        &ts,
        validation,
        TrainParams {
            epochs: cfg.epochs,
            learning_rate: cfg.learning_rate,
            patience: cfg.plateau_patience,
            weight_decay: cfg.weight_decay,
            seed: seed.wrapping_add(1),
        },
    )?;
    net.normalization = Some(norm);
    Ok((net, trace))
}

/// Runs the trained network on an arbitrary previous-day profile.
pub fn predict_from_profile(
    net: &Mlp,
    prev_day: &[f64],
    kind: DayKind,
    exogenous: &[f64],
) -> Result<Vec<f64>, ForecastError> {
    let norm = net
        .normalization
        .as_ref()
        .ok_or(ForecastError::UntrainedNetwork)?;
    let level = profile_level(prev_day);
    let x = features(&relative(prev_day, level), kind, exogenous);
    if x.len() != net.input_len() {
        return Err(ForecastError::ShapeMismatch {
            expected: net.input_len(),
            got: x.len(),
        });
    }
    let y: Vec<f64> = norm
        .output(&net.forward(&norm.input(&x))?)
        .into_iter()
        .map(|v| v * level)
        .collect();
    let slots = prev_day.len();
    if !slots.is_multiple_of(y.len()) {
        return Err(ForecastError::ShapeMismatch {
            expected: slots,
            got: y.len(),
        });
    }
    Ok(interpolate(&y, slots)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect())
}

/// Day-ahead forecast from the most recent day in `history`.
pub fn predict_day(
    net: &Mlp,
    history: &HistoryWindow,
    kind: DayKind,
) -> Result<Forecast, ForecastError> {
    let last = history.last().ok_or(ForecastError::NotEnoughHistory(1))?;
    let samples = predict_from_profile(net, last.samples(), kind, &[])?;
    Ok(Forecast::new(samples, ForecastSource::Simple))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    net: Mlp,
}

const MODEL_FORMAT: &str = "pmarl-mlp";
const MODEL_VERSION: u32 = 1;

pub fn model_to_json(net: &Mlp) -> String {
    serde_json::to_string_pretty(&ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        net: net.clone(),
    })
    .expect("network serializes")
}

pub fn model_from_json(text: &str) -> Result<Mlp, ForecastError> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| ForecastError::ModelFile(e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(ForecastError::ModelFile(format!(
            "unsupported model {} v{}",
            file.format, file.version
        )));
    }
    // Re-validate shapes through the checked constructor.
    let mut net = Mlp::from_parameters(
        file.net.layer_sizes(),
        file.net.weights().to_vec(),
        file.net.biases().to_vec(),
        file.net.activation,
    )?;
    net.normalization = file.net.normalization;
    Ok(net)
}

pub fn save_model(net: &Mlp, path: &Path) -> Result<(), ForecastError> {
    fs::write(path, model_to_json(net))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Mlp, ForecastError> {
    model_from_json(&fs::read_to_string(path)?)
}
