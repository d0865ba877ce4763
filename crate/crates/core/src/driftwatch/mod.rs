//! Intra-day change detection: compare the observed morning against the
//! forecast, classify a deviating day with a self-organising map, find the
//! closest historical day of that class and repredict the rest of the day
//! from a mash-up of observation and match.

mod som;

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::{mape, predict_from_profile, Forecast, ForecastError, ForecastSource, Mlp};
use crate::scenario::{DayKind, DayProfile, HistoryWindow};

pub use som::{som_train, Som, SomInit, SomParams};

#[derive(Debug, Error)]
pub enum DriftError {
    #[error("observations cover {got} slots but the window needs {needed}")]
    WindowNotCovered { needed: usize, got: usize },
    #[error("no patterns to train on")]
    EmptyPatternSet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite codebook value")]
    NonFinite,
    #[error("history is empty")]
    EmptyHistory,
    #[error("SOM file: {0}")]
    SomFile(String),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outcome of a monitoring check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeVerdict {
    pub triggered: bool,
    /// Percent MAPE over the part of the window that was examined.
    pub window_mape: f64,
    /// Slot from which the rest of the day is considered unobserved.
    pub trigger_slot: Option<usize>,
    pub matched_day: Option<DayProfile>,
    pub matched_class: Option<usize>,
}

impl ChangeVerdict {
    fn quiet(window_mape: f64) -> Self {
        Self {
            triggered: false,
            window_mape,
            trigger_slot: None,
            matched_day: None,
            matched_class: None,
        }
    }
}

/// Single checkpoint at the end of `window`: triggered iff the window MAPE
/// exceeds `threshold_pct`.
pub fn monitor(
    forecast: &Forecast,
    observed: &[f64],
    window: Range<usize>,
    threshold_pct: f64,
) -> Result<ChangeVerdict, DriftError> {
    if observed.len() < window.end || window.end > forecast.samples().len() || window.is_empty() {
        return Err(DriftError::WindowNotCovered {
            needed: window.end,
            got: observed.len(),
        });
    }
    let m = mape(
        &observed[window.clone()],
        &forecast.samples()[window.clone()],
    )?;
    if m > threshold_pct {
        Ok(ChangeVerdict {
            triggered: true,
            window_mape: m,
            trigger_slot: Some(window.end),
            matched_day: None,
            matched_class: None,
        })
    } else {
        Ok(ChangeVerdict::quiet(m))
    }
}

/// Checks after every slot of `window` (cumulative MAPE from the window
/// start, at least `min_slots` slots) and stops at the first exceedance.
pub fn monitor_per_slot(
    forecast: &Forecast,
    observed: &[f64],
    window: Range<usize>,
    threshold_pct: f64,
    min_slots: usize,
) -> Result<ChangeVerdict, DriftError> {
    let mut last = ChangeVerdict::quiet(0.0);
    for end in window.start + min_slots.max(1)..=window.end {
        let v = monitor(forecast, observed, window.start..end, threshold_pct)?;
        if v.triggered {
            return Ok(v);
        }
        last = v;
    }
    Ok(last)
}

/// Observed values for the first `prefix.len()` slots, padding after.
pub fn pad_prefix(prefix: &[f64], padding: &[f64]) -> Vec<f64> {
    prefix
        .iter()
        .chain(padding.iter().skip(prefix.len()))
        .copied()
        .collect()
}

/// How the unobserved tail of a prefix is filled before SOM classification.
#[derive(Debug, Clone, Copy)]
pub enum MatchPadding<'a> {
    /// Fill with the current forecast.
    Forecast(&'a Forecast),
    /// Compare only observed slots, i.e. each node is padded with its own
    /// codebook values.
    Codebook,
}

fn prefix_distance(day: &[f64], prefix: &[f64]) -> f64 {
    day.iter()
        .zip(prefix)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// SOM node for a partially observed day.
pub fn classify_prefix(
    som: &Som,
    prefix: &[f64],
    padding: MatchPadding,
) -> Result<usize, DriftError> {
    if prefix.len() > som.dim() {
        return Err(DriftError::DimensionMismatch {
            expected: som.dim(),
            got: prefix.len(),
        });
    }
    match padding {
        MatchPadding::Forecast(f) => Ok(som.classify(&pad_prefix(prefix, f.samples()))?.0),
        MatchPadding::Codebook => {
            let mut best = (0, f64::INFINITY);
            for (i, c) in som.codebook().iter().enumerate() {
                let d = prefix_distance(c, prefix);
                if d < best.1 {
                    best = (i, d);
                }
            }
            Ok(best.0)
        }
    }
}

/// Closest historical day to the observed prefix within the prefix's SOM
/// class (see [`classify_prefix`]). Falls back to the globally nearest day
/// when no history day maps to that class.
pub fn find_match(
    som: &Som,
    history: &HistoryWindow,
    prefix: &[f64],
    padding: MatchPadding,
) -> Result<(DayProfile, usize), DriftError> {
    if history.is_empty() {
        return Err(DriftError::EmptyHistory);
    }
    let node = classify_prefix(som, prefix, padding)?;
    let nearest = |days: &mut dyn Iterator<Item = &DayProfile>| {
        days.min_by(|a, b| {
            prefix_distance(a.samples(), prefix).total_cmp(&prefix_distance(b.samples(), prefix))
        })
        .cloned()
    };
    let mut in_class = Vec::new();
    for d in history.days() {
        if som.classify(d.samples())?.0 == node {
            in_class.push(d);
        }
    }
    let day = nearest(&mut in_class.into_iter())
        .or_else(|| nearest(&mut history.days().iter()))
        .expect("history is non-empty");
    Ok((day, node))
}

/// Mash-up reprediction: the network's previous-day input is the observed
/// prefix followed by the match's remaining slots. Slots before the prefix
/// end keep their observed values; later slots come from the network.
pub fn repredict(
    net: &Mlp,
    prefix: &[f64],
    matched: &DayProfile,
    kind: DayKind,
) -> Result<Forecast, DriftError> {
    if prefix.len() > matched.len() {
        return Err(DriftError::DimensionMismatch {
            expected: matched.len(),
            got: prefix.len(),
        });
    }
    let mashup = pad_prefix(prefix, matched.samples());
    let predicted = predict_from_profile(net, &mashup, kind, &[])?;
    Ok(Forecast::new(
        pad_prefix(prefix, &predicted),
        ForecastSource::Repredicted,
    ))
}

/// Owned counterpart of [`MatchPadding`] for configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Forecast,
    Codebook,
}

/// Full pathway: monitor, and when triggered match and repredict.
#[allow(clippy::too_many_arguments)]
pub fn detect_and_repredict(
    net: &Mlp,
    som: &Som,
    history: &HistoryWindow,
    forecast: &Forecast,
    observed_day: &[f64],
    kind: DayKind,
    window: Range<usize>,
    threshold_pct: f64,
    per_slot: bool,
    padding: Padding,
) -> Result<(ChangeVerdict, Forecast), DriftError> {
    let mut verdict = if per_slot {
        monitor_per_slot(forecast, observed_day, window, threshold_pct, 4)?
    } else {
        monitor(forecast, observed_day, window, threshold_pct)?
    };
    let Some(t) = verdict.trigger_slot else {
        return Ok((verdict, forecast.clone()));
    };
    let prefix = &observed_day[..t];
    let padding = match padding {
        Padding::Forecast => MatchPadding::Forecast(forecast),
        Padding::Codebook => MatchPadding::Codebook,
    };
    let (day, node) = find_match(som, history, prefix, padding)?;
    let new = repredict(net, prefix, &day, kind)?;
    verdict.matched_day = Some(day);
    verdict.matched_class = Some(node);
    Ok((verdict, new))
}

#[derive(Serialize, Deserialize)]
struct SomFile {
    format: String,
    version: u32,
    som: Som,
}

const SOM_FORMAT: &str = "pmarl-som";
const SOM_VERSION: u32 = 1;

pub fn som_to_json(som: &Som) -> String {
    serde_json::to_string_pretty(&SomFile {
        format: SOM_FORMAT.into(),
        version: SOM_VERSION,
        som: som.clone(),
    })
    .expect("SOM serializes")
}

pub fn som_from_json(text: &str) -> Result<Som, DriftError> {
    let file: SomFile =
        serde_json::from_str(text).map_err(|e| DriftError::SomFile(e.to_string()))?;
    if file.format != SOM_FORMAT || file.version != SOM_VERSION {
        return Err(DriftError::SomFile(format!(
            "unsupported SOM {} v{}",
            file.format, file.version
        )));
    }
    let mut som = Som::from_codebook(file.som.rows, file.som.cols, file.som.codebook().to_vec())?;
    som.labels = file.som.labels;
    som.params = file.som.params;
    Ok(som)
}

pub fn save_som(som: &Som, path: &Path) -> Result<(), DriftError> {
    fs::write(path, som_to_json(som))?;
    Ok(())
}

pub fn load_som(path: &Path) -> Result<Som, DriftError> {
    som_from_json(&fs::read_to_string(path)?)
}
