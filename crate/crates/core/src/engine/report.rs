use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::experiment::RunConfig;
use super::{EngineError, EpisodeResult, Method, PredictionMode};
use crate::scenario::ScenarioConfig;

pub const REPORT_FORMAT: &str = "pmarl-report";
pub const REPORT_VERSION: u32 = 1;

/// End-of-day SOC band reported alongside the distribution.
const SOC_BAND: (f64, f64) = (0.3, 0.9);

/// Outcome of change detection on the anomalous day of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub triggered: bool,
    pub window_mape_pct: f64,
    pub trigger_slot: Option<usize>,
    pub matched_date: Option<NaiveDate>,
    pub matched_class: Option<usize>,
    /// MAPE over the slots after the trigger, simple forecast.
    pub future_mape_simple_pct: f64,
    /// Same slots, forecast actually used (revised when triggered).
    pub future_mape_final_pct: f64,
}

/// One method × mode × run, before aggregation.
pub(crate) struct RunCell {
    pub run: usize,
    pub seed: u64,
    pub method: Method,
    pub mode: PredictionMode,
    pub episodes: Vec<EpisodeResult>,
    pub forecast_kw: Vec<f64>,
    pub optimal_counts: Vec<usize>,
    pub forecast_mape_pct: Option<f64>,
    pub drift: Option<DriftSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    /// Per episode.
    pub efficiency: Vec<f64>,
    pub deviations: Vec<usize>,
    pub cost: Vec<f64>,
    pub stranded: Vec<usize>,
    pub exploitation_efficiency: f64,
    /// End-of-day SOC of every EV over the exploitation episodes.
    pub soc_end: Vec<f64>,
    pub forecast_mape_pct: Option<f64>,
    pub drift: Option<DriftSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub band: (f64, f64),
    /// Share of values inside `band`.
    pub in_band: f64,
    /// Counts over ten 0.1-wide bins on [0, 1]; values outside are clamped
    /// into the end bins.
    pub histogram: Vec<usize>,
}

impl SocSummary {
    pub fn of(values: &[f64]) -> Self {
        let mut histogram = vec![0; 10];
        for v in values {
            histogram[((v * 10.0).floor().max(0.0) as usize).min(9)] += 1;
        }
        let count = values.len();
        let inside = values
            .iter()
            .filter(|v| (SOC_BAND.0..=SOC_BAND.1).contains(*v))
            .count();
        Self {
            count,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: mean(values),
            band: SOC_BAND,
            in_band: if count == 0 {
                0.0
            } else {
                inside as f64 / count as f64
            },
            histogram,
        }
    }
}

/// Window-aligned mean curves for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub baseload_kw: Vec<f64>,
    pub forecast_kw: Vec<f64>,
    /// Mean realised load over exploitation episodes and runs.
    pub aggregate_kw: Vec<f64>,
    /// Baseload plus the benchmark schedule's load.
    pub optimal_kw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub method: Method,
    pub mode: PredictionMode,
    /// Mean exploitation-phase efficiency over runs.
    pub efficiency: f64,
    pub efficiency_std: f64,
    /// Mean over runs, per episode.
    pub efficiency_by_episode: Vec<f64>,
    /// Mean exploitation-phase deviation count.
    pub deviation_count: f64,
    pub cost: f64,
    pub stranded: usize,
    pub soc_end: SocSummary,
    pub overlay: Overlay,
    pub runs: Vec<RunReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: Method,
    /// Exploitation efficiency per mode, in the report's mode order.
    pub efficiency: Vec<f64>,
}

/// Per-episode aggregate load of one cell, for CSV export.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateTrace {
    pub method: Option<Method>,
    pub mode: Option<PredictionMode>,
    /// `(run, episode, aggregate_kw)`.
    pub rows: Vec<(usize, usize, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub version: u32,
    pub config: ScenarioConfig,
    pub n_runs: usize,
    pub n_episodes: usize,
    pub exploration_episodes: usize,
    pub methods: Vec<Method>,
    pub modes: Vec<PredictionMode>,
    pub table: Vec<TableRow>,
    pub cells: Vec<CellReport>,
    #[serde(skip)]
    pub traces: Vec<AggregateTrace>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn column_means(rows: &[&[f64]]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect()
}

pub(crate) fn assemble(
    cfg: &RunConfig,
    runs: Vec<Vec<RunCell>>,
    charge_power: f64,
) -> ExperimentReport {
    let sc = &cfg.scenario;
    let explore = sc.exploration_episodes;
    let mut cells = Vec::new();
    let mut traces = Vec::new();
    for &mode in &cfg.modes {
        for &method in &cfg.methods {
            let mine: Vec<&RunCell> = runs
                .iter()
                .flatten()
                .filter(|c| c.method == method && c.mode == mode)
                .collect();
            let run_reports: Vec<RunReport> = mine.iter().map(|c| run_report(c, explore)).collect();
            let per_run: Vec<f64> = run_reports
                .iter()
                .map(|r| r.exploitation_efficiency)
                .collect();
            let curves: Vec<&[f64]> = run_reports
                .iter()
                .map(|r| r.efficiency.as_slice())
                .collect();
            let exploit: Vec<&EpisodeResult> = mine
                .iter()
                .flat_map(|c| c.episodes.iter().skip(explore))
                .collect();
            let aggregates: Vec<&[f64]> =
                exploit.iter().map(|e| e.aggregate_kw.as_slice()).collect();
            let baselines: Vec<&[f64]> = exploit.iter().map(|e| e.baseload_kw.as_slice()).collect();
            let forecasts: Vec<&[f64]> = mine.iter().map(|c| c.forecast_kw.as_slice()).collect();
            let baseload_kw = column_means(&baselines);
            let optimal_load: Vec<Vec<f64>> = mine
                .iter()
                .map(|c| {
                    let base = &c.episodes.last().expect("episodes").baseload_kw;
                    base.iter()
                        .zip(&c.optimal_counts)
                        .map(|(b, &k)| b + charge_power * k as f64)
                        .collect()
                })
                .collect();
            let optimal_refs: Vec<&[f64]> = optimal_load.iter().map(|v| v.as_slice()).collect();
            let soc_all: Vec<f64> = run_reports
                .iter()
                .flat_map(|r| r.soc_end.iter().copied())
                .collect();
            cells.push(CellReport {
                method,
                mode,
                efficiency: mean(&per_run),
                efficiency_std: std_dev(&per_run),
                efficiency_by_episode: column_means(&curves),
                deviation_count: mean(
                    &exploit
                        .iter()
                        .map(|e| e.deviations as f64)
                        .collect::<Vec<_>>(),
                ),
                cost: mean(&exploit.iter().map(|e| e.cost).collect::<Vec<_>>()),
                stranded: exploit.iter().map(|e| e.stranded).sum(),
                soc_end: SocSummary::of(&soc_all),
                overlay: Overlay {
                    baseload_kw,
                    forecast_kw: column_means(&forecasts),
                    aggregate_kw: column_means(&aggregates),
                    optimal_kw: column_means(&optimal_refs),
                },
                runs: run_reports,
            });
            traces.push(AggregateTrace {
                method: Some(method),
                mode: Some(mode),
                rows: mine
                    .iter()
                    .flat_map(|c| {
                        c.episodes
                            .iter()
                            .map(move |e| (c.run, e.episode_index, e.aggregate_kw.clone()))
                    })
                    .collect(),
            });
        }
    }
    let table = cfg
        .methods
        .iter()
        .map(|&method| TableRow {
            method,
            efficiency: cfg
                .modes
                .iter()
                .map(|&mode| {
                    cells
                        .iter()
                        .find(|c| c.method == method && c.mode == mode)
                        .map_or(f64::NAN, |c| c.efficiency)
                })
                .collect(),
        })
        .collect();
    ExperimentReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        config: sc.clone(),
        n_runs: cfg.n_runs,
        n_episodes: sc.n_episodes,
        exploration_episodes: explore,
        methods: cfg.methods.clone(),
        modes: cfg.modes.clone(),
        table,
        cells,
        traces,
    }
}

fn run_report(c: &RunCell, explore: usize) -> RunReport {
    let efficiency: Vec<f64> = c.episodes.iter().map(|e| e.efficiency).collect();
    RunReport {
        run: c.run,
        seed: c.seed,
        exploitation_efficiency: mean(&efficiency[explore.min(efficiency.len())..]),
        efficiency,
        deviations: c.episodes.iter().map(|e| e.deviations).collect(),
        cost: c.episodes.iter().map(|e| e.cost).collect(),
        stranded: c.episodes.iter().map(|e| e.stranded).collect(),
        soc_end: c
            .episodes
            .iter()
            .skip(explore)
            .flat_map(|e| e.socs_end.iter().copied())
            .collect(),
        forecast_mape_pct: c.forecast_mape_pct,
        drift: c.drift.clone(),
    }
}

impl ExperimentReport {
    pub fn cell(&self, method: Method, mode: PredictionMode) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.mode == mode)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        let r: Self =
            serde_json::from_str(text).map_err(|e| EngineError::MalformedReport(e.to_string()))?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(EngineError::MalformedReport(format!(
                "unsupported report {} v{}",
                r.format, r.version
            )));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// `run,episode,s0..s{m-1}` rows of realised aggregate load.
    pub fn aggregate_csv(&self, method: Method, mode: PredictionMode) -> Option<String> {
        let t = self
            .traces
            .iter()
            .find(|t| t.method == Some(method) && t.mode == Some(mode))?;
        let m = t.rows.first().map_or(0, |r| r.2.len());
        let mut out = String::from("run,episode");
        for j in 0..m {
            let _ = write!(out, ",s{j}");
        }
        out.push('\n');
        for (run, ep, vals) in &t.rows {
            let _ = write!(out, "{run},{ep}");
            for v in vals {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        Some(out)
    }

    /// Writes `report.json` and one aggregate CSV per cell; returns the paths.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<PathBuf>, EngineError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json = dir.join("report.json");
        fs::write(&json, self.to_json())?;
        written.push(json);
        for c in &self.cells {
            if let Some(csv) = self.aggregate_csv(c.method, c.mode) {
                let p = dir.join(format!("aggregate_{}_{}.csv", c.method, c.mode));
                fs::write(&p, csv)?;
                written.push(p);
            }
        }
        Ok(written)
    }

    /// Plain-text efficiency matrix, methods × prediction modes, in percent.
    pub fn table_text(&self) -> String {
        let mut out = format!("{:<14}", "method");
        for m in &self.modes {
            let _ = write!(out, "{:>20}", m.name());
        }
        out.push('\n');
        for row in &self.table {
            let _ = write!(out, "{:<14}", row.method.name());
            for v in &row.efficiency {
                let _ = write!(out, "{:>19.1}%", v * 100.0);
            }
            out.push('\n');
        }
        out
    }
}
