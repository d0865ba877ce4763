//! Day simulation: the availability window is stepped slot by slot, every
//! EV decides against the same pre-decision state, demand is aggregated
//! additively and each decision is rewarded and learned from.
//!
//! Experiments (many runs × methods × prediction modes) live in
//! [`experiment`]; their serialised form in [`report`].

mod experiment;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    reward_charge, reward_price, Action, AgentState, Decision, DemandLevel, EvAgent, Objective,
};
use crate::baselines::{
    cost, greedy_schedule, night_greedy_schedule, solve_exact, valley_fill, BaselineError,
    ChargingSchedule, CostInstance, MAX_EXACT_EVS, MAX_EXACT_SLOTS,
};
use crate::driftwatch::DriftError;
use crate::forecast::ForecastError;
use crate::scenario::{
    mean_std, AgentConfig, DayProfile, EvSpec, PriceReference, RewardConfig, ScenarioConfig,
    ScenarioError, SlotClock,
};

pub use experiment::{run_experiment, run_seed, simulate, RunConfig};
pub use report::{
    AggregateTrace, CellReport, DriftSummary, ExperimentReport, Overlay, RunReport, SocSummary,
    TableRow, REPORT_FORMAT, REPORT_VERSION,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("schedules span {0} and {1} slots")]
    SpanMismatch(usize, usize),
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error("run {run} ({method}, {mode}): {source}")]
    InRun {
        run: usize,
        method: String,
        mode: String,
        #[source]
        source: Box<EngineError>,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pmarl,
    Greedy,
    NightGreedy,
    ValleyFill,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Greedy,
        Method::NightGreedy,
        Method::Pmarl,
        Method::ValleyFill,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Pmarl => "pmarl",
            Method::Greedy => "greedy",
            Method::NightGreedy => "night_greedy",
            Method::ValleyFill => "valley_fill",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "pmarl" | "p_marl" => Ok(Method::Pmarl),
            "greedy" => Ok(Method::Greedy),
            "night_greedy" => Ok(Method::NightGreedy),
            "valley_fill" | "vf" => Ok(Method::ValleyFill),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    /// The forecast is the realised day.
    Perfect,
    /// Day-ahead network forecast.
    Simple,
    /// Anomalous exploitation day, forecast revised by drift detection.
    AnomalyRepredict,
}

impl PredictionMode {
    pub const ALL: [PredictionMode; 3] = [
        PredictionMode::Perfect,
        PredictionMode::AnomalyRepredict,
        PredictionMode::Simple,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PredictionMode::Perfect => "perfect",
            PredictionMode::Simple => "simple",
            PredictionMode::AnomalyRepredict => "anomaly_repredict",
        }
    }
}

impl fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "perfect" => Ok(PredictionMode::Perfect),
            "simple" => Ok(PredictionMode::Simple),
            "anomaly_repredict" | "anomaly" => Ok(PredictionMode::AnomalyRepredict),
            other => Err(format!("unknown prediction mode {other:?}")),
        }
    }
}

/// One day as the fleet sees it, restricted to the availability window.
#[derive(Debug, Clone, PartialEq)]
pub struct DayPlan {
    /// Realised baseload, kW.
    pub baseload_kw: Vec<f64>,
    /// Forecast available to the agents, kW.
    pub forecast_kw: Vec<f64>,
    /// Benchmark schedule on the realised baseload.
    pub optimal: ChargingSchedule,
}

/// Static per-run parameters of the simulated community.
#[derive(Debug, Clone)]
pub struct World {
    pub clock: SlotClock,
    /// Day slots of the availability window, chronological.
    pub window: Vec<usize>,
    pub spec: EvSpec,
    /// SOC every EV starts each episode with.
    pub soc_init: Vec<f64>,
    pub agent: AgentConfig,
    pub rewards: RewardConfig,
    /// Window index where the night tariff starts.
    pub tariff_index: usize,
    pub deviation_threshold: f64,
}

impl World {
    pub fn new(cfg: &ScenarioConfig, soc_init: Vec<f64>) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let window = cfg.window_slots()?;
        let tariff_index = window
            .iter()
            .position(|&s| s == cfg.night_tariff_start_slot)
            .ok_or_else(|| {
                ScenarioError::InvalidConfig("night tariff start lies outside the window".into())
            })?;
        Ok(Self {
            clock: cfg.clock()?,
            window,
            spec: cfg.ev,
            soc_init,
            agent: cfg.agent.clone(),
            rewards: cfg.rewards.clone(),
            tariff_index,
            deviation_threshold: cfg.deviation_threshold,
        })
    }

    pub fn n_evs(&self) -> usize {
        self.soc_init.len()
    }

    pub fn n_slots(&self) -> usize {
        self.window.len()
    }

    pub fn soc_per_slot(&self) -> f64 {
        self.spec.soc_per_slot(&self.clock)
    }

    /// Window slice of a full-day series.
    pub fn window_of(&self, day: &[f64]) -> Vec<f64> {
        self.window.iter().map(|&s| day[s]).collect()
    }

    /// Slots each EV needs to reach the target SOC.
    pub fn target_needs(&self) -> Vec<usize> {
        let per = self.soc_per_slot();
        self.soc_init
            .iter()
            .map(|&s| slots_to_target(s, self.spec.target_soc, per))
            .map(|k| k.min(self.n_slots()))
            .collect()
    }

    /// Whole slots that fit before the battery is full.
    pub fn full_needs(&self) -> Vec<usize> {
        let per = self.soc_per_slot();
        self.soc_init
            .iter()
            .map(|&s| (((1.0 - s) / per) + 1e-9).floor() as usize)
            .map(|k| k.min(self.n_slots()))
            .collect()
    }

    /// Cost instance on `baseload_kw` with the target needs.
    pub fn instance(&self, baseload_kw: &[f64]) -> CostInstance {
        let base = baseload_kw
            .iter()
            .map(|b| b / self.spec.charge_power)
            .collect();
        CostInstance::homogeneous(base, self.target_needs())
    }

    /// Benchmark schedule: exact at tiny scale, valley filling otherwise.
    pub fn benchmark(&self, baseload_kw: &[f64]) -> Result<ChargingSchedule, BaselineError> {
        let inst = self.instance(baseload_kw);
        if self.n_evs() <= MAX_EXACT_EVS && self.n_slots() <= MAX_EXACT_SLOTS {
            solve_exact(&inst)
        } else {
            valley_fill(&inst)
        }
    }

    /// Window-restricted plan for a realised day and the forecast shown to agents.
    pub fn plan(&self, actual: &DayProfile, forecast: &[f64]) -> Result<DayPlan, BaselineError> {
        let baseload_kw = self.window_of(actual.samples());
        let optimal = self.benchmark(&baseload_kw)?;
        Ok(DayPlan {
            forecast_kw: self.window_of(forecast),
            baseload_kw,
            optimal,
        })
    }

    /// Schedule a non-learning method commits to for `day`.
    pub fn fixed_schedule(
        &self,
        method: Method,
        day: &DayPlan,
    ) -> Result<ChargingSchedule, BaselineError> {
        match method {
            Method::Greedy => {
                let inst = CostInstance::homogeneous(vec![0.0; self.n_slots()], self.full_needs());
                greedy_schedule(&inst)
            }
            Method::NightGreedy => {
                let inst = CostInstance::homogeneous(vec![0.0; self.n_slots()], self.full_needs());
                night_greedy_schedule(&inst, self.tariff_index)
            }
            Method::ValleyFill => valley_fill(&self.instance(&day.forecast_kw)),
            Method::Pmarl => Err(BaselineError::Malformed(
                "pmarl has no fixed schedule".into(),
            )),
        }
    }

    /// Fresh agents for a run, tables empty.
    pub fn agents(&self, run_seed: u64) -> Vec<EvAgent> {
        self.soc_init
            .iter()
            .enumerate()
            .map(|(i, &soc)| EvAgent::new(i, self.spec, soc, &self.agent, run_seed))
            .collect()
    }

    /// Exploration rate for episode `e`: linear decay over the exploration
    /// phase, zero afterwards.
    pub fn epsilon(&self, episode: usize, exploration: usize) -> f64 {
        if episode >= exploration {
            0.0
        } else if exploration == 1 {
            self.agent.epsilon_start
        } else {
            let t = episode as f64 / (exploration - 1) as f64;
            self.agent.epsilon_start + t * (self.agent.epsilon_end - self.agent.epsilon_start)
        }
    }

    /// Mean and standard deviation the realised load is classified against.
    pub fn price_reference(&self, forecast_kw: &[f64]) -> (f64, f64) {
        let (mean, std) = mean_std(forecast_kw);
        let fleet_kw: f64 =
            self.target_needs().iter().sum::<usize>() as f64 * self.spec.charge_power;
        let width = std * self.rewards.level_width;
        let centre = match self.rewards.price_reference {
            PriceReference::Forecast => mean,
            PriceReference::ForecastWithFleet => mean + fleet_kw / forecast_kw.len() as f64,
            PriceReference::FillLevel => fill_level(forecast_kw, fleet_kw),
        };
        (centre, width)
    }
}

/// Water level `L` with `Σ max(0, L − b_j) = energy` (kW·slots).
pub fn fill_level(baseload: &[f64], energy: f64) -> f64 {
    let mut sorted = baseload.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 1..=sorted.len() {
        // Level filled up to sorted[k-1] across the k lowest slots.
        let next = sorted.get(k).copied().unwrap_or(f64::INFINITY);
        acc += sorted[k - 1];
        let level = (energy + acc) / k as f64;
        if level <= next {
            return level;
        }
    }
    unreachable!("the last level is always below infinity")
}

/// Charging slots still needed to lift `soc` to `target`.
pub fn slots_to_target(soc: f64, target: f64, per_slot: f64) -> usize {
    let gap = target - soc;
    if gap <= 1e-12 {
        0
    } else {
        ((gap / per_slot) - 1e-9).ceil() as usize
    }
}

/// Learning and exploration settings for one episode.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeOptions {
    pub index: usize,
    pub epsilon: f64,
    pub learn: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_index: usize,
    pub schedule: ChargingSchedule,
    pub baseload_kw: Vec<f64>,
    /// `baseload_kw + charge_power × N_j`.
    pub aggregate_kw: Vec<f64>,
    pub efficiency: f64,
    pub deviations: usize,
    /// Cost function value of the realised schedule.
    pub cost: f64,
    /// SOC at 09:00 before the trip.
    pub socs_departure: Vec<f64>,
    /// SOC after the trip; negative means the EV ran out.
    pub socs_end: Vec<f64>,
    pub stranded: usize,
}

/// Result for a realised schedule on `day`.
pub fn score_schedule(
    world: &World,
    day: &DayPlan,
    schedule: ChargingSchedule,
    episode_index: usize,
) -> Result<EpisodeResult, EngineError> {
    let n = world.n_evs();
    let counts = schedule.column_sums();
    let aggregate_kw = day
        .baseload_kw
        .iter()
        .zip(&counts)
        .map(|(b, &c)| b + world.spec.charge_power * c as f64)
        .collect();
    let per = world.soc_per_slot();
    let socs_departure: Vec<f64> = schedule
        .row_sums()
        .iter()
        .zip(&world.soc_init)
        .map(|(&k, s0)| s0 + k as f64 * per)
        .collect();
    let trip = world.spec.trip_soc();
    let socs_end: Vec<f64> = socs_departure.iter().map(|s| s - trip).collect();
    let stranded = socs_end.iter().filter(|&&s| s < 0.0).count();
    let inst = world.instance(&day.baseload_kw);
    Ok(EpisodeResult {
        episode_index,
        efficiency: efficiency(&schedule, &day.optimal, n)?,
        deviations: deviation_count(&schedule, &day.optimal, n, world.deviation_threshold)?,
        cost: cost(&inst, &schedule)?,
        schedule,
        baseload_kw: day.baseload_kw.clone(),
        aggregate_kw,
        socs_departure,
        socs_end,
        stranded,
    })
}

/// Simulates one day for a learning fleet.
///
/// Each agent starts from its initial SOC. Agents already at their target
/// (or full) stay idle. The price objective rewards against the realised
/// aggregate load; the state's demand level is read from the forecast.
pub fn run_episode(
    world: &World,
    agents: &mut [EvAgent],
    day: &DayPlan,
    opts: EpisodeOptions,
) -> Result<EpisodeResult, EngineError> {
    let (m, n) = (world.n_slots(), agents.len());
    let per = world.soc_per_slot();
    let buckets = world.agent.soc_buckets;
    let (f_mean, f_std) = mean_std(&day.forecast_kw);
    let levels: Vec<DemandLevel> = day
        .forecast_kw
        .iter()
        .map(|&f| DemandLevel::classify(f, f_mean, f_std))
        .collect();
    let (ref_mean, ref_std) = world.price_reference(&day.forecast_kw);

    for (a, &soc) in agents.iter_mut().zip(&world.soc_init) {
        a.soc = soc;
        a.epsilon = opts.epsilon;
    }
    let mut active: Vec<bool> = agents.iter().map(|a| !a.is_satisfied()).collect();
    let mut schedule = ChargingSchedule::empty(n, m);
    let mut charged = vec![0usize; n];

    for j in 0..m {
        let states: Vec<AgentState> = agents
            .iter()
            .map(|a| AgentState::new(j, a.soc, buckets, levels[j]))
            .collect();
        let slots_left = m - j;
        let decisions: Vec<Option<Decision>> = agents
            .iter_mut()
            .enumerate()
            .map(|(i, a)| {
                if !active[i] {
                    return None;
                }
                let d = a.select_action(&states[i], &states[i]);
                let short = world.agent.deadline_guard
                    && slots_to_target(a.soc, a.spec.target_soc, per) >= slots_left;
                Some(if short {
                    Decision {
                        action: Action::Charge,
                        winner: Objective::Charge,
                        explored: false,
                    }
                } else {
                    d
                })
            })
            .collect();
        let load = decisions
            .iter()
            .filter(|d| matches!(d, Some(d) if d.action == Action::Charge))
            .count();
        let aggregate = day.baseload_kw[j] + world.spec.charge_power * load as f64;
        let realised = DemandLevel::classify(aggregate, ref_mean, ref_std);

        for (i, a) in agents.iter_mut().enumerate() {
            let Some(d) = decisions[i] else { continue };
            let before = a.soc;
            if d.action == Action::Charge {
                charged[i] += 1;
                a.soc = world.soc_init[i] + charged[i] as f64 * per;
                schedule.set(i, j, true);
            }
            let done = a.is_satisfied();
            let last = j + 1 == m;
            let mut r_charge = reward_charge(d.action, before, a.spec.target_soc, &world.rewards);
            if last && !done {
                r_charge += world.rewards.unmet_target_penalty;
            }
            let r_price = reward_price(d.action, realised, &world.rewards);
            let next =
                (!done && !last).then(|| AgentState::new(j + 1, a.soc, buckets, levels[j + 1]));
            if opts.learn {
                a.learn(
                    &d,
                    &states[i],
                    &states[i],
                    r_charge,
                    r_price,
                    next.as_ref(),
                    next.as_ref(),
                );
            }
            if done {
                active[i] = false;
            }
        }
    }
    score_schedule(world, day, schedule, opts.index)
}

fn check_span(a: &ChargingSchedule, b: &ChargingSchedule) -> Result<(), EngineError> {
    if a.n_slots() != b.n_slots() {
        return Err(EngineError::SpanMismatch(a.n_slots(), b.n_slots()));
    }
    Ok(())
}

/// `(1/m) Σ_j (1 − |X_j − X̂_j| / n)` over per-slot charging counts.
pub fn efficiency(
    schedule: &ChargingSchedule,
    optimal: &ChargingSchedule,
    n_evs: usize,
) -> Result<f64, EngineError> {
    check_span(schedule, optimal)?;
    Ok(efficiency_of_counts(
        &schedule.column_sums(),
        &optimal.column_sums(),
        n_evs,
    ))
}

pub fn efficiency_of_counts(x: &[usize], x_hat: &[usize], n_evs: usize) -> f64 {
    let m = x.len();
    if m == 0 {
        return 1.0;
    }
    if n_evs == 0 {
        return if x == x_hat { 1.0 } else { 0.0 };
    }
    let total: f64 = x
        .iter()
        .zip(x_hat)
        .map(|(&a, &b)| 1.0 - a.abs_diff(b) as f64 / n_evs as f64)
        .sum();
    (total / m as f64).clamp(0.0, 1.0)
}

/// Slots where `|X_j − X̂_j| / n` exceeds `threshold`.
pub fn deviation_count(
    schedule: &ChargingSchedule,
    optimal: &ChargingSchedule,
    n_evs: usize,
    threshold: f64,
) -> Result<usize, EngineError> {
    check_span(schedule, optimal)?;
    let n = n_evs.max(1) as f64;
    Ok(schedule
        .column_sums()
        .iter()
        .zip(optimal.column_sums())
        .filter(|(&a, b)| a.abs_diff(*b) as f64 / n > threshold)
        .count())
}
