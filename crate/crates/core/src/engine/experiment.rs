use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{assemble, DriftSummary, RunCell};
use super::{
    run_episode, score_schedule, DayPlan, EngineError, EpisodeOptions, EpisodeResult,
    ExperimentReport, Method, PredictionMode, World,
};
use crate::driftwatch::{detect_and_repredict, som_train, Padding, SomInit, SomParams};
use crate::forecast::{mape, predict_day, train_forecaster_excluding};
use crate::scenario::{
    inject_anomaly, load_history, synth_baseload_with, AnomalyKind, DayProfile, HistoryWindow,
    ScenarioConfig, ScenarioError, SynthParams,
};

/// What to simulate: every listed method under every listed prediction mode,
/// `n_runs` times with derived seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub modes: Vec<PredictionMode>,
    pub methods: Vec<Method>,
    pub n_runs: usize,
}

impl RunConfig {
    /// All methods × all modes, run count from the scenario.
    pub fn full(scenario: ScenarioConfig) -> Self {
        Self {
            n_runs: scenario.n_runs,
            scenario,
            modes: PredictionMode::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
        }
    }

    pub fn single(scenario: ScenarioConfig, method: Method, mode: PredictionMode) -> Self {
        Self {
            n_runs: scenario.n_runs,
            scenario,
            modes: vec![mode],
            methods: vec![method],
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.scenario.validate()?;
        let bad = |m: &str| Err(ScenarioError::InvalidConfig(m.into()).into());
        if self.n_runs == 0 {
            return bad("n_runs must be >= 1");
        }
        if self.modes.is_empty() || self.methods.is_empty() {
            return bad("at least one method and one prediction mode are required");
        }
        if self.scenario.exploration_episodes >= self.scenario.n_episodes {
            return bad("at least one exploitation episode is required");
        }
        Ok(())
    }
}

/// Seed of run `r`; runs are independent streams derived from the base seed.
pub fn run_seed(base: u64, run: usize) -> u64 {
    base.wrapping_add((run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Demand data for one run: history (with known-anomalous days flagged)
/// and the day the fleet is scheduled for.
pub(crate) struct Gathered {
    pub history: HistoryWindow,
    pub anomalous: Vec<bool>,
    pub today: DayProfile,
}

pub(crate) fn gather(cfg: &ScenarioConfig, seed: u64) -> Result<Gathered, EngineError> {
    let clock = cfg.clock()?;
    if let Some(path) = &cfg.history_csv {
        let all = load_history(path, &clock)?;
        if all.len() < 3 {
            return Err(ScenarioError::InvalidConfig(format!(
                "{} holds {} whole days; at least 3 are needed",
                path.display(),
                all.len()
            ))
            .into());
        }
        let today = all.last().expect("non-empty").clone();
        let history = all.prefix(all.len() - 1);
        let anomalous = vec![false; history.len()];
        return Ok(Gathered {
            history,
            anomalous,
            today,
        });
    }
    let params = SynthParams {
        households: cfg.n_households as f64,
        ..SynthParams::default()
    };
    let n = cfg.history_days;
    let all = synth_baseload_with(n + 1, &clock, seed, &params);
    let mut days = all.days()[..n].to_vec();
    let today = all.days()[n].clone();

    // Past anomalies keep clear of the two most recent days.
    let mut anomalous = vec![false; n];
    let k = cfg.drift.history_anomalies.min(n.saturating_sub(2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a11a);
    let mut picked = rand::seq::index::sample(&mut rng, n - 2, k).into_vec();
    picked.sort_unstable();
    for (c, &d) in picked.iter().enumerate() {
        let kind = AnomalyKind::ALL[c % AnomalyKind::ALL.len()];
        days[d] = inject_anomaly(
            &days[d],
            &clock,
            kind,
            cfg.drift.anomaly_magnitude,
            seed + d as u64,
        );
        anomalous[d] = true;
    }
    Ok(Gathered {
        history: HistoryWindow::from_days(days, n)?,
        anomalous,
        today,
    })
}

pub(crate) fn initial_socs(cfg: &ScenarioConfig, seed: u64) -> Vec<f64> {
    let [lo, hi] = cfg.soc_init_range;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50c0_50c0);
    (0..cfg.n_evs()).map(|_| rng.random_range(lo..hi)).collect()
}

/// Learning-day and exploitation-day plans for one prediction mode.
pub(crate) struct ModeDays {
    pub learn: DayPlan,
    pub exploit: DayPlan,
    pub forecast_mape_pct: Option<f64>,
    pub drift: Option<DriftSummary>,
}

pub(crate) fn mode_days(
    cfg: &ScenarioConfig,
    world: &World,
    data: &Gathered,
    modes: &[PredictionMode],
    seed: u64,
) -> Result<Vec<ModeDays>, EngineError> {
    let needs_forecaster = modes.iter().any(|m| *m != PredictionMode::Perfect);
    let trained = if needs_forecaster {
        let (net, _) =
            train_forecaster_excluding(&data.history, &cfg.forecast, seed, &data.anomalous)?;
        let simple = predict_day(&net, &data.history, data.today.kind)?;
        Some((net, simple))
    } else {
        None
    };
    let today = &data.today;
    let mut out = Vec::with_capacity(modes.len());
    for &mode in modes {
        let days = match mode {
            PredictionMode::Perfect => {
                let plan = world.plan(today, today.samples())?;
                ModeDays {
                    learn: plan.clone(),
                    exploit: plan,
                    forecast_mape_pct: Some(0.0),
                    drift: None,
                }
            }
            PredictionMode::Simple => {
                let (_, simple) = trained.as_ref().expect("trained for non-perfect modes");
                let plan = world.plan(today, simple.samples())?;
                ModeDays {
                    learn: plan.clone(),
                    exploit: plan,
                    forecast_mape_pct: Some(mape(today.samples(), simple.samples())?),
                    drift: None,
                }
            }
            PredictionMode::AnomalyRepredict => {
                let (net, simple) = trained.as_ref().expect("trained for non-perfect modes");
                let clock = cfg.clock()?;
                let d = &cfg.drift;
                let observed =
                    inject_anomaly(today, &clock, AnomalyKind::Scale, d.anomaly_magnitude, seed);
                let patterns: Vec<Vec<f64>> = data
                    .history
                    .days()
                    .iter()
                    .map(|p| p.samples().to_vec())
                    .collect();
                let params = SomParams {
                    iterations: d.som_iterations,
                    ..SomParams::default()
                };
                let som = som_train(
                    &patterns,
                    d.som_rows,
                    d.som_cols,
                    params,
                    SomInit::Sampled,
                    seed,
                )?;
                let (verdict, revised) = detect_and_repredict(
                    net,
                    &som,
                    &data.history,
                    simple,
                    observed.samples(),
                    today.kind,
                    d.window_start_slot..d.window_end_slot,
                    d.change_threshold_pct,
                    d.per_slot,
                    Padding::Codebook,
                )?;
                let from = verdict.trigger_slot.unwrap_or(d.window_end_slot);
                let future = from..observed.len();
                let drift = DriftSummary {
                    triggered: verdict.triggered,
                    window_mape_pct: verdict.window_mape,
                    trigger_slot: verdict.trigger_slot,
                    matched_date: verdict.matched_day.as_ref().map(|m| m.date_tag),
                    matched_class: verdict.matched_class,
                    future_mape_simple_pct: mape(
                        &observed.samples()[future.clone()],
                        &simple.samples()[future.clone()],
                    )?,
                    future_mape_final_pct: mape(
                        &observed.samples()[future.clone()],
                        &revised.samples()[future],
                    )?,
                };
                ModeDays {
                    learn: world.plan(today, simple.samples())?,
                    exploit: world.plan(&observed, revised.samples())?,
                    forecast_mape_pct: Some(mape(observed.samples(), revised.samples())?),
                    drift: Some(drift),
                }
            }
        };
        out.push(days);
    }
    Ok(out)
}

/// Every episode of one method: the first `exploration` episodes replay
/// `learn`, the rest replay `exploit`.
pub fn simulate(
    world: &World,
    method: Method,
    learn: &DayPlan,
    exploit: &DayPlan,
    n_episodes: usize,
    exploration: usize,
    seed: u64,
) -> Result<Vec<EpisodeResult>, EngineError> {
    let mut out = Vec::with_capacity(n_episodes);
    if method == Method::Pmarl {
        let mut agents = world.agents(seed);
        for e in 0..n_episodes {
            let exploring = e < exploration;
            let day = if exploring { learn } else { exploit };
            let opts = EpisodeOptions {
                index: e,
                epsilon: world.epsilon(e, exploration),
                learn: exploring || world.agent.learn_during_exploitation,
            };
            out.push(run_episode(world, &mut agents, day, opts)?);
        }
    } else {
        let learn_s = world.fixed_schedule(method, learn)?;
        let exploit_s = world.fixed_schedule(method, exploit)?;
        for e in 0..n_episodes {
            let (day, s) = if e < exploration {
                (learn, &learn_s)
            } else {
                (exploit, &exploit_s)
            };
            out.push(score_schedule(world, day, s.clone(), e)?);
        }
    }
    Ok(out)
}

fn tag(run: usize, method: &str, mode: &str) -> impl Fn(EngineError) -> EngineError {
    let (method, mode) = (method.to_string(), mode.to_string());
    move |e| EngineError::InRun {
        run,
        method: method.clone(),
        mode: mode.clone(),
        source: Box::new(e),
    }
}

fn one_run(cfg: &RunConfig, run: usize) -> Result<Vec<RunCell>, EngineError> {
    let sc = &cfg.scenario;
    let seed = run_seed(sc.rng_seed, run);
    let world = World::new(sc, initial_socs(sc, seed)).map_err(|e| tag(run, "-", "-")(e.into()))?;
    let data = gather(sc, seed).map_err(tag(run, "-", "-"))?;
    let days = mode_days(sc, &world, &data, &cfg.modes, seed).map_err(tag(run, "-", "-"))?;
    let mut cells = Vec::new();
    for (&mode, md) in cfg.modes.iter().zip(&days) {
        for &method in &cfg.methods {
            let episodes = simulate(
                &world,
                method,
                &md.learn,
                &md.exploit,
                sc.n_episodes,
                sc.exploration_episodes,
                seed,
            )
            .map_err(tag(run, method.name(), mode.name()))?;
            cells.push(RunCell {
                run,
                seed,
                method,
                mode,
                episodes,
                forecast_kw: md.exploit.forecast_kw.clone(),
                optimal_counts: md.exploit.optimal.column_sums(),
                forecast_mape_pct: md.forecast_mape_pct,
                drift: md.drift.clone(),
            });
        }
    }
    Ok(cells)
}

/// Executes every run (in parallel) and assembles the report. Results are
/// merged by run index, so the report does not depend on thread timing.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport, EngineError> {
    cfg.validate()?;
    let runs: Vec<Vec<RunCell>> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| one_run(cfg, r))
        .collect::<Result<_, _>>()?;
    Ok(assemble(cfg, runs, cfg.scenario.ev.charge_power))
}
