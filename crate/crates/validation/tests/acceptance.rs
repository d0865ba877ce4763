//! Acceptance criteria, one verdict line each. Exits non-zero when any
//! criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use pmarl::baselines::{cost, solve_exact, valley_fill, ChargingSchedule, CostInstance};
use pmarl::driftwatch::monitor;
use pmarl::engine::{
    efficiency, run_experiment, ExperimentReport, Method, PredictionMode, RunConfig,
};
use pmarl::forecast::{model_to_json, predict_day, train_forecaster, Activation, Mlp};
use pmarl::scenario::{synth_baseload_with, ScenarioConfig, SynthParams};
use pmarl_validation::{summary, Verdict};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 0.03;
const NEAR_OPTIMAL: f64 = 0.85;
const JUMP: f64 = 0.15;
const SETTLE_BAND: f64 = 0.02;
const SETTLE_EPISODES: usize = 10;
const VF_SLACK: f64 = 1.02;
const GRAD_TOL: f64 = 1e-4;
const EQ_TOL: f64 = 1e-12;
const WIN_SHARE: f64 = 0.8;
const FALSE_TRIGGER: f64 = 0.05;
const BAND_MASS: f64 = 0.9;
const SPIKE_RATIO: f64 = 3.0;

fn desk() -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/desk.toml");
    ScenarioConfig::from_toml_file(&path).expect("bundled desk config")
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn verdict(id: usize, name: &'static str, t: Instant, pass: bool, detail: String) -> Verdict {
    Verdict {
        id,
        name,
        pass,
        detail,
        elapsed: t.elapsed(),
    }
}

/// Ten seeded perfect-prediction desk runs of every method.
fn perfect_desk() -> (ExperimentReport, Duration) {
    let t = Instant::now();
    let mut cfg = desk();
    cfg.n_runs = 10;
    let rc = RunConfig {
        n_runs: 10,
        scenario: cfg,
        methods: Method::ALL.to_vec(),
        modes: vec![PredictionMode::Perfect],
    };
    let r = run_experiment(&rc).expect("desk experiment");
    (r, t.elapsed())
}

fn per_run(r: &ExperimentReport, m: Method) -> Vec<f64> {
    r.cell(m, PredictionMode::Perfect)
        .unwrap()
        .runs
        .iter()
        .map(|x| x.exploitation_efficiency)
        .collect()
}

fn ordering(r: &ExperimentReport, took: Duration) -> Verdict {
    let t = Instant::now();
    let g = per_run(r, Method::Greedy);
    let ng = per_run(r, Method::NightGreedy);
    let p = per_run(r, Method::Pmarl);
    let vf = per_run(r, Method::ValleyFill);
    let good = (0..g.len())
        .filter(|&k| {
            g[k] + STEP <= ng[k] && ng[k] + STEP <= p[k] && p[k] + STEP <= vf[k] && vf[k] == 1.0
        })
        .count();
    let fast = took < Duration::from_secs(300);
    let mut v = verdict(
        1,
        "method ordering",
        t,
        good >= 8 && fast,
        format!(
            "{good}/10 seeds ordered by >= {STEP}; means greedy {:.3} < night {:.3} < pmarl {:.3} < vf {:.3}; run {:.1}s",
            mean(&g),
            mean(&ng),
            mean(&p),
            mean(&vf),
            took.as_secs_f64()
        ),
    );
    v.elapsed += took;
    v
}

fn near_optimal(r: &ExperimentReport) -> Verdict {
    let t = Instant::now();
    let p = per_run(r, Method::Pmarl);
    let m = mean(&p);
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        2,
        "pmarl near-optimality",
        t,
        m >= NEAR_OPTIMAL,
        format!("exploitation efficiency {m:.3} (worst run {lo:.3}) vs >= {NEAR_OPTIMAL}"),
    )
}

fn learning_jump(r: &ExperimentReport) -> Verdict {
    let t = Instant::now();
    let c = r.cell(Method::Pmarl, PredictionMode::Perfect).unwrap();
    let e = &c.efficiency_by_episode;
    let x = r.exploration_episodes;
    let gap = mean(&e[x..]) - mean(&e[..x]);
    let fin = *e.last().unwrap();
    // First exploitation episode from which the curve stays in the band.
    let settle = (x..e.len()).find(|&k| e[k..].iter().all(|v| (v - fin).abs() <= SETTLE_BAND));
    let settled = settle.is_some_and(|k| k - x < SETTLE_EPISODES);
    verdict(
        3,
        "learning-curve jump",
        t,
        gap >= JUMP && settled,
        format!(
            "gap {gap:.3} (need >= {JUMP}); exploration {:.3}, exploitation {:.3}; within {SETTLE_BAND} of final {fin:.3} from episode {} (need <= {})",
            mean(&e[..x]),
            mean(&e[x..]),
            settle.map_or("never".to_string(), |k| (k + 1).to_string()),
            x + SETTLE_EPISODES
        ),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> CostInstance {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=6);
    let base: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..5.0)).collect();
    let mut avail = Vec::new();
    let mut needs = Vec::new();
    for _ in 0..n {
        let mut row: Vec<bool> = (0..m).map(|_| rng.random_bool(0.75)).collect();
        let j = rng.random_range(0..m);
        row[j] = true;
        let k = row.iter().filter(|&&a| a).count();
        needs.push(rng.random_range(0..=k));
        avail.push(row);
    }
    CostInstance::new(base, needs, avail).unwrap()
}

fn random_feasible(inst: &CostInstance, rng: &mut ChaCha8Rng) -> ChargingSchedule {
    let mut s = ChargingSchedule::empty(inst.n_evs(), inst.n_slots());
    for i in 0..inst.n_evs() {
        let mut slots: Vec<usize> = (0..inst.n_slots())
            .filter(|&j| inst.available(i, j))
            .collect();
        slots.shuffle(rng);
        for &j in &slots[..inst.needs[i]] {
            s.set(i, j, true);
        }
    }
    s
}

fn exact_oracle() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let (mut within, mut beats, mut worst) = (0, 0, 1.0f64);
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        let exact = cost(&inst, &solve_exact(&inst).unwrap()).unwrap();
        let vf = cost(&inst, &valley_fill(&inst).unwrap()).unwrap();
        if vf <= VF_SLACK * exact + 1e-9 {
            within += 1;
        }
        if exact > 0.0 {
            worst = worst.max(vf / exact);
        }
        let all_beaten = (0..1000).all(|_| {
            let s = random_feasible(&inst, &mut rng);
            assert!(inst.meets_needs(&s));
            exact <= cost(&inst, &s).unwrap() + 1e-9
        });
        if all_beaten {
            beats += 1;
        }
    }
    let fast = t.elapsed() < Duration::from_secs(60);
    verdict(
        4,
        "exact-optimum oracle",
        t,
        within == 100 && beats == 100 && fast,
        format!("vf within {VF_SLACK}x on {within}/100 (worst ratio {worst:.4}); exact <= 1000 random on {beats}/100"),
    )
}

fn random_schedule(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ChargingSchedule {
    let rows: Vec<Vec<bool>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_bool(0.5)).collect())
        .collect();
    ChargingSchedule::from_rows(&rows).unwrap()
}

fn counts_schedule(counts: &[usize], n: usize) -> ChargingSchedule {
    let rows: Vec<Vec<bool>> = (0..n)
        .map(|i| counts.iter().map(|&c| i < c).collect())
        .collect();
    ChargingSchedule::from_rows(&rows).unwrap()
}

fn metric_suite() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut identity = 0;
    let mut max_diff = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..20);
        let m = rng.random_range(1..30);
        let a = random_schedule(&mut rng, n, m);
        if efficiency(&a, &a, n).unwrap() == 1.0 {
            identity += 1;
        }
        let b = random_schedule(&mut rng, n, m);
        let (xa, xb) = (a.column_sums(), b.column_sums());
        let oracle = xa
            .iter()
            .zip(&xb)
            .map(|(&p, &q)| 1.0 - (p as f64 - q as f64).abs() / n as f64)
            .sum::<f64>()
            / m as f64;
        max_diff = max_diff.max((efficiency(&a, &b, n).unwrap() - oracle).abs());
    }
    let hand = efficiency(
        &counts_schedule(&[5, 5], 10),
        &counts_schedule(&[10, 0], 10),
        10,
    )
    .unwrap();
    verdict(
        5,
        "efficiency metric suite",
        t,
        identity == 200 && hand == 0.5 && max_diff <= EQ_TOL,
        format!("identity {identity}/200; hand example {hand}; max oracle gap {max_diff:.1e}"),
    )
}

fn gradient_check() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut net = Mlp::new(&[3, 4, 2], Activation::Sigmoid, 7);
    let (mut checked, mut bad, mut worst) = (0, 0, 0.0f64);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = net.gradient(&x, &y);
        let analytic: Vec<f64> = g
            .weights
            .iter()
            .chain(&g.biases)
            .flatten()
            .copied()
            .collect();
        let base = net.parameters();
        let h = 1e-5;
        for (k, &a) in analytic.iter().enumerate() {
            let mut p = base.clone();
            p[k] += h;
            net.set_parameters(&p);
            let up = net.mse(std::slice::from_ref(&x), std::slice::from_ref(&y));
            p[k] -= 2.0 * h;
            net.set_parameters(&p);
            let down = net.mse(std::slice::from_ref(&x), std::slice::from_ref(&y));
            net.set_parameters(&base);
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            checked += 1;
            // Components that vanish analytically are compared absolutely.
            if rel > GRAD_TOL && (a - numeric).abs() > 1e-9 {
                bad += 1;
            }
            if a.abs() > 1e-6 {
                worst = worst.max(rel);
            }
        }
    }
    verdict(
        6,
        "gradient check",
        t,
        bad == 0 && checked == 20 * net.n_parameters(),
        format!("{checked} partials, {bad} beyond {GRAD_TOL} relative (worst {worst:.1e})"),
    )
}

fn drift_pipeline() -> Verdict {
    let t = Instant::now();
    let mut cfg = desk();
    cfg.n_runs = 20;
    let rc = RunConfig {
        n_runs: 20,
        scenario: cfg.clone(),
        methods: vec![Method::ValleyFill],
        modes: vec![PredictionMode::AnomalyRepredict],
    };
    let r = run_experiment(&rc).expect("anomaly runs");
    let runs = &r
        .cell(Method::ValleyFill, PredictionMode::AnomalyRepredict)
        .unwrap()
        .runs;
    let wins = runs
        .iter()
        .filter(|x| {
            let d = x.drift.as_ref().expect("drift summary");
            d.future_mape_final_pct < d.future_mape_simple_pct
        })
        .count();

    // Normal days: forecaster trained on clean history, scored on the next day.
    let clock = cfg.clock().unwrap();
    let params = SynthParams {
        households: cfg.n_households as f64,
        ..SynthParams::default()
    };
    let window = cfg.drift.window_start_slot..cfg.drift.window_end_slot;
    let trials = 200;
    let mut triggers = 0;
    for seed in 0..trials as u64 {
        let all = synth_baseload_with(cfg.history_days + 1, &clock, 10_000 + seed, &params);
        let hist = all.prefix(cfg.history_days);
        let today = all.last().unwrap();
        let (net, _) = train_forecaster(&hist, &cfg.forecast, seed).unwrap();
        let f = predict_day(&net, &hist, today.kind).unwrap();
        if monitor(
            &f,
            today.samples(),
            window.clone(),
            cfg.drift.change_threshold_pct,
        )
        .unwrap()
        .triggered
        {
            triggers += 1;
        }
    }
    let rate = triggers as f64 / trials as f64;
    verdict(
        7,
        "drift pipeline direction",
        t,
        wins as f64 >= WIN_SHARE * 20.0 && rate < FALSE_TRIGGER,
        format!("repredicted better on {wins}/20 anomaly days; false triggers {triggers}/{trials} ({:.1}%)", 100.0 * rate),
    )
}

fn stranding(r: &ExperimentReport) -> Verdict {
    let t = Instant::now();
    let c = r.cell(Method::Pmarl, PredictionMode::Perfect).unwrap();
    let x = r.exploration_episodes;
    let stranded: usize = c
        .runs
        .iter()
        .map(|run| run.stranded[x..].iter().sum::<usize>())
        .sum();
    let socs: Vec<f64> = c
        .runs
        .iter()
        .flat_map(|run| run.soc_end.iter().copied())
        .collect();
    let in_band =
        socs.iter().filter(|&&s| (0.3..=0.9).contains(&s)).count() as f64 / socs.len() as f64;
    verdict(
        8,
        "stranding check",
        t,
        stranded == 0 && in_band >= BAND_MASS,
        format!(
            "{stranded} stranded EV-days over {} runs; {:.1}% of {} end-of-day SOCs in [0.3, 0.9]",
            c.runs.len(),
            100.0 * in_band,
            socs.len()
        ),
    )
}

fn determinism() -> Verdict {
    let t = Instant::now();
    let mut cfg = desk();
    cfg.n_runs = 2;
    let rc = RunConfig::full(cfg.clone());
    let a = run_experiment(&rc).unwrap();
    let b = run_experiment(&rc).unwrap();
    let mut same = a.to_json() == b.to_json();
    for c in &a.cells {
        same &= a.aggregate_csv(c.method, c.mode) == b.aggregate_csv(c.method, c.mode);
    }
    let clock = cfg.clock().unwrap();
    let h = |s| synth_baseload_with(30, &clock, s, &SynthParams::default());
    same &= h(5) == h(5);
    let model = || model_to_json(&train_forecaster(&h(5), &cfg.forecast, 3).unwrap().0);
    same &= model() == model();
    let bytes = a.to_json().len();
    verdict(
        9,
        "determinism",
        t,
        same,
        format!(
            "repeated report ({bytes} bytes), aggregate CSVs, history and model identical: {same}"
        ),
    )
}

fn night_spike(r: &ExperimentReport) -> Verdict {
    let t = Instant::now();
    let cfg = &r.config;
    let window = cfg.window_slots().unwrap();
    let k = window
        .iter()
        .position(|&s| s == cfg.night_tariff_start_slot)
        .unwrap();
    let agg = |m| {
        r.cell(m, PredictionMode::Perfect)
            .unwrap()
            .overlay
            .aggregate_kw
            .clone()
    };
    let ng = agg(Method::NightGreedy);
    let vf = agg(Method::ValleyFill);
    let spike = ng[k] - ng[k - 1];
    let vf_max = vf
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    verdict(
        10,
        "night-greedy 23:00 spike",
        t,
        spike > SPIKE_RATIO * vf_max,
        format!("night-greedy step {spike:.1} kW vs largest valley-fill step {vf_max:.1} kW (ratio {:.1})", spike / vf_max),
    )
}

fn main() {
    let (report, took) = perfect_desk();
    let verdicts = [
        ordering(&report, took),
        near_optimal(&report),
        learning_jump(&report),
        exact_oracle(),
        metric_suite(),
        gradient_check(),
        drift_pipeline(),
        stranding(&report),
        determinism(),
        night_spike(&report),
    ];
    for v in &verdicts {
        println!("{v}");
    }
    let (line, code) = summary(&verdicts);
    println!("{line}");
    std::process::exit(code);
}
