use pmarl::baselines::ChargingSchedule;
use pmarl::engine::*;
use pmarl::scenario::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk() -> ScenarioConfig {
    ScenarioConfig::default()
}

fn desk_day(cfg: &ScenarioConfig, world: &World, seed: u64) -> DayPlan {
    let clock = cfg.clock().unwrap();
    let params = SynthParams {
        households: cfg.n_households as f64,
        ..SynthParams::default()
    };
    let h = synth_baseload_with(3, &clock, seed, &params);
    let today = h.days().last().unwrap().clone();
    world.plan(&today, today.samples()).unwrap()
}

fn random_schedule(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ChargingSchedule {
    let rows: Vec<Vec<bool>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_bool(0.5)).collect())
        .collect();
    if n == 0 {
        return ChargingSchedule::empty(0, m);
    }
    ChargingSchedule::from_rows(&rows).unwrap()
}

// Second implementation kept deliberately naive.
fn eff_oracle(a: &ChargingSchedule, b: &ChargingSchedule, n: usize) -> f64 {
    let m = a.n_slots();
    let mut acc = 0.0;
    for j in 0..m {
        let x: i64 = (0..a.n_evs()).map(|i| a.get(i, j) as i64).sum();
        let y: i64 = (0..b.n_evs()).map(|i| b.get(i, j) as i64).sum();
        acc += 1.0 - ((x - y).abs() as f64) / n as f64;
    }
    acc / m as f64
}

fn dev_oracle(a: &ChargingSchedule, b: &ChargingSchedule, n: usize, t: f64) -> usize {
    let mut k = 0;
    for j in 0..a.n_slots() {
        let x: i64 = (0..a.n_evs()).map(|i| a.get(i, j) as i64).sum();
        let y: i64 = (0..b.n_evs()).map(|i| b.get(i, j) as i64).sum();
        if ((x - y).abs() as f64) / (n as f64) > t {
            k += 1;
        }
    }
    k
}

#[test]
fn no_evs_leaves_baseload_untouched() {
    let cfg = desk();
    let world = World::new(&cfg, vec![]).unwrap();
    let day = desk_day(&cfg, &world, 3);
    let mut agents = world.agents(1);
    let opts = EpisodeOptions {
        index: 0,
        epsilon: 0.9,
        learn: true,
    };
    let r = run_episode(&world, &mut agents, &day, opts).unwrap();
    assert_eq!(r.aggregate_kw, day.baseload_kw);
}

#[test]
fn aggregate_is_baseload_plus_fleet() {
    let cfg = desk();
    let socs = vec![0.2, 0.35, 0.5, 0.6];
    let world = World::new(&cfg, socs).unwrap();
    let day = desk_day(&cfg, &world, 5);
    let mut agents = world.agents(9);
    for e in 0..5 {
        let opts = EpisodeOptions {
            index: e,
            epsilon: 0.5,
            learn: true,
        };
        let r = run_episode(&world, &mut agents, &day, opts).unwrap();
        let counts = r.schedule.column_sums();
        for j in 0..world.n_slots() {
            let want = day.baseload_kw[j] + cfg.ev.charge_power * counts[j] as f64;
            assert_eq!(r.aggregate_kw[j], want);
        }
    }
}

#[test]
fn frozen_greedy_policy_repeats() {
    let cfg = desk();
    let world = World::new(&cfg, vec![0.3]).unwrap();
    let day = desk_day(&cfg, &world, 11);
    let mut agents = world.agents(4);
    for e in 0..20 {
        let opts = EpisodeOptions {
            index: e,
            epsilon: 0.9,
            learn: true,
        };
        run_episode(&world, &mut agents, &day, opts).unwrap();
    }
    let frozen = EpisodeOptions {
        index: 20,
        epsilon: 0.0,
        learn: false,
    };
    let a = run_episode(&world, &mut agents, &day, frozen).unwrap();
    let b = run_episode(&world, &mut agents, &day, frozen).unwrap();
    assert_eq!(a, b);
}

#[test]
fn energy_is_conserved_per_ev() {
    let cfg = desk();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let socs: Vec<f64> = (0..12).map(|_| rng.random_range(0.17..0.67)).collect();
    let world = World::new(&cfg, socs.clone()).unwrap();
    let day = desk_day(&cfg, &world, 8);
    let mut agents = world.agents(2);
    let per_kwh = cfg.ev.battery_capacity;
    let slot_h = world.clock.slot_hours();
    for e in 0..10 {
        let opts = EpisodeOptions {
            index: e,
            epsilon: 0.7,
            learn: true,
        };
        let r = run_episode(&world, &mut agents, &day, opts).unwrap();
        for (i, (&s0, &s1)) in socs.iter().zip(&r.socs_end).enumerate() {
            let k = r.schedule.row(i).iter().filter(|&&c| c).count() as f64;
            let want = (k * cfg.ev.charge_power * slot_h - cfg.ev.trip_energy) / per_kwh;
            assert!((s1 - s0 - want).abs() < 1e-12, "ev {i}");
        }
    }
}

#[test]
fn satisfied_ev_never_charges() {
    let cfg = desk();
    let world = World::new(&cfg, vec![0.85, 0.95]).unwrap();
    let day = desk_day(&cfg, &world, 1);
    let mut agents = world.agents(3);
    let opts = EpisodeOptions {
        index: 0,
        epsilon: 1.0,
        learn: true,
    };
    let r = run_episode(&world, &mut agents, &day, opts).unwrap();
    assert_eq!(r.schedule.total_units(), 0);
}

#[test]
fn valley_fill_perfect_scores_one() {
    let mut cfg = desk();
    cfg.n_runs = 2;
    let r = run_experiment(&RunConfig::single(
        cfg,
        Method::ValleyFill,
        PredictionMode::Perfect,
    ))
    .unwrap();
    let c = r.cell(Method::ValleyFill, PredictionMode::Perfect).unwrap();
    assert!(c.efficiency_by_episode.iter().all(|&e| e == 1.0));
}

#[test]
fn greedy_desk_below_sixty_percent() {
    let cfg = desk();
    let r = run_experiment(&RunConfig::single(
        cfg,
        Method::Greedy,
        PredictionMode::Perfect,
    ))
    .unwrap();
    let c = r.cell(Method::Greedy, PredictionMode::Perfect).unwrap();
    assert!(c.efficiency < 0.60, "{}", c.efficiency);
}

#[test]
fn report_is_byte_identical_per_seed() {
    let mut cfg = desk();
    cfg.n_runs = 2;
    cfg.n_episodes = 12;
    cfg.exploration_episodes = 8;
    let rc = RunConfig::full(cfg);
    let a = run_experiment(&rc).unwrap().to_json();
    let b = run_experiment(&rc).unwrap().to_json();
    assert_eq!(a, b);
}

#[test]
fn report_round_trips_through_json() {
    let mut cfg = desk();
    cfg.n_runs = 1;
    cfg.n_episodes = 6;
    cfg.exploration_episodes = 4;
    let r = run_experiment(&RunConfig::full(cfg)).unwrap();
    let back = ExperimentReport::from_json(&r.to_json()).unwrap();
    assert_eq!(back.to_json(), r.to_json());
    assert_eq!(back.table.len(), 4);
    assert!(back.table.iter().all(|row| row.efficiency.len() == 3));
}

#[test]
fn exploitation_beats_exploration() {
    let mut cfg = desk();
    cfg.n_runs = 2;
    let r = run_experiment(&RunConfig::single(
        cfg,
        Method::Pmarl,
        PredictionMode::Perfect,
    ))
    .unwrap();
    let e = &r
        .cell(Method::Pmarl, PredictionMode::Perfect)
        .unwrap()
        .efficiency_by_episode;
    let explore = e[..40].iter().sum::<f64>() / 40.0;
    let exploit = e[40..].iter().sum::<f64>() / 20.0;
    assert!(exploit > explore, "{exploit} vs {explore}");
}

#[test]
fn efficiency_self_is_one_and_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let n = rng.random_range(1..12);
        let m = rng.random_range(1..16);
        let a = random_schedule(&mut rng, n, m);
        let b = random_schedule(&mut rng, n, m);
        assert_eq!(efficiency(&a, &a, n).unwrap(), 1.0);
        let got = efficiency(&a, &b, n).unwrap();
        assert!((got - eff_oracle(&a, &b, n)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn efficiency_span_mismatch() {
    let a = ChargingSchedule::empty(2, 3);
    let b = ChargingSchedule::empty(2, 4);
    assert!(matches!(
        efficiency(&a, &b, 2),
        Err(EngineError::SpanMismatch(3, 4))
    ));
    assert!(deviation_count(&a, &b, 2, 0.25).is_err());
}

#[test]
fn deviation_count_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_schedule(&mut rng, 6, 10);
    assert_eq!(deviation_count(&a, &a, 6, 0.25).unwrap(), 0);

    let full = ChargingSchedule::from_rows(&vec![vec![true, false, false]; 6]).unwrap();
    let none = ChargingSchedule::empty(6, 3);
    assert_eq!(deviation_count(&full, &none, 6, 0.25).unwrap(), 1);

    for _ in 0..200 {
        let n = rng.random_range(1..10);
        let m = rng.random_range(1..20);
        let t = rng.random_range(0.0..0.6);
        let a = random_schedule(&mut rng, n, m);
        let b = random_schedule(&mut rng, n, m);
        assert_eq!(
            deviation_count(&a, &b, n, t).unwrap(),
            dev_oracle(&a, &b, n, t)
        );
    }
}

#[test]
fn method_and_mode_names_parse() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    for p in PredictionMode::ALL {
        assert_eq!(p.name().parse::<PredictionMode>().unwrap(), p);
    }
    assert_eq!(
        "night-greedy".parse::<Method>().unwrap(),
        Method::NightGreedy
    );
    assert!("random".parse::<Method>().is_err());
}

#[test]
fn invalid_run_config_rejected() {
    let mut cfg = desk();
    cfg.exploration_episodes = cfg.n_episodes;
    assert!(run_experiment(&RunConfig::full(cfg.clone())).is_err());
    cfg.exploration_episodes = 10;
    let mut rc = RunConfig::full(cfg);
    rc.n_runs = 0;
    assert!(run_experiment(&rc).is_err());
}
