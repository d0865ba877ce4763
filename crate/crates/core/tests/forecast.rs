use chrono::NaiveDate;
use pmarl::forecast::{
    mape, predict_day, train_forecaster, Activation, ForecastSource, Mlp, Normalization,
};
use pmarl::scenario::{
    synth_baseload, DayKind, DayProfile, ForecastConfig, HistoryWindow, SlotClock,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for activation in [Activation::Sigmoid, Activation::Tanh] {
        let mut net = Mlp::new(&[3, 4, 2], activation, 23);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = net.gradient(&x, &t);
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
                let up = net.mse(std::slice::from_ref(&x), std::slice::from_ref(&t));
                p[k] -= 2.0 * h;
                net.set_parameters(&p);
                let down = net.mse(std::slice::from_ref(&x), std::slice::from_ref(&t));
                net.set_parameters(&base);
                let numeric = (up - down) / (2.0 * h);
                // Near-zero components are compared absolutely.
                let ok = relative_error(a, numeric) < 1e-4 || (a - numeric).abs() < 1e-9;
                assert!(ok, "param {k}: analytic {a} vs numeric {numeric}");
            }
        }
    }
}

fn echo_net(slots: usize) -> Mlp {
    let inputs = slots + 3;
    let mut w = vec![0.0; slots * inputs];
    for s in 0..slots {
        w[s * inputs + s] = 1.0;
    }
    let mut net = Mlp::from_parameters(
        &[inputs, slots],
        vec![w],
        vec![vec![0.0; slots]],
        Activation::Sigmoid,
    )
    .unwrap();
    net.normalization = Some(Normalization {
        input_min: vec![0.0; inputs],
        input_max: vec![10.0; inputs],
        output_min: vec![0.0; slots],
        output_max: vec![10.0; slots],
    });
    net
}

#[test]
fn echo_network_is_persistence() {
    let samples: Vec<f64> = (0..48).map(|s| ((s * 7) % 48) as f64 / 48.0).collect();
    let day = DayProfile::for_date(
        NaiveDate::from_ymd_opt(2011, 3, 1).unwrap(),
        samples.clone(),
    )
    .unwrap();
    let hist = HistoryWindow::from_days(vec![day], 4).unwrap();
    let f = predict_day(&echo_net(48), &hist, DayKind::Weekday(3)).unwrap();
    for (got, want) in f.samples().iter().zip(&samples) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(f.source, ForecastSource::Simple);
}

#[test]
fn beats_persistence_on_most_seeds() {
    let clock = SlotClock::half_hourly();
    let cfg = ForecastConfig::default();
    let mut wins = 0;
    for seed in 0..20u64 {
        let all = synth_baseload(61, &clock, 1000 + seed);
        let train = all.prefix(60);
        let truth = &all.days()[60];
        let (net, trace) = train_forecaster(&train, &cfg, seed).unwrap();
        assert!(trace.best() <= trace.initial());
        let f = predict_day(&net, &train, truth.kind).unwrap();
        let m_net = mape(truth.samples(), f.samples()).unwrap();
        let m_persist = mape(truth.samples(), train.days()[59].samples()).unwrap();
        if m_net < m_persist {
            wins += 1;
        }
    }
    assert!(wins >= 14, "network beat persistence on {wins}/20 seeds");
}
