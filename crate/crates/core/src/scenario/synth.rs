//! Synthetic residential baseload.
//!
//! Double-peaked daily template (morning ~08:00, evening ~19:00, trough
//! around 04:00) with separate weekday and weekend variants. On top of the
//! template: an AR(1) day-level factor, a slow weekly trend plus an annual
//! cycle that also nudges the evening peak time, and per-slot multiplicative
//! noise. The trend and cycle make the series drift over weeks.

use std::f64::consts::PI;

use chrono::{Days, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DayKind, DayProfile, HistoryWindow, SlotClock};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// Multiplier applied to the single-household template (kW).
    pub households: f64,
    pub start_date: NaiveDate,
    /// Standard deviation of the per-slot multiplicative noise.
    pub slot_noise: f64,
    /// Innovation standard deviation of the AR(1) day-level factor.
    pub day_noise: f64,
    pub day_autocorrelation: f64,
    /// Relative level change per week.
    pub weekly_trend: f64,
    /// Relative amplitude of the annual cycle.
    pub seasonal_amplitude: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            households: 1.0,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date"),
            slot_noise: 0.04,
            day_noise: 0.03,
            day_autocorrelation: 0.7,
            weekly_trend: 0.004,
            seasonal_amplitude: 0.08,
        }
    }
}

/// Circular distance in hours.
fn hour_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(24.0);
    d.min(24.0 - d)
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    let z = hour_dist(hour, centre) / width;
    (-0.5 * z * z).exp()
}

/// Noise-free single-household demand in kW at `hour` (0..24).
pub(crate) fn template_kw(hour: f64, weekend: bool, evening_centre: f64) -> f64 {
    let base = 0.26 - 0.06 * bump(hour, 4.0, 1.8);
    if weekend {
        base + 0.38 * bump(hour, 10.0, 1.6)
            + 0.22 * bump(hour, 13.5, 2.0)
            + 0.85 * bump(hour, evening_centre - 0.5, 1.9)
    } else {
        base + 0.36 * bump(hour, 8.0, 1.0)
            + 0.10 * bump(hour, 13.0, 2.0)
            + 0.95 * bump(hour, evening_centre, 1.8)
    }
}

pub fn synth_baseload(days: usize, clock: &SlotClock, seed: u64) -> HistoryWindow {
    synth_baseload_with(days, clock, seed, &SynthParams::default())
}

pub fn synth_baseload_with(
    days: usize,
    clock: &SlotClock,
    seed: u64,
    params: &SynthParams,
) -> HistoryWindow {
    assert!(days >= 1, "need at least one day");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slot_noise = Normal::new(0.0, params.slot_noise).expect("finite sd");
    let day_noise = Normal::new(0.0, params.day_noise).expect("finite sd");
    let n = clock.slots_per_day();

    let mut level_dev = 0.0;
    let mut out = Vec::with_capacity(days);
    for d in 0..days {
        let date = params
            .start_date
            .checked_add_days(Days::new(d as u64))
            .expect("date in range");
        let kind = DayKind::from_date(date);
        level_dev = params.day_autocorrelation * level_dev + day_noise.sample(&mut rng);
        let phase = 2.0 * PI * d as f64 / 365.0;
        let level = 1.0
            + params.weekly_trend * d as f64 / 7.0
            + params.seasonal_amplitude * phase.cos()
            + level_dev;
        let evening_centre = 19.0 + 0.5 * phase.sin();

        let samples = (0..n)
            .map(|slot| {
                let hour =
                    (clock.minute_of_slot(slot) as f64 + clock.slot_minutes() as f64 / 2.0) / 60.0;
                let clean = template_kw(hour, kind.is_weekend(), evening_centre);
                let noise = 1.0 + slot_noise.sample(&mut rng);
                (params.households * clean * level.max(0.0) * noise).max(0.0)
            })
            .collect();
        out.push(DayProfile::new(date, kind, samples).expect("synthetic samples are valid"));
    }
    HistoryWindow::from_days(out, days).expect("dates strictly increase")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let c = SlotClock::half_hourly();
        assert_eq!(synth_baseload(14, &c, 7), synth_baseload(14, &c, 7));
        assert_ne!(synth_baseload(14, &c, 7), synth_baseload(14, &c, 8));
    }

    #[test]
    fn weekday_peak_in_evening() {
        let c = SlotClock::half_hourly();
        let (lo, hi) = (c.slot_at(17, 0), c.slot_at(21, 0));
        for seed in 0..100 {
            let w = synth_baseload(7, &c, seed);
            for day in w.days().iter().filter(|d| !d.kind.is_weekend()) {
                let s = day.samples();
                let argmax = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
                assert!(
                    (lo..=hi).contains(&argmax),
                    "seed {seed}: peak at slot {argmax}"
                );
            }
        }
    }

    #[test]
    fn template_has_night_trough() {
        let night = template_kw(4.0, false, 19.0);
        assert!(night < template_kw(8.0, false, 19.0));
        assert!(night < template_kw(13.0, false, 19.0));
        assert!(template_kw(8.0, false, 19.0) < template_kw(19.0, false, 19.0));
    }

    #[test]
    fn households_scale_linearly() {
        let c = SlotClock::half_hourly();
        let one = synth_baseload(3, &c, 1);
        let many = synth_baseload_with(
            3,
            &c,
            1,
            &SynthParams {
                households: 50.0,
                ..SynthParams::default()
            },
        );
        for (a, b) in one.days().iter().zip(many.days()) {
            for (x, y) in a.samples().iter().zip(b.samples()) {
                assert!((x * 50.0 - y).abs() < 1e-9);
            }
        }
    }
}
