//! Synthetic anomalous days derived from a normal profile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DayProfile, SlotClock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Everything from 07:00 on is multiplied by `1 + magnitude`.
    Scale,
    /// The afternoon/evening block moves earlier by `magnitude × 4` hours.
    Shift,
    /// Midday demand is pulled towards the day mean (fully at magnitude 1).
    Plateau,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 3] =
        [AnomalyKind::Scale, AnomalyKind::Shift, AnomalyKind::Plateau];
}

/// Returns a modified copy of `day`. `seed` only jitters the plateau span
/// by up to one slot; scale and shift are exact.
pub fn inject_anomaly(
    day: &DayProfile,
    clock: &SlotClock,
    kind: AnomalyKind,
    magnitude: f64,
    seed: u64,
) -> DayProfile {
    assert!(
        magnitude > 0.0 && magnitude <= 1.0,
        "anomaly magnitude must be in (0, 1], got {magnitude}"
    );
    let src = day.samples();
    let n = src.len();
    let minute = |slot: usize| clock.minute_of_slot(slot);
    let samples = match kind {
        AnomalyKind::Scale => (0..n)
            .map(|j| {
                if minute(j) >= 7 * 60 {
                    src[j] * (1.0 + magnitude)
                } else {
                    src[j]
                }
            })
            .collect(),
        AnomalyKind::Shift => {
            let k = (magnitude * 4.0 / clock.slot_hours()).round() as usize;
            (0..n)
                .map(|j| {
                    if minute(j) >= 12 * 60 {
                        // Walk forward in wall-clock time, holding the last slot of the day.
                        let target =
                            (minute(j) + k as u32 * clock.slot_minutes()).min(23 * 60 + 59);
                        src[clock.slot_of_minute(target)]
                    } else {
                        src[j]
                    }
                })
                .collect()
        }
        AnomalyKind::Plateau => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let jitter = rng.random_range(0..=1) as u32 * clock.slot_minutes();
            let (from, to) = (10 * 60 + jitter, 16 * 60 + jitter);
            let mean = day.mean();
            (0..n)
                .map(|j| {
                    if (from..to).contains(&minute(j)) {
                        src[j] + magnitude * (mean - src[j])
                    } else {
                        src[j]
                    }
                })
                .collect()
        }
    };
    day.with_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{mean_std, synth_baseload};
    use chrono::NaiveDate;

    fn flat(v: f64) -> DayProfile {
        DayProfile::for_date(NaiveDate::from_ymd_opt(2024, 1, 8).unwrap(), vec![v; 48]).unwrap()
    }

    #[test]
    fn scale_arithmetic() {
        let c = SlotClock::half_hourly();
        let out = inject_anomaly(&flat(1.0), &c, AnomalyKind::Scale, 0.5, 0);
        for (j, v) in out.samples().iter().enumerate() {
            let expected = if j >= 14 { 1.5 } else { 1.0 };
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn continuous_at_zero() {
        let c = SlotClock::half_hourly();
        let day = synth_baseload(1, &c, 3).days()[0].clone();
        for kind in AnomalyKind::ALL {
            let out = inject_anomaly(&day, &c, kind, 1e-6, 9);
            for (a, b) in day.samples().iter().zip(out.samples()) {
                assert!((a - b).abs() <= 1e-5 * a.abs(), "{kind:?}");
            }
        }
    }

    #[test]
    fn plateau_reduces_midday_variance() {
        let c = SlotClock::half_hourly();
        for seed in 0..20 {
            let day = synth_baseload(3, &c, seed).days()[2].clone();
            let out = inject_anomaly(&day, &c, AnomalyKind::Plateau, 0.7, seed);
            let mid = c.slot_at(10, 30)..c.slot_at(16, 0);
            let (_, before) = mean_std(&day.samples()[mid.clone()]);
            let (_, after) = mean_std(&out.samples()[mid]);
            assert!(after < before);
        }
    }

    #[test]
    fn shift_moves_evening_peak_earlier() {
        let c = SlotClock::half_hourly();
        let day = synth_baseload(1, &c, 5).days()[0].clone();
        let out = inject_anomaly(&day, &c, AnomalyKind::Shift, 0.5, 0);
        let argmax = |s: &[f64]| (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(argmax(day.samples()) - argmax(out.samples()), 4);
    }

    #[test]
    fn original_untouched() {
        let c = SlotClock::half_hourly();
        let day = flat(2.0);
        let copy = day.clone();
        let _ = inject_anomaly(&day, &c, AnomalyKind::Scale, 1.0, 0);
        assert_eq!(day, copy);
    }

    #[test]
    #[should_panic]
    fn zero_magnitude_disallowed() {
        let _ = inject_anomaly(
            &flat(1.0),
            &SlotClock::half_hourly(),
            AnomalyKind::Scale,
            0.0,
            0,
        );
    }
}
