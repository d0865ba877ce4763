//! Domain types shared by every other module: the slot clock, daily demand
//! profiles, the history window, EV parameters and the scenario config.
//!
//! All physical quantities are in kW (power), kWh (energy) or fractions
//! (state of charge). The clock converts between wall time and slot indices.

mod anomaly;
mod config;
mod history_csv;
mod synth;

use std::fmt;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use anomaly::{inject_anomaly, AnomalyKind};
pub use config::{
    AgentConfig, DriftConfig, EvConfig, ForecastConfig, PriceReference, RewardConfig,
    ScenarioConfig,
};
pub use history_csv::{load_history, load_history_from_reader, write_history, write_history_to};
pub use synth::{synth_baseload, synth_baseload_with, SynthParams};

/// Minutes in one day.
pub const MINUTES_PER_DAY: u32 = 1440;

/// Fraction of missing slots beyond which an ingested day is rejected.
pub const MAX_GAP_FRACTION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid clock: {0}")]
    InvalidClock(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("day {0} is missing more than 5% of its slots")]
    GapInData(NaiveDate),
    #[error("invalid day profile: {0}")]
    InvalidProfile(String),
    #[error("history ordering violated: {new} does not follow {last}")]
    Ordering { last: NaiveDate, new: NaiveDate },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fixed-resolution simulation clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotClock {
    slots_per_day: usize,
    day_start_offset: usize,
}

impl SlotClock {
    pub fn new(slots_per_day: usize, day_start_offset: usize) -> Result<Self, ScenarioError> {
        if slots_per_day < 24 || !(MINUTES_PER_DAY as usize).is_multiple_of(slots_per_day) {
            return Err(ScenarioError::InvalidClock(format!(
                "slots_per_day must be >= 24 and divide 1440, got {slots_per_day}"
            )));
        }
        if day_start_offset >= slots_per_day {
            return Err(ScenarioError::InvalidClock(format!(
                "day_start_offset {day_start_offset} out of range"
            )));
        }
        Ok(Self {
            slots_per_day,
            day_start_offset,
        })
    }

    /// The 48-slot, half-hourly clock starting at midnight.
    pub fn half_hourly() -> Self {
        Self {
            slots_per_day: 48,
            day_start_offset: 0,
        }
    }

    pub fn slots_per_day(&self) -> usize {
        self.slots_per_day
    }

    pub fn day_start_offset(&self) -> usize {
        self.day_start_offset
    }

    pub fn slot_minutes(&self) -> u32 {
        MINUTES_PER_DAY / self.slots_per_day as u32
    }

    pub fn slot_hours(&self) -> f64 {
        self.slot_minutes() as f64 / 60.0
    }

    /// Slots per hour; fractional clocks (e.g. 40 slots/day) round down.
    pub fn slots_per_hour(&self) -> usize {
        (self.slots_per_day / 24).max(1)
    }

    /// Slot index containing the given wall-clock minute of the day.
    pub fn slot_of_minute(&self, minute_of_day: u32) -> usize {
        let raw = (minute_of_day % MINUTES_PER_DAY / self.slot_minutes()) as usize;
        (raw + self.day_start_offset) % self.slots_per_day
    }

    /// Slot index containing `hh:mm`.
    pub fn slot_at(&self, hour: u32, minute: u32) -> usize {
        self.slot_of_minute(hour * 60 + minute)
    }

    /// Wall-clock minute at which the given slot starts.
    pub fn minute_of_slot(&self, slot: usize) -> u32 {
        let raw = (slot + self.slots_per_day - self.day_start_offset) % self.slots_per_day;
        raw as u32 * self.slot_minutes()
    }

    /// Slots from `start` (inclusive) to `end` (exclusive), wrapping past
    /// midnight when `end <= start`.
    pub fn wrapping_range(&self, start: usize, end: usize) -> Vec<usize> {
        let n = self.slots_per_day;
        let len = if end > start {
            end - start
        } else {
            n - start + end
        };
        (0..len).map(|k| (start + k) % n).collect()
    }
}

impl Default for SlotClock {
    fn default() -> Self {
        Self::half_hourly()
    }
}

/// Calendar class of a day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayKind {
    /// Monday = 1 .. Friday = 5.
    Weekday(u8),
    /// Saturday = 6, Sunday = 7.
    Weekend(u8),
    Holiday,
}

impl DayKind {
    pub fn from_date(date: NaiveDate) -> Self {
        let n = date.weekday().number_from_monday() as u8;
        match date.weekday() {
            Weekday::Sat | Weekday::Sun => DayKind::Weekend(n),
            _ => DayKind::Weekday(n),
        }
    }

    /// Index into the (weekday, weekend, holiday) one-hot encoding.
    pub fn class_index(&self) -> usize {
        match self {
            DayKind::Weekday(_) => 0,
            DayKind::Weekend(_) => 1,
            DayKind::Holiday => 2,
        }
    }

    pub fn one_hot(&self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.class_index()] = 1.0;
        v
    }

    pub fn is_weekend(&self) -> bool {
        matches!(self, DayKind::Weekend(_))
    }
}

impl fmt::Display for DayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DayKind::Weekday(d) => write!(f, "weekday({d})"),
            DayKind::Weekend(d) => write!(f, "weekend({d})"),
            DayKind::Holiday => write!(f, "holiday"),
        }
    }
}

/// One day of demand at the clock resolution, in kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayProfile {
    pub date_tag: NaiveDate,
    pub kind: DayKind,
    samples: Vec<f64>,
}

impl DayProfile {
    pub fn new(
        date_tag: NaiveDate,
        kind: DayKind,
        samples: Vec<f64>,
    ) -> Result<Self, ScenarioError> {
        if samples.is_empty() {
            return Err(ScenarioError::InvalidProfile("no samples".into()));
        }
        if let Some((i, v)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(ScenarioError::InvalidProfile(format!(
                "sample {i} = {v} is not a finite non-negative demand"
            )));
        }
        Ok(Self {
            date_tag,
            kind,
            samples,
        })
    }

    /// Builds a profile tagged by its calendar day kind.
    pub fn for_date(date_tag: NaiveDate, samples: Vec<f64>) -> Result<Self, ScenarioError> {
        Self::new(date_tag, DayKind::from_date(date_tag), samples)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Copy with every sample multiplied by `factor` (which must be >= 0).
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor >= 0.0 && factor.is_finite());
        Self {
            date_tag: self.date_tag,
            kind: self.kind,
            samples: self.samples.iter().map(|v| v * factor).collect(),
        }
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert!(samples.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self {
            date_tag: self.date_tag,
            kind: self.kind,
            samples,
        }
    }
}

/// Ordered, bounded window of past days (oldest first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryWindow {
    days: Vec<DayProfile>,
    capacity: usize,
}

impl HistoryWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            days: Vec::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn from_days(days: Vec<DayProfile>, capacity: usize) -> Result<Self, ScenarioError> {
        let mut w = Self::new(capacity);
        for d in days {
            w.push(d)?;
        }
        Ok(w)
    }

    /// Appends a day, evicting the oldest when full.
    pub fn push(&mut self, day: DayProfile) -> Result<(), ScenarioError> {
        if let Some(last) = self.days.last() {
            if day.date_tag <= last.date_tag {
                return Err(ScenarioError::Ordering {
                    last: last.date_tag,
                    new: day.date_tag,
                });
            }
            if day.len() != last.len() {
                return Err(ScenarioError::InvalidProfile(format!(
                    "day {} has {} samples, expected {}",
                    day.date_tag,
                    day.len(),
                    last.len()
                )));
            }
        }
        if self.days.len() == self.capacity {
            self.days.remove(0);
        }
        self.days.push(day);
        Ok(())
    }

    pub fn days(&self) -> &[DayProfile] {
        &self.days
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn last(&self) -> Option<&DayProfile> {
        self.days.last()
    }

    /// The first `n` days as a new window with the same capacity.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            days: self.days[..n.min(self.days.len())].to_vec(),
            capacity: self.capacity,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            days: self.days.iter().map(|d| d.scaled(factor)).collect(),
            capacity: self.capacity,
        }
    }
}

/// Physical parameters of one electric vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvSpec {
    /// kWh
    pub battery_capacity: f64,
    /// kW drawn while charging.
    pub charge_power: f64,
    /// kWh used by the daily trip.
    pub trip_energy: f64,
    pub target_soc: f64,
}

impl Default for EvSpec {
    fn default() -> Self {
        // 50 km at 0.15 kWh/km.
        Self {
            battery_capacity: 24.0,
            charge_power: 3.3,
            trip_energy: 7.5,
            target_soc: 0.8,
        }
    }
}

impl EvSpec {
    pub fn validate(&self, clock: &SlotClock) -> Result<(), ScenarioError> {
        let fields = [
            self.battery_capacity,
            self.charge_power,
            self.trip_energy,
            self.target_soc,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(ScenarioError::InvalidConfig(
                "EV parameters must all be positive".into(),
            ));
        }
        if self.target_soc > 1.0 {
            return Err(ScenarioError::InvalidConfig(
                "target_soc must be <= 1".into(),
            ));
        }
        if self.trip_energy >= self.battery_capacity {
            return Err(ScenarioError::InvalidConfig(
                "trip_energy must be below battery_capacity".into(),
            ));
        }
        if self.slot_energy(clock) > self.battery_capacity {
            return Err(ScenarioError::InvalidConfig(
                "one slot of charging exceeds the battery capacity".into(),
            ));
        }
        Ok(())
    }

    /// kWh delivered by one charging slot.
    pub fn slot_energy(&self, clock: &SlotClock) -> f64 {
        self.charge_power * clock.slot_hours()
    }

    /// SOC gained per charging slot.
    pub fn soc_per_slot(&self, clock: &SlotClock) -> f64 {
        self.slot_energy(clock) / self.battery_capacity
    }

    /// SOC consumed by the daily trip.
    pub fn trip_soc(&self) -> f64 {
        self.trip_energy / self.battery_capacity
    }

    /// Whole charging slots needed to supply `energy_kwh`.
    pub fn slots_for_energy(&self, energy_kwh: f64, clock: &SlotClock) -> usize {
        if energy_kwh <= 0.0 {
            return 0;
        }
        // Guard against 7.5 / 1.65 style ratios landing a hair above an integer.
        let ratio = energy_kwh / self.slot_energy(clock);
        (ratio - 1e-9).ceil().max(0.0) as usize
    }
}

/// Mean and standard deviation of a sample.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
