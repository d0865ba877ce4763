//! Demand CSV ingestion and export.
//!
//! Format: header `timestamp,kw`, ISO-8601 timestamps, one row per reading.
//! Readings finer than the clock are averaged into their slot. A day missing
//! more than [`MAX_GAP_FRACTION`] of its slots is rejected; smaller gaps are
//! filled by linear interpolation. A trailing day whose readings simply stop
//! early is dropped.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Timelike};

use super::{DayProfile, HistoryWindow, ScenarioError, SlotClock, MAX_GAP_FRACTION};

const TIMESTAMP_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .or_else(|| {
            DateTime::parse_from_rfc3339(raw)
                .ok()
                .map(|d| d.naive_local())
        })
}

pub fn load_history(path: &Path, clock: &SlotClock) -> Result<HistoryWindow, ScenarioError> {
    let file = File::open(path)?;
    load_history_from_reader(BufReader::new(file), clock)
}

pub fn load_history_from_reader<R: Read>(
    reader: R,
    clock: &SlotClock,
) -> Result<HistoryWindow, ScenarioError> {
    let n = clock.slots_per_day();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| ScenarioError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "kw" {
        return Err(ScenarioError::MalformedRow {
            line: 1,
            reason: "expected header `timestamp,kw`".into(),
        });
    }

    // Per day: (sum, count) per slot.
    let mut days: BTreeMap<NaiveDate, Vec<(f64, u32)>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| ScenarioError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(ScenarioError::MalformedRow {
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let ts = parse_timestamp(&record[0]).ok_or_else(|| ScenarioError::MalformedRow {
            line,
            reason: format!("bad timestamp `{}`", &record[0]),
        })?;
        let kw: f64 = record[1].parse().map_err(|_| ScenarioError::MalformedRow {
            line,
            reason: format!("bad kw value `{}`", &record[1]),
        })?;
        if !kw.is_finite() || kw < 0.0 {
            return Err(ScenarioError::MalformedRow {
                line,
                reason: format!("kw must be finite and >= 0, got {kw}"),
            });
        }
        let slot = clock.slot_of_minute(ts.hour() * 60 + ts.minute());
        let cell = &mut days.entry(ts.date()).or_insert_with(|| vec![(0.0, 0); n])[slot];
        cell.0 += kw;
        cell.1 += 1;
    }

    let last_date = days.keys().next_back().copied();
    let mut profiles = Vec::with_capacity(days.len());
    for (date, cells) in days {
        let observed: Vec<Option<f64>> = cells
            .iter()
            .map(|&(s, c)| (c > 0).then(|| s / c as f64))
            .collect();
        let missing = observed.iter().filter(|v| v.is_none()).count();
        if missing == 0 {
            let samples = observed.into_iter().map(Option::unwrap).collect();
            profiles.push(DayProfile::for_date(date, samples)?);
            continue;
        }
        if Some(date) == last_date && is_truncated(&observed) {
            continue;
        }
        if missing as f64 / n as f64 > MAX_GAP_FRACTION {
            return Err(ScenarioError::GapInData(date));
        }
        profiles.push(DayProfile::for_date(date, fill_gaps(&observed))?);
    }

    let capacity = profiles.len().max(1);
    HistoryWindow::from_days(profiles, capacity)
}

/// True when every missing slot comes after the last observed one.
fn is_truncated(observed: &[Option<f64>]) -> bool {
    match observed.iter().rposition(Option::is_some) {
        Some(last) => observed[..=last].iter().all(Option::is_some),
        None => true,
    }
}

/// Linear interpolation across interior gaps; edges hold the nearest value.
fn fill_gaps(observed: &[Option<f64>]) -> Vec<f64> {
    let known: Vec<(usize, f64)> = observed
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    (0..observed.len())
        .map(|i| {
            if let Some(v) = observed[i] {
                return v;
            }
            let after = known.iter().find(|(j, _)| *j > i);
            let before = known.iter().rev().find(|(j, _)| *j < i);
            match (before, after) {
                (Some(&(a, va)), Some(&(b, vb))) => {
                    va + (vb - va) * (i - a) as f64 / (b - a) as f64
                }
                (Some(&(_, v)), None) | (None, Some(&(_, v))) => v,
                (None, None) => 0.0,
            }
        })
        .collect()
}

pub fn write_history(
    window: &HistoryWindow,
    clock: &SlotClock,
    path: &Path,
) -> Result<(), ScenarioError> {
    let mut file = std::io::BufWriter::new(File::create(path)?);
    write_history_to(window, clock, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn write_history_to<W: Write>(
    window: &HistoryWindow,
    clock: &SlotClock,
    out: &mut W,
) -> Result<(), ScenarioError> {
    writeln!(out, "timestamp,kw")?;
    for day in window.days() {
        let n = day.len();
        // Emit in wall-clock order so the file reads naturally.
        let mut rows: Vec<(u32, f64)> = (0..n)
            .map(|slot| (clock.minute_of_slot(slot), day.samples()[slot]))
            .collect();
        rows.sort_by_key(|r| r.0);
        for (minute, kw) in rows {
            writeln!(
                out,
                "{}T{:02}:{:02}:00,{}",
                day.date_tag.format("%Y-%m-%d"),
                minute / 60,
                minute % 60,
                kw
            )?;
        }
    }
    Ok(())
}
