//! Fixture manifest: expected values with provenance, tolerance and the
//! oracle command that recomputes them.
//!
//! Oracle commands (paths are relative to the manifest):
//!
//! - `exact-cost FILE` cost of the exhaustive optimum of a cost instance
//! - `valley-cost FILE` cost of the valley-filling schedule
//! - `efficiency X XHAT N` per-slot counts as comma lists
//! - `mape ACTUAL PREDICTED` comma lists, percent
//! - `history-mean FILE` mean kW over a demand CSV
//! - `history-days FILE` number of days in a demand CSV

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{cost, solve_exact, valley_fill, BaselineError, CostInstance};
use crate::scenario::{load_history, ScenarioError, SlotClock};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Malformed(String),
    #[error("unknown oracle command `{0}`")]
    UnknownOracle(String),
    #[error("oracle `{oracle}` failed: {reason}")]
    OracleFailed { oracle: String, reason: String },
    #[error("{entry}: oracle gives {computed}, recorded {recorded} (tolerance {tolerance})")]
    OracleMismatch {
        entry: String,
        recorded: f64,
        computed: f64,
        tolerance: f64,
    },
}

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Published figure kept for orientation; never asserted.
    Reference,
    /// Follows directly from a definition; never rewritten.
    Identity,
    /// Produced by an in-repo oracle and frozen; regenerable.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub key: String,
    pub provenance: Provenance,
    /// Absent until an oracle entry is generated for the first time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default)]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    #[serde(default)]
    pub files: Vec<String>,
    #[serde(default)]
    pub expected: Vec<Expected>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "fixture")]
    pub fixtures: Vec<Fixture>,
}

/// One rewritten value.
#[derive(Debug, Clone, PartialEq)]
pub struct Change {
    pub entry: String,
    pub old: Option<f64>,
    pub new: f64,
}

impl fmt::Display for Change {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.old {
            Some(old) => write!(
                f,
                "- {} = {old:?}\n+ {} = {:?}",
                self.entry, self.entry, self.new
            ),
            None => write!(f, "+ {} = {:?}", self.entry, self.new),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> FixtureError + '_ {
    move |source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Manifest {
    pub fn from_toml_str(text: &str) -> Result<Self, FixtureError> {
        let m: Self = toml::from_str(text).map_err(|e| FixtureError::Malformed(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        Self::from_toml_str(&fs::read_to_string(path).map_err(io(path))?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest is always serializable")
    }

    fn validate(&self) -> Result<(), FixtureError> {
        for f in &self.fixtures {
            for e in &f.expected {
                let id = format!("{}.{}", f.name, e.key);
                let bad = |m: &str| Err(FixtureError::Malformed(format!("{id}: {m}")));
                if !(e.tolerance >= 0.0 && e.tolerance.is_finite()) {
                    return bad("tolerance must be finite and >= 0");
                }
                match e.provenance {
                    Provenance::Reference if e.oracle.is_some() => {
                        return bad("reference values carry no oracle")
                    }
                    Provenance::Oracle if e.oracle.is_none() => {
                        return bad("oracle command missing")
                    }
                    Provenance::Identity if e.value.is_none() => return bad("value missing"),
                    Provenance::Reference if e.value.is_none() => return bad("value missing"),
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Entries as `(fixture.key, entry)`.
    pub fn entries(&self) -> impl Iterator<Item = (String, &Expected)> {
        self.fixtures.iter().flat_map(|f| {
            f.expected
                .iter()
                .map(move |e| (format!("{}.{}", f.name, e.key), e))
        })
    }
}

fn list(arg: &str) -> Result<Vec<f64>, String> {
    arg.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s}: {e}")))
        .collect()
}

fn instance(dir: &Path, file: &str) -> Result<CostInstance, String> {
    let p = dir.join(file);
    let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
    CostInstance::from_toml_str(&text).map_err(|e| e.to_string())
}

fn baseline(e: BaselineError) -> String {
    e.to_string()
}

/// Runs an oracle command; relative paths resolve against `dir`.
pub fn run_oracle(command: &str, dir: &Path) -> Result<f64, FixtureError> {
    let words: Vec<&str> = command.split_whitespace().collect();
    let fail = |reason: String| FixtureError::OracleFailed {
        oracle: command.to_string(),
        reason,
    };
    let arity = |n: usize| {
        if words.len() == n + 1 {
            Ok(())
        } else {
            Err(fail(format!("expected {n} argument(s)")))
        }
    };
    match words.first().copied() {
        Some("exact-cost") => {
            arity(1)?;
            let inst = instance(dir, words[1]).map_err(fail)?;
            let s = solve_exact(&inst).map_err(|e| fail(baseline(e)))?;
            cost(&inst, &s).map_err(|e| fail(baseline(e)))
        }
        Some("valley-cost") => {
            arity(1)?;
            let inst = instance(dir, words[1]).map_err(fail)?;
            let s = valley_fill(&inst).map_err(|e| fail(baseline(e)))?;
            cost(&inst, &s).map_err(|e| fail(baseline(e)))
        }
        Some("efficiency") => {
            arity(3)?;
            let x = list(words[1]).map_err(fail)?;
            let y = list(words[2]).map_err(fail)?;
            let n: f64 = words[3]
                .parse()
                .map_err(|_| fail("bad fleet size".into()))?;
            if x.len() != y.len() || x.is_empty() || n <= 0.0 {
                return Err(fail(
                    "count lists must be non-empty and equally long".into(),
                ));
            }
            let s: f64 = x.iter().zip(&y).map(|(a, b)| 1.0 - (a - b).abs() / n).sum();
            Ok(s / x.len() as f64)
        }
        Some("mape") => {
            arity(2)?;
            let a = list(words[1]).map_err(fail)?;
            let p = list(words[2]).map_err(fail)?;
            let terms: Vec<f64> = a
                .iter()
                .zip(&p)
                .filter(|(a, _)| **a != 0.0)
                .map(|(a, p)| ((a - p) / a).abs())
                .collect();
            if a.len() != p.len() || terms.is_empty() {
                return Err(fail(
                    "need equally long lists with a non-zero actual".into(),
                ));
            }
            Ok(100.0 * terms.iter().sum::<f64>() / terms.len() as f64)
        }
        Some(cmd @ ("history-mean" | "history-days")) => {
            arity(1)?;
            let h = load_history(&dir.join(words[1]), &SlotClock::half_hourly())
                .map_err(|e: ScenarioError| fail(e.to_string()))?;
            if cmd == "history-days" {
                return Ok(h.len() as f64);
            }
            let (sum, count) = h
                .days()
                .iter()
                .flat_map(|d| d.samples())
                .fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
            Ok(sum / count.max(1) as f64)
        }
        _ => Err(FixtureError::UnknownOracle(command.to_string())),
    }
}

/// Recomputes every oracle entry. Values within tolerance are replaced by
/// the fresh result; any drift beyond tolerance aborts with
/// [`FixtureError::OracleMismatch`] before anything is changed.
pub fn regen_manifest(
    manifest: &Manifest,
    dir: &Path,
) -> Result<(Manifest, Vec<Change>), FixtureError> {
    let mut out = manifest.clone();
    let mut changes = Vec::new();
    for f in &mut out.fixtures {
        for e in &mut f.expected {
            if e.provenance != Provenance::Oracle {
                continue;
            }
            let entry = format!("{}.{}", f.name, e.key);
            let computed = run_oracle(e.oracle.as_deref().unwrap_or_default(), dir)?;
            if let Some(recorded) = e.value {
                if (computed - recorded).abs() > e.tolerance {
                    return Err(FixtureError::OracleMismatch {
                        entry,
                        recorded,
                        computed,
                        tolerance: e.tolerance,
                    });
                }
            }
            if e.value != Some(computed) {
                changes.push(Change {
                    entry,
                    old: e.value,
                    new: computed,
                });
                e.value = Some(computed);
            }
        }
    }
    Ok((out, changes))
}

/// Regenerates the manifest at `path` in place and returns the diff.
pub fn regen_file(path: &Path) -> Result<Vec<Change>, FixtureError> {
    let manifest = Manifest::load(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let (updated, changes) = regen_manifest(&manifest, dir)?;
    if !changes.is_empty() {
        fs::write(path, updated.to_toml_string()).map_err(io(path))?;
    }
    Ok(changes)
}

/// Entries whose oracle disagrees with the recorded value. Reference values
/// are never checked.
pub fn verify(manifest: &Manifest, dir: &Path) -> Result<Vec<FixtureError>, FixtureError> {
    let mut failures = Vec::new();
    for (entry, e) in manifest.entries() {
        let (Some(cmd), Some(recorded)) = (&e.oracle, e.value) else {
            if e.provenance == Provenance::Oracle {
                failures.push(FixtureError::Malformed(format!(
                    "{entry}: not generated yet"
                )));
            }
            continue;
        };
        let computed = run_oracle(cmd, dir)?;
        if (computed - recorded).abs() > e.tolerance {
            failures.push(FixtureError::OracleMismatch {
                entry,
                recorded,
                computed,
                tolerance: e.tolerance,
            });
        }
    }
    Ok(failures)
}
