//! Pass/fail bookkeeping for the acceptance target.

use std::fmt;
use std::time::Duration;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<28} {} ({:.1}s) {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Summary line and process exit code for a set of verdicts.
pub fn summary(verdicts: &[Verdict]) -> (String, i32) {
    let failed: Vec<String> = verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| v.id.to_string())
        .collect();
    let line = format!(
        "acceptance: {} passed, {} failed{}",
        verdicts.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" (criteria {})", failed.join(", "))
        }
    );
    (line, i32::from(!failed.is_empty()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(id: usize, pass: bool) -> Verdict {
        Verdict {
            id,
            name: "x",
            pass,
            detail: String::new(),
            elapsed: Duration::ZERO,
        }
    }

    #[test]
    fn summary_counts_failures() {
        let (line, code) = summary(&[v(1, true), v(2, false), v(3, false)]);
        assert_eq!(code, 1);
        assert!(line.contains("1 passed, 2 failed (criteria 2, 3)"));
        assert_eq!(summary(&[v(1, true)]).1, 0);
    }
}
