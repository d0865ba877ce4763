//! Centralised and heuristic charging schedules used as comparison points.
//!
//! The cost of a schedule is `F(x) = Σ_j (N_j + C_j) · N_j`, where `N_j` is the
//! number of EVs charging in slot `j` and `C_j` the baseload expressed in
//! EV-equivalents (baseload kW divided by charger kW). Every EV charging in a
//! slot pays a price proportional to the slot's total load.

mod exact;
mod greedy;
mod instance;
mod valley;

use thiserror::Error;

pub use exact::{solve_exact, MAX_EXACT_EVS, MAX_EXACT_SLOTS};
pub use greedy::{greedy_schedule, night_greedy_schedule};
pub use instance::{ChargingSchedule, CostInstance};
pub use valley::valley_fill;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("schedule is infeasible: {0}")]
    InfeasibleSchedule(String),
    #[error("instance has no feasible schedule: {0}")]
    Infeasible(String),
    #[error("instance too large for exhaustive search ({evs} EVs × {slots} slots)")]
    InstanceTooLarge { evs: usize, slots: usize },
    #[error("malformed instance: {0}")]
    Malformed(String),
}

/// Evaluates `F(x)`; rejects schedules that charge outside availability or
/// whose shape does not match the instance.
pub fn cost(instance: &CostInstance, schedule: &ChargingSchedule) -> Result<f64, BaselineError> {
    instance.check_schedule_shape(schedule)?;
    Ok(cost_of_counts(&instance.base_cost, &schedule.column_sums()))
}

/// `F` as a function of per-slot charging counts only.
pub fn cost_of_counts(base_cost: &[f64], counts: &[usize]) -> f64 {
    base_cost
        .iter()
        .zip(counts)
        .map(|(c, &n)| {
            let n = n as f64;
            (n + c) * n
        })
        .sum()
}

/// Increase in `F` from adding one more EV to a slot that already has `load`.
pub fn marginal_cost(base: f64, load: usize) -> f64 {
    2.0 * load as f64 + 1.0 + base
}
