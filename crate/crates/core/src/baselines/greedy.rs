//! "Charge as soon as possible" schedules.

use super::{BaselineError, ChargingSchedule, CostInstance};

/// Each EV takes its earliest available slots until its need is met.
pub fn greedy_schedule(inst: &CostInstance) -> Result<ChargingSchedule, BaselineError> {
    earliest_first(inst, 0)
}

/// As [`greedy_schedule`], but slots before `tariff_start` (an index into the
/// instance's slot order) are off limits. Infeasibility is reported, not relaxed.
pub fn night_greedy_schedule(
    inst: &CostInstance,
    tariff_start: usize,
) -> Result<ChargingSchedule, BaselineError> {
    earliest_first(inst, tariff_start)
}

fn earliest_first(inst: &CostInstance, first: usize) -> Result<ChargingSchedule, BaselineError> {
    inst.validate()?;
    let (n, m) = (inst.n_evs(), inst.n_slots());
    let mut s = ChargingSchedule::empty(n, m);
    for i in 0..n {
        let slots: Vec<usize> = (first.min(m)..m)
            .filter(|&j| inst.available(i, j))
            .take(inst.needs[i])
            .collect();
        if slots.len() < inst.needs[i] {
            return Err(BaselineError::Infeasible(format!(
                "EV {i} needs {} slots but only {} remain from slot {first}",
                inst.needs[i],
                slots.len()
            )));
        }
        for j in slots {
            s.set(i, j, true);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Window 18:00–09:00 at half-hour resolution; 23:00 is index 10.
    fn window_instance(needs: Vec<usize>) -> CostInstance {
        CostInstance::homogeneous(vec![1.0; 30], needs)
    }

    #[test]
    fn earliest_slots() {
        let s = greedy_schedule(&window_instance(vec![4])).unwrap();
        let on: Vec<usize> = (0..30).filter(|&j| s.get(0, j)).collect();
        assert_eq!(on, vec![0, 1, 2, 3]);
    }

    #[test]
    fn night_variant_starts_at_tariff() {
        let s = night_greedy_schedule(&window_instance(vec![4]), 10).unwrap();
        let on: Vec<usize> = (0..30).filter(|&j| s.get(0, j)).collect();
        assert_eq!(on, vec![10, 11, 12, 13]);
    }

    #[test]
    fn night_variant_reports_short_window() {
        let err = night_greedy_schedule(&window_instance(vec![25]), 10).unwrap_err();
        assert!(matches!(err, BaselineError::Infeasible(_)));
    }

    #[test]
    fn permuting_evs_permutes_rows() {
        let inst = CostInstance::new(
            vec![1.0; 5],
            vec![2, 1, 3],
            vec![
                vec![false, true, true, true, true],
                vec![true; 5],
                vec![true, true, false, true, true],
            ],
        )
        .unwrap();
        let perm = [2, 0, 1];
        let permuted = CostInstance::new(
            inst.base_cost.clone(),
            perm.iter().map(|&p| inst.needs[p]).collect(),
            perm.iter().map(|&p| inst.availability[p].clone()).collect(),
        )
        .unwrap();
        for f in [greedy_schedule, |i: &CostInstance| {
            night_greedy_schedule(i, 1)
        }] {
            let (a, b) = (f(&inst).unwrap(), f(&permuted).unwrap());
            for (k, &p) in perm.iter().enumerate() {
                assert_eq!(b.row(k), a.row(p));
            }
        }
    }
}
