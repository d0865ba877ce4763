//! Greedy valley filling.
//!
//! Units of charge are placed one at a time: the EV with the fewest remaining
//! feasible slots takes its cheapest slot at current marginal cost. A
//! single-unit move pass then shifts units to cheaper slots until no move
//! lowers `F`. Ties always resolve to the lowest index.

use super::{marginal_cost, BaselineError, ChargingSchedule, CostInstance};

pub fn valley_fill(inst: &CostInstance) -> Result<ChargingSchedule, BaselineError> {
    inst.validate()?;
    inst.check_feasible()?;
    let (n, m) = (inst.n_evs(), inst.n_slots());
    let mut schedule = ChargingSchedule::empty(n, m);
    let mut load = vec![0usize; m];
    let mut remaining = inst.needs.clone();
    let mut free: Vec<usize> = (0..n).map(|i| inst.available_count(i)).collect();

    loop {
        let Some(ev) = (0..n)
            .filter(|&i| remaining[i] > 0)
            .min_by_key(|&i| (free[i], i))
        else {
            break;
        };
        let slot = (0..m)
            .filter(|&j| inst.available(ev, j) && !schedule.get(ev, j))
            .min_by(|&a, &b| {
                marginal_cost(inst.base_cost[a], load[a])
                    .total_cmp(&marginal_cost(inst.base_cost[b], load[b]))
                    .then(a.cmp(&b))
            })
            .expect("feasibility checked up front");
        schedule.set(ev, slot, true);
        load[slot] += 1;
        remaining[ev] -= 1;
        free[ev] -= 1;
    }

    refine(inst, &mut schedule, &mut load);
    Ok(schedule)
}

/// Moves single units from slot `a` to slot `b` (same EV) while that lowers `F`.
fn refine(inst: &CostInstance, schedule: &mut ChargingSchedule, load: &mut [usize]) {
    let (n, m) = (inst.n_evs(), inst.n_slots());
    loop {
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for i in 0..n {
            for a in (0..m).filter(|&a| schedule.get(i, a)) {
                // Removing the unit from `a` saves its marginal cost at load - 1.
                let saving = marginal_cost(inst.base_cost[a], load[a] - 1);
                for b in (0..m).filter(|&b| inst.available(i, b) && !schedule.get(i, b)) {
                    let gain = saving - marginal_cost(inst.base_cost[b], load[b]);
                    if gain > 1e-9 && best.is_none_or(|(g, ..)| gain > g) {
                        best = Some((gain, i, a, b));
                    }
                }
            }
        }
        let Some((_, i, a, b)) = best else { return };
        schedule.set(i, a, false);
        schedule.set(i, b, true);
        load[a] -= 1;
        load[b] += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{cost, solve_exact};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_costs_fill_flat() {
        let inst = CostInstance::homogeneous(vec![2.0; 4], vec![1; 4]);
        let s = valley_fill(&inst).unwrap();
        assert_eq!(s.column_sums(), vec![1; 4]);
        assert!(inst.meets_needs(&s));
    }

    #[test]
    fn close_to_exact_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(2..=7);
            let base = (0..m).map(|_| rng.random_range(0.0..6.0)).collect();
            let needs = (0..n).map(|_| rng.random_range(0..=m)).collect();
            let inst = CostInstance::homogeneous(base, needs);
            let vf = valley_fill(&inst).unwrap();
            let ex = solve_exact(&inst).unwrap();
            assert!(inst.meets_needs(&vf));
            let (cv, ce) = (cost(&inst, &vf).unwrap(), cost(&inst, &ex).unwrap());
            assert!(cv <= 1.02 * ce + 1e-9, "vf {cv} vs exact {ce}");
        }
    }

    #[test]
    fn cheaper_slots_carry_more_load() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base: Vec<f64> = (0..30).map(|_| rng.random_range(5.0..30.0)).collect();
        let inst = CostInstance::homogeneous(base.clone(), vec![5; 90]);
        let s = valley_fill(&inst).unwrap();
        let load = s.column_sums();
        for a in 0..30 {
            for b in 0..30 {
                if base[a] < base[b] {
                    assert!(
                        load[a] + 1 >= load[b],
                        "slot {a} cheaper but less loaded than {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn infeasible_reported() {
        let inst = CostInstance::homogeneous(vec![0.0; 2], vec![3]);
        assert!(matches!(
            valley_fill(&inst),
            Err(BaselineError::Infeasible(_))
        ));
    }
}
