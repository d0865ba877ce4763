//! Exhaustive minimiser for tiny instances.
//!
//! `F` depends on the schedule only through the per-slot counts, so the search
//! runs over reachable count vectors (packed 3 bits per slot) instead of over
//! raw matrices. Ties are broken towards the lexicographically smallest
//! row-major schedule, with `false < true`.

use std::collections::HashSet;

use super::{cost_of_counts, BaselineError, ChargingSchedule, CostInstance};

pub const MAX_EXACT_EVS: usize = 6;
pub const MAX_EXACT_SLOTS: usize = 8;

const BITS: u32 = 3;
const MASK: u32 = (1 << BITS) - 1;

fn decode(code: u32, m: usize) -> Vec<usize> {
    (0..m)
        .map(|j| ((code >> (BITS * j as u32)) & MASK) as usize)
        .collect()
}

fn sub(a: u32, b: u32, m: usize) -> Option<u32> {
    let mut out = 0;
    for j in 0..m as u32 {
        let (x, y) = ((a >> (BITS * j)) & MASK, (b >> (BITS * j)) & MASK);
        if y > x {
            return None;
        }
        out |= (x - y) << (BITS * j);
    }
    Some(out)
}

/// Candidate rows for one EV in ascending lexicographic order.
fn candidate_rows(inst: &CostInstance, ev: usize) -> Vec<Vec<bool>> {
    let m = inst.n_slots();
    let need = inst.needs[ev];
    // Slot 0 is the most significant bit, so numeric order = lexicographic order.
    (0u32..(1 << m))
        .filter(|mask| mask.count_ones() as usize == need)
        .map(|mask| {
            (0..m)
                .map(|j| mask & (1 << (m - 1 - j)) != 0)
                .collect::<Vec<bool>>()
        })
        .filter(|row| {
            row.iter()
                .enumerate()
                .all(|(j, &on)| !on || inst.available(ev, j))
        })
        .collect()
}

fn row_code(row: &[bool]) -> u32 {
    row.iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .fold(0, |acc, (j, _)| acc + (1 << (BITS * j as u32)))
}

pub fn solve_exact(inst: &CostInstance) -> Result<ChargingSchedule, BaselineError> {
    let (n, m) = (inst.n_evs(), inst.n_slots());
    if n > MAX_EXACT_EVS || m > MAX_EXACT_SLOTS {
        return Err(BaselineError::InstanceTooLarge { evs: n, slots: m });
    }
    inst.validate()?;
    inst.check_feasible()?;
    if n == 0 {
        return Ok(ChargingSchedule::empty(0, m));
    }

    let rows: Vec<Vec<Vec<bool>>> = (0..n).map(|i| candidate_rows(inst, i)).collect();
    let row_codes: Vec<Vec<u32>> = rows
        .iter()
        .map(|rs| rs.iter().map(|r| row_code(r)).collect())
        .collect();

    // reachable[i]: count vectors achievable by EVs i..n.
    let mut reachable: Vec<HashSet<u32>> = vec![HashSet::new(); n + 1];
    reachable[n].insert(0);
    for i in (0..n).rev() {
        let mut next = HashSet::new();
        for &tail in &reachable[i + 1] {
            for &rc in &row_codes[i] {
                next.insert(tail + rc);
            }
        }
        reachable[i] = next;
    }

    let mut best = f64::INFINITY;
    for &code in &reachable[0] {
        best = best.min(cost_of_counts(&inst.base_cost, &decode(code, m)));
    }
    let tol = 1e-9 * best.abs().max(1.0);
    let mut optimal: Vec<u32> = reachable[0]
        .iter()
        .copied()
        .filter(|&c| cost_of_counts(&inst.base_cost, &decode(c, m)) <= best + tol)
        .collect();
    optimal.sort_unstable();

    let mut schedule = ChargingSchedule::empty(n, m);
    let mut placed = 0u32;
    for i in 0..n {
        let chosen = rows[i]
            .iter()
            .zip(&row_codes[i])
            .find(|(_, &rc)| {
                let partial = placed + rc;
                optimal.iter().any(|&target| {
                    sub(target, partial, m).is_some_and(|rest| reachable[i + 1].contains(&rest))
                })
            })
            .expect("an optimal completion always exists");
        for (j, &on) in chosen.0.iter().enumerate() {
            schedule.set(i, j, on);
        }
        placed += chosen.1;
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::cost;

    #[test]
    fn single_ev_picks_cheapest_slot() {
        let inst = CostInstance::homogeneous(vec![5.0, 1.0, 3.0], vec![1]);
        let s = solve_exact(&inst).unwrap();
        assert_eq!(s.row(0), &[false, true, false]);
    }

    #[test]
    fn spreading_beats_stacking() {
        // Feasible schedules: both in slot 0 (cost 6), both in slot 1 (6),
        // one per slot either way (4). Lexicographic tie-break picks EV0 → slot 1.
        let inst = CostInstance::homogeneous(vec![1.0, 1.0], vec![1, 1]);
        let s = solve_exact(&inst).unwrap();
        assert_eq!(cost(&inst, &s).unwrap(), 4.0);
        assert_eq!(s.column_sums(), vec![1, 1]);
        assert_eq!(s.row(0), &[false, true]);
    }

    #[test]
    fn zero_evs() {
        let inst = CostInstance::homogeneous(vec![1.0, 2.0], vec![]);
        let s = solve_exact(&inst).unwrap();
        assert_eq!(s.n_evs(), 0);
        assert_eq!(cost(&inst, &s).unwrap(), 0.0);
    }

    #[test]
    fn guards() {
        let big = CostInstance::homogeneous(vec![0.0; 9], vec![1]);
        assert!(matches!(
            solve_exact(&big),
            Err(BaselineError::InstanceTooLarge { .. })
        ));
        let infeasible = CostInstance::homogeneous(vec![0.0; 2], vec![3]);
        assert!(matches!(
            solve_exact(&infeasible),
            Err(BaselineError::Infeasible(_))
        ));
    }

    #[test]
    fn respects_masks() {
        let inst = CostInstance::new(
            vec![0.0, 10.0, 0.0],
            vec![1, 1],
            vec![vec![false, true, false], vec![true, true, true]],
        )
        .unwrap();
        let s = solve_exact(&inst).unwrap();
        assert!(inst.meets_needs(&s));
        assert!(s.get(0, 1));
    }
}
