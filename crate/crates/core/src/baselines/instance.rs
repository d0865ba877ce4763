use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::BaselineError;

/// Binary charging decisions, EVs × slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChargingSchedule {
    n_evs: usize,
    n_slots: usize,
    x: Vec<bool>,
}

impl ChargingSchedule {
    pub fn empty(n_evs: usize, n_slots: usize) -> Self {
        Self {
            n_evs,
            n_slots,
            x: vec![false; n_evs * n_slots],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self, BaselineError> {
        let n_slots = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_slots) {
            return Err(BaselineError::Malformed("ragged schedule rows".into()));
        }
        Ok(Self {
            n_evs: rows.len(),
            n_slots,
            x: rows.concat(),
        })
    }

    pub fn n_evs(&self) -> usize {
        self.n_evs
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn get(&self, ev: usize, slot: usize) -> bool {
        self.x[ev * self.n_slots + slot]
    }

    pub fn set(&mut self, ev: usize, slot: usize, on: bool) {
        self.x[ev * self.n_slots + slot] = on;
    }

    pub fn row(&self, ev: usize) -> &[bool] {
        &self.x[ev * self.n_slots..(ev + 1) * self.n_slots]
    }

    /// Number of EVs charging in each slot (`X_j`).
    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.n_slots];
        for row in self.x.chunks(self.n_slots.max(1)) {
            for (s, &on) in sums.iter_mut().zip(row) {
                *s += on as usize;
            }
        }
        sums
    }

    /// Charging slots used by each EV.
    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.n_evs)
            .map(|i| self.row(i).iter().filter(|&&b| b).count())
            .collect()
    }

    pub fn total_units(&self) -> usize {
        self.x.iter().filter(|&&b| b).count()
    }

    /// CSV matrix: header `ev,s0,s1,...`, one 0/1 row per EV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ev");
        for j in 0..self.n_slots {
            let _ = write!(out, ",s{j}");
        }
        out.push('\n');
        for i in 0..self.n_evs {
            let _ = write!(out, "{i}");
            for &on in self.row(i) {
                out.push_str(if on { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

/// Inputs of the centralised cost minimisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostInstance {
    /// `C_j`, baseload per slot in EV-equivalents.
    pub base_cost: Vec<f64>,
    /// Charging slots each EV needs.
    pub needs: Vec<usize>,
    /// Per-EV availability mask; omitted in files means "always available".
    #[serde(default)]
    pub availability: Vec<Vec<bool>>,
}

impl CostInstance {
    pub fn new(
        base_cost: Vec<f64>,
        needs: Vec<usize>,
        availability: Vec<Vec<bool>>,
    ) -> Result<Self, BaselineError> {
        let inst = Self {
            base_cost,
            needs,
            availability,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Every EV available in every slot.
    pub fn homogeneous(base_cost: Vec<f64>, needs: Vec<usize>) -> Self {
        let m = base_cost.len();
        let availability = vec![vec![true; m]; needs.len()];
        Self {
            base_cost,
            needs,
            availability,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, BaselineError> {
        let mut inst: Self =
            toml::from_str(text).map_err(|e| BaselineError::Malformed(e.to_string()))?;
        if inst.availability.is_empty() {
            inst.availability = vec![vec![true; inst.base_cost.len()]; inst.needs.len()];
        }
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("instance is always serializable")
    }

    pub fn n_evs(&self) -> usize {
        self.needs.len()
    }

    pub fn n_slots(&self) -> usize {
        self.base_cost.len()
    }

    pub fn available(&self, ev: usize, slot: usize) -> bool {
        self.availability[ev][slot]
    }

    pub fn available_count(&self, ev: usize) -> usize {
        self.availability[ev].iter().filter(|&&b| b).count()
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        let m = self.n_slots();
        if self.availability.len() != self.needs.len()
            || self.availability.iter().any(|r| r.len() != m)
        {
            return Err(BaselineError::Malformed(
                "availability must be n_evs × n_slots".into(),
            ));
        }
        if self.base_cost.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(BaselineError::Malformed(
                "base costs must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Every EV can meet its need inside its own availability.
    pub fn check_feasible(&self) -> Result<(), BaselineError> {
        for (i, &need) in self.needs.iter().enumerate() {
            let avail = self.available_count(i);
            if need > avail {
                return Err(BaselineError::Infeasible(format!(
                    "EV {i} needs {need} slots but only {avail} are available"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn check_schedule_shape(&self, s: &ChargingSchedule) -> Result<(), BaselineError> {
        if s.n_evs() != self.n_evs() || s.n_slots() != self.n_slots() {
            return Err(BaselineError::InfeasibleSchedule(format!(
                "schedule is {}×{}, instance is {}×{}",
                s.n_evs(),
                s.n_slots(),
                self.n_evs(),
                self.n_slots()
            )));
        }
        for i in 0..s.n_evs() {
            for j in 0..s.n_slots() {
                if s.get(i, j) && !self.available(i, j) {
                    return Err(BaselineError::InfeasibleSchedule(format!(
                        "EV {i} charges in unavailable slot {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Feasible and every EV's need met exactly.
    pub fn meets_needs(&self, s: &ChargingSchedule) -> bool {
        self.check_schedule_shape(s).is_ok() && s.row_sums() == self.needs
    }
}
