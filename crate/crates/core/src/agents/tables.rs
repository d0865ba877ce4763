use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Action, AgentState};

/// Tabular action values for one objective. Missing entries read as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(with = "entries")]
    values: BTreeMap<(AgentState, Action), f64>,
}

impl QTable {
    pub fn new(alpha: f64, gamma: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
        assert!((0.0..1.0).contains(&gamma), "gamma must be in [0, 1)");
        Self {
            alpha,
            gamma,
            values: BTreeMap::new(),
        }
    }

    pub fn get(&self, s: &AgentState, a: Action) -> f64 {
        self.values.get(&(*s, a)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, s: AgentState, a: Action, v: f64) {
        assert!(v.is_finite(), "Q-values must stay finite");
        self.values.insert((s, a), v);
    }

    pub fn max_value(&self, s: &AgentState) -> f64 {
        Action::ALL
            .iter()
            .map(|&a| self.get(s, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax over actions; ties go to idle.
    pub fn greedy_action(&self, s: &AgentState) -> Action {
        if self.get(s, Action::Charge) > self.get(s, Action::Idle) {
            Action::Charge
        } else {
            Action::Idle
        }
    }

    /// One-step target `r + γ·max_a' Q(s', a')`; `None` marks a terminal step.
    pub fn target(&self, r: f64, next: Option<&AgentState>) -> f64 {
        r + next.map_or(0.0, |n| self.gamma * self.max_value(n))
    }

    /// `Q(s,a) ← Q(s,a) + α·(r + γ·max_a' Q(s',a') − Q(s,a))`. Returns the new value.
    pub fn update(&mut self, s: &AgentState, a: Action, r: f64, next: Option<&AgentState>) -> f64 {
        let old = self.get(s, a);
        let new = old + self.alpha * (self.target(r, next) - old);
        self.set(*s, a, new);
        new
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(AgentState, Action), &f64)> {
        self.values.iter()
    }
}

/// Per-state arbitration weights for one objective. Missing entries read as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WTable {
    pub alpha: f64,
    #[serde(with = "entries")]
    values: BTreeMap<AgentState, f64>,
}

impl WTable {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
        Self {
            alpha,
            values: BTreeMap::new(),
        }
    }

    pub fn get(&self, s: &AgentState) -> f64 {
        self.values.get(s).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, s: AgentState, v: f64) {
        assert!(v.is_finite(), "W-values must stay finite");
        self.values.insert(s, v);
    }

    /// Loser's regret update:
    /// `W(s) ← (1−α)·W(s) + α·(max_a Q(s,a) − (r + γ·max_a' Q(s',a')))`,
    /// where `Q` and `r` belong to the objective that lost arbitration.
    pub fn update_loser(
        &mut self,
        s: &AgentState,
        loser_q: &QTable,
        r: f64,
        next: Option<&AgentState>,
    ) -> f64 {
        let regret = loser_q.max_value(s) - loser_q.target(r, next);
        let new = (1.0 - self.alpha) * self.get(s) + self.alpha * regret;
        self.set(*s, new);
        new
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AgentState, &f64)> {
        self.values.iter()
    }
}

/// Serializes maps with struct keys as ordered `[key, value]` lists.
mod entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(
        map: &BTreeMap<K, V>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        ser.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(de: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(de)?.into_iter().collect())
    }
}
