//! Per-EV learners: one Q-table per objective (reach the target charge; avoid
//! charging into high demand) and W-learning arbitration between them.

mod tables;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::{AgentConfig, EvSpec, RewardConfig};

pub use tables::{QTable, WTable};

/// Demand relative to forecast statistics: low below `mean − 0.5σ`, high
/// above `mean + 0.5σ`, medium in between (boundaries count as medium).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandLevel {
    Low,
    Medium,
    High,
}

impl DemandLevel {
    pub fn classify(value: f64, mean: f64, std: f64) -> Self {
        if value < mean - 0.5 * std {
            DemandLevel::Low
        } else if value > mean + 0.5 * std {
            DemandLevel::High
        } else {
            DemandLevel::Medium
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Idle,
    Charge,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Idle, Action::Charge];
}

/// Discretised observation shared by both objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentState {
    /// Position inside the availability window.
    pub slot: u16,
    pub soc_bucket: u8,
    pub level: DemandLevel,
}

impl AgentState {
    pub fn new(slot: usize, soc: f64, buckets: usize, level: DemandLevel) -> Self {
        Self {
            slot: slot as u16,
            soc_bucket: soc_bucket(soc, buckets),
            level,
        }
    }
}

pub fn soc_bucket(soc: f64, buckets: usize) -> u8 {
    ((soc.clamp(0.0, 1.0) * buckets as f64) as usize).min(buckets - 1) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Charge,
    Price,
}

/// Outcome of arbitration for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: Action,
    /// Objective whose nomination won (also set when exploring).
    pub winner: Objective,
    pub explored: bool,
}

/// +1 for charging while still below the target, −1 for charging an EV that
/// was already there, 0 for idling.
pub fn reward_charge(action: Action, soc_before: f64, target_soc: f64, cfg: &RewardConfig) -> f64 {
    match action {
        Action::Idle => 0.0,
        Action::Charge if soc_before < target_soc - 1e-12 => cfg.charge_reward,
        Action::Charge => cfg.overcharge_penalty,
    }
}

pub fn reward_price(action: Action, level: DemandLevel, cfg: &RewardConfig) -> f64 {
    match (action, level) {
        (Action::Idle, _) => 0.0,
        (Action::Charge, DemandLevel::Low) => cfg.low_demand_reward,
        (Action::Charge, DemandLevel::Medium) => cfg.medium_demand_reward,
        (Action::Charge, DemandLevel::High) => cfg.high_demand_penalty,
    }
}

/// One EV and its learning state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvAgent {
    pub id: usize,
    pub spec: EvSpec,
    pub soc: f64,
    pub q_charge: QTable,
    pub q_price: QTable,
    pub w_charge: WTable,
    pub w_price: WTable,
    pub epsilon: f64,
    #[serde(skip, default = "unseeded")]
    rng: ChaCha8Rng,
}

fn unseeded() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl EvAgent {
    /// RNG stream is `run_seed XOR id`, independent per agent.
    pub fn new(id: usize, spec: EvSpec, soc: f64, cfg: &AgentConfig, run_seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&soc), "soc must be a fraction");
        Self {
            id,
            spec,
            soc,
            q_charge: QTable::new(cfg.alpha, cfg.gamma),
            q_price: QTable::new(cfg.alpha, cfg.gamma),
            w_charge: WTable::new(cfg.alpha),
            w_price: WTable::new(cfg.alpha),
            epsilon: cfg.epsilon_start,
            rng: ChaCha8Rng::seed_from_u64(run_seed ^ id as u64),
        }
    }

    pub fn reseed(&mut self, run_seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(run_seed ^ self.id as u64);
    }

    /// Target reached or battery full: the agent no longer charges today.
    pub fn is_satisfied(&self) -> bool {
        self.soc >= self.spec.target_soc - 1e-12 || self.soc >= 1.0
    }

    /// ε-greedy W-learning arbitration. With probability ε a uniform random
    /// action is taken; otherwise the objective with the larger W nominates
    /// its greedy action. W ties go to the price objective.
    pub fn select_action(&mut self, s_charge: &AgentState, s_price: &AgentState) -> Decision {
        let (wc, wp) = (self.w_charge.get(s_charge), self.w_price.get(s_price));
        let winner = if wc > wp {
            Objective::Charge
        } else {
            Objective::Price
        };
        if self.epsilon > 0.0 && self.rng.random::<f64>() < self.epsilon {
            let action = if self.rng.random_bool(0.5) {
                Action::Charge
            } else {
                Action::Idle
            };
            return Decision {
                action,
                winner,
                explored: true,
            };
        }
        let action = match winner {
            Objective::Charge => self.q_charge.greedy_action(s_charge),
            Objective::Price => self.q_price.greedy_action(s_price),
        };
        Decision {
            action,
            winner,
            explored: false,
        }
    }

    /// Q updates for both objectives plus the W update for the losing one.
    #[allow(clippy::too_many_arguments)]
    pub fn learn(
        &mut self,
        decision: &Decision,
        s_charge: &AgentState,
        s_price: &AgentState,
        r_charge: f64,
        r_price: f64,
        next_charge: Option<&AgentState>,
        next_price: Option<&AgentState>,
    ) {
        // W regret is measured against the loser's values before this step's Q update.
        match decision.winner {
            Objective::Charge => {
                self.w_price
                    .update_loser(s_price, &self.q_price, r_price, next_price);
            }
            Objective::Price => {
                self.w_charge
                    .update_loser(s_charge, &self.q_charge, r_charge, next_charge);
            }
        }
        self.q_charge
            .update(s_charge, decision.action, r_charge, next_charge);
        self.q_price
            .update(s_price, decision.action, r_price, next_price);
    }

    pub fn max_abs_q(&self) -> f64 {
        self.q_charge.max_abs().max(self.q_price.max_abs())
    }
}

/// Versioned dump of every agent's tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentTablesDump {
    pub format: String,
    pub version: u32,
    pub agents: Vec<EvAgent>,
}

impl AgentTablesDump {
    pub const FORMAT: &'static str = "pmarl-agent-tables";
    pub const VERSION: u32 = 1;

    pub fn new(agents: &[EvAgent]) -> Self {
        Self {
            format: Self::FORMAT.into(),
            version: Self::VERSION,
            agents: agents.to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let dump: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if dump.format != Self::FORMAT || dump.version != Self::VERSION {
            return Err(format!(
                "unsupported table dump {} v{}",
                dump.format, dump.version
            ));
        }
        Ok(dump)
    }
}
