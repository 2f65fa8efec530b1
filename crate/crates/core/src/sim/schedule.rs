use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// When agents compute updates (the sets `K^i`) and when they transmit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActivationSchedule {
    /// Each tick, agent `i` updates with probability `p_update`, and for every
    /// other agent `j` independently sends its block to `j` with probability
    /// `p_transmit`.
    Bernoulli { p_update: f64, p_transmit: f64 },
    /// Per-agent sorted update ticks and broadcast ticks.
    Explicit { updates: Vec<Vec<u64>>, transmits: Vec<Vec<u64>> },
}

impl ActivationSchedule {
    /// Every agent updates and transmits to everyone at every tick.
    pub fn every_step() -> Self {
        ActivationSchedule::Bernoulli { p_update: 1.0, p_transmit: 1.0 }
    }

    pub fn validate(&self, agents: usize) -> Result<()> {
        match self {
            ActivationSchedule::Bernoulli { p_update, p_transmit } => {
                for (name, p) in [("p_update", p_update), ("p_transmit", p_transmit)] {
                    if !(*p > 0.0 && *p <= 1.0) {
                        return Err(Error::invalid(format!("{name} must lie in (0, 1], got {p}")));
                    }
                }
                Ok(())
            }
            ActivationSchedule::Explicit { updates, transmits } => {
                for (what, lists) in [("update", updates), ("transmit", transmits)] {
                    if lists.len() != agents {
                        return Err(Error::Dimension { what: "explicit schedule agents", expected: agents, found: lists.len() });
                    }
                    if let Some(i) = lists.iter().position(|l| l.windows(2).any(|w| w[0] >= w[1])) {
                        return Err(Error::invalid(format!("{what} ticks of agent {i} must be strictly increasing")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Explicit schedules must give every agent at least one update before `horizon`.
    pub fn check_feasible(&self, agents: usize, horizon: u64) -> Result<()> {
        self.validate(agents)?;
        if let ActivationSchedule::Explicit { updates, .. } = self {
            if horizon > 0 {
                if let Some(i) = updates.iter().position(|u| u.first().is_none_or(|&k| k >= horizon)) {
                    return Err(Error::invalid(format!("agent {i} never updates within the horizon of {horizon} ticks")));
                }
            }
        }
        Ok(())
    }
}

/// Replays a schedule tick by tick. Update and transmission draws come from
/// separate streams so that the update pattern alone can be regenerated.
#[derive(Debug, Clone)]
pub struct ScheduleSampler {
    schedule: ActivationSchedule,
    updates: ChaCha8Rng,
    transmits: ChaCha8Rng,
}

impl ScheduleSampler {
    pub fn new(schedule: ActivationSchedule, seed: u64) -> Self {
        ScheduleSampler {
            schedule,
            updates: rng::stream(seed, Stream::Updates),
            transmits: rng::stream(seed, Stream::Transmissions),
        }
    }

    /// Fills `out[i]` with whether `k` is in `K^i`. Must be called once per tick, in order.
    pub fn updates_at(&mut self, k: u64, out: &mut [bool]) {
        match &self.schedule {
            ActivationSchedule::Bernoulli { p_update, .. } => {
                for flag in out.iter_mut() {
                    *flag = self.updates.random_bool(*p_update);
                }
            }
            ActivationSchedule::Explicit { updates, .. } => {
                for (flag, ticks) in out.iter_mut().zip(updates) {
                    *flag = ticks.binary_search(&k).is_ok();
                }
            }
        }
    }

    /// Whether `sender` transmits to `receiver` at tick `t`. Called for every
    /// ordered pair of distinct agents at every tick, sender-major.
    pub fn transmits_at(&mut self, t: u64, sender: usize, _receiver: usize) -> bool {
        match &self.schedule {
            ActivationSchedule::Bernoulli { p_transmit, .. } => self.transmits.random_bool(*p_transmit),
            ActivationSchedule::Explicit { transmits, .. } => transmits[sender].binary_search(&t).is_ok(),
        }
    }
}
