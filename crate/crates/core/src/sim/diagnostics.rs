use serde::Serialize;

use super::schedule::{ActivationSchedule, ScheduleSampler};
use super::SimTrace;
use crate::block_norm::{self, SetIndex};
use crate::error::{Error, Result};

/// Finite-horizon check that every agent keeps updating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LivenessReport {
    pub horizon: u64,
    pub window: u64,
    /// Longest stretch between consecutive updates of each agent, counting
    /// from tick -1 and up to tick `horizon`.
    pub worst_gap: Vec<u64>,
    /// Agents whose worst gap exceeds `window`.
    pub violations: Vec<usize>,
}

impl LivenessReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn overall_worst_gap(&self) -> u64 {
        self.worst_gap.iter().copied().max().unwrap_or(0)
    }
}

/// Replays the update pattern the simulator would see with `seed` and
/// reports the longest update gap per agent.
pub fn liveness_check(schedule: &ActivationSchedule, agents: usize, seed: u64, horizon: u64, window: u64) -> Result<LivenessReport> {
    schedule.validate(agents)?;
    let mut sampler = ScheduleSampler::new(schedule.clone(), seed);
    let mut last: Vec<i64> = vec![-1; agents];
    let mut worst = vec![0_u64; agents];
    let mut flags = vec![false; agents];
    for k in 0..horizon {
        sampler.updates_at(k, &mut flags);
        for (i, &f) in flags.iter().enumerate() {
            if f {
                worst[i] = worst[i].max((k as i64 - last[i]) as u64);
                last[i] = k as i64;
            }
        }
    }
    for i in 0..agents {
        worst[i] = worst[i].max((horizon as i64 - last[i]) as u64);
    }
    let violations = (0..agents).filter(|&i| worst[i] > window).collect();
    Ok(LivenessReport { horizon, window, worst_gap: worst, violations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetViolation {
    pub k: u64,
    pub before: SetIndex,
    pub after: SetIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    /// Set index of the worst local copy at each tick.
    pub levels: Vec<SetIndex>,
    pub first_violation: Option<SetViolation>,
}

impl MonotoneReport {
    pub fn monotone(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks that the worst agent's set index `s(k)` never decreases.
pub fn monotone_set_diagnostic(trace: &SimTrace, q: f64, n: usize, d_o: f64) -> Result<MonotoneReport> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("set diagnostic needs a contraction factor in (0, 1), got {q}")));
    }
    let levels = (0..=trace.horizon)
        .map(|k| {
            if d_o == 0.0 {
                Ok(SetIndex::Converged)
            } else {
                block_norm::set_index_of_distance(trace.max_dist_blockmax(k), q, n, d_o)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let first_violation = levels
        .windows(2)
        .enumerate()
        .find(|(_, w)| w[1] < w[0])
        .map(|(k, w)| SetViolation { k: k as u64 + 1, before: w[0], after: w[1] });
    Ok(MonotoneReport { levels, first_violation })
}
