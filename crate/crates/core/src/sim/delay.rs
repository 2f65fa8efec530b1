use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Transit time, in ticks, for a message on one link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelayRule {
    Fixed { delay: u64 },
    /// Uniform integer in `[min, max]`.
    Uniform { min: u64, max: u64 },
    /// `max(1, ceil(t / 2))` for a message sent at tick `t`: unbounded, but
    /// every message still arrives.
    Adversarial,
    /// Successive messages on the link take these delays, cycling.
    Custom { delays: Vec<u64> },
}

impl DelayRule {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DelayRule::Fixed { delay } => *delay >= 1,
            DelayRule::Uniform { min, max } => *min >= 1 && min <= max,
            DelayRule::Adversarial => true,
            DelayRule::Custom { delays } => !delays.is_empty() && delays.iter().all(|d| *d >= 1),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("delays must be at least one tick: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkOverride {
    pub sender: usize,
    pub receiver: usize,
    pub rule: DelayRule,
}

/// A default rule plus optional per-link overrides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModel {
    pub default: DelayRule,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkOverride>,
}

impl DelayModel {
    pub fn uniform_rule(rule: DelayRule) -> Self {
        DelayModel { default: rule, links: Vec::new() }
    }

    pub fn fixed(delay: u64) -> Self {
        Self::uniform_rule(DelayRule::Fixed { delay })
    }

    pub fn validate(&self, agents: usize) -> Result<()> {
        self.default.validate()?;
        for link in &self.links {
            if link.sender >= agents || link.receiver >= agents || link.sender == link.receiver {
                return Err(Error::invalid(format!("bad delay override link {} -> {}", link.sender, link.receiver)));
            }
            link.rule.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DelaySampler {
    model: DelayModel,
    overrides: BTreeMap<(usize, usize), usize>,
    rng: ChaCha8Rng,
    sent: BTreeMap<(usize, usize), usize>,
}

impl DelaySampler {
    pub(crate) fn new(model: DelayModel, seed: u64) -> Self {
        let overrides = model.links.iter().enumerate().map(|(idx, l)| ((l.sender, l.receiver), idx)).collect();
        DelaySampler { model, overrides, rng: rng::stream(seed, Stream::Delays), sent: BTreeMap::new() }
    }

    pub(crate) fn delay(&mut self, send_time: u64, sender: usize, receiver: usize) -> u64 {
        let rule = match self.overrides.get(&(sender, receiver)) {
            Some(&idx) => &self.model.links[idx].rule,
            None => &self.model.default,
        };
        match rule {
            DelayRule::Fixed { delay } => *delay,
            DelayRule::Uniform { min, max } => self.rng.random_range(*min..=*max),
            DelayRule::Adversarial => send_time.div_ceil(2).max(1),
            DelayRule::Custom { delays } => {
                let count = self.sent.entry((sender, receiver)).or_insert(0);
                let d = delays[*count % delays.len()];
                *count += 1;
                d
            }
        }
    }
}
