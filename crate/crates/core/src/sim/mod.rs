//! Deterministic tick-based execution of the asynchronous block update law.
//!
//! Each agent keeps a full local copy `x^i` of the decision vector but only
//! ever writes its own block `x_i^i`, using the rows `Q^[i]`, `r^[i]` it
//! holds. Other blocks are refreshed only by messages, which may arrive late,
//! out of order, or not for a long time.
//!
//! Within tick `k -> k+1` the order is fixed:
//!
//! * **A. deliveries**: messages due at `k+1` overwrite the receiver's copy
//!   of the sender's block;
//! * **B. updates**: every agent with `k in K^i` computes
//!   `x_i^i(k+1) = x_i^i(k) - gamma_i (Q^[i] x^i(k) + r^[i])` from its copy as
//!   it was at `k`, before phase A;
//! * **C. transmissions**: agents scheduled at `k+1` send their current block.
//!
//! [`SimOptions::deliver_before_update`] lets phase B see phase A instead.

mod delay;
mod diagnostics;
mod schedule;
mod trace;

use std::collections::BTreeMap;
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use delay::{DelayModel, DelayRule, LinkOverride};
pub use diagnostics::{liveness_check, monotone_set_diagnostic, LivenessReport, MonotoneReport, SetViolation};
pub use schedule::{ActivationSchedule, ScheduleSampler};
pub use trace::{read_trace_csv, EventCounts, SimTrace, TraceRow};

use crate::block_norm::{self, NormScheme, PNorm};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::planner::{self, GammaMatrix};
use crate::qp::{BlockPartition, QuadraticProblem};
use crate::rng::{self, Stream};
use delay::DelaySampler;

/// One agent: its local copy of the state and the only problem data it holds.
#[derive(Debug, Clone)]
pub struct AgentState {
    id: usize,
    x: Vec<f64>,
    gamma: f64,
    range: Range<usize>,
    q_rows: Matrix,
    r_block: Vec<f64>,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
    /// Tick at which the current value of the owned block was produced.
    last_update: u64,
    /// Compute time of the value held in each block slot of `x`.
    slot_times: Vec<u64>,
}

impl AgentState {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn local_copy(&self) -> &[f64] {
        &self.x
    }

    pub fn owned_block(&self) -> &[f64] {
        &self.x[self.range.clone()]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn last_update(&self) -> u64 {
        self.last_update
    }

    /// Compute time of agent `j`'s block as currently held by this agent.
    pub fn slot_time(&self, j: usize) -> u64 {
        self.slot_times[j]
    }

    fn next_block(&self) -> Vec<f64> {
        let mut next: Vec<f64> = self
            .range
            .clone()
            .enumerate()
            .map(|(row, coord)| {
                let grad = linalg::dot(self.q_rows.row(row), &self.x) + self.r_block[row];
                self.x[coord] - self.gamma * grad
            })
            .collect();
        if let Some((lo, hi)) = &self.bounds {
            for ((v, l), h) in next.iter_mut().zip(lo).zip(hi) {
                *v = v.clamp(*l, *h);
            }
        }
        next
    }
}

/// A block value in transit from `sender` to `receiver`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageInFlight {
    pub sender: usize,
    pub receiver: usize,
    pub payload: Vec<f64>,
    pub compute_time: u64,
    pub delivery_time: u64,
    seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Update,
    Send,
    Deliver,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Update => "update",
            EventKind::Send => "send",
            EventKind::Deliver => "deliver",
        }
    }
}

/// One line of the optional event log. For updates `i == j` and
/// `compute_time` is the tick of the new value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub k: u64,
    pub kind: EventKind,
    pub i: usize,
    pub j: usize,
    pub compute_time: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub seed: u64,
    /// Let updates at `k` read messages delivered at `k+1`.
    pub deliver_before_update: bool,
    /// Drop deliveries older than the value already held in the slot.
    pub timestamp_dedup: bool,
    /// Compute agent updates on the rayon pool. Results are identical to the
    /// sequential path since updates within a tick are independent.
    pub parallel: bool,
    pub record_events: bool,
    /// Norm for block-max distances and set indices; `omega_i = 1`, `p_i = 2` when absent.
    pub norm: Option<NormScheme>,
}

impl SimOptions {
    pub fn with_seed(seed: u64) -> Self {
        SimOptions { seed, ..Default::default() }
    }

    pub(crate) fn scheme(&self, partition: &BlockPartition) -> Result<NormScheme> {
        match &self.norm {
            Some(s) if s.blocks() != partition.agents() => Err(Error::Dimension {
                what: "norm scheme blocks",
                expected: partition.agents(),
                found: s.blocks(),
            }),
            Some(s) => Ok(s.clone()),
            None => NormScheme::uniform(partition.agents(), 1.0, PNorm::Finite(2.0)),
        }
    }
}

/// How local copies are initialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Initialization {
    /// One point drawn uniformly from the box (or `[low, high]^n` without a
    /// box), shared by all agents.
    CommonRandom { low: f64, high: f64 },
    /// An independent draw per agent.
    PerAgentRandom { low: f64, high: f64 },
    Common { x: Vec<f64> },
    PerAgent { xs: Vec<Vec<f64>> },
}

impl Default for Initialization {
    fn default() -> Self {
        Initialization::CommonRandom { low: -1.0, high: 1.0 }
    }
}

impl Initialization {
    pub fn states(&self, problem: &QuadraticProblem, seed: u64) -> Result<Vec<Vec<f64>>> {
        let (n, agents) = (problem.dim(), problem.agents());
        let mut rng = rng::stream(seed, Stream::Init);
        let mut draw = |low: f64, high: f64| -> Result<Vec<f64>> {
            if !(low < high) {
                return Err(Error::invalid(format!("initialization range must satisfy low < high, got [{low}, {high}]")));
            }
            Ok(match problem.bounds() {
                Some(b) => b.lower.iter().zip(&b.upper).map(|(l, h)| rng.random_range(*l..=*h)).collect(),
                None => (0..n).map(|_| rng.random_range(low..=high)).collect(),
            })
        };
        let states = match self {
            Initialization::CommonRandom { low, high } => vec![draw(*low, *high)?; agents],
            Initialization::PerAgentRandom { low, high } => (0..agents).map(|_| draw(*low, *high)).collect::<Result<_>>()?,
            Initialization::Common { x } => vec![x.clone(); agents],
            Initialization::PerAgent { xs } => xs.clone(),
        };
        check_states(&states, n, agents)?;
        Ok(states)
    }
}

fn check_states(states: &[Vec<f64>], n: usize, agents: usize) -> Result<()> {
    if states.len() != agents {
        return Err(Error::Dimension { what: "initial local copies", expected: agents, found: states.len() });
    }
    for x in states {
        if x.len() != n {
            return Err(Error::Dimension { what: "initial local copy", expected: n, found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial states must be finite"));
        }
    }
    Ok(())
}

/// The whole simulated network: agents, messages in transit, and the
/// schedule and delay generators.
#[derive(Debug, Clone)]
pub struct Simulator {
    agents: Vec<AgentState>,
    partition: BlockPartition,
    in_flight: BTreeMap<u64, Vec<MessageInFlight>>,
    tick: u64,
    schedule: ScheduleSampler,
    delays: DelaySampler,
    options: SimOptions,
    counts: EventCounts,
    events: Vec<Event>,
    next_seq: u64,
    update_flags: Vec<bool>,
}

impl Simulator {
    pub fn new(
        problem: &QuadraticProblem,
        gammas: &GammaMatrix,
        schedule: ActivationSchedule,
        delays: DelayModel,
        initial_states: Vec<Vec<f64>>,
        options: SimOptions,
    ) -> Result<Self> {
        let partition = problem.partition().clone();
        let agents = partition.agents();
        if gammas.gammas().len() != agents {
            return Err(Error::Dimension { what: "stepsizes", expected: agents, found: gammas.gammas().len() });
        }
        schedule.validate(agents)?;
        delays.validate(agents)?;
        check_states(&initial_states, problem.dim(), agents)?;
        options.scheme(&partition)?;
        let agent_states = initial_states
            .into_iter()
            .enumerate()
            .map(|(i, x)| {
                let range = partition.range(i);
                AgentState {
                    id: i,
                    x,
                    gamma: gammas.gammas()[i],
                    q_rows: problem.q().row_block(range.start, range.end),
                    r_block: problem.r()[range.clone()].to_vec(),
                    bounds: problem.bounds().map(|b| (b.lower[range.clone()].to_vec(), b.upper[range.clone()].to_vec())),
                    range,
                    last_update: 0,
                    slot_times: vec![0; agents],
                }
            })
            .collect();
        Ok(Simulator {
            agents: agent_states,
            partition,
            in_flight: BTreeMap::new(),
            tick: 0,
            schedule: ScheduleSampler::new(schedule, options.seed),
            delays: DelaySampler::new(delays, options.seed),
            counts: EventCounts::default(),
            events: Vec::new(),
            next_seq: 0,
            update_flags: vec![false; agents],
            options,
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn in_flight(&self) -> impl Iterator<Item = &MessageInFlight> {
        self.in_flight.values().flatten()
    }

    pub fn counts(&self) -> EventCounts {
        self.counts
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    fn log(&mut self, event: Event) {
        if self.options.record_events {
            self.events.push(event);
        }
    }

    fn deliver(&mut self, due: u64) {
        let Some(messages) = self.in_flight.remove(&due) else {
            return;
        };
        // per (receiver, sender) keep the latest-computed message, later sends winning ties
        let mut winners: BTreeMap<(usize, usize), MessageInFlight> = BTreeMap::new();
        for msg in messages {
            match winners.get(&(msg.receiver, msg.sender)) {
                Some(prev) if (prev.compute_time, prev.seq) > (msg.compute_time, msg.seq) => {
                    self.counts.superseded += 1;
                }
                Some(_) => {
                    self.counts.superseded += 1;
                    winners.insert((msg.receiver, msg.sender), msg);
                }
                None => {
                    winners.insert((msg.receiver, msg.sender), msg);
                }
            }
        }
        for ((receiver, sender), msg) in winners {
            let agent = &mut self.agents[receiver];
            if self.options.timestamp_dedup && msg.compute_time < agent.slot_times[sender] {
                self.counts.discarded += 1;
                continue;
            }
            let range = self.partition.range(sender);
            agent.x[range].copy_from_slice(&msg.payload);
            agent.slot_times[sender] = msg.compute_time;
            self.counts.deliveries += 1;
            self.log(Event { k: due, kind: EventKind::Deliver, i: sender, j: receiver, compute_time: msg.compute_time });
        }
    }

    /// Advances the world from tick `k` to `k + 1`.
    pub fn step(&mut self) {
        let k = self.tick;
        let next = k + 1;
        self.schedule.updates_at(k, &mut self.update_flags);

        if self.options.deliver_before_update {
            self.deliver(next);
        }
        let flags = &self.update_flags;
        let new_blocks: Vec<Option<Vec<f64>>> = if self.options.parallel {
            self.agents.par_iter().zip(flags.par_iter()).map(|(a, &f)| f.then(|| a.next_block())).collect()
        } else {
            self.agents.iter().zip(flags).map(|(a, &f)| f.then(|| a.next_block())).collect()
        };
        if !self.options.deliver_before_update {
            self.deliver(next);
        }
        for (i, block) in new_blocks.into_iter().enumerate() {
            if let Some(block) = block {
                let agent = &mut self.agents[i];
                let range = agent.range.clone();
                agent.x[range].copy_from_slice(&block);
                agent.last_update = next;
                agent.slot_times[i] = next;
                self.counts.updates += 1;
                self.log(Event { k, kind: EventKind::Update, i, j: i, compute_time: next });
            }
        }

        let agents = self.agents.len();
        for sender in 0..agents {
            for receiver in (0..agents).filter(|&r| r != sender) {
                if !self.schedule.transmits_at(next, sender, receiver) {
                    continue;
                }
                let delay = self.delays.delay(next, sender, receiver);
                let agent = &self.agents[sender];
                let msg = MessageInFlight {
                    sender,
                    receiver,
                    payload: agent.owned_block().to_vec(),
                    compute_time: agent.last_update,
                    delivery_time: next + delay,
                    seq: self.next_seq,
                };
                self.next_seq += 1;
                self.counts.sends += 1;
                self.log(Event { k: next, kind: EventKind::Send, i: sender, j: receiver, compute_time: msg.compute_time });
                self.in_flight.entry(msg.delivery_time).or_default().push(msg);
            }
        }
        self.tick = next;
    }
}

/// Fixed quantities needed to turn local copies into trace rows.
struct Observer {
    x_hat: Vec<f64>,
    scheme: NormScheme,
    q: f64,
    d_o: f64,
}

impl Observer {
    fn record(&self, sim: &Simulator, trace: &mut SimTrace) -> Result<()> {
        let partition = sim.partition();
        let n = partition.dim();
        for agent in sim.agents() {
            let diff = linalg::sub(agent.local_copy(), &self.x_hat);
            let dist_blockmax = block_norm::block_max_norm(&diff, partition, &self.scheme)?;
            let set_index = if self.d_o == 0.0 {
                Some(block_norm::SetIndex::Converged)
            } else if self.q > 0.0 && self.q < 1.0 {
                Some(block_norm::set_index_of_distance(dist_blockmax, self.q, n, self.d_o)?)
            } else {
                None
            };
            trace.rows.push(TraceRow {
                k: sim.tick(),
                agent_id: agent.id(),
                dist2: linalg::norm2(&diff),
                dist_blockmax,
                set_index,
            });
        }
        Ok(())
    }
}

/// Runs `horizon` ticks and records distances of every local copy to the
/// problem's minimizer after each tick (and before the first).
pub fn run(
    problem: &QuadraticProblem,
    schedule: &ActivationSchedule,
    delays: &DelayModel,
    gammas: &GammaMatrix,
    horizon: u64,
    initial_states: Vec<Vec<f64>>,
    options: &SimOptions,
) -> Result<SimTrace> {
    schedule.check_feasible(problem.agents(), horizon)?;
    let x_hat = problem.exact_minimizer()?;
    let scheme = options.scheme(problem.partition())?;
    let q = planner::contraction_factor(problem.q(), gammas, problem.partition())?;
    let d_o = block_norm::initial_radius(&initial_states, &x_hat, problem.partition(), &scheme)?;
    let mut sim =
        Simulator::new(problem, gammas, schedule.clone(), delays.clone(), initial_states, options.clone())?;
    let observer = Observer { x_hat, scheme, q, d_o };

    let mut trace = SimTrace::new(problem.agents(), horizon, observer.x_hat.clone(), q, d_o);
    trace.rows.reserve((horizon as usize + 1) * problem.agents());
    observer.record(&sim, &mut trace)?;
    for _ in 0..horizon {
        sim.step();
        observer.record(&sim, &mut trace)?;
    }
    trace.counts = sim.counts();
    trace.final_states = sim.agents().iter().map(|a| a.local_copy().to_vec()).collect();
    trace.events = std::mem::take(&mut sim.events);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_problem() -> QuadraticProblem {
        QuadraticProblem::new(Matrix::from_diag(&[2.0]), vec![-2.0], BlockPartition::new(vec![1]).unwrap(), None).unwrap()
    }

    fn diag41() -> QuadraticProblem {
        QuadraticProblem::new(Matrix::from_diag(&[4.0, 1.0]), vec![1.0, 1.0], BlockPartition::new(vec![1, 1]).unwrap(), None)
            .unwrap()
    }

    #[test]
    fn scalar_recursion() {
        let p = scalar_problem();
        let g = GammaMatrix::new(vec![0.25]).unwrap();
        let mut sim = Simulator::new(
            &p,
            &g,
            ActivationSchedule::every_step(),
            DelayModel::fixed(1),
            vec![vec![0.0]],
            SimOptions::default(),
        )
        .unwrap();
        let mut got = Vec::new();
        for _ in 0..3 {
            sim.step();
            got.push(sim.agents()[0].local_copy()[0]);
        }
        assert_eq!(got, vec![0.5, 0.75, 0.875]);
    }

    #[test]
    fn two_agents_converge_with_unit_delay() {
        let p = diag41();
        let g = GammaMatrix::new(vec![0.25, 0.25]).unwrap();
        let trace = run(
            &p,
            &ActivationSchedule::every_step(),
            &DelayModel::fixed(1),
            &g,
            60,
            vec![vec![0.0, 0.0]; 2],
            &SimOptions::default(),
        )
        .unwrap();
        for x in &trace.final_states {
            assert!((x[0] + 0.25).abs() < 1e-6 && (x[1] + 1.0).abs() < 1e-6, "{x:?}");
        }
    }

    #[test]
    fn updates_read_pre_delivery_copy() {
        // agent 0's block depends on agent 1's block through Q_01
        let q = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let p = QuadraticProblem::new(q, vec![0.0, 0.0], BlockPartition::new(vec![1, 1]).unwrap(), None).unwrap();
        let g = GammaMatrix::new(vec![0.1, 0.1]).unwrap();
        let schedule = ActivationSchedule::Explicit { updates: vec![vec![0, 1], vec![0]], transmits: vec![vec![], vec![1]] };
        let mut sim = Simulator::new(
            &p,
            &g,
            schedule.clone(),
            DelayModel::fixed(1),
            vec![vec![1.0, 1.0]; 2],
            SimOptions::default(),
        )
        .unwrap();
        sim.step(); // k = 0: both update from (1, 1): x0 = 1 - 0.1*3 = 0.7, x1 = 0.7
        sim.step(); // k = 1: agent 1 sends at 1, arrives at 2; agent 0 updates from (0.7, 1.0)
        assert_relative_eq!(sim.agents()[0].local_copy()[0], 0.7 - 0.1 * (1.4 + 1.0), epsilon = 1e-15);
        assert_relative_eq!(sim.agents()[0].local_copy()[1], 0.7, epsilon = 1e-15);
        assert_eq!(sim.agents()[0].slot_time(1), 1);

        let mut early = Simulator::new(
            &p,
            &g,
            schedule,
            DelayModel::fixed(1),
            vec![vec![1.0, 1.0]; 2],
            SimOptions { deliver_before_update: true, ..Default::default() },
        )
        .unwrap();
        early.step();
        early.step(); // agent 0 now sees agent 1's 0.7 while updating at k = 1
        assert_relative_eq!(early.agents()[0].local_copy()[0], 0.7 - 0.1 * (1.4 + 0.7), epsilon = 1e-15);
    }

    #[test]
    fn same_tick_collision_latest_compute_time_wins() {
        let p = diag41();
        let g = GammaMatrix::new(vec![0.25, 0.25]).unwrap();
        // agent 1 sends at t=1 (delay 3) and t=3 (delay 1): both land at tick 4
        let delays = DelayModel {
            default: DelayRule::Fixed { delay: 1 },
            links: vec![LinkOverride { sender: 1, receiver: 0, rule: DelayRule::Custom { delays: vec![3, 1] } }],
        };
        let schedule = ActivationSchedule::Explicit { updates: vec![vec![], vec![0, 1, 2]], transmits: vec![vec![], vec![1, 3]] };
        let mut sim =
            Simulator::new(&p, &g, schedule, delays, vec![vec![0.0, 0.0]; 2], SimOptions::default()).unwrap();
        for _ in 0..4 {
            sim.step();
        }
        assert_eq!(sim.counts().superseded, 1);
        assert_eq!(sim.agents()[0].slot_time(1), 3);
        assert_eq!(sim.agents()[0].local_copy()[1], sim.agents()[1].owned_block()[0]);
    }

    #[test]
    fn stale_delivery_applied_unless_dedup() {
        let p = diag41();
        let g = GammaMatrix::new(vec![0.25, 0.25]).unwrap();
        // first message (t=1) takes 5 ticks, second (t=2) takes 1: old value lands last
        let delays = DelayModel {
            default: DelayRule::Fixed { delay: 1 },
            links: vec![LinkOverride { sender: 1, receiver: 0, rule: DelayRule::Custom { delays: vec![5, 1] } }],
        };
        let schedule = ActivationSchedule::Explicit { updates: vec![vec![], vec![0, 1]], transmits: vec![vec![], vec![1, 2]] };
        for (dedup, expected_slot) in [(false, 1), (true, 2)] {
            let mut sim = Simulator::new(
                &p,
                &g,
                schedule.clone(),
                delays.clone(),
                vec![vec![0.0, 0.0]; 2],
                SimOptions { timestamp_dedup: dedup, ..Default::default() },
            )
            .unwrap();
            for _ in 0..6 {
                sim.step();
            }
            assert_eq!(sim.agents()[0].slot_time(1), expected_slot);
            assert_eq!(sim.counts().discarded, u64::from(dedup));
        }
    }

    #[test]
    fn explicit_schedule_must_be_live() {
        let p = diag41();
        let g = GammaMatrix::new(vec![0.25, 0.25]).unwrap();
        let schedule = ActivationSchedule::Explicit { updates: vec![vec![0], vec![]], transmits: vec![vec![], vec![]] };
        let err = run(&p, &schedule, &DelayModel::fixed(1), &g, 10, vec![vec![0.0; 2]; 2], &SimOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn zero_horizon_records_initial_rows_only() {
        let p = diag41();
        let g = GammaMatrix::new(vec![0.25, 0.25]).unwrap();
        let trace = run(
            &p,
            &ActivationSchedule::every_step(),
            &DelayModel::fixed(1),
            &g,
            0,
            vec![vec![0.0; 2]; 2],
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(trace.rows.len(), 2);
        assert_relative_eq!(trace.rows[0].dist2, (0.25f64.powi(2) + 1.0).sqrt());
    }

    #[test]
    fn event_log_records_all_kinds() {
        let p = diag41();
        let g = GammaMatrix::new(vec![0.25, 0.25]).unwrap();
        let options = SimOptions { record_events: true, ..Default::default() };
        let trace =
            run(&p, &ActivationSchedule::every_step(), &DelayModel::fixed(2), &g, 4, vec![vec![0.0; 2]; 2], &options)
                .unwrap();
        let c = trace.counts;
        assert_eq!(c.updates, 8);
        assert_eq!(c.sends, 8);
        // sends at 1 and 2 arrive at 3 and 4
        assert_eq!(c.deliveries, 4);
        assert_eq!(trace.events.len() as u64, c.updates + c.sends + c.deliveries);
        assert!(trace.events.iter().any(|e| e.kind == EventKind::Deliver && e.k == 3 && e.compute_time == 1));
    }
}
