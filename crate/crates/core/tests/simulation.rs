mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::Rng;

use common::*;
use taqp::generate::{generate_problem, Blocks, GenSpec, RLaw, Spectrum};
use taqp::planner::{self, GammaMatrix};
use taqp::qp::{spectral_exact, QuadraticProblem};
use taqp::sim::{
    self, monotone_set_diagnostic, ActivationSchedule, DelayModel, DelayRule, Initialization, LinkOverride, SimOptions,
    Simulator,
};

fn gen(n: usize, agents: usize, norm2: f64, cond: f64, seed: u64) -> QuadraticProblem {
    generate_problem(&GenSpec {
        n,
        blocks: Blocks::Even(agents),
        norm2,
        cond,
        spectrum: Spectrum::LogUniform,
        r: RLaw::Norm(1.0),
        seed,
    })
    .unwrap()
}

fn planned_gammas(p: &QuadraticProblem, seed: u64) -> GammaMatrix {
    let s = spectral_exact(p.q()).unwrap();
    let interval = planner::stepsize_interval(s.norm2, s.cond).unwrap();
    GammaMatrix::sample(p.agents(), &interval, &mut rng(seed)).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, rng_seed: RngSeed::Fixed(0x7a9e_5eed), max_shrink_iters: 8, ..ProptestConfig::default() }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let p = gen(24, 6, 10.0, 20.0, 3);
    let g = planned_gammas(&p, 1);
    let schedule = ActivationSchedule::Bernoulli { p_update: 0.3, p_transmit: 0.2 };
    let delays = DelayModel {
        default: DelayRule::Uniform { min: 1, max: 7 },
        links: vec![LinkOverride { sender: 0, receiver: 1, rule: DelayRule::Adversarial }],
    };
    let opts = SimOptions { record_events: true, ..SimOptions::with_seed(99) };
    let init = Initialization::PerAgentRandom { low: -2.0, high: 2.0 }.states(&p, 99).unwrap();
    let a = sim::run(&p, &schedule, &delays, &g, 400, init.clone(), &opts).unwrap();
    let b = sim::run(&p, &schedule, &delays, &g, 400, init.clone(), &opts).unwrap();
    assert_eq!(a, b);
    let par = sim::run(&p, &schedule, &delays, &g, 400, init.clone(), &SimOptions { parallel: true, ..opts.clone() }).unwrap();
    assert_eq!(a.rows, par.rows);
    let other = sim::run(&p, &schedule, &delays, &g, 400, init, &SimOptions { seed: 100, ..opts }).unwrap();
    assert_ne!(a.rows, other.rows);
}

#[test]
fn fixed_point_is_invariant_under_any_schedule() {
    let p = gen(12, 4, 5.0, 30.0, 8);
    let x_hat = p.exact_minimizer().unwrap();
    let g = planned_gammas(&p, 2);
    let schedules = [
        ActivationSchedule::every_step(),
        ActivationSchedule::Bernoulli { p_update: 0.05, p_transmit: 0.5 },
        ActivationSchedule::Explicit {
            updates: vec![(0..1000).step_by(3).collect(), (0..1000).step_by(7).collect(), vec![0, 999], (0..1000).collect()],
            transmits: vec![(0..1000).step_by(5).collect(), vec![], vec![500], (0..1000).collect()],
        },
    ];
    for schedule in schedules {
        for delays in [DelayModel::fixed(1), DelayModel::uniform_rule(DelayRule::Adversarial)] {
            let trace = sim::run(&p, &schedule, &delays, &g, 1000, vec![x_hat.clone(); 4], &SimOptions::with_seed(5)).unwrap();
            for row in &trace.rows {
                assert!(row.dist2 <= 1e-10, "k={} agent={} dist={}", row.k, row.agent_id, row.dist2);
            }
        }
    }
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn copies_only_hold_past_owned_values() {
    let p = gen(15, 5, 8.0, 40.0, 4);
    let g = planned_gammas(&p, 3);
    let schedule = ActivationSchedule::Bernoulli { p_update: 0.4, p_transmit: 0.3 };
    let delays = DelayModel::uniform_rule(DelayRule::Uniform { min: 1, max: 12 });
    let init = Initialization::default().states(&p, 1).unwrap();
    let mut s = Simulator::new(&p, &g, schedule, delays, init, SimOptions::with_seed(17)).unwrap();
    let agents = p.agents();
    let mut history: Vec<HashSet<Vec<u64>>> = s.agents().iter().map(|a| HashSet::from([bits(a.owned_block())])).collect();
    for _ in 0..600 {
        s.step();
        for (j, a) in s.agents().iter().enumerate() {
            history[j].insert(bits(a.owned_block()));
        }
        for a in s.agents() {
            for j in (0..agents).filter(|&j| j != a.id()) {
                let held = bits(&a.local_copy()[p.partition().range(j)]);
                assert!(history[j].contains(&held), "tick {}: agent {} holds a value of block {j} never owned by {j}", s.tick(), a.id());
                assert!(a.slot_time(j) <= s.tick());
            }
        }
    }
    assert!(s.counts().deliveries > 0);
}

proptest! {
    #![proptest_config(config(24))]

    /// Well-conditioned problems (k_Q <= 4), stepsizes from the planned
    /// interval, Bernoulli schedules with p >= 0.05 and bounded delays <= 50.
    #[test]
    fn converges_under_bounded_asynchrony(seed in any::<u64>()) {
        let mut r = rng(seed);
        let agents = r.random_range(1..=10);
        let n = agents * r.random_range(1..=10);
        let cond = if n == 1 { 1.0 } else { r.random_range(1.0..4.0) };
        let p = gen(n, agents, r.random_range(0.5..50.0), cond, seed);
        let g = planned_gammas(&p, seed ^ 1);
        let schedule = ActivationSchedule::Bernoulli { p_update: r.random_range(0.05..1.0), p_transmit: r.random_range(0.05..1.0) };
        let d_max = r.random_range(1..=50);
        let delays = DelayModel::uniform_rule(DelayRule::Uniform { min: 1, max: d_max });
        let init = Initialization::default().states(&p, seed).unwrap();
        let trace = sim::run(&p, &schedule, &delays, &g, 5000, init, &SimOptions::with_seed(seed)).unwrap();
        let (d0, dk) = (trace.max_dist2(0), trace.max_dist2(5000));
        prop_assert!(dk <= 1e-6 * d0, "n={n} agents={agents} k_Q={cond} {schedule:?} d_max={d_max}: {dk} vs {d0}");
    }

    #[test]
    fn adversarial_delays_do_not_diverge(seed in any::<u64>()) {
        let mut r = rng(seed);
        let agents = r.random_range(2..=6);
        let n = agents * r.random_range(1..=4);
        let p = gen(n, agents, r.random_range(0.5..50.0), r.random_range(1.0..4.0), seed);
        let g = planned_gammas(&p, seed ^ 2);
        let schedule = ActivationSchedule::Bernoulli { p_update: r.random_range(0.1..1.0), p_transmit: r.random_range(0.1..1.0) };
        let init = Initialization::default().states(&p, seed).unwrap();
        let trace = sim::run(&p, &schedule, &DelayModel::uniform_rule(DelayRule::Adversarial), &g, 3000, init, &SimOptions::with_seed(seed)).unwrap();
        let curve = trace.worst_curve();
        let d0 = curve[0];
        prop_assert!(curve.iter().all(|d| d.is_finite() && *d <= 10.0 * d0), "diverged");
        let (first, last) = (&curve[..1000], &curve[2000..]);
        let mean = |c: &[f64]| c.iter().sum::<f64>() / c.len() as f64;
        prop_assert!(mean(last) < mean(first) && curve[3000] < 0.5 * d0, "{} vs {}", curve[3000], d0);
    }
}

#[test]
fn synchronous_run_keeps_set_index_monotone() {
    let p = gen(8, 4, 4.0, 3.0, 21);
    let g = planned_gammas(&p, 4);
    let init = Initialization::default().states(&p, 2).unwrap();
    let trace = sim::run(&p, &ActivationSchedule::every_step(), &DelayModel::fixed(1), &g, 300, init, &SimOptions::with_seed(1)).unwrap();
    assert!(trace.q > 0.0 && trace.q < 1.0);
    let report = monotone_set_diagnostic(&trace, trace.q, p.dim(), trace.d_o).unwrap();
    assert!(report.levels.last().unwrap() >= &report.levels[0]);
    assert!(trace.max_dist2(300) < 1e-6 * trace.max_dist2(0));
}

#[test]
fn trace_shape_and_csv_roundtrip() {
    let p = gen(6, 3, 2.0, 2.0, 5);
    let g = planned_gammas(&p, 5);
    let init = Initialization::default().states(&p, 3).unwrap();
    let schedule = ActivationSchedule::Bernoulli { p_update: 0.5, p_transmit: 0.5 };
    let trace = sim::run(&p, &schedule, &DelayModel::fixed(2), &g, 25, init, &SimOptions::with_seed(3)).unwrap();
    assert_eq!(trace.rows.len(), 26 * 3);
    assert!(trace.rows.iter().all(|r| r.dist2 >= 0.0 && r.dist_blockmax >= 0.0));
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("k,agent_id,dist2,dist_blockmax,set_index\n"));
    let back = sim::read_trace_csv(&buf[..], std::path::Path::new("mem")).unwrap();
    assert_eq!(back, trace.rows);
}
