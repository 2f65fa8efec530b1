//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Oracles are nalgebra computations that share
//! no code with the library.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::*;
use taqp::experiment::{execute, resolve_problem, write_outputs, ExperimentConfig};
use taqp::planner::{self, GammaMatrix};
use taqp::qp::{BlockPartition, RegularizationChoice};
use taqp::sim::{self, ActivationSchedule, DelayModel, DelayRule, SimOptions};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn log_uniform(lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

fn agents25() -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/agents25.toml");
    ExperimentConfig::load(&path).expect("agents25 config loads")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn stepsize_interval() -> Outcome {
    let i = planner::stepsize_interval(100.0, 100.0).map_err(|e| e.to_string())?;
    let detail = format!("({:.15}, {:.15})", i.lower, i.upper);
    check((i.lower - 0.009).abs() <= 1e-12 && (i.upper - 0.011).abs() <= 1e-12, detail)
}

fn regularization_interval() -> Outcome {
    let p = planner::plan_regularization(100.0, 100.0, 0.105, 0.1, 10.0).map_err(|e| e.to_string())?;
    let detail = format!("alpha in ({:.12}, {:.12}), ||r|| = 0.105", p.alpha_lower, p.alpha_upper);
    check((p.alpha_lower - 11.0).abs() <= 1e-9 && (p.alpha_upper - 20.0).abs() <= 1e-9, detail)
}

/// PD matrix with n <= `max_n`, condition number log-uniform up to 1e4, a
/// random partition, and per-agent stepsizes drawn from the planned interval.
fn contraction_instance(seed: u64, max_n: usize) -> (DMatrix<f64>, BlockPartition, Vec<f64>) {
    let mut rng = rng(seed);
    let n = rng.random_range(1..=max_n);
    let k = if n == 1 { 1.0 } else { log_uniform(1.0 + 1e-6, 1e4, &mut rng) };
    let q = pd_matrix(n, log_uniform(0.01, 1e3, &mut rng), k, &mut rng);
    let partition = random_partition(n, &mut rng);
    let interval = planner::stepsize_interval(eigs(&q)[n - 1], cond(&q)).unwrap();
    let gammas = (0..partition.agents()).map(|_| interval.sample(&mut rng)).collect();
    (q, partition, gammas)
}

fn contraction() -> Outcome {
    let (mut fails, mut worst) = (0, 0.0f64);
    for seed in 0..1000 {
        let (q, partition, gammas) = contraction_instance(seed, 20);
        let lib = planner::contraction_factor(&from_na(&q), &GammaMatrix::new(gammas.clone()).unwrap(), &partition).unwrap();
        let n = q.nrows();
        let gamma = DMatrix::from_diagonal(&DVector::from_vec(partition.expand(&gammas).unwrap()));
        let oracle = norm2(&(DMatrix::identity(n, n) - gamma * &q));
        if !(lib < 1.0 && oracle < 1.0 && (lib - oracle).abs() <= 1e-9) {
            fails += 1;
        }
        worst = worst.max(oracle);
    }
    check(fails == 0, format!("{fails}/1000 failures, worst ||I - Gamma Q||_2 = {worst:.9}"))
}

fn inverse_identities() -> Outcome {
    let (mut pd_fails, mut eig_fails, mut worst_woodbury) = (0, 0, 0.0f64);
    for seed in 0..500u64 {
        // positive definiteness of Q^-1 G^-1 + G^-1 Q^-1 - I
        let (q, partition, gammas) = contraction_instance(10_000 + seed, 12);
        let n = q.nrows();
        let g_inv = DMatrix::from_diagonal(&DVector::from_vec(partition.expand(&gammas).unwrap().iter().map(|g| 1.0 / g).collect()));
        let q_inv = q.clone().try_inverse().unwrap();
        let m = &q_inv * &g_inv + &g_inv * &q_inv - DMatrix::identity(n, n);
        if eigs(&((&m + m.transpose()) * 0.5))[0] <= 0.0 {
            pd_fails += 1;
        }

        // smallest eigenvalue of BC + CB against the product bound
        let mut r2 = rng(20_000 + seed);
        let n = r2.random_range(1..=12);
        let draw = |rng: &mut _| {
            let k = if n == 1 { 1.0 } else { log_uniform(1.0, 1e3, rng) };
            pd_matrix(n, log_uniform(0.1, 10.0, rng), k, rng)
        };
        let (b, c) = (draw(&mut r2), draw(&mut r2));
        let (eb, ec) = (eigs(&b), eigs(&c));
        let (kb, kc) = (eb[n - 1] / eb[0], ec[n - 1] / ec[0]);
        let sk = kb.sqrt();
        let bracket = (sk + 1.0).powi(2) / sk - kc * (sk - 1.0).powi(2) / sk;
        let bound = [eb[n - 1] * ec[n - 1], eb[0] * ec[0]].iter().map(|l| l / 2.0 * bracket).fold(f64::INFINITY, f64::min);
        let lhs = eigs(&(&b * &c + &c * &b))[0];
        if lhs < bound - 1e-9 * bound.abs().max(eb[n - 1] * ec[n - 1]) {
            eig_fails += 1;
        }

        // Q^-1 - (Q+A)^-1 = (Q A^-1 Q + Q)^-1
        let mut rng = rng(30_000 + seed);
        let n = rng.random_range(1..=12);
        let q = pd_matrix(n, log_uniform(0.5, 50.0, &mut rng), log_uniform(1.0, 1e2, &mut rng), &mut rng);
        let partition = random_partition(n, &mut rng);
        let alphas: Vec<f64> = (0..partition.agents()).map(|_| log_uniform(5e-2, 20.0, &mut rng)).collect();
        let p = problem(&q, vec![0.0; n], partition.clone());
        let reg = p.regularize(&RegularizationChoice::new(alphas.clone()).unwrap()).unwrap();
        let lhs = q.clone().try_inverse().unwrap() - to_na(reg.q()).try_inverse().unwrap();
        let a_inv = DMatrix::from_diagonal(&DVector::from_vec(partition.expand(&alphas).unwrap().iter().map(|a| 1.0 / a).collect()));
        let rhs = (&q * a_inv * &q + &q).try_inverse().unwrap();
        worst_woodbury = worst_woodbury.max(norm2(&(&lhs - &rhs)) / norm2(&rhs));
    }
    check(
        pd_fails == 0 && eig_fails == 0 && worst_woodbury <= 1e-8,
        format!("PD failures {pd_fails}/500, eigenvalue-bound failures {eig_fails}/500, worst Woodbury residual {worst_woodbury:.2e}"),
    )
}

fn error_bound_soundness() -> Outcome {
    let (mut fails, mut tiny_fails, mut tightest) = (0, 0, 0.0f64);
    for seed in 0..500u64 {
        let mut rng = rng(40_000 + seed);
        let n = rng.random_range(1..=20);
        let k_q = if n == 1 { 1.0 } else { log_uniform(1.0, 1e4, &mut rng) };
        let q = pd_matrix(n, log_uniform(0.1, 100.0, &mut rng), k_q, &mut rng);
        let r = gaussian(n, &mut rng);
        let partition = random_partition(n, &mut rng);
        let alphas: Vec<f64> = (0..partition.agents()).map(|_| log_uniform(1e-4, 1e4, &mut rng)).collect();
        let choice = RegularizationChoice::new(alphas).unwrap();
        let reg = problem(&q, r.clone(), partition).regularize(&choice).unwrap();
        let e_a = diff_norm(&solve(&q, &r), &solve(&to_na(reg.q()), &r));
        let (norm_q, k, norm_r) = (eigs(&q)[n - 1], cond(&q), vnorm(&r));
        let bound = planner::error_bound(k, norm_q, norm_r, choice.alpha_max());
        if e_a > bound * (1.0 + 1e-9) + 1e-14 {
            fails += 1;
        }
        tightest = tightest.max(e_a / bound);
        if planner::error_bound(k, norm_q, norm_r, 1e-8) > 1e-6 * norm_r * k * k / (norm_q * norm_q) {
            tiny_fails += 1;
        }
    }
    check(fails == 0 && tiny_fails == 0, format!("{fails}/500 bound violations, max e_A/bound = {tightest:.4}, alpha_max = 1e-8 failures {tiny_fails}"))
}

fn condition_improvement() -> Outcome {
    let (mut spread_fails, mut kd_fails) = (0, 0);
    for seed in 0..500u64 {
        let mut rng = rng(50_000 + seed);
        let n = rng.random_range(2..=20);
        let k_q = log_uniform(1.5, 1e4, &mut rng);
        let top = log_uniform(0.1, 100.0, &mut rng);
        let q = pd_matrix(n, top, k_q, &mut rng);
        let partition = random_partition(n, &mut rng);

        // any alphas with alpha_max / alpha_min < k_Q
        let alpha_min = log_uniform(1e-3, 1e3, &mut rng);
        let spread = 1.0 + (k_q - 1.0) * rng.random::<f64>() * 0.999;
        let mut alphas: Vec<f64> = (0..partition.agents()).map(|_| alpha_min * (1.0 + (spread - 1.0) * rng.random::<f64>())).collect();
        alphas[0] = alpha_min;
        assert!(planner::improves_conditioning(&alphas, k_q));
        let reg = problem(&q, vec![0.0; n], partition.clone()).regularize(&RegularizationChoice::new(alphas).unwrap()).unwrap();
        if cond(&to_na(reg.q())) >= cond(&q) {
            spread_fails += 1;
        }

        // alphas from the planned interval
        let r = gaussian(n, &mut rng);
        let norm_r = vnorm(&r);
        let epsilon = norm_r * k_q / top * rng.random_range(0.01..0.9);
        let floor = planner::feasible_kd_lower(k_q, top, norm_r, epsilon).unwrap().max(1.0);
        let k_d = floor + (k_q - floor) * rng.random_range(0.01..0.99);
        let plan = planner::plan_regularization(k_q, top, norm_r, epsilon, k_d).unwrap();
        let alphas: Vec<f64> = (0..partition.agents()).map(|_| plan.sample_alpha(&mut rng)).collect();
        let reg = problem(&q, r, partition).regularize(&RegularizationChoice::new(alphas).unwrap()).unwrap();
        if cond(&to_na(reg.q())) > k_d * (1.0 + 1e-9) {
            kd_fails += 1;
        }
    }
    check(spread_fails == 0 && kd_fails == 0, format!("k_(Q+A) >= k_Q in {spread_fails}/500, k_(Q+A) > k_D in {kd_fails}/500"))
}

fn agents25_scenario() -> Outcome {
    let cfg = agents25();
    let outcomes = execute(&cfg).map_err(|e| e.to_string())?;
    let (plain, reg) = (&outcomes[0], &outcomes[1]);
    let h = cfg.horizon;
    let (d_plain, d_reg) = (plain.trace.max_dist2(h), reg.trace.max_dist2(h));
    let e_a = reg.e_a.unwrap();
    let detail = format!(
        "at k={h}: regularized {d_reg:.3e} vs unregularized {d_plain:.3e}, e_A = {e_a:.4}, k_(Q+A) = {:.4}",
        reg.cond_solved
    );
    check(d_reg < d_plain && e_a <= 0.1 && reg.cond_solved <= 10.0, detail)
}

fn adversarial_delays() -> Outcome {
    let cfg = agents25();
    let p = resolve_problem(&cfg).map_err(|e| e.to_string())?;
    let interval = planner::stepsize_interval(100.0, 100.0).unwrap();
    let gammas = GammaMatrix::sample(p.agents(), &interval, &mut rng(cfg.seed)).unwrap();
    let init = cfg.init.states(&p, cfg.seed).unwrap();
    let delays = DelayModel::uniform_rule(DelayRule::Adversarial);
    let trace = sim::run(&p, &cfg.schedule, &delays, &gammas, 10_000, init, &SimOptions::with_seed(cfg.seed)).map_err(|e| e.to_string())?;
    let curve = trace.worst_curve();
    let (d0, end) = (curve[0], curve[10_000]);
    let peak = curve.iter().copied().fold(0.0, f64::max);
    check(end <= 0.5 * d0, format!("max distance {d0:.3e} -> {end:.3e} (ratio {:.3e}, peak {peak:.3e})", end / d0))
}

fn determinism() -> Outcome {
    let cfg = agents25();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let outcomes = execute(&cfg).map_err(|e| e.to_string())?;
        write_outputs(&cfg, &outcomes, out).map_err(|e| e.to_string())?;
    }
    let mut bytes = 0;
    for spec in &cfg.runs {
        let (x, y) = (std::fs::read(a.join(&spec.trace)).unwrap(), std::fs::read(b.join(&spec.trace)).unwrap());
        if x != y {
            return Err(format!("{} differs", spec.trace.display()));
        }
        bytes += x.len();
    }
    Ok(format!("{} traces identical ({bytes} bytes)", cfg.runs.len()))
}

fn fixed_point() -> Outcome {
    let cfg = agents25();
    let p = resolve_problem(&cfg).map_err(|e| e.to_string())?;
    let x_hat = p.exact_minimizer().unwrap();
    let gammas = GammaMatrix::sample(p.agents(), &planner::stepsize_interval(100.0, 100.0).unwrap(), &mut rng(7)).unwrap();
    let schedules = [
        ActivationSchedule::every_step(),
        ActivationSchedule::Bernoulli { p_update: 0.1, p_transmit: 0.1 },
        ActivationSchedule::Bernoulli { p_update: 0.9, p_transmit: 0.02 },
    ];
    let delays = [DelayModel::fixed(1), DelayModel::uniform_rule(DelayRule::Uniform { min: 1, max: 30 }), DelayModel::uniform_rule(DelayRule::Adversarial)];
    let mut worst = 0.0f64;
    for schedule in &schedules {
        for delay in &delays {
            let trace = sim::run(&p, schedule, delay, &gammas, 1000, vec![x_hat.clone(); p.agents()], &SimOptions::with_seed(3)).map_err(|e| e.to_string())?;
            worst = worst.max(trace.rows.iter().map(|r| r.dist2).fold(0.0, f64::max));
        }
    }
    check(worst <= 1e-10, format!("9 schedule/delay combinations, worst distance {worst:.3e}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("stepsize interval (0.009, 0.011)", stepsize_interval),
        ("regularization interval (11, 20)", regularization_interval),
        ("contraction over 1000 instances", contraction),
        ("inverse identities (PD margin, eigenvalue bound, Woodbury)", inverse_identities),
        ("error bound soundness", error_bound_soundness),
        ("condition improvement", condition_improvement),
        ("25-agent scenario", agents25_scenario),
        ("adversarial delays", adversarial_delays),
        ("determinism", determinism),
        ("fixed point invariance", fixed_point),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
