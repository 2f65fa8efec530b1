//! Config-driven experiments: problem setup, parameter planning, paired
//! unregularized/regularized runs, and the commands behind the `taqp` tool.

pub mod config;
pub mod plot;
pub mod problem_file;

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

pub use config::{
    ExperimentConfig, NormConfig, OneOrMany, ProblemSource, RegularizationPolicy, RunSpec, SimFlags, SpectralSource,
    StepsizePolicy,
};
pub use problem_file::{load_problem, save_problem, ProblemFile};

use crate::error::{Error, Result};
use crate::generate::generate_problem;
use crate::linalg;
use crate::planner::{self, GammaMatrix, RegularizationPlan, StepsizeInterval};
use crate::qp::{spectral_bounds, spectral_exact, QuadraticProblem, RegularizationChoice, SpectralInfo};
use crate::rng::{self, Stream};
use crate::sim::{self, SimOptions, SimTrace};

/// `||I - gamma Q||_2 = max(|1 - gamma lambda_1|, |1 - gamma lambda_n|)` for
/// a common stepsize.
fn uniform_q(gamma: f64, norm2: f64, cond: f64) -> f64 {
    (1.0 - gamma * norm2).abs().max((1.0 - gamma * norm2 / cond).abs())
}

/// Everything `plan` reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPlan {
    pub norm2: f64,
    pub cond: f64,
    pub norm_r: f64,
    pub stepsize: StepsizeInterval,
    pub margin: f64,
    /// Range of `||I - gamma Q||_2` over common stepsizes in the interval.
    pub q_uniform: (f64, f64),
    pub kd_floor: Option<f64>,
    pub regularization: Option<RegularizationPlan>,
}

impl ParameterPlan {
    pub fn new(norm2: f64, cond: f64, norm_r: f64, regularization: Option<(f64, f64)>) -> Result<Self> {
        let stepsize = planner::stepsize_interval(norm2, cond)?;
        let margin = planner::interval_margin(stepsize.lower, stepsize.upper, norm2, cond)?;
        let (q_lo_end, q_hi_end) = (uniform_q(stepsize.lower, norm2, cond), uniform_q(stepsize.upper, norm2, cond));
        let best = 2.0 / (norm2 + norm2 / cond);
        let mut q_min = q_lo_end.min(q_hi_end);
        if stepsize.contains(best) {
            q_min = q_min.min(uniform_q(best, norm2, cond));
        }
        let (kd_floor, regularization) = match regularization {
            Some((epsilon, k_d)) => (
                Some(planner::feasible_kd_lower(cond, norm2, norm_r, epsilon)?),
                Some(planner::plan_regularization(cond, norm2, norm_r, epsilon, k_d)?),
            ),
            None => (None, None),
        };
        Ok(ParameterPlan {
            norm2,
            cond,
            norm_r,
            stepsize,
            margin,
            q_uniform: (q_min, q_lo_end.max(q_hi_end)),
            kd_floor,
            regularization,
        })
    }

    pub fn key_values(&self) -> Vec<(&'static str, f64)> {
        let mut kv = vec![
            ("norm2", self.norm2),
            ("cond", self.cond),
            ("norm_r", self.norm_r),
            ("gamma_lo", self.stepsize.lower),
            ("gamma_hi", self.stepsize.upper),
            ("interval_margin", self.margin),
            ("q_uniform_lo", self.q_uniform.0),
            ("q_uniform_hi", self.q_uniform.1),
        ];
        if let (Some(floor), Some(r)) = (self.kd_floor, &self.regularization) {
            kv.extend([
                ("epsilon", r.epsilon),
                ("k_d", r.k_d),
                ("k_d_floor", floor),
                ("alpha_lo", r.alpha_lower),
                ("alpha_hi", r.alpha_upper),
                ("error_bound", r.predicted_error_bound),
                ("gamma_reg_lo", r.predicted_stepsize_interval.lower),
                ("gamma_reg_hi", r.predicted_stepsize_interval.upper),
            ]);
        }
        kv
    }

    pub fn render(&self) -> String {
        self.key_values().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Loads or generates the configured problem.
pub fn resolve_problem(cfg: &ExperimentConfig) -> Result<QuadraticProblem> {
    match (&cfg.problem.generate, cfg.problem_path()) {
        (Some(spec), None) => generate_problem(spec),
        (None, Some(path)) => load_problem(&path),
        _ => Err(Error::Config("exactly one of problem.file and problem.generate must be given".into())),
    }
}

fn spectral_info(problem: &QuadraticProblem, source: SpectralSource) -> Result<SpectralInfo> {
    let info = match source {
        SpectralSource::Exact => spectral_exact(problem.q())?,
        SpectralSource::Bounds => spectral_bounds(problem.q()),
    };
    if !info.lambda_min_usable() {
        return Err(Error::infeasible(format!(
            "spectral bounds give no positive lower bound on lambda_min(Q) (got {}); use spectral = \"exact\"",
            info.lambda_min
        )));
    }
    Ok(info)
}

/// `plan` for a config: spectral data of its problem plus the first sampled
/// regularization policy, if any.
pub fn plan_for_config(cfg: &ExperimentConfig) -> Result<ParameterPlan> {
    let problem = resolve_problem(cfg)?;
    let info = spectral_info(&problem, cfg.spectral)?;
    let reg = cfg.runs.iter().find_map(|r| match r.regularization {
        RegularizationPolicy::Sample { epsilon, k_d } => Some((epsilon, k_d)),
        _ => None,
    });
    ParameterPlan::new(info.norm2, info.cond, linalg::norm2(problem.r()), reg)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub trace: SimTrace,
    pub stepsize_interval: StepsizeInterval,
    pub gammas: Vec<f64>,
    pub alphas: Option<Vec<f64>>,
    pub plan: Option<RegularizationPlan>,
    /// `||x_hat - x_hat_A||_2` for regularized runs.
    pub e_a: Option<f64>,
    /// Exact condition number of the matrix actually iterated on.
    pub cond_solved: f64,
    pub wall: Duration,
}

impl RunOutcome {
    pub fn summary(&self) -> String {
        let t = &self.trace;
        let mut s = format!(
            "run={} gamma_lo={} gamma_hi={} q={} cond_solved={} initial_max_dist2={} final_max_dist2={} final_max_dist_blockmax={}",
            self.name,
            self.stepsize_interval.lower,
            self.stepsize_interval.upper,
            t.q,
            self.cond_solved,
            t.max_dist2(0),
            t.max_dist2(t.horizon),
            t.max_dist_blockmax(t.horizon),
        );
        if let Some(a) = &self.alphas {
            let (lo, hi) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            let _ = write!(s, " alpha_min={lo} alpha_max={hi}");
        }
        if let Some(e) = self.e_a {
            let _ = write!(s, " e_a={e}");
        }
        if let Some(p) = &self.plan {
            let _ = write!(s, " error_bound={} k_d={}", p.predicted_error_bound, p.k_d);
        }
        let _ = write!(
            s,
            " updates={} deliveries={} wall_ms={:.1}",
            t.counts.updates,
            t.counts.deliveries,
            self.wall.as_secs_f64() * 1e3
        );
        s
    }
}

/// Runs every configured run (in parallel). Nothing is written to disk.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    let problem = resolve_problem(cfg)?;
    let info = spectral_info(&problem, cfg.spectral)?;
    let norm_r = linalg::norm2(problem.r());
    let x_hat = problem.exact_minimizer()?;
    let scheme = cfg.norm.as_ref().map(|n| n.scheme(problem.agents())).transpose()?;
    let agents = problem.agents();
    cfg.schedule.validate(agents).map_err(|e| Error::Config(e.to_string()))?;
    cfg.delay.validate(agents).map_err(|e| Error::Config(e.to_string()))?;

    cfg.runs
        .par_iter()
        .map(|spec| {
            let start = Instant::now();
            let (solved, alphas, plan, interval) = match &spec.regularization {
                RegularizationPolicy::None => {
                    (problem.clone(), None, None, planner::stepsize_interval(info.norm2, info.cond)?)
                }
                RegularizationPolicy::Sample { epsilon, k_d } => {
                    let plan = planner::plan_regularization(info.cond, info.norm2, norm_r, *epsilon, *k_d)?;
                    let mut r = rng::stream(cfg.seed, Stream::Regularization);
                    let alphas: Vec<f64> = (0..agents).map(|_| plan.sample_alpha(&mut r)).collect();
                    let solved = problem.regularize(&RegularizationChoice::new(alphas.clone())?)?;
                    (solved, Some(alphas), Some(plan), plan.predicted_stepsize_interval)
                }
                RegularizationPolicy::Explicit { alphas } => {
                    let choice = RegularizationChoice::new(alphas.clone())?;
                    let norm2 = info.norm2 + choice.alpha_max();
                    let cond = norm2 / (info.lambda_min + choice.alpha_min());
                    let solved = problem.regularize(&choice)?;
                    (solved, Some(alphas.clone()), None, planner::stepsize_interval(norm2, cond)?)
                }
            };
            let gammas = match &spec.stepsize {
                StepsizePolicy::Sample => {
                    GammaMatrix::sample(agents, &interval, &mut rng::stream(cfg.seed, Stream::Stepsizes))?
                }
                StepsizePolicy::Explicit { gammas } => GammaMatrix::new(gammas.clone())?,
            };
            let cond_solved = spectral_exact(solved.q())?.cond;
            let e_a = match alphas {
                Some(_) => Some(linalg::norm2(&linalg::sub(&x_hat, &solved.exact_minimizer()?))),
                None => None,
            };
            let options = SimOptions {
                seed: cfg.seed,
                deliver_before_update: cfg.sim.deliver_before_update,
                timestamp_dedup: cfg.sim.timestamp_dedup,
                parallel: cfg.sim.parallel,
                record_events: spec.events.is_some(),
                norm: scheme.clone(),
            };
            let init = cfg.init.states(&solved, cfg.seed)?;
            let trace = sim::run(&solved, &cfg.schedule, &cfg.delay, &gammas, cfg.horizon, init, &options)?;
            Ok(RunOutcome {
                name: spec.name.clone(),
                trace,
                stepsize_interval: interval,
                gammas: gammas.gammas().to_vec(),
                alphas,
                plan,
                e_a,
                cond_solved,
                wall: start.elapsed(),
            })
        })
        .collect()
}

/// Writes each run's trace (and event log, if requested) under `out_dir`.
pub fn write_outputs(cfg: &ExperimentConfig, outcomes: &[RunOutcome], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (spec, outcome) in cfg.runs.iter().zip(outcomes) {
        let path = out_dir.join(&spec.trace);
        outcome.trace.write_csv_file(&path)?;
        if let Some(events) = &spec.events {
            let path = out_dir.join(events);
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            outcome.trace.write_events(std::io::BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

/// `run`: execute, write traces, return one summary line per run.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    let outcomes = execute(cfg)?;
    write_outputs(cfg, &outcomes, out_dir)?;
    Ok(outcomes.iter().map(|o| o.summary() + "\n").collect())
}
