//! C ABI over `taqp`.
//!
//! Problems and simulators are opaque heap handles created by `*_new`,
//! `*_load` or `*_generate` and released with the matching `*_free`. Every
//! fallible call returns a [`TaqpStatus`]; on failure the message is kept per
//! thread and can be fetched with [`taqp_last_error_message`]. Panics never
//! cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use taqp::generate::{self, Blocks, GenSpec, RLaw, Spectrum};
use taqp::linalg::{self, Matrix};
use taqp::planner::{self, GammaMatrix};
use taqp::qp::{self, BlockPartition, QuadraticProblem};
use taqp::sim::{ActivationSchedule, DelayModel, DelayRule, Initialization, SimOptions, Simulator};
use taqp::{experiment, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaqpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Io = 4,
    Parse = 5,
    NotPositiveDefinite = 6,
    Panic = 99,
}

impl From<&Error> for TaqpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Infeasible(_) => TaqpStatus::Infeasible,
            Error::Io { .. } => TaqpStatus::Io,
            Error::Parse { .. } | Error::Config(_) => TaqpStatus::Parse,
            Error::NotPositiveDefinite => TaqpStatus::NotPositiveDefinite,
            _ => TaqpStatus::InvalidArgument,
        }
    }
}

/// Open interval `(lower, upper)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TaqpInterval {
    pub lower: f64,
    pub upper: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TaqpSpectral {
    pub norm2: f64,
    pub lambda_min: f64,
    pub cond: f64,
    /// Nonzero when the values are bounds rather than exact.
    pub is_upper_bound: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TaqpRegularizationPlan {
    pub alpha: TaqpInterval,
    pub k_d: f64,
    pub epsilon: f64,
    pub predicted_error_bound: f64,
    pub predicted_stepsize: TaqpInterval,
}

/// Opaque quadratic program.
pub struct TaqpProblem {
    inner: QuadraticProblem,
}

/// Opaque simulator with its problem's minimizer.
pub struct TaqpSim {
    inner: Simulator,
    x_hat: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn guard(f: impl FnOnce() -> Result<(), (TaqpStatus, String)>) -> TaqpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TaqpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TaqpStatus::Panic
        }
    }
}

fn lib(e: Error) -> (TaqpStatus, String) {
    (TaqpStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (TaqpStatus, String) {
    (TaqpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (TaqpStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (TaqpStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TaqpStatus::InvalidArgument, "path is not valid UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Result<(), (TaqpStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (TaqpStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full length including the
/// terminator, so a caller can size a buffer by passing `len = 0`.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null with `len = 0`.
#[no_mangle]
pub unsafe extern "C" fn taqp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn taqp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a problem from a row-major `n x n` matrix `q`, vector `r` of
/// length `n`, and `agents` block sizes summing to `n`.
///
/// # Safety
/// `q` must point to `n * n` doubles, `r` to `n`, `blocks` to `agents`
/// sizes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn taqp_problem_new(
    n: usize,
    q: *const f64,
    r: *const f64,
    blocks: *const usize,
    agents: usize,
    out: *mut *mut TaqpProblem,
) -> TaqpStatus {
    guard(|| {
        let q = slice(q, n.checked_mul(n).ok_or_else(|| lib(Error::InvalidArgument("n overflows".into())))?, "q")?;
        let r = slice(r, n, "r")?;
        let blocks = slice(blocks, agents, "blocks")?;
        let partition = BlockPartition::new(blocks.to_vec()).map_err(lib)?;
        let q = Matrix::from_row_major(n, n, q.to_vec()).map_err(lib)?;
        let problem = QuadraticProblem::new(q, r.to_vec(), partition, None).map_err(lib)?;
        write_handle(out, TaqpProblem { inner: problem })
    })
}

/// Random problem with prescribed `||Q||_2`, `k_Q` and `||r||_2`, split
/// evenly over `agents` blocks. Eigenvalues are log-uniformly spread.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn taqp_problem_generate(
    n: usize,
    agents: usize,
    norm2: f64,
    cond: f64,
    norm_r: f64,
    seed: u64,
    out: *mut *mut TaqpProblem,
) -> TaqpStatus {
    guard(|| {
        let spec = GenSpec {
            n,
            blocks: Blocks::Even(agents),
            norm2,
            cond,
            spectrum: Spectrum::LogUniform,
            r: RLaw::Norm(norm_r),
            seed,
        };
        spec.validate().map_err(lib)?;
        let problem = generate::generate_problem(&spec).map_err(lib)?;
        write_handle(out, TaqpProblem { inner: problem })
    })
}

/// Loads a JSON problem file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn taqp_problem_load(path: *const c_char, out: *mut *mut TaqpProblem) -> TaqpStatus {
    guard(|| {
        let problem = experiment::load_problem(&path_arg(path)?).map_err(lib)?;
        write_handle(out, TaqpProblem { inner: problem })
    })
}

/// # Safety
/// `problem` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn taqp_problem_save(problem: *const TaqpProblem, path: *const c_char) -> TaqpStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        experiment::save_problem(&p.inner, &path_arg(path)?).map_err(lib)
    })
}

/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn taqp_problem_free(problem: *mut TaqpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn taqp_problem_dim(problem: *const TaqpProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.dim())
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn taqp_problem_agents(problem: *const TaqpProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.agents())
}

/// Exact extreme eigenvalues, or cheap bounds when `bounds` is nonzero.
///
/// # Safety
/// `problem` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn taqp_problem_spectral(problem: *const TaqpProblem, bounds: u8, out: *mut TaqpSpectral) -> TaqpStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let s = if bounds != 0 { qp::spectral_bounds(p.inner.q()) } else { p.inner.spectral_exact() };
        write_out(
            out,
            TaqpSpectral { norm2: s.norm2, lambda_min: s.lambda_min, cond: s.cond, is_upper_bound: s.is_upper_bound as u8 },
        )
    })
}

/// Writes the unconstrained minimizer `-Q^{-1} r` into `out[0..len]`.
///
/// # Safety
/// `problem` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn taqp_problem_minimizer(problem: *const TaqpProblem, out: *mut f64, len: usize) -> TaqpStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let x = p.inner.exact_minimizer().map_err(lib)?;
        copy_out(&x, out, len)
    })
}

unsafe fn copy_out(x: &[f64], out: *mut f64, len: usize) -> Result<(), (TaqpStatus, String)> {
    if len != x.len() {
        return Err(lib(Error::Dimension { what: "output buffer", expected: x.len(), found: len }));
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(x.as_ptr(), out, len);
    Ok(())
}

/// Stepsize interval guaranteeing `||I - Gamma Q||_2 < 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn taqp_stepsize_interval(norm2: f64, cond: f64, out: *mut TaqpInterval) -> TaqpStatus {
    guard(|| {
        let i = planner::stepsize_interval(norm2, cond).map_err(lib)?;
        write_out(out, TaqpInterval { lower: i.lower, upper: i.upper })
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn taqp_plan_regularization(
    cond: f64,
    norm2: f64,
    norm_r: f64,
    epsilon: f64,
    k_d: f64,
    out: *mut TaqpRegularizationPlan,
) -> TaqpStatus {
    guard(|| {
        let p = planner::plan_regularization(cond, norm2, norm_r, epsilon, k_d).map_err(lib)?;
        write_out(
            out,
            TaqpRegularizationPlan {
                alpha: TaqpInterval { lower: p.alpha_lower, upper: p.alpha_upper },
                k_d: p.k_d,
                epsilon: p.epsilon,
                predicted_error_bound: p.predicted_error_bound,
                predicted_stepsize: TaqpInterval {
                    lower: p.predicted_stepsize_interval.lower,
                    upper: p.predicted_stepsize_interval.upper,
                },
            },
        )
    })
}

/// Upper bound on `||x_hat - x_hat_A||_2` for regularization weights at most
/// `alpha_max`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn taqp_error_bound(cond: f64, norm2: f64, norm_r: f64, alpha_max: f64, out: *mut f64) -> TaqpStatus {
    guard(|| {
        if !(cond >= 1.0 && norm2 > 0.0 && norm_r >= 0.0 && alpha_max >= 0.0) {
            return Err(lib(Error::InvalidArgument("need cond >= 1, norm2 > 0, norm_r >= 0, alpha_max >= 0".into())));
        }
        write_out(out, planner::error_bound(cond, norm2, norm_r, alpha_max))
    })
}

/// `||I - Gamma Q||_2` for per-agent stepsizes `gammas[0..agents]`.
///
/// # Safety
/// `problem` must be a live handle; `gammas` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn taqp_contraction_factor(
    problem: *const TaqpProblem,
    gammas: *const f64,
    len: usize,
    out: *mut f64,
) -> TaqpStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let g = GammaMatrix::new(slice(gammas, len, "gammas")?.to_vec()).map_err(lib)?;
        let q = planner::contraction_factor(p.inner.q(), &g, p.inner.partition()).map_err(lib)?;
        write_out(out, q)
    })
}

/// Simulator with Bernoulli updates/transmissions and delays uniform in
/// `[1, max_delay]`. Every agent starts from one common point drawn
/// uniformly from `[-1, 1]^n`. The problem may be freed afterwards.
///
/// # Safety
/// `problem` must be a live handle; `gammas` must hold `len` doubles; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn taqp_sim_new(
    problem: *const TaqpProblem,
    gammas: *const f64,
    len: usize,
    p_update: f64,
    p_transmit: f64,
    max_delay: u64,
    seed: u64,
    out: *mut *mut TaqpSim,
) -> TaqpStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let g = GammaMatrix::new(slice(gammas, len, "gammas")?.to_vec()).map_err(lib)?;
        let schedule = ActivationSchedule::Bernoulli { p_update, p_transmit };
        let delays = DelayModel::uniform_rule(DelayRule::Uniform { min: 1, max: max_delay });
        let init = Initialization::default().states(&p.inner, seed).map_err(lib)?;
        let x_hat = p.inner.exact_minimizer().map_err(lib)?;
        let sim = Simulator::new(&p.inner, &g, schedule, delays, init, SimOptions::with_seed(seed)).map_err(lib)?;
        write_handle(out, TaqpSim { inner: sim, x_hat })
    })
}

/// Advances `steps` ticks.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn taqp_sim_step(sim: *mut TaqpSim, steps: u64) -> TaqpStatus {
    guard(|| {
        let s = sim.as_mut().ok_or_else(|| null("sim"))?;
        for _ in 0..steps {
            s.inner.step();
        }
        Ok(())
    })
}

/// Current tick, or 0 for a null handle.
///
/// # Safety
/// `sim` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn taqp_sim_tick(sim: *const TaqpSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.inner.tick())
}

/// Largest Euclidean distance of any agent's local copy to the minimizer.
///
/// # Safety
/// `sim` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn taqp_sim_max_distance(sim: *const TaqpSim, out: *mut f64) -> TaqpStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        let d = s.inner.agents().iter().map(|a| linalg::norm2(&linalg::sub(a.local_copy(), &s.x_hat))).fold(0.0, f64::max);
        write_out(out, d)
    })
}

/// Copies agent `agent`'s full local copy into `out[0..len]`.
///
/// # Safety
/// `sim` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn taqp_sim_local_copy(sim: *const TaqpSim, agent: usize, out: *mut f64, len: usize) -> TaqpStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        let agents = s.inner.agents();
        let a = agents
            .get(agent)
            .ok_or_else(|| lib(Error::AgentOutOfRange { index: agent, agents: agents.len() }))?;
        copy_out(a.local_copy(), out, len)
    })
}

/// # Safety
/// `sim` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn taqp_sim_free(sim: *mut TaqpSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
