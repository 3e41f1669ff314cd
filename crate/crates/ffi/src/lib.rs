//! C ABI over `lvcomp`.
//!
//! Every function returns an [`LvcStatus`]; results go through out-pointers.
//! On failure a message is kept per thread and can be copied out with
//! [`lvc_last_error_message`]. Handles are opaque and must be released with
//! their matching `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lvcomp::equilibria::{all_equilibria, EquilibriumKind, Stability};
use lvcomp::kinetics::{rhs, KineticParams, Regime, Species, State2};
use lvcomp::ode::{
    comparison_extinction_time, comparison_solution, fte_threshold, integrate, ComparisonOde, IntegrateOptions,
    Terminal, Trajectory,
};
use lvcomp::pde::{simulate_pde, Grid, OutcomeLabel, PdeOptions, PdeParams, PdeState, Reaction, ResourceField};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    BufferTooSmall = 4,
    OutOfRange = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvcRegime {
    ExclusionUWins = 0,
    ExclusionVWins = 1,
    WeakCompetition = 2,
    StrongCompetition = 3,
    Degenerate = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvcEquilibriumKind {
    Origin = 0,
    UAxis = 1,
    VAxis = 2,
    Interior = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvcStability {
    Sink = 0,
    Source = 1,
    Saddle = 2,
    SpiralSink = 3,
    SpiralSource = 4,
    Center = 5,
    NonHyperbolic = 6,
    Unclassifiable = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvcSpecies {
    U = 0,
    V = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvcOutcome {
    UWins = 0,
    VWins = 1,
    Coexist = 2,
    Undecided = 3,
}

/// One fixed point. `trace` and `det` are NaN when the Jacobian does not exist.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvcEquilibrium {
    pub u: f64,
    pub v: f64,
    pub kind: LvcEquilibriumKind,
    pub stability: LvcStability,
    pub trace: f64,
    pub det: f64,
}

/// Summary of a reaction-diffusion run. Extinction times are NaN when the
/// species did not die out.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvcPdeSummary {
    pub outcome: LvcOutcome,
    pub t_reached: f64,
    pub u_extinction_time: f64,
    pub v_extinction_time: f64,
    pub steps: usize,
}

/// Opaque kinetic parameter set.
pub struct LvcParams(KineticParams);

/// Opaque integrated trajectory.
pub struct LvcTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: LvcStatus, msg: impl Into<String>) -> LvcStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> LvcStatus>(f: F) -> LvcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == LvcStatus::Ok {
                set_error("");
            }
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(LvcStatus::Panic, format!("panic: {msg}"))
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(LvcStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

fn regime(r: Regime) -> LvcRegime {
    match r {
        Regime::ExclusionUWins => LvcRegime::ExclusionUWins,
        Regime::ExclusionVWins => LvcRegime::ExclusionVWins,
        Regime::WeakCompetition => LvcRegime::WeakCompetition,
        Regime::StrongCompetition => LvcRegime::StrongCompetition,
        Regime::Degenerate => LvcRegime::Degenerate,
    }
}

fn kind(k: EquilibriumKind) -> LvcEquilibriumKind {
    match k {
        EquilibriumKind::Origin => LvcEquilibriumKind::Origin,
        EquilibriumKind::UAxis => LvcEquilibriumKind::UAxis,
        EquilibriumKind::VAxis => LvcEquilibriumKind::VAxis,
        EquilibriumKind::Interior => LvcEquilibriumKind::Interior,
    }
}

fn stability(s: Stability) -> LvcStability {
    match s {
        Stability::Sink => LvcStability::Sink,
        Stability::Source => LvcStability::Source,
        Stability::Saddle => LvcStability::Saddle,
        Stability::SpiralSink => LvcStability::SpiralSink,
        Stability::SpiralSource => LvcStability::SpiralSource,
        Stability::Center => LvcStability::Center,
        Stability::NonHyperbolic => LvcStability::NonHyperbolic,
        Stability::Unclassifiable => LvcStability::Unclassifiable,
    }
}

fn species(s: LvcSpecies) -> Species {
    match s {
        LvcSpecies::U => Species::U,
        LvcSpecies::V => Species::V,
    }
}

fn outcome(l: OutcomeLabel) -> LvcOutcome {
    match l {
        OutcomeLabel::UWins => LvcOutcome::UWins,
        OutcomeLabel::VWins => LvcOutcome::VWins,
        OutcomeLabel::Coexist => LvcOutcome::Coexist,
        OutcomeLabel::Undecided => LvcOutcome::Undecided,
    }
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to fit) and return the full message length in bytes, excluding
/// the terminator. Passing a null `buf` only queries the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lvc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Create a parameter set. Exponents must lie in `(0, 1]`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn lvc_params_new(
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    c1: f64,
    c2: f64,
    p: f64,
    q: f64,
    out: *mut *mut LvcParams,
) -> LvcStatus {
    guard(|| {
        non_null!(out);
        match KineticParams::classical(a1, a2, b1, b2, c1, c2).and_then(|k| k.with_exponents(p, q)) {
            Ok(k) => {
                *out = Box::into_raw(Box::new(LvcParams(k)));
                LvcStatus::Ok
            }
            Err(e) => fail(LvcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `params` must be null or a handle from [`lvc_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lvc_params_free(params: *mut LvcParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lvc_params_regime(params: *const LvcParams, out: *mut LvcRegime) -> LvcStatus {
    guard(|| {
        non_null!(params, out);
        *out = regime((*params).0.regime());
        LvcStatus::Ok
    })
}

/// Right-hand side of the kinetics at `(u, v)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lvc_rhs(params: *const LvcParams, u: f64, v: f64, du: *mut f64, dv: *mut f64) -> LvcStatus {
    guard(|| {
        non_null!(params, du, dv);
        let r = rhs(&(*params).0, State2::new(u, v));
        *du = r.u;
        *dv = r.v;
        LvcStatus::Ok
    })
}

/// Write up to `cap` equilibria into `buf` and their total number into
/// `count`. Returns `BufferTooSmall` (with `count` set) if `cap` is short.
///
/// # Safety
/// `buf` must point to `cap` writable elements (may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn lvc_equilibria(
    params: *const LvcParams,
    buf: *mut LvcEquilibrium,
    cap: usize,
    count: *mut usize,
) -> LvcStatus {
    guard(|| {
        non_null!(params, count);
        let all = all_equilibria(&(*params).0);
        *count = all.len();
        if all.len() > cap {
            return fail(LvcStatus::BufferTooSmall, format!("need room for {} equilibria", all.len()));
        }
        non_null!(buf);
        for (i, e) in all.iter().enumerate() {
            *buf.add(i) = LvcEquilibrium {
                u: e.point.u,
                v: e.point.v,
                kind: kind(e.kind),
                stability: stability(e.stability),
                trace: e.jacobian.map_or(f64::NAN, |j| j.trace()),
                det: e.jacobian.map_or(f64::NAN, |j| j.det()),
            };
        }
        LvcStatus::Ok
    })
}

/// Extinction threshold `f(u0)` on the `v` axis; needs `p < 1` and `q = 1`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lvc_fte_threshold(params: *const LvcParams, u0: f64, out: *mut f64) -> LvcStatus {
    guard(|| {
        non_null!(params, out);
        match fte_threshold(&(*params).0, u0) {
            Ok(f) => {
                *out = f;
                LvcStatus::Ok
            }
            Err(e) => fail(LvcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Integrate from `(u0, v0)` to `t_end`. Non-positive `rtol`/`atol` select
/// the defaults.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lvc_integrate(
    params: *const LvcParams,
    u0: f64,
    v0: f64,
    t_end: f64,
    rtol: f64,
    atol: f64,
    out: *mut *mut LvcTrajectory,
) -> LvcStatus {
    guard(|| {
        non_null!(params, out);
        let mut opts = IntegrateOptions::default();
        if rtol > 0.0 {
            opts.rtol = rtol;
        }
        if atol > 0.0 {
            opts.atol = atol;
        }
        match integrate(&(*params).0, State2::new(u0, v0), t_end, &opts) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(LvcTrajectory(t)));
                LvcStatus::Ok
            }
            Err(e @ lvcomp::ode::IntegrateError::InvalidInitialCondition(_))
            | Err(e @ lvcomp::ode::IntegrateError::InvalidHorizon(_)) => {
                fail(LvcStatus::InvalidArgument, e.to_string())
            }
            Err(e) => fail(LvcStatus::NumericalFailure, e.to_string()),
        }
    })
}

/// # Safety
/// `traj` must be null or a handle from [`lvc_integrate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lvc_trajectory_free(traj: *mut LvcTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lvc_trajectory_len(traj: *const LvcTrajectory, out: *mut usize) -> LvcStatus {
    guard(|| {
        non_null!(traj, out);
        *out = (*traj).0.samples.len();
        LvcStatus::Ok
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lvc_trajectory_sample(
    traj: *const LvcTrajectory,
    index: usize,
    t: *mut f64,
    u: *mut f64,
    v: *mut f64,
) -> LvcStatus {
    guard(|| {
        non_null!(traj, t, u, v);
        let traj = &*traj;
        let Some(s) = traj.0.samples.get(index) else {
            return fail(LvcStatus::OutOfRange, format!("sample {index} out of range"));
        };
        *t = s.t;
        *u = s.state.u;
        *v = s.state.v;
        LvcStatus::Ok
    })
}

/// Extinction time of `species`, or NaN if it never died out.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lvc_trajectory_extinction_time(
    traj: *const LvcTrajectory,
    which: LvcSpecies,
    out: *mut f64,
) -> LvcStatus {
    guard(|| {
        non_null!(traj, out);
        *out = (*traj).0.event_for(species(which)).map_or(f64::NAN, |e| e.t_star);
        LvcStatus::Ok
    })
}

/// Where the trajectory settled. `decided` is 0 when it ran out of time, in
/// which case `(u, v)` is the final state.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lvc_trajectory_terminal(
    traj: *const LvcTrajectory,
    u: *mut f64,
    v: *mut f64,
    decided: *mut i32,
) -> LvcStatus {
    guard(|| {
        non_null!(traj, u, v, decided);
        let t = &(*traj).0;
        let (pt, d) = match &t.terminal {
            Terminal::Equilibrium(e) => (e.point, 1),
            Terminal::MaxTimeReached => (t.final_state(), 0),
        };
        *u = pt.u;
        *v = pt.v;
        *decided = d;
        LvcStatus::Ok
    })
}

/// Closed-form solution of the comparison equation at time `t`, and its
/// extinction time (NaN when there is none).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn lvc_comparison(
    c4: f64,
    c5: f64,
    c2: f64,
    alpha: f64,
    g0: f64,
    t: f64,
    value: *mut f64,
    extinction_time: *mut f64,
) -> LvcStatus {
    guard(|| {
        non_null!(value, extinction_time);
        match ComparisonOde::new(c4, c5, c2, alpha, g0) {
            Ok(c) => {
                *value = comparison_solution(&c, t);
                *extinction_time = comparison_extinction_time(&c).unwrap_or(f64::NAN);
                LvcStatus::Ok
            }
            Err(e) => fail(LvcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Run the resource-driven system `u_t = d1 u_xx + m u - u^2 - b u^p v`,
/// `v_t = d2 v_xx + m v - v^2 - c u v` on `[0, length]` with zero-flux ends.
/// `m`, `u`, `v` hold `n` cell values; `u` and `v` are overwritten with the
/// final fields.
///
/// # Safety
/// `m`, `u` and `v` must each point to `n` elements; `summary` must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn lvc_pde_inhomogeneous(
    m: *const f64,
    n: usize,
    length: f64,
    b: f64,
    c: f64,
    p: f64,
    d1: f64,
    d2: f64,
    t_end: f64,
    u: *mut f64,
    v: *mut f64,
    summary: *mut LvcPdeSummary,
) -> LvcStatus {
    guard(|| {
        non_null!(m, u, v, summary);
        let run = (|| {
            let grid = Grid::new(0.0, length, n)?;
            let resource = ResourceField::new(std::slice::from_raw_parts(m, n).to_vec())?;
            let init = PdeState::new(
                grid,
                std::slice::from_raw_parts(u, n).to_vec(),
                std::slice::from_raw_parts(v, n).to_vec(),
            )?;
            let params = PdeParams { reaction: Reaction::Inhomogeneous { b, c, p, m: resource }, d1, d2 };
            simulate_pde(&params, &init, t_end, &PdeOptions::default())
        })();
        match run {
            Ok(run) => {
                ptr::copy_nonoverlapping(run.final_state.u.as_ptr(), u, n);
                ptr::copy_nonoverlapping(run.final_state.v.as_ptr(), v, n);
                let ext = |s| run.outcome.extinction_of(s).map_or(f64::NAN, |e| e.t_star);
                *summary = LvcPdeSummary {
                    outcome: outcome(run.outcome.label),
                    t_reached: run.outcome.t_reached,
                    u_extinction_time: ext(Species::U),
                    v_extinction_time: ext(Species::V),
                    steps: run.steps,
                };
                LvcStatus::Ok
            }
            Err(
                e @ (lvcomp::pde::PdeError::NonFiniteField { .. }
                | lvcomp::pde::PdeError::CflViolation { .. }
                | lvcomp::pde::PdeError::NonConvergence { .. }),
            ) => fail(LvcStatus::NumericalFailure, e.to_string()),
            Err(e) => fail(LvcStatus::InvalidArgument, e.to_string()),
        }
    })
}
