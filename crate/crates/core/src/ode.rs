//! Time integration of the planar kinetics with finite-time-extinction
//! handling, the sufficient extinction threshold, separatrix tracing, basin
//! classification, and the closed-form comparison ODE
//! `g' = -C4 exp(-C6 t) g^alpha`.
//!
//! The integrator is an embedded Dormand-Prince 5(4) pair. A species whose
//! own loss term carries a fractional exponent is clamped to exactly zero once
//! it falls below [`EXTINCTION_THRESHOLD`] while still decreasing there; the
//! crossing time is located by bisection inside the step and reported as an
//! [`FteEvent`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibria::{all_equilibria, harvest_equilibria, Equilibrium, Stability};
use crate::kinetics::{harvest_rhs, rhs, HarvestParams, KineticParams, Species, State2};

/// Densities below this are candidates for the extinction clamp.
pub const EXTINCTION_THRESHOLD: f64 = 1e-10;

/// A planar autonomous vector field on the closed positive quadrant.
pub trait VectorField: Sync {
    fn eval(&self, s: State2) -> State2;

    /// Exponent of a species' own density in its non-smooth loss term; one
    /// when the loss is smooth.
    fn loss_exponent(&self, species: Species) -> f64;

    fn equilibria(&self) -> Vec<Equilibrium>;
}

impl VectorField for KineticParams {
    fn eval(&self, s: State2) -> State2 {
        rhs(self, s)
    }

    fn loss_exponent(&self, species: Species) -> f64 {
        self.exponent(species)
    }

    fn equilibria(&self) -> Vec<Equilibrium> {
        all_equilibria(self)
    }
}

impl VectorField for HarvestParams {
    fn eval(&self, s: State2) -> State2 {
        harvest_rhs(self, s)
    }

    fn loss_exponent(&self, species: Species) -> f64 {
        match species {
            Species::U => 1.0,
            Species::V if self.e > 0.0 => self.base.q,
            Species::V => 1.0,
        }
    }

    fn equilibria(&self) -> Vec<Equilibrium> {
        harvest_equilibria(self)
    }
}

/// The same field with time reversed.
struct Reversed<'a, F: ?Sized>(&'a F);

impl<F: VectorField + ?Sized> VectorField for Reversed<'_, F> {
    fn eval(&self, s: State2) -> State2 {
        let d = self.0.eval(s);
        State2::new(-d.u, -d.v)
    }

    fn loss_exponent(&self, species: Species) -> f64 {
        self.0.loss_exponent(species)
    }

    fn equilibria(&self) -> Vec<Equilibrium> {
        self.0.equilibria()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: State2,
}

/// A species reached zero at `t_star`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FteEvent {
    pub species: Species,
    pub t_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Terminal {
    /// The trajectory locked onto this equilibrium.
    Equilibrium(Equilibrium),
    MaxTimeReached,
}

impl Terminal {
    pub fn point(&self) -> Option<State2> {
        match self {
            Terminal::Equilibrium(eq) => Some(eq.point),
            Terminal::MaxTimeReached => None,
        }
    }

    pub fn is_decided(&self) -> bool {
        matches!(self, Terminal::Equilibrium(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<FteEvent>,
    pub terminal: Terminal,
}

impl Trajectory {
    pub fn final_state(&self) -> State2 {
        self.samples.last().map(|s| s.state).unwrap_or_default()
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn event_for(&self, species: Species) -> Option<&FteEvent> {
        self.events.iter().find(|e| e.species == species)
    }

    /// State at time `t` by linear interpolation between samples.
    pub fn state_at(&self, t: f64) -> State2 {
        let idx = self.samples.partition_point(|s| s.t < t);
        if idx == 0 {
            return self.samples[0].state;
        }
        if idx >= self.samples.len() {
            return self.final_state();
        }
        let (a, b) = (self.samples[idx - 1], self.samples[idx]);
        let w = (t - a.t) / (b.t - a.t);
        State2::new(a.state.u + w * (b.state.u - a.state.u), a.state.v + w * (b.state.v - a.state.v))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("initial condition must be finite and componentwise non-negative, got ({}, {})", .0.u, .0.v)]
    InvalidInitialCondition(State2),
    #[error("integration horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("step size fell below the minimum at t = {t}")]
    StepSizeUnderflow { t: f64, partial: Box<Trajectory> },
    #[error("step limit exceeded at t = {t}")]
    StepLimitExceeded { t: f64, partial: Box<Trajectory> },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    pub extinction_threshold: f64,
    /// Width of the bisection bracket for the extinction time.
    pub event_time_tol: f64,
    /// Lock onto an equilibrium within this distance ...
    pub lock_radius: f64,
    /// ... once the speed has dropped below this.
    pub lock_speed: f64,
    pub stop_at_equilibrium: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_max: 0.25,
            h_min: 1e-14,
            max_steps: 5_000_000,
            extinction_threshold: EXTINCTION_THRESHOLD,
            event_time_tol: 1e-10,
            lock_radius: 1e-6,
            lock_speed: 1e-8,
            stop_at_equilibrium: true,
        }
    }
}

// Dormand-Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: State2, terms: &[(f64, State2)], h: f64) -> State2 {
    let mut out = y;
    for (c, k) in terms {
        out.u += h * c * k.u;
        out.v += h * c * k.v;
    }
    out
}

/// One Dormand-Prince step; returns the fifth-order solution and the
/// embedded error estimate.
fn dopri_step<F: VectorField + ?Sized>(f: &F, y: State2, h: f64) -> (State2, State2) {
    let k1 = f.eval(y);
    let k2 = f.eval(axpy(y, &[(A21, k1)], h));
    let k3 = f.eval(axpy(y, &[(A31, k1), (A32, k2)], h));
    let k4 = f.eval(axpy(y, &[(A41, k1), (A42, k2), (A43, k3)], h));
    let k5 = f.eval(axpy(y, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
    let k6 = f.eval(axpy(y, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h));
    let y_new = axpy(y, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], h);
    let k7 = f.eval(y_new);
    let err = axpy(State2::ORIGIN, &[(E1, k1), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)], h);
    (y_new, err)
}

fn error_norm(y: State2, y_new: State2, err: State2, opts: &IntegrateOptions) -> f64 {
    let scale = |a: f64, b: f64| opts.atol + opts.rtol * a.abs().max(b.abs());
    let eu = err.u / scale(y.u, y_new.u);
    let ev = err.v / scale(y.v, y_new.v);
    (0.5 * (eu * eu + ev * ev)).sqrt()
}

fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

fn locked_equilibrium<F: VectorField + ?Sized>(
    f: &F,
    y: State2,
    equilibria: &[Equilibrium],
    opts: &IntegrateOptions,
) -> Option<Equilibrium> {
    let near = equilibria
        .iter()
        .filter(|eq| eq.point.distance(&y) < opts.lock_radius)
        .min_by(|a, b| a.point.distance(&y).total_cmp(&b.point.distance(&y)))?;
    (f.eval(y).norm() < opts.lock_speed).then_some(*near)
}

/// Integrate from `ic` up to `t_end`, recording every accepted step.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    ic: State2,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, IntegrateError> {
    if !ic.is_finite() || !ic.is_nonnegative() {
        return Err(IntegrateError::InvalidInitialCondition(ic));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(IntegrateError::InvalidHorizon(t_end));
    }
    let equilibria = if opts.stop_at_equilibrium { field.equilibria() } else { Vec::new() };
    let eps = opts.extinction_threshold;
    let mut extinct = [ic.u == 0.0, ic.v == 0.0];
    let mut traj = Trajectory {
        samples: vec![Sample { t: 0.0, state: ic }],
        events: Vec::new(),
        terminal: Terminal::MaxTimeReached,
    };

    if let Some(eq) = locked_equilibrium(field, ic, &equilibria, opts) {
        traj.terminal = Terminal::Equilibrium(eq);
        return Ok(traj);
    }

    let mut t = 0.0;
    let mut y = ic;
    let mut h = opts.h_init.min(opts.h_max);
    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(IntegrateError::StepLimitExceeded { t, partial: Box::new(traj) });
        }
        let h_try = h.min(t_end - t);
        let (y_new, err) = dopri_step(field, y, h_try);
        if !y_new.is_finite() || !err.is_finite() {
            if h_try <= opts.h_min {
                return Err(IntegrateError::NonFiniteState { t });
            }
            h = h_try * 0.2;
            continue;
        }
        let err_norm = error_norm(y, y_new, err, opts);
        if err_norm > 1.0 {
            h = h_try * step_factor(err_norm);
            if h < opts.h_min {
                return Err(IntegrateError::StepSizeUnderflow { t, partial: Box::new(traj) });
            }
            continue;
        }

        // earliest extinction crossing inside the accepted step, if any
        let mut crossing: Option<(Species, f64, State2)> = None;
        for species in [Species::U, Species::V] {
            let idx = species as usize;
            if extinct[idx] || field.loss_exponent(species) >= 1.0 || y_new.get(species) >= eps {
                continue;
            }
            let mut probe = y_new;
            probe.set(species, eps);
            probe.set(species.other(), probe.get(species.other()).max(0.0));
            if field.eval(probe).get(species) >= 0.0 {
                continue;
            }
            let (tau, state) = bracket_crossing(field, y, h_try, species, eps, opts.event_time_tol);
            if crossing.is_none_or(|(_, best, _)| tau < best) {
                crossing = Some((species, tau, state));
            }
        }

        let (dt, mut y_next) = match crossing {
            Some((species, tau, state)) => {
                extinct[species as usize] = true;
                traj.events.push(FteEvent { species, t_star: t + tau });
                (tau, state)
            }
            None => (h_try, y_new),
        };
        for species in [Species::U, Species::V] {
            if extinct[species as usize] || y_next.get(species) < 0.0 {
                y_next.set(species, 0.0);
            }
        }
        // the bracket can end exactly on the step start; keep times increasing
        if dt > 0.0 {
            t += dt;
            traj.samples.push(Sample { t, state: y_next });
        } else if let Some(last) = traj.samples.last_mut() {
            last.state = y_next;
        }
        y = y_next;
        if crossing.is_none() {
            h = (h_try * step_factor(err_norm)).min(opts.h_max);
        }
        if let Some(eq) = locked_equilibrium(field, y, &equilibria, opts) {
            traj.terminal = Terminal::Equilibrium(eq);
            break;
        }
    }
    Ok(traj)
}

/// Smallest sub-step `tau` in `(0, h]` after which `species` is below `eps`,
/// to within `tol`, together with the state reached.
fn bracket_crossing<F: VectorField + ?Sized>(
    field: &F,
    y: State2,
    h: f64,
    species: Species,
    eps: f64,
    tol: f64,
) -> (f64, State2) {
    if y.get(species) < eps {
        return (0.0, y);
    }
    let (mut lo, mut hi) = (0.0, h);
    let mut state_hi = dopri_step(field, y, h).0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = dopri_step(field, y, mid).0;
        if s.get(species) < eps {
            hi = mid;
            state_hi = s;
        } else {
            lo = mid;
        }
    }
    (hi, state_hi)
}

/// Integrate to `t_max` and return where the trajectory settled.
/// [`Terminal::MaxTimeReached`] means undecided.
pub fn classify_basin<F: VectorField + ?Sized>(
    field: &F,
    ic: State2,
    t_max: f64,
    opts: &IntegrateOptions,
) -> Result<Terminal, IntegrateError> {
    if !(ic.u > 0.0 && ic.v > 0.0) {
        return Err(IntegrateError::InvalidInitialCondition(ic));
    }
    Ok(integrate(field, ic, t_max, &IntegrateOptions { stop_at_equilibrium: true, ..*opts })?.terminal)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FteError {
    #[error("the extinction threshold needs 0 < p < 1, got p = {0}")]
    RequiresFractionalP(f64),
    #[error("the extinction threshold needs q = 1, got q = {0}")]
    RequiresUnitQ(f64),
    #[error("initial density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("initial u = {u0} exceeds the carrying capacity a1/b1 = {capacity}")]
    AboveCapacity { u0: f64, capacity: f64 },
}

fn check_fte_exponents(params: &KineticParams) -> Result<(), FteError> {
    if !(params.p > 0.0 && params.p < 1.0) {
        return Err(FteError::RequiresFractionalP(params.p));
    }
    if params.q != 1.0 {
        return Err(FteError::RequiresUnitQ(params.q));
    }
    Ok(())
}

/// Coefficient of `u0^(1-p)` in the sufficient extinction threshold.
pub fn fte_threshold_coefficient(params: &KineticParams) -> Result<f64, FteError> {
    check_fte_exponents(params)?;
    let KineticParams { a1, b1, c1, c2, p, .. } = *params;
    Ok((a1 * c2 + (1.0 - p) * a1 * b1) / ((1.0 - p) * c1 * b1))
}

/// `v0` above this certifies finite-time extinction of `u` from `(u0, v0)`.
pub fn fte_threshold(params: &KineticParams, u0: f64) -> Result<f64, FteError> {
    let coefficient = fte_threshold_coefficient(params)?;
    if !(u0 > 0.0) {
        return Err(FteError::NonPositiveDensity(u0));
    }
    Ok(coefficient * u0.powf(1.0 - params.p))
}

/// Sufficient certificate only: `false` means "not certified".
pub fn predict_fte(params: &KineticParams, ic: State2) -> Result<bool, FteError> {
    let capacity = params.a1 / params.b1;
    let threshold = fte_threshold(params, ic.u)?;
    if ic.u > capacity {
        return Err(FteError::AboveCapacity { u0: ic.u, capacity });
    }
    Ok(ic.v > threshold)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeparatrixError {
    #[error("equilibrium at ({}, {}) is not a saddle", .0.u, .0.v)]
    NotASaddle(State2),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Stable manifold of an interior saddle as a polyline through the saddle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    pub polyline: Vec<State2>,
    pub saddle: Equilibrium,
}

impl Separatrix {
    /// Cumulative arc length at each polyline vertex.
    pub fn arclength(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.polyline.len());
        for (i, pt) in self.polyline.iter().enumerate() {
            if i > 0 {
                acc += pt.distance(&self.polyline[i - 1]);
            }
            out.push(acc);
        }
        out
    }

    pub fn length(&self) -> f64 {
        self.arclength().last().copied().unwrap_or(0.0)
    }

    /// Point and unit tangent at arc length `s`.
    pub fn point_at(&self, s: f64) -> (State2, State2) {
        let arc = self.arclength();
        let n = self.polyline.len();
        let idx = arc.partition_point(|&a| a < s).clamp(1, n - 1);
        let (a, b) = (self.polyline[idx - 1], self.polyline[idx]);
        let seg = arc[idx] - arc[idx - 1];
        let w = if seg > 0.0 { ((s - arc[idx - 1]) / seg).clamp(0.0, 1.0) } else { 0.0 };
        let pt = State2::new(a.u + w * (b.u - a.u), a.v + w * (b.v - a.v));
        let tangent = if seg > 0.0 { State2::new((b.u - a.u) / seg, (b.v - a.v) / seg) } else { State2::new(1.0, 0.0) };
        (pt, tangent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixOptions {
    /// Offset from the saddle along the stable eigenvector.
    pub offset: f64,
    /// Upper corner of the tracing box; the lower corner is the origin.
    pub bounds: State2,
    /// Backward-time horizon per branch.
    pub t_max: f64,
    /// A branch ends within this distance of another equilibrium.
    pub stop_radius: f64,
    /// A branch ends when a coordinate drops below this.
    pub axis_tol: f64,
    pub integrate: IntegrateOptions,
}

impl SeparatrixOptions {
    /// Defaults for `params`: box `[0, 2 a1/b1] x [0, 2 a2/b2]`.
    pub fn for_params(params: &KineticParams) -> Self {
        let cap = params.carrying_capacities();
        Self {
            offset: 1e-6,
            bounds: State2::new(2.0 * cap.u, 2.0 * cap.v),
            t_max: 200.0,
            stop_radius: 1e-5,
            axis_tol: 1e-9,
            integrate: IntegrateOptions { h_max: 0.02, stop_at_equilibrium: false, ..Default::default() },
        }
    }
}

pub fn trace_separatrix(params: &KineticParams, saddle: &Equilibrium) -> Result<Separatrix, SeparatrixError> {
    trace_separatrix_with(params, saddle, &SeparatrixOptions::for_params(params))
}

/// Integrates backward in time from `saddle +- offset * w_s`, where `w_s` is
/// the unit stable eigenvector, until each branch leaves the box, reaches an
/// axis, approaches another equilibrium or runs out of time.
pub fn trace_separatrix_with<F: VectorField + ?Sized>(
    field: &F,
    saddle: &Equilibrium,
    opts: &SeparatrixOptions,
) -> Result<Separatrix, SeparatrixError> {
    let jac = match (saddle.stability, saddle.jacobian) {
        (Stability::Saddle, Some(j)) => j,
        _ => return Err(SeparatrixError::NotASaddle(saddle.point)),
    };
    let (lambda_s, _) = jac.real_eigenvalues().ok_or(SeparatrixError::NotASaddle(saddle.point))?;
    let w = jac.eigenvector(lambda_s);
    let others: Vec<State2> = field
        .equilibria()
        .into_iter()
        .map(|e| e.point)
        .filter(|p| p.distance(&saddle.point) > 10.0 * opts.offset)
        .collect();

    let reversed = Reversed(field);
    let mut branches = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let start = State2::new(saddle.point.u + sign * opts.offset * w.u, saddle.point.v + sign * opts.offset * w.v);
        branches.push(march(&reversed, start, opts, &others)?);
    }
    let [first, second]: [Vec<State2>; 2] = branches.try_into().expect("two branches");
    let mut polyline: Vec<State2> = first.into_iter().rev().collect();
    polyline.push(saddle.point);
    polyline.extend(second);
    Ok(Separatrix { polyline, saddle: *saddle })
}

fn march<F: VectorField + ?Sized>(
    field: &F,
    start: State2,
    opts: &SeparatrixOptions,
    stops: &[State2],
) -> Result<Vec<State2>, IntegrateError> {
    let io = &opts.integrate;
    let mut out = vec![start];
    let mut y = start;
    let mut t = 0.0;
    let mut h = io.h_init.min(io.h_max);
    let mut steps = 0usize;
    let outside =
        |s: State2| s.u <= opts.axis_tol || s.v <= opts.axis_tol || s.u >= opts.bounds.u || s.v >= opts.bounds.v;
    while t < opts.t_max {
        steps += 1;
        if steps > io.max_steps {
            break;
        }
        let (y_new, err) = dopri_step(field, y, h);
        if !y_new.is_finite() {
            return Err(IntegrateError::NonFiniteState { t });
        }
        let e = error_norm(y, y_new, err, io);
        if e > 1.0 {
            h *= step_factor(e);
            if h < io.h_min {
                break;
            }
            continue;
        }
        t += h;
        h = (h * step_factor(e)).min(io.h_max);
        if outside(y_new) {
            // cut the last segment at the box boundary
            out.push(clip_to_box(y, y_new, opts));
            break;
        }
        out.push(y_new);
        y = y_new;
        if stops.iter().any(|p| p.distance(&y) < opts.stop_radius) {
            break;
        }
    }
    Ok(out)
}

fn clip_to_box(inside: State2, outside: State2, opts: &SeparatrixOptions) -> State2 {
    let mut w: f64 = 1.0;
    let du = outside.u - inside.u;
    let dv = outside.v - inside.v;
    let lo = opts.axis_tol;
    if outside.u < lo && du != 0.0 {
        w = w.min((lo - inside.u) / du);
    }
    if outside.v < lo && dv != 0.0 {
        w = w.min((lo - inside.v) / dv);
    }
    if outside.u > opts.bounds.u && du != 0.0 {
        w = w.min((opts.bounds.u - inside.u) / du);
    }
    if outside.v > opts.bounds.v && dv != 0.0 {
        w = w.min((opts.bounds.v - inside.v) / dv);
    }
    let w = w.clamp(0.0, 1.0);
    State2::new(inside.u + w * du, inside.v + w * dv)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComparisonError {
    #[error("rate constants must be positive and finite")]
    NonPositiveRate,
    #[error("exponent must lie in (0, 1), got {0}")]
    ExponentOutOfRange(f64),
    #[error("initial value must be non-negative, got {0}")]
    NegativeInitialValue(f64),
}

/// `dg/dt = -C4 exp(-C6 t) g^alpha` with `C6 = C2 + (1 - alpha) C5`, the
/// equation for `g = y exp(-C5 t)` when `y' = C5 y - C4 exp(-C2 t) y^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOde {
    pub c4: f64,
    pub c5: f64,
    pub c2: f64,
    pub alpha: f64,
    pub g0: f64,
}

impl ComparisonOde {
    pub fn new(c4: f64, c5: f64, c2: f64, alpha: f64, g0: f64) -> Result<Self, ComparisonError> {
        let ode = Self { c4, c5, c2, alpha, g0 };
        ode.validate()?;
        Ok(ode)
    }

    pub fn validate(&self) -> Result<(), ComparisonError> {
        if ![self.c4, self.c5, self.c2].iter().all(|c| *c > 0.0 && c.is_finite()) {
            return Err(ComparisonError::NonPositiveRate);
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ComparisonError::ExponentOutOfRange(self.alpha));
        }
        if !(self.g0 >= 0.0) || !self.g0.is_finite() {
            return Err(ComparisonError::NegativeInitialValue(self.g0));
        }
        Ok(())
    }

    pub fn c6(&self) -> f64 {
        self.c2 + (1.0 - self.alpha) * self.c5
    }

    /// Integration constant `K = g0^(1-alpha) - (1-alpha) C4 / C6`.
    pub fn k(&self) -> f64 {
        let one_minus = 1.0 - self.alpha;
        self.g0.powf(one_minus) - one_minus * self.c4 / self.c6()
    }

    /// Right-hand side, for numerical checks.
    pub fn rate(&self, t: f64, g: f64) -> f64 {
        -self.c4 * (-self.c6() * t).exp() * g.max(0.0).powf(self.alpha)
    }
}

/// Closed-form solution, held at zero once the base turns non-positive.
pub fn comparison_solution(c: &ComparisonOde, t: f64) -> f64 {
    let one_minus = 1.0 - c.alpha;
    let c6 = c.c6();
    let base = one_minus * c.c4 * (-c6 * t).exp() / c6 + c.k();
    if base <= 0.0 {
        0.0
    } else {
        base.powf(1.0 / one_minus)
    }
}

/// `T* = -(1/C6) ln(-K C6 / ((1-alpha) C4))` when `K < 0`, else `None`.
pub fn comparison_extinction_time(c: &ComparisonOde) -> Option<f64> {
    let k = c.k();
    if k >= 0.0 {
        return None;
    }
    let c6 = c.c6();
    let ratio = -k * c6 / ((1.0 - c.alpha) * c.c4);
    Some((-ratio.ln() / c6).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{interior_equilibria, EquilibriumKind};

    fn fig2() -> KineticParams {
        KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.8).unwrap().with_exponents(0.4, 1.0).unwrap()
    }

    #[test]
    fn threshold_values() {
        let k = fig2();
        assert!((fte_threshold(&k, 1.0).unwrap() - 14.4).abs() < 1e-12);
        assert!(fte_threshold(&k, 1e-12).unwrap() < 1e-5);
        let lambda: f64 = 2.7;
        let scaled = fte_threshold(&k, lambda * 0.3).unwrap();
        assert!((scaled - lambda.powf(0.6) * fte_threshold(&k, 0.3).unwrap()).abs() < 1e-12);
        let classical = KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.8).unwrap();
        assert_eq!(fte_threshold(&classical, 1.0), Err(FteError::RequiresFractionalP(1.0)));
        assert_eq!(fte_threshold(&k, 0.0), Err(FteError::NonPositiveDensity(0.0)));
    }

    #[test]
    fn prediction_is_a_strict_inequality() {
        let k = fig2();
        let u0 = 0.5;
        let f = fte_threshold(&k, u0).unwrap();
        assert!(predict_fte(&k, State2::new(u0, 2.0 * f)).unwrap());
        assert!(!predict_fte(&k, State2::new(u0, 0.5 * f)).unwrap());
        assert!(!predict_fte(&k, State2::new(u0, f)).unwrap());
        assert!(matches!(predict_fte(&k, State2::new(2.0, 100.0)), Err(FteError::AboveCapacity { .. })));
    }

    #[test]
    fn origin_is_constant() {
        let traj = integrate(&fig2(), State2::ORIGIN, 10.0, &IntegrateOptions::default()).unwrap();
        assert!(traj.samples.iter().all(|s| s.state == State2::ORIGIN));
        assert!(matches!(traj.terminal, Terminal::Equilibrium(eq) if eq.kind == EquilibriumKind::Origin));
    }

    #[test]
    fn certified_initial_data_goes_extinct() {
        let k = fig2();
        let u0 = 0.8;
        let v0 = 1.5 * fte_threshold(&k, u0).unwrap();
        let traj = integrate(&k, State2::new(u0, v0), 200.0, &IntegrateOptions::default()).unwrap();
        let ev = traj.event_for(Species::U).expect("u goes extinct");
        assert!(ev.t_star > 0.0 && ev.t_star < 200.0);
        let end = traj.terminal.point().unwrap();
        assert!(end.distance(&State2::new(0.0, 3.0)) < 1e-6);
        // zero stays zero after the event
        assert!(traj.samples.iter().filter(|s| s.t >= ev.t_star).all(|s| s.state.u == 0.0));
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert!(traj.samples.iter().all(|s| s.state.is_nonnegative()));
    }

    #[test]
    fn classical_exclusion_reaches_u_axis() {
        let k = KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.8).unwrap();
        let traj = integrate(&k, State2::new(0.2, 2.0), 500.0, &IntegrateOptions::default()).unwrap();
        assert!(traj.events.is_empty());
        assert!(traj.terminal.point().unwrap().distance(&State2::new(1.8, 0.0)) < 1e-6);
    }

    #[test]
    fn starting_on_a_sink_locks_immediately() {
        let k = KineticParams::classical(1.0, 2.0, 1.0, 1.0, 0.3, 1.8).unwrap();
        let sink = interior_equilibria(&k)[0];
        let term = classify_basin(&k, sink.point, 10.0, &IntegrateOptions::default()).unwrap();
        assert_eq!(term, Terminal::Equilibrium(sink));
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = fig2();
        let opts = IntegrateOptions::default();
        assert!(matches!(
            integrate(&k, State2::new(-1.0, 1.0), 1.0, &opts),
            Err(IntegrateError::InvalidInitialCondition(_))
        ));
        assert!(matches!(integrate(&k, State2::new(1.0, 1.0), 0.0, &opts), Err(IntegrateError::InvalidHorizon(_))));
        assert!(classify_basin(&k, State2::new(0.0, 1.0), 1.0, &opts).is_err());
    }

    #[test]
    fn symmetric_strong_separatrix_is_the_diagonal() {
        let k = KineticParams::classical(1.0, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        let saddle = interior_equilibria(&k)[0];
        assert_eq!(saddle.stability, Stability::Saddle);
        let sep = trace_separatrix(&k, &saddle).unwrap();
        assert!(sep.polyline.iter().all(|p| (p.u - p.v).abs() < 1e-8), "off diagonal");
        let first = sep.polyline.first().unwrap();
        let last = sep.polyline.last().unwrap();
        let (lo, hi) = if first.u < last.u { (first, last) } else { (last, first) };
        assert!(lo.u < 1e-3);
        assert!((hi.u - 2.0).abs() < 1e-9);
        let arc = sep.arclength();
        assert!(arc.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn not_a_saddle() {
        let k = KineticParams::classical(1.0, 2.0, 1.0, 1.0, 0.3, 1.8).unwrap();
        let sink = interior_equilibria(&k)[0];
        assert!(matches!(trace_separatrix(&k, &sink), Err(SeparatrixError::NotASaddle(_))));
    }

    #[test]
    fn comparison_closed_form_edges() {
        let zero = ComparisonOde::new(1.0, 1.0, 0.5, 0.5, 0.0).unwrap();
        assert_eq!(comparison_extinction_time(&zero), Some(0.0));
        assert_eq!(comparison_solution(&zero, 0.3), 0.0);
        // g0^(1-a) = (1-a) C4/C6 exactly: asymptotic decay only
        let border = ComparisonOde::new(1.0, 1.0, 0.5, 0.5, 0.25).unwrap();
        assert_eq!(border.c6(), 1.0);
        assert_eq!(comparison_extinction_time(&border), None);
        let big = ComparisonOde::new(1.0, 1.0, 0.5, 0.5, 4.0).unwrap();
        assert_eq!(comparison_extinction_time(&big), None);
        let small = ComparisonOde::new(1.0, 1.0, 0.5, 0.5, 0.09).unwrap();
        let t_star = comparison_extinction_time(&small).unwrap();
        assert!(comparison_solution(&small, t_star * (1.0 - 1e-9)) >= 0.0);
        assert!(comparison_solution(&small, t_star * (1.0 - 1e-9)) < 1e-12);
        assert_eq!(comparison_solution(&small, t_star * 1.01), 0.0);
        assert!((comparison_solution(&small, 0.0) - 0.09).abs() < 1e-15);
        assert!(ComparisonOde::new(1.0, 1.0, 0.5, 1.0, 0.1).is_err());
    }
}
