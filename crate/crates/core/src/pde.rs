//! One-dimensional reaction-diffusion competition with zero-flux boundaries.
//!
//! Space is discretized on a cell-centred grid `x_i = x0 + (i + 1/2) dx`
//! with mirror ghost cells, so the discrete Laplacian is in flux form and its
//! plain sum telescopes to zero. Time stepping is either classical RK4
//! (step bounded by the diffusive CFL limit) or an additive IMEX
//! Runge-Kutta scheme, ARS(4,4,3), that treats diffusion implicitly and
//! reaction explicitly. Both apply the pointwise extinction clamp used by the
//! ODE integrator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::{nonneg_pow, KineticParams, ParamError, Regime, Species, State2};
use crate::ode::{FteEvent, EXTINCTION_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("grid needs at least 8 points on a non-empty interval, got n = {n} on [{x0}, {x1}]")]
    InvalidGrid { x0: f64, x1: f64, n: usize },
    #[error("field has {got} values, grid has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("resource field must be finite and non-negative (value {value} at index {index})")]
    InvalidResource { index: usize, value: f64 },
    #[error("initial {species:?} field must be finite and non-negative (value {value} at index {index})")]
    InvalidInitialField { species: Species, index: usize, value: f64 },
    #[error("diffusivity `{name}` must be positive and finite, got {value}")]
    InvalidDiffusivity { name: &'static str, value: f64 },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("stable time step {dt} is below the minimum {dt_min}")]
    CflViolation { dt: f64, dt_min: f64 },
    #[error("field became non-finite at t = {t}")]
    NonFiniteField { t: f64 },
    #[error("no steady state reached by t = {t} (residual {residual})")]
    NonConvergence { t: f64, residual: f64 },
}

/// Uniform cell-centred grid on `[x0, x1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub x1: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x0: f64, x1: f64, n: usize) -> Result<Self, PdeError> {
        if n < 8 || !(x1 > x0) || !x0.is_finite() || !x1.is_finite() {
            return Err(PdeError::InvalidGrid { x0, x1, n });
        }
        Ok(Self { x0, x1, n })
    }

    pub fn length(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }

    fn check_len(&self, len: usize) -> Result<(), PdeError> {
        if len == self.n {
            Ok(())
        } else {
            Err(PdeError::ShapeMismatch { expected: self.n, got: len })
        }
    }
}

/// Resource density `m(x_i)` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceField {
    values: Vec<f64>,
}

impl ResourceField {
    pub fn new(values: Vec<f64>) -> Result<Self, PdeError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(PdeError::InvalidResource { index, value });
        }
        Ok(Self { values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Grid, f: F) -> Result<Self, PdeError> {
        Self::new(grid.sample(f))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Reaction {
    /// Constant-coefficient kinetics.
    Constant(KineticParams),
    /// `m u - u^2 - b u^p v`, `m v - v^2 - c u v`.
    Inhomogeneous { b: f64, c: f64, p: f64, m: ResourceField },
}

impl Reaction {
    fn validate(&self, n: usize) -> Result<(), PdeError> {
        match self {
            Reaction::Constant(k) => k.validate().map_err(PdeError::from),
            Reaction::Inhomogeneous { b, c, p, m } => {
                for (name, value) in [("b", *b), ("c", *c)] {
                    if !(value > 0.0 && value.is_finite()) {
                        return Err(ParamError::NonPositive { name, value }.into());
                    }
                }
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(ParamError::ExponentOutOfRange { name: "p", value: *p }.into());
                }
                if m.values.len() != n {
                    return Err(PdeError::ShapeMismatch { expected: n, got: m.values.len() });
                }
                Ok(())
            }
        }
    }

    #[inline]
    fn eval(&self, i: usize, u: f64, v: f64) -> (f64, f64) {
        match self {
            Reaction::Constant(k) => (
                k.a1 * u - k.b1 * u * u - k.c1 * nonneg_pow(u, k.p) * v,
                k.a2 * v - k.b2 * v * v - k.c2 * u * nonneg_pow(v, k.q),
            ),
            Reaction::Inhomogeneous { b, c, p, m } => {
                let mi = m.values[i];
                (mi * u - u * u - b * nonneg_pow(u, *p) * v, mi * v - v * v - c * u * v)
            }
        }
    }

    /// Growth plus intra- plus interspecific coefficient magnitudes.
    #[inline]
    fn rate(&self, i: usize, u: f64, v: f64) -> f64 {
        let (u, v) = (u.abs(), v.abs());
        match self {
            Reaction::Constant(k) => (k.a1 + k.b1 * u + k.c1 * v).max(k.a2 + k.b2 * v + k.c2 * u),
            Reaction::Inhomogeneous { b, c, m, .. } => {
                let mi = m.values[i];
                (mi + u + b * v).max(mi + v + c * u)
            }
        }
    }

    fn exponent(&self, species: Species) -> f64 {
        match (self, species) {
            (Reaction::Constant(k), s) => k.exponent(s),
            (Reaction::Inhomogeneous { p, .. }, Species::U) => *p,
            (Reaction::Inhomogeneous { .. }, Species::V) => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeParams {
    pub reaction: Reaction,
    pub d1: f64,
    pub d2: f64,
}

impl PdeParams {
    pub fn validate(&self, grid: &Grid) -> Result<(), PdeError> {
        for (name, value) in [("d1", self.d1), ("d2", self.d2)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PdeError::InvalidDiffusivity { name, value });
            }
        }
        self.reaction.validate(grid.n)
    }

    fn diffusivity(&self, species: Species) -> f64 {
        match species {
            Species::U => self.d1,
            Species::V => self.d2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeState {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PdeState {
    pub fn new(grid: Grid, u: Vec<f64>, v: Vec<f64>) -> Result<Self, PdeError> {
        grid.check_len(u.len())?;
        grid.check_len(v.len())?;
        for (species, field) in [(Species::U, &u), (Species::V, &v)] {
            if let Some((index, &value)) = field.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && x.is_finite())) {
                return Err(PdeError::InvalidInitialField { species, index, value });
            }
        }
        Ok(Self { grid, u, v })
    }

    pub fn constant(grid: Grid, value: State2) -> Result<Self, PdeError> {
        Self::new(grid, vec![value.u; grid.n], vec![value.v; grid.n])
    }

    pub fn field(&self, species: Species) -> &[f64] {
        match species {
            Species::U => &self.u,
            Species::V => &self.v,
        }
    }
}

/// Zero-flux Laplacian on a cell-centred grid (mirror ghost cells).
pub fn laplacian_neumann(field: &[f64], dx: f64) -> Vec<f64> {
    let mut out = vec![0.0; field.len()];
    laplacian_into(field, dx, &mut out);
    out
}

fn laplacian_into(field: &[f64], dx: f64, out: &mut [f64]) {
    let n = field.len();
    let inv = 1.0 / (dx * dx);
    if n == 0 {
        return;
    }
    if n == 1 {
        out[0] = 0.0;
        return;
    }
    // flux form: each interface flux is added to one cell and removed from the other
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..n - 1 {
        let flux = (field[i + 1] - field[i]) * inv;
        out[i] += flux;
        out[i + 1] -= flux;
    }
}

/// Solve `(I - k L) y = rhs` for the zero-flux Laplacian `L`, with `k = coef/dx^2`.
fn solve_implicit_diffusion(rhs: &[f64], k: f64, y: &mut [f64], scratch: &mut [f64]) {
    let n = rhs.len();
    // Thomas algorithm; off-diagonals are -k, diagonal 1 + k at the ends, 1 + 2k inside
    let diag = |i: usize| if i == 0 || i == n - 1 { 1.0 + k } else { 1.0 + 2.0 * k };
    let mut denom = diag(0);
    scratch[0] = -k / denom;
    y[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag(i) + k * scratch[i - 1];
        scratch[i] = -k / denom;
        y[i] = (rhs[i] + k * y[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        y[i] -= scratch[i] * y[i + 1];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Explicit when the diffusive limit is not the binding one, IMEX otherwise.
    Auto,
    ExplicitRk4,
    Imex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeOptions {
    pub scheme: Scheme,
    /// Diffusive limit `dt <= safety dx^2 / (2 max d)` for the explicit scheme.
    pub safety: f64,
    /// Reaction limit `dt <= reaction_safety / max rate`.
    pub reaction_safety: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub extinction_threshold: f64,
    pub tol_out: f64,
    pub tol_pos: f64,
    /// Bound on `sup |dw/dt| / sup w` for both fields.
    pub tol_steady: f64,
    /// Steps between outcome checks.
    pub check_every: usize,
    pub stop_on_outcome: bool,
    pub snapshot_times: Vec<f64>,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Auto,
            safety: 0.4,
            reaction_safety: 0.1,
            dt_max: f64::INFINITY,
            dt_min: 1e-12,
            extinction_threshold: EXTINCTION_THRESHOLD,
            tol_out: 1e-4,
            tol_pos: 1e-4,
            tol_steady: 1e-7,
            check_every: 8,
            stop_on_outcome: true,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeLabel {
    UWins,
    VWins,
    Coexist,
    Undecided,
}

impl OutcomeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeLabel::UWins => "UWins",
            OutcomeLabel::VWins => "VWins",
            OutcomeLabel::Coexist => "Coexist",
            OutcomeLabel::Undecided => "Undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeOutcome {
    pub label: OutcomeLabel,
    pub t_reached: f64,
    /// Species whose whole field was clamped to zero, and when.
    pub extinctions: Vec<FteEvent>,
}

impl PdeOutcome {
    pub fn fte_flag(&self) -> bool {
        !self.extinctions.is_empty()
    }

    pub fn extinction_of(&self, species: Species) -> Option<&FteEvent> {
        self.extinctions.iter().find(|e| e.species == species)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeRun {
    pub snapshots: Vec<Snapshot>,
    pub outcome: PdeOutcome,
    pub final_state: PdeState,
    pub steps: usize,
    pub scheme: Scheme,
}

/// Largest stable step for the explicit scheme's diffusion part.
pub fn diffusive_dt_limit(params: &PdeParams, grid: &Grid, safety: f64) -> f64 {
    let dx = grid.dx();
    safety * dx * dx / (2.0 * params.d1.max(params.d2))
}

struct Workspace {
    stage_u: Vec<f64>,
    stage_v: Vec<f64>,
    rhs_u: Vec<f64>,
    rhs_v: Vec<f64>,
    scratch: Vec<f64>,
    lap: Vec<f64>,
    // per-stage reaction and diffusion terms
    react: Vec<(Vec<f64>, Vec<f64>)>,
    diff: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let pair = || (vec![0.0; n], vec![0.0; n]);
        Self {
            stage_u: vec![0.0; n],
            stage_v: vec![0.0; n],
            rhs_u: vec![0.0; n],
            rhs_v: vec![0.0; n],
            scratch: vec![0.0; n],
            lap: vec![0.0; n],
            react: (0..5).map(|_| pair()).collect(),
            diff: (0..5).map(|_| pair()).collect(),
        }
    }
}

// ARS(4,4,3): explicit rows include stage 0, implicit rows start at stage 1
const IMEX_GAMMA: f64 = 0.5;
const IMEX_EXPLICIT: [[f64; 4]; 4] = [
    [0.5, 0.0, 0.0, 0.0],
    [11.0 / 18.0, 1.0 / 18.0, 0.0, 0.0],
    [5.0 / 6.0, -5.0 / 6.0, 0.5, 0.0],
    [0.25, 1.75, 0.75, -1.75],
];
const IMEX_IMPLICIT: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0 / 6.0, 0.0, 0.0], [-0.5, 0.5, 0.0], [1.5, -1.5, 0.5]];

/// Reaction-diffusion right-hand side, written into `out`.
fn full_rhs(params: &PdeParams, dx: f64, u: &[f64], v: &[f64], lap: &mut [f64], out_u: &mut [f64], out_v: &mut [f64]) {
    laplacian_into(u, dx, lap);
    for i in 0..u.len() {
        out_u[i] = params.d1 * lap[i];
    }
    laplacian_into(v, dx, lap);
    for i in 0..v.len() {
        out_v[i] = params.d2 * lap[i];
    }
    for i in 0..u.len() {
        let (ru, rv) = params.reaction.eval(i, u[i], v[i]);
        out_u[i] += ru;
        out_v[i] += rv;
    }
}

fn reaction_into(params: &PdeParams, u: &[f64], v: &[f64], out: &mut (Vec<f64>, Vec<f64>)) {
    for i in 0..u.len() {
        let (ru, rv) = params.reaction.eval(i, u[i], v[i]);
        out.0[i] = ru;
        out.1[i] = rv;
    }
}

fn rk4_step(params: &PdeParams, dx: f64, u: &mut [f64], v: &mut [f64], dt: f64, ws: &mut Workspace) {
    let n = u.len();
    let weights = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
    let offsets = [0.0, 0.5, 0.5, 1.0];
    ws.rhs_u.copy_from_slice(u);
    ws.rhs_v.copy_from_slice(v);
    let mut k = (vec![0.0; n], vec![0.0; n]);
    for stage in 0..4 {
        if stage == 0 {
            ws.stage_u.copy_from_slice(u);
            ws.stage_v.copy_from_slice(v);
        } else {
            for i in 0..n {
                ws.stage_u[i] = u[i] + offsets[stage] * dt * k.0[i];
                ws.stage_v[i] = v[i] + offsets[stage] * dt * k.1[i];
            }
        }
        full_rhs(params, dx, &ws.stage_u, &ws.stage_v, &mut ws.lap, &mut k.0, &mut k.1);
        for i in 0..n {
            ws.rhs_u[i] += weights[stage] * dt * k.0[i];
            ws.rhs_v[i] += weights[stage] * dt * k.1[i];
        }
    }
    u.copy_from_slice(&ws.rhs_u);
    v.copy_from_slice(&ws.rhs_v);
}

fn imex_step(params: &PdeParams, dx: f64, u: &mut [f64], v: &mut [f64], dt: f64, ws: &mut Workspace) {
    let n = u.len();
    let ku = params.d1 * IMEX_GAMMA * dt / (dx * dx);
    let kv = params.d2 * IMEX_GAMMA * dt / (dx * dx);
    reaction_into(params, u, v, &mut ws.react[0]);
    for stage in 1..=4 {
        let row_e = &IMEX_EXPLICIT[stage - 1];
        let row_i = &IMEX_IMPLICIT[stage - 1];
        for i in 0..n {
            let mut ru = u[i];
            let mut rv = v[i];
            for j in 0..stage {
                ru += dt * row_e[j] * ws.react[j].0[i];
                rv += dt * row_e[j] * ws.react[j].1[i];
            }
            for j in 1..stage {
                ru += dt * row_i[j - 1] * ws.diff[j].0[i];
                rv += dt * row_i[j - 1] * ws.diff[j].1[i];
            }
            ws.rhs_u[i] = ru;
            ws.rhs_v[i] = rv;
        }
        solve_implicit_diffusion(&ws.rhs_u, ku, &mut ws.stage_u, &mut ws.scratch);
        solve_implicit_diffusion(&ws.rhs_v, kv, &mut ws.stage_v, &mut ws.scratch);
        if stage == 4 {
            break;
        }
        let scale = 1.0 / (dt * IMEX_GAMMA);
        let (du, dv) = &mut ws.diff[stage];
        for i in 0..n {
            du[i] = (ws.stage_u[i] - ws.rhs_u[i]) * scale;
            dv[i] = (ws.stage_v[i] - ws.rhs_v[i]) * scale;
        }
        let (su, sv) = (std::mem::take(&mut ws.stage_u), std::mem::take(&mut ws.stage_v));
        reaction_into(params, &su, &sv, &mut ws.react[stage]);
        ws.stage_u = su;
        ws.stage_v = sv;
    }
    u.copy_from_slice(&ws.stage_u);
    v.copy_from_slice(&ws.stage_v);
}

/// Pointwise clamp: negative values go to zero, and values under `eps` go to
/// zero when the full right-hand side at `eps` is still negative.
fn clamp_field(params: &PdeParams, species: Species, dx: f64, own: &mut [f64], other: &[f64], eps: f64) {
    let n = own.len();
    let d = params.diffusivity(species);
    let nonsmooth = params.reaction.exponent(species) < 1.0;
    let inv = 1.0 / (dx * dx);
    for i in 0..n {
        if own[i] < 0.0 {
            own[i] = 0.0;
            continue;
        }
        if !nonsmooth || own[i] >= eps || own[i] == 0.0 {
            continue;
        }
        let left = if i == 0 { eps } else { own[i - 1] };
        let right = if i + 1 == n { eps } else { own[i + 1] };
        let diffusion = d * (left + right - 2.0 * eps) * inv;
        let (ru, rv) = match species {
            Species::U => params.reaction.eval(i, eps, other[i]),
            Species::V => params.reaction.eval(i, other[i], eps),
        };
        let reaction = if species == Species::U { ru } else { rv };
        if diffusion + reaction < 0.0 {
            own[i] = 0.0;
        }
    }
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Cached single-species steady states used for the outcome test.
struct Limits {
    u: Option<Vec<f64>>,
    v: Option<Vec<f64>>,
}

impl Limits {
    fn get(&mut self, params: &PdeParams, grid: &Grid, species: Species) -> Result<&[f64], PdeError> {
        let slot = match species {
            Species::U => &mut self.u,
            Species::V => &mut self.v,
        };
        if slot.is_none() {
            let profile = match &params.reaction {
                Reaction::Constant(k) => {
                    let cap = k.carrying_capacities();
                    vec![cap.get(species); grid.n]
                }
                Reaction::Inhomogeneous { m, .. } => single_species_steady_state(params.diffusivity(species), m, grid)?,
            };
            *slot = Some(profile);
        }
        Ok(slot.as_deref().expect("filled above"))
    }
}

/// Integrate the system from `init` to `t_end` (or until the outcome is
/// decided, if `opts.stop_on_outcome`).
pub fn simulate_pde(params: &PdeParams, init: &PdeState, t_end: f64, opts: &PdeOptions) -> Result<PdeRun, PdeError> {
    let grid = init.grid;
    Grid::new(grid.x0, grid.x1, grid.n)?;
    params.validate(&grid)?;
    PdeState::new(grid, init.u.clone(), init.v.clone())?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(PdeError::InvalidHorizon(t_end));
    }
    let n = grid.n;
    let dx = grid.dx();
    let dt_cfl = diffusive_dt_limit(params, &grid, opts.safety);
    let mut u = init.u.clone();
    let mut v = init.v.clone();
    let mut ws = Workspace::new(n);
    let mut limits = Limits { u: None, v: None };
    let mut extinct = [u.iter().all(|&x| x == 0.0), v.iter().all(|&x| x == 0.0)];
    let mut extinctions = Vec::new();
    let mut snapshot_times: Vec<f64> =
        opts.snapshot_times.iter().copied().filter(|t| *t > 0.0 && *t <= t_end).collect();
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();
    let mut next_snapshot = 0usize;
    let mut snapshots = vec![Snapshot { t: 0.0, u: u.clone(), v: v.clone() }];
    let mut rhs_u = vec![0.0; n];
    let mut rhs_v = vec![0.0; n];

    let mut t = 0.0;
    let mut steps = 0usize;
    let mut label = OutcomeLabel::Undecided;
    let mut scheme_used = opts.scheme;
    while t < t_end {
        let max_rate = (0..n).map(|i| params.reaction.rate(i, u[i], v[i])).fold(0.0, f64::max);
        let dt_reaction = if max_rate > 0.0 { opts.reaction_safety / max_rate } else { f64::INFINITY };
        let scheme = match opts.scheme {
            Scheme::Auto if dt_cfl >= dt_reaction => Scheme::ExplicitRk4,
            Scheme::Auto => Scheme::Imex,
            s => s,
        };
        scheme_used = scheme;
        let mut dt = dt_reaction.min(opts.dt_max);
        if scheme == Scheme::ExplicitRk4 {
            dt = dt.min(dt_cfl);
        }
        if dt < opts.dt_min {
            return Err(PdeError::CflViolation { dt, dt_min: opts.dt_min });
        }
        let mut target = t_end;
        if let Some(&ts) = snapshot_times.get(next_snapshot) {
            target = target.min(ts);
        }
        let mut hit_target = false;
        if t + dt >= target {
            dt = target - t;
            hit_target = true;
        }

        match scheme {
            Scheme::ExplicitRk4 => rk4_step(params, dx, &mut u, &mut v, dt, &mut ws),
            _ => imex_step(params, dx, &mut u, &mut v, dt, &mut ws),
        }
        t = if hit_target { target } else { t + dt };
        steps += 1;
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(PdeError::NonFiniteField { t });
        }
        clamp_field(params, Species::U, dx, &mut u, &v, opts.extinction_threshold);
        clamp_field(params, Species::V, dx, &mut v, &u, opts.extinction_threshold);
        for (idx, species) in [Species::U, Species::V].into_iter().enumerate() {
            let field = if idx == 0 { &mut u } else { &mut v };
            if extinct[idx] {
                field.iter_mut().for_each(|x| *x = 0.0);
            } else if field.iter().all(|&x| x == 0.0) {
                extinct[idx] = true;
                extinctions.push(FteEvent { species, t_star: t });
            }
        }

        while snapshot_times.get(next_snapshot).is_some_and(|&ts| ts <= t) {
            snapshots.push(Snapshot { t, u: u.clone(), v: v.clone() });
            next_snapshot += 1;
        }

        if steps.is_multiple_of(opts.check_every.max(1)) || t >= t_end {
            label = classify_state(params, &grid, &u, &v, opts, &mut limits, &mut ws.lap, &mut rhs_u, &mut rhs_v)?;
            if label != OutcomeLabel::Undecided && opts.stop_on_outcome {
                break;
            }
        }
    }
    if snapshots.last().is_none_or(|s| s.t < t) {
        snapshots.push(Snapshot { t, u: u.clone(), v: v.clone() });
    }
    Ok(PdeRun {
        snapshots,
        outcome: PdeOutcome { label, t_reached: t, extinctions },
        final_state: PdeState { grid, u, v },
        steps,
        scheme: scheme_used,
    })
}

#[allow(clippy::too_many_arguments)]
fn classify_state(
    params: &PdeParams,
    grid: &Grid,
    u: &[f64],
    v: &[f64],
    opts: &PdeOptions,
    limits: &mut Limits,
    lap: &mut [f64],
    rhs_u: &mut [f64],
    rhs_v: &mut [f64],
) -> Result<OutcomeLabel, PdeError> {
    let (su, sv) = (sup_norm(u), sup_norm(v));
    if sv < opts.tol_out && sup_distance(u, limits.get(params, grid, Species::U)?) < opts.tol_out {
        return Ok(OutcomeLabel::UWins);
    }
    if su < opts.tol_out && sup_distance(v, limits.get(params, grid, Species::V)?) < opts.tol_out {
        return Ok(OutcomeLabel::VWins);
    }
    if su > opts.tol_pos && sv > opts.tol_pos {
        full_rhs(params, grid.dx(), u, v, lap, rhs_u, rhs_v);
        // per unit density, so a slow exponential decay is not mistaken for a steady state
        if (sup_norm(rhs_u) / su).max(sup_norm(rhs_v) / sv) < opts.tol_steady {
            return Ok(OutcomeLabel::Coexist);
        }
    }
    Ok(OutcomeLabel::Undecided)
}

/// Positive steady state of `w_t = d w_xx + m w - w^2`, by time marching from
/// `mean(m) + 0.1` until the sup-norm rate drops below 1e-9.
pub fn single_species_steady_state(d: f64, m: &ResourceField, grid: &Grid) -> Result<Vec<f64>, PdeError> {
    const RATE_TOL: f64 = 1e-9;
    const T_MAX: f64 = 1e5;
    if !(d > 0.0 && d.is_finite()) {
        return Err(PdeError::InvalidDiffusivity { name: "d", value: d });
    }
    grid.check_len(m.values.len())?;
    let n = grid.n;
    let dx = grid.dx();
    let params = PdeParams { reaction: Reaction::Inhomogeneous { b: 1.0, c: 1.0, p: 1.0, m: m.clone() }, d1: d, d2: d };
    let mut w = vec![m.mean() + 0.1; n];
    let mut zero = vec![0.0; n];
    let mut ws = Workspace::new(n);
    let mut lap = vec![0.0; n];
    let mut rate = vec![0.0; n];
    let mut unused = vec![0.0; n];
    let mut t = 0.0;
    let mut residual = f64::INFINITY;
    let mut step = 0usize;
    while t < T_MAX {
        if step.is_multiple_of(8) {
            full_rhs(&params, dx, &w, &zero, &mut lap, &mut rate, &mut unused);
            residual = sup_norm(&rate);
            if residual < RATE_TOL {
                return Ok(w);
            }
        }
        let max_rate = (0..n).map(|i| m.values[i] + w[i].abs()).fold(0.0, f64::max);
        let dt = if max_rate > 0.0 { 0.1 / max_rate } else { 1.0 };
        imex_step(&params, dx, &mut w, &mut zero, dt, &mut ws);
        zero.iter_mut().for_each(|x| *x = 0.0);
        w.iter_mut().for_each(|x| *x = x.max(0.0));
        if w.iter().any(|x| !x.is_finite()) {
            return Err(PdeError::NonFiniteField { t });
        }
        t += dt;
        step += 1;
    }
    Err(PdeError::NonConvergence { t, residual })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecoveryError {
    #[error("recovery conditions need p < 1, got p = {0}")]
    RequiresFractionalP(f64),
    #[error("recovery conditions need strong competition, regime is {0:?}")]
    NotStrongCompetition(Regime),
    #[error("u0 and v0 fields differ in length ({0} vs {1})")]
    ShapeMismatch(usize, usize),
    #[error("no admissible band at u0 = {u0}: f1 = {f1}, f2 = {f2}, u* = {u_star}")]
    EmptyBand { u0: f64, f1: f64, f2: f64, u_star: f64 },
}

/// Pointwise and parametric checks for extinction-driven recovery of `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Coefficient of `u0^(1-p)` in the lower bound `f1`.
    pub f1_coefficient: f64,
    /// Slope of the chord `f2` from the origin to the interior saddle.
    pub f2_slope: f64,
    pub u_star: f64,
    pub v_star: f64,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    /// `f1(u0) <= v0 <= f2(u0)` per point.
    pub cond1: Vec<bool>,
    /// `u0 <= u*` per point.
    pub cond12: Vec<bool>,
    pub cond123_lhs: f64,
    pub cond123_rhs: f64,
    pub cond123: bool,
    /// Whether concavity of the separatrix was checked (it is not).
    pub concavity_verified: bool,
}

impl RecoveryReport {
    pub fn all_pointwise(&self) -> bool {
        self.cond1.iter().all(|c| *c) && self.cond12.iter().all(|c| *c)
    }
}

fn recovery_constants(k: &KineticParams) -> Result<(f64, f64, f64, f64), RecoveryError> {
    if !(k.p < 1.0) {
        return Err(RecoveryError::RequiresFractionalP(k.p));
    }
    let regime = k.regime();
    if regime != Regime::StrongCompetition {
        return Err(RecoveryError::NotStrongCompetition(regime));
    }
    let f1c = (k.a1 * k.c2 + (1.0 - k.p) * k.a1 * k.b1) / ((1.0 - k.p) * k.c1 * k.b1);
    let f2s = (k.c2 * k.a1 - k.b1 * k.a2) / (k.c1 * k.a2 - k.a1 * k.b2);
    let det = k.c1 * k.c2 - k.b1 * k.b2;
    let u_star = (k.c1 * k.a2 - k.a1 * k.b2) / det;
    let v_star = (k.c2 * k.a1 - k.b1 * k.a2) / det;
    Ok((f1c, f2s, u_star, v_star))
}

pub fn check_recovery_conditions(k: &KineticParams, u0: &[f64], v0: &[f64]) -> Result<RecoveryReport, RecoveryError> {
    let (f1c, f2s, u_star, v_star) = recovery_constants(k)?;
    if u0.len() != v0.len() {
        return Err(RecoveryError::ShapeMismatch(u0.len(), v0.len()));
    }
    let f1: Vec<f64> = u0.iter().map(|&u| f1c * nonneg_pow(u, 1.0 - k.p)).collect();
    let f2: Vec<f64> = u0.iter().map(|&u| f2s * u).collect();
    let cond1 = (0..u0.len()).map(|i| f1[i] <= v0[i] && v0[i] <= f2[i]).collect();
    let cond12 = u0.iter().map(|&u| u <= u_star).collect();
    let rhs = f2s * u_star.powf(k.p);
    Ok(RecoveryReport {
        f1_coefficient: f1c,
        f2_slope: f2s,
        u_star,
        v_star,
        f1,
        f2,
        cond1,
        cond12,
        cond123_lhs: f1c,
        cond123_rhs: rhs,
        cond123: f1c <= rhs,
        concavity_verified: false,
    })
}

/// A point `(u0, f1 + fraction (f2 - f1))` inside the recovery band.
pub fn recovery_band_point(k: &KineticParams, u0: f64, fraction: f64) -> Result<State2, RecoveryError> {
    let (f1c, f2s, u_star, _) = recovery_constants(k)?;
    let f1 = f1c * nonneg_pow(u0, 1.0 - k.p);
    let f2 = f2s * u0;
    if !(u0 > 0.0 && u0 <= u_star && f1 < f2) {
        return Err(RecoveryError::EmptyBand { u0, f1, f2, u_star });
    }
    Ok(State2::new(u0, f1 + fraction.clamp(0.0, 1.0) * (f2 - f1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig7(p: f64) -> KineticParams {
        KineticParams::classical(1.1, 1.0, 1.0, 1.0, 1.2, 2.0).unwrap().with_exponents(p, 1.0).unwrap()
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let lap = laplacian_neumann(&[2.5; 16], 0.1);
        assert!(lap.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn laplacian_sum_telescopes() {
        let grid = Grid::new(0.0, 1.0, 97).unwrap();
        let f = grid.sample(|x| (7.0 * x).sin() + x * x * x);
        let s: f64 = laplacian_neumann(&f, grid.dx()).iter().sum();
        assert!(s.abs() < 1e-12 * 97.0 / grid.dx().powi(2), "{s}");
    }

    #[test]
    fn implicit_solve_inverts_operator() {
        let n = 20;
        let dx = 0.05;
        let y: Vec<f64> = (0..n).map(|i| ((i * i) as f64).sin()).collect();
        let coef = 0.3;
        let lap = laplacian_neumann(&y, dx);
        let rhs: Vec<f64> = (0..n).map(|i| y[i] - coef * lap[i]).collect();
        let mut out = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        solve_implicit_diffusion(&rhs, coef / (dx * dx), &mut out, &mut scratch);
        assert!(sup_distance(&out, &y) < 1e-12);
    }

    #[test]
    fn implicit_diffusion_conserves_mass() {
        // with no reaction both schemes are compositions of L and (I - kL)^-1
        let grid = Grid::new(0.0, 1.0, 64).unwrap();
        let mut y = grid.sample(|x| 1.0 + (3.0 * x).cos() + x);
        let mut out = vec![0.0; 64];
        let mut scratch = vec![0.0; 64];
        for k in [1e-3, 1.0, 1e4] {
            let before: f64 = y.iter().sum();
            solve_implicit_diffusion(&y, k, &mut out, &mut scratch);
            assert!((out.iter().sum::<f64>() - before).abs() < 1e-12 * before.abs().max(1.0));
            y.copy_from_slice(&out);
        }
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        let grid = Grid::new(0.0, 1.0, 256).unwrap();
        let f = grid.sample(|x| (std::f64::consts::PI * x).cos());
        let lap = laplacian_neumann(&f, grid.dx());
        let k2 = std::f64::consts::PI.powi(2);
        let err = lap.iter().zip(&f).map(|(l, y)| (l + k2 * y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn recovery_constants_for_reference_set() {
        let u0 = [0.05, 0.07];
        let v0 = [0.5, 0.5];
        let r = check_recovery_conditions(&fig7(0.1), &u0, &v0).unwrap();
        assert!((r.u_star - 0.1 / 1.4).abs() < 1e-12);
        assert!((r.v_star - 1.2 / 1.4).abs() < 1e-12);
        assert!((r.f2_slope - 12.0).abs() < 1e-12);
        assert!((r.cond123_lhs - 3.19 / 1.08).abs() < 1e-12);
        assert!((r.cond123_rhs - 12.0 * (0.1f64 / 1.4).powf(0.1)).abs() < 1e-12);
        assert!(r.cond123);
        assert!(!r.concavity_verified);
        assert_eq!(r.cond12, vec![true, true]);
        assert!(matches!(check_recovery_conditions(&fig7(1.0), &u0, &v0), Err(RecoveryError::RequiresFractionalP(_))));
        let weak = KineticParams::classical(1.0, 2.0, 1.0, 1.0, 0.3, 1.8).unwrap().with_exponents(0.5, 1.0).unwrap();
        assert!(matches!(check_recovery_conditions(&weak, &u0, &v0), Err(RecoveryError::NotStrongCompetition(_))));
        let tiny = check_recovery_conditions(&fig7(0.1), &[1e-12], &[1e-3]).unwrap();
        assert!(tiny.f1[0] < 1e-9);
    }

    #[test]
    fn band_point_lies_in_band() {
        let k = fig7(0.1);
        let pt = recovery_band_point(&k, 0.05, 0.25).unwrap();
        let r = check_recovery_conditions(&k, &[pt.u], &[pt.v]).unwrap();
        assert!(r.all_pointwise());
        assert!(recovery_band_point(&k, 0.2, 0.5).is_err());
    }

    #[test]
    fn steady_state_of_constant_resource() {
        let grid = Grid::new(0.0, 1.0, 32).unwrap();
        let m = ResourceField::new(vec![0.7; 32]).unwrap();
        let w = single_species_steady_state(0.01, &m, &grid).unwrap();
        assert!(w.iter().all(|x| (x - 0.7).abs() < 1e-8));
    }

    #[test]
    fn steady_state_averages_under_fast_diffusion() {
        let grid = Grid::new(0.0, 1.0, 64).unwrap();
        let m = ResourceField::from_fn(&grid, |x| x * (1.0 - x)).unwrap();
        let w = single_species_steady_state(10.0, &m, &grid).unwrap();
        assert!(w.iter().all(|x| (x - 1.0 / 6.0).abs() < 5e-3));
        let slow = single_species_steady_state(1e-3, &m, &grid).unwrap();
        assert!(slow.iter().all(|x| *x >= 0.0 && *x <= m.max() + 1e-3));
    }

    #[test]
    fn rejects_bad_setup() {
        assert!(Grid::new(0.0, 1.0, 4).is_err());
        let grid = Grid::new(0.0, 1.0, 16).unwrap();
        assert!(PdeState::new(grid, vec![0.0; 15], vec![0.0; 16]).is_err());
        assert!(PdeState::new(grid, vec![-1.0; 16], vec![0.0; 16]).is_err());
        assert!(ResourceField::new(vec![-0.1]).is_err());
        let params = PdeParams { reaction: Reaction::Constant(fig7(1.0)), d1: 0.0, d2: 1.0 };
        let init = PdeState::constant(grid, State2::new(0.1, 0.1)).unwrap();
        assert!(matches!(
            simulate_pde(&params, &init, 1.0, &PdeOptions::default()),
            Err(PdeError::InvalidDiffusivity { .. })
        ));
    }

    #[test]
    fn explicit_cfl_guard_reports_tiny_steps() {
        let grid = Grid::new(0.0, 1.0, 1000).unwrap();
        let params = PdeParams { reaction: Reaction::Constant(fig7(1.0)), d1: 1e6, d2: 1.0 };
        let init = PdeState::constant(grid, State2::new(0.1, 0.1)).unwrap();
        let opts = PdeOptions { scheme: Scheme::ExplicitRk4, ..Default::default() };
        assert!(matches!(simulate_pde(&params, &init, 1.0, &opts), Err(PdeError::CflViolation { .. })));
    }
}
