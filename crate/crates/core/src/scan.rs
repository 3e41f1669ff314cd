//! Parameter sweeps: the diffusivity outcome map and the `c1` window count of
//! interior equilibria.
//!
//! Cells are independent; the diffusion map runs them on a dedicated rayon
//! pool and collects results in index order, so the grid does not depend on
//! the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibria::{interior_equilibria, Stability};
use crate::kinetics::{KineticParams, Regime, State2};
use crate::pde::{simulate_pde, Grid, OutcomeLabel, PdeOptions, PdeParams, PdeState, Reaction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("axis needs lo > 0, hi > lo and at least {min} points, got [{lo}, {hi}] with {n}")]
    InvalidAxis { lo: f64, hi: f64, n: usize, min: usize },
    #[error("c1 range must be positive and increasing, got [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Log-spaced axis from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn log(lo: f64, hi: f64, n: usize) -> Result<Self, ScanError> {
        let axis = Self { lo, hi, n };
        axis.validate(4)?;
        Ok(axis)
    }

    fn validate(&self, min: usize) -> Result<(), ScanError> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite()) || self.n < min {
            return Err(ScanError::InvalidAxis { lo: self.lo, hi: self.hi, n: self.n, min });
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let ratio = (self.hi / self.lo).ln();
        (0..self.n)
            .map(|i| if i + 1 == self.n { self.hi } else { self.lo * (ratio * i as f64 / (self.n - 1) as f64).exp() })
            .collect()
    }
}

impl Default for Axis {
    fn default() -> Self {
        Self { lo: 1e-5, hi: 1e-1, n: 16 }
    }
}

/// How each cell's initial data is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IcPolicy {
    /// `u0 = v0 = m(x)/2 + offset`; with constant kinetics `m` is replaced by
    /// each species' carrying capacity.
    HalfResource {
        offset: f64,
    },
    Constant {
        u: f64,
        v: f64,
    },
}

impl Default for IcPolicy {
    fn default() -> Self {
        IcPolicy::HalfResource { offset: 0.01 }
    }
}

impl IcPolicy {
    pub fn describe(&self) -> String {
        match self {
            IcPolicy::HalfResource { offset } => format!("u0 = v0 = m(x)/2 + {offset}"),
            IcPolicy::Constant { u, v } => format!("u0 = {u}, v0 = {v}"),
        }
    }

    pub fn initial_state(&self, grid: Grid, reaction: &Reaction) -> Result<PdeState, crate::pde::PdeError> {
        match (self, reaction) {
            (IcPolicy::Constant { u, v }, _) => PdeState::constant(grid, State2::new(*u, *v)),
            (IcPolicy::HalfResource { offset }, Reaction::Inhomogeneous { m, .. }) => {
                let f: Vec<f64> = m.values().iter().map(|x| 0.5 * x + offset).collect();
                PdeState::new(grid, f.clone(), f)
            }
            (IcPolicy::HalfResource { offset }, Reaction::Constant(k)) => {
                let cap = k.carrying_capacities();
                PdeState::constant(grid, State2::new(0.5 * cap.u + offset, 0.5 * cap.v + offset))
            }
        }
    }
}

/// Everything needed to run one outcome map. `template.d1/d2` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionScan {
    pub template: PdeParams,
    pub grid: Grid,
    pub d1: Axis,
    pub d2: Axis,
    pub ic: IcPolicy,
    pub t_end: f64,
    pub options: PdeOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub d1: f64,
    pub d2: f64,
    pub label: OutcomeLabel,
    pub t_reached: f64,
    /// Error text when the cell's simulation failed.
    pub note: Option<String>,
}

/// Row-major over `d1` (outer) and `d2` (inner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeGrid {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub cells: Vec<Cell>,
    pub ic_policy: String,
}

impl OutcomeGrid {
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.d2.len() + j]
    }

    pub fn labels(&self) -> Vec<OutcomeLabel> {
        self.cells.iter().map(|c| c.label).collect()
    }

    pub fn count(&self, label: OutcomeLabel) -> usize {
        self.cells.iter().filter(|c| c.label == label).count()
    }
}

fn run_cell(scan: &DiffusionScan, d1: f64, d2: f64) -> Cell {
    let params = PdeParams { d1, d2, ..scan.template.clone() };
    let result = scan
        .ic
        .initial_state(scan.grid, &params.reaction)
        .and_then(|init| simulate_pde(&params, &init, scan.t_end, &scan.options));
    match result {
        Ok(run) => Cell { d1, d2, label: run.outcome.label, t_reached: run.outcome.t_reached, note: None },
        Err(e) => Cell { d1, d2, label: OutcomeLabel::Undecided, t_reached: 0.0, note: Some(e.to_string()) },
    }
}

/// Run every `(d1, d2)` cell on `workers` threads.
pub fn scan_diffusion(scan: &DiffusionScan, workers: usize) -> Result<OutcomeGrid, ScanError> {
    scan.d1.validate(4)?;
    scan.d2.validate(4)?;
    let d1 = scan.d1.values();
    let d2 = scan.d2.values();
    let jobs: Vec<(f64, f64)> = d1.iter().flat_map(|&a| d2.iter().map(move |&b| (a, b))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ScanError::Pool(e.to_string()))?;
    let cells = pool.install(|| jobs.par_iter().map(|&(a, b)| run_cell(scan, a, b)).collect());
    Ok(OutcomeGrid { d1, d2, cells, ic_policy: scan.ic.describe() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScan {
    pub c1: Vec<f64>,
    /// Interior equilibria with `(p, q) = (p_exponent, 1)`.
    pub count_p: Vec<usize>,
    /// Interior equilibria with `(p, q) = (1, q_exponent)`.
    pub count_q: Vec<usize>,
    /// Classical weak-competition regime holds at this `c1`.
    pub in_regime: Vec<bool>,
    /// A regime tie or a non-hyperbolic interior point in either variant.
    pub degenerate: Vec<bool>,
    pub p_exponent: f64,
    pub q_exponent: f64,
    /// Maximal `c1` runs with counts (2, 0).
    pub windows_two_none: Vec<(f64, f64)>,
    /// Maximal `c1` runs with counts (0, 2).
    pub windows_none_two: Vec<(f64, f64)>,
}

fn runs(c1: &[f64], hit: impl Fn(usize) -> bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=c1.len() {
        let on = i < c1.len() && hit(i);
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((c1[s], c1[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Count interior equilibria of both exponent variants on `samples` evenly
/// spaced `c1` values in `[lo, hi]`.
pub fn scan_c1_window(
    template: &KineticParams,
    lo: f64,
    hi: f64,
    samples: usize,
    p_exponent: f64,
    q_exponent: f64,
) -> Result<WindowScan, ScanError> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(ScanError::InvalidRange(lo, hi));
    }
    let samples = samples.max(1);
    let c1: Vec<f64> = (0..samples)
        .map(|i| if samples == 1 { lo } else { lo + (hi - lo) * i as f64 / (samples - 1) as f64 })
        .collect();
    let rows: Vec<(usize, usize, bool, bool)> = c1
        .iter()
        .map(|&c| {
            let base = KineticParams { c1: c, ..*template };
            let pv = KineticParams { p: p_exponent, q: 1.0, ..base };
            let qv = KineticParams { p: 1.0, q: q_exponent, ..base };
            let ep = interior_equilibria(&pv);
            let eq = interior_equilibria(&qv);
            let regime = KineticParams { p: 1.0, q: 1.0, ..base }.regime();
            let degenerate = regime == Regime::Degenerate
                || ep.iter().chain(eq.iter()).any(|e| e.stability == Stability::NonHyperbolic);
            (ep.len(), eq.len(), regime == Regime::WeakCompetition, degenerate)
        })
        .collect();
    let count_p: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let count_q: Vec<usize> = rows.iter().map(|r| r.1).collect();
    let windows_two_none = runs(&c1, |i| count_p[i] == 2 && count_q[i] == 0);
    let windows_none_two = runs(&c1, |i| count_p[i] == 0 && count_q[i] == 2);
    Ok(WindowScan {
        in_regime: rows.iter().map(|r| r.2).collect(),
        degenerate: rows.iter().map(|r| r.3).collect(),
        c1,
        count_p,
        count_q,
        p_exponent,
        q_exponent,
        windows_two_none,
        windows_none_two,
    })
}
