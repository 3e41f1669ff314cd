//! Lotka-Volterra competition with non-smooth interspecific terms
//! `u^p v` and `u v^q`, `0 < p, q <= 1`, which allow a competitor to reach
//! zero in finite time.
//!
//! * [`kinetics`]: parameters, regimes, right-hand sides
//! * [`equilibria`]: fixed points, Jacobians, stability
//! * [`ode`]: integration with extinction events, thresholds, separatrices
//! * [`pde`]: one-dimensional reaction-diffusion with zero-flux boundaries
//! * [`scan`]: diffusivity outcome maps and `c1` window counts
//! * [`config`], [`commands`], [`report`]: the batch command-line front end

pub mod commands;
pub mod config;
pub mod equilibria;
pub mod expr;
pub mod kinetics;
pub mod ode;
pub mod pde;
pub mod report;
pub(crate) mod roots;
pub mod scan;
