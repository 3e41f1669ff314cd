//! Parameter containers, regime classification and right-hand sides for the
//! generalized competition kinetics
//!
//! ```text
//! du/dt = a1 u - b1 u^2 - c1 u^p v
//! dv/dt = a2 v - b2 v^2 - c2 u v^q        0 < p, q <= 1
//! ```
//!
//! Exponents below one make the interspecific loss term non-Lipschitz at the
//! axis, which is what allows a species to reach zero in finite time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used to call two regime ratios equal.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Tolerance on `d + e = 1` for the harvest split.
pub const SPLIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{name}` must be strictly positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("exponent `{name}` must lie in (0, 1], got {value}")]
    ExponentOutOfRange { name: &'static str, value: f64 },
    #[error("harvest split must satisfy d, e in [0, 1] and d + e = 1, got d = {d}, e = {e}")]
    InvalidSplit { d: f64, e: f64 },
}

/// Which of the two competitors a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    U,
    V,
}

impl Species {
    pub fn other(self) -> Species {
        match self {
            Species::U => Species::V,
            Species::V => Species::U,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::U => "u",
            Species::V => "v",
        }
    }
}

/// A point `(u, v)` of the phase plane. Also used for time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State2 {
    pub u: f64,
    pub v: f64,
}

impl State2 {
    pub const ORIGIN: State2 = State2 { u: 0.0, v: 0.0 };

    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn get(&self, s: Species) -> f64 {
        match s {
            Species::U => self.u,
            Species::V => self.v,
        }
    }

    pub fn set(&mut self, s: Species, value: f64) {
        match s {
            Species::U => self.u = value,
            Species::V => self.v = value,
        }
    }

    pub fn norm(&self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn distance(&self, other: &State2) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.u >= 0.0 && self.v >= 0.0
    }
}

/// `x^e` on the closed half-line, with `0^e = 0`.
///
/// The exponent-one case is the identity for every real `x` so that the
/// classical model is reproduced exactly, including at the slightly negative
/// intermediate values a Runge-Kutta stage can produce. For `e < 1` the power
/// is `exp(e ln x)` for `x > 0` and zero otherwise; `ln 0` is never formed.
#[inline]
pub fn nonneg_pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if x > 0.0 {
        (e * x.ln()).exp()
    } else {
        0.0
    }
}

/// The eight constants of the generalized competition model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
    pub q: f64,
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NonPositive { name, value })
    }
}

fn check_exponent(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(ParamError::ExponentOutOfRange { name, value })
    }
}

impl KineticParams {
    /// Classical parameters (`p = q = 1`).
    pub fn classical(a1: f64, a2: f64, b1: f64, b2: f64, c1: f64, c2: f64) -> Result<Self, ParamError> {
        let params = Self { a1, a2, b1, b2, c1, c2, p: 1.0, q: 1.0 };
        params.validate()?;
        Ok(params)
    }

    pub fn with_exponents(self, p: f64, q: f64) -> Result<Self, ParamError> {
        let params = Self { p, q, ..self };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        check_positive("a1", self.a1)?;
        check_positive("a2", self.a2)?;
        check_positive("b1", self.b1)?;
        check_positive("b2", self.b2)?;
        check_positive("c1", self.c1)?;
        check_positive("c2", self.c2)?;
        check_exponent("p", self.p)?;
        check_exponent("q", self.q)?;
        Ok(())
    }

    pub fn exponent(&self, s: Species) -> f64 {
        match s {
            Species::U => self.p,
            Species::V => self.q,
        }
    }

    /// Single-species carrying capacities `(a1/b1, a2/b2)`.
    pub fn carrying_capacities(&self) -> State2 {
        State2::new(self.a1 / self.b1, self.a2 / self.b2)
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }
}

/// Outcome class of the classical kinetics, read off the ratio `a1/a2`
/// against `b1/c2` and `c1/b2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    ExclusionUWins,
    ExclusionVWins,
    WeakCompetition,
    StrongCompetition,
    Degenerate,
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= DEGENERACY_TOL * a.abs().max(b.abs())
}

pub fn classify_regime(params: &KineticParams) -> Regime {
    let ratio = params.a1 / params.a2;
    let x = params.b1 / params.c2;
    let y = params.c1 / params.b2;
    if ties(ratio, x) || ties(ratio, y) {
        return Regime::Degenerate;
    }
    if ratio > x.max(y) {
        Regime::ExclusionUWins
    } else if ratio < x.min(y) {
        Regime::ExclusionVWins
    } else if x > ratio {
        // y < ratio < x
        Regime::WeakCompetition
    } else {
        Regime::StrongCompetition
    }
}

/// Time derivative of the generalized model at `s`.
pub fn rhs(params: &KineticParams, s: State2) -> State2 {
    let KineticParams { a1, a2, b1, b2, c1, c2, p, q } = *params;
    State2 {
        u: a1 * s.u - b1 * s.u * s.u - c1 * nonneg_pow(s.u, p) * s.v,
        v: a2 * s.v - b2 * s.v * s.v - c2 * s.u * nonneg_pow(s.v, q),
    }
}

/// Competition model in which a fraction `e` of the weaker competitor carries
/// the finite-time-extinction loss and the rest `d = 1 - e` competes
/// classically. `coupling` is the extra factor on the `u`-equation's
/// interspecific term (one in all reported runs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestParams {
    pub base: KineticParams,
    pub d: f64,
    pub e: f64,
    pub coupling: f64,
}

impl HarvestParams {
    pub fn new(base: KineticParams, d: f64, e: f64) -> Result<Self, ParamError> {
        let params = Self { base, d, e, coupling: 1.0 };
        params.validate()?;
        Ok(params)
    }

    pub fn with_coupling(self, coupling: f64) -> Result<Self, ParamError> {
        let params = Self { coupling, ..self };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.base.validate()?;
        check_positive("coupling", self.coupling)?;
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(in_unit(self.d) && in_unit(self.e)) || (self.d + self.e - 1.0).abs() > SPLIT_TOL {
            return Err(ParamError::InvalidSplit { d: self.d, e: self.e });
        }
        Ok(())
    }
}

pub fn harvest_rhs(params: &HarvestParams, s: State2) -> State2 {
    let k = &params.base;
    State2 {
        u: k.a1 * s.u - k.b1 * s.u * s.u - k.c1 * params.coupling * s.u * s.v,
        v: k.a2 * s.v - k.b2 * s.v * s.v - k.c2 * params.d * s.u * s.v - k.c2 * params.e * nonneg_pow(s.v, k.q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1(p: f64, q: f64) -> KineticParams {
        KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.8).unwrap().with_exponents(p, q).unwrap()
    }

    #[test]
    fn regimes_of_reported_parameter_sets() {
        assert_eq!(fig1(1.0, 1.0).regime(), Regime::ExclusionUWins);
        let weak = KineticParams::classical(1.0, 2.0, 1.0, 1.0, 0.3, 1.8).unwrap();
        assert_eq!(weak.regime(), Regime::WeakCompetition);
        let strong = KineticParams::classical(1.0, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(strong.regime(), Regime::StrongCompetition);
        let v_wins = KineticParams::classical(1.0, 3.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(v_wins.regime(), Regime::ExclusionVWins);
    }

    #[test]
    fn ties_are_degenerate() {
        // a1/a2 = b1/c2 = 1
        let k = KineticParams::classical(1.0, 1.0, 2.0, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(k.regime(), Regime::Degenerate);
    }

    #[test]
    fn validation_rejects_bad_constants() {
        assert!(matches!(
            KineticParams::classical(0.0, 1.0, 1.0, 1.0, 1.0, 1.0),
            Err(ParamError::NonPositive { name: "a1", .. })
        ));
        assert!(matches!(
            fig1(1.0, 1.0).with_exponents(1.2, 1.0),
            Err(ParamError::ExponentOutOfRange { name: "p", .. })
        ));
        assert!(fig1(1.0, 1.0).with_exponents(1.0, 0.0).is_err());
        assert!(HarvestParams::new(fig1(1.0, 1.0), 0.5, 0.6).is_err());
    }

    #[test]
    fn rhs_fixed_points() {
        let k = fig1(1.0, 1.0);
        assert_eq!(rhs(&k, State2::ORIGIN), State2::ORIGIN);
        assert_eq!(rhs(&k, State2::new(1.8, 0.0)).u, 0.0);
        let strong = KineticParams::classical(1.0, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        let d = rhs(&strong, State2::new(1.0 / 3.0, 1.0 / 3.0));
        assert!(d.u.abs() < 1e-15 && d.v.abs() < 1e-15);
    }

    #[test]
    fn fractional_power_vanishes_on_axis() {
        let k = fig1(0.4, 0.3);
        let d = rhs(&k, State2::new(0.0, 2.0));
        assert_eq!(d.u, 0.0);
        let d = rhs(&k, State2::new(1.0, 0.0));
        assert_eq!(d.v, 0.0);
        assert_eq!(nonneg_pow(0.0, 0.1), 0.0);
        assert_eq!(nonneg_pow(-1e-3, 0.5), 0.0);
        assert_eq!(nonneg_pow(-2.0, 1.0), -2.0);
    }

    #[test]
    fn harvest_reduces_and_fixes_points() {
        let base = KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.7).unwrap().with_exponents(1.0, 0.1).unwrap();
        let h = HarvestParams::new(base, 0.45, 0.55).unwrap();
        assert_eq!(harvest_rhs(&h, State2::ORIGIN), State2::ORIGIN);
        assert_eq!(harvest_rhs(&h, State2::new(1.8, 0.0)).u, 0.0);
    }

    proptest! {
        #[test]
        fn classify_partitions_parameter_space(
            a1 in 0.01f64..5.0, a2 in 0.01f64..5.0, b1 in 0.01f64..5.0,
            b2 in 0.01f64..5.0, c1 in 0.01f64..5.0, c2 in 0.01f64..5.0,
        ) {
            let k = KineticParams::classical(a1, a2, b1, b2, c1, c2).unwrap();
            let (r, x, y) = (a1 / a2, b1 / c2, c1 / b2);
            let fired = [
                r > x.max(y),
                r < x.min(y),
                x > r && r > y,
                x < r && r < y,
            ];
            let tag = k.regime();
            if tag != Regime::Degenerate {
                prop_assert_eq!(fired.iter().filter(|b| **b).count(), 1);
                let idx = fired.iter().position(|b| *b).unwrap();
                let expected = [
                    Regime::ExclusionUWins,
                    Regime::ExclusionVWins,
                    Regime::WeakCompetition,
                    Regime::StrongCompetition,
                ][idx];
                prop_assert_eq!(tag, expected);
            }
        }

        #[test]
        fn unit_exponents_give_classical_model(
            u in 0.0f64..5.0, v in 0.0f64..5.0,
            a1 in 0.1f64..3.0, c1 in 0.1f64..3.0, c2 in 0.1f64..3.0,
        ) {
            let k = KineticParams::classical(a1, 2.0, 1.0, 1.5, c1, c2).unwrap();
            let d = rhs(&k, State2::new(u, v));
            prop_assert!((d.u - u * (a1 - u - c1 * v)).abs() <= 1e-12 * (1.0 + d.u.abs()));
            prop_assert!((d.v - v * (2.0 - 1.5 * v - c2 * u)).abs() <= 1e-12 * (1.0 + d.v.abs()));
        }

        #[test]
        fn harvest_without_split_matches_rhs(u in 0.0f64..5.0, v in 0.0f64..5.0) {
            let k = fig1(1.0, 1.0);
            let h = HarvestParams::new(k, 1.0, 0.0).unwrap();
            let a = harvest_rhs(&h, State2::new(u, v));
            let b = rhs(&k, State2::new(u, v));
            prop_assert!((a.u - b.u).abs() <= 1e-15 * (1.0 + b.u.abs()));
            prop_assert!((a.v - b.v).abs() <= 1e-15 * (1.0 + b.v.abs()));
        }
    }
}
