//! Fixed points of the competition kinetics, their Jacobians and local
//! stability.
//!
//! Boundary equilibria are closed-form. Interior equilibria are roots of the
//! difference between the two nullclines, written as a scalar function on a
//! bounded interval and located with [`crate::roots::find_roots`]. Which
//! parameterization is scanned depends on the exponents:
//!
//! * `q = 1`: scan `u` on `(0, a1/b1)` with `f(u) - g(u)`;
//! * `p = 1`, `q < 1`: scan `v` on `(0, a1/c1)` with `f1(v) - g1(v)`;
//! * `p, q < 1`: substitute `v = f(u)` into the `v`-nullcline and scan `u`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::{nonneg_pow, HarvestParams, KineticParams, Species, State2};
use crate::roots::{find_roots, SCAN_POINTS};

/// Trace/determinant values this close to zero are treated as zero.
pub const STABILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("density must be non-negative, got {0}")]
    NegativeDensity(f64),
    #[error("linearization is singular at {species:?} = 0 (fractional exponent)")]
    SingularLinearization { species: Species },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    Origin,
    UAxis,
    VAxis,
    Interior,
}

impl EquilibriumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EquilibriumKind::Origin => "origin",
            EquilibriumKind::UAxis => "u-axis",
            EquilibriumKind::VAxis => "v-axis",
            EquilibriumKind::Interior => "interior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Sink,
    Source,
    Saddle,
    SpiralSink,
    SpiralSource,
    Center,
    NonHyperbolic,
    Unclassifiable,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Sink => "sink",
            Stability::Source => "source",
            Stability::Saddle => "saddle",
            Stability::SpiralSink => "spiral-sink",
            Stability::SpiralSource => "spiral-source",
            Stability::Center => "center",
            Stability::NonHyperbolic => "non-hyperbolic",
            Stability::Unclassifiable => "unclassifiable",
        }
    }

    pub fn is_attracting(self) -> bool {
        matches!(self, Stability::Sink | Stability::SpiralSink)
    }
}

/// Row-major 2x2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian(pub [[f64; 2]; 2]);

impl Jacobian {
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn discriminant(&self) -> f64 {
        let tr = self.trace();
        tr * tr - 4.0 * self.det()
    }

    /// Real eigenvalues in ascending order, if the spectrum is real.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let disc = self.discriminant();
        if disc < 0.0 {
            return None;
        }
        let tr = self.trace();
        let root = disc.sqrt();
        Some((0.5 * (tr - root), 0.5 * (tr + root)))
    }

    /// Unit eigenvector for a real eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: f64) -> State2 {
        let [[a, b], [c, d]] = self.0;
        // (J - lambda I) w = 0, from whichever row is better conditioned
        let first = State2::new(b, lambda - a);
        let second = State2::new(lambda - d, c);
        let w = if first.norm() >= second.norm() { first } else { second };
        let n = w.norm();
        if n == 0.0 {
            // J = lambda I: any direction
            return State2::new(1.0, 0.0);
        }
        State2::new(w.u / n, w.v / n)
    }
}

/// Eigenvalue-sign classification from trace and determinant.
pub fn classify_stability(j: &Jacobian) -> Stability {
    let entries_finite = j.0.iter().flatten().all(|x| x.is_finite());
    if !entries_finite {
        return Stability::Unclassifiable;
    }
    let tr = j.trace();
    let det = j.det();
    if det.abs() <= STABILITY_TOL {
        return Stability::NonHyperbolic;
    }
    if det < 0.0 {
        return Stability::Saddle;
    }
    if tr.abs() <= STABILITY_TOL {
        return Stability::Center;
    }
    let spiral = j.discriminant() < 0.0;
    match (tr < 0.0, spiral) {
        (true, false) => Stability::Sink,
        (true, true) => Stability::SpiralSink,
        (false, false) => Stability::Source,
        (false, true) => Stability::SpiralSource,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub point: State2,
    pub kind: EquilibriumKind,
    /// `None` when the linearization is singular on an axis.
    pub jacobian: Option<Jacobian>,
    pub stability: Stability,
}

impl Equilibrium {
    fn from_jacobian(point: State2, kind: EquilibriumKind, j: Result<Jacobian, EquilibriumError>) -> Self {
        match j {
            Ok(j) => Self { point, kind, jacobian: Some(j), stability: classify_stability(&j) },
            Err(_) => Self { point, kind, jacobian: None, stability: Stability::Unclassifiable },
        }
    }
}

/// Which nullcline, and in which variable it is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NullclineSide {
    /// `v = f(u)`, the `u`-nullcline.
    UOfU,
    /// `v = g(u)`, the `v`-nullcline.
    VOfU,
    /// `u = f1(v)`, the `u`-nullcline.
    UOfV,
    /// `u = g1(v)`, the `v`-nullcline.
    VOfV,
}

impl NullclineSide {
    pub fn species(self) -> Species {
        match self {
            NullclineSide::UOfU | NullclineSide::UOfV => Species::U,
            NullclineSide::VOfU | NullclineSide::VOfV => Species::V,
        }
    }
}

pub fn nullcline_value(params: &KineticParams, side: NullclineSide, x: f64) -> Result<f64, EquilibriumError> {
    if x < 0.0 || x.is_nan() {
        return Err(EquilibriumError::NegativeDensity(x));
    }
    let k = params;
    Ok(match side {
        NullclineSide::UOfU => nonneg_pow(x, 1.0 - k.p) * (k.a1 / k.c1 - k.b1 / k.c1 * x),
        NullclineSide::VOfU => k.a2 / k.b2 - k.c2 / k.b2 * x,
        NullclineSide::UOfV => k.a1 / k.b1 - k.c1 / k.b1 * x,
        NullclineSide::VOfV => nonneg_pow(x, 1.0 - k.q) * (k.a2 / k.c2 - k.b2 / k.c2 * x),
    })
}

/// `u^(e-1)` for the Jacobian; only called where it is finite.
fn pow_minus_one(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        1.0
    } else {
        ((e - 1.0) * x.ln()).exp()
    }
}

pub fn jacobian(params: &KineticParams, at: State2) -> Result<Jacobian, EquilibriumError> {
    let KineticParams { a1, a2, b1, b2, c1, c2, p, q } = *params;
    let State2 { u, v } = at;
    for x in [u, v] {
        if x < 0.0 || x.is_nan() {
            return Err(EquilibriumError::NegativeDensity(x));
        }
    }
    if u == 0.0 && p < 1.0 {
        return Err(EquilibriumError::SingularLinearization { species: Species::U });
    }
    if v == 0.0 && q < 1.0 {
        return Err(EquilibriumError::SingularLinearization { species: Species::V });
    }
    Ok(Jacobian([
        [a1 - 2.0 * b1 * u - p * c1 * pow_minus_one(u, p) * v, -c1 * nonneg_pow(u, p)],
        [-c2 * nonneg_pow(v, q), a2 - 2.0 * b2 * v - q * c2 * u * pow_minus_one(v, q)],
    ]))
}

/// `E0 = (0,0)`, `E1 = (a1/b1, 0)`, `E2 = (0, a2/b2)`.
pub fn boundary_equilibria(params: &KineticParams) -> Vec<Equilibrium> {
    let cap = params.carrying_capacities();
    [
        (State2::ORIGIN, EquilibriumKind::Origin),
        (State2::new(cap.u, 0.0), EquilibriumKind::UAxis),
        (State2::new(0.0, cap.v), EquilibriumKind::VAxis),
    ]
    .into_iter()
    .map(|(pt, kind)| Equilibrium::from_jacobian(pt, kind, jacobian(params, pt)))
    .collect()
}

pub fn interior_equilibria(params: &KineticParams) -> Vec<Equilibrium> {
    interior_equilibria_with(params, SCAN_POINTS)
}

/// As [`interior_equilibria`] with an explicit scan resolution.
pub fn interior_equilibria_with(params: &KineticParams, scan_points: usize) -> Vec<Equilibrium> {
    let k = *params;
    // v on the u-nullcline as a function of u
    let f = move |u: f64| nonneg_pow(u, 1.0 - k.p) * (k.a1 - k.b1 * u) / k.c1;
    let points: Vec<(State2, bool)> = if k.q == 1.0 {
        let g = move |u: f64| (k.a2 - k.c2 * u) / k.b2;
        find_roots(move |u| f(u) - g(u), 0.0, k.a1 / k.b1, scan_points)
            .into_iter()
            .map(|r| (State2::new(r.x, f(r.x)), r.tangential))
            .collect()
    } else if k.p == 1.0 {
        let f1 = move |v: f64| (k.a1 - k.c1 * v) / k.b1;
        let g1 = move |v: f64| nonneg_pow(v, 1.0 - k.q) * (k.a2 - k.b2 * v) / k.c2;
        find_roots(move |v| f1(v) - g1(v), 0.0, k.a1 / k.c1, scan_points)
            .into_iter()
            .map(|r| (State2::new(f1(r.x), r.x), r.tangential))
            .collect()
    } else {
        // (a2 - b2 v - c2 u v^(q-1)) v^(1-q) with v = f(u)
        let h = move |u: f64| {
            let v = f(u);
            (k.a2 - k.b2 * v) * nonneg_pow(v, 1.0 - k.q) - k.c2 * u
        };
        find_roots(h, 0.0, k.a1 / k.b1, scan_points)
            .into_iter()
            .map(|r| (State2::new(r.x, f(r.x)), r.tangential))
            .collect()
    };
    let mut out: Vec<Equilibrium> = points
        .into_iter()
        .filter(|(pt, _)| pt.u > 0.0 && pt.v > 0.0)
        .map(|(pt, tangential)| {
            let mut eq = Equilibrium::from_jacobian(pt, EquilibriumKind::Interior, jacobian(params, pt));
            if tangential {
                eq.stability = Stability::NonHyperbolic;
            }
            eq
        })
        .collect();
    out.sort_by(|a, b| a.point.u.total_cmp(&b.point.u));
    out
}

/// Boundary equilibria followed by interior ones.
pub fn all_equilibria(params: &KineticParams) -> Vec<Equilibrium> {
    let mut eqs = boundary_equilibria(params);
    eqs.extend(interior_equilibria(params));
    eqs
}

pub fn harvest_jacobian(params: &HarvestParams, at: State2) -> Result<Jacobian, EquilibriumError> {
    let k = &params.base;
    let State2 { u, v } = at;
    for x in [u, v] {
        if x < 0.0 || x.is_nan() {
            return Err(EquilibriumError::NegativeDensity(x));
        }
    }
    if v == 0.0 && k.q < 1.0 && params.e > 0.0 {
        return Err(EquilibriumError::SingularLinearization { species: Species::V });
    }
    let harvest_term = if params.e > 0.0 { k.q * k.c2 * params.e * pow_minus_one(v, k.q) } else { 0.0 };
    Ok(Jacobian([
        [k.a1 - 2.0 * k.b1 * u - k.c1 * params.coupling * v, -k.c1 * params.coupling * u],
        [-k.c2 * params.d * v, k.a2 - 2.0 * k.b2 * v - k.c2 * params.d * u - harvest_term],
    ]))
}

/// All equilibria of the harvest model: the origin, `(a1/b1, 0)`, the
/// `v`-axis points solving `a2 - b2 v = c2 e v^(q-1)`, and interior points
/// with `u = (a1 - c1 a v)/b1`.
pub fn harvest_equilibria(params: &HarvestParams) -> Vec<Equilibrium> {
    let h = *params;
    let k = h.base;
    let classify = |pt: State2, kind| Equilibrium::from_jacobian(pt, kind, harvest_jacobian(&h, pt));
    let mut out = vec![
        classify(State2::ORIGIN, EquilibriumKind::Origin),
        classify(State2::new(k.a1 / k.b1, 0.0), EquilibriumKind::UAxis),
    ];
    // v-axis: (a2 - b2 v) v^(1-q) - c2 e = 0
    let axis = move |v: f64| (k.a2 - k.b2 * v) * nonneg_pow(v, 1.0 - k.q) - k.c2 * h.e;
    for r in find_roots(axis, 0.0, k.a2 / k.b2, SCAN_POINTS) {
        let mut eq = classify(State2::new(0.0, r.x), EquilibriumKind::VAxis);
        if r.tangential {
            eq.stability = Stability::NonHyperbolic;
        }
        out.push(eq);
    }
    let u_of_v = move |v: f64| (k.a1 - k.c1 * h.coupling * v) / k.b1;
    let interior = move |v: f64| (k.a2 - k.b2 * v - k.c2 * h.d * u_of_v(v)) * nonneg_pow(v, 1.0 - k.q) - k.c2 * h.e;
    let mut inner: Vec<Equilibrium> = find_roots(interior, 0.0, k.a1 / (k.c1 * h.coupling), SCAN_POINTS)
        .into_iter()
        .map(|r| {
            let mut eq = classify(State2::new(u_of_v(r.x), r.x), EquilibriumKind::Interior);
            if r.tangential {
                eq.stability = Stability::NonHyperbolic;
            }
            eq
        })
        .filter(|eq| eq.point.u > 0.0)
        .collect();
    inner.sort_by(|a, b| a.point.u.total_cmp(&b.point.u));
    out.extend(inner);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{harvest_rhs, rhs};

    fn example_params() -> KineticParams {
        KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.8).unwrap().with_exponents(1.0, 0.3).unwrap()
    }

    fn assert_matrix(j: &Jacobian, expected: [[f64; 2]; 2], tol: f64) {
        for r in 0..2 {
            for c in 0..2 {
                assert!((j.0[r][c] - expected[r][c]).abs() < tol, "J[{r}][{c}] = {} vs {}", j.0[r][c], expected[r][c]);
            }
        }
    }

    #[test]
    fn nullcline_values() {
        let k = KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.8).unwrap();
        assert!((nullcline_value(&k, NullclineSide::UOfU, 1.0).unwrap() - 1.6).abs() < 1e-15);
        let kp = k.with_exponents(0.4, 1.0).unwrap();
        assert_eq!(nullcline_value(&kp, NullclineSide::UOfU, 0.0).unwrap(), 0.0);
        assert!(nullcline_value(&kp, NullclineSide::UOfU, 1.8).unwrap().abs() < 1e-15);
        assert!(matches!(nullcline_value(&k, NullclineSide::VOfU, -1.0), Err(EquilibriumError::NegativeDensity(_))));
        assert!((nullcline_value(&k, NullclineSide::UOfV, 1.0).unwrap() - 1.3).abs() < 1e-15);
        let kq = k.with_exponents(1.0, 0.3).unwrap();
        assert_eq!(nullcline_value(&kq, NullclineSide::VOfV, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn boundary_points_and_singular_axes() {
        let k = example_params();
        let eqs = boundary_equilibria(&k);
        assert_eq!(eqs.len(), 3);
        assert_eq!(eqs[1].point, State2::new(1.8, 0.0));
        assert_eq!(eqs[2].point, State2::new(0.0, 3.0));
        // q < 1 makes v^(q-1) singular on the u-axis
        assert_eq!(eqs[1].stability, Stability::Unclassifiable);
        assert!(eqs[1].jacobian.is_none());
        // E2 is fine: p = 1
        assert!(eqs[2].jacobian.is_some());
    }

    #[test]
    fn example_interior_pair() {
        let eqs = interior_equilibria(&example_params());
        assert_eq!(eqs.len(), 2);
        let (sink, saddle) = (&eqs[0], &eqs[1]);
        assert!((saddle.point.u - 1.1323).abs() < 1e-3 && (saddle.point.v - 1.3354).abs() < 1e-3);
        assert!((sink.point.u - 0.5788).abs() < 1e-3 && (sink.point.v - 2.4424).abs() < 1e-3);
        assert_eq!(saddle.stability, Stability::Saddle);
        assert_eq!(sink.stability, Stability::Sink);
        assert_matrix(saddle.jacobian.as_ref().unwrap(), [[-1.1323, -0.5662], [-1.9632, -0.1702]], 1e-3);
        assert_matrix(sink.jacobian.as_ref().unwrap(), [[-0.5788, -0.2894], [-2.3530, -2.0521]], 1e-3);
    }

    #[test]
    fn classical_weak_case_matches_linear_solve() {
        let k = KineticParams::classical(1.0, 2.0, 1.0, 1.0, 0.3, 1.8).unwrap();
        let eqs = interior_equilibria(&k);
        assert_eq!(eqs.len(), 1);
        let den = k.b1 * k.b2 - k.c1 * k.c2;
        let u = (k.a1 * k.b2 - k.c1 * k.a2) / den;
        let v = (k.a2 * k.b1 - k.c2 * k.a1) / den;
        assert!((eqs[0].point.u - u).abs() < 1e-10);
        assert!((eqs[0].point.v - v).abs() < 1e-10);
        assert!((u - 0.8696).abs() < 1e-4 && (v - 0.4348).abs() < 1e-4);
        // J = [[-b1 u, -c1 u], [-c2 v, -b2 v]]
        assert_matrix(eqs[0].jacobian.as_ref().unwrap(), [[-u, -0.3 * u], [-1.8 * v, -v]], 1e-12);
        assert_eq!(eqs[0].stability, Stability::Sink);
    }

    #[test]
    fn classical_exclusion_has_no_interior_point() {
        let k = KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.8).unwrap();
        assert!(interior_equilibria(&k).is_empty());
    }

    #[test]
    fn stability_classes() {
        let saddle = Jacobian([[-1.1323, -0.5662], [-1.9632, -0.1702]]);
        assert!((saddle.trace() + 1.3025).abs() < 1e-4);
        assert!((saddle.det() + 0.9188).abs() < 1e-3);
        assert_eq!(classify_stability(&saddle), Stability::Saddle);
        let sink = Jacobian([[-0.5788, -0.2894], [-2.3530, -2.0521]]);
        assert!((sink.trace() + 2.6309).abs() < 1e-4);
        assert!((sink.det() - 0.5068).abs() < 1e-3);
        assert_eq!(classify_stability(&sink), Stability::Sink);
        assert_eq!(classify_stability(&Jacobian([[0.0, 1.0], [-1.0, 0.0]])), Stability::Center);
        assert_eq!(classify_stability(&Jacobian([[-0.1, 1.0], [-1.0, -0.1]])), Stability::SpiralSink);
        assert_eq!(classify_stability(&Jacobian([[0.1, 1.0], [-1.0, 0.1]])), Stability::SpiralSource);
        assert_eq!(classify_stability(&Jacobian([[1.0, 0.0], [0.0, 2.0]])), Stability::Source);
        assert_eq!(classify_stability(&Jacobian([[1.0, 0.0], [0.0, 0.0]])), Stability::NonHyperbolic);
    }

    #[test]
    fn jacobian_errors_on_singular_axes() {
        let k = KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.8).unwrap().with_exponents(0.4, 1.0).unwrap();
        assert_eq!(
            jacobian(&k, State2::new(0.0, 3.0)),
            Err(EquilibriumError::SingularLinearization { species: Species::U })
        );
        assert!(jacobian(&k, State2::new(1.8, 0.0)).is_ok());
    }

    #[test]
    fn residuals_vanish_on_fixture_sets() {
        let fixtures = [
            example_params(),
            KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.8).unwrap().with_exponents(0.4, 1.0).unwrap(),
            KineticParams::classical(1.0, 2.0, 1.0, 1.0, 0.3, 1.8).unwrap().with_exponents(0.6, 1.0).unwrap(),
            KineticParams::classical(1.0, 2.0, 1.0, 1.0, 0.47, 1.8).unwrap().with_exponents(1.0, 0.9).unwrap(),
            KineticParams::classical(1.0, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap().with_exponents(0.6, 1.0).unwrap(),
            KineticParams::classical(1.0, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap().with_exponents(1.0, 0.5).unwrap(),
            KineticParams::classical(1.0, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap().with_exponents(0.7, 0.8).unwrap(),
        ];
        for k in fixtures {
            let coarse = interior_equilibria_with(&k, 2048);
            let fine = interior_equilibria_with(&k, 8192);
            assert_eq!(coarse.len(), fine.len(), "{k:?}");
            for eq in coarse {
                let r = rhs(&k, eq.point);
                assert!(r.u.abs() < 1e-9 && r.v.abs() < 1e-9, "{k:?} {eq:?} {r:?}");
            }
        }
    }

    #[test]
    fn harvest_model_has_coexistence_sink() {
        let base = KineticParams::classical(1.8, 3.0, 1.0, 1.0, 0.5, 1.7).unwrap().with_exponents(1.0, 0.1).unwrap();
        let h = HarvestParams::new(base, 0.45, 0.55).unwrap();
        let eqs = harvest_equilibria(&h);
        let interior: Vec<_> = eqs.iter().filter(|e| e.kind == EquilibriumKind::Interior).collect();
        assert_eq!(interior.len(), 2);
        assert!(interior.iter().any(|e| e.stability.is_attracting()));
        assert!(interior.iter().any(|e| e.stability == Stability::Saddle));
        for eq in &eqs {
            let r = harvest_rhs(&h, eq.point);
            assert!(r.u.abs() < 1e-9 && r.v.abs() < 1e-9, "{eq:?}");
        }
    }
}
