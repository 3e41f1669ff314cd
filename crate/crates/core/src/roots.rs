//! Scalar root location on a bounded interval: dense sign scan, bracketing,
//! and a safeguarded Newton polish. Tangential roots are picked up from local
//! extrema of the sampled function.

/// Default number of interior scan points.
pub const SCAN_POINTS: usize = 2048;

/// A root is accepted once the scalar residual is below this.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    /// The function touches zero without changing sign.
    pub tangential: bool,
}

/// All roots of `h` on the open interval `(lo, hi)`, sorted ascending.
pub fn find_roots<F: Fn(f64) -> f64>(h: F, lo: f64, hi: f64, points: usize) -> Vec<Root> {
    if !(hi > lo) || points < 3 {
        return Vec::new();
    }
    let step = (hi - lo) / (points as f64 + 1.0);
    let xs: Vec<f64> = (1..=points).map(|i| lo + step * i as f64).collect();
    let hs: Vec<f64> = xs.iter().map(|&x| h(x)).collect();

    let mut roots = Vec::new();
    for i in 0..points {
        if !hs[i].is_finite() {
            continue;
        }
        if hs[i] == 0.0 {
            roots.push(Root { x: xs[i], residual: 0.0, tangential: false });
            continue;
        }
        if i + 1 < points && hs[i + 1].is_finite() && hs[i + 1] != 0.0 && hs[i].signum() != hs[i + 1].signum() {
            roots.push(refine(&h, xs[i], xs[i + 1], hs[i]));
            continue;
        }
        // interior extremum without a sign change on either side
        if i == 0 || i + 1 == points {
            continue;
        }
        let (hl, hm, hr) = (hs[i - 1], hs[i], hs[i + 1]);
        if !(hl.is_finite() && hr.is_finite()) || hl.signum() != hm.signum() || hr.signum() != hm.signum() {
            continue;
        }
        let s = hm.signum();
        if !((hl - hm) * s > 0.0 && (hr - hm) * s >= 0.0) {
            continue;
        }
        // minimise s*h on [x_{i-1}, x_{i+1}]
        let (xe, he) = golden_min(|x| s * h(x), xs[i - 1], xs[i + 1]);
        let he = s * he;
        if he.signum() != s && he != 0.0 {
            roots.push(refine(&h, xs[i - 1], xe, hl));
            roots.push(refine(&h, xe, xs[i + 1], he));
        } else if he.abs() <= RESIDUAL_TOL {
            roots.push(Root { x: xe, residual: he, tangential: true });
        }
    }
    roots.sort_by(|a, b| a.x.total_cmp(&b.x));
    roots.dedup_by(|b, a| (a.x - b.x).abs() <= 4.0 * f64::EPSILON * a.x.abs().max(1.0));
    roots
}

/// Bisection down to a few ulps, then Newton steps kept inside the bracket.
fn refine<F: Fn(f64) -> f64>(h: &F, mut a: f64, mut b: f64, ha: f64) -> Root {
    let sa = ha.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let hm = h(m);
        if hm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if hm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    let mut x = 0.5 * (a + b);
    let mut hx = h(x);
    for _ in 0..4 {
        if hx.abs() < RESIDUAL_TOL * 1e-3 {
            break;
        }
        let dx = 1e-7 * x.abs().max(1e-8);
        let slope = (h(x + dx) - h(x - dx)) / (2.0 * dx);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let xn = x - hx / slope;
        if !(xn >= a && xn <= b) {
            break;
        }
        let hn = h(xn);
        if hn.abs() >= hx.abs() {
            break;
        }
        x = xn;
        hx = hn;
    }
    Root { x, residual: hx, tangential: false }
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 2.0 * f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
