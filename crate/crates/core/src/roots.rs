//! Bracketed scalar root finding and one-dimensional maximization.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// `f(x)` at the returned root.
    pub fx: f64,
    /// Final bracket; `f` changes sign across it.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

const MAX_ITER: usize = 500;

/// Brent's method: inverse quadratic / secant steps, falling back to
/// bisection whenever the interpolated step leaves the bracket or converges
/// too slowly. Requires `f(lo)` and `f(hi)` of opposite sign (or zero).
pub fn brent<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Result<Root> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::Solver(format!("function is NaN at bracket [{lo}, {hi}]")));
    }
    if fa == 0.0 {
        return Ok(Root { x: a, fx: 0.0, bracket: (a, a), iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: 0.0, bracket: (b, b), iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Solver(format!(
            "no sign change on [{lo}, {hi}]: f = {fa:e}, {fb:e}"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut step = b - a;
    let mut prev_step = step;
    for iter in 1..=MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            step = b - a;
            prev_step = step;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            let other = if fb == 0.0 { b } else { c };
            let bracket = if b < other { (b, other) } else { (other, b) };
            return Ok(Root { x: b, fx: fb, bracket, iterations: iter });
        }
        if prev_step.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((prev_step * q).abs()) {
                prev_step = step;
                step = p / q;
            } else {
                step = m;
                prev_step = m;
            }
        } else {
            step = m;
            prev_step = m;
        }
        a = b;
        fa = fb;
        b += if step.abs() > tol { step } else { tol.copysign(m) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::Solver(format!("function became NaN at {b}")));
        }
    }
    Err(Error::Solver(format!("no convergence after {MAX_ITER} iterations")))
}

/// Grow `hi` geometrically from `lo` until `f(hi)` has the sign opposite to
/// `f(lo)`. Returns the bracket `(lo', hi)` where `lo'` is the last point
/// that kept the sign of `f(lo)`.
pub fn expand_upper<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, factor: f64, cap: f64) -> Result<(f64, f64)> {
    let flo = f(lo);
    let mut last = lo;
    let mut x = hi;
    loop {
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::Solver(format!("function is NaN at {x}")));
        }
        if fx == 0.0 || fx.signum() != flo.signum() {
            return Ok((last, x));
        }
        if x >= cap {
            return Err(Error::Solver(format!(
                "no sign change between {lo} and the cap {cap}; f({lo}) = {flo:e}, f({x}) = {fx:e}"
            )));
        }
        last = x;
        x = (x * factor).min(cap);
    }
}

/// Golden-section search for the maximizer of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > xtol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
