//! Adaptive quadrature.
//!
//! Adaptive Simpson on finite intervals, with two substitutions layered on
//! top: `x = a + u/(1-u)` for improper upper limits and a square-root change
//! of variables at either endpoint for integrable power singularities (the
//! invariant density of the quadratic interval map and the stationary
//! diffusion laws both need the latter).

use crate::error::{Error, Result};

/// Value and a best-effort error bound.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
}

struct Ctx<'a> {
    f: &'a dyn Fn(f64) -> f64,
    evals: std::cell::Cell<usize>,
    budget: usize,
}

impl Ctx<'_> {
    fn eval(&self, x: f64) -> f64 {
        self.evals.set(self.evals.get() + 1);
        let v = (self.f)(x);
        if v.is_finite() {
            v
        } else {
            0.0 // measure-zero singular points contribute nothing after substitution
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    ctx: &Ctx,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> (f64, f64, bool) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = ctx.eval(lm);
    let frm = ctx.eval(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-15 * (a.abs() + b.abs() + 1.0) {
        return (left + right + delta / 15.0, delta.abs() / 15.0, true);
    }
    if depth == 0 || ctx.evals.get() > ctx.budget {
        return (left + right + delta / 15.0, delta.abs() / 15.0, false);
    }
    let (lv, le, lok) = adapt(ctx, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let (rv, re, rok) = adapt(ctx, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    (lv + rv, le + re, lok && rok)
}

fn adaptive_core(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<QuadratureResult> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "quadrature tol must be > 0, got {tol}"
        )));
    }
    if !(a < b) {
        return Err(Error::Domain(format!("need a < b, got a={a}, b={b}")));
    }
    let ctx = Ctx {
        f,
        evals: std::cell::Cell::new(0),
        budget: 2_000_000,
    };
    // Split the interval to avoid being fooled by symmetric integrands.
    let mut value = 0.0;
    let mut err = 0.0;
    let mut ok = true;
    let nodes = [a, a + 0.25 * (b - a), a + 0.5 * (b - a), b];
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let flo = ctx.eval(lo);
        let fhi = ctx.eval(hi);
        let fmid = ctx.eval(0.5 * (lo + hi));
        let whole = simpson(flo, fmid, fhi, hi - lo);
        let (v, e, this_ok) = adapt(
            &ctx,
            lo,
            hi,
            flo,
            fmid,
            fhi,
            whole,
            tol * (hi - lo) / (b - a),
            60,
        );
        value += v;
        err += e;
        ok &= this_ok;
    }
    if !ok {
        return Err(Error::ToleranceNotMet {
            best: value,
            error_estimate: err,
        });
    }
    Ok(QuadratureResult {
        value,
        error_estimate: err,
    })
}

/// Adaptive quadrature of `f` on the finite interval `[a, b]`.
pub fn adaptive_quad(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<QuadratureResult> {
    adaptive_core(&f, a, b, tol)
}

/// Quadrature of `f` on `[a, +inf)` via the substitution `x = a + u/(1-u)`,
/// which maps `u in [0,1)`; the integrand must decay integrably.
pub fn adaptive_quad_to_inf(f: impl Fn(f64) -> f64, a: f64, tol: f64) -> Result<QuadratureResult> {
    let g = |u: f64| {
        let one_minus = 1.0 - u;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let x = a + u / one_minus;
        f(x) / (one_minus * one_minus)
    };
    adaptive_core(&g, 0.0, 1.0, tol)
}

/// Quadrature on `[a, b]` with a square-root substitution at both endpoints,
/// regularizing integrable singularities like `(x-a)^{-1/2}`.
///
/// The interval splits at its midpoint; on the left half `x = a + s^2`, on
/// the right half `x = b - s^2`.
pub fn adaptive_quad_endpoint_sqrt(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadratureResult> {
    let m = 0.5 * (a + b);
    let left = {
        let g = |s: f64| 2.0 * s * f(a + s * s);
        adaptive_core(&g, 0.0, (m - a).sqrt(), 0.5 * tol)?
    };
    let right = {
        let g = |s: f64| 2.0 * s * f(b - s * s);
        adaptive_core(&g, 0.0, (b - m).sqrt(), 0.5 * tol)?
    };
    Ok(QuadratureResult {
        value: left.value + right.value,
        error_estimate: left.error_estimate + right.error_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_exact() {
        let r = adaptive_quad(|x| x, 0.0, 1.0, 1e-12).unwrap();
        assert!((r.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn improper_exponential() {
        let r = adaptive_quad_to_inf(|x| 2.0 * (-2.0 * x).exp(), 0.0, 1e-11).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn arcsine_density_integrates_to_one() {
        let g = |x: f64| 1.0 / (std::f64::consts::PI * (x * (1.0 - x)).sqrt());
        let r = adaptive_quad_endpoint_sqrt(g, 0.0, 1.0, 1e-9).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn linearity() {
        let f = |x: f64| (3.0 * x).sin();
        let g = |x: f64| (x * x).exp().recip();
        let tol = 1e-10;
        let combined = adaptive_quad(|x| 2.0 * f(x) + 0.5 * g(x), 0.0, 2.0, tol).unwrap();
        let parts = 2.0 * adaptive_quad(f, 0.0, 2.0, tol).unwrap().value
            + 0.5 * adaptive_quad(g, 0.0, 2.0, tol).unwrap().value;
        assert!((combined.value - parts).abs() <= 2.0 * tol);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(adaptive_quad(|x| x, 1.0, 0.0, 1e-8).is_err());
        assert!(adaptive_quad(|x| x, 0.0, 1.0, 0.0).is_err());
    }
}
