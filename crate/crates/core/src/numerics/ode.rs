//! Deterministic flows: classical fixed-step 4th-order Runge-Kutta.
//!
//! Fixed step is deliberate: cost is deterministic and runs replay exactly,
//! which the simulation engines rely on.

use crate::error::{Error, Result};

/// A time-independent velocity field `x' = b(x)`.
pub trait FlowField {
    fn dimension(&self) -> usize;
    /// Writes `b(x)` into `out`; must be deterministic in `x`.
    fn evaluate(&self, x: &[f64], out: &mut [f64]);
}

/// Wraps a closure as a [`FlowField`].
pub struct FnField<F: Fn(&[f64], &mut [f64])> {
    dimension: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnField<F> {
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> FlowField for FnField<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn evaluate(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Scalar field helper for the many 1-D models.
pub fn scalar_field(f: impl Fn(f64) -> f64) -> FnField<impl Fn(&[f64], &mut [f64])> {
    FnField::new(1, move |x, out| out[0] = f(x[0]))
}

fn finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// One RK4 step of size `dt` from `x`; errors with the last valid state if the
/// field turns non-finite.
pub fn rk4_step(field: &dyn FlowField, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    let d = x.len();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];

    field.evaluate(x, &mut k1);
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    field.evaluate(&tmp, &mut k2);
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    field.evaluate(&tmp, &mut k3);
    for i in 0..d {
        tmp[i] = x[i] + dt * k3[i];
    }
    field.evaluate(&tmp, &mut k4);

    let mut out = vec![0.0; d];
    for i in 0..d {
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if !finite(&out) || !finite(&k1) {
        return Err(Error::NonFinite {
            t,
            state: x.to_vec(),
        });
    }
    Ok(out)
}

/// Flows `x0` for duration `t` with fixed step `dt` (final partial step lands
/// exactly on `t`).
pub fn rk4_flow(field: &dyn FlowField, x0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("rk4 step must be > 0, got {dt}")));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("rk4 duration must be >= 0, got {t}")));
    }
    if x0.len() != field.dimension() {
        return Err(Error::ShapeMismatch {
            expected: format!("dimension {}", field.dimension()),
            got: format!("dimension {}", x0.len()),
        });
    }
    let mut x = x0.to_vec();
    let mut elapsed = 0.0;
    while elapsed < t {
        let h = dt.min(t - elapsed);
        if h <= 0.0 {
            break;
        }
        x = rk4_step(field, &x, elapsed, h)?;
        elapsed += h;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_identity() {
        let f = scalar_field(|_| 0.0);
        let out = rk4_flow(&f, &[7.0], 5.0, 0.1).unwrap();
        assert_eq!(out[0], 7.0);
    }

    #[test]
    fn exponential_growth() {
        let f = scalar_field(|x| x);
        let out = rk4_flow(&f, &[1.0], 1.0, 1e-3).unwrap();
        assert!((out[0] - std::f64::consts::E).abs() < 1e-6, "{}", out[0]);
    }

    #[test]
    fn relaxation_to_one() {
        // x' = 1 - x from x_b has solution 1 + (x_b - 1) e^{-t}.
        let f = scalar_field(|x| 1.0 - x);
        for &(xb, t) in &[(0.2, 0.7), (3.0, 2.5), (1.0, 1.0)] {
            let out = rk4_flow(&f, &[xb], t, 1e-3).unwrap();
            let exact = 1.0 + (xb - 1.0) * (-t).exp();
            assert!((out[0] - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn semiflow_composition() {
        let f = scalar_field(|x| x * (1.0 - x));
        let (s, t) = (0.8, 1.3);
        let whole = rk4_flow(&f, &[0.1], s + t, 1e-3).unwrap();
        let part = rk4_flow(&f, &rk4_flow(&f, &[0.1], s, 1e-3).unwrap(), t, 1e-3).unwrap();
        assert!((whole[0] - part[0]).abs() < 1e-9);
    }

    #[test]
    fn blowup_reports_last_state() {
        // x' = x^2 from 1 blows up at t = 1.
        let f = scalar_field(|x| x * x);
        let err = rk4_flow(&f, &[1.0], 2.0, 1e-3).unwrap_err();
        match err {
            Error::NonFinite { t, state } => {
                assert!(t < 2.0);
                assert!(state[0].is_finite());
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
