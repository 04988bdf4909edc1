//! Structured-population solvers: age transport with a renewal boundary,
//! size-structured division, and the age-initial-size cell-cycle model, all
//! with Malthusian-rate estimation.
//!
//! Mass vectors here are population masses, not probability masses: totals
//! grow or decay, and the growth exponent is the object of interest.

mod cell_cycle;
mod size_division;

pub use cell_cycle::{
    aeg_residual, cellcycle_evolve, size_age_pushforward, AssumptionReport, CellCycleModel,
    CellCycleTrajectory, CellGrid,
};
pub use size_division::{size_division_evolve, SizeDivisionModel, SizeTrajectory};

use crate::error::{Error, Result};
use crate::numerics::{adaptive_quad, bisect_root};
use std::sync::Arc;

/// Age-structured model: death rate `mu(a)`, birth rate `psi(a)` with
/// compact support, on the age interval `[0, a_max]`.
#[derive(Clone)]
pub struct McKendrickModel {
    mu: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    psi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub a_max: f64,
    pub n_cells: usize,
}

impl McKendrickModel {
    pub fn new(
        mu: impl Fn(f64) -> f64 + Send + Sync + 'static,
        psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a_max: f64,
        n_cells: usize,
    ) -> Result<Self> {
        if !(a_max > 0.0) || n_cells == 0 {
            return Err(Error::Domain("need a_max > 0 and at least one cell".into()));
        }
        for k in 0..=32 {
            let a = a_max * k as f64 / 32.0;
            if mu(a) < 0.0 || psi(a) < 0.0 {
                return Err(Error::Domain(format!("rates must be nonnegative at a={a}")));
            }
        }
        Ok(Self {
            mu: Arc::new(mu),
            psi: Arc::new(psi),
            a_max,
            n_cells,
        })
    }

    pub fn da(&self) -> f64 {
        self.a_max / self.n_cells as f64
    }

    pub fn mu_at(&self, a: f64) -> f64 {
        (self.mu)(a)
    }

    pub fn psi_at(&self, a: f64) -> f64 {
        (self.psi)(a)
    }

    /// Survival to age `a`: `exp(-int_0^a mu)`.
    pub fn survival(&self, a: f64) -> Result<f64> {
        if a <= 0.0 {
            return Ok(1.0);
        }
        let m = self.mu.clone();
        let cum = adaptive_quad(move |s| m(s), 0.0, a, 1e-11)?.value;
        Ok((-cum).exp())
    }
}

/// Output of an age-model run.
#[derive(Debug, Clone)]
pub struct AgeTrajectory {
    pub times: Vec<f64>,
    pub total_mass: Vec<f64>,
    /// Birth-rate trajectory (mass injected at age zero per unit time).
    pub birth_rate: Vec<f64>,
    pub final_masses: Vec<f64>,
    /// Mass lost by ageing past `a_max` over the whole run.
    pub aged_out: f64,
}

/// Upwind transport in age with exact per-cell exponential decay and a
/// renewal boundary integrating `psi * u` (midpoint rule on cell masses,
/// averaged before/after the transport half of the step).
///
/// `dt` must not exceed the cell width; with `dt = da` the transport is an
/// exact shift. Mass ageing past `a_max` leaves the grid and is reported.
pub fn mckendrick_evolve(
    model: &McKendrickModel,
    u0: &[f64],
    dt: f64,
    horizon: f64,
) -> Result<AgeTrajectory> {
    let n = model.n_cells;
    if u0.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} age cells"),
            got: format!("{}", u0.len()),
        });
    }
    if u0.iter().any(|&m| m < 0.0) {
        return Err(Error::Domain("initial masses must be nonnegative".into()));
    }
    let da = model.da();
    if dt > da * (1.0 + 1e-12) {
        return Err(Error::StepSize(format!(
            "dt = {dt} exceeds the age cell width {da}"
        )));
    }
    let c = dt / da;
    let decay: Vec<f64> = (0..n)
        .map(|j| (-model.mu_at((j as f64 + 0.5) * da) * dt).exp())
        .collect();
    let psi_mid: Vec<f64> = (0..n)
        .map(|j| model.psi_at((j as f64 + 0.5) * da))
        .collect();

    let birth_integral =
        |m: &[f64]| -> f64 { m.iter().zip(&psi_mid).map(|(mi, pi)| mi * pi).sum() };

    let steps = (horizon / dt).round().max(1.0) as usize;
    let mut masses = u0.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut totals = Vec::with_capacity(steps + 1);
    let mut births = Vec::with_capacity(steps + 1);
    let mut aged_out = 0.0;
    times.push(0.0);
    totals.push(masses.iter().sum());
    births.push(birth_integral(&masses));

    let mut scratch = vec![0.0; n];
    for k in 1..=steps {
        let beta0 = birth_integral(&masses);
        // decay then upwind shift toward higher ages
        for j in 0..n {
            scratch[j] = masses[j] * decay[j];
        }
        aged_out += scratch[n - 1] * c;
        for j in (1..n).rev() {
            scratch[j] = scratch[j] * (1.0 - c) + scratch[j - 1] * c;
        }
        scratch[0] *= 1.0 - c;
        let beta1 = birth_integral(&scratch);
        scratch[0] += dt * 0.5 * (beta0 + beta1);
        masses.copy_from_slice(&scratch);

        times.push(k as f64 * dt);
        totals.push(masses.iter().sum());
        births.push(birth_integral(&masses));
    }
    Ok(AgeTrajectory {
        times,
        total_mass: totals,
        birth_rate: births,
        final_masses: masses,
        aged_out,
    })
}

/// Quadrature over `[a, b]` in fixed segments, each refined adaptively:
/// narrow features (reproduction bursts) cannot hide between the probe
/// points of a single adaptive call.
fn quad_segmented(
    f: impl Fn(f64) -> f64 + Copy,
    a: f64,
    b: f64,
    segments: usize,
    tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let seg_tol = tol / segments as f64;
    for k in 0..segments {
        let lo = a + (b - a) * k as f64 / segments as f64;
        let hi = a + (b - a) * (k + 1) as f64 / segments as f64;
        total += adaptive_quad(f, lo, hi, seg_tol)?.value;
    }
    Ok(total)
}

/// Characteristic-equation root: the unique real `lambda` with
/// `int_0^a_max e^{-lambda a} psi(a) exp(-int_0^a mu) da = 1`.
///
/// This is an independent quadrature-based oracle for the growth rate of the
/// age model, never touching the PDE discretization.
pub fn lotka_rate(model: &McKendrickModel) -> Result<f64> {
    let characteristic = |lambda: f64| -> Result<f64> {
        let m = model.clone();
        let integrand = move |a: f64| {
            let psi = m.psi_at(a);
            if psi == 0.0 {
                return 0.0;
            }
            let surv = m.survival(a).unwrap_or(0.0);
            (-lambda * a).exp() * psi * surv
        };
        let v = quad_segmented(&integrand, 0.0, model.a_max, 256, 1e-11)?;
        Ok(v - 1.0)
    };
    let k0 = characteristic(0.0)?;
    if k0.abs() < 1e-13 {
        return Ok(0.0);
    }
    // K is decreasing in lambda; expand a bracket around 0.
    let (mut lo, mut hi) = (0.0, 0.0);
    if k0 > 0.0 {
        hi = 1.0;
        while characteristic(hi)? > 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Bracket { f_lo: k0, f_hi: hi });
            }
        }
    } else {
        lo = -1.0;
        while characteristic(lo)? < 0.0 {
            lo *= 2.0;
            if lo < -1e6 {
                return Err(Error::Bracket { f_lo: lo, f_hi: k0 });
            }
        }
    }
    bisect_root(|l| characteristic(l).unwrap_or(f64::NAN), lo, hi, 1e-12)
}

/// Least-squares slope of `ln(mass)` over a time window, with the fit's R².
pub fn malthus_estimate(times: &[f64], masses: &[f64], window: (f64, f64)) -> Result<(f64, f64)> {
    if times.len() != masses.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} masses", times.len()),
            got: format!("{}", masses.len()),
        });
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(masses)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, m)| (*t, *m))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Domain(format!(
            "window [{}, {}] holds {} points, need at least 2",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if pts.iter().any(|(_, m)| !(*m > 0.0)) {
        return Err(Error::Domain("nonpositive mass inside the window".into()));
    }
    let n = pts.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (t, m) in &pts {
        let y = m.ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom.abs() < 1e-300 {
        return Err(Error::Domain("degenerate time window".into()));
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    let mean_y = sy / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (t, m) in &pts {
        let y = m.ln();
        ss_res += (y - slope * t - intercept).powi(2);
        ss_tot += (y - mean_y).powi(2);
    }
    let r_squared = if ss_tot > 1e-300 {
        1.0 - ss_res / ss_tot
    } else if ss_res < 1e-300 {
        1.0
    } else {
        0.0
    };
    Ok((slope, r_squared))
}

/// Distributes `factor * masses[i]` over a uniform target grid according to
/// the image intervals `[mapped_edges[i], mapped_edges[i+1]]` of a monotone
/// map, proportionally to overlap. Mass falling outside the target range is
/// returned (not silently dropped).
pub(crate) fn rebin_monotone(
    mapped_edges: &[f64],
    masses: &[f64],
    target_lo: f64,
    target_width: f64,
    out: &mut [f64],
    factor: f64,
) -> f64 {
    debug_assert_eq!(mapped_edges.len(), masses.len() + 1);
    let n_out = out.len();
    let mut lost = 0.0;
    for (i, &m) in masses.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let total = factor * m;
        let (mut a, mut b) = (mapped_edges[i], mapped_edges[i + 1]);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if b - a < 1e-300 {
            // degenerate image: all mass into the containing cell
            let idx = ((a - target_lo) / target_width).floor();
            if idx < 0.0 || idx >= n_out as f64 {
                lost += total;
            } else {
                out[idx as usize] += total;
            }
            continue;
        }
        let inv_len = 1.0 / (b - a);
        let first = (((a - target_lo) / target_width).floor().max(0.0)) as usize;
        let last = ((((b - target_lo) / target_width).ceil().max(0.0)) as usize).min(n_out);
        // clip below/above the grid
        if a < target_lo {
            lost += total * (target_lo - a).min(b - a) * inv_len;
        }
        if b > target_lo + n_out as f64 * target_width {
            let hi = target_lo + n_out as f64 * target_width;
            lost += total * (b - hi.max(a)) * inv_len;
        }
        for (k, slot) in out.iter_mut().enumerate().take(last).skip(first) {
            let c_lo = target_lo + k as f64 * target_width;
            let c_hi = c_lo + target_width;
            let ov = (b.min(c_hi) - a.max(c_lo)).max(0.0);
            if ov > 0.0 {
                *slot += total * ov * inv_len;
            }
        }
    }
    lost
}
