//! Three-velocity transport toward a target on a segment: a particle moves
//! on `[0, L]` with velocity in `{-1, 0, +1}` driven by a three-state chain,
//! reflects elastically at 0, restarts at `L` (escape) and is captured with
//! intensity `kappa` while resting inside a window around the target.
//!
//! Between state changes the position is linear in time, so every event time
//! is exact: chain jumps and capture are competing exponential clocks,
//! boundary hits are deterministic.

use crate::chains::IntensityMatrix;
use crate::error::{Error, Result};
use crate::numerics::{sample_exponential, RandomStream};
use rayon::prelude::*;

/// Geometry and rates of the transport model. Regime indices map to
/// velocities as `0 -> -1`, `1 -> 0`, `2 -> +1`.
pub struct VesicleConfig {
    pub length: f64,
    /// Capture window around the target.
    pub window: (f64, f64),
    pub kappa: f64,
    /// 3x3 intensity matrix of the velocity chain.
    pub rates: IntensityMatrix,
}

impl VesicleConfig {
    pub fn new(
        length: f64,
        window: (f64, f64),
        kappa: f64,
        rates: IntensityMatrix,
    ) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::Domain(format!("length must be > 0, got {length}")));
        }
        if rates.n() != 3 {
            return Err(Error::ShapeMismatch {
                expected: "3-state velocity chain".into(),
                got: format!("{} states", rates.n()),
            });
        }
        if !(window.0 < window.1) || window.0 < 0.0 || window.1 > length {
            return Err(Error::Domain(format!(
                "window {window:?} must sit inside [0, {length}]"
            )));
        }
        if kappa < 0.0 {
            return Err(Error::Domain(format!("kappa must be >= 0, got {kappa}")));
        }
        Ok(Self {
            length,
            window,
            kappa,
            rates,
        })
    }

    fn velocity(regime: usize) -> f64 {
        regime as f64 - 1.0
    }
}

/// How one delivery cycle ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleEnd {
    Captured,
    Escaped,
}

/// Capture/escape statistics over an ensemble of cycles.
#[derive(Debug, Clone)]
pub struct VesicleStats {
    pub n_runs: usize,
    pub captures: usize,
    pub escapes: usize,
    pub capture_frequency: f64,
    pub mean_cycle_time: f64,
    /// Fraction of cycles that rested inside the window at least once.
    pub window_rest_frequency: f64,
}

/// One cycle from `(x = 0, v = +1)` to capture or escape.
pub fn vesicle_cycle(
    cfg: &VesicleConfig,
    stream: &mut RandomStream,
) -> Result<(CycleEnd, f64, bool)> {
    let q = cfg.rates.q();
    let mut x = 0.0;
    let mut regime = 2; // v = +1
    let mut t = 0.0;
    let mut rested_in_window = false;
    // generous cap on state changes per cycle; the chain is positive recurrent
    for _ in 0..10_000_000 {
        let v = VesicleConfig::velocity(regime);
        let exit_rate = -q[(regime, regime)];
        let t_switch = if exit_rate > 0.0 {
            sample_exponential(stream, exit_rate)?
        } else {
            f64::INFINITY
        };
        let in_window = x >= cfg.window.0 && x <= cfg.window.1;
        if v == 0.0 && in_window {
            rested_in_window = true;
        }
        let t_capture = if v == 0.0 && in_window && cfg.kappa > 0.0 {
            sample_exponential(stream, cfg.kappa)?
        } else {
            f64::INFINITY
        };
        let t_boundary = if v > 0.0 {
            (cfg.length - x) / v
        } else if v < 0.0 {
            x / (-v)
        } else {
            f64::INFINITY
        };

        let dt = t_switch.min(t_capture).min(t_boundary);
        if !dt.is_finite() {
            return Err(Error::Stall { horizon: t });
        }
        t += dt;
        x += v * dt;

        if dt == t_capture {
            return Ok((CycleEnd::Captured, t, rested_in_window));
        }
        if dt == t_boundary {
            if v > 0.0 {
                return Ok((CycleEnd::Escaped, t, rested_in_window));
            }
            // elastic at 0: turn around
            x = 0.0;
            regime = 2;
            continue;
        }
        // chain switch: categorical over the off-diagonal rates
        let mut u = stream.uniform() * exit_rate;
        for l in 0..3 {
            if l == regime {
                continue;
            }
            u -= q[(regime, l)];
            if u <= 0.0 {
                regime = l;
                break;
            }
        }
    }
    Err(Error::Stall { horizon: t })
}

/// Runs `n_runs` independent cycles (one child stream each, reduced in run
/// order).
pub fn vesicle_preset(
    cfg: &VesicleConfig,
    n_runs: usize,
    parent: &RandomStream,
) -> Result<VesicleStats> {
    if n_runs == 0 {
        return Err(Error::Domain("need at least one run".into()));
    }
    let cycles: Vec<(CycleEnd, f64, bool)> = (0..n_runs)
        .into_par_iter()
        .map(|k| {
            let mut s = parent.child(k as u64);
            vesicle_cycle(cfg, &mut s)
        })
        .collect::<Result<_>>()?;
    let captures = cycles
        .iter()
        .filter(|(e, _, _)| *e == CycleEnd::Captured)
        .count();
    let rest_hits = cycles.iter().filter(|(_, _, r)| *r).count();
    let total_time: f64 = cycles.iter().map(|(_, t, _)| t).sum();
    Ok(VesicleStats {
        n_runs,
        captures,
        escapes: n_runs - captures,
        capture_frequency: captures as f64 / n_runs as f64,
        mean_cycle_time: total_time / n_runs as f64,
        window_rest_frequency: rest_hits as f64 / n_runs as f64,
    })
}
