//! Gene-expression presets: random switching between an active and an
//! inactive synthesis regime, and the threshold variants where reactivation
//! is a deterministic jump at a guard level.

use super::{HybridState, SwitchingModel};
use crate::error::{Error, Result};
use crate::numerics::{
    bisect_root, rk4_flow, sample_exponential, scalar_field, FnField, RandomStream,
};
use std::sync::Arc;

/// Single-substance model `x' = production * i - decay * x` with constant
/// switching rates between inactive (0) and active (1).
pub fn switching_1d(production: f64, decay: f64, q01: f64, q10: f64) -> Result<SwitchingModel> {
    if !(production > 0.0) || !(decay > 0.0) || q01 < 0.0 || q10 < 0.0 {
        return Err(Error::Domain("rates must be positive".into()));
    }
    let cap = production / decay;
    let scan: Vec<Vec<f64>> = (0..=8).map(|k| vec![cap * k as f64 / 8.0]).collect();
    SwitchingModel::new(
        vec![
            Box::new(scalar_field(move |x| -decay * x)),
            Box::new(scalar_field(move |x| production - decay * x)),
        ],
        move |k, l, _| match (k, l) {
            (0, 1) => q01,
            (1, 0) => q10,
            _ => 0.0,
        },
        q01.max(q10) + 1e-12,
        move |x, tol| x[0] >= -tol && x[0] <= cap + tol,
        0.01,
        &scan,
    )
}

/// Two-substance cascade: transcript `x1' = input * i - decay1 * x1`,
/// product `x2' = transfer * x1 - decay2 * x2`, with bounded state-dependent
/// switching rates. The invariant region is the rectangle
/// `[0, input/decay1] x [0, input*transfer/(decay1*decay2)]`.
#[allow(clippy::too_many_arguments)]
pub fn switching_2d(
    input: f64,
    decay1: f64,
    transfer: f64,
    decay2: f64,
    q01: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    q10: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    rate_bound: f64,
    flow_dt: f64,
) -> Result<SwitchingModel> {
    let cap1 = input / decay1;
    let cap2 = input * transfer / (decay1 * decay2);
    let mut scan = Vec::new();
    for i in 0..=4 {
        for j in 0..=4 {
            scan.push(vec![cap1 * i as f64 / 4.0, cap2 * j as f64 / 4.0]);
        }
    }
    let q01 = Arc::new(q01);
    let q10 = Arc::new(q10);
    SwitchingModel::new(
        vec![
            Box::new(FnField::new(2, move |x: &[f64], out: &mut [f64]| {
                out[0] = -decay1 * x[0];
                out[1] = transfer * x[0] - decay2 * x[1];
            })),
            Box::new(FnField::new(2, move |x: &[f64], out: &mut [f64]| {
                out[0] = input - decay1 * x[0];
                out[1] = transfer * x[0] - decay2 * x[1];
            })),
        ],
        move |k, l, x| match (k, l) {
            (0, 1) => q01(x),
            (1, 0) => q10(x),
            _ => 0.0,
        },
        rate_bound,
        move |x, tol| x[0] >= -tol && x[0] <= cap1 + tol && x[1] >= -tol && x[1] <= cap2 + tol,
        flow_dt,
        &scan,
    )
}

/// One production/decay cycle of the threshold gene.
#[derive(Debug, Clone, Copy)]
pub struct GeneCycle {
    /// Substance level when the gene switched off.
    pub x_off: f64,
    pub active_duration: f64,
    pub inactive_duration: f64,
}

/// Normalized single-substance threshold model (`production = decay = 1`):
/// the active flow is `x(s) = 1 + (x0 - 1) e^{-s}`, deactivation fires with
/// rate `q10(x)` while `x > theta`, and the gene reactivates deterministically
/// when the decaying level hits `theta`.
pub struct ThresholdGene1D {
    pub theta: f64,
    q10: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub rate_bound: f64,
    pub stall_horizon: f64,
}

impl ThresholdGene1D {
    pub fn new(
        theta: f64,
        q10: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rate_bound: f64,
        stall_horizon: f64,
    ) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(Error::Domain(format!("theta must be > 0, got {theta}")));
        }
        Ok(Self {
            theta,
            q10: Arc::new(q10),
            rate_bound,
            stall_horizon,
        })
    }

    pub fn q10_at(&self, x: f64) -> f64 {
        (self.q10)(x)
    }

    /// Active flow from `x0` (normalized units).
    pub fn active_flow(x0: f64, s: f64) -> f64 {
        1.0 + (x0 - 1.0) * (-s).exp()
    }
}

/// Simulates `n_cycles` activation/deactivation cycles starting active at
/// `x = theta`.
///
/// Active durations are sampled by thinning with a rate that vanishes at or
/// below the guard; the inactive duration is found by bisecting the guard
/// crossing of the decaying flow to 1e-10 time resolution. A phase that
/// outlives `stall_horizon` reports an unreachable guard.
pub fn simulate_threshold_gene_1d(
    gene: &ThresholdGene1D,
    n_cycles: usize,
    stream: &mut RandomStream,
) -> Result<Vec<GeneCycle>> {
    let theta = gene.theta;
    let mut cycles = Vec::with_capacity(n_cycles);
    for _ in 0..n_cycles {
        // Active phase: thinning along the closed-form flow.
        let mut active = 0.0;
        loop {
            active += sample_exponential(stream, gene.rate_bound)?;
            if active > gene.stall_horizon {
                return Err(Error::Stall {
                    horizon: gene.stall_horizon,
                });
            }
            let x = ThresholdGene1D::active_flow(theta, active);
            let rate = if x > theta { gene.q10_at(x) } else { 0.0 };
            if rate > gene.rate_bound * (1.0 + 1e-9) {
                return Err(Error::BoundViolation {
                    bound: gene.rate_bound,
                    observed: rate,
                });
            }
            if stream.uniform() * gene.rate_bound <= rate {
                break;
            }
        }
        let x_off = ThresholdGene1D::active_flow(theta, active);

        // Inactive phase: decay from x_off to theta, located by bisection.
        let guard = |t: f64| x_off * (-t).exp() - theta;
        let mut hi = 1.0;
        while guard(hi) > 0.0 {
            hi *= 2.0;
            if hi > gene.stall_horizon {
                return Err(Error::Stall {
                    horizon: gene.stall_horizon,
                });
            }
        }
        let inactive = bisect_root(guard, 0.0, hi, 1e-10)?;
        cycles.push(GeneCycle {
            x_off,
            active_duration: active,
            inactive_duration: inactive,
        });
    }
    Ok(cycles)
}

/// Threshold variant of the linear synthesis cascade (two stages, or three
/// with a precursor step): the gene deactivates with rate `q10(x)` which
/// must vanish when the final substance sits at or below `theta`, and
/// reactivates when that substance falls through `theta`.
pub struct CascadeThresholdGene {
    /// Production into the first variable while active.
    pub input: f64,
    /// `decay[k]` multiplies `-x_k`; for intermediate stages it includes the
    /// conversion loss.
    pub decay: Vec<f64>,
    /// `transfer[k]` feeds `x_k` into `x_{k+1}`.
    pub transfer: Vec<f64>,
    pub theta: f64,
    q10: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub rate_bound: f64,
    pub stall_horizon: f64,
    pub flow_dt: f64,
}

/// Sampled point of a cascade simulation.
#[derive(Debug, Clone)]
pub struct CascadeSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub active: bool,
}

/// Cascade trajectory: samples on a regular clock plus phase-change counts.
#[derive(Debug, Clone)]
pub struct CascadeTrajectory {
    pub samples: Vec<CascadeSample>,
    pub activations: usize,
    pub deactivations: usize,
    pub final_state: HybridState,
}

impl CascadeThresholdGene {
    /// Two-stage model.
    pub fn two_stage(
        input: f64,
        decay1: f64,
        transfer: f64,
        decay2: f64,
        theta: f64,
        q10: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        rate_bound: f64,
    ) -> Self {
        Self {
            input,
            decay: vec![decay1, decay2],
            transfer: vec![transfer],
            theta,
            q10: Arc::new(q10),
            rate_bound,
            stall_horizon: 1e4,
            flow_dt: 0.01,
        }
    }

    /// Three-stage model with a precursor: the first decay entry must
    /// include the conversion rate.
    #[allow(clippy::too_many_arguments)]
    pub fn three_stage(
        input: f64,
        conversion: f64,
        precursor_decay: f64,
        transfer2: f64,
        decay2: f64,
        transfer3: f64,
        decay3: f64,
        theta: f64,
        q10: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        rate_bound: f64,
    ) -> Self {
        Self {
            input,
            decay: vec![conversion + precursor_decay, decay2, decay3],
            transfer: vec![transfer2, transfer3],
            theta,
            q10: Arc::new(q10),
            rate_bound,
            stall_horizon: 1e4,
            flow_dt: 0.01,
        }
    }

    pub fn dims(&self) -> usize {
        self.decay.len()
    }

    /// Upper corner of the invariant box.
    pub fn upper_bounds(&self) -> Vec<f64> {
        let mut caps = Vec::with_capacity(self.dims());
        let mut cap = self.input / self.decay[0];
        caps.push(cap);
        for k in 1..self.dims() {
            cap = self.transfer[k - 1] * cap / self.decay[k];
            caps.push(cap);
        }
        caps
    }

    fn field(&self, active: bool) -> FnField<impl Fn(&[f64], &mut [f64]) + '_> {
        let dims = self.dims();
        FnField::new(dims, move |x: &[f64], out: &mut [f64]| {
            out[0] = if active { self.input } else { 0.0 } - self.decay[0] * x[0];
            for k in 1..dims {
                out[k] = self.transfer[k - 1] * x[k - 1] - self.decay[k] * x[k];
            }
        })
    }

    fn check_region(&self, x: &[f64], t: f64) -> Result<()> {
        let caps = self.upper_bounds();
        let tol = 1e-9;
        for (k, &v) in x.iter().enumerate() {
            if v < -tol || v > caps[k] * (1.0 + tol) + tol {
                return Err(Error::RegionViolation {
                    t,
                    state: x.to_vec(),
                });
            }
        }
        Ok(())
    }
}

/// Simulates the cascade threshold gene, sampling the state every
/// `sample_every` time units. Guard crossings (final substance falling
/// through `theta` while inactive) are located by bisection on the flow to
/// 1e-10 time resolution.
pub fn simulate_threshold_gene_cascade(
    gene: &CascadeThresholdGene,
    x0: Vec<f64>,
    start_active: bool,
    horizon: f64,
    sample_every: f64,
    stream: &mut RandomStream,
) -> Result<CascadeTrajectory> {
    if x0.len() != gene.dims() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} coordinates", gene.dims()),
            got: format!("{}", x0.len()),
        });
    }
    let last = gene.dims() - 1;
    let mut t = 0.0;
    let mut x = x0;
    let mut active = start_active;
    let mut samples = Vec::new();
    let mut next_sample = sample_every;
    let mut activations = 0usize;
    let mut deactivations = 0usize;
    let mut phase_elapsed = 0.0;

    let mut next_proposal = t + sample_exponential(stream, gene.rate_bound)?;

    while t < horizon {
        let target = next_proposal.min(horizon).min(next_sample);
        let field = gene.field(active);
        let mut remaining = target - t;
        while remaining > 1e-15 {
            let h = gene.flow_dt.min(remaining);
            let prev_last = x[last];
            let x_new = crate::numerics::rk4_step(&field, &x, t, h)?;
            // inactive-phase guard: the product falls through theta
            if !active && prev_last > gene.theta && x_new[last] <= gene.theta {
                let base = x.clone();
                let crossing = bisect_root(
                    |dt| {
                        rk4_flow(&field, &base, dt, gene.flow_dt)
                            .map(|y| y[last] - gene.theta)
                            .unwrap_or(f64::NAN)
                    },
                    0.0,
                    h,
                    1e-10,
                )?;
                x = rk4_flow(&field, &base, crossing, gene.flow_dt)?;
                t += crossing;
                active = true;
                activations += 1;
                phase_elapsed = 0.0;
                // re-draw the proposal clock for the new phase
                next_proposal = t + sample_exponential(stream, gene.rate_bound)?;
                break;
            }
            x = x_new;
            t += h;
            remaining -= h;
            phase_elapsed += h;
            gene.check_region(&x, t)?;
            if phase_elapsed > gene.stall_horizon {
                return Err(Error::Stall {
                    horizon: gene.stall_horizon,
                });
            }
        }
        if remaining > 1e-15 {
            continue; // guard fired mid-flow
        }
        t = target;

        if target == next_sample {
            samples.push(CascadeSample {
                t,
                x: x.clone(),
                active,
            });
            next_sample += sample_every;
            continue;
        }
        if target == horizon && horizon < next_proposal {
            break;
        }
        // deactivation attempt (thinning)
        let rate = if active && x[last] > gene.theta {
            (gene.q10)(&x)
        } else {
            0.0
        };
        if rate > gene.rate_bound * (1.0 + 1e-9) {
            return Err(Error::BoundViolation {
                bound: gene.rate_bound,
                observed: rate,
            });
        }
        if active && stream.uniform() * gene.rate_bound <= rate {
            active = false;
            deactivations += 1;
            phase_elapsed = 0.0;
        }
        next_proposal = t + sample_exponential(stream, gene.rate_bound)?;
    }

    Ok(CascadeTrajectory {
        samples,
        activations,
        deactivations,
        final_state: HybridState {
            x,
            regime: usize::from(active),
            t,
        },
    })
}
