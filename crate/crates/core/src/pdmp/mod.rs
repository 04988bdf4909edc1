//! Piecewise-deterministic Markov processes: deterministic flow between
//! random jump times.
//!
//! The sampling backbone is thinning — propose exponential times at a
//! declared rate bound and accept with probability `rate/bound` evaluated on
//! the flowed state — which draws the first-jump law
//! `F(t) = 1 - exp(-int_0^t psi)` exactly without needing an antiderivative.

pub mod gene;
pub mod kangaroo;
pub mod telegraph;
pub mod vesicle;

use crate::error::{Error, Result};
use crate::numerics::{rk4_flow, rk4_step, sample_exponential, FlowField, RandomStream};

/// State of a hybrid simulation: continuous position plus a discrete regime.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub x: Vec<f64>,
    pub regime: usize,
    pub t: f64,
}

impl HybridState {
    pub fn new(x: Vec<f64>, regime: usize) -> Self {
        Self { x, regime, t: 0.0 }
    }
}

/// First-jump time along a flow with rate `psi` bounded by `bound`:
/// `rate_along(s)` must return the rate at elapsed time `s` on the flowed
/// trajectory. Exact in law by thinning.
pub fn next_jump_time(
    rate_along: impl Fn(f64) -> f64,
    bound: f64,
    stream: &mut RandomStream,
) -> Result<f64> {
    if !(bound > 0.0) {
        return Err(Error::Domain(format!(
            "rate bound must be > 0, got {bound}"
        )));
    }
    let mut elapsed = 0.0;
    loop {
        elapsed += sample_exponential(stream, bound)?;
        let rate = rate_along(elapsed);
        if rate > bound * (1.0 + 1e-9) {
            return Err(Error::BoundViolation {
                bound,
                observed: rate,
            });
        }
        if rate < 0.0 {
            return Err(Error::Domain(format!("negative rate {rate}")));
        }
        if stream.uniform() * bound <= rate {
            return Ok(elapsed);
        }
    }
}

/// Convenience wrapper flowing a concrete field while thinning: the rate is
/// evaluated on the RK4-flowed position.
pub fn next_jump_time_on_flow(
    field: &dyn FlowField,
    psi: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    flow_dt: f64,
    bound: f64,
    stream: &mut RandomStream,
) -> Result<f64> {
    // positions are re-flowed from x0 per proposal; proposals per jump are
    // O(bound / mean rate), cheap for the bounded rates used here
    let last_err = std::cell::RefCell::new(None);
    let t = next_jump_time(
        |s| match rk4_flow(field, x0, s, flow_dt) {
            Ok(x) => psi(&x),
            Err(e) => {
                *last_err.borrow_mut() = Some(e);
                f64::INFINITY
            }
        },
        bound,
        stream,
    );
    match (t, last_err.into_inner()) {
        (_, Some(flow_err)) => Err(flow_err),
        (other, None) => other,
    }
}

/// A finite family of flows with state-dependent switching rates on a
/// declared invariant region.
pub struct SwitchingModel {
    flows: Vec<Box<dyn FlowField + Send + Sync>>,
    /// `q(k, l, x)`: rate of jumping from regime `k` to `l != k` at position `x`.
    rates: Box<dyn Fn(usize, usize, &[f64]) -> f64 + Send + Sync>,
    /// Declared bound on the total exit rate, any regime, any position.
    rate_bound: f64,
    /// Membership test for the invariant region (with tolerance).
    region: Box<dyn Fn(&[f64], f64) -> bool + Send + Sync>,
    flow_dt: f64,
}

impl SwitchingModel {
    /// `scan_points` are representative positions used to verify the
    /// declared exit-rate bound.
    pub fn new(
        flows: Vec<Box<dyn FlowField + Send + Sync>>,
        rates: impl Fn(usize, usize, &[f64]) -> f64 + Send + Sync + 'static,
        rate_bound: f64,
        region: impl Fn(&[f64], f64) -> bool + Send + Sync + 'static,
        flow_dt: f64,
        scan_points: &[Vec<f64>],
    ) -> Result<Self> {
        if flows.is_empty() {
            return Err(Error::Domain("need at least one regime".into()));
        }
        if !(flow_dt > 0.0) {
            return Err(Error::Domain("flow step must be positive".into()));
        }
        let n = flows.len();
        for p in scan_points {
            for k in 0..n {
                let total: f64 = (0..n).filter(|&l| l != k).map(|l| rates(k, l, p)).sum();
                if total > rate_bound + 1e-12 {
                    return Err(Error::BoundViolation {
                        bound: rate_bound,
                        observed: total,
                    });
                }
            }
        }
        Ok(Self {
            flows,
            rates: Box::new(rates),
            rate_bound,
            region: Box::new(region),
            flow_dt,
        })
    }

    pub fn n_regimes(&self) -> usize {
        self.flows.len()
    }

    pub fn total_exit_rate(&self, regime: usize, x: &[f64]) -> f64 {
        (0..self.n_regimes())
            .filter(|&l| l != regime)
            .map(|l| (self.rates)(regime, l, x))
            .sum()
    }

    pub fn rate(&self, from: usize, to: usize, x: &[f64]) -> f64 {
        (self.rates)(from, to, x)
    }

    pub fn flow(&self, regime: usize) -> &dyn FlowField {
        self.flows[regime].as_ref()
    }

    pub fn flow_dt(&self) -> f64 {
        self.flow_dt
    }
}

/// One regime change.
#[derive(Debug, Clone)]
pub struct JumpEvent {
    pub t: f64,
    pub from: usize,
    pub to: usize,
    pub x: Vec<f64>,
}

/// Sample path of a switching simulation: the jump log, the states observed
/// at the requested sampling times, and the final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub jumps: Vec<JumpEvent>,
    pub samples: Vec<HybridState>,
    pub final_state: HybridState,
}

impl Trajectory {
    /// Fraction of elapsed time spent in `regime`.
    pub fn occupation_fraction(&self, regime: usize, horizon: f64) -> f64 {
        let mut occupied = 0.0;
        let mut t_prev = 0.0;
        let mut r_prev = self
            .jumps
            .first()
            .map(|j| j.from)
            .unwrap_or(self.final_state.regime);
        for j in &self.jumps {
            if r_prev == regime {
                occupied += j.t - t_prev;
            }
            t_prev = j.t;
            r_prev = j.to;
        }
        if r_prev == regime {
            occupied += horizon - t_prev;
        }
        occupied / horizon
    }
}

/// Exact-in-law sample path of a switching model: RK4 flow between jumps,
/// regime changes by thinning plus a categorical draw proportional to the
/// exit rates. Positions are checked against the invariant region (tolerance
/// 1e-9) after every flow chunk.
pub fn simulate_switching(
    model: &SwitchingModel,
    initial: HybridState,
    horizon: f64,
    sample_every: Option<f64>,
    stream: &mut RandomStream,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    let mut state = initial;
    state.t = 0.0;
    let mut jumps = Vec::new();
    let mut samples = Vec::new();
    let mut next_sample = sample_every.unwrap_or(f64::INFINITY);

    let region_tol = 1e-9;
    let bound = model.rate_bound;
    let mut next_proposal = state.t + sample_exponential(stream, bound)?;

    while state.t < horizon {
        let target = next_proposal.min(horizon).min(next_sample);
        // flow to the next event in fixed chunks
        let mut remaining = target - state.t;
        let field = model.flow(state.regime);
        while remaining > 1e-15 {
            let h = model.flow_dt.min(remaining);
            state.x = rk4_step(field, &state.x, state.t, h)?;
            state.t += h;
            remaining -= h;
            if !(model.region)(&state.x, region_tol) {
                return Err(Error::RegionViolation {
                    t: state.t,
                    state: state.x.clone(),
                });
            }
        }
        state.t = target;

        if target == next_sample {
            samples.push(state.clone());
            next_sample += sample_every.unwrap();
            continue;
        }
        if target == horizon && horizon < next_proposal {
            break;
        }
        // thinning acceptance at the proposal time
        let total = model.total_exit_rate(state.regime, &state.x);
        if total > bound * (1.0 + 1e-9) {
            return Err(Error::BoundViolation {
                bound,
                observed: total,
            });
        }
        if stream.uniform() * bound <= total {
            // categorical draw over target regimes
            let mut u = stream.uniform() * total;
            let mut to = state.regime;
            for l in 0..model.n_regimes() {
                if l == state.regime {
                    continue;
                }
                u -= model.rate(state.regime, l, &state.x);
                if u <= 0.0 {
                    to = l;
                    break;
                }
            }
            if to != state.regime {
                jumps.push(JumpEvent {
                    t: state.t,
                    from: state.regime,
                    to,
                    x: state.x.clone(),
                });
                state.regime = to;
            }
        }
        next_proposal = state.t + sample_exponential(stream, bound)?;
    }
    Ok(Trajectory {
        jumps,
        samples,
        final_state: state,
    })
}

/// Fraction of an ensemble inside a window at each requested time, plus
/// whether the window was ever hit at all (the weak-irreducibility probe).
#[derive(Debug, Clone)]
pub struct OccupancyProfile {
    pub times: Vec<f64>,
    pub fraction: Vec<f64>,
    pub ever_hit: bool,
}

/// `ensemble[path][time_index]` holds the state of one path at each time.
pub fn occupancy_profile(
    times: &[f64],
    ensemble: &[Vec<Vec<f64>>],
    window: impl Fn(&[f64]) -> bool,
) -> Result<OccupancyProfile> {
    if ensemble.is_empty() {
        return Err(Error::DegenerateInput("empty ensemble".into()));
    }
    for path in ensemble {
        if path.len() != times.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} time points", times.len()),
                got: format!("{}", path.len()),
            });
        }
    }
    let mut fraction = Vec::with_capacity(times.len());
    let mut ever_hit = false;
    for ti in 0..times.len() {
        let hits = ensemble.iter().filter(|p| window(&p[ti])).count();
        if hits > 0 {
            ever_hit = true;
        }
        fraction.push(hits as f64 / ensemble.len() as f64);
    }
    Ok(OccupancyProfile {
        times: times.to_vec(),
        fraction,
        ever_hit,
    })
}
