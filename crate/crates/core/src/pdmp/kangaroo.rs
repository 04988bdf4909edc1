//! Pure jump-type motion: the state is constant between jumps.
//!
//! The exponential-holding case is the classical kangaroo process (rate
//! `psi(x)`, relocation by a jump kernel); the semi-Markov variant allows an
//! arbitrary holding-time density `q(x, a)` and becomes Markov again after
//! augmenting the state with the age since the last jump. The hazard of the
//! augmented process is `p(x, a) = q(x, a) / int_a^inf q(x, r) dr`.

use crate::error::{Error, Result};
use crate::numerics::{adaptive_quad, sample_exponential, RandomStream};
use std::sync::Arc;

/// Jump-and-hold path: positions indexed by jump, with jump times.
#[derive(Debug, Clone)]
pub struct JumpPath {
    /// `(t_n, x_n)`: position `x_n` holds on `[t_n, t_{n+1})`; the first
    /// entry is the initial condition at `t = 0`.
    pub holds: Vec<(f64, f64)>,
    pub horizon: f64,
}

impl JumpPath {
    pub fn n_jumps(&self) -> usize {
        self.holds.len() - 1
    }

    pub fn position_at(&self, t: f64) -> f64 {
        match self
            .holds
            .binary_search_by(|(s, _)| s.partial_cmp(&t).unwrap())
        {
            Ok(i) => self.holds[i].1,
            Err(0) => self.holds[0].1,
            Err(i) => self.holds[i - 1].1,
        }
    }

    /// Age since the last jump at time `t`.
    pub fn age_at(&self, t: f64) -> f64 {
        match self
            .holds
            .binary_search_by(|(s, _)| s.partial_cmp(&t).unwrap())
        {
            Ok(i) => t - self.holds[i].0,
            Err(0) => t - self.holds[0].0,
            Err(i) => t - self.holds[i - 1].0,
        }
    }

    /// `(position, holding time)` pairs after a burn-in, for time-weighted
    /// occupation histograms.
    pub fn occupation(&self, burn_in: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for w in self.holds.windows(2) {
            let (t0, x) = w[0];
            let t1 = w[1].0;
            let lo = t0.max(burn_in);
            if t1 > lo {
                out.push((x, t1 - lo));
            }
        }
        let (t_last, x_last) = *self.holds.last().unwrap();
        let lo = t_last.max(burn_in);
        if self.horizon > lo {
            out.push((x_last, self.horizon - lo));
        }
        out
    }
}

/// Kangaroo process: holding rate `psi(x)` (exact exponential sampling, the
/// state is frozen between jumps) and a relocation sampler.
pub struct KangarooModel {
    psi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub rate_bound: f64,
    jump: Arc<dyn Fn(f64, &mut RandomStream) -> f64 + Send + Sync>,
}

impl KangarooModel {
    pub fn new(
        psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rate_bound: f64,
        jump: impl Fn(f64, &mut RandomStream) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            psi: Arc::new(psi),
            rate_bound,
            jump: Arc::new(jump),
        }
    }

    pub fn psi_at(&self, x: f64) -> f64 {
        (self.psi)(x)
    }
}

/// Simulates the kangaroo process to `horizon`. `psi(x) = 0` freezes the
/// path; a rate above the declared bound is an error.
pub fn kangaroo_simulate(
    model: &KangarooModel,
    x0: f64,
    horizon: f64,
    stream: &mut RandomStream,
) -> Result<JumpPath> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    let mut holds = vec![(0.0, x0)];
    let mut t = 0.0;
    let mut x = x0;
    loop {
        let rate = model.psi_at(x);
        if rate > model.rate_bound * (1.0 + 1e-9) {
            return Err(Error::BoundViolation {
                bound: model.rate_bound,
                observed: rate,
            });
        }
        if rate <= 0.0 {
            break; // frozen
        }
        let dt = sample_exponential(stream, rate)?;
        if t + dt >= horizon {
            break;
        }
        t += dt;
        x = (model.jump)(x, stream);
        holds.push((t, x));
    }
    Ok(JumpPath { holds, horizon })
}

/// Semi-Markov kangaroo: holding-time density `q(x, a)` supported in
/// `[0, support_hi(x)]` per position, and a relocation sampler.
pub struct SemiMarkovKangaroo {
    q: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    support_hi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    jump: Arc<dyn Fn(f64, &mut RandomStream) -> f64 + Send + Sync>,
}

impl SemiMarkovKangaroo {
    pub fn new(
        q: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        support_hi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        jump: impl Fn(f64, &mut RandomStream) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            q: Arc::new(q),
            support_hi: Arc::new(support_hi),
            jump: Arc::new(jump),
        }
    }

    pub fn holding_density(&self, x: f64, a: f64) -> f64 {
        (self.q)(x, a)
    }

    /// Checks that `a -> q(x, a)` is a probability density (within 1e-8) at
    /// each probe position, and that holding times are not concentrated at
    /// zero (there is an `eps` with `int_0^eps q < 1 - eps`).
    pub fn validate(&self, probe_positions: &[f64]) -> Result<()> {
        for &x in probe_positions {
            let hi = (self.support_hi)(x);
            if !(hi > 0.0) {
                return Err(Error::Domain(format!(
                    "holding support at x={x} must have positive length"
                )));
            }
            let total = adaptive_quad(|a| self.holding_density(x, a), 0.0, hi, 1e-10)?.value;
            if (total - 1.0).abs() > 1e-8 {
                return Err(Error::AssumptionViolated {
                    which: "holding-density normalization".into(),
                    detail: format!("int q(x={x}, .) = {total}"),
                });
            }
            let mut ok = false;
            for &eps in &[0.5f64, 0.25, 0.1, 0.01] {
                let head =
                    adaptive_quad(|a| self.holding_density(x, a), 0.0, eps.min(hi), 1e-10)?.value;
                if head < 1.0 - eps {
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(Error::AssumptionViolated {
                    which: "no-instant-jump condition".into(),
                    detail: format!("holding mass near zero is too large at x={x}"),
                });
            }
        }
        Ok(())
    }

    /// Hazard `p(x, a) = q(x, a) / int_a^hi q(x, r) dr`; zero once the
    /// survival integral vanishes.
    pub fn hazard(&self, x: f64, a: f64) -> Result<f64> {
        let hi = (self.support_hi)(x);
        if a >= hi {
            return Ok(0.0);
        }
        let tail = adaptive_quad(|r| self.holding_density(x, r), a, hi, 1e-12)?.value;
        if tail <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.holding_density(x, a) / tail)
    }

    /// Inverse-CDF holding-time draw by incremental bisection: the bracket
    /// carries its own cumulative so each refinement integrates only the
    /// half-interval.
    fn sample_holding(&self, x: f64, stream: &mut RandomStream) -> Result<f64> {
        let hi = (self.support_hi)(x);
        let u = stream.uniform();
        let mut lo_a = 0.0;
        let mut lo_f = 0.0; // F(lo_a)
        let mut hi_a = hi;
        // expand if the declared support underestimates the mass
        let total = lo_f + adaptive_quad(|r| self.holding_density(x, r), lo_a, hi_a, 1e-12)?.value;
        if total < u {
            return Err(Error::SamplerError(format!(
                "holding CDF reaches only {total} on [0, {hi_a}] at x={x}"
            )));
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo_a + hi_a);
            if mid <= lo_a || mid >= hi_a {
                break;
            }
            let inc = adaptive_quad(|r| self.holding_density(x, r), lo_a, mid, 1e-13)?.value;
            if lo_f + inc < u {
                lo_f += inc;
                lo_a = mid;
            } else {
                hi_a = mid;
            }
            if hi_a - lo_a < 1e-12 {
                break;
            }
        }
        Ok(0.5 * (lo_a + hi_a))
    }
}

/// Simulates the age-augmented process `(position, age since last jump)`;
/// the returned path's `age_at` recovers the age coordinate.
pub fn semi_markov_simulate(
    model: &SemiMarkovKangaroo,
    x0: f64,
    horizon: f64,
    stream: &mut RandomStream,
) -> Result<JumpPath> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    let mut holds = vec![(0.0, x0)];
    let mut t = 0.0;
    let mut x = x0;
    loop {
        let dt = model.sample_holding(x, stream)?;
        if t + dt >= horizon {
            break;
        }
        t += dt;
        x = (model.jump)(x, stream);
        holds.push((t, x));
    }
    Ok(JumpPath { holds, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{weighted_histogram, Grid1D};

    #[test]
    fn frozen_when_rate_vanishes() {
        let model = KangarooModel::new(|_| 0.0, 1.0, |x, _| x + 1.0);
        let mut s = RandomStream::new(40, 0);
        let path = kangaroo_simulate(&model, 0.3, 100.0, &mut s).unwrap();
        assert_eq!(path.n_jumps(), 0);
        assert_eq!(path.position_at(57.0), 0.3);
    }

    #[test]
    fn two_point_occupancy() {
        // psi(0) = 1, psi(1) = 2, deterministic swap: occupation (2/3, 1/3).
        let model = KangarooModel::new(
            |x| if x < 0.5 { 1.0 } else { 2.0 },
            2.0,
            |x, _| if x < 0.5 { 1.0 } else { 0.0 },
        );
        let mut s = RandomStream::new(41, 0);
        let horizon = 200_000.0;
        let path = kangaroo_simulate(&model, 0.0, horizon, &mut s).unwrap();
        let occ = path.occupation(100.0);
        let at_zero: f64 = occ.iter().filter(|(x, _)| *x < 0.5).map(|(_, w)| w).sum();
        let total: f64 = occ.iter().map(|(_, w)| w).sum();
        let frac = at_zero / total;
        let n_eff = path.n_jumps() as f64 / 2.0;
        let stderr = (2.0 / 9.0 / n_eff).sqrt();
        assert!((frac - 2.0 / 3.0).abs() <= 4.0 * stderr, "frac {frac}");
    }

    #[test]
    fn wrapped_kernel_has_uniform_occupation() {
        // Constant rate with a symmetric wrapped-normal relocation on the
        // circle: the flat density is invariant.
        let model = KangarooModel::new(
            |_| 1.0,
            1.0,
            |x, s| {
                let y = x + 0.35 * s.normal();
                y.rem_euclid(1.0)
            },
        );
        let mut s = RandomStream::new(42, 0);
        let path = kangaroo_simulate(&model, 0.5, 1_000_000.0, &mut s).unwrap();
        let grid = Grid1D::new(0.0, 1.0, 20).unwrap();
        let occ = path.occupation(100.0);
        let (hist, lost) = weighted_histogram(&occ, &grid).unwrap();
        assert_eq!(lost, 0.0);
        let flat = crate::density::GridDensity::uniform(grid);
        let d = crate::density::l1_distance(&hist, &flat).unwrap();
        assert!(d < 0.05, "distance {d}");
    }

    #[test]
    fn exponential_holding_reduces_to_markov_case() {
        // q(x, a) = e^{-a}: hazard is identically 1 and holding times match
        // the rate-1 kangaroo (two-sample KS).
        let semi = SemiMarkovKangaroo::new(|_, a| (-a).exp(), |_| 60.0, |x, _| x);
        semi.validate(&[0.0, 0.5]).unwrap();
        for &a in &[0.0, 0.7, 2.5] {
            let p = semi.hazard(0.0, a).unwrap();
            assert!((p - 1.0).abs() < 1e-6, "hazard at {a}: {p}");
        }
        let mut s1 = RandomStream::new(43, 0);
        let mut s2 = RandomStream::new(43, 1);
        let n = 30_000;
        let mut a: Vec<f64> = (0..n)
            .map(|_| semi.sample_holding(0.0, &mut s1).unwrap())
            .collect();
        let mut b: Vec<f64> = (0..n)
            .map(|_| sample_exponential(&mut s2, 1.0).unwrap())
            .collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut ks: f64 = 0.0;
        let (mut i, mut j) = (0usize, 0usize);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            ks = ks.max((i as f64 - j as f64).abs() / n as f64);
        }
        assert!(ks < 0.015, "KS {ks}");
    }

    #[test]
    fn uniform_holding_hazard_closed_form() {
        // q uniform on [1, 2]: hazard 1/(2-a) on (1, 2), zero before 1.
        let semi = SemiMarkovKangaroo::new(
            |_, a| if (1.0..=2.0).contains(&a) { 1.0 } else { 0.0 },
            |_| 2.0,
            |x, _| x,
        );
        semi.validate(&[0.0]).unwrap();
        assert!(semi.hazard(0.0, 0.5).unwrap().abs() < 1e-9);
        for &a in &[1.05, 1.3, 1.7, 1.95] {
            let p = semi.hazard(0.0, a).unwrap();
            let exact = 1.0 / (2.0 - a);
            assert!((p - exact).abs() < 1e-8, "hazard at {a}: {p} vs {exact}");
        }
        // holding times land inside the support
        let mut s = RandomStream::new(44, 0);
        for _ in 0..2_000 {
            let h = semi.sample_holding(0.0, &mut s).unwrap();
            assert!((1.0..=2.0).contains(&h), "holding {h}");
        }
    }

    #[test]
    fn age_marginal_is_length_biased() {
        // Stationary age density is proportional to the survival function:
        // min(1, 2-a)/1.5 for the uniform [1, 2] holding law.
        let semi = SemiMarkovKangaroo::new(
            |_, a| if (1.0..=2.0).contains(&a) { 1.0 } else { 0.0 },
            |_| 2.0,
            |x, _| x,
        );
        let mut s = RandomStream::new(45, 0);
        let horizon = 60_000.0;
        let path = semi_markov_simulate(&semi, 0.0, horizon, &mut s).unwrap();
        let ages: Vec<f64> = (0..550_000)
            .map(|k| 100.0 + k as f64 * 0.1)
            .filter(|&t| t < horizon)
            .map(|t| path.age_at(t))
            .collect();
        let grid = Grid1D::new(0.0, 2.0, 20).unwrap();
        let (hist, _) = crate::density::histogram_from_samples(&ages, &grid).unwrap();
        // exact cell masses of the survival density
        let exact: Vec<f64> = (0..20)
            .map(|i| {
                let (a, b) = (grid.edge(i), grid.edge(i + 1));
                let f = |x: f64| {
                    if x <= 1.0 {
                        x
                    } else {
                        1.0 + (x - 1.0) * (2.0 - 0.5 * (x + 1.0)) // int of (2-a)
                    }
                };
                (f(b) - f(a)) / 1.5
            })
            .collect();
        let d: f64 = hist
            .masses()
            .iter()
            .zip(&exact)
            .map(|(h, e)| (h - e).abs())
            .sum();
        assert!(d < 0.05, "distance {d}");
    }

    #[test]
    fn validate_rejects_non_density() {
        let semi =
            SemiMarkovKangaroo::new(|_, a| if a <= 1.0 { 0.5 } else { 0.0 }, |_| 1.0, |x, _| x);
        assert!(semi.validate(&[0.0]).is_err());
    }
}
