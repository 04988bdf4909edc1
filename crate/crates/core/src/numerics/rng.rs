//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, stream_id, counter)`, so results
//! are replay-exact and independent of how work is split across threads:
//! give each worker its own `stream_id` and reduce in a fixed order.

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Splittable counter-based random stream.
///
/// Streams with the same `seed` and distinct `stream_id` are statistically
/// independent; the output sequence depends only on `(seed, stream_id)` and
/// the number of draws made so far.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    key: u64,
    counter: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let key = mix(seed ^ mix(stream_id.wrapping_mul(GOLDEN).wrapping_add(1)));
        Self {
            seed,
            stream_id,
            key,
            counter: 0,
        }
    }

    /// Child stream derived from this stream's identity; used to hand each
    /// parallel worker an independent source.
    pub fn child(&self, index: u64) -> Self {
        RandomStream::new(self.seed, mix(self.stream_id ^ GOLDEN).wrapping_add(index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter = self.counter.wrapping_add(1);
        v
    }

    /// Uniform draw in the open interval (0, 1); never returns 0 or 1, so it
    /// is safe under `ln`.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // 53-bit uniform scaled; bias is negligible for the n used here.
        (self.uniform() * n as f64) as usize % n
    }
}

/// Exponential sample with the given rate (mean `1/rate`).
pub fn sample_exponential(stream: &mut RandomStream, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Domain(format!(
            "exponential rate must be > 0, got {rate}"
        )));
    }
    Ok(-stream.uniform().ln() / rate)
}

/// Poisson sample by sequential search (product of uniforms). Cost is
/// O(mean), fine at the means this toolkit uses; `mean = 0` returns 0.
pub fn sample_poisson_count(stream: &mut RandomStream, mean: f64) -> Result<u64> {
    if mean < 0.0 {
        return Err(Error::Domain(format!(
            "poisson mean must be >= 0, got {mean}"
        )));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    // Work in log space so large means do not underflow e^{-mean}.
    let mut acc = 0.0_f64;
    let mut k = 0u64;
    loop {
        acc += stream.uniform().ln();
        if acc < -mean {
            return Ok(k);
        }
        k += 1;
        if k > 1_000_000 {
            return Err(Error::SamplerError(format!(
                "poisson sampler runaway at mean {mean}"
            )));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_is_bitwise() {
        let mut a = RandomStream::new(42, 7);
        let mut b = RandomStream::new(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RandomStream::new(42, 0);
        let mut b = RandomStream::new(42, 1);
        let va: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_ne!(va, vb);
    }

    #[test]
    fn children_are_reproducible_and_distinct() {
        let parent = RandomStream::new(9, 3);
        let mut c0 = parent.child(0);
        let mut c0b = parent.child(0);
        let mut c1 = parent.child(1);
        assert_eq!(c0.next_u64(), c0b.next_u64());
        assert_ne!(c0.next_u64(), c1.next_u64());
    }

    #[test]
    fn exponential_mean_within_four_stderr() {
        let mut s = RandomStream::new(123, 0);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_exponential(&mut s, 1.0).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((0.987..=1.013).contains(&mean), "mean {mean}");
    }

    #[test]
    fn exponential_nonnegative_and_domain_checked() {
        let mut s = RandomStream::new(5, 0);
        for _ in 0..1000 {
            assert!(sample_exponential(&mut s, 2.0).unwrap() >= 0.0);
        }
        assert!(sample_exponential(&mut s, 0.0).is_err());
        assert!(sample_exponential(&mut s, -1.0).is_err());
    }

    #[test]
    fn poisson_zero_mean() {
        let mut s = RandomStream::new(1, 0);
        assert_eq!(sample_poisson_count(&mut s, 0.0).unwrap(), 0);
        assert!(sample_poisson_count(&mut s, -0.5).is_err());
    }

    #[test]
    fn poisson_dispersion_and_mass_at_zero() {
        let mut s = RandomStream::new(77, 0);
        let n = 100_000usize;
        let samples: Vec<u64> = (0..n)
            .map(|_| sample_poisson_count(&mut s, 4.0).unwrap())
            .collect();
        let mean = samples.iter().sum::<u64>() as f64 / n as f64;
        let var = samples
            .iter()
            .map(|&k| (k as f64 - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let dispersion = var / mean;
        assert!(
            (0.97..=1.03).contains(&dispersion),
            "dispersion {dispersion}"
        );

        let p0 = samples.iter().filter(|&&k| k == 0).count() as f64 / n as f64;
        let expect = (-4.0_f64).exp();
        let stderr = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((p0 - expect).abs() <= 4.0 * stderr, "p0 {p0} vs {expect}");
    }

    #[test]
    fn normal_moments() {
        let mut s = RandomStream::new(2024, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
