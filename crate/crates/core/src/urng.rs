//! Seedable uniform sources.
//!
//! Every stream is a pure function of `(algorithm, seed, stream_id)`. The
//! mapping from raw 64-bit output to reals is fixed: the top 53 bits are
//! scaled by `2^-53`, so `unit_real` lies in `[0, 1)` and never returns 1.

use std::fmt;
use std::str::FromStr;

use rand_core::{RngCore, SeedableRng};
use rand_pcg::Pcg64;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// `2^-53`.
const UNIT_SCALE: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RngAlgorithm {
    /// xoshiro256++, period 2^256 - 1. Streams are separated by 2^128-step jumps.
    #[default]
    Xoshiro256PlusPlus,
    /// PCG XSL-RR 128/64. Streams use distinct LCG increments.
    Pcg64,
}

impl RngAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            RngAlgorithm::Xoshiro256PlusPlus => "xoshiro256pp",
            RngAlgorithm::Pcg64 => "pcg64",
        }
    }
}

impl fmt::Display for RngAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RngAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xoshiro256pp" | "xoshiro256++" | "xoshiro" => Ok(RngAlgorithm::Xoshiro256PlusPlus),
            "pcg64" | "pcg" => Ok(RngAlgorithm::Pcg64),
            other => Err(Error::Parameter(format!("unknown rng algorithm '{other}'"))),
        }
    }
}

#[derive(Clone)]
enum Engine {
    Xoshiro(Xoshiro256PlusPlus),
    Pcg(Pcg64),
}

/// A single-owner uniform random source.
#[derive(Clone)]
pub struct UniformSource {
    engine: Engine,
    algorithm: RngAlgorithm,
    seed: u64,
    stream_id: u64,
}

impl fmt::Debug for UniformSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UniformSource")
            .field("algorithm", &self.algorithm)
            .field("seed", &self.seed)
            .field("stream_id", &self.stream_id)
            .finish_non_exhaustive()
    }
}

impl UniformSource {
    pub fn new(algorithm: RngAlgorithm, seed: u64) -> Self {
        Self::with_stream(algorithm, seed, 0)
    }

    /// Default algorithm.
    pub fn from_seed(seed: u64) -> Self {
        Self::new(RngAlgorithm::default(), seed)
    }

    fn with_stream(algorithm: RngAlgorithm, seed: u64, stream_id: u64) -> Self {
        let engine = match algorithm {
            RngAlgorithm::Xoshiro256PlusPlus => {
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
                // Stream k starts k jumps of 2^128 steps into the base sequence.
                for _ in 0..stream_id {
                    rng.jump();
                }
                Engine::Xoshiro(rng)
            }
            RngAlgorithm::Pcg64 => {
                let base = Pcg64::seed_from_u64(seed);
                let mut state_rng = base.clone();
                let state = ((state_rng.next_u64() as u128) << 64) | state_rng.next_u64() as u128;
                if stream_id == 0 {
                    Engine::Pcg(base)
                } else {
                    Engine::Pcg(Pcg64::new(state, stream_id as u128))
                }
            }
        };
        UniformSource {
            engine,
            algorithm,
            seed,
            stream_id,
        }
    }

    pub fn algorithm(&self) -> RngAlgorithm {
        self.algorithm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn next_raw(&mut self) -> u64 {
        match &mut self.engine {
            Engine::Xoshiro(r) => r.next_u64(),
            Engine::Pcg(r) => r.next_u64(),
        }
    }

    /// Next deviate in `[0, 1)`.
    #[inline]
    pub fn unit_real(&mut self) -> f64 {
        (self.next_raw() >> 11) as f64 * UNIT_SCALE
    }

    /// Next deviate in the open interval `(0, 1)`.
    #[inline]
    pub fn open_unit_real(&mut self) -> f64 {
        loop {
            let u = self.unit_real();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Unbiased index in `[0, n)`.
    ///
    /// # Panics
    /// If `n == 0`.
    #[inline]
    pub fn uniform_index(&mut self, n: u64) -> u64 {
        assert!(n > 0, "uniform_index requires n >= 1");
        bounded_index(|| self.next_raw(), 64, n)
    }

    /// Independent stream derived from this source's seed and algorithm.
    ///
    /// The result depends only on `(algorithm, seed, stream_id)`, not on how far
    /// `self` has advanced. For xoshiro256++ stream `k` is the base sequence
    /// jumped `k` times by 2^128, so streams do not overlap within 2^128 draws.
    /// The cost of forking is linear in `stream_id`.
    pub fn fork_stream(&self, stream_id: u64) -> UniformSource {
        Self::with_stream(self.algorithm, self.seed, stream_id)
    }
}

impl RngCore for UniformSource {
    fn next_u32(&mut self) -> u32 {
        (self.next_raw() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_raw()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_raw().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Lemire's multiply-and-reject bounded integer over a raw source of `bits`
/// uniform bits (`1 <= bits <= 64`).
///
/// Raw values whose low product word falls below `2^bits mod n` are rejected,
/// which leaves every output hit exactly `floor(2^bits / n)` times over the raw
/// range.
#[inline]
pub fn bounded_index(mut raw: impl FnMut() -> u64, bits: u32, n: u64) -> u64 {
    debug_assert!((1..=64).contains(&bits));
    debug_assert!(n >= 1);
    let mask: u128 = if bits == 64 { u64::MAX as u128 } else { (1u128 << bits) - 1 };
    let n128 = n as u128;
    let mut m = raw() as u128 * n128;
    let mut low = m & mask;
    if low < n128 {
        let range = mask + 1;
        let threshold = range % n128;
        while low < threshold {
            m = raw() as u128 * n128;
            low = m & mask;
        }
    }
    (m >> bits) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_real_in_range_and_deterministic() {
        let mut a = UniformSource::from_seed(1);
        let mut b = UniformSource::from_seed(1);
        for _ in 0..1000 {
            let x = a.unit_real();
            assert!((0.0..1.0).contains(&x));
            assert_eq!(x.to_bits(), b.unit_real().to_bits());
        }
    }

    #[test]
    fn unit_real_mean() {
        let mut s = UniformSource::from_seed(1);
        let n = 1_000_000;
        let mean = (0..n).map(|_| s.unit_real()).sum::<f64>() / n as f64;
        // 3 sigma = 3 / sqrt(12) / 1000
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn unit_real_mapping_is_top_53_bits() {
        let mut a = UniformSource::from_seed(99);
        let mut b = UniformSource::from_seed(99);
        let raw = a.next_raw();
        assert_eq!(b.unit_real(), (raw >> 11) as f64 / 9007199254740992.0);
        // The largest raw value maps strictly below one.
        assert!(((u64::MAX >> 11) as f64 * UNIT_SCALE) < 1.0);
    }

    #[test]
    fn index_single_outcome() {
        let mut s = UniformSource::from_seed(5);
        assert!((0..1000).all(|_| s.uniform_index(1) == 0));
    }

    #[test]
    fn index_three_bins_binomial() {
        let mut s = UniformSource::from_seed(17);
        let n = 3_000_000u64;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            counts[s.uniform_index(3) as usize] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn power_of_two_takes_top_bits() {
        let mut a = UniformSource::from_seed(3);
        let mut b = UniformSource::from_seed(3);
        for _ in 0..1000 {
            assert_eq!(a.uniform_index(256), b.next_raw() >> 56);
        }
    }

    #[test]
    fn exhaustive_eight_bit_source_is_unbiased() {
        // Enumerate every raw byte once per rejection depth; the accepted
        // values must split evenly over the residues.
        for n in 1..=256u64 {
            let mut counts = vec![0u64; n as usize];
            for first in 0..256u64 {
                let mut calls = 0;
                let out = bounded_index(
                    || {
                        calls += 1;
                        if calls == 1 {
                            first
                        } else {
                            // 255 * n is always accepted, so the loop ends.
                            255
                        }
                    },
                    8,
                    n,
                );
                if calls == 1 {
                    counts[out as usize] += 1;
                }
            }
            let expected = 256 / n;
            assert!(counts.iter().all(|&c| c == expected), "n={n}: {counts:?}");
        }
    }

    #[test]
    fn fork_streams_distinct_and_reproducible() {
        let base = UniformSource::from_seed(11);
        let mut s0 = base.fork_stream(0);
        let mut s1 = base.fork_stream(1);
        let mut s1b = base.fork_stream(1);
        let mut differ = 0;
        for _ in 0..10_000 {
            let (x, y) = (s0.next_raw(), s1.next_raw());
            assert_eq!(y, s1b.next_raw());
            if x != y {
                differ += 1;
            }
        }
        assert_eq!(differ, 10_000);
    }

    #[test]
    fn fork_ignores_parent_position() {
        let mut base = UniformSource::from_seed(4);
        let mut before = base.fork_stream(2);
        for _ in 0..100 {
            base.next_raw();
        }
        let mut after = base.fork_stream(2);
        assert_eq!(before.next_raw(), after.next_raw());
    }

    #[test]
    fn forked_streams_uncorrelated() {
        for alg in [RngAlgorithm::Xoshiro256PlusPlus, RngAlgorithm::Pcg64] {
            let base = UniformSource::new(alg, 2024);
            let mut a = base.fork_stream(0);
            let mut b = base.fork_stream(1);
            let n = 100_000;
            let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n).map(|_| (a.unit_real(), b.unit_real())).unzip();
            let mx = xs.iter().sum::<f64>() / n as f64;
            let my = ys.iter().sum::<f64>() / n as f64;
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for (x, y) in xs.iter().zip(&ys) {
                sxy += (x - mx) * (y - my);
                sxx += (x - mx).powi(2);
                syy += (y - my).powi(2);
            }
            let rho = sxy / (sxx * syy).sqrt();
            assert!(rho.abs() < 0.01, "{alg}: rho = {rho}");
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for alg in [RngAlgorithm::Xoshiro256PlusPlus, RngAlgorithm::Pcg64] {
            assert_eq!(alg.name().parse::<RngAlgorithm>().unwrap(), alg);
        }
        assert!("mt19937".parse::<RngAlgorithm>().is_err());
    }
}
