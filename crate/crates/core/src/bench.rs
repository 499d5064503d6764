//! Throughput measurement with density-evaluation time accounted separately.

use std::hint::black_box;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::density::{Density, DensityModel};
use crate::error::Result;
use crate::sampler::{Counters, SamplerState};
use crate::tiling::{build, RefinementStats, StopRule, TilingTable};
use crate::urng::UniformSource;

/// Wraps a density and accumulates the wall time spent inside it.
#[derive(Debug)]
pub struct Timed {
    inner: Arc<dyn Density>,
    nanos: AtomicU64,
    calls: AtomicU64,
}

impl Timed {
    pub fn new(inner: Arc<dyn Density>) -> Self {
        Timed { inner, nanos: AtomicU64::new(0), calls: AtomicU64::new(0) }
    }

    pub fn seconds(&self) -> f64 {
        self.nanos.load(Ordering::Relaxed) as f64 * 1e-9
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.nanos.store(0, Ordering::Relaxed);
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl Density for Timed {
    fn pdf(&self, x: f64) -> f64 {
        let start = Instant::now();
        let v = self.inner.pdf(x);
        self.nanos.fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        self.calls.fetch_add(1, Ordering::Relaxed);
        v
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    fn landmarks(&self) -> Vec<f64> {
        self.inner.landmarks()
    }

    fn exact_integral(&self, lo: f64, hi: f64) -> Option<f64> {
        self.inner.exact_integral(lo, hi)
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchOptions {
    pub n: u64,
    /// Variates per batch between busywork rounds.
    pub batch: usize,
    /// Bytes of scratch memory swept between batches, evicting the table
    /// from cache. Zero disables interleaving.
    pub interleave_bytes: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { n: 10_000_000, batch: 1 << 16, interleave_bytes: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub n: u64,
    /// Variates per second with density-evaluation time subtracted.
    pub variates_per_second: f64,
    /// Variates per second over the whole sampling loop.
    pub raw_variates_per_second: f64,
    pub sampling_seconds: f64,
    pub density_eval_seconds: f64,
    /// Time outside busywork spent in the sampler, minus density time.
    pub net_seconds: f64,
    pub setup_seconds: Option<f64>,
    pub setup_eval_seconds: Option<f64>,
    pub interleaved: bool,
    pub counters: Counters,
}

/// Time to build a table, and how much of it went into density evaluations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetupTiming {
    pub setup_seconds: f64,
    pub density_eval_seconds: f64,
    pub density_evals: u64,
    pub history: Vec<RefinementStats>,
}

pub fn time_setup(model: &DensityModel, stop: StopRule) -> Result<(TilingTable, SetupTiming)> {
    let timed = Arc::new(Timed::new(Arc::clone(model.density())));
    let timed_model = model.with_density(timed.clone())?;
    timed.reset();
    let start = Instant::now();
    let (table, history) = build(&timed_model, stop)?;
    let setup_seconds = start.elapsed().as_secs_f64();
    Ok((table, SetupTiming { setup_seconds, density_eval_seconds: timed.seconds(), density_evals: timed.calls(), history }))
}

fn busywork(scratch: &mut [u64], round: u64) {
    // One write per cache line.
    for (i, word) in scratch.iter_mut().step_by(8).enumerate() {
        *word = word.wrapping_mul(6364136223846793005).wrapping_add(i as u64 ^ round);
    }
    black_box(&scratch);
}

/// Draws `options.n` variates and reports throughput.
pub fn run(table: Arc<TilingTable>, model: &DensityModel, source: UniformSource, options: BenchOptions) -> Result<BenchReport> {
    let timed = Arc::new(Timed::new(Arc::clone(model.density())));
    let timed_model = Arc::new(model.with_density(timed.clone())?);
    timed.reset();
    let mut state = SamplerState::new(table, timed_model, source)?;
    let mut scratch = vec![1u64; options.interleave_bytes / 8];
    let batch = options.batch.max(1) as u64;

    let mut sampling = 0.0;
    let mut done = 0u64;
    let mut round = 0u64;
    let mut sink = 0.0;
    while done < options.n {
        let k = batch.min(options.n - done);
        let start = Instant::now();
        for _ in 0..k {
            sink += state.draw()?;
        }
        sampling += start.elapsed().as_secs_f64();
        done += k;
        if !scratch.is_empty() {
            busywork(&mut scratch, round);
            round += 1;
        }
    }
    black_box(sink);
    let eval = timed.seconds();
    let net = (sampling - eval).max(f64::MIN_POSITIVE);
    Ok(BenchReport {
        n: options.n,
        variates_per_second: options.n as f64 / net,
        raw_variates_per_second: options.n as f64 / sampling,
        sampling_seconds: sampling,
        density_eval_seconds: eval,
        net_seconds: net,
        setup_seconds: None,
        setup_eval_seconds: None,
        interleaved: !scratch.is_empty(),
        counters: state.counters(),
    })
}
