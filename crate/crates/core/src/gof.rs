//! Goodness-of-fit tests for sampled variates.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::density::DensityModel;
use crate::error::{Error, Result};

/// Fewest samples any test accepts.
pub const MIN_SAMPLES: usize = 1000;
/// Bins are merged until each expects at least this many counts.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GofTest {
    ChiSquare,
    KolmogorovSmirnov,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofReport {
    pub test: GofTest,
    pub statistic: f64,
    pub p_value: f64,
    pub n_samples: usize,
    /// Bins after merging; chi-square only.
    pub n_bins: Option<usize>,
}

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { got: n, needed: MIN_SAMPLES });
    }
    Ok(())
}

/// Counts of `samples` in `n_bins` equal bins over `[a, b]`. Values outside
/// the range are ignored.
pub fn histogram(samples: &[f64], a: f64, b: f64, n_bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_bins];
    let w = (b - a) / n_bins as f64;
    for &x in samples {
        if x >= a && x <= b {
            let j = (((x - a) / w) as usize).min(n_bins - 1);
            counts[j] += 1;
        }
    }
    counts
}

/// Merges adjacent bins (left to right, remainder into the last) until every
/// expected count reaches [`MIN_EXPECTED`].
fn merge_bins(observed: &[f64], expected: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= MIN_EXPECTED {
            obs.push(o);
            exp.push(e);
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match (obs.last_mut(), exp.last_mut()) {
            (Some(lo), Some(le)) => {
                *lo += o;
                *le += e;
            }
            _ => {
                obs.push(o);
                exp.push(e);
            }
        }
    }
    (obs, exp)
}

fn chi_square_p(statistic: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Parameter("chi-square test needs at least two bins after merging".into()));
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(dist.sf(statistic).clamp(0.0, 1.0))
}

/// Chi-square test of counts against bin probabilities (any scale; they are
/// normalized to the sample count).
pub fn chi_square_counts(counts: &[u64], probabilities: &[f64]) -> Result<GofReport> {
    if counts.len() != probabilities.len() {
        return Err(Error::Parameter("counts and probabilities differ in length".into()));
    }
    let n: u64 = counts.iter().sum();
    check_samples(n as usize)?;
    let total: f64 = probabilities.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Parameter("bin probabilities sum to zero".into()));
    }
    let observed: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let expected: Vec<f64> = probabilities.iter().map(|p| p / total * n as f64).collect();
    let (obs, exp) = merge_bins(&observed, &expected);
    let statistic: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e) * (o - e) / e).sum();
    Ok(GofReport {
        test: GofTest::ChiSquare,
        statistic,
        p_value: chi_square_p(statistic, obs.len() - 1)?,
        n_samples: n as usize,
        n_bins: Some(obs.len()),
    })
}

/// Chi-square test of `samples` against the model's mass in `n_bins` equal
/// bins over its support. Bin masses come from quadrature.
pub fn chi_square(samples: &[f64], model: &DensityModel, n_bins: usize) -> Result<GofReport> {
    if n_bins < 2 {
        return Err(Error::Parameter("chi-square test needs at least two bins".into()));
    }
    let (a, b) = model.support();
    let w = (b - a) / n_bins as f64;
    let edge = |j: usize| if j == n_bins { b } else { a + j as f64 * w };
    let probabilities = (0..n_bins).map(|j| model.integral(edge(j), edge(j + 1))).collect::<Result<Vec<_>>>()?;
    let outside = samples.iter().filter(|&&x| !(x >= a && x <= b)).count();
    if outside > 0 {
        return Err(Error::Domain(format!("{outside} samples outside the support [{a}, {b}]")));
    }
    chi_square_counts(&histogram(samples, a, b, n_bins), &probabilities)
}

/// Two-sample chi-square test of homogeneity between two histograms.
pub fn chi_square_two_sample(first: &[u64], second: &[u64]) -> Result<GofReport> {
    if first.len() != second.len() {
        return Err(Error::Parameter("histograms differ in length".into()));
    }
    let n1: u64 = first.iter().sum();
    let n2: u64 = second.iter().sum();
    check_samples(n1.min(n2) as usize)?;
    let (n1, n2) = (n1 as f64, n2 as f64);
    let (k1, k2) = ((n2 / n1).sqrt(), (n1 / n2).sqrt());
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for (&r, &s) in first.iter().zip(second) {
        if r + s == 0 {
            continue;
        }
        let d = k1 * r as f64 - k2 * s as f64;
        statistic += d * d / (r + s) as f64;
        bins += 1;
    }
    Ok(GofReport {
        test: GofTest::ChiSquare,
        statistic,
        p_value: chi_square_p(statistic, bins.saturating_sub(1))?,
        n_samples: (n1 + n2) as usize,
        n_bins: Some(bins),
    })
}

/// Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against `cdf`. The p-value uses the
/// asymptotic distribution with Stephens' small-sample correction.
pub fn kolmogorov_smirnov<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<GofReport> {
    check_samples(samples.len())?;
    let mut sorted = samples.to_vec();
    if sorted.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("NaN sample".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(GofReport {
        test: GofTest::KolmogorovSmirnov,
        statistic: d,
        p_value: kolmogorov_sf(lambda),
        n_samples: samples.len(),
        n_bins: None,
    })
}

/// Repeats a seeded test and reports whether at most `allowed_failures` of
/// the runs fall at or below `threshold`.
pub fn passes_repeated<F>(seeds: &[u64], threshold: f64, allowed_failures: usize, mut run: F) -> Result<(bool, Vec<f64>)>
where
    F: FnMut(u64) -> Result<GofReport>,
{
    let mut p_values = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        p_values.push(run(seed)?.p_value);
    }
    let failures = p_values.iter().filter(|&&p| p <= threshold).count();
    Ok((failures <= allowed_failures, p_values))
}
