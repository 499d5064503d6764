//! Alpha-stable laws: direct symmetric variates, the symmetric density by
//! oscillatory quadrature, and gridded densities of general (skewed) laws by
//! discrete Fourier inversion of the S0 characteristic function.
//!
//! The S0 characteristic function (Nolan's convention) is
//!
//! ```text
//! alpha != 1: exp(i delta q - gamma^alpha |q|^alpha [1 + i beta tan(pi alpha / 2) sgn(q) ((gamma |q|)^(1 - alpha) - 1)])
//! alpha == 1: exp(i delta q - gamma |q| [1 + i beta (2 / pi) sgn(q) ln(gamma |q|)])
//! ```

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::density::{Interpolation, TabularDensity};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_20;
use crate::urng::UniformSource;

/// Below this distance from `alpha = 1` the Chambers formula switches to the
/// Cauchy branch `gamma tan(phi)`.
const CHAMBERS_ALPHA_ONE_BAND: f64 = 1e-4;

/// Target bound on the periodization (aliasing) error of the FFT grid.
const ALIAS_TOL: f64 = 1e-7;
/// Largest transform length used by [`levy_pdf_grid`].
const MAX_FFT_LEN: usize = 1 << 22;
/// Points of the local Lagrange interpolant used when output nodes fall
/// between transform nodes.
const RESAMPLE_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl StableParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        let p = StableParams { alpha, beta, gamma, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn symmetric(alpha: f64, gamma: f64) -> Result<Self> {
        Self::new(alpha, 0.0, gamma, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::Parameter(format!("alpha must be in (0, 2], got {}", self.alpha)));
        }
        if !(-1.0..=1.0).contains(&self.beta) {
            return Err(Error::Parameter(format!("beta must be in [-1, 1], got {}", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !self.delta.is_finite() {
            return Err(Error::Parameter(format!("delta must be finite, got {}", self.delta)));
        }
        Ok(())
    }

    /// S0 characteristic function at `q`.
    pub fn characteristic_function(&self, q: f64) -> Complex64 {
        if q == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let StableParams { alpha, beta, gamma, delta } = *self;
        let aq = q.abs();
        let sgn = q.signum();
        let gq = gamma * aq;
        let (re, im) = if (alpha - 1.0).abs() < f64::EPSILON {
            (-gq, -gq * beta * FRAC_2_PI * sgn * gq.ln())
        } else {
            let scale = gq.powf(alpha);
            let skew = beta * (0.5 * PI * alpha).tan() * sgn * (gq.powf(1.0 - alpha) - 1.0);
            (-scale, -scale * skew)
        };
        Complex64::from_polar(re.exp(), im + delta * q)
    }
}

/// Symmetric alpha-stable variate from two uniforms in `(0, 1)` by the
/// Chambers transformation
///
/// `xi = gamma ((-ln u1) cos(phi) / cos((1 - alpha) phi))^(1 - 1/alpha) sin(alpha phi) / cos(phi)`,
/// `phi = pi (u2 - 1/2)`.
///
/// Its characteristic function is `exp(-|gamma q|^alpha)`; `alpha = 2` gives a
/// normal law with standard deviation `gamma sqrt(2)`, `alpha = 1` a Cauchy law.
pub fn chambers_symmetric(alpha: f64, gamma: f64, u1: f64, u2: f64) -> Result<f64> {
    if !(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0) {
        return Err(Error::Domain(format!("uniforms must lie in (0, 1), got u1={u1}, u2={u2}")));
    }
    if !(alpha > 0.0 && alpha <= 2.0) || !(gamma > 0.0) {
        return Err(Error::Parameter(format!("alpha in (0, 2] and gamma > 0 required, got {alpha}, {gamma}")));
    }
    let phi = PI * (u2 - 0.5);
    if (alpha - 1.0).abs() < CHAMBERS_ALPHA_ONE_BAND {
        return Ok(gamma * phi.tan());
    }
    let w = -u1.ln();
    let base = w * phi.cos() / ((1.0 - alpha) * phi).cos();
    let power = (1.0 - 1.0 / alpha) * base.ln();
    Ok(gamma * power.exp() * (alpha * phi).sin() / phi.cos())
}

/// Draws symmetric stable variates with [`chambers_symmetric`].
#[derive(Debug, Clone, Copy)]
pub struct ChambersSampler {
    pub alpha: f64,
    pub gamma: f64,
}

impl ChambersSampler {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        StableParams::symmetric(alpha, gamma)?;
        Ok(ChambersSampler { alpha, gamma })
    }

    pub fn draw(&self, source: &mut UniformSource) -> f64 {
        let u1 = source.open_unit_real();
        let u2 = source.open_unit_real();
        chambers_symmetric(self.alpha, self.gamma, u1, u2).expect("uniforms are in (0, 1)")
    }
}

/// Oscillation segments summed directly before the alternating remainder is
/// handed to Euler summation.
const DIRECT_SEGMENT_BUDGET: usize = 4096;
/// Terms of the alternating tail fed to the Euler transform.
const EULER_TERMS: usize = 24;

/// Symmetric stable density
/// `L(z; alpha, gamma) = (1/pi) int_0^inf exp(-(gamma q)^alpha) cos(q z) dq`.
///
/// The integral is split at the zeros of `cos(q z)` and each piece integrated
/// by 20-point Gauss-Legendre; near `q = 0` panels shrink geometrically to
/// follow the `q^alpha` cusp. When more than a few thousand half-periods
/// remain before the envelope dies out, the alternating remainder is summed
/// with the Euler transform.
pub fn symmetric_levy_pdf(z: f64, alpha: f64, gamma: f64) -> Result<f64> {
    symmetric_levy_pdf_with_budget(z, alpha, gamma, DIRECT_SEGMENT_BUDGET)
}

fn symmetric_levy_pdf_with_budget(z: f64, alpha: f64, gamma: f64, budget: usize) -> Result<f64> {
    StableParams::symmetric(alpha, gamma)?;
    if !z.is_finite() {
        return Err(Error::Domain(format!("z must be finite, got {z}")));
    }
    // In u = gamma q: L = 1/(pi gamma) int_0^inf exp(-u^alpha) cos(u w) du.
    let w = z.abs() / gamma;
    let integrand = |u: f64| (-u.powf(alpha)).exp() * (u * w).cos();
    // exp(-u^alpha) < 1e-18 beyond here.
    let u_max = 41.5f64.powf(1.0 / alpha);

    let mut breaks = vec![0.0];
    let mut s = 2f64.powi(-40);
    while s < 1.0 {
        breaks.push(s);
        s *= 2.0;
    }
    let mut u = 1.0;
    while u < u_max {
        breaks.push(u);
        u += 1.0;
    }
    breaks.push(u_max);

    let mut total = 0.0;
    if w == 0.0 || 0.5 * PI / w >= u_max {
        for pair in breaks.windows(2) {
            total += gauss_legendre_20(integrand, pair[0], pair[1]);
        }
        return Ok(total / (PI * gamma));
    }

    // Non-oscillating head up to the first zero, then half-period segments.
    let first_zero = 0.5 * PI / w;
    let half_period = PI / w;
    let mut lo = 0.0;
    for &b in breaks.iter().skip(1).take_while(|&&b| b < first_zero) {
        total += gauss_legendre_20(integrand, lo, b);
        lo = b;
    }
    total += gauss_legendre_20(integrand, lo, first_zero);

    let segment = |k: usize| -> f64 {
        let a = first_zero + k as f64 * half_period;
        // Keep panels at most unit width so the envelope is resolved.
        let pieces = half_period.ceil().max(1.0) as usize;
        let h = half_period / pieces as f64;
        (0..pieces).map(|i| gauss_legendre_20(integrand, a + i as f64 * h, a + (i + 1) as f64 * h)).sum()
    };
    let n_segments = ((u_max - first_zero) / half_period).ceil() as usize;
    if n_segments <= budget {
        for k in 0..n_segments {
            total += segment(k);
        }
    } else {
        for k in 0..budget {
            total += segment(k);
        }
        let tail: Vec<f64> = (budget..budget + EULER_TERMS).map(segment).collect();
        total += euler_alternating_sum(&tail);
    }
    Ok(total / (PI * gamma))
}

/// Sum of an alternating series from its leading terms by repeated averaging
/// of partial sums (Euler transform).
pub fn euler_alternating_sum(terms: &[f64]) -> f64 {
    let mut partial: Vec<f64> = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    while partial.len() > 1 {
        partial = partial.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    }
    partial.first().copied().unwrap_or(0.0)
}

/// Riemann zeta for `s > 1` by direct summation with an integral tail.
fn zeta(s: f64) -> f64 {
    let n = 1000;
    let head: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
    let nf = n as f64;
    head + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s)
}

/// Period needed so the wrapped-around tails contribute less than [`ALIAS_TOL`].
fn required_period(p: &StableParams, width: f64) -> f64 {
    let base = 4.0 * width.max(p.gamma);
    if p.alpha >= 2.0 - 1e-12 {
        // Gaussian tails: 40 standard deviations on either side is plenty.
        return base.max(80.0 * p.gamma * std::f64::consts::SQRT_2);
    }
    // f(x) ~ c |x|^(-1 - alpha) with c <= gamma^alpha Gamma(1 + alpha) sin(pi alpha / 2) / pi.
    let c = p.gamma.powf(p.alpha) * statrs::function::gamma::gamma(1.0 + p.alpha) * (0.5 * PI * p.alpha).sin() / PI;
    let l = (2.0 * c * zeta(1.0 + p.alpha) / ALIAS_TOL).powf(1.0 / (1.0 + p.alpha));
    base.max(l)
}

/// Stable density of `params` on `n_points` equally spaced nodes over
/// `[a, b]`, by FFT of the S0 characteristic function. Values are clamped to
/// be nonnegative and returned as a linearly interpolated table.
pub fn levy_pdf_grid(params: StableParams, n_points: usize, a: f64, b: f64) -> Result<TabularDensity> {
    let values = levy_pdf_values(params, n_points, a, b)?;
    let dx = (b - a) / (n_points - 1) as f64;
    let points = values
        .into_iter()
        .enumerate()
        .map(|(j, v)| (if j == n_points - 1 { b } else { a + j as f64 * dx }, v))
        .collect();
    TabularDensity::new(points, Interpolation::Linear)
}

/// Raw grid values behind [`levy_pdf_grid`].
pub fn levy_pdf_values(params: StableParams, n_points: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if n_points < 256 || !n_points.is_power_of_two() {
        return Err(Error::Parameter(format!("grid size must be a power of two >= 256, got {n_points}")));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Parameter(format!("grid support [{a}, {b}] must be finite with a < b")));
    }
    let dx = (b - a) / (n_points - 1) as f64;
    let period = required_period(&params, b - a);
    // Either transform directly on the output spacing or on a coarser grid
    // that is resampled locally.
    let direct_len = ((period / dx).ceil() as usize).next_power_of_two().max(n_points);
    let (len, step) = if direct_len <= MAX_FFT_LEN {
        (direct_len, dx)
    } else {
        (MAX_FFT_LEN, period / MAX_FFT_LEN as f64)
    };
    let grid = fourier_inversion(&params, len, step, a - (RESAMPLE_POINTS as f64) * step);
    let origin = a - (RESAMPLE_POINTS as f64) * step;

    let values = if step == dx {
        grid[RESAMPLE_POINTS..RESAMPLE_POINTS + n_points].to_vec()
    } else {
        (0..n_points)
            .map(|j| {
                let x = if j == n_points - 1 { b } else { a + j as f64 * dx };
                lagrange_resample(&grid, origin, step, x)
            })
            .collect()
    };
    Ok(values.into_iter().map(|v| v.max(0.0)).collect())
}

/// `f(origin + j step)` for `j < len`, from the density's characteristic
/// function sampled at `q_k = 2 pi k / (len step)`.
fn fourier_inversion(params: &StableParams, len: usize, step: f64, origin: f64) -> Vec<f64> {
    let dq = 2.0 * PI / (len as f64 * step);
    let mut buf: Vec<Complex64> = (0..len)
        .map(|k| {
            let kk = if k < len / 2 { k as f64 } else { k as f64 - len as f64 };
            let q = kk * dq;
            let phi = if k == len / 2 { Complex64::new(0.0, 0.0) } else { params.characteristic_function(q) };
            phi * Complex64::from_polar(1.0, -q * origin)
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let norm = dq / (2.0 * PI);
    buf.into_iter().map(|c| c.re * norm).collect()
}

fn lagrange_resample(grid: &[f64], origin: f64, step: f64, x: f64) -> f64 {
    let t = (x - origin) / step;
    let i = t.floor() as isize;
    let start = (i - (RESAMPLE_POINTS as isize) / 2 + 1).clamp(0, (grid.len() - RESAMPLE_POINTS) as isize) as usize;
    let mut sum = 0.0;
    for m in 0..RESAMPLE_POINTS {
        let xm = (start + m) as f64;
        let mut w = 1.0;
        for n in 0..RESAMPLE_POINTS {
            if n != m {
                let xn = (start + n) as f64;
                w *= (t - xn) / (xm - xn);
            }
        }
        sum += w * grid[start + m];
    }
    sum
}

/// Support of the two-piece composite reproduced from the bimodal example.
pub const BIMODAL_SUPPORT: (f64, f64) = (-5.0, 25.0);
/// Abscissa where the two pieces are joined.
pub const BIMODAL_JOIN: f64 = 10.0;
/// Location of the right (Gaussian) piece. Not published with the example;
/// chosen so the composite reproduces the published tile statistics.
pub const BIMODAL_RIGHT_LOCATION: f64 = 13.5;

/// Bimodal composite: a skewed Cauchy-type piece (alpha 1, beta 0.7, gamma 1)
/// left of `x = 10` and a Gaussian piece (alpha 2, beta 1, gamma 1) right of
/// it, the right piece rescaled so both agree at the join.
pub fn bimodal_fig2(n_points: usize) -> Result<TabularDensity> {
    let (a, b) = BIMODAL_SUPPORT;
    let left = levy_pdf_grid(StableParams::new(1.0, 0.7, 1.0, 0.0)?, n_points, a, b)?;
    let right = levy_pdf_grid(StableParams::new(2.0, 1.0, 1.0, BIMODAL_RIGHT_LOCATION)?, n_points, a, b)?;
    use crate::density::Density;
    let join_left = left.pdf(BIMODAL_JOIN);
    let join_right = right.pdf(BIMODAL_JOIN);
    if !(join_right > 0.0) {
        return Err(Error::Internal("right piece vanishes at the join".into()));
    }
    let k = join_left / join_right;
    let mut points: Vec<(f64, f64)> = left.points().filter(|&(x, _)| x < BIMODAL_JOIN).collect();
    points.push((BIMODAL_JOIN, join_left));
    points.extend(right.points().filter(|&(x, _)| x > BIMODAL_JOIN).map(|(x, v)| (x, k * v)));
    // Drop nodes that crowd the join closer than the table builder allows.
    points.dedup_by(|next, prev| next.0 - prev.0 < 1e-9 * (b - a));
    TabularDensity::new(points, Interpolation::Linear)
}
