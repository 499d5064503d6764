//! Numerical integration used for density normalization, mass points and the
//! stable-law density integral.

use crate::error::{Error, Result};

/// Default relative tolerance of [`adaptive_simpson`].
pub const DEFAULT_REL_TOL: f64 = 1e-9;
/// Hard cap on the number of subintervals one integration may visit.
pub const MAX_SUBINTERVALS: usize = 1_000_000;

const INITIAL_PANELS: usize = 64;
const MAX_DEPTH: u32 = 60;

struct Panel {
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_mid: f64,
    f_hi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(lo: f64, hi: f64, f_lo: f64, f_mid: f64, f_hi: f64) -> f64 {
    (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
}

/// Adaptive Simpson quadrature with interval bisection.
///
/// The interval is first cut into 64 panels to estimate the integral's scale;
/// the absolute target is `rel_tol` times that estimate (with a tiny floor so
/// zero integrands terminate). Any non-finite integrand value is an error.
pub fn adaptive_simpson<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::QuadratureFailure(format!("non-finite bounds [{lo}, {hi}]")));
    }
    if hi == lo {
        return Ok(0.0);
    }
    if hi < lo {
        return adaptive_simpson(f, hi, lo, rel_tol).map(|v| -v);
    }
    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::QuadratureFailure(format!("integrand is {v} at x = {x}")))
        }
    };

    let width = (hi - lo) / INITIAL_PANELS as f64;
    let mut nodes = Vec::with_capacity(2 * INITIAL_PANELS + 1);
    for i in 0..=2 * INITIAL_PANELS {
        let x = if i == 2 * INITIAL_PANELS { hi } else { lo + width * i as f64 / 2.0 };
        nodes.push((x, eval(x)?));
    }
    let mut stack = Vec::with_capacity(INITIAL_PANELS);
    let mut coarse = 0.0;
    for p in 0..INITIAL_PANELS {
        let (a, fa) = nodes[2 * p];
        let (_, fm) = nodes[2 * p + 1];
        let (b, fb) = nodes[2 * p + 2];
        let whole = simpson(a, b, fa, fm, fb);
        coarse += whole.abs();
        stack.push(Panel { lo: a, hi: b, f_lo: fa, f_mid: fm, f_hi: fb, whole, tol: 0.0, depth: 0 });
    }
    let abs_tol = (rel_tol * coarse).max(f64::MIN_POSITIVE * 1e10);
    for p in &mut stack {
        p.tol = abs_tol / INITIAL_PANELS as f64;
    }

    let mut total = 0.0;
    let mut visited = INITIAL_PANELS;
    while let Some(p) = stack.pop() {
        let mid = 0.5 * (p.lo + p.hi);
        let lm = 0.5 * (p.lo + mid);
        let rm = 0.5 * (mid + p.hi);
        let f_lm = eval(lm)?;
        let f_rm = eval(rm)?;
        let left = simpson(p.lo, mid, p.f_lo, f_lm, p.f_mid);
        let right = simpson(mid, p.hi, p.f_mid, f_rm, p.f_hi);
        let delta = left + right - p.whole;
        if delta.abs() <= 15.0 * p.tol || p.depth >= MAX_DEPTH || mid <= p.lo || mid >= p.hi {
            total += left + right + delta / 15.0;
            continue;
        }
        visited += 2;
        if visited > MAX_SUBINTERVALS {
            return Err(Error::QuadratureFailure(format!(
                "no convergence on [{lo}, {hi}] within {MAX_SUBINTERVALS} subintervals"
            )));
        }
        let tol = p.tol / 2.0;
        stack.push(Panel { lo: p.lo, hi: mid, f_lo: p.f_lo, f_mid: f_lm, f_hi: p.f_mid, whole: left, tol, depth: p.depth + 1 });
        stack.push(Panel { lo: mid, hi: p.hi, f_lo: p.f_mid, f_mid: f_rm, f_hi: p.f_hi, whole: right, tol, depth: p.depth + 1 });
    }
    Ok(total)
}

/// Integral over `[lo, hi]` of an integrand that may be singular (integrably)
/// at `lo` only.
///
/// Substitutes `x = lo + (hi - lo) t^2`, which turns `|x - lo|^(-1/2)` and
/// logarithmic singularities into bounded integrands. The endpoint itself is
/// never evaluated: abscissae that round onto it move one ulp inward, and the
/// Jacobian uses the offset actually represented rather than the nominal one.
pub fn integrate_singular_at_lo<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let w = hi - lo;
    let inner = lo.next_up();
    adaptive_simpson(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let x = (lo + w * t * t).max(inner);
            let t_eff = ((x - lo) / w).sqrt();
            2.0 * w * t_eff * f(x)
        },
        0.0,
        1.0,
        rel_tol,
    )
}

/// As [`integrate_singular_at_lo`] with the singular endpoint at `hi`.
pub fn integrate_singular_at_hi<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let w = hi - lo;
    let inner = hi.next_down();
    adaptive_simpson(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let x = (hi - w * t * t).min(inner);
            let t_eff = ((hi - x) / w).sqrt();
            2.0 * w * t_eff * f(x)
        },
        0.0,
        1.0,
        rel_tol,
    )
}

/// 20-point Gauss-Legendre nodes on `[-1, 1]` (positive half) and weights.
const GL20_NODES: [f64; 10] = [
    0.076_526_521_133_497_33,
    0.227_785_851_141_645_08,
    0.373_706_088_715_419_56,
    0.510_867_001_950_827_1,
    0.636_053_680_726_515,
    0.746_331_906_460_150_8,
    0.839_116_971_822_218_8,
    0.912_234_428_251_326,
    0.963_971_927_277_913_8,
    0.993_128_599_185_094_9,
];
const GL20_WEIGHTS: [f64; 10] = [
    0.152_753_387_130_725_85,
    0.149_172_986_472_603_75,
    0.142_096_109_318_382_05,
    0.131_688_638_449_176_63,
    0.118_194_531_961_518_42,
    0.101_930_119_817_240_44,
    0.083_276_741_576_704_75,
    0.062_672_048_334_109_06,
    0.040_601_429_800_386_94,
    0.017_614_007_139_152_118,
];

/// Fixed 20-point Gauss-Legendre rule on `[lo, hi]`.
pub fn gauss_legendre_20<F>(mut f: F, lo: f64, hi: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let half = 0.5 * (hi - lo);
    let centre = 0.5 * (hi + lo);
    let mut sum = 0.0;
    for (x, w) in GL20_NODES.iter().zip(GL20_WEIGHTS.iter()) {
        sum += w * (f(centre - half * x) + f(centre + half * x));
    }
    sum * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_and_empty_bounds() {
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 1e-9).unwrap(), 0.0);
        let v = adaptive_simpson(|x| x, 1.0, 0.0, 1e-9).unwrap();
        assert!((v + 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mass_on_six_sigma() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let v = adaptive_simpson(phi, -6.0, 6.0, 1e-9).unwrap();
        // erf(6 / sqrt 2)
        assert!((v - 0.999_999_998_026_825).abs() < 1e-9, "{v}");
    }

    #[test]
    fn non_finite_integrand_fails() {
        let r = adaptive_simpson(|x| 1.0 / x, 0.0, 1.0, 1e-9);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let eps = 1e-4;
        let v = integrate_singular_at_lo(|x: f64| x.abs().powf(-0.5), 0.0, eps, 1e-10).unwrap();
        assert!((v - 2.0 * eps.sqrt()).abs() < 1e-12, "{v}");
        let w = integrate_singular_at_hi(|x: f64| (1.0 - x).powf(-0.5), 1.0 - eps, 1.0, 1e-10).unwrap();
        assert!((w - 2.0 * eps.sqrt()).abs() < 1e-10, "{w}");
    }

    #[test]
    fn log_singularity() {
        // int_0^1 -ln x dx = 1
        let v = integrate_singular_at_lo(|x: f64| -x.ln(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn gauss_legendre_smooth() {
        let v = gauss_legendre_20(f64::cos, 0.0, PI / 2.0);
        assert!((v - 1.0).abs() < 1e-14);
        let w: f64 = GL20_WEIGHTS.iter().sum::<f64>() * 2.0;
        assert!((w - 2.0).abs() < 1e-14);
    }
}
