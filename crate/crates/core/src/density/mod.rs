//! Target densities on a finite support.
//!
//! A [`DensityModel`] wraps any pointwise-computable [`Density`] and adds the
//! pieces the tiler needs: an evaluation counter, mass points that replace a
//! pole by an equal-area plateau, per-column bounds ([`GridProfile`]) and
//! quadrature.

mod builtin;
pub mod catalog;
mod tabular;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::Serialize;

pub use builtin::bessel_k0 as builtin_bessel_k0;
pub use builtin::{BesselK0Product, Cauchy, ClosedForm, Exponential, Gaussian, Scaled, Slowed, Uniform};
pub use tabular::{Interpolation, TabularDensity};

use crate::error::{Error, Result};
use crate::quadrature::{self, DEFAULT_REL_TOL};

/// Samples per column used by the tiler unless configured otherwise: both
/// column endpoints plus the midpoint.
pub const DEFAULT_SAMPLES_PER_COLUMN: usize = 2;

/// Column count of the dense profile used to estimate the global maximum.
const MAX_SCAN_COLUMNS: usize = 1 << 12;

/// A nonnegative function that can be evaluated pointwise on `[a, b]`.
///
/// Normalization is not required.
pub trait Density: Send + Sync + fmt::Debug {
    fn pdf(&self, x: f64) -> f64;

    fn support(&self) -> (f64, f64);

    /// Abscissae of extrema, kinks or table nodes. Column bounds always include
    /// the density values at these points, which makes them exact for densities
    /// that are monotone between consecutive landmarks.
    fn landmarks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Closed-form integral over `[lo, hi]`, when one exists.
    fn exact_integral(&self, _lo: f64, _hi: f64) -> Option<f64> {
        None
    }

    fn describe(&self) -> String;
}

/// A pole at `c` replaced by a plateau over `[c - epsilon, c + epsilon]`
/// carrying the same probability mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassPointSpec {
    pub c: f64,
    pub epsilon: f64,
    /// Height of the plateau: the interval mass divided by `2 epsilon`.
    pub plateau: f64,
}

impl MassPointSpec {
    pub fn lo(&self) -> f64 {
        self.c - self.epsilon
    }

    pub fn hi(&self) -> f64 {
        self.c + self.epsilon
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo() && x <= self.hi()
    }

    /// Probability mass assigned to the interval.
    pub fn mass(&self) -> f64 {
        self.plateau * 2.0 * self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnProfile {
    pub lower: f64,
    pub upper: f64,
    pub integral: f64,
}

/// Per-column evidence at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridProfile {
    pub support: (f64, f64),
    pub columns: Vec<ColumnProfile>,
    pub total_integral: f64,
    pub global_max: f64,
}

impl GridProfile {
    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_width(&self) -> f64 {
        (self.support.1 - self.support.0) / self.columns.len() as f64
    }

    /// Column containing `x`; the right support edge belongs to the last column.
    pub fn column_of(&self, x: f64) -> usize {
        let n = self.columns.len();
        let j = ((x - self.support.0) / self.column_width()).floor();
        (j.max(0.0) as usize).min(n - 1)
    }
}

/// The density used for tiling and sampling.
pub struct DensityModel {
    raw: Arc<dyn Density>,
    support: (f64, f64),
    mass_points: Vec<MassPointSpec>,
    /// `(x, raw f(x))` sorted by `x`, including the points just outside every
    /// mass-point interval. Values inside mass points are replaced on use.
    landmarks: Vec<(f64, f64)>,
    eval_count: AtomicU64,
}

impl fmt::Debug for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityModel")
            .field("density", &self.raw.describe())
            .field("support", &self.support)
            .field("mass_points", &self.mass_points)
            .field("eval_count", &self.eval_count())
            .finish()
    }
}

impl Clone for DensityModel {
    fn clone(&self) -> Self {
        DensityModel {
            raw: Arc::clone(&self.raw),
            support: self.support,
            mass_points: self.mass_points.clone(),
            landmarks: self.landmarks.clone(),
            eval_count: AtomicU64::new(self.eval_count()),
        }
    }
}

impl DensityModel {
    pub fn new<D: Density + 'static>(density: D) -> Result<Self> {
        Self::from_arc(Arc::new(density))
    }

    pub fn from_arc(raw: Arc<dyn Density>) -> Result<Self> {
        let (a, b) = raw.support();
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Parameter(format!("support [{a}, {b}] must be finite")));
        }
        if a >= b {
            return Err(Error::Parameter(format!("support [{a}, {b}] must satisfy a < b")));
        }
        let mut model = DensityModel {
            raw,
            support: (a, b),
            mass_points: Vec::new(),
            landmarks: Vec::new(),
            eval_count: AtomicU64::new(0),
        };
        model.rebuild_landmarks();
        Ok(model)
    }

    /// Tabular density interpolating `points`.
    pub fn from_table(points: Vec<(f64, f64)>, interpolation: Interpolation) -> Result<Self> {
        Self::new(TabularDensity::new(points, interpolation)?)
    }

    /// Same model with the raw density replaced, e.g. by a slowed or timed
    /// wrapper with identical values. Mass points are carried over.
    pub fn with_density(&self, raw: Arc<dyn Density>) -> Result<Self> {
        let mut model = Self::from_arc(raw)?;
        model.mass_points = self.mass_points.clone();
        model.rebuild_landmarks();
        Ok(model)
    }

    fn rebuild_landmarks(&mut self) {
        let (a, b) = self.support;
        let mut xs: Vec<f64> = self.raw.landmarks().into_iter().filter(|x| *x >= a && *x <= b).collect();
        for mp in &self.mass_points {
            xs.push(mp.lo());
            xs.push(mp.hi());
            let outside_lo = mp.lo().next_down();
            let outside_hi = mp.hi().next_up();
            if outside_lo >= a {
                xs.push(outside_lo);
            }
            if outside_hi <= b {
                xs.push(outside_hi);
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        self.landmarks = xs.into_iter().map(|x| (x, self.raw.pdf(x))).collect();
    }

    pub fn density(&self) -> &Arc<dyn Density> {
        &self.raw
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn mass_points(&self) -> &[MassPointSpec] {
        &self.mass_points
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count.load(Ordering::Relaxed)
    }

    pub fn describe(&self) -> String {
        let mut s = self.raw.describe();
        for mp in &self.mass_points {
            s.push_str(&format!(" +mass-point(c={}, eps={})", mp.c, mp.epsilon));
        }
        s
    }

    fn mass_point_at(&self, x: f64) -> Option<&MassPointSpec> {
        self.mass_points.iter().find(|mp| mp.contains(x))
    }

    /// Modified density value without touching the counter.
    fn value(&self, x: f64) -> Result<f64> {
        if let Some(mp) = self.mass_point_at(x) {
            return Ok(mp.plateau);
        }
        let v = self.raw.pdf(x);
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else if v.is_finite() {
            Ok(0.0)
        } else {
            Err(Error::NonFiniteDensity { x, value: v })
        }
    }

    fn landmark_value(&self, x: f64, raw: f64) -> Result<f64> {
        if let Some(mp) = self.mass_point_at(x) {
            return Ok(mp.plateau);
        }
        if raw.is_finite() {
            Ok(raw.max(0.0))
        } else {
            Err(Error::NonFiniteDensity { x, value: raw })
        }
    }

    /// Evaluates the (mass-point modified) density and counts the call.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (a, b) = self.support;
        if !(x >= a && x <= b) {
            return Err(Error::Domain(format!("x = {x} outside support [{a}, {b}]")));
        }
        self.eval_count.fetch_add(1, Ordering::Relaxed);
        self.value(x)
    }

    /// Replaces the density on `[c - epsilon, c + epsilon]` by a plateau of
    /// equal mass. The interval integral is computed with a substitution that
    /// tolerates an integrable singularity at `c`.
    pub fn declare_mass_point(mut self, c: f64, epsilon: f64) -> Result<Self> {
        let (a, b) = self.support;
        if !(epsilon > 0.0 && epsilon.is_finite() && c.is_finite()) {
            return Err(Error::Parameter(format!("mass point needs finite c and epsilon > 0, got c={c}, eps={epsilon}")));
        }
        if c - epsilon < a || c + epsilon > b {
            return Err(Error::Parameter(format!(
                "mass point [{}, {}] not inside support [{a}, {b}]",
                c - epsilon,
                c + epsilon
            )));
        }
        if self.mass_points.iter().any(|mp| mp.lo() <= c + epsilon && c - epsilon <= mp.hi()) {
            return Err(Error::Parameter(format!("mass point at {c} overlaps an existing one")));
        }
        let raw = Arc::clone(&self.raw);
        let f = |x: f64| raw.pdf(x);
        let left = quadrature::integrate_singular_at_hi(f, c - epsilon, c, DEFAULT_REL_TOL)?;
        let right = quadrature::integrate_singular_at_lo(f, c, c + epsilon, DEFAULT_REL_TOL)?;
        let mass = left + right;
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(Error::QuadratureFailure(format!("mass-point integral at {c} is {mass}")));
        }
        self.mass_points.push(MassPointSpec { c, epsilon, plateau: mass / (2.0 * epsilon) });
        self.mass_points.sort_by(|p, q| p.c.total_cmp(&q.c));
        self.rebuild_landmarks();
        Ok(self)
    }

    /// Integral of the modified density over `[lo, hi]`.
    pub fn integral(&self, lo: f64, hi: f64) -> Result<f64> {
        self.integral_with_tol(lo, hi, DEFAULT_REL_TOL)
    }

    pub fn integral_with_tol(&self, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
        let (a, b) = self.support;
        if lo < a || hi > b || lo > hi {
            return Err(Error::Domain(format!("[{lo}, {hi}] not inside support [{a}, {b}]")));
        }
        // Split at mass-point edges; plateaus integrate exactly.
        let mut total = 0.0;
        let mut cursor = lo;
        for mp in &self.mass_points {
            if mp.hi() < cursor || mp.lo() > hi {
                continue;
            }
            if mp.lo() > cursor {
                total += self.raw_integral(cursor, mp.lo(), rel_tol)?;
            }
            let p_lo = mp.lo().max(cursor);
            let p_hi = mp.hi().min(hi);
            total += mp.plateau * (p_hi - p_lo);
            cursor = p_hi;
        }
        if cursor < hi {
            total += self.raw_integral(cursor, hi, rel_tol)?;
        }
        Ok(total)
    }

    fn raw_integral(&self, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
        if let Some(v) = self.raw.exact_integral(lo, hi) {
            return Ok(v);
        }
        let raw = &self.raw;
        quadrature::adaptive_simpson(|x| raw.pdf(x).max(0.0), lo, hi, rel_tol)
    }

    /// Column bounds and trapezoid integrals over `n_columns` equal columns.
    ///
    /// Each column is sampled at `samples_per_column` equally spaced points
    /// plus its right endpoint, which the next column shares, so the profile
    /// costs `n_columns * samples_per_column + 1` evaluations. Landmark values
    /// inside a column widen its bounds without further evaluations.
    pub fn profile(&self, n_columns: usize, samples_per_column: usize) -> Result<GridProfile> {
        let mut columns = Vec::with_capacity(n_columns);
        self.for_each_column(n_columns, samples_per_column, |_, col| columns.push(col))?;
        let total_integral = columns.iter().map(|c| c.integral).sum();
        let global_max = columns.iter().map(|c| c.upper).fold(0.0, f64::max);
        Ok(GridProfile { support: self.support, columns, total_integral, global_max })
    }

    /// Streaming form of [`profile`](Self::profile).
    pub fn for_each_column<F>(&self, n_columns: usize, samples_per_column: usize, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, ColumnProfile),
    {
        if n_columns == 0 || samples_per_column == 0 {
            return Err(Error::Parameter("profile needs at least one column and one sample".into()));
        }
        let (a, b) = self.support;
        let steps = n_columns * samples_per_column;
        let point = |i: usize| if i == steps { b } else { a + (b - a) * (i as f64 / steps as f64) };
        let h = (b - a) / steps as f64;

        let mut lm = 0usize;
        let mut x_prev = point(0);
        let mut f_prev = self.eval(x_prev)?;
        for j in 0..n_columns {
            let x_lo = x_prev;
            let mut lower = f_prev;
            let mut upper = f_prev;
            let mut integral = 0.0;
            for k in 1..=samples_per_column {
                let x = point(j * samples_per_column + k);
                let f = self.eval(x)?;
                lower = lower.min(f);
                upper = upper.max(f);
                integral += 0.5 * h * (f_prev + f);
                x_prev = x;
                f_prev = f;
            }
            let x_hi = x_prev;
            while lm < self.landmarks.len() && self.landmarks[lm].0 < x_lo {
                lm += 1;
            }
            // Landmarks on the shared edge also belong to the next column.
            let mut k = lm;
            while k < self.landmarks.len() && self.landmarks[k].0 <= x_hi {
                let (x, raw) = self.landmarks[k];
                let v = self.landmark_value(x, raw)?;
                lower = lower.min(v);
                upper = upper.max(v);
                k += 1;
            }
            visit(j, ColumnProfile { lower, upper, integral });
        }
        Ok(())
    }

    /// Estimate of `max f` over the support from a dense profile and all
    /// landmarks (which include every mass-point plateau).
    pub fn global_max(&self) -> Result<f64> {
        let mut max = 0.0f64;
        self.for_each_column(MAX_SCAN_COLUMNS, DEFAULT_SAMPLES_PER_COLUMN, |_, col| max = max.max(col.upper))?;
        Ok(max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn uniform01() -> DensityModel {
        DensityModel::new(Uniform::new(0.0, 1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn uniform_eval() {
        let m = uniform01();
        assert_eq!(m.eval(0.3).unwrap(), 1.0);
        assert_eq!(m.eval_count(), 1);
        assert!(matches!(m.eval(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn cauchy_mode() {
        let m = DensityModel::new(Cauchy::new(1.0, -64.0, 64.0).unwrap()).unwrap();
        assert!((m.eval(0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn support_must_be_finite_and_ordered() {
        let inf = ClosedForm::new("inf", 0.0, f64::INFINITY, |_| 1.0);
        assert!(DensityModel::new(inf).is_err());
        let rev = ClosedForm::new("rev", 1.0, 0.0, |_| 1.0);
        assert!(DensityModel::new(rev).is_err());
    }

    #[test]
    fn pole_without_mass_point_is_reported() {
        let m = DensityModel::new(ClosedForm::new("pole", -1.0, 1.0, |x: f64| x.abs().powf(-0.5))).unwrap();
        assert!(matches!(m.eval(0.0), Err(Error::NonFiniteDensity { .. })));
    }

    #[test]
    fn table_examples() {
        let m = DensityModel::from_table(vec![(0.0, 1.0), (1.0, 1.0)], Interpolation::Linear).unwrap();
        assert_eq!(m.support(), (0.0, 1.0));
        assert_eq!(m.eval(0.77).unwrap(), 1.0);
        let m = DensityModel::from_table(vec![(0.0, 0.0), (1.0, 2.0)], Interpolation::Linear).unwrap();
        assert!((m.eval(0.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_plateau() {
        let m = DensityModel::new(Uniform::new(-1.0, 1.0, 0.7).unwrap()).unwrap();
        let m = m.declare_mass_point(0.2, 0.1).unwrap();
        assert!((m.mass_points()[0].plateau - 0.7).abs() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_plateau_matches_closed_form() {
        let c = 0.3;
        let eps = 1e-4;
        let m = DensityModel::new(ClosedForm::new("isqrt", -1.0, 1.0, move |x: f64| (x - c).abs().powf(-0.5))).unwrap();
        let m = m.declare_mass_point(c, eps).unwrap();
        // Closed form: int_{c-eps}^{c+eps} |x-c|^{-1/2} dx = 4 sqrt(eps).
        let expected = 4.0 * eps.sqrt() / (2.0 * eps);
        let plateau = m.mass_points()[0].plateau;
        assert!((plateau - expected).abs() / expected < 1e-8, "{plateau} vs {expected}");
        assert_eq!(m.eval(c).unwrap(), plateau);
        assert_eq!(m.eval(c + eps).unwrap(), plateau);
        assert!(m.eval(c + 2.0 * eps).unwrap() < plateau);
    }

    #[test]
    fn mass_point_preserves_mass() {
        let c = 0.0;
        let eps = 1e-3;
        let raw = ClosedForm::new("log", -1.0, 1.0, |x: f64| -(x.abs()).ln() / 2.0);
        let m = DensityModel::new(raw).unwrap().declare_mass_point(c, eps).unwrap();
        // int_{-eps}^{eps} -ln|x|/2 dx = eps (1 - ln eps)
        let exact = eps * (1.0 - eps.ln());
        let modified = m.integral(-eps, eps).unwrap();
        assert!((modified - exact).abs() < 1e-9 * exact, "{modified} vs {exact}");
    }

    #[test]
    fn mass_point_validation() {
        let m = uniform01();
        assert!(m.clone().declare_mass_point(0.0, 0.1).is_err());
        assert!(m.clone().declare_mass_point(0.5, 0.0).is_err());
        let m = m.declare_mass_point(0.5, 0.1).unwrap();
        assert!(m.declare_mass_point(0.55, 0.1).is_err());
    }

    #[test]
    fn profile_uniform_four_columns() {
        let p = uniform01().profile(4, 2).unwrap();
        for col in &p.columns {
            assert_eq!((col.lower, col.upper), (1.0, 1.0));
            assert!((col.integral - 0.25).abs() < 1e-15);
        }
        assert!((p.total_integral - 1.0).abs() < 1e-15);
        assert_eq!(p.global_max, 1.0);
    }

    #[test]
    fn profile_linear_column_integrals() {
        let m = DensityModel::new(ClosedForm::new("2x", 0.0, 1.0, |x| 2.0 * x)).unwrap();
        let p = m.profile(2, 64).unwrap();
        assert!((p.columns[0].integral - 0.25).abs() < 1e-6);
        assert!((p.columns[1].integral - 0.75).abs() < 1e-6);
        assert_eq!(p.columns[0].lower, 0.0);
        assert_eq!(p.columns[1].upper, 2.0);
    }

    #[test]
    fn profile_eval_count_formula() {
        let m = uniform01();
        for (n, s) in [(1, 1), (4, 2), (7, 3), (64, 5)] {
            let before = m.eval_count();
            m.profile(n, s).unwrap();
            assert_eq!(m.eval_count() - before, (n * s + 1) as u64);
        }
    }

    #[test]
    fn profile_truncated_cauchy_mass() {
        let m = DensityModel::new(Cauchy::new(1.0, -64.0, 64.0).unwrap()).unwrap();
        let p = m.profile(1 << 14, 2).unwrap();
        let exact = 2.0 * 64f64.atan() / PI;
        assert!((p.total_integral - exact).abs() < 1e-6, "{}", p.total_integral);
        assert!((p.global_max - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn profile_includes_mass_point_plateau() {
        // A narrow plateau between samples still bounds its column.
        let m = DensityModel::new(ClosedForm::new("pole", -1.0, 1.0, |x: f64| x.abs().powf(-0.5)))
            .unwrap()
            .declare_mass_point(0.0, 1e-6)
            .unwrap();
        let p = m.profile(3, 2).unwrap();
        let plateau = m.mass_points()[0].plateau;
        assert_eq!(p.columns[1].upper, plateau);
        assert!(p.columns[0].upper < plateau);
    }

    #[test]
    fn integral_examples() {
        assert!((uniform01().integral(0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let doubled = DensityModel::new(Uniform::new(0.0, 1.0, 2.0).unwrap()).unwrap();
        assert!((doubled.integral(0.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        let g = DensityModel::new(ClosedForm::new("gauss", -6.0, 6.0, |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt()))
            .unwrap();
        assert!((g.integral(-6.0, 6.0).unwrap() - 0.999_999_998_026_825).abs() < 1e-9);
    }

    #[test]
    fn profile_soundness_for_monotone_pieces() {
        let m = DensityModel::new(Gaussian::new(0.3, 0.7, -3.0, 4.0).unwrap()).unwrap();
        let p = m.profile(37, 2).unwrap();
        let mut src = crate::urng::UniformSource::from_seed(8);
        for _ in 0..10_000 {
            let x = -3.0 + 7.0 * src.unit_real();
            let v = m.eval(x).unwrap();
            let col = &p.columns[p.column_of(x)];
            assert!(col.lower <= v && v <= col.upper, "x={x} v={v} {col:?}");
        }
    }

    proptest! {
        #[test]
        fn profile_scales_linearly(k in 0.01f64..100.0, n in 1usize..40) {
            let base = DensityModel::new(Gaussian::new(0.0, 1.0, -4.0, 4.0).unwrap()).unwrap();
            let scaled = DensityModel::new(Scaled::new(Arc::new(Gaussian::new(0.0, 1.0, -4.0, 4.0).unwrap()), k).unwrap()).unwrap();
            let p = base.profile(n, 2).unwrap();
            let q = scaled.profile(n, 2).unwrap();
            for (c, d) in p.columns.iter().zip(&q.columns) {
                prop_assert!((d.upper - k * c.upper).abs() <= 1e-12 * k * c.upper.max(1e-300));
                prop_assert!((d.lower - k * c.lower).abs() <= 1e-12 * k * c.upper.max(1e-300));
                prop_assert!((d.integral - k * c.integral).abs() <= 1e-12 * k * c.integral.max(1e-300));
            }
        }
    }
}
