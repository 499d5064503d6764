use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Density;
use crate::error::Error;

/// Minimum spacing between consecutive abscissae, in units of the local ulp.
/// Closer points cannot represent a jump reliably.
const MIN_SPACING_ULPS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    Linear,
    /// Local Lagrange polynomial through the `order + 1` nearest nodes.
    Polynomial(usize),
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interpolation::Linear => f.write_str("linear"),
            Interpolation::Polynomial(k) => write!(f, "poly{k}"),
        }
    }
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim().to_ascii_lowercase();
        if s == "linear" {
            return Ok(Interpolation::Linear);
        }
        let order = s
            .strip_prefix("polynomial")
            .or_else(|| s.strip_prefix("poly"))
            .map(|r| r.trim_start_matches([':', '(']).trim_end_matches(')'))
            .and_then(|r| r.parse::<usize>().ok())
            .ok_or_else(|| Error::Parameter(format!("unknown interpolation '{s}'")))?;
        if order == 0 {
            return Err(Error::Parameter("polynomial order must be >= 1".into()));
        }
        Ok(if order == 1 { Interpolation::Linear } else { Interpolation::Polynomial(order) })
    }
}

/// Density given by `(x_i, f(x_i))` samples.
#[derive(Clone)]
pub struct TabularDensity {
    xs: Vec<f64>,
    fs: Vec<f64>,
    interpolation: Interpolation,
    /// Node spacing when the abscissae are equidistant; enables O(1) lookup.
    uniform_step: Option<f64>,
    /// Cumulative trapezoid integral at each node (linear interpolation only).
    cumulative: Vec<f64>,
}

impl fmt::Debug for TabularDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabularDensity")
            .field("points", &self.xs.len())
            .field("support", &(self.xs[0], self.xs[self.xs.len() - 1]))
            .field("interpolation", &self.interpolation)
            .finish()
    }
}

impl TabularDensity {
    pub fn new(points: Vec<(f64, f64)>, interpolation: Interpolation) -> Result<Self, Error> {
        if points.len() < 2 {
            return Err(Error::InvalidTable(format!("need at least 2 points, got {}", points.len())));
        }
        for (i, &(x, f)) in points.iter().enumerate() {
            if !x.is_finite() || !f.is_finite() {
                return Err(Error::InvalidTable(format!("point {i} ({x}, {f}) is not finite")));
            }
            if f < 0.0 {
                return Err(Error::InvalidTable(format!("point {i} has negative density {f}")));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            let (x0, x1) = (w[0].0, w[1].0);
            if x1 <= x0 {
                return Err(Error::InvalidTable(format!("abscissae not strictly increasing at point {}", i + 1)));
            }
            let ulp = x0.abs().max(x1.abs()).max(f64::MIN_POSITIVE) * f64::EPSILON;
            if x1 - x0 < MIN_SPACING_ULPS * ulp {
                return Err(Error::InvalidTable(format!(
                    "points {i} and {} closer than {MIN_SPACING_ULPS} ulps",
                    i + 1
                )));
            }
        }
        if let Interpolation::Polynomial(order) = interpolation {
            if order + 1 > points.len() {
                return Err(Error::InvalidTable(format!(
                    "polynomial order {order} needs {} points, table has {}",
                    order + 1,
                    points.len()
                )));
            }
        }
        let (xs, fs): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        let n = xs.len();
        let step = (xs[n - 1] - xs[0]) / (n - 1) as f64;
        let uniform_step = xs
            .iter()
            .enumerate()
            .all(|(i, &x)| (x - (xs[0] + step * i as f64)).abs() <= 1e-9 * step)
            .then_some(step);
        let mut cumulative = Vec::with_capacity(n);
        cumulative.push(0.0);
        for i in 1..n {
            let c = cumulative[i - 1] + 0.5 * (xs[i] - xs[i - 1]) * (fs[i] + fs[i - 1]);
            cumulative.push(c);
        }
        Ok(TabularDensity { xs, fs, interpolation, uniform_step, cumulative })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.fs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Index `i` of the segment `[x_i, x_{i+1}]` containing `x`.
    #[inline]
    fn segment(&self, x: f64) -> usize {
        let last = self.xs.len() - 2;
        let guess = match self.uniform_step {
            Some(h) => (((x - self.xs[0]) / h).floor().max(0.0) as usize).min(last),
            None => return self.xs.partition_point(|&xi| xi <= x).saturating_sub(1).min(last),
        };
        // Correct for rounding in the division.
        let mut i = guess;
        while i > 0 && self.xs[i] > x {
            i -= 1;
        }
        while i < last && self.xs[i + 1] <= x {
            i += 1;
        }
        i
    }

    #[inline]
    fn linear(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.fs[i] + t * (self.fs[i + 1] - self.fs[i])
    }

    fn polynomial(&self, i: usize, x: f64, order: usize) -> f64 {
        let n = self.xs.len();
        let start = (i + 1).saturating_sub(order.div_ceil(2)).min(n - order - 1);
        // Neville's scheme over nodes start..=start+order.
        let mut p = [0.0f64; 32];
        let m = order + 1;
        debug_assert!(m <= p.len());
        p[..m].copy_from_slice(&self.fs[start..start + m]);
        for level in 1..m {
            for k in 0..m - level {
                let xa = self.xs[start + k];
                let xb = self.xs[start + k + level];
                p[k] = ((x - xb) * p[k] + (xa - x) * p[k + 1]) / (xa - xb);
            }
        }
        p[0]
    }
}

impl Density for TabularDensity {
    #[inline]
    fn pdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let i = self.segment(x);
        let v = match self.interpolation {
            Interpolation::Linear => self.linear(i, x),
            Interpolation::Polynomial(order) => self.polynomial(i, x, order.min(31)),
        };
        // Overshoot of high-order interpolation must not go negative.
        v.max(0.0)
    }

    fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn landmarks(&self) -> Vec<f64> {
        self.xs.clone()
    }

    fn exact_integral(&self, lo: f64, hi: f64) -> Option<f64> {
        if self.interpolation != Interpolation::Linear {
            return None;
        }
        let at = |x: f64| -> f64 {
            let i = self.segment(x);
            let f = self.linear(i, x);
            self.cumulative[i] + 0.5 * (x - self.xs[i]) * (self.fs[i] + f)
        };
        Some(at(hi) - at(lo))
    }

    fn describe(&self) -> String {
        format!("table({} points, {})", self.xs.len(), self.interpolation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_tables() {
        assert!(TabularDensity::new(vec![(0.0, 1.0)], Interpolation::Linear).is_err());
        assert!(TabularDensity::new(vec![(1.0, 1.0), (0.0, 1.0)], Interpolation::Linear).is_err());
        assert!(TabularDensity::new(vec![(0.0, 1.0), (0.0, 1.0)], Interpolation::Linear).is_err());
        assert!(TabularDensity::new(vec![(0.0, -1.0), (1.0, 1.0)], Interpolation::Linear).is_err());
        assert!(TabularDensity::new(vec![(0.0, f64::NAN), (1.0, 1.0)], Interpolation::Linear).is_err());
        assert!(TabularDensity::new(vec![(1.0, 1.0), (1.0 + f64::EPSILON, 1.0)], Interpolation::Linear).is_err());
        assert!(TabularDensity::new(vec![(0.0, 1.0), (1.0, 1.0)], Interpolation::Polynomial(3)).is_err());
    }

    #[test]
    fn jump_of_nearby_points() {
        let x = 0.5;
        let t = TabularDensity::new(vec![(0.0, 0.1), (x, 0.1), (x + 1e-12, 0.9), (1.0, 0.9)], Interpolation::Linear)
            .unwrap();
        assert_eq!(t.pdf(0.25), 0.1);
        assert_eq!(t.pdf(0.75), 0.9);
        let mid = t.pdf(x + 0.5e-12);
        assert!(mid > 0.1 && mid < 0.9);
    }

    #[test]
    fn uniform_and_irregular_lookup_agree() {
        let pts: Vec<(f64, f64)> = (0..=100).map(|i| (i as f64 * 0.01, (i as f64 * 0.1).sin().abs())).collect();
        let mut irregular = pts.clone();
        irregular[50].0 += 1e-4;
        let a = TabularDensity::new(pts, Interpolation::Linear).unwrap();
        assert!(a.uniform_step.is_some());
        let b = TabularDensity::new(irregular, Interpolation::Linear).unwrap();
        assert!(b.uniform_step.is_none());
        for k in 0..1000 {
            let x = k as f64 * 0.001;
            if (x - 0.5).abs() > 0.011 {
                assert!((a.pdf(x) - b.pdf(x)).abs() < 1e-12, "x={x}");
            }
        }
    }

    #[test]
    fn polynomial_reproduces_cubic() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| {
            let x = i as f64 * 0.25;
            (x, 1.0 + x * x * x)
        }).collect();
        let t = TabularDensity::new(pts, Interpolation::Polynomial(6)).unwrap();
        for x in [0.1, 1.3, 2.71, 4.7] {
            assert!((t.pdf(x) - (1.0 + x * x * x)).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn polynomial_overshoot_clamped() {
        // A spike makes a high-order interpolant ring below zero.
        let mut pts: Vec<(f64, f64)> = (0..15).map(|i| (i as f64, 0.0)).collect();
        pts[7].1 = 10.0;
        let t = TabularDensity::new(pts, Interpolation::Polynomial(6)).unwrap();
        let min = (0..1400).map(|k| t.pdf(k as f64 * 0.01)).fold(f64::INFINITY, f64::min);
        assert_eq!(min, 0.0);
    }

    #[test]
    fn exact_trapezoid_integral() {
        let t = TabularDensity::new(vec![(0.0, 0.0), (1.0, 2.0), (3.0, 0.0)], Interpolation::Linear).unwrap();
        assert!((t.exact_integral(0.0, 3.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((t.exact_integral(0.0, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((t.exact_integral(0.5, 2.0).unwrap() - (1.0 - 0.25 + 1.5)).abs() < 1e-15);
    }

    #[test]
    fn parse_interpolation() {
        assert_eq!("linear".parse::<Interpolation>().unwrap(), Interpolation::Linear);
        assert_eq!("poly6".parse::<Interpolation>().unwrap(), Interpolation::Polynomial(6));
        assert_eq!("polynomial(4)".parse::<Interpolation>().unwrap(), Interpolation::Polynomial(4));
        assert!("spline".parse::<Interpolation>().is_err());
    }
}
