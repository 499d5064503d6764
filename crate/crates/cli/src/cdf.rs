//! Closed-form CDFs named on the command line.
//!
//! ```text
//! uniform:a=0,b=1
//! normal:mu=0,sigma=1[,a=..,b=..]
//! cauchy:x0=0,gamma=1[,a=..,b=..]
//! exponential:rate=1[,a=..,b=..]
//! ```
//!
//! With `a` and `b` the distribution is truncated to `[a, b]`.

use std::collections::BTreeMap;

use statrs::distribution::{Cauchy, ContinuousCDF, Exp, Normal, Uniform};
use tilegen::{Error, Result};

pub struct NamedCdf {
    inner: Box<dyn Fn(f64) -> f64>,
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
}

impl NamedCdf {
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) =
                item.split_once('=').ok_or_else(|| Error::Parameter(format!("expected key=value in cdf, got '{item}'")))?;
            let v: f64 = v.parse().map_err(|_| Error::Parameter(format!("'{v}' is not a number (cdf key {k})")))?;
            params.insert(k.to_string(), v);
        }
        let mut take = |k: &str, default: f64| params.remove(k).unwrap_or(default);
        let inner: Box<dyn Fn(f64) -> f64> = match name {
            "uniform" => {
                let d = Uniform::new(take("a", 0.0), take("b", 1.0)).map_err(|e| bad(name, e))?;
                Box::new(move |x| d.cdf(x))
            }
            "normal" | "gaussian" => {
                let d = Normal::new(take("mu", 0.0), take("sigma", 1.0)).map_err(|e| bad(name, e))?;
                Box::new(move |x| d.cdf(x))
            }
            "cauchy" => {
                let d = Cauchy::new(take("x0", 0.0), take("gamma", 1.0)).map_err(|e| bad(name, e))?;
                Box::new(move |x| d.cdf(x))
            }
            "exponential" => {
                let d = Exp::new(take("rate", 1.0)).map_err(|e| bad(name, e))?;
                Box::new(move |x| d.cdf(x))
            }
            other => return Err(Error::Parameter(format!("unknown cdf '{other}'; known: uniform, normal, cauchy, exponential"))),
        };
        let lo = take("a", f64::NEG_INFINITY);
        let hi = take("b", f64::INFINITY);
        if let Some(k) = params.keys().next() {
            return Err(Error::Parameter(format!("unknown parameter '{k}' for cdf {name}")));
        }
        let (f_lo, f_hi) = (if lo.is_finite() { inner(lo) } else { 0.0 }, if hi.is_finite() { inner(hi) } else { 1.0 });
        if !(f_hi > f_lo) {
            return Err(Error::Parameter(format!("cdf {name} has no mass on [{lo}, {hi}]")));
        }
        Ok(NamedCdf { inner, lo, hi, f_lo, f_hi })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.lo, self.hi);
        ((self.inner)(x) - self.f_lo) / (self.f_hi - self.f_lo)
    }
}

fn bad(name: &str, e: impl std::fmt::Display) -> Error {
    Error::Parameter(format!("cdf {name}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_cdfs() {
        let n = NamedCdf::parse("normal:mu=1,sigma=2").unwrap();
        assert!((n.eval(1.0) - 0.5).abs() < 1e-15);
        let c = NamedCdf::parse("cauchy:gamma=1,a=-1,b=1").unwrap();
        assert!((c.eval(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(c.eval(-1.0), 0.0);
        assert_eq!(c.eval(5.0), 1.0);
        let u = NamedCdf::parse("uniform").unwrap();
        assert_eq!(u.eval(0.25), 0.25);
        let e = NamedCdf::parse("exponential:rate=2").unwrap();
        assert!((e.eval(1.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn bad_cdfs() {
        for spec in ["weibull", "normal:sigma=-1", "normal:mu", "normal:zeta=1", "uniform:a=2,b=1"] {
            assert!(NamedCdf::parse(spec).is_err(), "{spec}");
        }
    }
}
