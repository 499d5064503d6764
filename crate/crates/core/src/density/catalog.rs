//! Textual density specifications.
//!
//! ```text
//! builtin:<name>[:k=v,...]     e.g. builtin:gaussian:mu=0,sigma=1,a=-6,b=6
//! table:<path>[:<interp>]      CSV of x,f(x); interp is linear (default) or polyN
//! ```
//!
//! Every builtin accepts `slow=<k>` to evaluate the density `k` times per call.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use super::{BesselK0Product, Cauchy, ClosedForm, Density, DensityModel, Exponential, Gaussian, Interpolation, Slowed, TabularDensity, Uniform};
use crate::error::{Error, Result};
use crate::stable::{self, StableParams};

pub const BUILTIN_NAMES: [&str; 8] =
    ["uniform", "gaussian", "exponential", "cauchy", "levy", "symmetric-levy", "bimodal-fig2", "bessel-k0"];

const DEFAULT_GRID_POINTS: usize = 1 << 15;

struct Params {
    name: String,
    values: BTreeMap<String, f64>,
}

impl Params {
    fn parse(name: &str, text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("expected key=value, got '{item}'")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Parameter(format!("'{v}' is not a number (key {k})")))?;
            values.insert(k.trim().to_string(), v);
        }
        Ok(Params { name: name.to_string(), values })
    }

    fn get(&mut self, key: &str, default: f64) -> f64 {
        self.values.remove(key).unwrap_or(default)
    }

    fn require(&mut self, key: &str) -> Result<f64> {
        self.values.remove(key).ok_or_else(|| Error::Parameter(format!("{} needs parameter '{key}'", self.name)))
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = self.get(key, default as f64);
        if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::Parameter(format!("{key} must be a positive integer, got {v}")));
        }
        Ok(v as usize)
    }

    fn finish(self) -> Result<()> {
        match self.values.keys().next() {
            Some(k) => Err(Error::Parameter(format!("unknown parameter '{k}' for {}", self.name))),
            None => Ok(()),
        }
    }
}

/// Builds the density named by `spec`.
pub fn parse_density(spec: &str) -> Result<DensityModel> {
    DensityModel::from_arc(parse_raw_density(spec)?)
}

pub fn parse_raw_density(spec: &str) -> Result<Arc<dyn Density>> {
    if let Some(rest) = spec.strip_prefix("builtin:") {
        let (name, params) = rest.split_once(':').unwrap_or((rest, ""));
        return builtin(name, params);
    }
    if let Some(rest) = spec.strip_prefix("table:") {
        let (path, interp) = match rest.rsplit_once(':') {
            Some((p, i)) if i.parse::<Interpolation>().is_ok() => (p, i.parse::<Interpolation>()?),
            _ => (rest, Interpolation::Linear),
        };
        return Ok(Arc::new(TabularDensity::new(load_csv(path)?, interp)?));
    }
    Err(Error::Parameter(format!("density spec '{spec}' must start with builtin: or table:")))
}

fn builtin(name: &str, params: &str) -> Result<Arc<dyn Density>> {
    let mut p = Params::parse(name, params)?;
    let slow = p.count("slow", 1)?;
    let density: Arc<dyn Density> = match name {
        "uniform" => {
            let (a, b) = (p.get("a", 0.0), p.get("b", 1.0));
            Arc::new(Uniform::new(a, b, p.get("h", 1.0))?)
        }
        "gaussian" => {
            let (mu, sigma) = (p.get("mu", 0.0), p.get("sigma", 1.0));
            Arc::new(Gaussian::new(mu, sigma, p.get("a", mu - 6.0 * sigma), p.get("b", mu + 6.0 * sigma))?)
        }
        "exponential" => {
            let rate = p.get("rate", 1.0);
            Arc::new(Exponential::new(rate, p.get("a", 0.0), p.get("b", 10.0 / rate))?)
        }
        "cauchy" => {
            let gamma = p.get("gamma", 1.0);
            Arc::new(Cauchy::new(gamma, p.get("a", -64.0 * gamma), p.get("b", 64.0 * gamma))?)
        }
        "levy" => {
            let params = StableParams::new(p.require("alpha")?, p.get("beta", 0.0), p.get("gamma", 1.0), p.get("delta", 0.0))?;
            let (a, b) = (p.get("a", -64.0), p.get("b", 64.0));
            let n = p.count("n", DEFAULT_GRID_POINTS)?;
            Arc::new(stable::levy_pdf_grid(params, n, a, b)?)
        }
        "symmetric-levy" => {
            let alpha = p.require("alpha")?;
            let gamma = p.get("gamma", 1.0);
            StableParams::symmetric(alpha, gamma)?;
            let (a, b) = (p.get("a", -64.0), p.get("b", 64.0));
            Arc::new(
                ClosedForm::new(format!("symmetric-levy(alpha={alpha}, gamma={gamma})"), a, b, move |x| {
                    stable::symmetric_levy_pdf(x, alpha, gamma).unwrap_or(f64::NAN)
                })
                .with_landmarks(vec![0.0]),
            )
        }
        "bimodal-fig2" => Arc::new(stable::bimodal_fig2(p.count("n", DEFAULT_GRID_POINTS)?)?),
        "bessel-k0" => Arc::new(BesselK0Product::new(p.get("a", -15.0), p.get("b", 15.0))?),
        other => {
            return Err(Error::Parameter(format!("unknown builtin '{other}'; known: {}", BUILTIN_NAMES.join(", "))));
        }
    };
    p.finish()?;
    if slow > 1 {
        return Ok(Arc::new(Slowed::new(density, slow as u32)?));
    }
    Ok(density)
}

/// Parses `c=<real>,eps=<real>`.
pub fn parse_mass_point(spec: &str) -> Result<(f64, f64)> {
    let mut p = Params::parse("mass point", spec)?;
    let c = p.require("c")?;
    let eps = p.require("eps")?;
    p.finish()?;
    Ok((c, eps))
}

/// Reads `x,f(x)` rows. Lines starting with `#` are comments; a first row
/// that does not parse as numbers is taken as a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if record.len() < 2 {
            return Err(Error::Format(format!("{}: line {} needs two columns", path.display(), i + 1)));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(x), Ok(f)) => points.push((x, f)),
            _ if i == 0 => continue,
            _ => {
                return Err(Error::Format(format!(
                    "{}: line {}: '{}', '{}' are not numbers",
                    path.display(),
                    i + 1,
                    &record[0],
                    &record[1]
                )))
            }
        }
    }
    Ok(points)
}
