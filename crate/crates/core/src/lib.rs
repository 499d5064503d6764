//! Random variates from arbitrary univariate densities by equal-tile
//! rejection sampling.
//!
//! A density on a finite support is covered by congruent rectangles obtained
//! by repeated fourfold splitting. Tiles entirely below the density accept
//! without evaluating it, so after a few refinements sampling speed no longer
//! depends on the shape of the density or on the cost of evaluating it.
//!
//! ```
//! use std::sync::Arc;
//! use tilegen::{build, DensityModel, Gaussian, SamplerState, StopRule, UniformSource};
//!
//! let model = DensityModel::new(Gaussian::new(0.0, 1.0, -6.0, 6.0).unwrap()).unwrap();
//! let (table, history) = build(&model, StopRule::default()).unwrap();
//! assert!(history.last().unwrap().rejection_rate <= 0.02);
//! let mut sampler = SamplerState::new(Arc::new(table), Arc::new(model), UniformSource::from_seed(7)).unwrap();
//! let x = sampler.draw().unwrap();
//! assert!((-6.0..=6.0).contains(&x));
//! ```

pub mod bench;
pub mod density;
pub mod error;
pub mod gof;
pub mod quadrature;
pub mod sampler;
pub mod stable;
pub mod tiling;
pub mod urng;

pub use density::builtin_bessel_k0 as bessel_k0;
pub use density::{
    BesselK0Product, Cauchy, ClosedForm, Density, DensityModel, Exponential, Gaussian, GridProfile, Interpolation,
    MassPointSpec, Scaled, Slowed, TabularDensity, Uniform,
};
pub use error::{Error, Result};
pub use sampler::{Counters, SamplerState};
pub use stable::StableParams;
pub use tiling::{build, initial_tile, refine, Label, RefinementStats, StopRule, Tile, TilingTable};
pub use urng::{RngAlgorithm, UniformSource};
