//! Drawing variates from a tiling.

use std::sync::Arc;

use serde::Serialize;

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::tiling::TilingTable;
use crate::urng::UniformSource;

/// Attempts allowed per variate before the table is declared broken.
pub const MAX_ATTEMPTS_PER_DRAW: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub attempts: u64,
    pub accepts: u64,
    pub rejections: u64,
    pub density_evals: u64,
}

impl Counters {
    pub fn merge(&self, other: &Counters) -> Counters {
        Counters {
            attempts: self.attempts + other.attempts,
            accepts: self.accepts + other.accepts,
            rejections: self.rejections + other.rejections,
            density_evals: self.density_evals + other.density_evals,
        }
    }

    pub fn rejection_fraction(&self) -> f64 {
        self.rejections as f64 / self.attempts as f64
    }

    pub fn evaluation_fraction(&self) -> f64 {
        self.density_evals as f64 / self.attempts as f64
    }
}

/// One sampling stream over a shared table. Not meant to be shared between
/// threads; fork the source and build one state per thread instead.
#[derive(Debug)]
pub struct SamplerState {
    table: Arc<TilingTable>,
    model: Arc<DensityModel>,
    source: UniformSource,
    counters: Counters,
    a: f64,
    b: f64,
    dx: f64,
    dy: f64,
    n: u64,
}

impl SamplerState {
    pub fn new(table: Arc<TilingTable>, model: Arc<DensityModel>, source: UniformSource) -> Result<Self> {
        if table.support() != model.support() {
            return Err(Error::Parameter(format!(
                "table support {:?} differs from density support {:?}",
                table.support(),
                model.support()
            )));
        }
        let (a, b) = table.support();
        Ok(SamplerState {
            dx: table.delta_x(),
            dy: table.delta_y(),
            n: table.n_tiles() as u64,
            a,
            b,
            table,
            model,
            source,
            counters: Counters::default(),
        })
    }

    pub fn table(&self) -> &Arc<TilingTable> {
        &self.table
    }

    pub fn model(&self) -> &Arc<DensityModel> {
        &self.model
    }

    pub fn source(&self) -> &UniformSource {
        &self.source
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// One variate. Interior tiles accept without touching the density; a
    /// rejection restarts with a fresh tile.
    pub fn draw(&mut self) -> Result<f64> {
        let tiles = self.table.tiles();
        for _ in 0..MAX_ATTEMPTS_PER_DRAW {
            self.counters.attempts += 1;
            let tile = tiles[self.source.uniform_index(self.n) as usize];
            let x = (self.a + (tile.col() as f64 + self.source.unit_real()) * self.dx).min(self.b);
            if tile.is_interior() {
                self.counters.accepts += 1;
                return Ok(x);
            }
            let y = (tile.row() as f64 + self.source.unit_real()) * self.dy;
            self.counters.density_evals += 1;
            if y < self.model.eval(x)? {
                self.counters.accepts += 1;
                return Ok(x);
            }
            self.counters.rejections += 1;
        }
        Err(Error::Internal(format!("no variate accepted in {MAX_ATTEMPTS_PER_DRAW} attempts; table does not cover the density")))
    }

    pub fn draw_batch(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        self.fill(&mut out, n)?;
        Ok(out)
    }

    /// Appends `n` variates to `out`.
    pub fn fill(&mut self, out: &mut Vec<f64>, n: usize) -> Result<()> {
        out.reserve(n);
        for _ in 0..n {
            out.push(self.draw()?);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{ClosedForm, Interpolation, Uniform};
    use crate::tiling::{build, Label, StopRule, Tile};

    fn state_for(model: DensityModel, table: TilingTable, seed: u64) -> SamplerState {
        SamplerState::new(Arc::new(table), Arc::new(model), UniformSource::from_seed(seed)).unwrap()
    }

    #[test]
    fn fresh_counters_are_zero() {
        let m = DensityModel::new(Uniform::new(0.0, 1.0, 1.0).unwrap()).unwrap();
        let (t, _) = build(&m, StopRule::to_level(3)).unwrap();
        assert_eq!(state_for(m, t, 1).counters(), Counters::default());
    }

    #[test]
    fn uniform_never_evaluates() {
        let m = DensityModel::new(Uniform::new(-2.0, 3.0, 0.2).unwrap()).unwrap();
        let (t, _) = build(&m, StopRule::to_level(5)).unwrap();
        let mut s = state_for(m, t, 9);
        let before = s.model().eval_count();
        let xs = s.draw_batch(10_000).unwrap();
        assert!(xs.iter().all(|x| (-2.0..=3.0).contains(x)));
        let c = s.counters();
        assert_eq!((c.attempts, c.accepts, c.rejections, c.density_evals), (10_000, 10_000, 0, 0));
        assert_eq!(s.model().eval_count(), before);
    }

    #[test]
    fn batch_equals_repeated_draws() {
        let m = DensityModel::new(ClosedForm::new("tri", 0.0, 1.0, |x| 1.0 - x)).unwrap();
        let (t, _) = build(&m, StopRule::to_level(6)).unwrap();
        let mut s1 = state_for(m.clone(), t.clone(), 42);
        let mut s2 = state_for(m, t, 42);
        let batch = s1.draw_batch(100).unwrap();
        let single: Vec<f64> = (0..100).map(|_| s2.draw().unwrap()).collect();
        assert_eq!(batch, single);
        assert!(s1.draw_batch(0).unwrap().is_empty());
        assert_eq!(s1.counters(), s2.counters());
    }

    #[test]
    fn single_border_tile_accepts_half() {
        // f is half the tile height everywhere.
        let m = DensityModel::new(Uniform::new(0.0, 1.0, 0.5).unwrap()).unwrap();
        let t = TilingTable::from_parts((0.0, 1.0), 1, 1.0, 0.5, vec![Tile::new(0, 0, Label::Border)]).unwrap();
        let mut s = state_for(m, t, 5);
        s.draw_batch(100_000).unwrap();
        let c = s.counters();
        let p = c.accepts as f64 / c.attempts as f64;
        let sigma = (0.25 / c.attempts as f64).sqrt();
        assert!((p - 0.5).abs() < 4.0 * sigma, "{p}");
        assert_eq!(c.accepts + c.rejections, c.attempts);
        assert_eq!(c.density_evals, c.attempts);
    }

    #[test]
    fn broken_table_hits_the_cap() {
        let m = DensityModel::new(Uniform::new(0.0, 1.0, 1.0).unwrap()).unwrap();
        // A Border tile above the density never accepts.
        let t = TilingTable::from_parts((0.0, 1.0), 2, 4.0, 1.0, vec![Tile::new(0, 1, Label::Border), Tile::new(1, 1, Label::Border)])
            .unwrap();
        let mut s = state_for(m, t, 5);
        assert!(matches!(s.draw(), Err(Error::Internal(_))));
    }

    #[test]
    fn jump_gap_is_never_hit() {
        let m = DensityModel::from_table(
            vec![(0.0, 0.1), (0.5, 0.1), (0.5 + 1e-12, 0.9), (1.0, 0.9)],
            Interpolation::Linear,
        )
        .unwrap();
        let (t, _) = build(&m, StopRule::to_level(10)).unwrap();
        let mut s = state_for(m, t, 77);
        let xs = s.draw_batch(200_000).unwrap();
        let below = xs.iter().filter(|&&x| x < 0.5).count() as f64 / xs.len() as f64;
        assert!(xs.iter().all(|&x| !(x > 0.5 && x < 0.5 + 1e-12)));
        let sigma = (0.1 * 0.9 / xs.len() as f64).sqrt();
        assert!((below - 0.1).abs() < 4.0 * sigma, "{below}");
    }

    #[test]
    fn support_mismatch_rejected() {
        let m = DensityModel::new(Uniform::new(0.0, 1.0, 1.0).unwrap()).unwrap();
        let other = DensityModel::new(Uniform::new(0.0, 2.0, 1.0).unwrap()).unwrap();
        let (t, _) = build(&m, StopRule::to_level(2)).unwrap();
        assert!(SamplerState::new(Arc::new(t), Arc::new(other), UniformSource::from_seed(0)).is_err());
    }
}
