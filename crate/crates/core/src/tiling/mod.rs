//! Equal-tile covering of a density.
//!
//! Level `r` splits `[a, b]` into `2^(r-1)` columns and the initial height `H`
//! into rows of height `H / 2^(r-1)`. Each refinement splits every tile into
//! four, drops children that lie above the density and marks children that lie
//! below it as [`Label::Interior`].

mod format;

use std::fmt;

use serde::Serialize;

use crate::density::{DensityModel, DEFAULT_SAMPLES_PER_COLUMN};
use crate::error::{Error, Result};

pub use format::{FORMAT_VERSION, HEADER_BYTES, MAGIC, RECORD_BYTES};

/// Bytes one tile occupies in memory and on disk.
pub const TILE_BYTES: u64 = 8;
pub const DEFAULT_TARGET_R: f64 = 0.02;
pub const DEFAULT_MAX_LEVEL: u32 = 26;
pub const DEFAULT_MEMORY_BUDGET: u64 = 64 << 20;

const INTERIOR_BIT: u32 = 1 << 31;
/// Largest level whose row indices still fit beside the label bit.
const MAX_SUPPORTED_LEVEL: u32 = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    /// Entirely below the density: variates drawn here are accepted outright.
    Interior,
    /// Crossed by the density: needs the `Y < f(X)` test.
    Border,
}

/// One tile, packed into two 32-bit words. The top bit of the row word holds
/// the label.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tile {
    col: u32,
    row_label: u32,
}

impl Tile {
    pub fn new(col: u32, row: u32, label: Label) -> Self {
        assert!(row < INTERIOR_BIT, "row index {row} too large");
        let flag = if label == Label::Interior { INTERIOR_BIT } else { 0 };
        Tile { col, row_label: row | flag }
    }

    pub(crate) fn from_raw(col: u32, row_label: u32) -> Self {
        Tile { col, row_label }
    }

    pub(crate) fn raw_row(&self) -> u32 {
        self.row_label
    }

    #[inline]
    pub fn col(&self) -> u32 {
        self.col
    }

    #[inline]
    pub fn row(&self) -> u32 {
        self.row_label & !INTERIOR_BIT
    }

    #[inline]
    pub fn is_interior(&self) -> bool {
        self.row_label & INTERIOR_BIT != 0
    }

    pub fn label(&self) -> Label {
        if self.is_interior() {
            Label::Interior
        } else {
            Label::Border
        }
    }
}

impl fmt::Debug for Tile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tile({}, {}, {:?})", self.col(), self.row(), self.label())
    }
}

/// The finished covering. Tiles are ordered by column, then row.
#[derive(Debug, Clone, PartialEq)]
pub struct TilingTable {
    support: (f64, f64),
    level: u32,
    height: f64,
    total_integral: f64,
    tiles: Vec<Tile>,
}

impl TilingTable {
    /// Assembles and validates a table from its parts.
    pub fn from_parts(support: (f64, f64), level: u32, height: f64, total_integral: f64, mut tiles: Vec<Tile>) -> Result<Self> {
        tiles.sort_by_key(|t| (t.col(), t.row()));
        let table = TilingTable { support, level, height, total_integral, tiles };
        table.validate().map_err(Error::InvalidTable)?;
        Ok(table)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        let (a, b) = self.support;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(format!("bad support [{a}, {b}]"));
        }
        if self.level == 0 || self.level > MAX_SUPPORTED_LEVEL {
            return Err(format!("level {} outside 1..={MAX_SUPPORTED_LEVEL}", self.level));
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(format!("initial height {} must be positive", self.height));
        }
        if !(self.total_integral >= 0.0 && self.total_integral.is_finite()) {
            return Err(format!("total integral {} must be finite and nonnegative", self.total_integral));
        }
        if self.tiles.is_empty() {
            return Err("table has no tiles".into());
        }
        let n = self.n_columns() as u64;
        let rows = 1u64 << (self.level - 1);
        for pair in self.tiles.windows(2) {
            if (pair[0].col(), pair[0].row()) >= (pair[1].col(), pair[1].row()) {
                return Err(format!("duplicate or unordered tile at column {} row {}", pair[1].col(), pair[1].row()));
            }
        }
        for t in &self.tiles {
            if t.col() as u64 >= n {
                return Err(format!("tile column {} >= {n} columns", t.col()));
            }
            if t.row() as u64 >= rows {
                return Err(format!("tile row {} beyond {rows} rows", t.row()));
            }
        }
        let covered = self.n_tiles() as f64 * self.tile_area();
        if covered < self.total_integral * (1.0 - 1e-12) {
            return Err(format!("tile area {covered} below the density integral {}", self.total_integral));
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn n_columns(&self) -> usize {
        1usize << (self.level - 1)
    }

    pub fn delta_x(&self) -> f64 {
        (self.support.1 - self.support.0) / self.n_columns() as f64
    }

    pub fn delta_y(&self) -> f64 {
        self.height / self.n_columns() as f64
    }

    /// Height `H` of the level-1 tile.
    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn total_integral(&self) -> f64 {
        self.total_integral
    }

    pub fn tile_area(&self) -> f64 {
        self.delta_x() * self.delta_y()
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn n_tiles(&self) -> usize {
        self.tiles.len()
    }

    pub fn n_interior(&self) -> usize {
        self.tiles.iter().filter(|t| t.is_interior()).count()
    }

    pub fn n_border(&self) -> usize {
        self.n_tiles() - self.n_interior()
    }

    pub fn memory_bytes(&self) -> u64 {
        self.n_tiles() as u64 * TILE_BYTES
    }

    /// Left edge of a tile.
    #[inline]
    pub fn tile_x_lo(&self, tile: Tile) -> f64 {
        self.support.0 + tile.col() as f64 * self.delta_x()
    }

    #[inline]
    pub fn tile_y_lo(&self, tile: Tile) -> f64 {
        tile.row() as f64 * self.delta_y()
    }

    /// Tile counts per column (stack heights).
    pub fn column_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_columns()];
        for t in &self.tiles {
            counts[t.col() as usize] += 1;
        }
        counts
    }

    /// Height of the tile stacks (the majorizing function) over column `col`.
    pub fn envelope(&self, col: usize) -> f64 {
        let top = self.tiles.iter().filter(|t| t.col() as usize == col).map(|t| t.row() + 1).max().unwrap_or(0);
        top as f64 * self.delta_y()
    }

    /// Index of the column containing `x`.
    pub fn column_of(&self, x: f64) -> usize {
        let j = ((x - self.support.0) / self.delta_x()).floor();
        (j.max(0.0) as usize).min(self.n_columns() - 1)
    }

    pub fn stats(&self) -> RefinementStats {
        let n = self.n_tiles();
        let area = n as f64 * self.tile_area();
        RefinementStats {
            level: self.level,
            n_tiles: n as u64,
            n_border: self.n_border() as u64,
            rejection_rate: (1.0 - self.total_integral / area).max(0.0),
            evaluation_rate: self.n_border() as f64 / n as f64,
            memory_bytes: self.memory_bytes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementStats {
    pub level: u32,
    pub n_tiles: u64,
    pub n_border: u64,
    /// `1 - integral / (N S)`.
    pub rejection_rate: f64,
    /// Fraction of Border tiles, i.e. density evaluations per attempt.
    pub evaluation_rate: f64,
    pub memory_bytes: u64,
}

impl RefinementStats {
    pub const CSV_HEADER: &'static str = "level,N,R,E,bytes";

    pub fn csv_row(&self) -> String {
        format!("{},{},{:.6},{:.6},{}", self.level, self.n_tiles, self.rejection_rate, self.evaluation_rate, self.memory_bytes)
    }
}

/// When to stop refining. The first bound met ends the build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StopRule {
    pub target_r: Option<f64>,
    pub target_e: Option<f64>,
    pub max_level: u32,
    pub memory_budget: u64,
    pub samples_per_column: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            target_r: Some(DEFAULT_TARGET_R),
            target_e: None,
            max_level: DEFAULT_MAX_LEVEL,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            samples_per_column: DEFAULT_SAMPLES_PER_COLUMN,
        }
    }
}

impl StopRule {
    /// Refine to exactly `level` regardless of R and E.
    pub fn to_level(level: u32) -> Self {
        StopRule { target_r: None, target_e: None, max_level: level, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.max_level == 0 || self.max_level > MAX_SUPPORTED_LEVEL {
            return Err(Error::Parameter(format!("max level must be in 1..={MAX_SUPPORTED_LEVEL}")));
        }
        for t in [self.target_r, self.target_e].into_iter().flatten() {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Parameter(format!("target rate {t} outside [0, 1]")));
            }
        }
        if self.samples_per_column == 0 {
            return Err(Error::Parameter("samples per column must be >= 1".into()));
        }
        Ok(())
    }

    fn satisfied(&self, s: &RefinementStats) -> bool {
        self.target_r.is_some_and(|t| s.rejection_rate <= t)
            || self.target_e.is_some_and(|t| s.evaluation_rate <= t)
            || s.level >= self.max_level
    }
}

/// Level-1 table: one tile `[a, b] x [0, H]`, `H` the maximum of the density
/// (mass-point plateaus included).
pub fn initial_tile(model: &DensityModel) -> Result<TilingTable> {
    initial_tile_with(model, DEFAULT_SAMPLES_PER_COLUMN)
}

fn initial_tile_with(model: &DensityModel, samples_per_column: usize) -> Result<TilingTable> {
    let (a, b) = model.support();
    let height = model.global_max()?;
    if !(height > 0.0) {
        return Err(Error::DegenerateDensity(format!("density vanishes on [{a}, {b}]")));
    }
    let total_integral = model.integral(a, b)?;
    if !(total_integral > 0.0) {
        return Err(Error::DegenerateDensity(format!("density integral on [{a}, {b}] is {total_integral}")));
    }
    let column = model.profile(1, samples_per_column)?.columns[0];
    let label = if column.lower >= height { Label::Interior } else { Label::Border };
    Ok(TilingTable { support: (a, b), level: 1, height, total_integral, tiles: vec![Tile::new(0, 0, label)] })
}

/// Splits every tile of `table` into four and reclassifies the children
/// against column bounds sampled at the new width.
pub fn refine(table: &TilingTable, model: &DensityModel) -> Result<TilingTable> {
    refine_with(table, model, DEFAULT_SAMPLES_PER_COLUMN, u64::MAX)
}

fn refine_with(table: &TilingTable, model: &DensityModel, samples_per_column: usize, memory_budget: u64) -> Result<TilingTable> {
    if model.support() != table.support {
        return Err(Error::Parameter(format!(
            "model support {:?} differs from table support {:?}",
            model.support(),
            table.support
        )));
    }
    let level = table.level + 1;
    if level > MAX_SUPPORTED_LEVEL {
        return Err(Error::Parameter(format!("cannot refine beyond level {MAX_SUPPORTED_LEVEL}")));
    }
    let parent_counts = table.column_counts();
    let n = 1usize << (level - 1);
    let dy = table.height / n as f64;

    // (retained, interior) per column.
    let mut counts: Vec<(u32, u32)> = Vec::with_capacity(n);
    let mut clamped = 0usize;
    model.for_each_column(n, samples_per_column, |j, col| {
        let limit = 2 * parent_counts[j / 2];
        // Rows with row * dy < upper.
        let wanted = (col.upper / dy).ceil().max(0.0);
        let retained = if wanted > limit as f64 {
            clamped += 1;
            limit
        } else {
            wanted as u32
        };
        let interior = ((col.lower / dy).floor().max(0.0) as u32).min(retained);
        counts.push((retained, interior));
    })?;
    if clamped > 0 {
        log::warn!("level {level}: {clamped} columns exceed their parent stack; density may be underestimated there");
    }

    let total: u64 = counts.iter().map(|c| c.0 as u64).sum();
    let needed = total * TILE_BYTES;
    if needed > memory_budget {
        return Err(Error::MemoryBudgetExceeded {
            budget: memory_budget,
            needed,
            level,
            best: Box::new(table.clone()),
            history: Vec::new(),
        });
    }
    let mut tiles = Vec::with_capacity(total as usize);
    for (j, &(retained, interior)) in counts.iter().enumerate() {
        for row in 0..retained {
            let label = if row < interior { Label::Interior } else { Label::Border };
            tiles.push(Tile::new(j as u32, row, label));
        }
    }
    if tiles.is_empty() {
        return Err(Error::DegenerateDensity(format!("no tiles retained at level {level}")));
    }
    Ok(TilingTable { support: table.support, level, height: table.height, total_integral: table.total_integral, tiles })
}

/// Rate statistics of a table.
pub fn stats(table: &TilingTable) -> RefinementStats {
    table.stats()
}

/// Refines from the initial tile until `stop` is met. Returns the final table
/// and the statistics of every level visited.
///
/// If the memory budget would be exceeded first, the error carries the last
/// table that fit and the history up to it.
pub fn build(model: &DensityModel, stop: StopRule) -> Result<(TilingTable, Vec<RefinementStats>)> {
    stop.validate()?;
    let mut table = initial_tile_with(model, stop.samples_per_column)?;
    let mut history = vec![table.stats()];
    if table.memory_bytes() > stop.memory_budget {
        return Err(Error::MemoryBudgetExceeded {
            budget: stop.memory_budget,
            needed: table.memory_bytes(),
            level: 1,
            best: Box::new(table),
            history,
        });
    }
    while !stop.satisfied(history.last().expect("history is never empty")) {
        match refine_with(&table, model, stop.samples_per_column, stop.memory_budget) {
            Ok(next) => {
                table = next;
                history.push(table.stats());
            }
            Err(Error::MemoryBudgetExceeded { budget, needed, level, best, .. }) => {
                return Err(Error::MemoryBudgetExceeded { budget, needed, level, best, history });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((table, history))
}

/// Refinements of a `width`-wide support until columns are no wider than
/// `feature`: the smallest `k` with `width / 2^k <= feature`.
pub fn refinements_to_resolve(width: f64, feature: f64) -> Result<u32> {
    if !(width > 0.0 && feature > 0.0 && width.is_finite() && feature.is_finite()) {
        return Err(Error::Parameter(format!("width {width} and feature {feature} must be positive")));
    }
    let mut k = 0;
    let mut w = width;
    while w > feature {
        w /= 2.0;
        k += 1;
    }
    Ok(k)
}

/// Density of density evaluations: where in `[a, b]` the Border tiles sit.
///
/// `p_E(x) = K dx |d log f / dx|` with the derivative by central differences
/// at half the column width, `K` chosen so that `p_E` integrates to the
/// table's evaluation rate.
#[derive(Debug)]
pub struct EvalDensityBound<'a> {
    model: &'a DensityModel,
    support: (f64, f64),
    delta_x: f64,
    scale: f64,
}

const BOUND_NORMALIZATION_POINTS: usize = 1 << 14;

impl<'a> EvalDensityBound<'a> {
    pub fn new(table: &TilingTable, model: &'a DensityModel) -> Result<Self> {
        let mut bound = EvalDensityBound { model, support: table.support, delta_x: table.delta_x(), scale: 1.0 };
        let (a, b) = table.support;
        let m = BOUND_NORMALIZATION_POINTS;
        let h = (b - a) / m as f64;
        let mut raw = 0.0;
        for i in 0..m {
            raw += bound.at(a + (i as f64 + 0.5) * h)? * h;
        }
        let e = table.stats().evaluation_rate;
        bound.scale = if raw > 0.0 { e / raw } else { 0.0 };
        Ok(bound)
    }

    pub fn at(&self, x: f64) -> Result<f64> {
        let (a, b) = self.support;
        let fx = self.model.eval(x)?;
        if fx == 0.0 {
            return Ok(0.0);
        }
        let half = 0.5 * self.delta_x;
        let lo = (x - half).max(a);
        let hi = (x + half).min(b);
        if hi <= lo {
            return Ok(0.0);
        }
        let slope = (self.model.eval(hi)? - self.model.eval(lo)?) / (hi - lo);
        Ok(self.scale * self.delta_x * (slope / fx).abs())
    }
}

/// One-shot form of [`EvalDensityBound`].
pub fn eval_density_bound(table: &TilingTable, model: &DensityModel, x: f64) -> Result<f64> {
    EvalDensityBound::new(table, model)?.at(x)
}
