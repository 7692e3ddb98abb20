//! Ball measures, neighbourhoods and doubling diagnostics.

use serde::{Deserialize, Serialize};

use crate::distance::{distance_field, DistanceField};
use crate::error::{Error, Result};
use crate::grid::{Ball, GridSet};
use crate::sampling;

/// Cells of `space` whose centers lie in the open ball.
pub fn ball_members(space: &GridSet, ball: &Ball) -> GridSet {
    space.ball_members(ball)
}

/// Open `r`-neighbourhood `E_r = {x in space : dist(x, E) < r}`.
pub fn neighborhood(space: &GridSet, e: &GridSet, r: f64) -> Result<GridSet> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("neighbourhood radius must be positive, got {r}")));
    }
    let field = distance_field(space, e)?;
    Ok(neighborhood_from_field(space, &field, r))
}

pub(crate) fn neighborhood_from_field(space: &GridSet, field: &DistanceField, r: f64) -> GridSet {
    let rc = r / space.cell();
    let r2 = rc * rc;
    let mut out = GridSet::empty(space.geometry().clone());
    for f in space.iter() {
        if (field.sq(f) as f64) < r2 {
            out.insert(f);
        }
    }
    out
}

/// Number of cells of `space` in the open ball of physical `radius` around a cell center.
pub fn cell_ball_count(space: &GridSet, center: usize, radius: f64) -> u64 {
    let spans = space.geometry().cell_ball_spans(center, radius, false);
    space.count_spans(&spans) as u64
}

/// Histogram of squared target distances over the space cells of one ball.
///
/// Levels are `(squared distance in cell units, cell count)` in increasing
/// order of distance, so the integrand `dist^-alpha` is non-increasing along
/// the list.
#[derive(Clone, Debug, PartialEq)]
pub struct BallProfile {
    pub total: u64,
    pub levels: Vec<(u64, u64)>,
}

impl BallProfile {
    /// Builds the profile of the open ball of physical `radius` around cell `center`.
    pub fn new(space: &GridSet, field: &DistanceField, center: usize, radius: f64) -> Self {
        let spans = space.geometry().cell_ball_spans(center, radius, false);
        let full = space.is_full();
        let mut values = Vec::new();
        for s in &spans {
            for f in s.cells() {
                if full || space.contains(f) {
                    values.push(field.sq(f));
                }
            }
        }
        Self::from_values(values)
    }

    pub fn from_values(mut values: Vec<u64>) -> Self {
        let total = values.len() as u64;
        let max = values.iter().copied().max().unwrap_or(0);
        let mut levels = Vec::new();
        if (max as u128) <= 8 * values.len() as u128 + 64 {
            let mut counts = vec![0u64; max as usize + 1];
            for v in values {
                counts[v as usize] += 1;
            }
            for (sq, &c) in counts.iter().enumerate() {
                if c > 0 {
                    levels.push((sq as u64, c));
                }
            }
        } else {
            values.sort_unstable();
            for v in values {
                match levels.last_mut() {
                    Some((sq, c)) if *sq == v => *c += 1,
                    _ => levels.push((v, 1)),
                }
            }
        }
        Self { total, levels }
    }

    /// Cells at squared distance strictly below `r2` (cell units).
    pub fn count_below(&self, r2: f64) -> u64 {
        self.levels
            .iter()
            .take_while(|(sq, _)| (*sq as f64) < r2)
            .map(|(_, c)| c)
            .sum()
    }
}

/// Estimated doubling constant of the counting measure of a grid space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub c_mu_hat: f64,
    pub s_hat: f64,
    pub sample_count: usize,
    pub worst_center: Vec<f64>,
    pub worst_radius: f64,
}

/// Max of `mu(B(x,2r)) / mu(B(x,r))` over sampled centers and dyadic `r` in `[4h, diam/4]`.
pub fn doubling_report(space: &GridSet, sample_centers: usize, seed: u64) -> Result<DoublingReport> {
    if sample_centers == 0 {
        return Err(Error::InvalidParameter("sample_centers must be >= 1".into()));
    }
    if space.is_empty() {
        return Err(Error::EmptySet);
    }
    let h = space.cell();
    let diam = space.diameter();
    let radii = sampling::dyadic(4.0 * h, diam / 4.0);
    if radii.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "grid too small for doubling radii: diameter {diam} < 16h"
        )));
    }
    let cells = space.cells();
    let centers = sampling::choose(&cells, sample_centers, seed);
    let mut best = (1.0f64, centers[0], radii[0]);
    let mut n = 0;
    for &x in &centers {
        for &r in &radii {
            let small = cell_ball_count(space, x, r);
            let big = cell_ball_count(space, x, 2.0 * r);
            let ratio = big as f64 / small as f64;
            n += 1;
            if ratio > best.0 {
                best = (ratio, x, r);
            }
        }
    }
    let geom = space.geometry();
    Ok(DoublingReport {
        c_mu_hat: best.0,
        s_hat: best.0.log2(),
        sample_count: n,
        worst_center: geom.center(best.1),
        worst_radius: best.2,
    })
}
