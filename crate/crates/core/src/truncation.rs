//! Truncation of a set to a ball, big-piece balls and the inherited Aikawa bound.
//!
//! `F_0 = E ∩ closed B(z, r/2)` and `F_j` adds every cell of `E` within
//! `2^-j-1 r` of `F_{j-1}`. Once a stage adds nothing the radii only shrink,
//! so that stage is a fixed point and the recursion stops.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aikawa::{profile_trimmed, TrimMode, TrimSpec};
use crate::certificate::{CertificateParams, InequalityCertificate};
use crate::distance::{distance_field, transform, DistanceField};
use crate::error::{Error, Result};
use crate::grid::{Geometry, GridSet};
use crate::measure::BallProfile;
use crate::sampling;

#[derive(Clone, Debug)]
pub struct Truncation {
    pub space: GridSet,
    pub e: GridSet,
    pub z: Vec<f64>,
    pub z_cell: usize,
    pub r: f64,
    pub f: GridSet,
    pub stages: Vec<GridSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigPieceBall {
    pub x: Vec<f64>,
    pub m: u32,
    pub r_m: f64,
    pub y: Vec<f64>,
    #[serde(skip)]
    pub y_cell: usize,
}

/// Radius of the `m`-th big-piece scale, `2^-m-1 r`.
pub fn scale_radius(r: f64, m: u32) -> f64 {
    r * 0.5f64.powi(m as i32 + 1)
}

pub fn truncate(space: &GridSet, e: &GridSet, z: &[f64], r: f64) -> Result<Truncation> {
    space.geometry().check_same(e.geometry())?;
    if e.is_empty() {
        return Err(Error::EmptySet);
    }
    if !e.is_subset(space) {
        return Err(Error::Geometry("E is not a subset of the space".into()));
    }
    let geom = space.geometry();
    let h = geom.cell();
    if !(r > 2.0 * h) {
        return Err(Error::InvalidParameter(format!("truncation radius {r} must exceed 2h = {}", 2.0 * h)));
    }
    let z_cell = match geom.locate(z) {
        Some(f) if e.contains(f) => f,
        _ => return Err(Error::InvalidParameter(format!("base point {z:?} is not a cell center of E"))),
    };
    // every stage lies in the closed ball B(z, r), so a box around it suffices
    let (lo, shape) = ball_box(geom, z_cell, r / h);
    let ew = e.window(&lo, &shape)?;
    let wg = ew.geometry().clone();
    let zw = to_window(geom, &wg, &lo, z_cell);
    let zc: Vec<f64> = wg.unflatten(zw).iter().map(|&i| i as f64).collect();

    let mut first = GridSet::empty(wg.clone());
    for span in wg.ball_spans(&zc, r / (2.0 * h), true) {
        for f in span.cells() {
            if ew.contains(f) {
                first.insert(f);
            }
        }
    }
    let mut stages = vec![first];
    for j in 1u32.. {
        let prev = stages.last().unwrap();
        let reach = scale_radius(r, j) / h;
        let reach2 = reach * reach;
        let field = transform(prev);
        let mut next = prev.clone();
        for f in ew.iter() {
            if (field.sq(f) as f64) <= reach2 {
                next.insert(f);
            }
        }
        if next == *prev {
            break;
        }
        stages.push(next);
    }
    let stages: Vec<GridSet> = stages.iter().map(|s| from_window(geom, &lo, s)).collect();
    let f = stages.last().unwrap().clone();
    Ok(Truncation { space: space.clone(), e: e.clone(), z: geom.center(z_cell), z_cell, r, f, stages })
}

fn ball_box(geom: &Geometry, center: usize, radius_cells: f64) -> (Vec<usize>, Vec<usize>) {
    let idx = geom.unflatten(center);
    let reach = radius_cells.ceil() as usize + 1;
    let lo: Vec<usize> = idx.iter().map(|&i| i.saturating_sub(reach)).collect();
    let shape: Vec<usize> = (0..geom.dim()).map(|a| (idx[a] + reach + 1).min(geom.shape()[a]) - lo[a]).collect();
    (lo, shape)
}

fn to_window(geom: &Geometry, wg: &Geometry, lo: &[usize], flat: usize) -> usize {
    let idx: Vec<usize> = geom.unflatten(flat).iter().zip(lo).map(|(i, l)| i - l).collect();
    wg.flat(&idx)
}

fn from_window(geom: &Geometry, lo: &[usize], w: &GridSet) -> GridSet {
    let wg = w.geometry();
    let mut out = GridSet::empty(geom.clone());
    let mut idx = vec![0usize; geom.dim()];
    for f in w.iter() {
        wg.unflatten_into(f, &mut idx);
        for a in 0..idx.len() {
            idx[a] += lo[a];
        }
        out.insert(geom.flat(&idx));
    }
    out
}

impl Truncation {
    /// Writes each stage to `<prefix>.stage<k>`.
    pub fn save_stages(&self, prefix: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let prefix = prefix.as_ref().as_os_str().to_string_lossy().into_owned();
        let mut paths = Vec::new();
        for (k, s) in self.stages.iter().enumerate() {
            let path = std::path::PathBuf::from(format!("{prefix}.stage{k}"));
            s.save(&path)?;
            paths.push(path);
        }
        Ok(paths)
    }

    /// Distance from a point to the nearest cell center of `F`.
    pub fn dist_to_f(&self, x: &[f64]) -> f64 {
        let geom = self.space.geometry();
        self.f
            .iter()
            .map(|c| geom.center(c).iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Distance field of `F` over the whole grid.
    pub fn f_field(&self) -> DistanceField {
        distance_field(&self.space, &self.f).expect("F contains z")
    }

    /// Broken invariants, checked bit-wise; empty when the truncation is sound.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.f.contains(self.z_cell) {
            out.push("z is not in F".into());
        }
        let ball: GridSet = closed_ball_set(&self.e, self.z_cell, self.r);
        if !self.f.is_subset(&ball) {
            out.push("F leaves E ∩ closed B(z, r)".into());
        }
        if closed_ball_set(&self.e, self.z_cell, self.r / 2.0) != self.stages[0] {
            out.push("first stage differs from E ∩ closed B(z, r/2)".into());
        }
        for (j, w) in self.stages.windows(2).enumerate() {
            if !w[0].is_subset(&w[1]) {
                out.push(format!("stage {j} is not inside stage {}", j + 1));
            }
        }
        if self.stages.last() != Some(&self.f) {
            out.push("last stage differs from F".into());
        }
        if self.stages.len() as f64 > (self.r / self.space.cell()).log2() + 2.0 {
            out.push(format!("{} stages exceed log2(r/h) + 2", self.stages.len()));
        }
        out
    }

    /// Whether `dist(x, F) < 2^-m+1 r`, the hypothesis of the big-piece search.
    pub fn admissible(&self, x: &[f64], m: u32) -> bool {
        self.dist_to_f(x) < self.r * 0.5f64.powi(m as i32 - 1)
    }
}

/// Cells of `set` in the closed ball of physical `radius` around cell `center`.
fn closed_members(set: &GridSet, center: usize, radius: f64) -> impl Iterator<Item = usize> + '_ {
    set.geometry().cell_ball_spans(center, radius, true).into_iter().flat_map(|s| s.cells()).filter(|&f| set.contains(f))
}

fn closed_ball_set(set: &GridSet, center: usize, radius: f64) -> GridSet {
    let mut out = GridSet::empty(set.geometry().clone());
    for c in closed_members(set, center, radius) {
        out.insert(c);
    }
    out
}

/// Re-checks a big-piece ball by enumeration: `B(y, r_m) ⊆ B(x, 8 r_m)` and
/// `E ∩ closed B(y, r_m/2) = F ∩ closed B(y, r_m/2)`.
pub fn verify_big_piece(t: &Truncation, b: &BigPieceBall) -> bool {
    let geom = t.space.geometry();
    let Some(x) = geom.locate(&b.x) else { return false };
    let outer = geom.cell_ball_spans(x, 8.0 * b.r_m, false);
    let nested = geom
        .cell_ball_spans(b.y_cell, b.r_m, false)
        .iter()
        .flat_map(|s| s.cells())
        .all(|c| outer.iter().any(|s| s.cells().contains(&c)));
    let in_e = closed_ball_set(&t.e, b.y_cell, b.r_m / 2.0);
    let in_f = closed_ball_set(&t.f, b.y_cell, b.r_m / 2.0);
    nested && t.e.contains(b.y_cell) && in_e == in_f
}

/// A cell `y` of `E` with `B(y, r_m) ⊆ B(x, 8 r_m)` whose closed `r_m/2` ball meets `E` only inside `F`.
///
/// Candidates within `7 r_m` of `x` are tried nearest first, ties by index.
pub fn find_big_piece_ball(t: &Truncation, x: &[f64], m: u32) -> Result<BigPieceBall> {
    if !t.admissible(x, m) {
        return Err(Error::InvalidParameter(format!("dist(x, F) >= 2^(1-m) r for x = {x:?}, m = {m}")));
    }
    let geom = t.space.geometry();
    let h = geom.cell();
    let r_m = scale_radius(t.r, m);
    let xc = geom.to_index_coords(x);
    let reach = 7.0 * r_m / h;
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for span in geom.ball_spans(&xc, reach, true) {
        for y in span.cells() {
            if t.e.contains(y) {
                let d2: f64 = geom.unflatten(y).iter().zip(&xc).map(|(&i, &c)| (i as f64 - c).powi(2)).sum();
                candidates.push((d2, y));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, y) in candidates {
        if closed_members(&t.e, y, r_m / 2.0).all(|c| t.f.contains(c)) {
            return Ok(BigPieceBall { x: x.to_vec(), m, r_m, y: geom.center(y), y_cell: y });
        }
    }
    Err(Error::BigPieceMissing { x: x.to_vec(), m })
}

/// Samples `count` admissible `(x, m)` pairs with `x` a grid cell center and `2^-m-1 r >= h`.
pub fn admissible_pairs(t: &Truncation, count: usize, seed: u64) -> Vec<(Vec<f64>, u32)> {
    let geom = t.space.geometry();
    let h = geom.cell();
    let m_max = ((t.r / h).log2().floor() as i64 - 1).max(0) as u32;
    let field = t.f_field();
    let mut rng = sampling::rng(seed);
    let mut out = Vec::with_capacity(count);
    let mut cache: Vec<Option<Vec<usize>>> = vec![None; m_max as usize + 1];
    while out.len() < count {
        let m = rng.gen_range(0..=m_max);
        let near = cache[m as usize].get_or_insert_with(|| {
            let limit = t.r * 0.5f64.powi(m as i32 - 1) / h;
            let spans = geom.cell_ball_spans(t.z_cell, t.r + limit * h + h, false);
            spans
                .into_iter()
                .flat_map(|s| s.cells())
                .filter(|&f| t.space.contains(f) && (field.sq(f) as f64).sqrt() < limit)
                .collect()
        });
        let x = near[rng.gen_range(0..near.len())];
        out.push((geom.center(x), m));
    }
    out
}

/// `epsilon' = c_mu^-6 epsilon` and `delta = c_mu^-6 delta'`, the set-level
/// pair an `(epsilon, delta)` check on the truncation relies on.
pub fn aikawa_bookkeeping(epsilon: f64, delta_prime: f64, c_mu: f64) -> (f64, f64) {
    let k = c_mu.powi(-6);
    (k * epsilon, k * delta_prime)
}

/// Checks `r_m^-alpha <= epsilon * avg_{B(x, 8 r_m)} 1_K dist(., F)^-alpha`
/// with `K` the worst admissible removal of a `delta` share, over random admissible `(x, m)`.
pub fn check_truncated_aikawa(
    t: &Truncation,
    alpha: f64,
    epsilon: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<InequalityCertificate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if !(alpha > 0.0 && epsilon > 0.0) {
        return Err(Error::InvalidParameter("alpha and epsilon must be positive".into()));
    }
    let trim = TrimSpec::new(delta, TrimMode::RemoveWorst)?;
    let geom = t.space.geometry();
    let h = geom.cell();
    let diam = match t.e.count() {
        1 => t.space.diameter(),
        _ => t.e.diameter(),
    };
    let pairs = admissible_pairs(t, trials, seed);
    let field = t.f_field();
    let results: Vec<Option<(f64, f64, String)>> = pairs
        .par_iter()
        .map(|(x, m)| {
            let r_m = scale_radius(t.r, *m);
            if !(r_m / 4.0 < diam) {
                return None;
            }
            let xf = geom.locate(x).expect("sampled on the grid");
            let profile = BallProfile::new(&t.space, &field, xf, 8.0 * r_m);
            let avg = profile_trimmed(&profile, alpha, trim) * h.powf(-alpha);
            Some((r_m.powf(-alpha), avg, format!("x={x:?}, m={m}, r_m={r_m}")))
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let mut worst: Option<(f64, f64, String)> = None;
    for (lhs, rhs, label) in results.into_iter().flatten() {
        let ratio = epsilon * rhs / lhs;
        if worst.as_ref().map_or(true, |w| ratio < epsilon * w.1 / w.0) {
            worst = Some((lhs, rhs, label));
        }
    }
    let (lhs, rhs, label) = worst.unwrap_or((0.0, 0.0, "all trials skipped".into()));
    let cert = InequalityCertificate::new(
        "truncated-upper-aikawa",
        lhs,
        rhs,
        epsilon,
        format!("{label}, alpha={alpha}, delta={delta}"),
        h,
        CertificateParams::default(),
    );
    Ok(cert.with_trials(trials, skipped))
}
