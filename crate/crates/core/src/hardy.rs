//! Fractional Gagliardo energies, Hardy quotients and the inequalities built on them.
//!
//! All kernels work in cell units. A pair at index offset `v` contributes
//! `|u(x) - u(y)|^p h^n / ((|v| h)^sp N(x, |v|^2))`, where `N` counts the cells
//! of the space strictly closer to `x` than `|v|`. For a full grid and a cell
//! far enough from the border `N` depends on `|v|^2` only and comes from one
//! lattice table; otherwise it is counted around `x` directly.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aikawa::{upper_aikawa_threshold, DepthPair, Level, ThresholdFit, ThresholdParams};
use crate::assouad::{ratio_samples_with, sample_centers, upper_codim, ExponentFit, SampleParams};
use crate::certificate::{CertificateParams, InequalityCertificate};
use crate::distance::{distance_field, transform, DistanceField};
use crate::error::{Error, Result};
use crate::grid::{Ball, Geometry, GridSet};
use crate::sampling;
use crate::truncation::truncate;

/// Largest offset table or lattice enumeration the energy kernel will build.
const MAX_TABLE: usize = 1 << 26;

/// One real value per cell of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    geom: Geometry,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(geom: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::Geometry(format!("{} values for a grid of {} cells", values.len(), geom.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("value at cell {i} is not finite")));
        }
        Ok(Self { geom, values })
    }

    pub fn zeros(geom: Geometry) -> Self {
        let values = vec![0.0; geom.len()];
        Self { geom, values }
    }

    pub fn constant(geom: Geometry, c: f64) -> Result<Self> {
        let n = geom.len();
        Self::new(geom, vec![c; n])
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(geom: Geometry, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..geom.len()).map(|c| f(&geom.center(c))).collect();
        Self::new(geom, values)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.geom.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Largest `|u(x) - u(y)| / h` over axis neighbours.
    pub fn lipschitz(&self) -> f64 {
        let g = &self.geom;
        let mut best = 0.0f64;
        let mut idx = vec![0usize; g.dim()];
        for f in 0..g.len() {
            g.unflatten_into(f, &mut idx);
            for (a, &s) in g.strides().iter().enumerate() {
                if idx[a] + 1 < g.shape()[a] {
                    best = best.max((self.values[f + s] - self.values[f]).abs());
                }
            }
        }
        best / g.cell()
    }

    /// Whether the function is zero on every cell of `set`.
    pub fn vanishes_on(&self, set: &GridSet) -> bool {
        set.iter().all(|c| self.values[c] == 0.0)
    }
}

/// Fractional smoothness `s`, integrability `p` and, for the Hardy theorem, `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub s: f64,
    pub p: f64,
    pub q: Option<f64>,
}

impl EnergyParams {
    pub fn new(s: f64, p: f64, q: Option<f64>) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must be finite and > 1, got {p}")));
        }
        if let Some(q) = q {
            if !(q > 1.0 && q < p) {
                return Err(Error::InvalidParameter(format!("q must satisfy 1 < q < p = {p}, got {q}")));
            }
        }
        Ok(Self { s, p, q })
    }

    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.s, self.p, self.q).map(|_| ())
    }

    fn certificate(&self) -> CertificateParams {
        CertificateParams { s: Some(self.s), p: Some(self.p), q: self.q }
    }

    fn pow(&self, x: f64) -> f64 {
        if self.p == 2.0 {
            x * x
        } else {
            x.powf(self.p)
        }
    }
}

/// A Gagliardo energy and the number of ball cells it was summed over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub value: f64,
    pub cells: usize,
}

impl Energy {
    /// Fewer than two cells: no pairs, the energy is zero by convention.
    pub fn degenerate(&self) -> bool {
        self.cells < 2
    }
}

fn check_ball(geom: &Geometry, ball: &Ball) -> Result<()> {
    if ball.center.len() != geom.dim() {
        return Err(Error::Geometry(format!("ball center has {} coordinates, grid has {}", ball.center.len(), geom.dim())));
    }
    let c = geom.to_index_coords(&ball.center);
    let rad = ball.radius / geom.cell();
    let tol = 1e-9 * (1.0 + rad);
    for (a, &ca) in c.iter().enumerate() {
        if ca - rad < -0.5 - tol || ca + rad > geom.shape()[a] as f64 - 0.5 + tol {
            return Err(Error::OutOfRange(format!(
                "ball of radius {} at {:?} leaves the grid extent",
                ball.radius, ball.center
            )));
        }
    }
    Ok(())
}

// Visits every index in the box [lo, hi] (inclusive), last axis fastest.
fn for_each_in_box(lo: &[usize], hi: &[usize], mut f: impl FnMut(&[usize])) {
    let n = lo.len();
    if (0..n).any(|a| lo[a] > hi[a]) {
        return;
    }
    let mut idx = lo.to_vec();
    loop {
        f(&idx);
        let mut a = n;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            if idx[a] < hi[a] {
                idx[a] += 1;
                break;
            }
            idx[a] = lo[a];
        }
    }
}

/// Precomputed pair weights for repeated energies over one ball.
pub struct EnergyKernel {
    space: GridSet,
    params: EnergyParams,
    cells: Vec<usize>,
    coords: Vec<usize>,
    dim: usize,
    reach: usize,
    // per absolute offset tuple, flattened with side reach + 1
    d2: Vec<u64>,
    weight: Vec<f64>,
    lattice: Vec<f64>,
    interior: Vec<bool>,
}

impl EnergyKernel {
    pub fn new(space: &GridSet, ball: &Ball, params: &EnergyParams) -> Result<Self> {
        params.validate()?;
        let geom = space.geometry();
        check_ball(geom, ball)?;
        let n = geom.dim();
        let h = geom.cell();
        let cells = space.ball_members(ball).cells();
        let mut coords = Vec::with_capacity(cells.len() * n);
        let mut lo = vec![usize::MAX; n];
        let mut hi = vec![0usize; n];
        for &c in &cells {
            let idx = geom.unflatten(c);
            for a in 0..n {
                lo[a] = lo[a].min(idx[a]);
                hi[a] = hi[a].max(idx[a]);
            }
            coords.extend(idx);
        }
        let d2_max: u64 = if cells.is_empty() {
            0
        } else {
            (0..n).map(|a| ((hi[a] - lo[a]) as u64).pow(2)).sum()
        };
        let reach = (d2_max as f64).sqrt().floor() as usize;
        let side = reach + 1;
        let table = side.checked_pow(n as u32).filter(|&t| t <= MAX_TABLE).ok_or_else(|| {
            Error::InvalidParameter(format!("ball too large for the energy kernel ({} cells)", cells.len()))
        })?;
        let mut d2 = vec![0u64; table];
        for_each_in_box(&vec![0; n], &vec![reach; n], |v| {
            let t = v.iter().fold(0, |t, &x| t * side + x);
            d2[t] = v.iter().map(|&x| (x as u64).pow(2)).sum();
        });
        let volume = geom.cell_volume();
        let sp = params.sp();
        let weight: Vec<f64> =
            d2.iter().map(|&k| if k == 0 { 0.0 } else { volume / ((k as f64).sqrt() * h).powf(sp) }).collect();

        let interior: Vec<bool> = (0..cells.len())
            .map(|i| {
                space.is_full() && (0..n).all(|a| coords[i * n + a] >= reach && coords[i * n + a] + reach < geom.shape()[a])
            })
            .collect();
        let mut lattice = vec![f64::NAN; table];
        if interior.iter().any(|&b| b) {
            let span = (2 * reach + 1).checked_pow(n as u32).filter(|&t| t <= MAX_TABLE);
            if span.is_none() {
                return Err(Error::InvalidParameter("ball too large for the lattice table".into()));
            }
            let mut all = Vec::with_capacity(span.unwrap());
            for_each_in_box(&vec![0; n], &vec![2 * reach; n], |v| {
                all.push(v.iter().map(|&x| (x.abs_diff(reach) as u64).pow(2)).sum::<u64>());
            });
            all.sort_unstable();
            for t in 0..table {
                if d2[t] > 0 && d2[t] <= d2_max {
                    let count = all.partition_point(|&s| s < d2[t]);
                    lattice[t] = weight[t] / count as f64;
                }
            }
        }
        Ok(Self { space: space.clone(), params: *params, cells, coords, dim: n, reach, d2, weight, lattice, interior })
    }

    /// Ball cells, ascending.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        let n = self.dim;
        let side = self.reach + 1;
        (0..n).fold(0, |t, a| t * side + self.coords[i * n + a].abs_diff(self.coords[j * n + a]))
    }

    // sorted squared distances from cell i to every space cell within the reach box
    fn local_counts(&self, i: usize) -> Vec<u64> {
        let n = self.dim;
        let geom = self.space.geometry();
        let x = &self.coords[i * n..(i + 1) * n];
        let lo: Vec<usize> = x.iter().map(|&c| c.saturating_sub(self.reach)).collect();
        let hi: Vec<usize> = (0..n).map(|a| (x[a] + self.reach).min(geom.shape()[a] - 1)).collect();
        let mut out = Vec::new();
        for_each_in_box(&lo, &hi, |idx| {
            if self.space.contains(geom.flat(idx)) {
                out.push(idx.iter().zip(x).map(|(&a, &b)| (a.abs_diff(b) as u64).pow(2)).sum());
            }
        });
        out.sort_unstable();
        out
    }

    pub fn energy(&self, u: &GridFunction) -> Result<Energy> {
        self.space.geometry().check_same(u.geometry())?;
        let vals = u.values();
        let m = self.cells.len();
        let parts: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| {
                let ux = vals[self.cells[i]];
                let local = if self.interior[i] { None } else { Some(self.local_counts(i)) };
                let mut acc = 0.0;
                for j in 0..m {
                    if j == i {
                        continue;
                    }
                    let dv = (ux - vals[self.cells[j]]).abs();
                    if dv == 0.0 {
                        continue;
                    }
                    let t = self.offset(i, j);
                    let k = match &local {
                        None => self.lattice[t],
                        Some(l) => self.weight[t] / l.partition_point(|&s| s < self.d2[t]) as f64,
                    };
                    acc += self.params.pow(dv) * k;
                }
                acc
            })
            .collect();
        Ok(Energy { value: parts.iter().sum(), cells: m })
    }
}

/// Double sum of the fractional kernel over ordered pairs of distinct ball cells.
pub fn gagliardo_energy(space: &GridSet, u: &GridFunction, ball: &Ball, params: &EnergyParams) -> Result<Energy> {
    EnergyKernel::new(space, ball, params)?.energy(u)
}

/// `sum |u|^p dist(x, F)^-sp h^n` over ball cells outside `F`.
pub fn hardy_lhs(space: &GridSet, u: &GridFunction, f: &GridSet, ball: &Ball, params: &EnergyParams) -> Result<f64> {
    let field = distance_field(space, f)?;
    hardy_lhs_with_field(space, u, f, &field, ball, params)
}

fn hardy_lhs_with_field(
    space: &GridSet,
    u: &GridFunction,
    f: &GridSet,
    field: &DistanceField,
    ball: &Ball,
    params: &EnergyParams,
) -> Result<f64> {
    params.validate()?;
    let geom = space.geometry();
    geom.check_same(u.geometry())?;
    check_ball(geom, ball)?;
    if !u.vanishes_on(f) {
        return Err(Error::NonVanishing);
    }
    let h = geom.cell();
    let sp = params.sp();
    let volume = geom.cell_volume();
    Ok(space
        .ball_members(ball)
        .iter()
        .filter(|&c| field.sq(c) > 0)
        .map(|c| params.pow(u.value(c).abs()) * volume / ((field.sq(c) as f64).sqrt() * h).powf(sp))
        .sum())
}

/// The level-band functions `u_k` of a grid function.
///
/// Bands `k` with `2^k < max|u|` and `2^(k+1) > min{|u| : u != 0}` are kept
/// explicitly. Every lower band is the indicator of `{u != 0}`; those are
/// summed in closed form by the Maz'ya check.
#[derive(Clone, Debug)]
pub struct MazyaLevels {
    abs: GridFunction,
    /// Explicit bands, ascending.
    pub bands: Vec<i32>,
    /// Largest `k` whose band is the indicator of `{u != 0}`; `None` when `u = 0`.
    pub indicator_top: Option<i32>,
}

fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

impl MazyaLevels {
    /// `u_k` for any `k`, from the case formula.
    pub fn level(&self, k: i32) -> GridFunction {
        let lo = pow2(k);
        let hi = pow2(k + 1);
        self.abs
            .map(|a| {
                if a >= hi {
                    1.0
                } else if a > lo {
                    a / lo - 1.0
                } else {
                    0.0
                }
            })
            .expect("finite input")
    }

    pub fn is_empty(&self) -> bool {
        self.indicator_top.is_none()
    }
}

pub fn mazya_levels(u: &GridFunction) -> MazyaLevels {
    let abs = u.map(f64::abs).expect("finite input");
    let nonzero = abs.values().iter().copied().filter(|&a| a > 0.0);
    let (min, max) = nonzero.fold((f64::INFINITY, 0.0f64), |(lo, hi), a| (lo.min(a), hi.max(a)));
    if max == 0.0 {
        return MazyaLevels { abs, bands: Vec::new(), indicator_top: None };
    }
    // largest k with 2^(k+1) <= min
    let mut k_lo = min.log2().floor() as i32 - 1;
    while pow2(k_lo + 2) <= min {
        k_lo += 1;
    }
    while pow2(k_lo + 1) > min {
        k_lo -= 1;
    }
    // largest k with 2^k < max
    let mut k_hi = max.log2().ceil() as i32 - 1;
    while pow2(k_hi + 1) < max {
        k_hi += 1;
    }
    while pow2(k_hi) >= max {
        k_hi -= 1;
    }
    MazyaLevels { abs, bands: (k_lo + 1..=k_hi).collect(), indicator_top: Some(k_lo) }
}

/// Multiplier in the truncation inequality, `2^(p+2) / (1 - 2^-p)`.
pub fn mazya_constant(p: f64) -> f64 {
    2f64.powf(p + 2.0) / (1.0 - 2f64.powf(-p))
}

/// Weighted level-band energy and the energy of `u` on one kernel.
fn mazya_sides(kernel: &EnergyKernel, u: &GridFunction) -> Result<(f64, f64)> {
    let p = kernel.params.p;
    let levels = mazya_levels(u);
    let mut lhs = 0.0;
    if let Some(top) = levels.indicator_top {
        let indicator = kernel.energy(&levels.level(top))?.value;
        lhs += indicator * 2f64.powf(top as f64 * p) / (1.0 - 2f64.powf(-p));
    }
    for &k in &levels.bands {
        lhs += 2f64.powf(k as f64 * p) * kernel.energy(&levels.level(k))?.value;
    }
    Ok((lhs, kernel.energy(u)?.value))
}

pub fn mazya_check(space: &GridSet, u: &GridFunction, ball: &Ball, params: &EnergyParams) -> Result<InequalityCertificate> {
    let kernel = EnergyKernel::new(space, ball, params)?;
    let (lhs, rhs) = mazya_sides(&kernel, u)?;
    let levels = mazya_levels(u);
    let worst = format!("bands={:?} indicator_top={:?} lipschitz={:?}", levels.bands, levels.indicator_top, u.lipschitz());
    Ok(InequalityCertificate::new("mazya-truncation", lhs, rhs, mazya_constant(params.p), worst, space.cell(), params.certificate()))
}

/// A random sum of tents with amplitudes spread over several powers of two.
pub fn random_lipschitz(geom: &Geometry, seed: u64) -> GridFunction {
    let mut rng = sampling::rng(seed);
    let n = geom.dim();
    let h = geom.cell();
    let extent: Vec<f64> = geom.shape().iter().map(|&s| s as f64 * h).collect();
    let span = extent.iter().copied().fold(f64::INFINITY, f64::min);
    let terms = rng.gen_range(1..=4);
    let tents: Vec<(Vec<f64>, f64, f64)> = (0..terms)
        .map(|_| {
            let c: Vec<f64> = (0..n).map(|a| geom.origin()[a] + rng.gen::<f64>() * extent[a]).collect();
            let width = rng.gen_range(2.0 * h..=(span / 2.0).max(2.0 * h));
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let amp = sign * 2f64.powf(rng.gen_range(-6.0..6.0));
            (c, width, amp)
        })
        .collect();
    GridFunction::from_fn(geom.clone(), |x| {
        tents
            .iter()
            .map(|(c, w, a)| {
                let d = x.iter().zip(c).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                a * (1.0 - d / w).max(0.0)
            })
            .sum()
    })
    .expect("finite tents")
}

/// Maz'ya sides `(lhs, rhs_raw)` for each of `trials` random Lipschitz functions.
pub fn mazya_trial_sides(space: &GridSet, ball: &Ball, params: &EnergyParams, trials: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let kernel = EnergyKernel::new(space, ball, params)?;
    (0..trials)
        .map(|t| mazya_sides(&kernel, &random_lipschitz(space.geometry(), sampling::derive_seed(seed, t as u64))))
        .collect()
}

/// Maz'ya check over `trials` random Lipschitz functions; reports the worst ratio.
pub fn mazya_trials(space: &GridSet, ball: &Ball, params: &EnergyParams, trials: usize, seed: u64) -> Result<InequalityCertificate> {
    let sides = mazya_trial_sides(space, ball, params, trials, seed)?;
    Ok(mazya_summary(&sides, space.cell(), params))
}

/// Worst-ratio certificate over precomputed Maz'ya sides.
pub fn mazya_summary(sides: &[(f64, f64)], resolution: f64, params: &EnergyParams) -> InequalityCertificate {
    let mut worst: Option<(f64, f64, f64, usize)> = None;
    let mut skipped = 0;
    for (t, &(lhs, rhs)) in sides.iter().enumerate() {
        if rhs == 0.0 && lhs == 0.0 {
            skipped += 1;
            continue;
        }
        let ratio = lhs / rhs;
        if worst.map_or(true, |w| !(ratio <= w.0)) {
            worst = Some((ratio, lhs, rhs, t));
        }
    }
    let (lhs, rhs, label) = match worst {
        Some((_, l, r, t)) => (l, r, format!("trial {t}")),
        None => (0.0, 0.0, "no trial with nonzero energy".into()),
    };
    InequalityCertificate::new("mazya-truncation", lhs, rhs, mazya_constant(params.p), label, resolution, params.certificate())
        .with_trials(sides.len(), skipped)
}

/// `min{1, slope * dist(x, F ∪ points)}` scaled by `amplitude`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hat {
    pub amplitude: f64,
    pub slope: f64,
    pub points: Vec<Vec<f64>>,
}

/// Test functions vanishing on a truncation, described in physical terms so
/// the same function can be rebuilt at every resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    /// `min{1, 4 dist(x, E) / r}`.
    Canonical,
    Hats(Vec<Hat>),
}

impl TestFunction {
    pub fn evaluate(&self, space: &GridSet, e: &GridSet, f: &GridSet, r: f64) -> Result<GridFunction> {
        let geom = space.geometry();
        match self {
            TestFunction::Canonical => {
                let field = distance_field(space, e)?;
                let values = (0..geom.len()).map(|c| (4.0 * field.value(c) / r).min(1.0)).collect();
                GridFunction::new(geom.clone(), values)
            }
            TestFunction::Hats(hats) => {
                let mut values = vec![0.0; geom.len()];
                for hat in hats {
                    let mut target = f.clone();
                    for p in &hat.points {
                        if let Some(c) = geom.locate(p) {
                            target.insert(c);
                        }
                    }
                    let field = transform(&target);
                    for (c, v) in values.iter_mut().enumerate() {
                        *v += hat.amplitude * (hat.slope * field.value(c)).min(1.0);
                    }
                }
                GridFunction::new(geom.clone(), values)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TestFunction::Canonical => "canonical min{1, 4 dist(x,E)/r}".into(),
            TestFunction::Hats(h) => {
                let pts: usize = h.iter().map(|x| x.points.len()).sum();
                format!("{} hats, {} extra zeros", h.len(), pts)
            }
        }
    }
}

/// The canonical function followed by `trials` random hat sums with zeros in `ball`.
pub fn test_battery(ball: &Ball, r: f64, trials: usize, seed: u64) -> Vec<TestFunction> {
    let mut out = vec![TestFunction::Canonical];
    for t in 0..trials {
        let mut rng = sampling::rng(sampling::derive_seed(seed, t as u64));
        let hats = (0..rng.gen_range(1..=3))
            .map(|_| {
                let points = (0..rng.gen_range(0..=3)).map(|_| point_in_ball(&mut rng, ball)).collect();
                Hat { amplitude: rng.gen_range(0.25..=1.0), slope: 2f64.powf(rng.gen_range(0.0..4.0)) / r, points }
            })
            .collect();
        out.push(TestFunction::Hats(hats));
    }
    out
}

fn point_in_ball(rng: &mut impl Rng, ball: &Ball) -> Vec<f64> {
    loop {
        let v: Vec<f64> = ball.center.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() < 1.0 {
            return v.iter().zip(&ball.center).map(|(x, c)| c + x * ball.radius).collect();
        }
    }
}

/// Smallest `(C1, C2)` found by the holefilling sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolefillReport {
    pub certificate: InequalityCertificate,
    pub c1: f64,
    pub c2: f64,
    pub cap: f64,
    /// `(C2, smallest C1)` per swept `C2`.
    pub sweep: Vec<(f64, f64)>,
}

/// Holefilling over a set of functions vanishing on the truncation of `E` to `B(z, r)`.
///
/// With `A = energy over B(z, σκr)`, `B = hardy_lhs over B(z, κr)` and
/// `L = hardy_lhs over B(z, σκr)`, `C2` runs over powers of two up to `cap`
/// and `C1` is the least value with `L <= C1 A + C2 B` for every function.
/// The first `C2` with `C1 <= cap` is reported.
#[allow(clippy::too_many_arguments)]
pub fn holefill_check(
    space: &GridSet,
    e: &GridSet,
    us: &[GridFunction],
    z: &[f64],
    r: f64,
    sigma: f64,
    kappa: f64,
    params: &EnergyParams,
    cap: f64,
) -> Result<HolefillReport> {
    if !(sigma >= 1.0) || !(kappa >= 2.0) {
        return Err(Error::InvalidParameter(format!("holefilling needs sigma >= 1 and kappa >= 2, got {sigma}, {kappa}")));
    }
    if !(cap >= 1.0) {
        return Err(Error::InvalidParameter(format!("constant cap must be >= 1, got {cap}")));
    }
    if us.is_empty() {
        return Err(Error::NoTestFunction("holefilling needs at least one function".into()));
    }
    let t = truncate(space, e, z, r)?;
    let field = t.f_field();
    let outer = Ball::new(t.z.clone(), sigma * kappa * r)?;
    let inner = Ball::new(t.z.clone(), kappa * r)?;
    let kernel = EnergyKernel::new(space, &outer, params)?;
    let mut sides = Vec::with_capacity(us.len());
    for u in us {
        let l = hardy_lhs_with_field(space, u, &t.f, &field, &outer, params)?;
        let b = hardy_lhs_with_field(space, u, &t.f, &field, &inner, params)?;
        let a = kernel.energy(u)?.value;
        sides.push((l, a, b));
    }
    let need = |c2: f64| {
        sides
            .iter()
            .map(|&(l, a, b)| {
                let rest = l - c2 * b;
                if rest <= 0.0 {
                    0.0
                } else if a > 0.0 {
                    rest / a * (1.0 + 4.0 * f64::EPSILON)
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    };
    let mut sweep = Vec::new();
    let mut c2 = 1.0;
    while c2 <= cap {
        sweep.push((c2, need(c2)));
        c2 *= 2.0;
    }
    let found = sweep.iter().copied().find(|&(_, c1)| c1 <= cap);
    let (c2, c1) = found.unwrap_or((cap, f64::INFINITY));
    // worst function: smallest slack against the chosen pair
    let (wi, &(l, a, b)) = sides
        .iter()
        .enumerate()
        .max_by(|x, y| slack_ratio(x.1, c1, c2).total_cmp(&slack_ratio(y.1, c1, c2)))
        .expect("nonempty");
    let rhs = if c1.is_finite() { c1 * a + c2 * b } else { c2 * b };
    let mut certificate = InequalityCertificate::new(
        "holefilling",
        l,
        rhs,
        1.0,
        format!("function {wi}, C1={c1:?}, C2={c2:?}"),
        space.cell(),
        params.certificate(),
    );
    certificate.pass = found.is_some() && certificate.pass;
    Ok(HolefillReport { certificate, c1, c2, cap, sweep })
}

fn slack_ratio(&(l, a, b): &(f64, f64, f64), c1: f64, c2: f64) -> f64 {
    let rhs = if c1.is_finite() { c1 * a + c2 * b } else { c2 * b };
    if l == 0.0 {
        0.0
    } else if rhs > 0.0 {
        l / rhs
    } else {
        f64::INFINITY
    }
}

/// Largest Hardy quotient over a battery at one resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    pub quotient: f64,
    pub lhs: f64,
    pub energy: f64,
    pub worst: String,
    pub resolution: f64,
    pub trials: usize,
    /// Functions with zero energy on the ball (the quotient is undefined).
    pub skipped: usize,
    pub quotients: Vec<Option<f64>>,
}

/// Hardy quotients `hardy_lhs / energy` over `B(z, 8r)` for each test function.
pub fn hardy_quotients(
    space: &GridSet,
    e: &GridSet,
    z: &[f64],
    r: f64,
    params: &EnergyParams,
    battery: &[TestFunction],
) -> Result<HardyReport> {
    let t = truncate(space, e, z, r)?;
    let ball = Ball::new(t.z.clone(), 8.0 * r)?;
    let members = space.ball_members(&ball);
    if members.is_subset(&t.f) {
        return Err(Error::NoTestFunction("F covers the whole ball".into()));
    }
    let field = t.f_field();
    let kernel = EnergyKernel::new(space, &ball, params)?;
    let mut quotients = Vec::with_capacity(battery.len());
    let mut best: Option<(f64, f64, f64, usize)> = None;
    for (i, tf) in battery.iter().enumerate() {
        let u = tf.evaluate(space, e, &t.f, r)?;
        let energy = kernel.energy(&u)?.value;
        if !(energy > 0.0) {
            quotients.push(None);
            continue;
        }
        let lhs = hardy_lhs_with_field(space, &u, &t.f, &field, &ball, params)?;
        let q = lhs / energy;
        quotients.push(Some(q));
        if best.map_or(true, |b| !(q <= b.0)) {
            best = Some((q, lhs, energy, i));
        }
    }
    let skipped = quotients.iter().filter(|q| q.is_none()).count();
    let (quotient, lhs, energy, i) =
        best.ok_or_else(|| Error::NoTestFunction("every test function has zero energy on the ball".into()))?;
    Ok(HardyReport {
        quotient,
        lhs,
        energy,
        worst: format!("function {i}: {}", battery[i].describe()),
        resolution: space.cell(),
        trials: battery.len(),
        skipped,
        quotients,
    })
}

/// Hardy constants at two resolutions and their drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyStability {
    pub coarse: HardyReport,
    pub fine: HardyReport,
    /// `max / min` of the two constants.
    pub drift: f64,
    /// `lhs = larger constant`, `rhs_raw = smaller constant`, `constant = 2`.
    pub certificate: InequalityCertificate,
}

/// Empirical local Hardy constant over the battery, checked for drift across a depth pair.
///
/// The inequality is only guaranteed when `E` satisfies the upper Aikawa
/// condition with exponent `s q`; outside that regime the constant is still
/// reported but carries no guarantee.
pub fn hardy_check(
    pair: &DepthPair,
    z: &[f64],
    r: f64,
    params: &EnergyParams,
    trials: usize,
    seed: u64,
) -> Result<HardyStability> {
    params.validate()?;
    if params.q.is_none() {
        return Err(Error::InvalidParameter("the Hardy check needs q with 1 < q < p".into()));
    }
    check_hardy_radius(&pair.coarse, r)?;
    let zc = nearest_member(&pair.coarse.set, z)?;
    let x = pair.coarse.space.geometry().center(zc);
    let zf = pair.fine.space.geometry().center(nearest_member(&pair.fine.set, &x)?);
    let battery = test_battery(&Ball::new(x.clone(), 8.0 * r)?, r, trials, seed);
    // the two resolutions are independent, both run with the inner kernels in parallel
    let coarse = hardy_quotients(&pair.coarse.space, &pair.coarse.set, &x, r, params, &battery)?;
    let fine = hardy_quotients(&pair.fine.space, &pair.fine.set, &zf, r, params, &battery)?;
    let (hi, lo) = if fine.quotient >= coarse.quotient {
        (fine.quotient, coarse.quotient)
    } else {
        (coarse.quotient, fine.quotient)
    };
    let certificate = InequalityCertificate::new(
        "local-hardy",
        hi,
        lo,
        2.0,
        format!("coarse {}; fine {}", coarse.worst, fine.worst),
        pair.fine.cell(),
        params.certificate(),
    )
    .with_trials(battery.len(), coarse.skipped.max(fine.skipped));
    Ok(HardyStability { drift: hi / lo, coarse, fine, certificate })
}

fn check_hardy_radius(level: &Level, r: f64) -> Result<()> {
    let diam_e = level.set.diameter();
    let bound = if diam_e > 0.0 { diam_e } else { level.space.diameter() };
    if !(r > 0.0 && r < bound) {
        return Err(Error::OutOfRange(format!("r = {r} outside (0, {bound})")));
    }
    Ok(())
}

/// Cell of `set` nearest to a point, ties to the lowest index.
pub fn nearest_member(set: &GridSet, x: &[f64]) -> Result<usize> {
    let geom = set.geometry();
    if let Some(c) = geom.locate(x) {
        if set.contains(c) {
            return Ok(c);
        }
    }
    let c = geom.to_index_coords(x);
    let mut best: Option<(f64, usize)> = None;
    for f in set.iter() {
        let d: f64 = geom.unflatten(f).iter().zip(&c).map(|(&i, &ci)| (i as f64 - ci).powi(2)).sum();
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, f));
        }
    }
    best.map(|b| b.1).ok_or(Error::EmptySet)
}

/// Controls for the combined report.
#[derive(Clone, Debug, PartialEq)]
pub struct MainParams {
    pub sample: SampleParams,
    pub sweep: Vec<EnergyParams>,
    pub hardy_trials: usize,
    /// Hardy ball radius `r`; defaults to four coarse cells.
    pub hardy_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardySweepEntry {
    pub params: EnergyParams,
    pub sq: f64,
    /// Whether `s q` exceeds the estimated threshold, the theorem's hypothesis.
    pub hypothesis: Option<bool>,
    pub result: Option<HardyStability>,
    pub error: Option<String>,
}

/// Threshold and codimension side by side, with the Hardy battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainReport {
    pub alpha_hat: Option<f64>,
    pub q_hat: Option<f64>,
    pub abs_diff: Option<f64>,
    pub codim: Option<ExponentFit>,
    pub threshold: Option<ThresholdFit>,
    pub hardy: Vec<HardySweepEntry>,
    pub errors: Vec<String>,
}

impl MainReport {
    /// Every stage ran and every Hardy run is stable.
    pub fn pass(&self) -> bool {
        self.errors.is_empty()
            && self.abs_diff.is_some()
            && self.hardy.iter().all(|h| h.result.as_ref().is_some_and(|r| r.certificate.pass))
    }
}

pub fn main_theorem_report(pair: &DepthPair, params: &MainParams) -> MainReport {
    let mut errors = Vec::new();
    let fine = &pair.fine;
    let codim = ratio_samples_with(&fine.space, &fine.set, &params.sample)
        .and_then(|s| upper_codim(&s))
        .map_err(|e| errors.push(format!("upper codimension: {e}")))
        .ok();
    let tp = ThresholdParams::upper(fine.space.dim(), params.sample.clone());
    let threshold = upper_aikawa_threshold(pair, &tp).map_err(|e| errors.push(format!("upper threshold: {e}"))).ok();
    let alpha_hat = threshold.as_ref().map(|t| t.slope);
    let q_hat = codim.as_ref().map(|c| c.slope);
    let abs_diff = alpha_hat.zip(q_hat).map(|(a, q)| (a - q).abs());

    let mut hardy = Vec::new();
    if !params.sweep.is_empty() {
        let r = params.hardy_radius.unwrap_or(4.0 * pair.coarse.cell());
        let z = sample_centers(&pair.coarse.set, &SampleParams { centers: 1, ..params.sample.clone() })
            .map(|c| pair.coarse.space.geometry().center(c[0]));
        for (i, ep) in params.sweep.iter().enumerate() {
            let sq = ep.s * ep.q.unwrap_or(f64::NAN);
            let outcome = z.as_ref().map_err(|e| e.to_string()).and_then(|z| {
                hardy_check(pair, z, r, ep, params.hardy_trials, sampling::derive_seed(params.sample.seed, i as u64))
                    .map_err(|e| e.to_string())
            });
            let (result, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => {
                    errors.push(format!("hardy {i}: {e}"));
                    (None, Some(e))
                }
            };
            hardy.push(HardySweepEntry { params: *ep, sq, hypothesis: alpha_hat.map(|a| sq > a), result, error });
        }
    }
    MainReport { alpha_hat, q_hat, abs_diff, codim, threshold, hardy, errors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aikawa::Level;
    use crate::fractal::{generate, FractalSpec};
    use proptest::prelude::*;

    fn line(n: usize) -> GridSet {
        GridSet::full(Geometry::unit(vec![n]).unwrap())
    }

    fn whole_line_ball(n: usize) -> Ball {
        Ball::new(vec![n as f64 / 2.0], n as f64 / 2.0).unwrap()
    }

    fn params(s: f64, p: f64) -> EnergyParams {
        EnergyParams::new(s, p, None).unwrap()
    }

    // independent double loop over index coordinates with explicit ball counts
    fn brute_energy(space: &GridSet, u: &GridFunction, ball: &Ball, ep: &EnergyParams) -> f64 {
        let g = space.geometry();
        let h = g.cell();
        let n = g.dim();
        let inside: Vec<usize> = space
            .iter()
            .filter(|&c| g.center(c).iter().zip(&ball.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < ball.radius)
            .collect();
        let all = space.cells();
        let mut total = 0.0;
        for &x in &inside {
            for &y in &inside {
                if x == y {
                    continue;
                }
                let d2 = g.index_dist2(x, y);
                let count = all.iter().filter(|&&c| g.index_dist2(x, c) < d2).count() as f64;
                let d = (d2 as f64).sqrt() * h;
                let mu = count * h.powi(n as i32);
                total += (u.value(x) - u.value(y)).abs().powf(ep.p) * h.powi(2 * n as i32) / (d.powf(ep.sp()) * mu);
            }
        }
        total
    }

    fn brute_hardy(space: &GridSet, u: &GridFunction, f: &GridSet, ball: &Ball, ep: &EnergyParams) -> f64 {
        let g = space.geometry();
        let n = g.dim();
        let mut total = 0.0;
        for x in space.iter() {
            let cx = g.center(x);
            if f.contains(x) || cx.iter().zip(&ball.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= ball.radius {
                continue;
            }
            let d2 = f.iter().map(|y| g.index_dist2(x, y)).min().unwrap();
            let d = (d2 as f64).sqrt() * g.cell();
            total += u.value(x).abs().powf(ep.p) / d.powf(ep.sp()) * g.cell().powi(n as i32);
        }
        total
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) + 1e-300
    }

    #[test]
    fn constant_has_zero_energy() {
        let s = line(16);
        let u = GridFunction::constant(s.geometry().clone(), 3.5).unwrap();
        let e = gagliardo_energy(&s, &u, &whole_line_ball(16), &params(0.5, 2.0)).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(!e.degenerate());
    }

    #[test]
    fn two_cells_by_hand() {
        let s = line(2);
        let u = GridFunction::new(s.geometry().clone(), vec![0.0, 1.0]).unwrap();
        let e = gagliardo_energy(&s, &u, &whole_line_ball(2), &params(0.5, 2.0)).unwrap();
        assert_eq!(e.value, 2.0);
    }

    #[test]
    fn single_cell_ball_is_degenerate() {
        let s = line(8);
        let u = random_lipschitz(s.geometry(), 3);
        let e = gagliardo_energy(&s, &u, &Ball::new(vec![4.5], 0.6).unwrap(), &params(0.5, 2.0)).unwrap();
        assert!(e.degenerate());
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn parameter_and_ball_errors() {
        assert!(EnergyParams::new(1.0, 2.0, None).is_err());
        assert!(EnergyParams::new(0.5, 1.0, None).is_err());
        assert!(EnergyParams::new(0.5, 2.0, Some(2.5)).is_err());
        assert!(EnergyParams::new(0.5, 2.0, Some(1.5)).is_ok());
        let s = line(8);
        let u = GridFunction::zeros(s.geometry().clone());
        assert!(gagliardo_energy(&s, &u, &Ball::new(vec![4.0], 5.0).unwrap(), &params(0.5, 2.0)).is_err());
    }

    #[test]
    fn one_term_hardy_sum() {
        let s = line(8);
        let f = GridSet::from_cells(s.geometry().clone(), [2]).unwrap();
        let mut vals = vec![0.0; 8];
        vals[5] = 1.0;
        let u = GridFunction::new(s.geometry().clone(), vals).unwrap();
        let ball = Ball::new(vec![5.5], 0.9).unwrap();
        let v = hardy_lhs(&s, &u, &f, &ball, &params(0.5, 2.0)).unwrap();
        assert_eq!(v, 1.0 / 3.0);
        assert_eq!(hardy_lhs(&s, &GridFunction::zeros(s.geometry().clone()), &f, &ball, &params(0.5, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn hardy_needs_vanishing() {
        let s = line(8);
        let f = GridSet::from_cells(s.geometry().clone(), [2]).unwrap();
        let u = GridFunction::constant(s.geometry().clone(), 1.0).unwrap();
        let err = hardy_lhs(&s, &u, &f, &whole_line_ball(8), &params(0.5, 2.0)).unwrap_err();
        assert_eq!(err.to_string(), "test function must vanish on F");
    }

    #[test]
    fn levels_of_a_constant() {
        let g = Geometry::unit(vec![4]).unwrap();
        let lv = mazya_levels(&GridFunction::constant(g.clone(), 3.0).unwrap());
        assert!(lv.level(1).values().iter().all(|&v| v == 0.5));
        assert!(lv.level(0).values().iter().all(|&v| v == 1.0));
        assert!(lv.level(2).values().iter().all(|&v| v == 0.0));
        assert_eq!(lv.bands, vec![1]);
        assert_eq!(lv.indicator_top, Some(0));
        let empty = mazya_levels(&GridFunction::zeros(g));
        assert!(empty.is_empty() && empty.bands.is_empty());
    }

    #[test]
    fn mazya_constant_at_two() {
        assert_eq!(mazya_constant(2.0), 64.0 / 3.0);
    }

    #[test]
    fn mazya_constant_function_passes() {
        let s = line(16);
        let u = GridFunction::constant(s.geometry().clone(), -2.0).unwrap();
        let c = mazya_check(&s, &u, &whole_line_ball(16), &params(0.5, 2.0)).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.pass);
    }

    #[test]
    fn mazya_random_line() {
        let s = line(64);
        for p in [1.5, 2.0, 3.0] {
            let c = mazya_trials(&s, &whole_line_ball(64), &params(0.5, p), 30, 11).unwrap();
            assert!(c.pass, "p = {p}: {c:?}");
            assert_eq!(c.constant, mazya_constant(p));
        }
    }

    #[test]
    fn brute_force_energy_and_hardy() {
        // mixes interior lattice cells, border cells and a space with holes
        let g = Geometry::new(vec![12, 10], 0.25, vec![-1.0, 0.5]).unwrap();
        let full = GridSet::full(g.clone());
        let mut holes = full.clone();
        for c in [3, 17, 40, 41, 66, 90] {
            holes.remove(c);
        }
        let f = GridSet::from_cells(g.clone(), [45, 46, 57]).unwrap();
        let ep = params(0.3, 2.5);
        for (k, space) in [full, holes].iter().enumerate() {
            for seed in 0..3 {
                let raw = random_lipschitz(&g, seed);
                let u = GridFunction::new(g.clone(), (0..g.len()).map(|c| if f.contains(c) { 0.0 } else { raw.value(c) }).collect())
                    .unwrap();
                for ball in [Ball::new(vec![0.5, 1.75], 1.2).unwrap(), Ball::new(vec![0.5, 1.75], 0.6).unwrap()] {
                    let fast = gagliardo_energy(space, &u, &ball, &ep).unwrap().value;
                    let slow = brute_energy(space, &u, &ball, &ep);
                    assert!(close(fast, slow), "space {k} seed {seed}: {fast} vs {slow}");
                    let fast = hardy_lhs(space, &u, &f, &ball, &ep).unwrap();
                    let slow = brute_hardy(space, &u, &f, &ball, &ep);
                    assert!(close(fast, slow), "{fast} vs {slow}");
                }
            }
        }
    }

    #[test]
    fn energy_is_thread_count_independent() {
        let s = line(400);
        let u = random_lipschitz(s.geometry(), 5);
        let ball = whole_line_ball(400);
        let ep = params(0.7, 3.0);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| gagliardo_energy(&s, &u, &ball, &ep).unwrap().value)
        };
        let one = run(1);
        assert_eq!(one.to_bits(), run(4).to_bits());
        assert_eq!(one.to_bits(), run(7).to_bits());
    }

    fn cantor_level(depth: u32) -> Level {
        let e = generate(&FractalSpec::Cantor { depth }).unwrap();
        Level::new(GridSet::full(e.geometry().clone()), e, depth).unwrap()
    }

    #[test]
    fn holefill_trivial_cases() {
        let lv = cantor_level(5);
        let z = lv.space.geometry().center(lv.set.cells()[8]);
        let r = 1.0 / 27.0;
        let ep = params(0.5, 2.0);
        let zero = GridFunction::zeros(lv.space.geometry().clone());
        let rep = holefill_check(&lv.space, &lv.set, &[zero], &z, r, 2.0, 2.0, &ep, 1024.0).unwrap();
        assert_eq!((rep.c1, rep.c2), (0.0, 1.0));
        assert!(rep.certificate.pass);
        assert_eq!(rep.certificate.lhs, 0.0);

        let t = truncate(&lv.space, &lv.set, &z, r).unwrap();
        let battery = test_battery(&Ball::new(z.clone(), 4.0 * r).unwrap(), r, 5, 9);
        let us: Vec<GridFunction> = battery.iter().map(|b| b.evaluate(&lv.space, &lv.set, &t.f, r).unwrap()).collect();
        let rep = holefill_check(&lv.space, &lv.set, &us, &z, r, 1.0, 2.0, &ep, 1024.0).unwrap();
        assert_eq!((rep.c1, rep.c2), (0.0, 1.0));
        assert!(rep.certificate.pass);

        assert!(holefill_check(&lv.space, &lv.set, &us, &z, r, 0.5, 2.0, &ep, 1024.0).is_err());
        assert!(holefill_check(&lv.space, &lv.set, &us, &z, r, 2.0, 1.5, &ep, 1024.0).is_err());
    }

    #[test]
    fn holefill_constants_across_resolutions() {
        let ep = params(0.5, 2.0);
        let r = 1.0 / 27.0;
        let mut found = Vec::new();
        let coarse = cantor_level(6);
        let z = coarse.space.geometry().center(coarse.set.cells()[20]);
        for depth in [6, 7] {
            let lv = cantor_level(depth);
            let zc = lv.space.geometry().center(nearest_member(&lv.set, &z).unwrap());
            let t = truncate(&lv.space, &lv.set, &zc, r).unwrap();
            let battery = test_battery(&Ball::new(zc.clone(), 4.0 * r).unwrap(), r, 20, 4);
            let us: Vec<GridFunction> = battery.iter().map(|b| b.evaluate(&lv.space, &lv.set, &t.f, r).unwrap()).collect();
            let rep = holefill_check(&lv.space, &lv.set, &us, &zc, r, 2.0, 2.0, &ep, 1024.0).unwrap();
            assert!(rep.certificate.pass, "{rep:?}");
            found.push((rep.c1, rep.c2));
        }
        let (a, b) = (found[0], found[1]);
        assert_eq!(a.1, b.1, "{found:?}");
        if a.0 > 0.0 || b.0 > 0.0 {
            assert!(a.0.max(b.0) <= 2.0 * a.0.min(b.0), "{found:?}");
        }
    }

    #[test]
    fn hardy_on_small_cantor_pair() {
        let pair = DepthPair::new(cantor_level(5), cantor_level(6)).unwrap();
        let z = pair.coarse.space.geometry().center(pair.coarse.set.cells()[0]);
        let ep = EnergyParams::new(0.5, 2.0, Some(1.2)).unwrap();
        let st = hardy_check(&pair, &z, 1.0 / 27.0, &ep, 6, 2).unwrap();
        assert!(st.coarse.quotient.is_finite() && st.fine.quotient.is_finite());
        assert_eq!(st.certificate.name, "local-hardy");
        assert_eq!(st.certificate.pass, st.drift <= 2.0);
        assert!(hardy_check(&pair, &z, 1.0 / 27.0, &params(0.5, 2.0), 6, 2).is_err());
        assert!(hardy_check(&pair, &z, 5.0, &ep, 6, 2).is_err());
    }

    #[test]
    fn hardy_on_full_space_skips_canonical() {
        let g = Geometry::unit(vec![64]).unwrap();
        let full = GridSet::full(g);
        let st = hardy_quotients(&full, &full, &[32.5], 3.0, &EnergyParams::new(0.5, 2.0, Some(1.5)).unwrap(), &test_battery(
            &Ball::new(vec![32.5], 24.0).unwrap(),
            3.0,
            3,
            1,
        ))
        .unwrap();
        assert_eq!(st.quotients[0], None);
        assert_eq!(st.skipped, 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn energy_shift_and_scale(seed in 0u64..1000, c in -5.0f64..5.0, lambda in -4.0f64..4.0, p in 1.2f64..3.5) {
            let s = line(40);
            let ball = Ball::new(vec![20.0], 15.0).unwrap();
            let ep = params(0.4, p);
            let u = random_lipschitz(s.geometry(), seed);
            let base = gagliardo_energy(&s, &u, &ball, &ep).unwrap().value;
            let shifted = gagliardo_energy(&s, &u.map(|v| v + c).unwrap(), &ball, &ep).unwrap().value;
            let scaled = gagliardo_energy(&s, &u.map(|v| lambda * v).unwrap(), &ball, &ep).unwrap().value;
            prop_assert!((shifted - base).abs() <= 1e-9 * base.max(1e-300));
            prop_assert!((scaled - lambda.abs().powf(p) * base).abs() <= 1e-9 * scaled.abs().max(1e-300));
        }

        #[test]
        fn level_bands_are_consistent(vals in proptest::collection::vec(0.0f64..40.0, 8), k in -4i32..6) {
            let g = Geometry::unit(vec![8]).unwrap();
            let u = GridFunction::new(g, vals.clone()).unwrap();
            let lv = mazya_levels(&u);
            let a = lv.level(k);
            let b = lv.level(k + 1);
            for i in 0..8 {
                let x = a.value(i);
                prop_assert!((0.0..=1.0).contains(&x));
                prop_assert!(b.value(i) <= x);
                if x < 1.0 { prop_assert!(vals[i] <= 2f64.powi(k + 1)); }
                if x > 0.0 { prop_assert!(vals[i] > 2f64.powi(k)); }
            }
            if let Some(top) = lv.indicator_top {
                let ind = lv.level(top);
                for i in 0..8 {
                    prop_assert_eq!(ind.value(i), if vals[i] > 0.0 { 1.0 } else { 0.0 });
                }
            }
        }

        #[test]
        fn mazya_holds_on_random_inputs(seed in 0u64..10_000, p in 1.1f64..4.0, s in 0.05f64..0.95) {
            let space = line(48);
            let u = random_lipschitz(space.geometry(), seed);
            let c = mazya_check(&space, &u, &Ball::new(vec![24.0], 20.0).unwrap(), &params(s, p)).unwrap();
            prop_assert!(c.pass, "{:?}", c);
        }
    }
}
