//! Uniform n-dimensional grids and bitmask subsets of them.
//!
//! A [`GridSet`] is a set of cells of a [`Geometry`]; the measure of a set is
//! its cell count times `h^n`. Cells are addressed by a row-major flat index
//! (last axis fastest).

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of addressable cells.
pub const MAX_CELLS: u128 = 1 << 48;

const MAGIC: &str = "AGRD1";

/// Shape, cell side and origin of a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    shape: Vec<usize>,
    cell: f64,
    origin: Vec<f64>,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl Geometry {
    pub fn new(shape: Vec<usize>, cell: f64, origin: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if shape.iter().any(|&s| s == 0) {
            return Err(Error::InvalidGrid("shape entries must be >= 1".into()));
        }
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(Error::InvalidGrid(format!("cell size must be positive, got {cell}")));
        }
        if origin.len() != shape.len() {
            return Err(Error::InvalidGrid(format!(
                "origin has {} coordinates, shape has {}",
                origin.len(),
                shape.len()
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let total = shape.iter().try_fold(1u128, |acc, &s| {
            let next = acc * s as u128;
            (next < MAX_CELLS).then_some(next)
        });
        if total.is_none() {
            return Err(Error::InvalidGrid("cell count exceeds the addressable bound 2^48".into()));
        }
        let mut strides = vec![1usize; shape.len()];
        for a in (0..shape.len() - 1).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        Ok(Self { shape, cell, origin, strides })
    }

    /// Grid with unit cells and the origin at zero.
    pub fn unit(shape: Vec<usize>) -> Result<Self> {
        let n = shape.len();
        Self::new(shape, 1.0, vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Volume `h^n` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.cell.powi(self.dim() as i32)
    }

    pub fn flat(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dim());
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        self.unflatten_into(flat, &mut out);
        out
    }

    pub fn unflatten_into(&self, mut flat: usize, out: &mut [usize]) {
        for (a, s) in self.strides.iter().enumerate() {
            out[a] = flat / s;
            flat %= s;
        }
    }

    /// Physical coordinates of the center of a cell.
    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + (i as f64 + 0.5) * self.cell)
            .collect()
    }

    /// Fractional index coordinates of a physical point (cell `i` has coordinate `i`).
    pub fn to_index_coords(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(&self.origin)
            .map(|(&x, &o)| (x - o) / self.cell - 0.5)
            .collect()
    }

    /// Cell containing `point`, if any.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim() {
            return None;
        }
        let mut idx = Vec::with_capacity(self.dim());
        for (a, (&x, &o)) in point.iter().zip(&self.origin).enumerate() {
            let t = ((x - o) / self.cell).floor();
            if !(t >= 0.0 && t < self.shape[a] as f64) {
                return None;
            }
            idx.push(t as usize);
        }
        Some(self.flat(&idx))
    }

    /// Largest distance between two cell centers of the full grid.
    pub fn diameter(&self) -> f64 {
        let s: f64 = self.shape.iter().map(|&n| ((n - 1) as f64).powi(2)).sum();
        s.sqrt() * self.cell
    }

    /// Squared distance between two cells, in cell units.
    pub fn index_dist2(&self, a: usize, b: usize) -> u64 {
        let mut d2 = 0u64;
        let (mut fa, mut fb) = (a, b);
        for s in &self.strides {
            let (ia, ib) = (fa / s, fb / s);
            fa %= s;
            fb %= s;
            let d = ia.abs_diff(ib) as u64;
            d2 += d * d;
        }
        d2
    }

    pub(crate) fn check_same(&self, other: &Geometry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "shape {:?}/cell {}/origin {:?} vs shape {:?}/cell {}/origin {:?}",
                self.shape, self.cell, self.origin, other.shape, other.cell, other.origin
            )))
        }
    }

    /// Runs of cells along the last axis that lie in a ball.
    ///
    /// `center` is in fractional index coordinates and `radius` in cell units.
    /// A cell `i` belongs to the ball iff `sum_a (i_a - c_a)^2 < radius^2`
    /// (or `<=` when `closed`), summed over axes in order.
    pub fn ball_spans(&self, center: &[f64], radius: f64, closed: bool) -> Vec<Span> {
        let mut spans = Vec::new();
        if !(radius >= 0.0) {
            return spans;
        }
        let r2 = radius * radius;
        let n = self.dim();
        let inside = |s: f64| if closed { s <= r2 } else { s < r2 };
        let mut lo = vec![0usize; n];
        let mut hi = vec![0usize; n];
        for a in 0..n {
            let l = (center[a] - radius).floor() - 1.0;
            let h = (center[a] + radius).ceil() + 1.0;
            if h < 0.0 || l > (self.shape[a] - 1) as f64 {
                return spans;
            }
            lo[a] = l.max(0.0) as usize;
            hi[a] = (h.min((self.shape[a] - 1) as f64)) as usize;
        }
        let last = n - 1;
        let mut idx = lo.clone();
        loop {
            let mut partial = 0.0f64;
            let mut base = 0usize;
            for a in 0..last {
                let t = idx[a] as f64 - center[a];
                partial += t * t;
                base += idx[a] * self.strides[a];
            }
            if inside(partial) {
                let c = center[last];
                let pred = |i: usize| {
                    let t = i as f64 - c;
                    inside(partial + t * t)
                };
                let rem = (r2 - partial).max(0.0).sqrt();
                let max_i = self.shape[last] - 1;
                let mut a = (c - rem).ceil().clamp(0.0, max_i as f64) as usize;
                let mut b = (c + rem).floor().clamp(0.0, max_i as f64) as usize;
                while a > 0 && pred(a - 1) {
                    a -= 1;
                }
                while a <= b && !pred(a) {
                    a += 1;
                }
                while b < max_i && pred(b + 1) {
                    b += 1;
                }
                while b >= a && !pred(b) {
                    if b == 0 {
                        break;
                    }
                    b -= 1;
                }
                if a <= b && pred(a) && pred(b) {
                    spans.push(Span { base, lo: a, hi: b + 1 });
                }
            }
            // odometer over axes 0..last
            let mut a = last;
            loop {
                if a == 0 {
                    return spans;
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

    /// Spans of an open ball centered on a cell with radius in physical units.
    pub(crate) fn cell_ball_spans(&self, flat: usize, radius: f64, closed: bool) -> Vec<Span> {
        let c: Vec<f64> = self.unflatten(flat).iter().map(|&i| i as f64).collect();
        self.ball_spans(&c, radius / self.cell, closed)
    }
}

/// A run `[lo, hi)` of cells along the last axis; flat index is `base + i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub base: usize,
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn cells(&self) -> std::ops::Range<usize> {
        self.base + self.lo..self.base + self.hi
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }
}

/// An open Euclidean ball `{y : |y - center| < radius}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }
}

/// A subset of the cells of a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSet {
    geom: Geometry,
    bits: BitVec<u64, Lsb0>,
}

impl GridSet {
    pub fn empty(geom: Geometry) -> Self {
        let bits = bitvec![u64, Lsb0; 0; geom.len()];
        Self { geom, bits }
    }

    pub fn full(geom: Geometry) -> Self {
        let bits = bitvec![u64, Lsb0; 1; geom.len()];
        Self { geom, bits }
    }

    pub fn from_cells<I: IntoIterator<Item = usize>>(geom: Geometry, cells: I) -> Result<Self> {
        let mut set = Self::empty(geom);
        for c in cells {
            if c >= set.geom.len() {
                return Err(Error::OutOfRange(format!("cell {c} outside grid of {} cells", set.geom.len())));
            }
            set.bits.set(c, true);
        }
        Ok(set)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dim(&self) -> usize {
        self.geom.dim()
    }

    pub fn cell(&self) -> f64 {
        self.geom.cell()
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.bits[flat]
    }

    pub fn insert(&mut self, flat: usize) {
        self.bits.set(flat, true);
    }

    pub fn remove(&mut self, flat: usize) {
        self.bits.set(flat, false);
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.not_any()
    }

    pub fn is_full(&self) -> bool {
        self.bits.all()
    }

    /// Measure `count * h^n`.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.geom.cell_volume()
    }

    /// Flat indices of member cells in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }

    pub fn cells(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Number of member cells within a span.
    pub fn count_span(&self, span: &Span) -> usize {
        self.bits[span.cells()].count_ones()
    }

    pub fn union(&self, other: &GridSet) -> Result<GridSet> {
        self.geom.check_same(&other.geom)?;
        let mut bits = self.bits.clone();
        bits |= &other.bits;
        Ok(Self { geom: self.geom.clone(), bits })
    }

    pub fn intersection(&self, other: &GridSet) -> Result<GridSet> {
        self.geom.check_same(&other.geom)?;
        let mut bits = self.bits.clone();
        bits &= &other.bits;
        Ok(Self { geom: self.geom.clone(), bits })
    }

    pub fn difference(&self, other: &GridSet) -> Result<GridSet> {
        self.geom.check_same(&other.geom)?;
        let mut bits = self.bits.clone();
        let mut neg = other.bits.clone();
        neg = !neg;
        bits &= &neg;
        Ok(Self { geom: self.geom.clone(), bits })
    }

    pub fn is_subset(&self, other: &GridSet) -> bool {
        self.geom == other.geom && self.iter().all(|c| other.contains(c))
    }

    /// Cells of `self` inside an open ball (within `self`'s grid).
    pub fn ball_members(&self, ball: &Ball) -> GridSet {
        let c = self.geom.to_index_coords(&ball.center);
        let mut out = Self::empty(self.geom.clone());
        for span in self.geom.ball_spans(&c, ball.radius / self.geom.cell(), false) {
            for f in span.cells() {
                if self.bits[f] {
                    out.bits.set(f, true);
                }
            }
        }
        out
    }

    /// Number of cells of `self` in a set of spans.
    pub fn count_spans(&self, spans: &[Span]) -> usize {
        if self.is_full() {
            spans.iter().map(Span::len).sum()
        } else {
            spans.iter().map(|s| self.count_span(s)).sum()
        }
    }

    /// Largest distance between two member cell centers.
    ///
    /// Only cells that are first or last along some grid line of both the
    /// first and the last axis can be extreme points of the convex hull, so
    /// the exact maximum is taken over those candidates.
    pub fn diameter(&self) -> f64 {
        (self.diameter_sq_cells() as f64).sqrt() * self.geom.cell()
    }

    /// Squared diameter in cell units.
    pub fn diameter_sq_cells(&self) -> u64 {
        let candidates = self.hull_candidates();
        let mut best = 0u64;
        for (i, &a) in candidates.iter().enumerate() {
            for &b in &candidates[i + 1..] {
                best = best.max(self.geom.index_dist2(a, b));
            }
        }
        best
    }

    fn hull_candidates(&self) -> Vec<usize> {
        let n = self.dim();
        let extreme_along = |axis: usize| -> BitVec<u64, Lsb0> {
            let mut mark = bitvec![u64, Lsb0; 0; self.geom.len()];
            let stride = self.geom.strides()[axis];
            let len = self.geom.shape()[axis];
            for start in 0..self.geom.len() {
                if (start / stride) % len != 0 {
                    continue;
                }
                let mut first = None;
                let mut last = None;
                for k in 0..len {
                    let f = start + k * stride;
                    if self.bits[f] {
                        first.get_or_insert(f);
                        last = Some(f);
                    }
                }
                if let (Some(a), Some(b)) = (first, last) {
                    mark.set(a, true);
                    mark.set(b, true);
                }
            }
            mark
        };
        let mut mark = extreme_along(n - 1);
        if n > 1 {
            mark &= &extreme_along(0);
        }
        mark.iter_ones().collect()
    }

    /// The box `[lo, lo + shape)` of the grid as its own grid, origin shifted to match.
    pub fn window(&self, lo: &[usize], shape: &[usize]) -> Result<GridSet> {
        let g = &self.geom;
        if lo.len() != g.dim() || shape.len() != g.dim() || (0..g.dim()).any(|a| lo[a] + shape[a] > g.shape()[a]) {
            return Err(Error::OutOfRange(format!("window {lo:?}+{shape:?} outside shape {:?}", g.shape())));
        }
        let origin: Vec<f64> = (0..g.dim()).map(|a| g.origin()[a] + lo[a] as f64 * g.cell()).collect();
        let geom = Geometry::new(shape.to_vec(), g.cell(), origin)?;
        let mut out = Self::empty(geom);
        let mut idx = vec![0usize; g.dim()];
        for f in 0..out.geom.len() {
            out.geom.unflatten_into(f, &mut idx);
            for a in 0..idx.len() {
                idx[a] += lo[a];
            }
            if self.bits[g.flat(&idx)] {
                out.bits.set(f, true);
            }
        }
        Ok(out)
    }

    /// Block-OR coarsening by an integer factor along every axis.
    pub fn coarsen(&self, factor: usize) -> Result<GridSet> {
        if factor == 0 {
            return Err(Error::InvalidParameter("coarsening factor must be >= 1".into()));
        }
        let shape: Vec<usize> = self.geom.shape().iter().map(|&s| s.div_ceil(factor)).collect();
        let geom = Geometry::new(shape, self.geom.cell() * factor as f64, self.geom.origin().to_vec())?;
        let mut out = Self::empty(geom);
        let mut idx = vec![0usize; self.dim()];
        for f in self.iter() {
            self.geom.unflatten_into(f, &mut idx);
            for i in idx.iter_mut() {
                *i /= factor;
            }
            let g = out.geom.flat(&idx);
            out.bits.set(g, true);
        }
        Ok(out)
    }

    /// Serializes into the `AGRD1` format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = String::new();
        let join_usize = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let join_f64 = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(head, "{MAGIC}");
        let _ = writeln!(head, "dim {}", self.dim());
        let _ = writeln!(head, "shape {}", join_usize(self.geom.shape()));
        let _ = writeln!(head, "cell {:?}", self.geom.cell());
        let _ = writeln!(head, "origin {}", join_f64(self.geom.origin()));
        let _ = writeln!(head, "data");
        let mut out = head.into_bytes();
        let nbytes = self.geom.len().div_ceil(8);
        let start = out.len();
        out.resize(start + nbytes, 0);
        for f in self.iter() {
            out[start + f / 8] |= 1 << (f % 8);
        }
        out
    }

    /// Parses the `AGRD1` format; errors name the byte offset of the problem.
    pub fn from_bytes(bytes: &[u8]) -> Result<GridSet> {
        let mut pos = 0usize;
        let next_line = |pos: &mut usize| -> Result<(usize, String)> {
            let start = *pos;
            let rel = bytes[start..].iter().position(|&b| b == b'\n').ok_or(Error::Parse {
                offset: start,
                message: "unterminated header line".into(),
            })?;
            let line = std::str::from_utf8(&bytes[start..start + rel]).map_err(|_| Error::Parse {
                offset: start,
                message: "header is not ASCII".into(),
            })?;
            *pos = start + rel + 1;
            Ok((start, line.to_string()))
        };
        let perr = |offset: usize, message: String| Error::Parse { offset, message };

        let (off, magic) = next_line(&mut pos)?;
        if magic != MAGIC {
            return Err(perr(off, format!("expected {MAGIC}, found {magic:?}")));
        }
        let field = |line: &(usize, String), key: &str| -> Result<Vec<String>> {
            let mut parts = line.1.split(' ');
            if parts.next() != Some(key) {
                return Err(perr(line.0, format!("expected `{key}` line, found {:?}", line.1)));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let dim_line = next_line(&mut pos)?;
        let dim_v = field(&dim_line, "dim")?;
        let dim: usize = match dim_v.as_slice() {
            [d] => d.parse().map_err(|_| perr(dim_line.0, format!("bad dim {d:?}")))?,
            _ => return Err(perr(dim_line.0, "dim takes one value".into())),
        };
        let shape_line = next_line(&mut pos)?;
        let shape = field(&shape_line, "shape")?
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| perr(shape_line.0, format!("bad shape entry {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if shape.len() != dim {
            return Err(perr(shape_line.0, format!("shape has {} entries, dim is {dim}", shape.len())));
        }
        let cell_line = next_line(&mut pos)?;
        let cell: f64 = match field(&cell_line, "cell")?.as_slice() {
            [c] => c.parse().map_err(|_| perr(cell_line.0, format!("bad cell {c:?}")))?,
            _ => return Err(perr(cell_line.0, "cell takes one value".into())),
        };
        let origin_line = next_line(&mut pos)?;
        let origin = field(&origin_line, "origin")?
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| perr(origin_line.0, format!("bad origin entry {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let data_line = next_line(&mut pos)?;
        if data_line.1 != "data" {
            return Err(perr(data_line.0, format!("expected `data`, found {:?}", data_line.1)));
        }
        let geom = Geometry::new(shape, cell, origin).map_err(|e| perr(shape_line.0, e.to_string()))?;
        let nbytes = geom.len().div_ceil(8);
        let payload = &bytes[pos..];
        if payload.len() != nbytes {
            return Err(perr(
                pos + payload.len().min(nbytes),
                format!("expected {nbytes} data bytes, found {}", payload.len()),
            ));
        }
        let mut set = GridSet::empty(geom);
        let len = set.geom.len();
        for (j, &byte) in payload.iter().enumerate() {
            for b in 0..8 {
                if byte >> b & 1 == 1 {
                    let f = j * 8 + b;
                    if f >= len {
                        return Err(perr(pos + j, "padding bits must be zero".into()));
                    }
                    set.bits.set(f, true);
                }
            }
        }
        Ok(set)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<GridSet> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GridSet> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_ball(geom: &Geometry, c: &[f64], r: f64) -> Vec<usize> {
        let ci = geom.to_index_coords(c);
        let rc = r / geom.cell();
        (0..geom.len())
            .filter(|&f| {
                let idx = geom.unflatten(f);
                let mut s = 0.0;
                for a in 0..geom.dim() {
                    let t = idx[a] as f64 - ci[a];
                    s += t * t;
                }
                s < rc * rc
            })
            .collect()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Geometry::new(vec![], 1.0, vec![]).is_err());
        assert!(Geometry::new(vec![3, 0], 1.0, vec![0.0, 0.0]).is_err());
        assert!(Geometry::new(vec![3], 0.0, vec![0.0]).is_err());
        assert!(Geometry::new(vec![3], 1.0, vec![0.0, 1.0]).is_err());
        assert!(Geometry::new(vec![1 << 24, 1 << 24], 1.0, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn ball_three_by_three() {
        let geom = Geometry::unit(vec![101, 101]).unwrap();
        let space = GridSet::full(geom.clone());
        let center = geom.center(geom.flat(&[50, 50]));
        let b = space.ball_members(&Ball::new(center.clone(), 1.5).unwrap());
        assert_eq!(b.count(), 9);
        let tiny = space.ball_members(&Ball::new(center, 0.3).unwrap());
        assert_eq!(tiny.count(), 1);
        let huge = space.ball_members(&Ball::new(vec![3.0, 7.0], 1000.0).unwrap());
        assert_eq!(huge.count(), geom.len());
    }

    #[test]
    fn spans_match_brute_force() {
        let geom = Geometry::new(vec![13, 9, 7], 0.5, vec![-1.0, 0.25, 3.0]).unwrap();
        let space = GridSet::full(geom.clone());
        for (c, r) in [
            (vec![1.3, 2.2, 4.1], 1.7),
            (vec![-3.0, 0.0, 3.0], 2.9),
            (vec![2.0, 2.0, 5.0], 0.2),
            (vec![9.0, 9.0, 9.0], 0.4),
        ] {
            let got = space.ball_members(&Ball::new(c.clone(), r).unwrap()).cells();
            assert_eq!(got, brute_ball(&geom, &c, r), "center {c:?} radius {r}");
        }
    }

    #[test]
    fn diameter_is_exact() {
        let geom = Geometry::unit(vec![20, 17]).unwrap();
        let cells = [geom.flat(&[3, 4]), geom.flat(&[10, 1]), geom.flat(&[15, 16]), geom.flat(&[7, 7])];
        let set = GridSet::from_cells(geom.clone(), cells).unwrap();
        let mut best = 0u64;
        for &a in &cells {
            for &b in &cells {
                best = best.max(geom.index_dist2(a, b));
            }
        }
        assert_eq!(set.diameter(), (best as f64).sqrt());
        assert_eq!(GridSet::full(geom.clone()).diameter(), geom.diameter());
    }

    #[test]
    fn file_format_layout() {
        let geom = Geometry::new(vec![3, 4], 0.25, vec![1.0, -2.5]).unwrap();
        let set = GridSet::from_cells(geom, [0, 2, 9, 11]).unwrap();
        let bytes = set.to_bytes();
        let header = b"AGRD1\ndim 2\nshape 3 4\ncell 0.25\norigin 1.0 -2.5\ndata\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0b0000_0101, 0b0000_1010]);
        assert_eq!(GridSet::from_bytes(&bytes).unwrap(), set);
    }

    #[test]
    fn parse_errors_name_offsets() {
        let err = GridSet::from_bytes(b"AGRD1\ndim 2\nshape 3\n").unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, 12),
            e => panic!("unexpected {e}"),
        }
        let err = GridSet::from_bytes(b"AGRD1\ndim 1\nshape 9\ncell 1\norigin 0\ndata\n\x01").unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 42, .. }), "{err:?}");
    }

    #[test]
    fn coarsen_block_or() {
        let geom = Geometry::unit(vec![9]).unwrap();
        let set = GridSet::from_cells(geom, [0, 2, 6, 8]).unwrap();
        let c = set.coarsen(3).unwrap();
        assert_eq!(c.cells(), vec![0, 2]);
        assert_eq!(c.cell(), 3.0);
    }
}
