//! Ground-truth test sets: Cantor sets, Sierpinski carpets, hyperplanes, points.
//!
//! Self-similar sets are generated at unit physical size (cell side `3^-k`)
//! inside a full ambient grid whose side is at least four times the set's
//! diameter, with margins that are whole multiples of the unit so that
//! coarsening a depth `k+1` set by 3 reproduces depth `k` exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, GridSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FractalSpec {
    /// Middle-thirds Cantor set prefix on a `3^depth`-cell line.
    Cantor { depth: u32 },
    /// Sierpinski carpet prefix on a `3^depth x 3^depth` grid.
    Carpet { depth: u32 },
    /// The slab of cells whose index along `axis` is `side / 2`.
    Hyperplane { dim: usize, axis: usize, side: usize },
    /// One cell, by default the center of a `side^dim` grid.
    Point { dim: usize, side: usize, at: Option<Vec<usize>> },
    /// Every cell of a `side^dim` grid.
    Full { dim: usize, side: usize },
    Union(Vec<FractalSpec>),
    Product(Box<FractalSpec>, Box<FractalSpec>),
}

impl FractalSpec {
    /// Ratio of cell sizes between this set and the same kind one level finer.
    pub fn refinement_factor(&self) -> f64 {
        match self {
            FractalSpec::Cantor { .. } | FractalSpec::Carpet { .. } => 3.0,
            FractalSpec::Union(parts) => parts.first().map_or(2.0, FractalSpec::refinement_factor),
            FractalSpec::Product(a, _) => a.refinement_factor(),
            _ => 2.0,
        }
    }

    /// The same kind of set at a different depth (side `2^depth + 1` for grid kinds).
    pub fn at_depth(&self, depth: u32) -> FractalSpec {
        let side = (1usize << depth.min(40)) + 1;
        match self {
            FractalSpec::Cantor { .. } => FractalSpec::Cantor { depth },
            FractalSpec::Carpet { .. } => FractalSpec::Carpet { depth },
            FractalSpec::Hyperplane { dim, axis, .. } => FractalSpec::Hyperplane { dim: *dim, axis: *axis, side },
            FractalSpec::Point { dim, .. } => FractalSpec::Point { dim: *dim, side, at: None },
            FractalSpec::Full { dim, .. } => FractalSpec::Full { dim: *dim, side },
            FractalSpec::Union(parts) => FractalSpec::Union(parts.iter().map(|p| p.at_depth(depth)).collect()),
            FractalSpec::Product(a, b) => {
                FractalSpec::Product(Box::new(a.at_depth(depth)), Box::new(b.at_depth(depth)))
            }
        }
    }
}

/// Builds the set; its ambient space is the full grid of the returned geometry.
pub fn generate(spec: &FractalSpec) -> Result<GridSet> {
    match spec {
        FractalSpec::Cantor { depth } => self_similar(1, *depth, |idx, k| cantor_member(idx[0], k)),
        FractalSpec::Carpet { depth } => {
            self_similar(2, *depth, |idx, k| carpet_member(idx[0], idx[1], k))
        }
        FractalSpec::Hyperplane { dim, axis, side } => {
            if axis >= dim {
                return Err(Error::InvalidParameter(format!("axis {axis} >= dim {dim}")));
            }
            let geom = plain_geometry(*dim, *side)?;
            let stride = geom.strides()[*axis];
            let mid = side / 2;
            let cells = (0..geom.len()).filter(|f| (f / stride) % side == mid).collect::<Vec<_>>();
            GridSet::from_cells(geom, cells)
        }
        FractalSpec::Point { dim, side, at } => {
            let geom = plain_geometry(*dim, *side)?;
            let idx = match at {
                Some(a) if a.len() == *dim && a.iter().all(|&i| i < *side) => a.clone(),
                Some(a) => return Err(Error::InvalidParameter(format!("point {a:?} outside the grid"))),
                None => vec![side / 2; *dim],
            };
            let f = geom.flat(&idx);
            GridSet::from_cells(geom, [f])
        }
        FractalSpec::Full { dim, side } => Ok(GridSet::full(plain_geometry(*dim, *side)?)),
        FractalSpec::Union(parts) => {
            let mut it = parts.iter();
            let first = it.next().ok_or_else(|| Error::InvalidParameter("empty union".into()))?;
            let mut acc = generate(first)?;
            for p in it {
                acc = acc.union(&generate(p)?)?;
            }
            Ok(acc)
        }
        FractalSpec::Product(a, b) => product(&generate(a)?, &generate(b)?),
    }
}

/// Cartesian product of two sets with equal cell size.
pub fn product(a: &GridSet, b: &GridSet) -> Result<GridSet> {
    let (ga, gb) = (a.geometry(), b.geometry());
    if ga.cell() != gb.cell() {
        return Err(Error::Geometry(format!("cell sizes differ: {} vs {}", ga.cell(), gb.cell())));
    }
    let shape = [ga.shape(), gb.shape()].concat();
    let origin = [ga.origin(), gb.origin()].concat();
    let geom = Geometry::new(shape, ga.cell(), origin)?;
    let nb = gb.len();
    let mut out = GridSet::empty(geom);
    for fa in a.iter() {
        for fb in b.iter() {
            out.insert(fa * nb + fb);
        }
    }
    Ok(out)
}

fn plain_geometry(dim: usize, side: usize) -> Result<Geometry> {
    if dim == 0 || side == 0 {
        return Err(Error::InvalidParameter("dim and side must be >= 1".into()));
    }
    Geometry::new(vec![side; dim], 1.0 / side as f64, vec![0.0; dim])
}

fn self_similar(dim: usize, depth: u32, member: impl Fn(&[usize], u32) -> bool) -> Result<GridSet> {
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be >= 1".into()));
    }
    let too_big = || Error::InvalidGrid(format!("depth {depth} exceeds the addressable cell bound"));
    let n = 3usize.checked_pow(depth).ok_or_else(too_big)?;
    // margin in units of the set's extent: smallest m with 1 + 2m >= 4 * diam
    let diam_units = ((n - 1) as f64 / n as f64) * (dim as f64).sqrt();
    let margin = ((4.0 * diam_units - 1.0) / 2.0).ceil().max(1.0) as usize;
    let side = n.checked_mul(1 + 2 * margin).ok_or_else(too_big)?;
    if (side as u128).pow(dim as u32) >= crate::grid::MAX_CELLS {
        return Err(too_big());
    }
    let geom = Geometry::new(vec![side; dim], 1.0 / n as f64, vec![-(margin as f64); dim])?;
    let off = margin * n;
    let mut set = GridSet::empty(geom);
    let mut idx = vec![0usize; dim];
    let total = n.pow(dim as u32);
    for local in 0..total {
        let mut rest = local;
        for a in (0..dim).rev() {
            idx[a] = rest % n;
            rest /= n;
        }
        if member(&idx, depth) {
            let g: Vec<usize> = idx.iter().map(|i| i + off).collect();
            let f = set.geometry().flat(&g);
            set.insert(f);
        }
    }
    Ok(set)
}

fn cantor_member(mut i: usize, depth: u32) -> bool {
    for _ in 0..depth {
        if i % 3 == 1 {
            return false;
        }
        i /= 3;
    }
    true
}

fn carpet_member(mut i: usize, mut j: usize, depth: u32) -> bool {
    for _ in 0..depth {
        if i % 3 == 1 && j % 3 == 1 {
            return false;
        }
        i /= 3;
        j /= 3;
    }
    true
}

impl fmt::Display for FractalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FractalSpec::Cantor { depth } => write!(f, "cantor:{depth}"),
            FractalSpec::Carpet { depth } => write!(f, "carpet:{depth}"),
            FractalSpec::Hyperplane { dim, axis, side } => write!(f, "hyperplane:{dim}:{axis}:{side}"),
            FractalSpec::Point { dim, side, at: None } => write!(f, "point:{dim}:{side}"),
            FractalSpec::Point { dim, side, at: Some(at) } => {
                let at: Vec<String> = at.iter().map(|i| i.to_string()).collect();
                write!(f, "point:{dim}:{side}@{}", at.join(","))
            }
            FractalSpec::Full { dim, side } => write!(f, "full:{dim}:{side}"),
            FractalSpec::Union(parts) => {
                let parts: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "union({})", parts.join(";"))
            }
            FractalSpec::Product(a, b) => write!(f, "product({a};{b})"),
        }
    }
}

impl FromStr for FractalSpec {
    type Err = Error;

    /// Parses `cantor:8`, `carpet:6`, `hyperplane:2:0:512`, `point:2:257`,
    /// `point:2:512@256,64`, `full:1:64`, `union(a;b;...)`, `product(a;b)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |m: &str| Error::InvalidParameter(format!("bad set spec {s:?}: {m}"));
        for (head, is_union) in [("union(", true), ("product(", false)] {
            if let Some(inner) = s.strip_prefix(head) {
                let inner = inner.strip_suffix(')').ok_or_else(|| bad("missing `)`"))?;
                let parts = split_top(inner).into_iter().map(str::parse).collect::<Result<Vec<_>>>()?;
                return if is_union {
                    Ok(FractalSpec::Union(parts))
                } else {
                    match <[FractalSpec; 2]>::try_from(parts) {
                        Ok([a, b]) => Ok(FractalSpec::Product(Box::new(a), Box::new(b))),
                        Err(_) => Err(bad("product takes two factors")),
                    }
                };
            }
        }
        let (body, at) = match s.split_once('@') {
            Some((b, a)) => (b, Some(a)),
            None => (s, None),
        };
        let mut parts = body.split(':');
        let kind = parts.next().unwrap_or_default();
        let nums = parts
            .map(|p| p.parse::<usize>().map_err(|_| bad("expected integers")))
            .collect::<Result<Vec<_>>>()?;
        let spec = match (kind, nums.as_slice()) {
            ("cantor", [d]) => FractalSpec::Cantor { depth: *d as u32 },
            ("carpet", [d]) => FractalSpec::Carpet { depth: *d as u32 },
            ("hyperplane", [dim, axis, side]) => FractalSpec::Hyperplane { dim: *dim, axis: *axis, side: *side },
            ("point", [dim, side]) => {
                let at = at
                    .map(|a| {
                        a.split(',')
                            .map(|x| x.parse::<usize>().map_err(|_| bad("bad point position")))
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?;
                FractalSpec::Point { dim: *dim, side: *side, at }
            }
            ("full", [dim, side]) => FractalSpec::Full { dim: *dim, side: *side },
            _ => return Err(bad("unknown kind or wrong arity")),
        };
        if at.is_some() && !matches!(spec, FractalSpec::Point { .. }) {
            return Err(bad("`@` only applies to points"));
        }
        Ok(spec)
    }
}

fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ';' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}
