//! Exact Euclidean distance transform on grids.
//!
//! Squared distances are computed in integer cell units with the separable
//! lower-envelope-of-parabolas method, one axis at a time. Breakpoints are
//! compared as exact rationals so the result equals the brute-force minimum.

use crate::error::{Error, Result};
use crate::grid::{Geometry, GridSet};

const INF: u64 = u64::MAX;

/// Distance from every cell center to the nearest cell center of a target set.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    geom: Geometry,
    sq: Vec<u64>,
}

impl DistanceField {
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    /// Squared distance in cell units.
    pub fn sq(&self, flat: usize) -> u64 {
        self.sq[flat]
    }

    pub fn sq_values(&self) -> &[u64] {
        &self.sq
    }

    /// Distance in physical units.
    pub fn value(&self, flat: usize) -> f64 {
        (self.sq[flat] as f64).sqrt() * self.geom.cell()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.sq.len()).map(|f| self.value(f)).collect()
    }

    pub fn max_value(&self) -> f64 {
        let m = self.sq.iter().copied().max().unwrap_or(0);
        (m as f64).sqrt() * self.geom.cell()
    }

    /// Smallest positive distance, if any cell lies off the target.
    pub fn min_positive(&self) -> Option<f64> {
        self.sq
            .iter()
            .copied()
            .filter(|&s| s > 0)
            .min()
            .map(|m| (m as f64).sqrt() * self.geom.cell())
    }
}

/// Exact distance field of `target` over the grid of `ambient`.
pub fn distance_field(ambient: &GridSet, target: &GridSet) -> Result<DistanceField> {
    ambient.geometry().check_same(target.geometry())?;
    if target.is_empty() {
        return Err(Error::EmptySet);
    }
    if !target.is_subset(ambient) {
        return Err(Error::Geometry("target is not a subset of the ambient set".into()));
    }
    Ok(transform(target))
}

/// Distance field of a nonempty set over its own full grid.
pub(crate) fn transform(target: &GridSet) -> DistanceField {
    let geom = target.geometry().clone();
    let mut sq = vec![INF; geom.len()];
    for f in target.iter() {
        sq[f] = 0;
    }
    let mut line_in = Vec::new();
    let mut line_out = Vec::new();
    let mut env = Envelope::default();
    for axis in 0..geom.dim() {
        let len = geom.shape()[axis];
        let stride = geom.strides()[axis];
        line_in.resize(len, 0);
        line_out.resize(len, 0);
        for start in 0..geom.len() {
            if (start / stride) % len != 0 {
                continue;
            }
            for k in 0..len {
                line_in[k] = sq[start + k * stride];
            }
            env.transform_line(&line_in, &mut line_out);
            for k in 0..len {
                sq[start + k * stride] = line_out[k];
            }
        }
    }
    DistanceField { geom, sq }
}

#[derive(Default)]
struct Envelope {
    // parabola apex positions and the left boundary of each parabola's
    // dominance interval, stored as a rational num/den with den > 0
    v: Vec<usize>,
    z_num: Vec<i128>,
    z_den: Vec<i128>,
}

impl Envelope {
    fn transform_line(&mut self, f: &[u64], out: &mut [u64]) {
        self.v.clear();
        self.z_num.clear();
        self.z_den.clear();
        let key = |q: usize| f[q] as i128 + (q as i128) * (q as i128);
        for q in 0..f.len() {
            if f[q] == INF {
                continue;
            }
            loop {
                let Some(&p) = self.v.last() else {
                    self.v.push(q);
                    self.z_num.push(i128::MIN);
                    self.z_den.push(1);
                    break;
                };
                // intersection of parabolas rooted at p and q
                let num = key(q) - key(p);
                let den = 2 * (q as i128 - p as i128);
                let k = self.v.len() - 1;
                let (zn, zd) = (self.z_num[k], self.z_den[k]);
                let beyond = zn == i128::MIN || num * zd > zn * den;
                if beyond {
                    self.v.push(q);
                    self.z_num.push(num);
                    self.z_den.push(den);
                    break;
                }
                self.v.pop();
                self.z_num.pop();
                self.z_den.pop();
            }
        }
        if self.v.is_empty() {
            out.iter_mut().for_each(|o| *o = INF);
            return;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            while k + 1 < self.v.len() && self.z_num[k + 1] <= q as i128 * self.z_den[k + 1] {
                k += 1;
            }
            let p = self.v[k];
            let d = q.abs_diff(p) as u64;
            *o = d * d + f[p];
        }
    }
}
