//! Assouad codimension estimates from neighbourhood-measure ratios.
//!
//! For sampled `z in E` and dyadic `r < R` the ratio
//! `mu(E_r ∩ B(z,R)) / mu(B(z,R))` is recorded. The lower codimension is
//! read off the per-`r/R` maximum of the ratios and the upper codimension off
//! the per-`r/R` minimum, each by a least-squares line in log-log space.
//!
//! Finite sampling sees only part of the sup/inf: the lower estimate can only
//! see a smaller maximum than the true envelope and the upper estimate a
//! larger minimum. Both biases shrink as more centers are sampled.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{distance_field, DistanceField};
use crate::error::{Error, Result};
use crate::grid::GridSet;
use crate::measure::BallProfile;
use crate::sampling;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSample {
    pub z: Vec<f64>,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub n: usize,
}

/// Sampling controls shared by the estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleParams {
    /// Number of base points drawn from the set.
    pub centers: usize,
    /// Maximum number of outer radii used.
    pub scales: usize,
    pub seed: u64,
    /// Replaces `diam(E)` when the set is too small to define its own scale range.
    pub diameter: Option<f64>,
}

impl SampleParams {
    pub fn new(centers: usize, scales: usize, seed: u64) -> Self {
        Self { centers, scales, seed, diameter: None }
    }

    pub fn with_diameter(mut self, diameter: f64) -> Self {
        self.diameter = Some(diameter);
        self
    }
}

pub fn ratio_samples(space: &GridSet, e: &GridSet, centers: usize, scales: usize, seed: u64) -> Result<Vec<ScaleSample>> {
    ratio_samples_with(space, e, &SampleParams::new(centers, scales, seed))
}

pub fn ratio_samples_with(space: &GridSet, e: &GridSet, params: &SampleParams) -> Result<Vec<ScaleSample>> {
    let field = distance_field(space, e)?;
    ratio_samples_from_field(space, e, &field, params)
}

pub(crate) fn ratio_samples_from_field(
    space: &GridSet,
    e: &GridSet,
    field: &DistanceField,
    params: &SampleParams,
) -> Result<Vec<ScaleSample>> {
    let h = space.cell();
    let radii = outer_radii(e, params, 8.0)?;
    let centers = sample_centers(e, params)?;
    let geom = space.geometry();
    let per_center: Vec<Vec<ScaleSample>> = centers
        .par_iter()
        .map(|&z| {
            let zc = geom.center(z);
            let mut out = Vec::new();
            for &rc_big in &radii {
                let profile = BallProfile::new(space, field, z, rc_big * h);
                let total = profile.total as f64;
                for rc in sampling::dyadic(2.0, rc_big / 2.0) {
                    let count = profile.count_below(rc * rc);
                    out.push(ScaleSample { z: zc.clone(), r: rc * h, big_r: rc_big * h, ratio: count as f64 / total });
                }
            }
            out
        })
        .collect();
    Ok(per_center.into_iter().flatten().collect())
}

/// Deterministic sample of base points of `E`.
pub(crate) fn sample_centers(e: &GridSet, params: &SampleParams) -> Result<Vec<usize>> {
    if params.centers == 0 || params.scales == 0 {
        return Err(Error::InvalidParameter("centers and scales must be >= 1".into()));
    }
    Ok(sampling::choose(&e.cells(), params.centers, params.seed))
}

/// Diameter of `E` in cell units, or the caller's override.
pub(crate) fn diameter_cells(e: &GridSet, params: &SampleParams) -> Result<f64> {
    if e.is_empty() {
        return Err(Error::EmptySet);
    }
    match params.diameter {
        Some(d) if d > 0.0 => Ok(d / e.cell()),
        Some(d) => Err(Error::InvalidParameter(format!("diameter override must be positive, got {d}"))),
        None if e.count() == 1 => Err(Error::DegenerateSet),
        None => Ok((e.diameter_sq_cells() as f64).sqrt()),
    }
}

/// Dyadic outer radii in cell units from `lo` up to half the diameter,
/// thinned evenly to at most `params.scales` values.
pub(crate) fn outer_radii(e: &GridSet, params: &SampleParams, lo: f64) -> Result<Vec<f64>> {
    let diam = diameter_cells(e, params)?;
    let all = sampling::dyadic(lo, diam / 2.0);
    if all.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "set diameter {} cells leaves no outer radius in [{lo}h, diam/2]",
            diam
        )));
    }
    Ok(thin(&all, params.scales))
}

pub(crate) fn thin(all: &[f64], keep: usize) -> Vec<f64> {
    if keep >= all.len() {
        return all.to_vec();
    }
    if keep == 1 {
        return vec![all[all.len() - 1]];
    }
    let last = all.len() - 1;
    (0..keep).map(|i| all[(i * last + (keep - 1) / 2) / (keep - 1)]).collect()
}

#[derive(Clone, Copy)]
enum Side {
    Max,
    Min,
}

/// Exponent of the per-`r/R` maximum ratio.
pub fn lower_codim(samples: &[ScaleSample]) -> Result<ExponentFit> {
    envelope_fit(samples, Side::Max)
}

/// Exponent of the per-`r/R` minimum ratio.
pub fn upper_codim(samples: &[ScaleSample]) -> Result<ExponentFit> {
    envelope_fit(samples, Side::Min)
}

// per-bucket extremal ratio, keyed by round(log2(r/R))
fn envelope(samples: &[ScaleSample], side: Side) -> BTreeMap<i32, f64> {
    let mut buckets: BTreeMap<i32, f64> = BTreeMap::new();
    for s in samples {
        let key = (s.r / s.big_r).log2().round() as i32;
        let slot = buckets.entry(key).or_insert(s.ratio);
        *slot = match side {
            Side::Max => slot.max(s.ratio),
            Side::Min => slot.min(s.ratio),
        };
    }
    buckets
}

/// CSV with columns `log_theta, log_max_ratio, log_min_ratio`, one row per bucket.
pub fn envelope_csv(samples: &[ScaleSample]) -> String {
    let hi = envelope(samples, Side::Max);
    let lo = envelope(samples, Side::Min);
    let mut out = String::from("log_theta,log_max_ratio,log_min_ratio\n");
    for (k, v) in &hi {
        let _ = writeln!(out, "{:?},{:?},{:?}", f64::from(*k) * std::f64::consts::LN_2, v.ln(), lo[k].ln());
    }
    out
}

fn envelope_fit(samples: &[ScaleSample], side: Side) -> Result<ExponentFit> {
    let buckets = envelope(samples, side);
    if buckets.len() < 3 {
        return Err(Error::TooFewBuckets(buckets.len()));
    }
    let xs: Vec<f64> = buckets.keys().map(|&k| f64::from(k) * std::f64::consts::LN_2).collect();
    let ys: Vec<f64> = buckets.values().map(|v| v.ln()).collect();
    let (slope, intercept, residual_rms) = least_squares(&xs, &ys);
    let theta = |k: i32| 2f64.powi(k);
    Ok(ExponentFit {
        slope,
        intercept,
        residual_rms,
        theta_min: theta(*buckets.keys().next().unwrap()),
        theta_max: theta(*buckets.keys().next_back().unwrap()),
        n: samples.len(),
    })
}

/// Ordinary least squares `y = slope x + intercept` and the residual RMS.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    (slope, intercept, (ss / n).sqrt())
}

/// CSV with columns `z0..z{n-1}, r, R, ratio`.
pub fn samples_csv(samples: &[ScaleSample]) -> String {
    let dim = samples.first().map_or(1, |s| s.z.len());
    let mut out = String::new();
    for a in 0..dim {
        let _ = write!(out, "z{a},");
    }
    out.push_str("r,R,ratio\n");
    for s in samples {
        for c in &s.z {
            let _ = write!(out, "{c:?},");
        }
        let _ = writeln!(out, "{:?},{:?},{:?}", s.r, s.big_r, s.ratio);
    }
    out
}
