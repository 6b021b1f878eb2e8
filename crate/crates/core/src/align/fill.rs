//! Pre-filling of missing prior pixels, plus the two baselines it is measured against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_affine_with, AffineFit, FitSample, DEFAULT_MIN_SCALE_VARIANCE};
use super::index::{build_index, KnnBuffer, SpatialIndex};
use crate::depth::{DepthMap, RelativePrediction};
use crate::error::{bad_spec, Result};
use crate::grid::{ensure_same_dims, Grid, ValidityMask};

/// Lower bound applied to every synthesized depth, meters.
pub const MIN_FILL_DEPTH: f64 = 1e-4;

/// How support points are weighted in the local fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    /// Weight `1 / d` with `d` the pixel distance from the query to the support.
    InverseDistance,
}

/// Scale used when a local support set carries no prediction spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateScale {
    /// Shift-only fit with unit scale.
    Unit,
    /// Scale of a single unweighted fit over all prior pixels (unit if that
    /// fit is itself degenerate); only the shift is estimated locally.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FillConfig {
    pub k: usize,
    pub weighting: Weighting,
    pub min_scale_variance: f64,
    pub degenerate_scale: DegenerateScale,
}

impl Default for FillConfig {
    fn default() -> Self {
        Self {
            k: 5,
            weighting: Weighting::InverseDistance,
            min_scale_variance: DEFAULT_MIN_SCALE_VARIANCE,
            degenerate_scale: DegenerateScale::Global,
        }
    }
}

impl FillConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(bad_spec("k must be at least 1"));
        }
        if !(self.min_scale_variance >= 0.0 && self.min_scale_variance.is_finite()) {
            return Err(bad_spec("min_scale_variance must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Counters describing one fill run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillReport {
    /// Pixels synthesized (i.e. not copied from the prior).
    pub filled: usize,
    /// Synthesized values raised to [`MIN_FILL_DEPTH`].
    pub clamped: usize,
    /// Local fits that used the degenerate fallback scale.
    pub degenerate: usize,
}

impl FillReport {
    fn merge(self, other: Self) -> Self {
        Self {
            filled: self.filled + other.filled,
            clamped: self.clamped + other.clamped,
            degenerate: self.degenerate + other.degenerate,
        }
    }
}

/// A dense depth map together with the counters of the run that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Filled {
    pub map: DepthMap,
    pub report: FillReport,
}

/// Pixel-level aligned pre-fill: every valid prior pixel is copied, every missing
/// pixel gets `s * pred + t` from a weighted fit over its `k` nearest valid
/// prior pixels.
pub fn prefill(prior: &DepthMap, pred: &RelativePrediction, cfg: &FillConfig) -> Result<Filled> {
    ensure_same_dims(prior.dims(), pred.dims())?;
    cfg.validate()?;
    let index = build_index(prior)?;
    prefill_with_index(prior, pred, &index, cfg)
}

/// [`prefill`] against a prebuilt index over `prior`.
pub fn prefill_with_index(
    prior: &DepthMap,
    pred: &RelativePrediction,
    index: &SpatialIndex,
    cfg: &FillConfig,
) -> Result<Filled> {
    ensure_same_dims(prior.dims(), pred.dims())?;
    cfg.validate()?;
    let fallback_scale = match cfg.degenerate_scale {
        DegenerateScale::Unit => 1.0,
        DegenerateScale::Global => {
            global_fit(prior, pred, cfg.min_scale_variance).map(|f| if f.degenerate { 1.0 } else { f.scale })?
        }
    };
    let prior_depth = prior.depth().values();
    let pred_values = pred.values();

    fill_rows(prior, |x, y, buf, samples| {
        let neighbors = index.knn_with((x, y), cfg.k, buf);
        samples.clear();
        samples.extend(neighbors.iter().map(|n| {
            let weight = match cfg.weighting {
                Weighting::Uniform => 1.0,
                Weighting::InverseDistance => 1.0 / n.distance,
            };
            FitSample::new(pred_values[n.index], prior_depth[n.index] as f64, weight)
        }));
        let fit = fit_affine_with(samples, cfg.min_scale_variance, fallback_scale)
            .expect("support set is nonempty with positive weights");
        (fit.apply(pred_values[y * prior.width() + x]), fit.degenerate)
    })
}

/// Interpolation baseline: inverse-distance-weighted mean of the `k` nearest
/// prior values. The prediction is not consulted.
pub fn prefill_interpolation(prior: &DepthMap, k: usize) -> Result<Filled> {
    if k == 0 {
        return Err(bad_spec("k must be at least 1"));
    }
    let index = build_index(prior)?;
    let prior_depth = prior.depth().values();
    fill_rows(prior, |x, y, buf, _| {
        let mut num = 0.0;
        let mut den = 0.0;
        for n in index.knn_with((x, y), k, buf) {
            let w = 1.0 / n.distance;
            num += w * prior_depth[n.index] as f64;
            den += w;
        }
        (num / den, false)
    })
}

/// Global-alignment baseline: one unweighted fit over every valid prior pixel,
/// applied to the whole prediction. Measured values are replaced too.
pub fn global_align(prior: &DepthMap, pred: &RelativePrediction) -> Result<Filled> {
    ensure_same_dims(prior.dims(), pred.dims())?;
    let fit = global_fit(prior, pred, DEFAULT_MIN_SCALE_VARIANCE)?;
    let mut report = FillReport {
        filled: prior.width() * prior.height(),
        degenerate: usize::from(fit.degenerate),
        ..FillReport::default()
    };
    let values: Vec<f32> = pred
        .values()
        .iter()
        .map(|&p| {
            let (v, clamped) = clamp_depth(fit.apply(p));
            report.clamped += usize::from(clamped);
            v
        })
        .collect();
    let (w, h) = prior.dims();
    let map = DepthMap::from_parts_unchecked(Grid::new(w, h, values)?, ValidityMask::all(w, h, true)?);
    Ok(Filled { map, report })
}

/// Unweighted fit over all valid prior pixels.
pub fn global_fit(prior: &DepthMap, pred: &RelativePrediction, min_scale_variance: f64) -> Result<AffineFit> {
    ensure_same_dims(prior.dims(), pred.dims())?;
    let samples: Vec<FitSample> = prior
        .mask()
        .indices()
        .map(|i| FitSample::new(pred.at(i), prior.depth().at(i) as f64, 1.0))
        .collect();
    if samples.is_empty() {
        return Err(crate::error::Error::EmptyPrior);
    }
    fit_affine_with(&samples, min_scale_variance, 1.0)
}

#[inline]
fn clamp_depth(v: f64) -> (f32, bool) {
    if v < MIN_FILL_DEPTH || !v.is_finite() {
        (MIN_FILL_DEPTH as f32, true)
    } else {
        (v as f32, false)
    }
}

/// Shared per-pixel driver: copies valid pixels and calls `fill` for the rest.
/// Rows are processed in parallel; each pixel's arithmetic depends only on its
/// own inputs, so the output is independent of scheduling.
fn fill_rows<F>(prior: &DepthMap, fill: F) -> Result<Filled>
where
    F: Fn(usize, usize, &mut KnnBuffer, &mut Vec<FitSample>) -> (f64, bool) + Sync,
{
    let (width, height) = prior.dims();
    let prior_depth = prior.depth().values();
    let mask = prior.mask();
    let mut values = vec![0.0f32; width * height];
    let report = values
        .par_chunks_mut(width)
        .enumerate()
        .map(|(y, row)| {
            let mut buf = KnnBuffer::default();
            let mut samples = Vec::new();
            let mut report = FillReport::default();
            for (x, out) in row.iter_mut().enumerate() {
                let i = y * width + x;
                if mask.at(i) {
                    *out = prior_depth[i];
                    continue;
                }
                let (v, degenerate) = fill(x, y, &mut buf, &mut samples);
                let (v, clamped) = clamp_depth(v);
                *out = v;
                report.filled += 1;
                report.clamped += usize::from(clamped);
                report.degenerate += usize::from(degenerate);
            }
            report
        })
        .reduce(FillReport::default, FillReport::merge);
    let map = DepthMap::from_parts_unchecked(
        Grid::new(width, height, values)?,
        ValidityMask::all(width, height, true)?,
    );
    Ok(Filled { map, report })
}
