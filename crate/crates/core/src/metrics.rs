//! Error metrics over the joint valid set of a prediction and ground truth.
//!
//! The evaluation set is `pred-valid ∩ gt-valid ∩ region`. Reductions run in
//! row-major order with `f64` accumulators, so results do not depend on how
//! the maps were produced. AbsRel is reported ×100.

use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::grid::{ensure_same_dims, Grid, ValidityMask};

pub const DEFAULT_SILOG_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean absolute relative error, ×100.
    pub absrel: f64,
    /// Root mean squared error, meters.
    pub rmse: f64,
    pub silog: f64,
    pub evaluated_pixels: usize,
}

/// `(pred, gt)` pairs of the evaluation set, in row-major order.
pub fn evaluation_pairs(pred: &DepthMap, gt: &DepthMap, region: Option<&ValidityMask>) -> Result<Vec<(f64, f64)>> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    if let Some(r) = region {
        ensure_same_dims(gt.dims(), r.dims())?;
    }
    let pairs: Vec<(f64, f64)> = gt
        .mask()
        .indices()
        .filter(|&i| pred.mask().at(i) && region.is_none_or(|r| r.at(i)))
        .map(|i| (pred.depth().at(i) as f64, gt.depth().at(i) as f64))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok(pairs)
}

pub fn absrel(pred: &DepthMap, gt: &DepthMap, region: Option<&ValidityMask>) -> Result<f64> {
    absrel_pairs(&evaluation_pairs(pred, gt, region)?)
}

pub fn rmse(pred: &DepthMap, gt: &DepthMap, region: Option<&ValidityMask>) -> Result<f64> {
    rmse_pairs(&evaluation_pairs(pred, gt, region)?)
}

pub fn silog(pred: &DepthMap, gt: &DepthMap, region: Option<&ValidityMask>, lambda: f64) -> Result<f64> {
    let pairs = evaluation_pairs(pred, gt, region)?;
    silog_pairs(&pairs, lambda).map_err(|e| locate(e, pred, gt, region))
}

/// All three metrics over one evaluation set.
pub fn evaluate(pred: &DepthMap, gt: &DepthMap, region: Option<&ValidityMask>, lambda: f64) -> Result<MetricsReport> {
    let pairs = evaluation_pairs(pred, gt, region)?;
    Ok(MetricsReport {
        absrel: absrel_pairs(&pairs)?,
        rmse: rmse_pairs(&pairs)?,
        silog: silog_pairs(&pairs, lambda).map_err(|e| locate(e, pred, gt, region))?,
        evaluated_pixels: pairs.len(),
    })
}

/// Mean of `|p − g| / g`, ×100.
pub fn absrel_pairs(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let sum: f64 = pairs.iter().map(|&(p, g)| (p - g).abs() / g).sum();
    Ok(100.0 * sum / pairs.len() as f64)
}

pub fn rmse_pairs(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let sum: f64 = pairs.iter().map(|&(p, g)| (p - g) * (p - g)).sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// `sqrt(mean(g²) − λ·mean(g)²)` with `g = ln p − ln gt`.
///
/// Evaluated in the algebraically equal centered form
/// `mean((g − ḡ)²) + (1 − λ)·ḡ²`, which keeps the λ = 1 case free of
/// cancellation. Pixel positions in errors are indices into `pairs`.
pub fn silog_pairs(pairs: &[(f64, f64)], lambda: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let mut logs = Vec::with_capacity(pairs.len());
    for (i, &(p, g)) in pairs.iter().enumerate() {
        for v in [p, g] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::NonPositiveValue { x: i, y: 0, value: v });
            }
        }
        logs.push(p.ln() - g.ln());
    }
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok((var + (1.0 - lambda) * mean * mean).max(0.0).sqrt())
}

/// Rewrites a pair-index error position into pixel coordinates.
fn locate(err: Error, pred: &DepthMap, gt: &DepthMap, region: Option<&ValidityMask>) -> Error {
    if let Error::NonPositiveValue { x: k, value, .. } = err {
        let w = gt.width();
        if let Some(i) = gt
            .mask()
            .indices()
            .filter(|&i| pred.mask().at(i) && region.is_none_or(|r| r.at(i)))
            .nth(k)
        {
            return Error::NonPositiveValue {
                x: i % w,
                y: i / w,
                value,
            };
        }
    }
    err
}

/// Per-pixel `|pred − gt| / gt` on the joint valid set; 0 elsewhere.
/// The returned mask marks the evaluated pixels.
pub fn error_map(pred: &DepthMap, gt: &DepthMap) -> Result<(Grid, ValidityMask)> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    let joint = gt.mask().and(pred.mask())?;
    let (w, h) = gt.dims();
    let values = (0..w * h)
        .map(|i| {
            if joint.at(i) {
                let g = gt.depth().at(i) as f64;
                ((pred.depth().at(i) as f64 - g).abs() / g) as f32
            } else {
                0.0
            }
        })
        .collect();
    Ok((Grid::new(w, h, values)?, joint))
}
