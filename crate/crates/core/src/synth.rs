//! Degradation operators turning dense ground truth into the prior patterns
//! studied by the pipeline: sparse points, scanlines, low resolution, range
//! and shape holes, externally supplied masks, and noise perturbation.
//!
//! Every operator only removes pixels from its input's valid set and copies
//! surviving values unchanged, except [`perturb`], which keeps the mask and
//! rewrites values. Seeded operators draw from a ChaCha8 stream, so a fixed
//! seed yields bitwise-identical output on every platform and thread count.
//! Fractional counts are rounded half-to-even.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{bad_spec, Error, Result};
use crate::grid::{ensure_same_dims, Grid, ValidityMask};
use crate::seed::rng;

/// Relative gradient above which a pixel is treated as a depth discontinuity.
pub const DISCONTINUITY_RATIO: f64 = 0.05;

/// Degradation pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    SparseRandom {
        n: usize,
    },
    /// Gradient-weighted point sampling standing in for keypoint-based SfM.
    SparseKeypoint {
        n: usize,
    },
    LidarLines {
        lines: usize,
    },
    LowRes {
        factor: usize,
    },
    RangeMask {
        threshold_m: f64,
    },
    SquareMask {
        side_px: usize,
        center: Option<(usize, usize)>,
    },
    /// `true` pixels of the mask are removed.
    MaskFile(Arc<ValidityMask>),
}

impl Pattern {
    /// Short human-readable label, e.g. `sparse_random(100)`.
    pub fn label(&self) -> String {
        match self {
            Pattern::SparseRandom { n } => format!("sparse_random({n})"),
            Pattern::SparseKeypoint { n } => format!("sparse_keypoint({n})"),
            Pattern::LidarLines { lines } => format!("lidar_lines({lines})"),
            Pattern::LowRes { factor } => format!("low_res({factor})"),
            Pattern::RangeMask { threshold_m } => format!("range_mask({threshold_m})"),
            Pattern::SquareMask { side_px, .. } => format!("square_mask({side_px})"),
            Pattern::MaskFile(_) => "mask_file".to_string(),
        }
    }

    /// Masking patterns only intersect the valid set and ignore the seed.
    pub fn is_masking(&self) -> bool {
        matches!(
            self,
            Pattern::RangeMask { .. } | Pattern::SquareMask { center: Some(_), .. } | Pattern::MaskFile(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub pattern: Pattern,
    pub seed: u64,
}

impl PriorSpec {
    pub fn new(pattern: Pattern, seed: u64) -> Self {
        Self { pattern, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.pattern {
            Pattern::SparseRandom { n } | Pattern::SparseKeypoint { n } if *n == 0 => {
                Err(bad_spec("point count must be at least 1"))
            }
            Pattern::LidarLines { lines: 0 } => Err(bad_spec("line count must be at least 1")),
            Pattern::LowRes { factor } if *factor < 2 => Err(bad_spec("downsample factor must be at least 2")),
            Pattern::RangeMask { threshold_m } if !(*threshold_m > 0.0 && threshold_m.is_finite()) => {
                Err(bad_spec("range threshold must be positive"))
            }
            Pattern::SquareMask { side_px: 0, .. } => Err(bad_spec("square side must be at least 1")),
            _ => Ok(()),
        }
    }
}

/// Applies one pattern to `map`.
pub fn apply(map: &DepthMap, spec: &PriorSpec) -> Result<DepthMap> {
    spec.validate()?;
    match &spec.pattern {
        Pattern::SparseRandom { n } => sample_sparse_random(map, *n, spec.seed),
        Pattern::SparseKeypoint { n } => sample_keypoints(map, *n, spec.seed),
        Pattern::LidarLines { lines } => sample_lidar_lines(map, *lines, spec.seed),
        Pattern::LowRes { factor } => downsample_prior(map, *factor),
        Pattern::RangeMask { threshold_m } => mask_range(map, *threshold_m),
        Pattern::SquareMask { side_px, center } => mask_square(map, *side_px, *center, spec.seed),
        Pattern::MaskFile(mask) => mask_from_file(map, mask),
    }
}

/// Applies `specs` left to right; sampling draws from the running valid set.
pub fn mix(gt: &DepthMap, specs: &[PriorSpec]) -> Result<DepthMap> {
    specs.iter().try_fold(gt.clone(), |acc, spec| apply(&acc, spec))
}

fn keep_indices(map: &DepthMap, keep: impl IntoIterator<Item = usize>) -> Result<DepthMap> {
    let (w, h) = map.dims();
    let mut bits = vec![false; w * h];
    for i in keep {
        bits[i] = true;
    }
    map.restrict(&ValidityMask::new(w, h, bits)?)
}

fn check_count(n: usize, available: usize) -> Result<()> {
    if n == 0 {
        return Err(bad_spec("point count must be at least 1"));
    }
    if n > available {
        return Err(Error::NotEnoughPixels {
            requested: n,
            available,
        });
    }
    Ok(())
}

/// Exactly `n` valid pixels drawn uniformly without replacement.
pub fn sample_sparse_random(gt: &DepthMap, n: usize, seed: u64) -> Result<DepthMap> {
    let valid: Vec<usize> = gt.mask().indices().collect();
    check_count(n, valid.len())?;
    let picks = index::sample(&mut rng(seed), valid.len(), n);
    keep_indices(gt, picks.into_iter().map(|j| valid[j]))
}

/// `n` valid pixels drawn without replacement with probability proportional
/// to the local depth-gradient magnitude (Efraimidis-Spirakis keys). When fewer
/// than `n` pixels have a nonzero gradient, the remainder is drawn uniformly
/// from the flat pixels; a flat map therefore degrades to uniform sampling.
pub fn sample_keypoints(gt: &DepthMap, n: usize, seed: u64) -> Result<DepthMap> {
    let valid: Vec<usize> = gt.mask().indices().collect();
    check_count(n, valid.len())?;
    let mut rng = rng(seed);
    let width = gt.width();
    let mut keyed: Vec<(f64, usize)> = Vec::new();
    let mut flat: Vec<usize> = Vec::new();
    for &i in &valid {
        let g = gradient_magnitude(gt, i % width, i / width);
        // Draw for every pixel so the stream does not depend on which are flat.
        let u: f64 = 1.0 - rng.random::<f64>();
        if g > 0.0 {
            keyed.push((u.ln() / g, i));
        } else {
            flat.push(i);
        }
    }
    // Largest key first; equal keys fall back to row-major order.
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = keyed.iter().take(n).map(|&(_, i)| i).collect();
    let rest = n - chosen.len();
    if rest > 0 {
        chosen.extend(index::sample(&mut rng, flat.len(), rest).into_iter().map(|j| flat[j]));
    }
    keep_indices(gt, chosen)
}

/// Keeps `lines` evenly spaced rows, shifted by a seeded phase.
pub fn sample_lidar_lines(gt: &DepthMap, lines: usize, seed: u64) -> Result<DepthMap> {
    let height = gt.height();
    if lines == 0 || lines > height {
        return Err(bad_spec(format!("line count must be in 1..={height}, got {lines}")));
    }
    let spacing = height as f64 / lines as f64;
    let phase = rng(seed).random_range(0.0..spacing);
    let rows: Vec<usize> = (0..lines)
        .map(|i| ((phase + i as f64 * spacing).floor() as usize).min(height - 1))
        .collect();
    let width = gt.width();
    keep_indices(gt, rows.iter().flat_map(|&y| (0..width).map(move |x| y * width + x)))
}

/// Keeps one pixel per `factor x factor` tile, at the tile center
/// (`start + len / 2` along each axis, with `len` clipped at the border).
pub fn downsample_prior(gt: &DepthMap, factor: usize) -> Result<DepthMap> {
    if factor < 2 {
        return Err(bad_spec(format!("downsample factor must be at least 2, got {factor}")));
    }
    let (w, h) = gt.dims();
    let centers = |len: usize| -> Vec<usize> {
        (0..len)
            .step_by(factor)
            .map(|start| start + (factor.min(len - start)) / 2)
            .collect()
    };
    let xs = centers(w);
    let ys = centers(h);
    keep_indices(gt, ys.iter().flat_map(|&y| xs.iter().map(move |&x| y * w + x)))
}

/// Keeps pixels whose depth is at most `threshold_m`.
pub fn mask_range(gt: &DepthMap, threshold_m: f64) -> Result<DepthMap> {
    if !(threshold_m > 0.0 && threshold_m.is_finite()) {
        return Err(bad_spec(format!("range threshold must be positive, got {threshold_m}")));
    }
    let depth = gt.depth();
    keep_indices(gt, gt.mask().indices().filter(|&i| depth.at(i) as f64 <= threshold_m))
}

/// Removes a `side_px` square. Without a center the square is placed at a
/// seeded position fully inside the image.
pub fn mask_square(gt: &DepthMap, side_px: usize, center: Option<(usize, usize)>, seed: u64) -> Result<DepthMap> {
    let (w, h) = gt.dims();
    if side_px == 0 || side_px > w.min(h) {
        return Err(bad_spec(format!(
            "square side must be in 1..={}, got {side_px}",
            w.min(h)
        )));
    }
    let (x0, y0) = match center {
        Some((cx, cy)) => {
            if cx >= w || cy >= h {
                return Err(Error::OutOfBounds {
                    x: cx,
                    y: cy,
                    width: w,
                    height: h,
                });
            }
            (cx.saturating_sub(side_px / 2), cy.saturating_sub(side_px / 2))
        }
        None => {
            let mut rng = rng(seed);
            (rng.random_range(0..=w - side_px), rng.random_range(0..=h - side_px))
        }
    };
    let (x1, y1) = ((x0 + side_px).min(w), (y0 + side_px).min(h));
    let hole = ValidityMask::from_fn(w, h, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y))?;
    gt.restrict(&hole.not())
}

/// Removes the pixels where `mask` is true.
pub fn mask_from_file(gt: &DepthMap, mask: &ValidityMask) -> Result<DepthMap> {
    ensure_same_dims(gt.dims(), mask.dims())?;
    gt.restrict(&mask.not())
}

/// Outliers and boundary noise. The mask is never changed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub outlier_fraction: f64,
    /// Outlier values are uniform in this range, meters.
    pub outlier_range: (f64, f64),
    pub boundary_noise_sigma: f64,
    pub boundary_band_px: usize,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub const DEFAULT_OUTLIER_FRACTION: f64 = 0.01;
    pub const DEFAULT_SIGMA_M: f64 = 0.05;
    pub const DEFAULT_BAND_PX: usize = 2;

    /// Default perturbation with outliers spanning `outlier_range`.
    pub fn with_range(outlier_range: (f64, f64), seed: u64) -> Self {
        Self {
            outlier_fraction: Self::DEFAULT_OUTLIER_FRACTION,
            outlier_range,
            boundary_noise_sigma: Self::DEFAULT_SIGMA_M,
            boundary_band_px: Self::DEFAULT_BAND_PX,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.outlier_range;
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(bad_spec(format!(
                "outlier fraction {} outside [0, 1]",
                self.outlier_fraction
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(bad_spec(format!(
                "outlier range must satisfy 0 < min <= max, got ({lo}, {hi})"
            )));
        }
        if !(self.boundary_noise_sigma >= 0.0 && self.boundary_noise_sigma.is_finite()) {
            return Err(bad_spec("boundary noise sigma must be non-negative"));
        }
        Ok(())
    }
}

/// Replaces `round(fraction * N)` random valid pixels with uniform outliers,
/// then adds clamped Gaussian noise to the remaining valid pixels lying within
/// `boundary_band_px` (Chebyshev) of a depth discontinuity.
pub fn perturb(prior: &DepthMap, noise: &NoiseSpec) -> Result<DepthMap> {
    noise.validate()?;
    let (w, h) = prior.dims();
    let valid: Vec<usize> = prior.mask().indices().collect();
    let mut values = prior.depth().values().to_vec();
    let mut rng = rng(noise.seed);

    let outliers = round_count(noise.outlier_fraction, valid.len());
    let mut picked = index::sample(&mut rng, valid.len(), outliers).into_vec();
    picked.sort_unstable();
    let mut is_outlier = vec![false; w * h];
    let (lo, hi) = noise.outlier_range;
    for j in picked {
        let i = valid[j];
        values[i] = rng.random_range(lo..=hi) as f32;
        is_outlier[i] = true;
    }

    if noise.boundary_noise_sigma > 0.0 {
        let edges = discontinuities(prior);
        let band = dilate(&edges, w, h, noise.boundary_band_px);
        let normal =
            Normal::new(0.0, noise.boundary_noise_sigma).map_err(|e| bad_spec(format!("boundary noise: {e}")))?;
        for &i in &valid {
            if band[i] && !is_outlier[i] {
                let v = values[i] as f64 + normal.sample(&mut rng);
                values[i] = v.max(crate::align::MIN_FILL_DEPTH) as f32;
            }
        }
    }
    DepthMap::new(Grid::new(w, h, values)?, prior.mask().clone())
}

/// Keeps the `round(top_fraction * N)` valid pixels with the highest
/// confidence; ties keep row-major order.
pub fn prior_from_confidence(depth: &DepthMap, confidence: &Grid, top_fraction: f64) -> Result<DepthMap> {
    ensure_same_dims(depth.dims(), confidence.dims())?;
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(bad_spec(format!("top fraction must be in (0, 1], got {top_fraction}")));
    }
    let mut valid: Vec<usize> = depth.mask().indices().collect();
    let keep = round_count(top_fraction, valid.len());
    // Stable sort: equal confidences stay in row-major order.
    valid.sort_by(|&a, &b| confidence.at(b).total_cmp(&confidence.at(a)));
    keep_indices(depth, valid.into_iter().take(keep))
}

/// `fraction * n` rounded half-to-even.
pub fn round_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round_ties_even() as usize).min(n)
}

/// Central-difference gradient magnitude using only valid neighbors
/// (one-sided when a single neighbor along an axis is valid, zero when none).
fn gradient_magnitude(map: &DepthMap, x: usize, y: usize) -> f64 {
    let d = map.depth();
    let here = d.get(x, y) as f64;
    let axis = |prev: Option<(usize, usize)>, next: Option<(usize, usize)>| -> f64 {
        let val = |c: Option<(usize, usize)>| {
            c.filter(|&(cx, cy)| map.is_valid(cx, cy))
                .map(|(cx, cy)| d.get(cx, cy) as f64)
        };
        match (val(prev), val(next)) {
            (Some(a), Some(b)) => (b - a) / 2.0,
            (Some(a), None) => here - a,
            (None, Some(b)) => b - here,
            (None, None) => 0.0,
        }
    };
    let (w, h) = map.dims();
    let gx = axis(x.checked_sub(1).map(|px| (px, y)), (x + 1 < w).then_some((x + 1, y)));
    let gy = axis(y.checked_sub(1).map(|py| (x, py)), (y + 1 < h).then_some((x, y + 1)));
    (gx * gx + gy * gy).sqrt()
}

/// Valid pixels whose gradient magnitude exceeds [`DISCONTINUITY_RATIO`] of their depth.
fn discontinuities(map: &DepthMap) -> Vec<bool> {
    let (w, h) = map.dims();
    let mut out = vec![false; w * h];
    for i in map.mask().indices() {
        let (x, y) = (i % w, i / w);
        out[i] = gradient_magnitude(map, x, y) > DISCONTINUITY_RATIO * map.depth().at(i) as f64;
    }
    out
}

/// Square (Chebyshev) dilation by `radius`, done separably.
fn dilate(bits: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return bits.to_vec();
    }
    let mut horizontal = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (a, b) = (x.saturating_sub(radius), (x + radius).min(w - 1));
            horizontal[y * w + x] = bits[y * w + a..=y * w + b].iter().any(|&v| v);
        }
    }
    let mut out = vec![false; w * h];
    for y in 0..h {
        let (a, b) = (y.saturating_sub(radius), (y + radius).min(h - 1));
        for x in 0..w {
            out[y * w + x] = (a..=b).any(|yy| horizontal[yy * w + x]);
        }
    }
    out
}
