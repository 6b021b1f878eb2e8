use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::grid::{check_dims, ensure_same_dims, Grid, ValidityMask};

/// Metric depth in meters paired with a validity mask.
///
/// Valid pixels hold strictly positive depth; invalid pixels are stored as 0
/// and ignored by every consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    depth: Grid,
    mask: ValidityMask,
}

impl DepthMap {
    /// Pairs a depth grid with a mask. Values at invalid pixels are reset to 0.
    pub fn new(depth: Grid, mask: ValidityMask) -> Result<Self> {
        ensure_same_dims(depth.dims(), mask.dims())?;
        let width = depth.width();
        let mut values = depth.into_values();
        for (i, v) in values.iter_mut().enumerate() {
            if mask.at(i) {
                if *v <= 0.0 {
                    return Err(Error::NonPositiveDepth {
                        x: i % width,
                        y: i / width,
                        value: *v as f64,
                    });
                }
            } else {
                *v = 0.0;
            }
        }
        let depth = Grid::from_parts_unchecked(width, mask.height(), values);
        Ok(Self { depth, mask })
    }

    /// Fully valid map; every value must be positive.
    pub fn dense(depth: Grid) -> Result<Self> {
        let mask = ValidityMask::all(depth.width(), depth.height(), true)?;
        Self::new(depth, mask)
    }

    /// Interprets a raw grid with the zero-means-missing convention used by
    /// depth files. Negative values are rejected.
    pub fn from_sentinel_grid(depth: Grid) -> Result<Self> {
        let width = depth.width();
        if let Some(i) = depth.values().iter().position(|&v| v < 0.0) {
            return Err(Error::NonPositiveDepth {
                x: i % width,
                y: i / width,
                value: depth.at(i) as f64,
            });
        }
        let mask = ValidityMask::new(width, depth.height(), depth.values().iter().map(|&v| v > 0.0).collect())?;
        Ok(Self { depth, mask })
    }

    pub(crate) fn from_parts_unchecked(depth: Grid, mask: ValidityMask) -> Self {
        debug_assert_eq!(depth.dims(), mask.dims());
        Self { depth, mask }
    }

    /// Restricts the valid set to `keep` (intersected with the current mask).
    pub(crate) fn restrict(&self, keep: &ValidityMask) -> Result<Self> {
        let mask = self.mask.and(keep)?;
        Self::new(self.depth.clone(), mask)
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth.dims()
    }

    pub fn depth(&self) -> &Grid {
        &self.depth
    }

    pub fn mask(&self) -> &ValidityMask {
        &self.mask
    }

    /// Depth at `(x, y)` if valid.
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        self.mask.get(x, y).then(|| self.depth.get(x, y))
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask.get(x, y)
    }

    pub fn is_fully_valid(&self) -> bool {
        self.mask.bits().iter().all(|&b| b)
    }

    /// Coordinates of valid pixels in row-major order.
    pub fn valid_coords(&self) -> Vec<(usize, usize)> {
        self.mask.coords()
    }

    pub fn count_valid(&self) -> usize {
        self.mask.count()
    }

    /// `(min, max)` over valid pixels.
    pub fn value_range(&self) -> Option<(f32, f32)> {
        self.mask
            .indices()
            .map(|i| self.depth.at(i))
            .fold(None, |acc, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

/// Builds a depth map from `(x, y, depth_m)` entries; every other pixel is invalid.
pub fn new_depth_map(width: usize, height: usize, entries: &[(usize, usize, f64)]) -> Result<DepthMap> {
    check_dims(width, height)?;
    let mut values = vec![0.0f32; width * height];
    let mut bits = vec![false; width * height];
    let mut seen = HashSet::with_capacity(entries.len());
    for &(x, y, d) in entries {
        if x >= width || y >= height {
            return Err(Error::OutOfBounds { x, y, width, height });
        }
        // f32 storage: a tiny positive f64 may still round to 0.
        if !(d.is_finite() && d > 0.0 && (d as f32) > 0.0) {
            return Err(Error::NonPositiveDepth { x, y, value: d });
        }
        if !seen.insert((x, y)) {
            return Err(Error::DuplicateCoordinate { x, y });
        }
        values[y * width + x] = d as f32;
        bits[y * width + x] = true;
    }
    Ok(DepthMap::from_parts_unchecked(
        Grid::new(width, height, values)?,
        ValidityMask::new(width, height, bits)?,
    ))
}

/// Dense, unitless relative depth from a monocular estimator.
///
/// Held in `f64` so that re-parameterizing a prediction (see [`affine`](Self::affine))
/// does not add storage rounding on top of the values it came with.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePrediction {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RelativePrediction {
    pub fn new(pred: Grid) -> Self {
        let (width, height) = pred.dims();
        let values = pred.values().iter().map(|&v| v as f64).collect();
        Self { width, height, values }
    }

    /// Row-major values; all must be finite.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::BadGrid(format!(
                "{} values for a {width}x{height} prediction",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadGrid(format!("non-finite prediction at index {i}")));
        }
        Ok(Self { width, height, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Single-precision copy, e.g. for writing to a file.
    pub fn to_grid(&self) -> Result<Grid> {
        Grid::new(self.width, self.height, self.values.iter().map(|&v| v as f32).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn at(&self, index: usize) -> f64 {
        self.values[index]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        assert!(
            x < self.width && y < self.height,
            "({x}, {y}) outside {}x{}",
            self.width,
            self.height
        );
        self.values[y * self.width + x]
    }

    /// `alpha * pred + beta`, computed per pixel.
    pub fn affine(&self, alpha: f64, beta: f64) -> Result<Self> {
        Self::from_values(
            self.width,
            self.height,
            self.values.iter().map(|&v| alpha * v + beta).collect(),
        )
    }
}

impl From<Grid> for RelativePrediction {
    fn from(pred: Grid) -> Self {
        Self::new(pred)
    }
}
