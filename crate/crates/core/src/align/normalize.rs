use crate::depth::{DepthMap, RelativePrediction};
use crate::error::{Error, Result};
use crate::grid::{Grid, ValidityMask};

/// A grid mapped onto `[0, 1]` together with the range needed to undo it.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub grid: Grid,
    pub min: f64,
    pub max: f64,
}

/// Min-max normalization over the valid pixels of a depth map. Invalid pixels stay 0.
pub fn normalize_depth(map: &DepthMap) -> Result<Normalized> {
    normalize_masked(map.depth(), Some(map.mask()))
}

/// Min-max normalization over every pixel of a prediction.
pub fn normalize_prediction(pred: &RelativePrediction) -> Result<Normalized> {
    normalize_masked(&pred.to_grid()?, None)
}

pub fn normalize_masked(values: &Grid, mask: Option<&ValidityMask>) -> Result<Normalized> {
    let selected = |i: usize| mask.is_none_or(|m| m.at(i));
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in values.values().iter().enumerate() {
        if selected(i) {
            min = min.min(v as f64);
            max = max.max(v as f64);
        }
    }
    if min > max {
        return Err(Error::Empty);
    }
    if max <= min {
        return Err(Error::Degenerate);
    }
    let span = max - min;
    let out = values
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if selected(i) {
                ((v as f64 - min) / span) as f32
            } else {
                0.0
            }
        })
        .collect();
    Ok(Normalized {
        grid: Grid::new(values.width(), values.height(), out)?,
        min,
        max,
    })
}

/// Inverse of the normalization: `v * (max - min) + min`.
pub fn denormalize(grid: &Grid, min: f64, max: f64) -> Result<Grid> {
    if !min.is_finite() || !max.is_finite() || max <= min {
        return Err(Error::BadRange { min, max });
    }
    grid.map(|v| (v as f64 * (max - min) + min) as f32)
}
