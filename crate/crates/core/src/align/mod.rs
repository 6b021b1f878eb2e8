//! Coarse metric alignment of a sparse prior to a dense relative prediction.

mod fill;
mod fit;
mod index;
mod normalize;

pub use fill::{
    global_align, global_fit, prefill, prefill_interpolation, prefill_with_index, DegenerateScale, FillConfig,
    FillReport, Filled, Weighting, MIN_FILL_DEPTH,
};
pub use fit::{fit_affine, fit_affine_with, AffineFit, FitSample, DEFAULT_MIN_SCALE_VARIANCE};
pub use index::{build_index, KnnBuffer, Neighbor, SpatialIndex};
pub use normalize::{denormalize, normalize_depth, normalize_masked, normalize_prediction, Normalized};
