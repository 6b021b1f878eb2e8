//! Pixel-level metric alignment of incomplete depth priors.
//!
//! Given an incomplete metric depth map (the *prior*) and a dense relative
//! depth prediction, [`align::prefill`] produces a dense metric map: valid
//! prior pixels are kept as measured, and every missing pixel is filled by a
//! local scale-and-shift fit of the prediction to its `k` nearest prior
//! pixels, weighted by inverse distance.
//!
//! The remaining modules provide what is needed to evaluate that end to end:
//! procedural scenes ([`scenegen`]), prior degradation patterns ([`synth`]),
//! error metrics ([`metrics`]) and file formats ([`io`]).

pub mod align;
mod depth;
mod error;
mod grid;
pub mod io;
pub mod metrics;
pub mod scenegen;
pub mod seed;
pub mod synth;

pub use align::{AffineFit, FillConfig, Weighting};
pub use depth::{new_depth_map, DepthMap, RelativePrediction};
pub use error::{Error, Result};
pub use grid::{Grid, ValidityMask};
pub use metrics::MetricsReport;
