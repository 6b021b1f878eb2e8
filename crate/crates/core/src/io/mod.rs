//! File formats: PFM for lossless floats, 16-bit PNG for dataset-style depth,
//! 8-bit PNG masks, and JSON reports.

mod pfm;
mod png;
mod report;

pub use pfm::{read_pfm, write_pfm};
pub use png::{read_depth_png16, read_mask_png, write_depth_png16, write_gray_png, write_mask_png, EncodedDepth};
pub use report::{write_report, ReportDocument, ResultRow, StageTimings, ABSREL_UNITS, REPORT_SCHEMA_VERSION};
