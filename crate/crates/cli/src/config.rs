//! Declarative pipeline configuration (TOML).
//!
//! ```toml
//! version = 1
//! seed = 42
//! methods = ["prefill", "prefill_uniform", "interpolation", "global_align"]
//!
//! [scene]
//! kind = "fractal"
//! width = 160
//! height = 128
//! depth_range = [1.0, 10.0]
//! count = 20
//! prediction = { affine = [1.0, 0.0], distortion = { type = "gamma", gamma = 1.3 } }
//!
//! [[priors]]
//! name = "S+M"
//! patterns = [{ type = "sparse_random", n = 100 }, { type = "square_mask", side_px = 48 }]
//! noise = { outlier_fraction = 0.01 }
//!
//! [fill]
//! k = 5
//! weighting = "inverse_distance"
//!
//! [metrics]
//! lambda = 1.0
//! regions = "holes"
//! ```
//!
//! Seeds are never written per component: every scene, prior and noise seed is
//! derived from the master `seed` and a stable component name (see
//! [`crate::pipeline`]).

use std::path::{Path, PathBuf};

use priorfill::align::FillConfig;
use priorfill::metrics::DEFAULT_SILOG_LAMBDA;
use priorfill::scenegen::{PredictionSpec, SceneKind, DEFAULT_STEP_COUNT};
use priorfill::synth::NoiseSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<InputConfig>,
    #[serde(default)]
    pub priors: Vec<PriorConfig>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub fill: FillConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    pub depth_range: (f64, f64),
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Number of scenes; each gets its own derived seed.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Any `seed` inside a smooth-noise distortion is replaced by a derived one.
    #[serde(default)]
    pub prediction: PredictionSpec,
}

/// Files standing in for a generated scene. Depth files are `.pfm` (0 marks
/// invalid pixels) or 16-bit `.png` scaled by `png_scale` millimeters per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default)]
    pub gt: Option<PathBuf>,
    #[serde(default)]
    pub pred: Option<PathBuf>,
    /// A measured prior; used instead of the `[[priors]]` list when present.
    #[serde(default)]
    pub prior: Option<PathBuf>,
    #[serde(default)]
    pub confidence: Option<PathBuf>,
    /// An already filled map to evaluate directly.
    #[serde(default)]
    pub filled: Option<PathBuf>,
    #[serde(default = "default_png_scale")]
    pub png_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub name: String,
    /// Applied left to right, as in [`priorfill::synth::mix`].
    pub patterns: Vec<PatternConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternConfig {
    SparseRandom {
        n: usize,
    },
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
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<(usize, usize)>,
    },
    /// 8-bit PNG; pixels >= 128 are removed from the prior.
    MaskFile {
        path: PathBuf,
    },
    /// Keeps the most confident pixels of `inputs.confidence`.
    Confidence {
        top_fraction: f64,
    },
}

/// Perturbation parameters; the seed is derived, and a missing outlier range
/// defaults to the scene depth range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_outlier_fraction")]
    pub outlier_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_range: Option<(f64, f64)>,
    #[serde(default = "default_sigma")]
    pub boundary_noise_sigma: f64,
    #[serde(default = "default_band")]
    pub boundary_band_px: usize,
}

impl NoiseConfig {
    pub fn to_spec(&self, fallback_range: (f64, f64), seed: u64) -> NoiseSpec {
        NoiseSpec {
            outlier_fraction: self.outlier_fraction,
            outlier_range: self.outlier_range.unwrap_or(fallback_range),
            boundary_noise_sigma: self.boundary_noise_sigma,
            boundary_band_px: self.boundary_band_px,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Aligned pre-fill with the configured `[fill]` settings.
    Prefill,
    /// Aligned pre-fill with uniform support weights.
    PrefillUniform,
    /// Inverse-distance interpolation of the prior, prediction unused.
    Interpolation,
    /// One scale and shift for the whole prediction.
    GlobalAlign,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Prefill => "prefill",
            Method::PrefillUniform => "prefill_uniform",
            Method::Interpolation => "interpolation",
            Method::GlobalAlign => "global_align",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    #[default]
    All,
    /// Only pixels missing from the prior.
    Holes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub lambda: f64,
    pub regions: Region,
    /// Export per-pixel relative error as PFM and 8-bit PNG.
    pub error_maps: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_SILOG_LAMBDA,
            regions: Region::All,
            error_maps: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Wall-clock stage timings make reports differ between runs, so they are opt-in.
    pub timings: bool,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Prefill]
}

fn default_steps() -> usize {
    DEFAULT_STEP_COUNT
}

fn default_count() -> usize {
    1
}

fn default_png_scale() -> f64 {
    1.0
}

fn default_outlier_fraction() -> f64 {
    NoiseSpec::DEFAULT_OUTLIER_FRACTION
}

fn default_sigma() -> f64 {
    NoiseSpec::DEFAULT_SIGMA_M
}

fn default_band() -> usize {
    NoiseSpec::DEFAULT_BAND_PX
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Structural checks; value ranges are validated by the core types when used.
    pub fn validate(&self) -> CliResult<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        match (&self.scene, &self.inputs) {
            (Some(_), Some(_)) => return Err(CliError::Config("[scene] and [inputs] are mutually exclusive".into())),
            (Some(scene), None) if scene.count == 0 => {
                return Err(CliError::Config("scene.count must be at least 1".into()))
            }
            _ => {}
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("at least one method is required".into()));
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return Err(CliError::Config("duplicate method".into()));
        }
        let mut names: Vec<&str> = self.priors.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("duplicate prior name".into()));
        }
        for p in &self.priors {
            if p.name.is_empty() || p.name.contains(['/', '\\']) {
                return Err(CliError::Config(format!("invalid prior name {:?}", p.name)));
            }
        }
        Ok(())
    }

    /// The configuration as echoed into reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is serializable")
    }
}
