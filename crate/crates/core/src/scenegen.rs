//! Procedural scenes with known ground-truth depth, and the relative
//! "predictions" derived from them.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::depth::{DepthMap, RelativePrediction};
use crate::error::{bad_spec, Result};
use crate::grid::Grid;
use crate::seed::rng;

pub const MIN_SCENE_SIDE: usize = 8;
pub const DEFAULT_STEP_COUNT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Up to four tilted planar regions separated by two random lines.
    Planes,
    /// Piecewise-constant staircase with sharp edges.
    Steps,
    /// Spheres occluding a tilted background plane.
    Spheres,
    /// Multi-octave value-noise heightfield.
    Fractal,
}

impl SceneKind {
    pub const ALL: [SceneKind; 4] = [
        SceneKind::Planes,
        SceneKind::Steps,
        SceneKind::Spheres,
        SceneKind::Fractal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::Planes => "planes",
            SceneKind::Steps => "steps",
            SceneKind::Spheres => "spheres",
            SceneKind::Fractal => "fractal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    /// `(min_m, max_m)`; every generated depth lies inside.
    pub depth_range: (f64, f64),
    #[serde(default)]
    pub seed: u64,
    /// Number of levels for [`SceneKind::Steps`]; ignored otherwise.
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    DEFAULT_STEP_COUNT
}

impl SceneSpec {
    pub fn new(kind: SceneKind, width: usize, height: usize, depth_range: (f64, f64), seed: u64) -> Self {
        Self {
            kind,
            width,
            height,
            depth_range,
            seed,
            steps: DEFAULT_STEP_COUNT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.depth_range;
        if self.width < MIN_SCENE_SIDE || self.height < MIN_SCENE_SIDE {
            return Err(bad_spec(format!(
                "scene must be at least {MIN_SCENE_SIDE}x{MIN_SCENE_SIDE}, got {}x{}",
                self.width, self.height
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(bad_spec(format!(
                "depth range must satisfy 0 < min < max, got ({lo}, {hi})"
            )));
        }
        if self.kind == SceneKind::Steps && self.steps < 2 {
            return Err(bad_spec("steps scene needs at least 2 levels"));
        }
        Ok(())
    }
}

/// Generates a fully valid depth map for `spec`. Deterministic in the seed.
pub fn generate_scene(spec: &SceneSpec) -> Result<DepthMap> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let field: Vec<f64> = match spec.kind {
        SceneKind::Planes => planes(spec),
        SceneKind::Steps => steps(spec),
        SceneKind::Spheres => spheres(spec),
        SceneKind::Fractal => fractal(spec),
    };
    let lo = spec.depth_range.0 as f32;
    let hi = spec.depth_range.1 as f32;
    let values = field.into_iter().map(|v| (v as f32).clamp(lo, hi)).collect();
    DepthMap::dense(Grid::new(w, h, values)?)
}

/// A plane anchored at the image center whose values stay within `budget` of `center`.
struct Plane {
    center: f64,
    gx: f64,
    gy: f64,
    cx: f64,
    cy: f64,
}

impl Plane {
    fn random(rng: &mut impl Rng, spec: &SceneSpec) -> Self {
        let (lo, hi) = spec.depth_range;
        let span = hi - lo;
        let center = rng.random_range(lo + 0.25 * span..=hi - 0.25 * span);
        let budget = (center - lo).min(hi - center);
        let cx = (spec.width - 1) as f64 / 2.0;
        let cy = (spec.height - 1) as f64 / 2.0;
        let half_diag = (cx * cx + cy * cy).sqrt();
        let magnitude = rng.random_range(0.2..1.0) * budget / half_diag;
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        Self {
            center,
            gx: magnitude * angle.cos(),
            gy: magnitude * angle.sin(),
            cx,
            cy,
        }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.center + self.gx * (x as f64 - self.cx) + self.gy * (y as f64 - self.cy)
    }
}

/// Random oriented line; `side` reports which half-plane a pixel is in.
struct Line {
    px: f64,
    py: f64,
    nx: f64,
    ny: f64,
}

impl Line {
    fn random(rng: &mut impl Rng, spec: &SceneSpec) -> Self {
        let px = rng.random_range(0.25..0.75) * spec.width as f64;
        let py = rng.random_range(0.25..0.75) * spec.height as f64;
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        Self {
            px,
            py,
            nx: angle.cos(),
            ny: angle.sin(),
        }
    }

    fn side(&self, x: usize, y: usize) -> usize {
        usize::from((x as f64 - self.px) * self.nx + (y as f64 - self.py) * self.ny >= 0.0)
    }
}

fn planes(spec: &SceneSpec) -> Vec<f64> {
    let mut rng = rng(spec.seed);
    let a = Line::random(&mut rng, spec);
    let b = Line::random(&mut rng, spec);
    let regions: Vec<Plane> = (0..4).map(|_| Plane::random(&mut rng, spec)).collect();
    raster(spec, |x, y| regions[2 * a.side(x, y) + b.side(x, y)].at(x, y))
}

fn steps(spec: &SceneSpec) -> Vec<f64> {
    let mut rng = rng(spec.seed);
    let (lo, hi) = spec.depth_range;
    let n = spec.steps;
    let mut levels: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) / n as f64 * (hi - lo)).collect();
    levels.shuffle(&mut rng);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (c, s) = (angle.cos(), angle.sin());
    let project = |x: f64, y: f64| x * c + y * s;
    let (w, h) = ((spec.width - 1) as f64, (spec.height - 1) as f64);
    let corners = [project(0.0, 0.0), project(w, 0.0), project(0.0, h), project(w, h)];
    let pmin = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let pmax = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    raster(spec, |x, y| {
        let t = (project(x as f64, y as f64) - pmin) / (pmax - pmin);
        levels[((t * n as f64) as usize).min(n - 1)]
    })
}

struct Sphere {
    cx: f64,
    cy: f64,
    radius: f64,
    back: f64,
    bulge: f64,
}

fn spheres(spec: &SceneSpec) -> Vec<f64> {
    let mut rng = rng(spec.seed);
    let (lo, hi) = spec.depth_range;
    let span = hi - lo;
    let background = Plane::random(&mut rng, spec);
    let side = spec.width.min(spec.height) as f64;
    let count = rng.random_range(3..=5);
    let balls: Vec<Sphere> = (0..count)
        .map(|_| {
            let bulge = rng.random_range(0.1..0.3) * span;
            Sphere {
                cx: rng.random_range(0.0..spec.width as f64),
                cy: rng.random_range(0.0..spec.height as f64),
                radius: rng.random_range(side / 8.0..side / 3.0),
                back: rng.random_range(lo + bulge..hi),
                bulge,
            }
        })
        .collect();
    raster(spec, |x, y| {
        balls.iter().fold(background.at(x, y), |depth, b| {
            let dx = (x as f64 - b.cx) / b.radius;
            let dy = (y as f64 - b.cy) / b.radius;
            let rho2 = dx * dx + dy * dy;
            if rho2 >= 1.0 {
                return depth;
            }
            depth.min(b.back - b.bulge * (1.0 - rho2).sqrt())
        })
    })
}

fn fractal(spec: &SceneSpec) -> Vec<f64> {
    const OCTAVES: usize = 5;
    const MIN_CELL_PX: f64 = 4.0;
    let mut rng = rng(spec.seed);
    let mut cell = spec.width.max(spec.height) as f64 / 4.0;
    let mut amplitude = 1.0;
    let mut acc = vec![0.0; spec.width * spec.height];
    for octave in 0..OCTAVES {
        // Finer lattices would read as per-pixel noise rather than surface.
        if octave > 0 && cell < MIN_CELL_PX {
            break;
        }
        let lattice = ValueNoise::new(&mut rng, spec.width, spec.height, cell);
        for (i, v) in acc.iter_mut().enumerate() {
            *v += amplitude * lattice.smooth(i % spec.width, i / spec.width);
        }
        cell /= 2.0;
        amplitude *= 0.5;
    }
    let nmin = acc.iter().copied().fold(f64::INFINITY, f64::min);
    let nmax = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = spec.depth_range;
    let span = (nmax - nmin).max(f64::MIN_POSITIVE);
    acc.iter().map(|v| lo + (v - nmin) / span * (hi - lo)).collect()
}

fn raster(spec: &SceneSpec, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            out.push(f(x, y));
        }
    }
    out
}

/// Random lattice values in `[-1, 1]` every `cell` pixels.
struct ValueNoise {
    cell: f64,
    nx: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut impl Rng, width: usize, height: usize, cell: f64) -> Self {
        let nx = (width as f64 / cell).ceil() as usize + 2;
        let ny = (height as f64 / cell).ceil() as usize + 2;
        let values = (0..nx * ny).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self { cell, nx, values }
    }

    fn lattice(&self, x: usize, y: usize, weight: impl Fn(f64) -> f64) -> f64 {
        let fx = x as f64 / self.cell;
        let fy = y as f64 / self.cell;
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (weight(fx - ix as f64), weight(fy - iy as f64));
        let v = |i: usize, j: usize| self.values[j * self.nx + i];
        let top = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
        let bottom = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    fn bilinear(&self, x: usize, y: usize) -> f64 {
        self.lattice(x, y, |t| t)
    }

    fn smooth(&self, x: usize, y: usize) -> f64 {
        self.lattice(x, y, |t| t * t * (3.0 - 2.0 * t))
    }
}

/// Structural error applied on top of the affine image of ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distortion {
    None,
    /// `d ↦ d_min · (d / d_min)^gamma`, with `d_min` the smallest affine value,
    /// so the near end of the range is preserved.
    Gamma {
        gamma: f64,
    },
    /// Additive bilinear value noise with lattice spacing `cell_px`.
    SmoothNoise {
        amplitude: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_noise_cell")]
        cell_px: f64,
    },
}

fn default_noise_cell() -> f64 {
    16.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSpec {
    /// `(a, b)` with `a > 0`: the undistorted prediction is `a * gt + b`.
    #[serde(default = "default_affine")]
    pub affine: (f64, f64),
    #[serde(default = "default_distortion")]
    pub distortion: Distortion,
}

fn default_affine() -> (f64, f64) {
    (1.0, 0.0)
}

fn default_distortion() -> Distortion {
    Distortion::None
}

impl Default for PredictionSpec {
    fn default() -> Self {
        Self {
            affine: default_affine(),
            distortion: Distortion::None,
        }
    }
}

impl PredictionSpec {
    pub fn affine(a: f64, b: f64) -> Self {
        Self {
            affine: (a, b),
            distortion: Distortion::None,
        }
    }

    pub fn with_distortion(mut self, distortion: Distortion) -> Self {
        self.distortion = distortion;
        self
    }
}

/// `distort(a * gt + b)` at every pixel of a fully valid ground truth.
pub fn derive_prediction(gt: &DepthMap, spec: &PredictionSpec) -> Result<RelativePrediction> {
    if !gt.is_fully_valid() {
        return Err(bad_spec("prediction needs a fully valid ground truth"));
    }
    let (a, b) = spec.affine;
    if !(a > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(bad_spec(format!("affine map needs a > 0 and finite b, got ({a}, {b})")));
    }
    let (w, h) = gt.dims();
    let mut values: Vec<f64> = gt.depth().values().iter().map(|&d| a * d as f64 + b).collect();
    match spec.distortion {
        Distortion::None => {}
        Distortion::Gamma { gamma } => {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(bad_spec(format!("gamma must be positive, got {gamma}")));
            }
            let dmin = values.iter().copied().fold(f64::INFINITY, f64::min);
            if dmin <= 0.0 {
                return Err(bad_spec(format!(
                    "gamma distortion needs positive affine values, minimum is {dmin}"
                )));
            }
            for v in &mut values {
                *v = dmin * (*v / dmin).powf(gamma);
            }
        }
        Distortion::SmoothNoise {
            amplitude,
            seed,
            cell_px,
        } => {
            if !(amplitude >= 0.0 && amplitude.is_finite() && cell_px >= 1.0) {
                return Err(bad_spec("smooth noise needs amplitude >= 0 and cell_px >= 1"));
            }
            let noise = ValueNoise::new(&mut rng(seed), w, h, cell_px);
            for (i, v) in values.iter_mut().enumerate() {
                *v += amplitude * noise.bilinear(i % w, i / w);
            }
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad_spec("prediction has non-finite values"));
    }
    RelativePrediction::from_values(w, h, values)
}
