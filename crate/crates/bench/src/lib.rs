//! Shared fixtures for the benchmarks.

use priorfill::scenegen::{derive_prediction, generate_scene, Distortion, PredictionSpec, SceneKind, SceneSpec};
use priorfill::synth::sample_sparse_random;
use priorfill::{DepthMap, RelativePrediction};

/// A fractal scene with a gamma-distorted prediction and an `n`-point sparse prior.
pub fn sparse_fixture(width: usize, height: usize, n: usize, seed: u64) -> (DepthMap, DepthMap, RelativePrediction) {
    let gt = generate_scene(&SceneSpec::new(SceneKind::Fractal, width, height, (1.0, 20.0), seed))
        .expect("valid scene spec");
    let spec = PredictionSpec::affine(0.5, 1.0).with_distortion(Distortion::Gamma { gamma: 1.3 });
    let pred = derive_prediction(&gt, &spec).expect("dense ground truth");
    let prior = sample_sparse_random(&gt, n, seed ^ 0x9e37_79b9).expect("enough pixels");
    (gt, prior, pred)
}
