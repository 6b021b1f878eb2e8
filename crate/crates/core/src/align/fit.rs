use crate::error::{Error, Result};

/// Default threshold on the weighted prediction spread `Σw(p − p̄)²` below
/// which a fit is treated as degenerate.
pub const DEFAULT_MIN_SCALE_VARIANCE: f64 = 1e-12;

/// One support point of a local fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSample {
    /// Relative prediction at the support pixel.
    pub pred: f64,
    /// Metric prior depth at the support pixel, meters.
    pub prior: f64,
    pub weight: f64,
}

impl FitSample {
    pub fn new(pred: f64, prior: f64, weight: f64) -> Self {
        Self { pred, prior, weight }
    }
}

impl From<(f64, f64, f64)> for FitSample {
    fn from((pred, prior, weight): (f64, f64, f64)) -> Self {
        Self::new(pred, prior, weight)
    }
}

/// Scale and shift mapping prediction units to meters: `depth = scale * pred + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub scale: f64,
    pub shift: f64,
    /// Set when the supports carried no prediction spread and the scale was
    /// fixed to the fallback instead of estimated.
    pub degenerate: bool,
}

impl AffineFit {
    #[inline]
    pub fn apply(&self, pred: f64) -> f64 {
        self.scale * pred + self.shift
    }
}

/// Weighted least-squares fit of `prior ≈ scale * pred + shift`.
///
/// Uses the default degeneracy threshold and a unit fallback scale, so a
/// degenerate result is a pure shift (`scale == 1`).
pub fn fit_affine(samples: &[FitSample]) -> Result<AffineFit> {
    fit_affine_with(samples, DEFAULT_MIN_SCALE_VARIANCE, 1.0)
}

/// Closed-form weighted regression with explicit degeneracy handling.
///
/// With weighted means `p̄`, `q̄`:
/// `scale = Σw(p − p̄)(q − q̄) / Σw(p − p̄)²`, `shift = q̄ − scale · p̄`.
/// When `Σw(p − p̄)² < min_scale_variance` the scale is pinned to
/// `fallback_scale` and the shift becomes the weighted mean of
/// `q − fallback_scale · p`.
pub fn fit_affine_with(samples: &[FitSample], min_scale_variance: f64, fallback_scale: f64) -> Result<AffineFit> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut sum_w = 0.0;
    let mut sum_wp = 0.0;
    let mut sum_wq = 0.0;
    for s in samples {
        if !(s.weight > 0.0 && s.weight.is_finite() && s.pred.is_finite() && s.prior.is_finite()) {
            return Err(Error::BadSpec(format!("invalid fit sample {s:?}")));
        }
        sum_w += s.weight;
        sum_wp += s.weight * s.pred;
        sum_wq += s.weight * s.prior;
    }
    let mean_p = sum_wp / sum_w;
    let mean_q = sum_wq / sum_w;

    let mut spp = 0.0;
    let mut spq = 0.0;
    for s in samples {
        let dp = s.pred - mean_p;
        spp += s.weight * dp * dp;
        spq += s.weight * dp * (s.prior - mean_q);
    }

    if spp < min_scale_variance || spp == 0.0 {
        return Ok(AffineFit {
            scale: fallback_scale,
            shift: mean_q - fallback_scale * mean_p,
            degenerate: true,
        });
    }
    let scale = spq / spp;
    Ok(AffineFit {
        scale,
        shift: mean_q - scale * mean_p,
        degenerate: false,
    })
}
