//! Brute-force reference implementations, written from the definitions and
//! sharing no code with the library.

/// Dense fill by exhaustive neighbor search and closed-form normal equations.
///
/// `prior[i]` is `Some(depth)` at valid pixels; `pred` is row-major.
pub fn prefill(width: usize, prior: &[Option<f64>], pred: &[f64], k: usize, inverse_distance: bool) -> Vec<f64> {
    const MIN_SPREAD: f64 = 1e-12;
    const FLOOR: f64 = 1e-4;
    let valid: Vec<usize> = (0..prior.len()).filter(|&i| prior[i].is_some()).collect();

    // Unweighted fit over every valid pixel supplies the scale for flat supports.
    let all: Vec<(f64, f64, f64)> = valid.iter().map(|&i| (pred[i], prior[i].unwrap(), 1.0)).collect();
    let global_scale = match solve(&all, MIN_SPREAD) {
        Some((s, _)) => s,
        None => 1.0,
    };

    (0..prior.len())
        .map(|i| {
            if let Some(v) = prior[i] {
                return v;
            }
            let (qx, qy) = ((i % width) as i64, (i / width) as i64);
            let mut order: Vec<(i64, usize)> = valid
                .iter()
                .map(|&j| {
                    let (dx, dy) = ((j % width) as i64 - qx, (j / width) as i64 - qy);
                    (dx * dx + dy * dy, j)
                })
                .collect();
            order.sort();
            let support: Vec<(f64, f64, f64)> = order
                .iter()
                .take(k)
                .map(|&(d2, j)| {
                    let w = if inverse_distance {
                        1.0 / (d2 as f64).sqrt()
                    } else {
                        1.0
                    };
                    (pred[j], prior[j].unwrap(), w)
                })
                .collect();
            let (s, t) = solve(&support, MIN_SPREAD).unwrap_or_else(|| {
                let sw: f64 = support.iter().map(|r| r.2).sum();
                let mq: f64 = support.iter().map(|r| r.2 * r.1).sum::<f64>() / sw;
                let mp: f64 = support.iter().map(|r| r.2 * r.0).sum::<f64>() / sw;
                (global_scale, mq - global_scale * mp)
            });
            (s * pred[i] + t).max(FLOOR)
        })
        .collect()
}

/// Weighted least squares by Cramer's rule; `None` when the weighted spread of
/// the predictions is below `min_spread`.
pub fn solve(rows: &[(f64, f64, f64)], min_spread: f64) -> Option<(f64, f64)> {
    let (mut sw, mut sp, mut sq, mut spp, mut spq) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(p, q, w) in rows {
        sw += w;
        sp += w * p;
        sq += w * q;
        spp += w * p * p;
        spq += w * p * q;
    }
    let det = sw * spp - sp * sp;
    let spread = det / sw;
    if spread.is_nan() || spread < min_spread || det == 0.0 {
        return None;
    }
    Some(((sw * spq - sp * sq) / det, (spp * sq - sp * spq) / det))
}

pub fn absrel(pairs: &[(f64, f64)]) -> f64 {
    100.0 * pairs.iter().map(|&(p, g)| (p - g).abs() / g).sum::<f64>() / pairs.len() as f64
}

/// Scale-invariant log error, textbook form `sqrt(mean g^2 - lambda (mean g)^2)`.
pub fn silog(pairs: &[(f64, f64)], lambda: f64) -> f64 {
    let n = pairs.len() as f64;
    let g: Vec<f64> = pairs.iter().map(|&(p, t)| p.ln() - t.ln()).collect();
    let m2 = g.iter().map(|x| x * x).sum::<f64>() / n;
    let m1 = g.iter().sum::<f64>() / n;
    (m2 - lambda * m1 * m1).max(0.0).sqrt()
}
