//! Modulus-of-continuity probe for the rescaled stationary chain.

use rayon::prelude::*;

use crate::chain::GroundStateChain;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessRow {
    pub lambda: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Estimate of `P(max_{0≤t≤δ} |x(t) − x(0)| > ε)`.
    pub estimate: f64,
    pub ratio: f64,
}

/// For every `(ε, δ)` pair, the fraction of stationary segments whose
/// oscillation over `[0, δ]` exceeds `ε`. All `δ` are read off the same
/// segments, so the estimates are monotone in `δ` by construction.
pub fn tightness_probe(
    chain: &GroundStateChain,
    epsilons: &[f64],
    deltas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<TightnessRow>> {
    if samples == 0 || deltas.is_empty() || epsilons.is_empty() {
        return Err(Error::param("tightness", "need samples, deltas and epsilons"));
    }
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::param("deltas", "must be positive"));
    }
    let scale = *chain.scale();
    let h = scale.small_h;
    let h2 = scale.time_scale();
    let spans: Vec<f64> = deltas.iter().map(|d| d * h2).collect();
    let steps = spans.iter().cloned().fold(0.0, f64::max).ceil() as usize;

    // Per sample: oscillation at each δ.
    let oscillations: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let path = chain.run(steps, &mut rng);
            let x0 = path[0] as f64;
            spans
                .iter()
                .map(|&span| {
                    let full = span.floor() as usize;
                    let mut m = path[..=full]
                        .iter()
                        .map(|&x| (x as f64 - x0).abs())
                        .fold(0.0, f64::max);
                    let w = span - full as f64;
                    if w > 0.0 {
                        let end = path[full] as f64 * (1.0 - w) + path[full + 1] as f64 * w;
                        m = m.max((end - x0).abs());
                    }
                    m * h
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for &epsilon in epsilons {
        for (j, &delta) in deltas.iter().enumerate() {
            let hits = oscillations.iter().filter(|o| o[j] > epsilon).count();
            let estimate = hits as f64 / samples as f64;
            rows.push(TightnessRow {
                lambda: scale.lambda,
                epsilon,
                delta,
                estimate,
                ratio: estimate / delta,
            });
        }
    }
    Ok(rows)
}
