//! Finite-dimensional distributions of the rescaled lattice processes
//! `x_λ(t) = h X_{H² t}` (linear between lattice times) against the
//! Ferrari–Spohn diffusion.

use rayon::prelude::*;

use crate::bridge::BridgeEnsemble;
use crate::chain::GroundStateChain;
use crate::continuum::FsDiffusionModel;
use crate::error::{Error, Result};
use crate::model::ScaleInfo;
use crate::rng::stream_rng;
use crate::stats::{binned_tv, ks_one_sample, wasserstein1_to_cdf, BinGrid, EmpiricalDistribution};

pub const MIN_SAMPLES: usize = 1000;

fn check_request(times: &[f64], samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::param(
            "samples",
            format!("need at least {MIN_SAMPLES}, got {samples}"),
        ));
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times", "must be a nonempty nondecreasing list"));
    }
    Ok(())
}

/// Rescaled value of a lattice trajectory at macroscopic time `t`, where
/// `values[k]` sits at lattice time `first + k`.
fn rescaled_at(values: &[usize], first: i64, t: f64, scale: &ScaleInfo) -> f64 {
    let s = t * scale.time_scale() - first as f64;
    let k = (s.floor().max(0.0) as usize).min(values.len() - 1);
    let w = (s - k as f64).clamp(0.0, 1.0);
    let next = values[(k + 1).min(values.len() - 1)];
    let x = values[k] as f64 * (1.0 - w) + next as f64 * w;
    x * scale.small_h
}

/// Samples `(x(s_1), …, x(s_k))` from the stationary ground-state chain.
/// Sample `i` uses stream `i` of `seed`.
pub fn chain_fdd_samples(chain: &GroundStateChain, times: &[f64], samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_request(times, samples)?;
    let scale = *chain.scale();
    let first = (times[0] * scale.time_scale()).floor() as i64;
    let last = (times[times.len() - 1] * scale.time_scale()).ceil() as i64;
    let steps = (last - first) as usize + 1;
    Ok((0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let states = chain.run(steps, &mut rng);
            let values: Vec<usize> = states.into_iter().map(|x| x + 1).collect();
            times
                .iter()
                .map(|&t| rescaled_at(&values, first, t, &scale))
                .collect()
        })
        .collect())
}

/// Samples the rescaled bridge at `times` (lattice time 0 is the middle of
/// the bridge).
pub fn bridge_fdd_samples(
    ensemble: &BridgeEnsemble,
    scale: &ScaleInfo,
    times: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_request(times, samples)?;
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let path = ensemble.sample(&mut rng)?;
            let values: Vec<usize> = path.values.iter().map(|&x| x as usize).collect();
            Ok(times
                .iter()
                .map(|&t| rescaled_at(&values, path.start_index, t, scale))
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDistance {
    pub time: f64,
    pub ks: f64,
    pub w1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDistance {
    pub first: f64,
    pub second: f64,
    pub tv: f64,
}

/// Distances of a sample of time vectors: one-time marginals against `φ₀²`,
/// and (if a reference sample is given) binned pair TV against it.
#[derive(Debug, Clone, PartialEq)]
pub struct FddComparison {
    pub marginals: Vec<MarginalDistance>,
    pub pairs: Vec<PairDistance>,
}

pub fn column(samples: &[Vec<f64>], j: usize) -> Vec<f64> {
    samples.iter().map(|row| row[j]).collect()
}

pub fn fdd_compare(
    sample: &[Vec<f64>],
    times: &[f64],
    model: &FsDiffusionModel,
    reference: Option<&[Vec<f64>]>,
    grid: BinGrid,
) -> Result<FddComparison> {
    check_request(times, sample.len())?;
    let upper = model.spectrum().cutoff;
    let marginals = times
        .iter()
        .enumerate()
        .map(|(j, &time)| {
            let emp = EmpiricalDistribution::new(column(sample, j))?;
            Ok(MarginalDistance {
                time,
                ks: ks_one_sample(&emp, |r| model.stationary_cdf(r)),
                w1: wasserstein1_to_cdf(&emp, |r| model.stationary_cdf(r), upper, 20_000),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    if let Some(reference) = reference {
        for i in 0..times.len() {
            for j in i + 1..times.len() {
                let a: Vec<(f64, f64)> = sample.iter().map(|r| (r[i], r[j])).collect();
                let b: Vec<(f64, f64)> = reference.iter().map(|r| (r[i], r[j])).collect();
                pairs.push(PairDistance {
                    first: times[i],
                    second: times[j],
                    tv: binned_tv(&a, &b, grid),
                });
            }
        }
    }
    Ok(FddComparison { marginals, pairs })
}
