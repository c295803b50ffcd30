//! Random-walk estimates for untilted walks confined to a tube: stay-positive
//! probabilities and intersection counts of two independent bridges.

use rayon::prelude::*;

use crate::bridge::{path_log_z, BridgeEnsemble, Constraint};
use crate::error::{Error, Result};
use crate::model::WalkKernel;
use crate::rng::stream_rng;
use crate::stats::mean_stderr;

/// Highest admissible height strictly below `2η√n`.
pub fn tube_top(n: usize, eta: f64) -> usize {
    let cap = 2.0 * eta * (n as f64).sqrt();
    (cap.ceil() as usize).saturating_sub(1).max(1)
}

/// Largest endpoint allowed, `⌊η√n⌋`.
pub fn endpoint_limit(n: usize, eta: f64) -> usize {
    (eta * (n as f64).sqrt()).floor() as usize
}

/// Probability that the walk started at `X_1 = x` sits at `y` at time `m`
/// while `0 < X_i < cap` for `1 ≤ i ≤ m` (`cap = None`: no upper wall).
pub fn confined_walk_probability(kernel: &WalkKernel, x: usize, y: usize, m: usize, cap: Option<usize>) -> Result<f64> {
    if m < 1 {
        return Err(Error::param("m", "must be at least 1"));
    }
    let reach = (x + y + (m - 1) * kernel.range()) / 2 + kernel.range() + 1;
    let top = cap.map_or(reach, |c| c.min(reach));
    if x > top || y > top {
        return Ok(0.0);
    }
    let weights = vec![1.0; top];
    let z = path_log_z(kernel, &weights, x, y, m - 1, None)?;
    Ok(z.log_z.exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StayPositiveRow {
    pub n: usize,
    pub m: usize,
    pub x: usize,
    pub y: usize,
    pub probability: f64,
    /// `p · n^{3/2} / (x y)`.
    pub ratio: f64,
    pub uncapped: f64,
    /// `p_uncapped / p`, at least 1.
    pub cap_effect: f64,
}

/// Exact `𝗉(R^{x,y}_{n,m}[η])` over a grid of `n` and `m = ⌈f n⌉` for each
/// fraction `f ∈ [1/3, 1]`.
pub fn stay_positive_scaling(
    kernel: &WalkKernel,
    ns: &[usize],
    x: usize,
    y: usize,
    m_fractions: &[f64],
    eta: f64,
) -> Result<Vec<StayPositiveRow>> {
    let jobs: Vec<(usize, f64)> = ns.iter().flat_map(|&n| m_fractions.iter().map(move |&f| (n, f))).collect();
    jobs.par_iter()
        .map(|&(n, f)| {
            if !(1.0 / 3.0 - 1e-12..=1.0).contains(&f) {
                return Err(Error::param("m_fractions", "must lie in [1/3, 1]"));
            }
            let limit = endpoint_limit(n, eta);
            if x < 1 || y < 1 || x > limit || y > limit {
                return Err(Error::param(
                    "x, y",
                    format!("must lie in [1, eta sqrt(n)] = [1, {limit}] for n = {n}"),
                ));
            }
            let m = ((f * n as f64).ceil() as usize).max(1);
            let probability = confined_walk_probability(kernel, x, y, m, Some(tube_top(n, eta)))?;
            let uncapped = confined_walk_probability(kernel, x, y, m, None)?;
            Ok(StayPositiveRow {
                n,
                m,
                x,
                y,
                probability,
                ratio: probability * (n as f64).powf(1.5) / (x * y) as f64,
                uncapped,
                cap_effect: uncapped / probability,
            })
        })
        .collect()
}

/// Endpoints as fractions of `η√n`: `(x, y)` for the first walk and `(z, w)`
/// for the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeetingEndpoints {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeetingRow {
    pub n: usize,
    pub endpoints: [usize; 4],
    pub samples: usize,
    pub meeting: f64,
    pub meeting_stderr: f64,
    /// `E[𝒩]` from the exact marginals.
    pub mean_count_exact: f64,
    pub mean_count: f64,
    pub second_moment: f64,
    /// `(1 − α)² E[𝒩]² / E[𝒩²]` at `α = 1/2`, from the sampled moments.
    pub pz_floor: f64,
}

impl MeetingRow {
    pub fn mean_over_sqrt_n(&self) -> f64 {
        self.mean_count_exact / (self.n as f64).sqrt()
    }

    pub fn second_over_n(&self) -> f64 {
        self.second_moment / self.n as f64
    }
}

fn scaled_endpoint(f: f64, n: usize, eta: f64) -> Result<usize> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::param("endpoints", "fractions must lie in (0, 1]"));
    }
    Ok(((f * eta * (n as f64).sqrt()).round() as usize).max(1))
}

/// Time range `[n/3, 2n/3]` (1-based times) of the intersection count.
fn count_range(n: usize) -> std::ops::RangeInclusive<usize> {
    n.div_ceil(3)..=(2 * n) / 3
}

fn confined_bridge(kernel: &WalkKernel, a: usize, b: usize, n: usize, eta: f64) -> Result<BridgeEnsemble> {
    let top = tube_top(n, eta);
    BridgeEnsemble::new(kernel, vec![1.0; top], a, b, n - 1, 1, Some(&Constraint::tube(n - 1, 1, top)))
}

/// Two independent walks `X¹: x → y`, `X²: z → w` over times `1..=n`,
/// conditioned on `0 < X_i < 2η√n`, sampled exactly. Reports the meeting
/// probability `P(∃ i: X¹_i = X²_i)` and moments of
/// `𝒩 = #{ℓ ∈ [n/3, 2n/3]: X¹_ℓ = X²_ℓ ≤ η√n}`.
pub fn meeting_probability(
    kernel: &WalkKernel,
    ns: &[usize],
    endpoints: MeetingEndpoints,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<MeetingRow>> {
    if samples < 2 {
        return Err(Error::param("samples", "need at least 2"));
    }
    ns.iter()
        .enumerate()
        .map(|(cell, &n)| {
            if n < 3 {
                return Err(Error::param("n", "must be at least 3"));
            }
            let ends = [
                scaled_endpoint(endpoints.x, n, eta)?,
                scaled_endpoint(endpoints.y, n, eta)?,
                scaled_endpoint(endpoints.z, n, eta)?,
                scaled_endpoint(endpoints.w, n, eta)?,
            ];
            let first = confined_bridge(kernel, ends[0], ends[1], n, eta)?;
            let second = confined_bridge(kernel, ends[2], ends[3], n, eta)?;
            let level = endpoint_limit(n, eta);
            let range = count_range(n);

            let (m1, m2) = (first.marginals()?, second.marginals()?);
            let mean_count_exact: f64 = range
                .clone()
                .map(|l| (1..=level.min(first.size())).map(|x| m1[l - 1][x - 1] * m2[l - 1][x - 1]).sum::<f64>())
                .sum();

            let cell_seed = seed.wrapping_add(cell as u64);
            let draws: Vec<(f64, f64)> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(cell_seed, i as u64);
                    let a = first.sample(&mut rng)?;
                    let b = second.sample(&mut rng)?;
                    let met = a.values.iter().zip(&b.values).any(|(p, q)| p == q);
                    let count = range
                        .clone()
                        .filter(|&l| {
                            let (p, q) = (a.values[l - 1], b.values[l - 1]);
                            p == q && p as usize <= level
                        })
                        .count();
                    Ok((if met { 1.0 } else { 0.0 }, count as f64))
                })
                .collect::<Result<Vec<_>>>()?;
            let met: Vec<f64> = draws.iter().map(|d| d.0).collect();
            let counts: Vec<f64> = draws.iter().map(|d| d.1).collect();
            let squares: Vec<f64> = counts.iter().map(|c| c * c).collect();
            let (meeting, meeting_stderr) = mean_stderr(&met);
            let (mean_count, _) = mean_stderr(&counts);
            let (second_moment, _) = mean_stderr(&squares);
            let pz_floor = if second_moment > 0.0 {
                0.25 * mean_count * mean_count / second_moment
            } else {
                0.0
            };
            Ok(MeetingRow {
                n,
                endpoints: ends,
                samples,
                meeting,
                meeting_stderr,
                mean_count_exact,
                mean_count,
                second_moment,
                pz_floor,
            })
        })
        .collect()
}
