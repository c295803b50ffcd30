//! Census of η-good intervals for a pair of paths on a common time window.

use crate::chain::LatticePath;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EtaGoodCensus {
    /// Number `m` of full intervals of length `⌈H²⌉`.
    pub intervals: usize,
    pub interval_length: usize,
    pub good: Vec<bool>,
    pub good_count: usize,
    /// Triples `(I_{3k+1}, I_{3k+2}, I_{3k+3})` where both paths dip below
    /// `ηH` in the outer two intervals.
    pub potentially_good: usize,
    /// Good intervals of the form `I_{3k+2}`.
    pub middle_good: usize,
    /// Intervals on which each path stays above `ηH`.
    pub far_from_wall: [usize; 2],
}

impl EtaGoodCensus {
    pub fn middle_slots(&self) -> usize {
        (self.intervals + 1) / 3
    }

    pub fn middle_fraction(&self) -> f64 {
        self.middle_good as f64 / self.middle_slots().max(1) as f64
    }
}

/// Splits the common window into `⌊len / ⌈H²⌉⌋` intervals `I_1, I_2, …` and
/// classifies each. `I_k` is η-good when both paths stay below `2ηH` on it
/// and both sit below `ηH` at its two end-points.
pub fn eta_good_census(first: &LatticePath, second: &LatticePath, eta: f64, big_h: f64) -> Result<EtaGoodCensus> {
    if first.start_index != second.start_index || first.values.len() != second.values.len() {
        return Err(Error::param("paths", "must share the time window"));
    }
    let length = (big_h * big_h).ceil().max(1.0) as usize;
    let intervals = first.values.len() / length;
    if intervals < 3 {
        return Err(Error::param(
            "paths",
            format!("window of {} steps holds fewer than 3 intervals of length {length}", first.values.len()),
        ));
    }
    let low = eta * big_h;
    let high = 2.0 * eta * big_h;
    let slice = |p: &LatticePath, k: usize| -> Vec<f64> {
        p.values[k * length..(k + 1) * length].iter().map(|&x| x as f64).collect()
    };
    let mut good = Vec::with_capacity(intervals);
    let mut dips = Vec::with_capacity(intervals);
    let mut far = [0usize; 2];
    for k in 0..intervals {
        let parts = [slice(first, k), slice(second, k)];
        let confined = parts.iter().all(|s| s.iter().all(|&x| x < high));
        let ends_low = parts.iter().all(|s| s[0] < low && s[length - 1] < low);
        good.push(confined && ends_low);
        dips.push(parts.iter().all(|s| s.iter().any(|&x| x < low)));
        for (j, s) in parts.iter().enumerate() {
            if s.iter().all(|&x| x > low) {
                far[j] += 1;
            }
        }
    }
    // 0-based index 3k + 1 is I_{3k+2}.
    let mut potentially_good = 0;
    let mut middle_good = 0;
    let mut k = 0;
    while 3 * k + 1 < intervals {
        if 3 * k + 2 < intervals && dips[3 * k] && dips[3 * k + 2] {
            potentially_good += 1;
        }
        if good[3 * k + 1] {
            middle_good += 1;
        }
        k += 1;
    }
    Ok(EtaGoodCensus {
        intervals,
        interval_length: length,
        good_count: good.iter().filter(|&&g| g).count(),
        good,
        potentially_good,
        middle_good,
        far_from_wall: far,
    })
}
