//! Empirical distributions and the distances used by the experiments.

use crate::error::{Error, Result};

/// Sorted sample with an ECDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("samples", "empty sample"));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::param("samples", "NaN in sample"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{x_i ≤ x} / n`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }
}

/// `sup_x |F_n(x) − F(x)|` for a continuous reference CDF.
pub fn ks_one_sample(sample: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sample.len() as f64;
    sample
        .sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.sorted.len() && j < b.sorted.len() {
        let x = a.sorted[i].min(b.sorted[j]);
        while i < a.sorted.len() && a.sorted[i] <= x {
            i += 1;
        }
        while j < b.sorted.len() && b.sorted[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 99% critical value of the two-sample KS statistic.
pub fn ks_critical_99(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.628 * ((n + m) / (n * m)).sqrt()
}

/// `∫ |F_a − F_b|`.
pub fn wasserstein1(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let mut points: Vec<f64> = a.sorted.iter().chain(&b.sorted).copied().collect();
    points.sort_by(f64::total_cmp);
    points
        .windows(2)
        .map(|w| (a.ecdf(w[0]) - b.ecdf(w[0])).abs() * (w[1] - w[0]))
        .sum()
}

/// `∫_0^∞ |F_n − F|` for a reference CDF supported in `[0, upper]`, by the
/// midpoint rule on `cells` cells.
pub fn wasserstein1_to_cdf(
    sample: &EmpiricalDistribution,
    cdf: impl Fn(f64) -> f64,
    upper: f64,
    cells: usize,
) -> f64 {
    let top = upper.max(*sample.sorted.last().unwrap());
    let dx = top / cells as f64;
    (0..cells)
        .map(|i| {
            let x = (i as f64 + 0.5) * dx;
            (sample.ecdf(x) - cdf(x)).abs() * dx
        })
        .sum()
}

/// `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Square grid of `bins × bins` equal cells on `[0, upper]²`; values outside
/// are assigned to the nearest edge cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    pub upper: f64,
    pub bins: usize,
}

impl BinGrid {
    pub fn cell(&self, x: f64) -> usize {
        let c = (x / self.upper * self.bins as f64).floor();
        if c < 0.0 {
            0
        } else {
            (c as usize).min(self.bins - 1)
        }
    }

    /// Normalized 2-D histogram, row-major.
    pub fn histogram(&self, pairs: &[(f64, f64)]) -> Vec<f64> {
        let mut h = vec![0.0; self.bins * self.bins];
        for &(x, y) in pairs {
            h[self.cell(x) * self.bins + self.cell(y)] += 1.0;
        }
        let n = pairs.len() as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    }
}

/// Binned TV between two samples of pairs.
pub fn binned_tv(a: &[(f64, f64)], b: &[(f64, f64)], grid: BinGrid) -> f64 {
    total_variation(&grid.histogram(a), &grid.histogram(b))
}

/// Sample mean and its standard error.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emp(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ecdf_and_ks() {
        let e = emp(&[0.1, 0.4, 0.4, 0.9]);
        assert_eq!(e.ecdf(0.0), 0.0);
        assert_eq!(e.ecdf(0.4), 0.75);
        assert_eq!(e.ecdf(1.0), 1.0);
        // Against U(0,1): the largest gap is at 0.4 (F_n jumps 0.25 → 0.75).
        assert!((ks_one_sample(&e, |x| x.clamp(0.0, 1.0)) - 0.35).abs() < 1e-15);
        assert_eq!(ks_two_sample(&e, &e), 0.0);
        let f = emp(&[2.0, 3.0]);
        assert_eq!(ks_two_sample(&e, &f), 1.0);
        assert!(EmpiricalDistribution::new(vec![]).is_err());
    }

    #[test]
    fn w1_shift() {
        let a = emp(&[0.0, 1.0, 2.0]);
        let b = emp(&[0.5, 1.5, 2.5]);
        assert!((wasserstein1(&a, &b) - 0.5).abs() < 1e-15);
        let point = emp(&[1.0]);
        let w = wasserstein1_to_cdf(&point, |x| x.clamp(0.0, 2.0) / 2.0, 2.0, 2000);
        assert!((w - 0.5).abs() < 1e-6);
    }

    #[test]
    fn binned() {
        let g = BinGrid { upper: 1.0, bins: 2 };
        assert_eq!(g.cell(-1.0), 0);
        assert_eq!(g.cell(0.7), 1);
        assert_eq!(g.cell(5.0), 1);
        let a = [(0.1, 0.1), (0.9, 0.9)];
        let b = [(0.1, 0.9), (0.9, 0.9)];
        assert!((binned_tv(&a, &b, g) - 0.5).abs() < 1e-15);
        assert!((ks_critical_99(10_000, 10_000) - 0.023_02).abs() < 1e-4);
    }
}
