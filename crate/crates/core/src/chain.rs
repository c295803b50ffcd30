//! The ground-state chain: Doob transform of `T_λ = T̃_λ / E_λ` by its Perron
//! eigenfunctions, stationary sampling and the diffusive rescaling.

use rand::Rng;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::model::ScaleInfo;
use crate::rng::stream_rng;
use crate::spectral::TransferSpectrum;

/// Largest row-sum defect tolerated before renormalization.
pub const ROW_SUM_TOL: f64 = 1e-8;

/// `π(x, y) = φ(x)⁻¹ T(x, y) φ(y)` and its reversal `π*` built from `φ*`, with
/// invariant law `μ = c φ φ*`.
#[derive(Debug, Clone)]
pub struct GroundStateChain {
    pub pi: BandedMatrix,
    pub pi_star: BandedMatrix,
    pub mu: Vec<f64>,
    /// Largest row-sum defect before renormalization.
    pub row_sum_defect: f64,
    pi_cumulative: Vec<f64>,
    mu_cumulative: Vec<f64>,
    spectrum: TransferSpectrum,
}

fn doob(matrix: &BandedMatrix, weight: &[f64], eigenvalue: f64) -> Result<(BandedMatrix, f64)> {
    let n = matrix.dim();
    let mut out = BandedMatrix::zeros(n, matrix.lower(), matrix.upper());
    let mut defect: f64 = 0.0;
    for x in 0..n {
        let cols = matrix.row_range(x);
        let scale = 1.0 / (eigenvalue * weight[x]);
        let row: Vec<f64> = cols
            .clone()
            .zip(matrix.row(x))
            .map(|(y, a)| a * weight[y] * scale)
            .collect();
        let total: f64 = row.iter().sum();
        let deviation = (total - 1.0).abs();
        if deviation > ROW_SUM_TOL {
            return Err(Error::RowSumDeviation {
                state: x + 1,
                deviation,
            });
        }
        defect = defect.max(deviation);
        for (dst, v) in out.row_mut(x).iter_mut().zip(row) {
            *dst = v / total;
        }
    }
    Ok((out, defect))
}

fn cumulative_rows(m: &BandedMatrix) -> Vec<f64> {
    let width = m.lower() + m.upper() + 1;
    let mut cum = vec![0.0; m.dim() * width];
    for x in 0..m.dim() {
        let mut acc = 0.0;
        for (k, v) in m.row(x).iter().enumerate() {
            acc += v;
            cum[x * width + k] = acc;
        }
    }
    cum
}

pub fn doob_transform(spectrum: &TransferSpectrum) -> Result<GroundStateChain> {
    let a = spectrum.operator().matrix();
    let (pi, d1) = doob(a, &spectrum.phi, spectrum.eigenvalue)?;
    let (pi_star, d2) = doob(&a.transpose(), &spectrum.phi_star, spectrum.eigenvalue)?;
    let mu = spectrum.invariant_measure();
    let mut mu_cumulative = Vec::with_capacity(mu.len());
    let mut acc = 0.0;
    for v in &mu {
        acc += v;
        mu_cumulative.push(acc);
    }
    Ok(GroundStateChain {
        pi_cumulative: cumulative_rows(&pi),
        pi,
        pi_star,
        mu,
        mu_cumulative,
        row_sum_defect: d1.max(d2),
        spectrum: spectrum.clone(),
    })
}

impl GroundStateChain {
    pub fn spectrum(&self) -> &TransferSpectrum {
        &self.spectrum
    }

    pub fn scale(&self) -> &ScaleInfo {
        self.spectrum.scale()
    }

    pub fn size(&self) -> usize {
        self.mu.len()
    }

    /// `π(x, y)` in lattice coordinates.
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        if x == 0 || y == 0 {
            0.0
        } else {
            self.pi.get(x - 1, y - 1)
        }
    }

    /// `π*(x, y)` in lattice coordinates.
    pub fn reversed_transition(&self, x: usize, y: usize) -> f64 {
        if x == 0 || y == 0 {
            0.0
        } else {
            self.pi_star.get(x - 1, y - 1)
        }
    }

    /// `‖μπ − μ‖₁`.
    pub fn stationarity_defect(&self) -> f64 {
        self.pi
            .vec_mul(&self.mu)
            .iter()
            .zip(&self.mu)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// `max |μ(x)π(x,y) − μ(y)π*(y,x)|` over stored entries.
    pub fn reversal_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.size() {
            for (y, p) in self.pi.row_range(x).zip(self.pi.row(x)) {
                let lhs = self.mu[x] * p;
                let rhs = self.mu[y] * self.pi_star.get(y, x);
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst
    }

    /// `½ Σ_{x,y} π̂(x,y) (g(x) − g(y))² μ(x)` with `π̂ = (π + π*)/2`.
    pub fn symmetrized_dirichlet_form(&self, g: &[f64]) -> f64 {
        let mut total = 0.0;
        for x in 0..self.size() {
            let lo = self.pi.row_range(x).start.min(self.pi_star.row_range(x).start);
            let hi = self.pi.row_range(x).end.max(self.pi_star.row_range(x).end);
            for y in lo..hi {
                let hat = 0.5 * (self.pi.get(x, y) + self.pi_star.get(x, y));
                let d = g[x] - g[y];
                total += hat * d * d * self.mu[x];
            }
        }
        0.5 * total
    }

    /// Draws a state (0-based index) from `μ`.
    pub fn sample_invariant<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.mu_cumulative.last().copied().unwrap_or(1.0);
        self.mu_cumulative
            .partition_point(|&c| c <= u)
            .min(self.size() - 1)
    }

    /// One step of `π` from the 0-based state `x`.
    pub fn step<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let cols = self.pi.row_range(x);
        let width = self.pi.lower() + self.pi.upper() + 1;
        let cum = &self.pi_cumulative[x * width..x * width + cols.len()];
        let u: f64 = rng.random::<f64>() * cum[cols.len() - 1];
        let k = cum.partition_point(|&c| c <= u).min(cols.len() - 1);
        cols.start + k
    }

    /// Stationary trajectory of `steps + 1` states (0-based indices).
    pub fn run<R: Rng + ?Sized>(&self, steps: usize, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut x = self.sample_invariant(rng);
        out.push(x);
        for _ in 0..steps {
            x = self.step(x, rng);
            out.push(x);
        }
        out
    }
}

/// A lattice trajectory indexed by consecutive integer times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePath {
    pub start_index: i64,
    /// Lattice heights, all `≥ 1`.
    pub values: Vec<u32>,
}

impl LatticePath {
    pub fn end_index(&self) -> i64 {
        self.start_index + self.values.len() as i64 - 1
    }

    pub fn at(&self, index: i64) -> Option<u32> {
        let k = index - self.start_index;
        if k < 0 {
            return None;
        }
        self.values.get(k as usize).copied()
    }
}

/// Number of lattice steps covering `[0, t]` in macroscopic time.
pub fn lattice_span(t: f64, scale: &ScaleInfo) -> usize {
    (t * scale.time_scale()).ceil() as usize
}

/// Stationary path over the time indices `[−⌈T H²⌉, ⌈T H²⌉]`, started from `μ_λ`.
pub fn sample_stationary(chain: &GroundStateChain, horizon: f64, seed: u64) -> Result<LatticePath> {
    if !(horizon > 0.0) {
        return Err(Error::param("T", "horizon must be positive"));
    }
    let half = lattice_span(horizon, chain.scale());
    let mut rng = stream_rng(seed, 0);
    let states = chain.run(2 * half, &mut rng);
    Ok(LatticePath {
        start_index: -(half as i64),
        values: states.into_iter().map(|x| x as u32 + 1).collect(),
    })
}

/// `x_λ(t) = h X_{H² t}`, linearly interpolated between lattice times.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn rescale(path: &LatticePath, scale: &ScaleInfo) -> RescaledPath {
    let h = scale.small_h;
    let h2 = h * h;
    let times = (0..path.values.len())
        .map(|k| (path.start_index + k as i64) as f64 * h2)
        .collect();
    let values = path.values.iter().map(|&x| x as f64 * h).collect();
    RescaledPath { times, values }
}

impl RescaledPath {
    /// Linear interpolant; clamps outside the grid.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 {
            return f64::NAN;
        }
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let dt = self.times[1] - self.times[0];
        let k = (((t - self.times[0]) / dt).floor() as usize).min(n - 2);
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_kernel, KernelSpec, PotentialFamily};

    fn chain(lambda: f64) -> GroundStateChain {
        let k = make_kernel(&KernelSpec::LazyNearestNeighbor { a: 0.25 }).unwrap();
        let s = TransferSpectrum::compute(&k, &PotentialFamily::linear(), lambda, None).unwrap();
        doob_transform(&s).unwrap()
    }

    #[test]
    fn symmetric_kernel_gives_identical_kernels() {
        let c = chain(1e-3);
        for x in 0..c.size() {
            for (a, b) in c.pi.row(x).iter().zip(c.pi_star.row(x)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn invariants() {
        let c = chain(1e-3);
        for x in 0..c.size() {
            assert!((c.pi.row_sum(x) - 1.0).abs() < 1e-10);
            assert!((c.pi_star.row_sum(x) - 1.0).abs() < 1e-10);
        }
        assert!(c.stationarity_defect() < 1e-10);
        assert!(c.reversal_defect() < 1e-12);
        assert!((c.mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_site_chain_by_hand() {
        let k = make_kernel(&KernelSpec::LazyNearestNeighbor { a: 0.25 }).unwrap();
        let op = crate::spectral::build_operator(&k, &PotentialFamily::linear(), 1.0, Some(3)).unwrap();
        let pair = crate::spectral::leading_eigenpair(op.matrix(), 1e-14, 100).unwrap();
        let s = crate::spectral::finalize_spectrum(op, pair).unwrap();
        let c = doob_transform(&s).unwrap();
        let t = |x: usize, y: usize| s.operator().entry(x, y);
        for x in 1..=3 {
            for y in 1..=3 {
                let expect = t(x, y) * s.phi[y - 1] / (s.eigenvalue * s.phi[x - 1]);
                assert!((c.transition(x, y) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn determinism() {
        let c = chain(1e-3);
        let a = sample_stationary(&c, 0.5, 7).unwrap();
        let b = sample_stationary(&c, 0.5, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.start_index, -50);
        assert_eq!(a.end_index(), 50);
        assert!(a.values.iter().all(|&v| v >= 1 && (v as usize) <= c.size()));
        let d = sample_stationary(&c, 0.5, 8).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn steps_follow_kernel_support() {
        let c = chain(1e-3);
        let p = sample_stationary(&c, 5.0, 1).unwrap();
        for w in p.values.windows(2) {
            assert!((w[1] as i64 - w[0] as i64).abs() <= 1);
        }
    }

    #[test]
    fn rescale_examples() {
        let scale = ScaleInfo::from_h(1e-3, 10.0);
        let constant = LatticePath {
            start_index: -5,
            values: vec![10; 11],
        };
        let r = rescale(&constant, &scale);
        assert!(r.values.iter().all(|v| (v - 1.0).abs() < 1e-15));

        let values: Vec<u32> = (0..=100).map(|i| 10 + i / 10).collect();
        let p = LatticePath {
            start_index: 0,
            values,
        };
        let r = rescale(&p, &scale);
        assert!((r.eval(0.0) - 1.0).abs() < 1e-12);
        assert!((r.eval(1.0) - 2.0).abs() < 1e-12);
        assert!((r.eval(0.5) - 1.5).abs() < 1e-12);
        for (k, &t) in r.times.iter().enumerate() {
            assert_eq!(r.eval(t), p.values[k] as f64 * 0.1);
        }
        assert!((r.eval(0.505) - 0.5 * (1.5 + 1.5)).abs() < 1e-12);
    }
}
