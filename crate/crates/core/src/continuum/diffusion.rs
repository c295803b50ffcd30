//! The Ferrari–Spohn diffusion `dx = σ² (φ₀′/φ₀)(x) dt + σ dW`, reversible
//! with respect to `φ₀² dr`, simulated by Euler–Maruyama.

use rand::Rng;
use rand_distr::StandardNormal;

use super::sturm::{interpolate, SturmLiouvilleSpectrum};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Abort threshold for boundary events in one simulation.
pub const MAX_ESCAPES: u64 = 1_000_000;
/// Relative level of `φ₀` below which the drift is no longer trusted.
const TAIL_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FsDiffusionModel {
    spectrum: SturmLiouvilleSpectrum,
    /// `φ₀′` on the grid by centered differences.
    derivative: Vec<f64>,
    /// Cumulative trapezoid of `φ₀²`, normalized to end at 1.
    cdf: Vec<f64>,
    /// Raw `∫ φ₀²` before normalization.
    pub density_mass: f64,
    pub r_min: f64,
    pub r_max: f64,
}

/// Drift value with a flag for evaluations outside `[r_min, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftValue {
    pub value: f64,
    pub clamped: bool,
}

impl FsDiffusionModel {
    pub fn new(spectrum: SturmLiouvilleSpectrum) -> Result<Self> {
        if spectrum.is_empty() {
            return Err(Error::param("spectrum", "needs the ground state"));
        }
        let phi = &spectrum.eigenfunctions[0];
        let step = spectrum.step;
        let last = phi.len() - 1;
        let mut derivative = vec![0.0; phi.len()];
        derivative[0] = (phi[1] - phi[0]) / step;
        derivative[last] = (phi[last] - phi[last - 1]) / step;
        for i in 1..last {
            derivative[i] = (phi[i + 1] - phi[i - 1]) / (2.0 * step);
        }
        let mut cdf = vec![0.0; phi.len()];
        for i in 1..phi.len() {
            cdf[i] = cdf[i - 1] + 0.5 * step * (phi[i - 1].powi(2) + phi[i].powi(2));
        }
        let density_mass = cdf[last];
        cdf.iter_mut().for_each(|c| *c /= density_mass);

        let peak = phi.iter().cloned().fold(0.0, f64::max);
        let top = (1..last).rev().find(|&i| phi[i] > TAIL_FLOOR * peak).unwrap_or(1);
        Ok(Self {
            derivative,
            cdf,
            density_mass,
            r_min: step,
            r_max: top as f64 * step,
            spectrum,
        })
    }

    pub fn spectrum(&self) -> &SturmLiouvilleSpectrum {
        &self.spectrum
    }

    pub fn sigma2(&self) -> f64 {
        self.spectrum.sigma2
    }

    /// Relaxation time `1/(e_1 − e_0)`, or 1 if only the ground state is known.
    pub fn relaxation_time(&self) -> f64 {
        let e = &self.spectrum.eigenvalues;
        if e.len() >= 2 {
            1.0 / (e[1] - e[0])
        } else {
            1.0
        }
    }

    /// Largest admissible Euler–Maruyama step.
    pub fn max_dt(&self) -> f64 {
        1e-4 * self.relaxation_time().min(1.0)
    }

    /// `σ² φ₀′(r)/φ₀(r)`, with `φ₀` and `φ₀′` interpolated separately.
    pub fn fs_drift(&self, r: f64) -> DriftValue {
        let clamped = !(r >= self.r_min && r <= self.r_max);
        let r = r.clamp(self.r_min, self.r_max);
        let step = self.spectrum.step;
        let phi = interpolate(&self.spectrum.eigenfunctions[0], step, r);
        let dphi = interpolate(&self.derivative, step, r);
        DriftValue {
            value: self.spectrum.sigma2 * dphi / phi,
            clamped,
        }
    }

    /// `∫_0^r φ₀²`.
    pub fn stationary_cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else if r >= self.spectrum.cutoff {
            1.0
        } else {
            interpolate(&self.cdf, self.spectrum.step, r)
        }
    }

    /// Inverse of [`Self::stationary_cdf`].
    pub fn stationary_quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        (i as f64 - 1.0 + w.clamp(0.0, 1.0)) * self.spectrum.step
    }

    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.stationary_quantile(rng.random::<f64>())
    }

    /// Advances `x` by `steps` Euler–Maruyama steps of size `dt`.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        mut x: f64,
        steps: usize,
        dt: f64,
        rng: &mut R,
        diagnostics: &mut SimulationDiagnostics,
    ) -> Result<f64> {
        let noise = (self.spectrum.sigma2 * dt).sqrt();
        let cutoff = self.spectrum.cutoff;
        for _ in 0..steps {
            let drift = self.fs_drift(x);
            if drift.clamped {
                diagnostics.clamped_drift += 1;
            }
            let xi: f64 = rng.sample(StandardNormal);
            x += drift.value * dt + noise * xi;
            if x < 0.0 {
                x = -x;
                diagnostics.escapes += 1;
            }
            if x > cutoff {
                x = (2.0 * cutoff - x).max(0.0);
                diagnostics.escapes += 1;
            }
            if diagnostics.escapes > MAX_ESCAPES {
                return Err(Error::TooManyEscapes {
                    escapes: diagnostics.escapes,
                });
            }
        }
        Ok(x)
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt <= self.max_dt() * (1.0 + 1e-12)) {
            return Err(Error::param(
                "dt",
                format!("must lie in (0, {:e}]", self.max_dt()),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimulationDiagnostics {
    /// Reflections at `0` or `R`.
    pub escapes: u64,
    /// Drift evaluations outside the trusted range.
    pub clamped_drift: u64,
}

/// A simulated path on `[−T, T]` sampled every `record_every` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub diagnostics: SimulationDiagnostics,
}

/// Stationary simulation on `[−T, T]`, recording every step.
pub fn simulate_fs(model: &FsDiffusionModel, horizon: f64, dt: f64, seed: u64) -> Result<ContinuumPath> {
    simulate_fs_thinned(model, horizon, dt, 1, seed)
}

pub fn simulate_fs_thinned(
    model: &FsDiffusionModel,
    horizon: f64,
    dt: f64,
    record_every: usize,
    seed: u64,
) -> Result<ContinuumPath> {
    if !(horizon > 0.0) {
        return Err(Error::param("T", "horizon must be positive"));
    }
    model.check_dt(dt)?;
    let record_every = record_every.max(1);
    let total = (2.0 * horizon / dt).round() as usize;
    let mut rng = stream_rng(seed, 0);
    let mut diagnostics = SimulationDiagnostics::default();
    let mut x = model.sample_stationary(&mut rng);
    let mut times = vec![-horizon];
    let mut values = vec![x];
    let mut done = 0;
    while done < total {
        let chunk = record_every.min(total - done);
        x = model.advance(x, chunk, dt, &mut rng, &mut diagnostics)?;
        done += chunk;
        times.push(-horizon + done as f64 * dt);
        values.push(x);
    }
    Ok(ContinuumPath {
        times,
        values,
        diagnostics,
    })
}

/// Values at the increasing times `times` (relative to a stationary start at
/// `times[0]`) for `samples` independent trajectories; trajectory `i` uses
/// stream `i` of `seed`.
pub fn sample_fs_fdd(
    model: &FsDiffusionModel,
    times: &[f64],
    dt: f64,
    samples: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, SimulationDiagnostics)> {
    use rayon::prelude::*;
    model.check_dt(dt)?;
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times", "must be nondecreasing"));
    }
    let steps: Vec<usize> = times
        .windows(2)
        .map(|w| ((w[1] - w[0]) / dt).round() as usize)
        .collect();
    let rows: Vec<Result<(Vec<f64>, SimulationDiagnostics)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut diag = SimulationDiagnostics::default();
            let mut x = model.sample_stationary(&mut rng);
            let mut row = Vec::with_capacity(times.len());
            row.push(x);
            for &s in &steps {
                x = model.advance(x, s, dt, &mut rng, &mut diag)?;
                row.push(x);
            }
            Ok((row, diag))
        })
        .collect();
    let mut total = SimulationDiagnostics::default();
    let mut out = Vec::with_capacity(samples);
    for r in rows {
        let (row, d) = r?;
        total.escapes += d.escapes;
        total.clamped_drift += d.clamped_drift;
        out.push(row);
    }
    Ok((out, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::sturm::sl_solve;
    use crate::model::PotentialFamily;

    fn model(sigma2: f64) -> FsDiffusionModel {
        let s = sl_solve(sigma2, &PotentialFamily::linear(), 20.0, 4000, 3).unwrap();
        FsDiffusionModel::new(s).unwrap()
    }

    #[test]
    fn stationary_density_normalized() {
        let m = model(2.0);
        assert!((m.density_mass - 1.0).abs() < 1e-8);
        assert!((m.stationary_cdf(m.stationary_quantile(0.3)) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn drift_shape() {
        let m = model(2.0);
        // Maximizer of Ai(r − ω₁): Ai′ vanishes at −1.0187929716...
        let r_star = 2.338_107_410_459_767 - 1.018_792_971_647_471;
        assert!(m.fs_drift(r_star).value.abs() < 1e-3);
        assert!(m.fs_drift(r_star - 0.1).value > 0.0);
        assert!(m.fs_drift(r_star + 0.1).value < 0.0);
        let r = 4.0 * m.r_min;
        assert!((r * m.fs_drift(r).value / 2.0 - 1.0).abs() < 0.05);
        assert!(m.fs_drift(0.0).clamped);
        assert!(!m.fs_drift(1.0).clamped);
    }

    #[test]
    fn determinism_and_dt_check() {
        let m = model(2.0);
        let a = simulate_fs(&m, 0.01, 5e-5, 3).unwrap();
        let b = simulate_fs(&m, 0.01, 5e-5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values.len(), 401);
        assert!(simulate_fs(&m, 0.01, 1e-2, 3).is_err());
    }
}
