//! Convergence of the lattice spectral data to the continuum ground state.

use rayon::prelude::*;

use crate::continuum::SturmLiouvilleSpectrum;
use crate::error::Result;
use crate::model::{PotentialFamily, ScaleInfo, WalkKernel};
use crate::spectral::TransferSpectrum;

const SIMPSON_PANELS: usize = 8;

/// Cell averages `ρ_λ f(x h) = h⁻¹ ∫_{(x−1)h}^{x h} f`, `x = 1..=M`, by
/// composite Simpson on each cell.
pub fn grid_project(f: impl Fn(f64) -> f64 + Sync, scale: &ScaleInfo, size: usize) -> Vec<f64> {
    let h = scale.small_h;
    let sub = h / SIMPSON_PANELS as f64;
    (1..=size)
        .map(|x| {
            let a = (x - 1) as f64 * h;
            let mut s = f(a) + f(a + h);
            for j in 1..SIMPSON_PANELS {
                s += f(a + j as f64 * sub) * if j % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * sub / 3.0 / h
        })
        .collect()
}

/// `‖u‖_{2,λ} = (h Σ u²)^{1/2}`.
pub fn rescaled_norm(u: &[f64], h: f64) -> f64 {
    (h * u.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenRow {
    pub lambda: f64,
    pub big_h: f64,
    pub truncation: usize,
    pub eigenvalue: f64,
    pub e: f64,
    /// `|e_λ − e_0|`.
    pub err_vs_continuum: f64,
    /// `‖φ_λ − ρ_λ φ_0‖_{2,λ}`.
    pub phi_error: f64,
    pub c_over_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenConvergence {
    pub e0: f64,
    pub rows: Vec<EigenRow>,
}

fn strictly_decreasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

impl EigenConvergence {
    /// Rows are ordered by decreasing λ.
    pub fn e_error_decreasing(&self) -> bool {
        strictly_decreasing(self.rows.iter().map(|r| r.err_vs_continuum))
    }

    pub fn phi_error_decreasing(&self) -> bool {
        strictly_decreasing(self.rows.iter().map(|r| r.phi_error))
    }
}

/// Compares `e_λ`, `φ_λ` and `c_λ/h_λ` with the continuum ground state for
/// each λ (sorted into decreasing order).
pub fn eigen_convergence(
    kernel: &WalkKernel,
    potential: &PotentialFamily,
    lambdas: &[f64],
    continuum: &SturmLiouvilleSpectrum,
) -> Result<EigenConvergence> {
    eigen_convergence_with(kernel, potential, lambdas, continuum, None).map(|(study, _)| study)
}

/// [`eigen_convergence`] with an optional truncation override; also returns
/// the lattice spectra in row order.
pub fn eigen_convergence_with(
    kernel: &WalkKernel,
    potential: &PotentialFamily,
    lambdas: &[f64],
    continuum: &SturmLiouvilleSpectrum,
    truncation: Option<usize>,
) -> Result<(EigenConvergence, Vec<TransferSpectrum>)> {
    let mut lambdas = lambdas.to_vec();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let e0 = continuum.eigenvalues[0];
    let solved = lambdas
        .par_iter()
        .map(|&lambda| {
            let s = TransferSpectrum::compute(kernel, potential, lambda, truncation)?;
            let scale = *s.scale();
            let projected = grid_project(|r| continuum.eval(0, r), &scale, s.size());
            let diff: Vec<f64> = s.phi.iter().zip(&projected).map(|(a, b)| a - b).collect();
            let row = EigenRow {
                lambda,
                big_h: scale.big_h,
                truncation: s.size(),
                eigenvalue: s.eigenvalue,
                e: s.e,
                err_vs_continuum: (s.e - e0).abs(),
                phi_error: rescaled_norm(&diff, scale.small_h),
                c_over_h: s.c_over_h(),
            };
            Ok((row, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, spectra) = solved.into_iter().unzip();
    Ok((EigenConvergence { e0, rows }, spectra))
}
