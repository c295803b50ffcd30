//! Lowest eigenpairs of `−(σ²/2) d²/dr² + q(r)` on `(0, R)` with Dirichlet
//! walls, by second-order finite differences, Sturm-sequence bisection and
//! inverse iteration.

use crate::error::{Error, Result};
use crate::model::PotentialFamily;

pub const MIN_GRID: usize = 2000;
/// Required gap `q(R) − e_{k−1}` between the profile at the far wall and the
/// highest computed level.
pub const CUTOFF_MARGIN: f64 = 10.0;

/// Discretized spectrum. Grid functions include the two wall nodes `r = 0`
/// and `r = R`, where every eigenfunction vanishes.
#[derive(Debug, Clone)]
pub struct SturmLiouvilleSpectrum {
    pub sigma2: f64,
    pub q_tag: String,
    pub cutoff: f64,
    /// Number of interior grid points.
    pub n: usize,
    pub step: f64,
    pub grid: Vec<f64>,
    /// `e_0 < e_1 < …`; the operator eigenvalues are `−e_j`.
    pub eigenvalues: Vec<f64>,
    /// `φ_j` on [`Self::grid`], unit norm in the trapezoidal `L²`.
    pub eigenfunctions: Vec<Vec<f64>>,
    /// `e_j(n) − e_j(2n + 1)`: the change when the mesh is halved.
    pub richardson: Vec<f64>,
}

struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    fn new(sigma2: f64, q: &dyn Fn(f64) -> f64, cutoff: f64, n: usize) -> (Self, f64) {
        let step = cutoff / (n + 1) as f64;
        let kinetic = sigma2 / (step * step);
        let diag = (1..=n).map(|i| kinetic + q(i as f64 * step)).collect();
        (
            Self {
                diag,
                off: -0.5 * kinetic,
            },
            step,
        )
    }

    /// Number of eigenvalues strictly below `mu` (Sturm count via `LDLᵀ`).
    fn count_below(&self, mu: f64) -> usize {
        let e2 = self.off * self.off;
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + mu.abs());
        let mut count = 0;
        let mut p = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            p = if i == 0 { d - mu } else { d - mu - e2 / p };
            if p == 0.0 {
                p = -tiny;
            }
            if p < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().cloned().fold(f64::INFINITY, f64::min) - r;
        let hi = self.diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + r;
        (lo, hi)
    }

    /// The `j`-th smallest eigenvalue (0-based) by bisection.
    fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(A − μ I) x = b` by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, mu: f64, b: &mut [f64]) {
        let n = self.diag.len();
        let e = self.off;
        let floor = f64::EPSILON * (self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs())) + e.abs());
        // Row i after elimination: u0[i] x_i + u1[i] x_{i+1} + u2[i] x_{i+2}.
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        // Pending row i: (a, c) coefficients on x_i and x_{i+1}.
        let (mut a, mut c) = (self.diag[0] - mu, e);
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a.abs() < floor { floor } else { a };
                break;
            }
            // Next row: e x_i + (d − μ) x_{i+1} + e x_{i+2}.
            let (na, nb, nc) = (e, self.diag[i + 1] - mu, if i + 2 < n { e } else { 0.0 });
            if na.abs() > a.abs() {
                // Swap rows i and i+1.
                u0[i] = na;
                u1[i] = nb;
                u2[i] = nc;
                b.swap(i, i + 1);
                let l = a / na;
                b[i + 1] -= l * b[i];
                a = c - l * nb;
                c = -l * nc;
            } else {
                let piv = if a.abs() < floor { floor } else { a };
                u0[i] = piv;
                u1[i] = c;
                u2[i] = 0.0;
                let l = na / piv;
                b[i + 1] -= l * b[i];
                a = nb - l * c;
                c = nc;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= u1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * b[i + 2];
            }
            b[i] = s / u0[i];
        }
    }
}

/// Solves for the `k` lowest levels of `−(σ²/2)φ″ + qφ = eφ` on `(0, R)`
/// with `φ(0) = φ(R) = 0`, using `n` interior grid points.
pub fn sl_solve(sigma2: f64, potential: &PotentialFamily, cutoff: f64, n: usize, k: usize) -> Result<SturmLiouvilleSpectrum> {
    sl_solve_with(sigma2, potential.tag(), &|r| potential.profile(r), cutoff, n, k)
}

pub fn sl_solve_with(
    sigma2: f64,
    q_tag: &str,
    q: &dyn Fn(f64) -> f64,
    cutoff: f64,
    n: usize,
    k: usize,
) -> Result<SturmLiouvilleSpectrum> {
    if !(sigma2 > 0.0) {
        return Err(Error::param("sigma2", "must be positive"));
    }
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::param("R", "must be positive and finite"));
    }
    if n < MIN_GRID {
        return Err(Error::param("n", format!("need at least {MIN_GRID} grid points")));
    }
    if k == 0 || k > n {
        return Err(Error::param("k", "must lie in 1..=n"));
    }
    let (matrix, step) = Tridiagonal::new(sigma2, q, cutoff, n);
    let eigenvalues: Vec<f64> = (0..k).map(|j| matrix.eigenvalue(j)).collect();
    let required = eigenvalues[k - 1] + CUTOFF_MARGIN;
    let q_at_cutoff = q(cutoff);
    if q_at_cutoff < required {
        return Err(Error::CutoffTooSmall {
            q_at_cutoff,
            required,
        });
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &mu in &eigenvalues {
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i % 7) as f64)).collect();
        for _ in 0..3 {
            matrix.shifted_solve(mu, &mut x);
            for prev in &vectors {
                let dot: f64 = prev.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(prev).for_each(|(xi, pi)| *xi -= dot * pi);
            }
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        vectors.push(x);
    }

    let (fine, _) = Tridiagonal::new(sigma2, q, cutoff, 2 * n + 1);
    let richardson = eigenvalues
        .iter()
        .enumerate()
        .map(|(j, e)| e - fine.eigenvalue(j))
        .collect();

    let scale = 1.0 / step.sqrt();
    let eigenfunctions = vectors
        .into_iter()
        .map(|v| {
            let sign = if v[0] < 0.0 { -scale } else { scale };
            let mut f = Vec::with_capacity(n + 2);
            f.push(0.0);
            f.extend(v.iter().map(|x| sign * x));
            f.push(0.0);
            f
        })
        .collect();
    let grid = (0..n + 2).map(|i| i as f64 * step).collect();

    Ok(SturmLiouvilleSpectrum {
        sigma2,
        q_tag: q_tag.to_string(),
        cutoff,
        n,
        step,
        grid,
        eigenvalues,
        eigenfunctions,
        richardson,
    })
}

impl SturmLiouvilleSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Trapezoidal `L²` inner product of two grid functions.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let n = f.len();
        let interior: f64 = f[1..n - 1].iter().zip(&g[1..n - 1]).map(|(a, b)| a * b).sum();
        self.step * (interior + 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]))
    }

    /// `φ_j(r)` by linear interpolation; zero outside `[0, R]`.
    pub fn eval(&self, j: usize, r: f64) -> f64 {
        interpolate(&self.eigenfunctions[j], self.step, r)
    }

    /// Sign changes of `φ_j`, ignoring entries below `1e-8·max|φ_j|` where the
    /// tail is dominated by rounding.
    pub fn sign_changes(&self, j: usize) -> usize {
        let f = &self.eigenfunctions[j];
        let floor = 1e-8 * f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut changes = 0;
        let mut last = 0.0f64;
        for &v in f {
            if v.abs() <= floor {
                continue;
            }
            if last != 0.0 && v.signum() != last.signum() {
                changes += 1;
            }
            last = v;
        }
        changes
    }

    /// Expansion coefficients `⟨ψ, φ_j⟩` of a grid function.
    pub fn expand(&self, psi: &[f64]) -> Vec<f64> {
        self.eigenfunctions.iter().map(|f| self.inner(psi, f)).collect()
    }

    /// `Σ a_j φ_j` on the grid.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (a, f) in coeffs.iter().zip(&self.eigenfunctions) {
            out.iter_mut().zip(f).for_each(|(o, v)| *o += a * v);
        }
        out
    }
}

pub(crate) fn interpolate(values: &[f64], step: f64, r: f64) -> f64 {
    let last = values.len() - 1;
    if !(r >= 0.0) || r > last as f64 * step {
        return 0.0;
    }
    let s = r / step;
    let i = (s.floor() as usize).min(last - 1);
    let w = s - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// `a_j ↦ e^{−(e_j − e_0) t} a_j`: the semigroup generated by `L + e_0`.
pub fn semigroup_apply(spectrum: &SturmLiouvilleSpectrum, coeffs: &[f64], t: f64) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let e0 = spectrum.eigenvalues[0];
    Ok(coeffs
        .iter()
        .zip(&spectrum.eigenvalues)
        .map(|(a, e)| a * (-(e - e0) * t).exp())
        .collect())
}

/// Ferrari–Spohn semigroup `S^t ψ = φ_0⁻¹ T^t(ψ φ_0)` on the grid, with `T^t`
/// truncated to the computed eigenbasis. Entries at the walls, where `φ_0`
/// vanishes, are set to zero.
pub fn fs_semigroup_apply(spectrum: &SturmLiouvilleSpectrum, psi: &[f64], t: f64) -> Result<Vec<f64>> {
    let phi0 = &spectrum.eigenfunctions[0];
    let product: Vec<f64> = psi.iter().zip(phi0).map(|(a, b)| a * b).collect();
    let evolved = spectrum.synthesize(&semigroup_apply(spectrum, &spectrum.expand(&product), t)?);
    Ok(evolved
        .iter()
        .zip(phi0)
        .map(|(v, p)| if *p > 0.0 { v / p } else { 0.0 })
        .collect())
}
