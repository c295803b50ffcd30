//! Truncated tilted transfer operator `T̃_λ(x, y) = p_{y−x} e^{−(V_λ(x)+V_λ(y))/2}`
//! on `{1..M}`, its Perron eigenpair and the derived constants `c_λ`, `e_λ`.

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::model::{solve_scale, PotentialFamily, ScaleInfo, WalkKernel};

/// Sup-norm residual targeted by [`leading_eigenpair`] when called through
/// [`TransferSpectrum::compute`].
pub const EIGEN_TOL: f64 = 1e-12;
pub const EIGEN_MAX_ITER: usize = 1_000_000;
/// Residual accepted by [`finalize_spectrum`] after normalization.
pub const FINAL_RESIDUAL_TOL: f64 = 1e-10;

/// Level of `q₀` used to place the truncation wall.
const ENVELOPE_LEVEL: f64 = 40.0;
const MIN_SCALE_MULTIPLE: f64 = 20.0;

/// Default truncation `M = ⌈max(20 H, H K*)⌉` where `q₀(K*) = 40`.
pub fn default_truncation(potential: &PotentialFamily, scale: &ScaleInfo) -> Result<usize> {
    let k_star = potential.envelope_level(ENVELOPE_LEVEL)?;
    Ok((scale.big_h * MIN_SCALE_MULTIPLE.max(k_star)).ceil() as usize)
}

/// The matrix `T̃_λ` restricted to `{1..M}` (index `i` is lattice site `i + 1`).
#[derive(Debug, Clone)]
pub struct TransferOperator {
    matrix: BandedMatrix,
    /// `e^{−V_λ(x)/2}` per site.
    half_weights: Vec<f64>,
    potential_values: Vec<f64>,
    kernel: WalkKernel,
    scale: ScaleInfo,
}

/// Builds `T̃_λ` with a Dirichlet wall at 0 and at `M + 1`. `truncation = None`
/// selects [`default_truncation`].
pub fn build_operator(
    kernel: &WalkKernel,
    potential: &PotentialFamily,
    lambda: f64,
    truncation: Option<usize>,
) -> Result<TransferOperator> {
    let scale = solve_scale(potential, lambda)?;
    let m = match truncation {
        Some(m) => m,
        None => default_truncation(potential, &scale)?,
    };
    let diameter = (kernel.support().last().unwrap() - kernel.support()[0]) as usize;
    if m <= diameter {
        return Err(Error::TruncationTooSmall {
            m,
            reason: format!("kernel support diameter is {diameter}"),
        });
    }
    let potential_values: Vec<f64> = (1..=m).map(|x| potential.eval(lambda, x as f64)).collect();
    if let Some(bad) = potential_values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidPotential(format!(
            "V_lambda({}) = {}",
            bad + 1,
            potential_values[bad]
        )));
    }
    let half_weights: Vec<f64> = potential_values.iter().map(|v| (-0.5 * v).exp()).collect();

    let lower = kernel.support()[0].min(0).unsigned_abs() as usize;
    let upper = kernel.support().last().unwrap().max(&0).unsigned_abs() as usize;
    let mut matrix = BandedMatrix::zeros(m, lower, upper);
    for x in 0..m {
        for (z, p) in kernel.iter() {
            let y = x as i64 + z;
            if y >= 0 && (y as usize) < m {
                let y = y as usize;
                matrix.set(x, y, p * half_weights[x] * half_weights[y]);
            }
        }
    }
    Ok(TransferOperator {
        matrix,
        half_weights,
        potential_values,
        kernel: kernel.clone(),
        scale,
    })
}

impl TransferOperator {
    pub fn matrix(&self) -> &BandedMatrix {
        &self.matrix
    }

    /// Truncation level `M`.
    pub fn size(&self) -> usize {
        self.matrix.dim()
    }

    pub fn scale(&self) -> &ScaleInfo {
        &self.scale
    }

    pub fn kernel(&self) -> &WalkKernel {
        &self.kernel
    }

    /// `V_λ(x)` for `x = 1..=M`.
    pub fn potential_values(&self) -> &[f64] {
        &self.potential_values
    }

    pub fn half_weights(&self) -> &[f64] {
        &self.half_weights
    }

    /// Entry `T̃(x, y)` in lattice coordinates (sites start at 1).
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        if x == 0 || y == 0 {
            return 0.0;
        }
        self.matrix.get(x - 1, y - 1)
    }
}

/// Perron eigenvalue with right and left eigenvectors, unnormalized.
#[derive(Debug, Clone)]
pub struct LeadingEigenpair {
    pub value: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub right_residual: f64,
    pub left_residual: f64,
    pub iterations: usize,
}

/// Perron eigenpair of a nonnegative irreducible band matrix.
///
/// Runs shifted inverse iteration `x ← (sI − A)⁻¹x` from the all-ones vector.
/// The shift is kept just above the Collatz–Wielandt upper bound
/// `max_i (Ax)_i / x_i ≥ ρ(A)`, so `sI − A` stays a nonsingular M-matrix, its
/// inverse is entrywise positive and every iterate stays positive. The
/// eigenvalue `−E` of a bipartite matrix is never selected because the shift
/// sits above `E`. Converged when `‖Ax − Ex‖∞ / ‖x‖∞ ≤ tol`.
pub fn leading_eigenpair(
    matrix: &BandedMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<LeadingEigenpair> {
    if !matrix.is_nonnegative() {
        return Err(Error::Format("matrix has negative entries".into()));
    }
    let (value, right, right_residual, it_r) = perron_vector(matrix, tol, max_iter)?;
    let transposed = matrix.transpose();
    let (_, left, left_residual, it_l) = perron_vector(&transposed, tol, max_iter)?;
    Ok(LeadingEigenpair {
        value,
        right,
        left,
        right_residual,
        left_residual,
        iterations: it_r.max(it_l),
    })
}

fn perron_vector(a: &BandedMatrix, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>, f64, usize)> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::Format("empty matrix".into()));
    }
    if let Some(row) = (0..n).find(|&i| a.row(i).iter().all(|&v| v == 0.0)) {
        return Err(Error::ZeroRow { row });
    }
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 0..=max_iter {
        a.mul_vec_into(&x, &mut y);
        // Collatz–Wielandt upper bound.
        let hi = x
            .iter()
            .zip(&y)
            .filter(|(xi, _)| **xi > 0.0)
            .map(|(xi, yi)| yi / xi)
            .fold(0.0, f64::max);
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let value = xy / xx;
        let x_max = x.iter().cloned().fold(0.0, f64::max);
        residual = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (yi - value * xi).abs())
            .fold(0.0, f64::max)
            / x_max;
        if residual <= tol {
            polish(a, hi, &mut x)?;
            return Ok((value, x, residual, iter));
        }
        if iter == max_iter {
            break;
        }

        let mut margin = 1e-9 * hi.max(f64::MIN_POSITIVE);
        let lu = loop {
            match a.shifted_lu(hi + margin) {
                Ok(lu) => break lu,
                Err(_) if margin < hi.max(1.0) => margin *= 16.0,
                Err(e) => return Err(e),
            }
        };
        lu.solve_in_place(&mut x);
        let scale = x.iter().cloned().fold(0.0, f64::max);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual,
            });
        }
        x.iter_mut().for_each(|v| *v /= scale);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Sup-norm convergence leaves entries deep in the tail, which are many
/// orders of magnitude below the maximum, with poor relative accuracy. A few
/// extra solves at a fixed shift settle every entry to relative precision,
/// which the Doob transform needs row by row.
fn polish(a: &BandedMatrix, hi: f64, x: &mut [f64]) -> Result<()> {
    let mut margin = 1e-9 * hi.max(f64::MIN_POSITIVE);
    let lu = loop {
        match a.shifted_lu(hi + margin) {
            Ok(lu) => break lu,
            Err(_) if margin < hi.max(1.0) => margin *= 16.0,
            Err(e) => return Err(e),
        }
    };
    for _ in 0..POLISH_SOLVES {
        let previous = x.to_vec();
        lu.solve_in_place(x);
        let scale = x.iter().cloned().fold(0.0, f64::max);
        x.iter_mut().for_each(|v| *v /= scale);
        let change = x
            .iter()
            .zip(&previous)
            .map(|(a, b)| ((a - b) / a).abs())
            .fold(0.0, f64::max);
        if change < 1e-14 {
            break;
        }
    }
    Ok(())
}

const POLISH_SOLVES: usize = 20;

/// Normalized Perron data of `T̃_λ`.
#[derive(Debug, Clone)]
pub struct TransferSpectrum {
    operator: TransferOperator,
    /// Leading eigenvalue `E_λ`.
    pub eigenvalue: f64,
    /// Right eigenfunction `φ_λ`, `h Σ φ² = 1`.
    pub phi: Vec<f64>,
    /// Left eigenfunction `φ*_λ`, `h Σ φ*² = 1`.
    pub phi_star: Vec<f64>,
    /// `1 / Σ φ φ*`.
    pub c: f64,
    /// `−H² log E_λ`.
    pub e: f64,
    pub right_residual: f64,
    pub left_residual: f64,
}

/// Rescales `v` to unit `‖·‖_{2,λ}`, where `‖u‖²_{2,λ} = h Σ u²`.
pub fn normalize_rescaled(v: &mut [f64], small_h: f64) {
    let norm = (small_h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

pub fn finalize_spectrum(
    operator: TransferOperator,
    pair: LeadingEigenpair,
) -> Result<TransferSpectrum> {
    let LeadingEigenpair {
        value,
        mut right,
        mut left,
        ..
    } = pair;
    for v in [&right, &left] {
        if let Some(index) = v.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::NonPositiveEigenfunction {
                index: index + 1,
                value: v[index],
            });
        }
    }
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::Format(format!(
            "leading eigenvalue {value} outside (0, 1)"
        )));
    }
    let scale = *operator.scale();
    normalize_rescaled(&mut right, scale.small_h);
    normalize_rescaled(&mut left, scale.small_h);

    let matrix = operator.matrix();
    let sup_residual = |v: &[f64], image: Vec<f64>| {
        image
            .iter()
            .zip(v)
            .map(|(a, b)| (a - value * b).abs())
            .fold(0.0, f64::max)
    };
    let right_residual = sup_residual(&right, matrix.mul_vec(&right));
    let left_residual = sup_residual(&left, matrix.vec_mul(&left));
    if right_residual.max(left_residual) > FINAL_RESIDUAL_TOL {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: right_residual.max(left_residual),
        });
    }
    let overlap: f64 = right.iter().zip(&left).map(|(a, b)| a * b).sum();
    Ok(TransferSpectrum {
        eigenvalue: value,
        phi: right,
        phi_star: left,
        c: 1.0 / overlap,
        e: -scale.time_scale() * value.ln(),
        right_residual,
        left_residual,
        operator,
    })
}

impl TransferSpectrum {
    /// Builds the operator and solves for its normalized Perron data.
    pub fn compute(
        kernel: &WalkKernel,
        potential: &PotentialFamily,
        lambda: f64,
        truncation: Option<usize>,
    ) -> Result<Self> {
        let operator = build_operator(kernel, potential, lambda, truncation)?;
        let pair = leading_eigenpair(operator.matrix(), EIGEN_TOL, EIGEN_MAX_ITER)?;
        finalize_spectrum(operator, pair)
    }

    pub fn operator(&self) -> &TransferOperator {
        &self.operator
    }

    pub fn scale(&self) -> &ScaleInfo {
        self.operator.scale()
    }

    pub fn size(&self) -> usize {
        self.operator.size()
    }

    /// `c_λ / h_λ`, which tends to 1 as λ → 0.
    pub fn c_over_h(&self) -> f64 {
        self.c / self.scale().small_h
    }

    /// `h Σ_{x h > K} φ(x)`: rescaled `ℓ¹` mass of `φ_λ` beyond `K`.
    pub fn tail_mass(&self, k: f64) -> f64 {
        let h = self.scale().small_h;
        h * self
            .phi
            .iter()
            .enumerate()
            .filter(|(i, _)| (*i + 1) as f64 * h > k)
            .map(|(_, v)| v)
            .sum::<f64>()
    }

    /// Invariant measure `μ_λ = c φ φ*` of the ground-state chain.
    pub fn invariant_measure(&self) -> Vec<f64> {
        self.phi
            .iter()
            .zip(&self.phi_star)
            .map(|(a, b)| self.c * a * b)
            .collect()
    }

    /// `Σ_x μ(x) ((1 − T_λ)u / u)(x)` with `T_λ = T̃_λ / E_λ`.
    pub fn dv_inner(&self, mu: &[f64], u: &[f64]) -> Result<f64> {
        let m = self.size();
        if mu.len() != m || u.len() != m {
            return Err(Error::param(
                "dv_inner",
                format!("vectors must have length M = {m}"),
            ));
        }
        let tu = self.operator.matrix().mul_vec(u);
        let mut total = 0.0;
        for (i, (&w, (&ui, &tui))) in mu.iter().zip(u.iter().zip(&tu)).enumerate() {
            if w == 0.0 {
                continue;
            }
            if !(ui > 0.0) {
                return Err(Error::ZeroTestFunction { state: i + 1 });
            }
            total += w * (1.0 - tui / (self.eigenvalue * ui));
        }
        Ok(total)
    }

    /// [`Self::dv_inner`] scaled by `h_λ⁻²`, the normalization of the
    /// Donsker–Varadhan functional.
    pub fn dv_functional_term(&self, mu: &[f64], u: &[f64]) -> Result<f64> {
        let h = self.scale().small_h;
        Ok(self.dv_inner(mu, u)? / (h * h))
    }

    /// Rescaled lattice points `r = x h`, `x = 1..=M`.
    pub fn lattice_points(&self) -> Vec<f64> {
        let h = self.scale().small_h;
        (1..=self.size()).map(|x| x as f64 * h).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_kernel, KernelSpec};

    fn lazy() -> WalkKernel {
        make_kernel(&KernelSpec::LazyNearestNeighbor { a: 0.25 }).unwrap()
    }

    #[test]
    fn three_site_entries_by_hand() {
        let op = build_operator(&lazy(), &PotentialFamily::linear(), 1.0, Some(3)).unwrap();
        let e = |v: f64| v.exp();
        assert!((op.entry(1, 2) - 0.25 * e(-1.5)).abs() < 1e-15);
        assert!((op.entry(2, 3) - 0.25 * e(-2.5)).abs() < 1e-15);
        assert!((op.entry(2, 2) - 0.5 * e(-2.0)).abs() < 1e-15);
        assert!((op.entry(3, 3) - 0.5 * e(-3.0)).abs() < 1e-15);
        assert_eq!(op.entry(1, 3), 0.0);
        assert_eq!(op.entry(0, 1), 0.0);
    }

    #[test]
    fn diagonal_is_lazy_weight_times_tilt() {
        let op = build_operator(&lazy(), &PotentialFamily::linear(), 0.01, Some(100)).unwrap();
        for x in [1, 10, 57] {
            let expect = 0.5 * (-0.01 * x as f64).exp();
            assert!((op.entry(x, x) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn bulk_rows_are_nearly_stochastic_for_weak_tilt() {
        let op = build_operator(&lazy(), &PotentialFamily::linear(), 1e-9, Some(200)).unwrap();
        for i in 1..199 {
            assert!((op.matrix().row_sum(i) - 1.0).abs() < 1e-6);
        }
        assert!((op.matrix().row_sum(0) - 0.75).abs() < 1e-6);
    }

    #[test]
    fn truncation_too_small() {
        let k = make_kernel(&KernelSpec::Weights(vec![
            (-2, 0.125),
            (-1, 0.25),
            (0, 0.25),
            (1, 0.25),
            (2, 0.125),
        ]))
        .unwrap();
        assert!(matches!(
            build_operator(&k, &PotentialFamily::linear(), 0.1, Some(4)),
            Err(Error::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn scalar_and_permutation_examples() {
        let one = BandedMatrix::from_dense(&[vec![0.7]]);
        let p = leading_eigenpair(&one, 1e-14, 10).unwrap();
        assert_eq!(p.value, 0.7);
        assert_eq!(p.right, vec![1.0]);
        assert_eq!(p.left, vec![1.0]);

        let swap = BandedMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let p = leading_eigenpair(&swap, 1e-14, 10).unwrap();
        assert!((p.value - 1.0).abs() < 1e-15);
        assert!((p.right[0] - p.right[1]).abs() < 1e-15);
        assert!((p.left[0] - p.left[1]).abs() < 1e-15);
    }

    #[test]
    fn zero_row_rejected() {
        let m = BandedMatrix::from_dense(&[vec![0.0, 0.0], vec![1.0, 0.5]]);
        assert!(matches!(
            leading_eigenpair(&m, 1e-12, 10),
            Err(Error::ZeroRow { row: 0 })
        ));
    }

    #[test]
    fn bipartite_kernel_selects_positive_root() {
        let k = make_kernel(&KernelSpec::LazyNearestNeighbor { a: 0.5 }).unwrap();
        let s = TransferSpectrum::compute(&k, &PotentialFamily::linear(), 1e-3, None).unwrap();
        assert!(s.eigenvalue > 0.9 && s.eigenvalue < 1.0);
        assert!(s.phi.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn finalize_examples() {
        let mut v = vec![2.0, 0.0, 0.0, 0.0];
        // ‖v‖_{2,λ} = 2 with h = 1.
        normalize_rescaled(&mut v, 1.0);
        assert_eq!(v[0], 1.0);
        let e = -(10.0f64 * 10.0) * (-0.001f64).exp().ln();
        assert!((e - 0.1).abs() < 1e-14);
    }

    #[test]
    fn spectrum_invariants() {
        let s = TransferSpectrum::compute(&lazy(), &PotentialFamily::linear(), 1e-3, None).unwrap();
        let h = s.scale().small_h;
        assert!(s.eigenvalue > 0.0 && s.eigenvalue < 1.0);
        assert!(s.right_residual < 1e-10 && s.left_residual < 1e-10);
        let n2: f64 = h * s.phi.iter().map(|x| x * x).sum::<f64>();
        assert!((n2 - 1.0).abs() < 1e-12);
        // Symmetric kernel: φ = φ*.
        for (a, b) in s.phi.iter().zip(&s.phi_star) {
            assert!((a - b).abs() <= 1e-9 * a.max(1e-300) + 1e-12);
        }
        let mu: f64 = s.invariant_measure().iter().sum();
        assert!((mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_mass_edges() {
        let s = TransferSpectrum::compute(&lazy(), &PotentialFamily::linear(), 1e-3, None).unwrap();
        let h = s.scale().small_h;
        assert_eq!(s.tail_mass(s.size() as f64 * h + 1e-9), 0.0);
        let full: f64 = h * s.phi.iter().sum::<f64>();
        assert!((s.tail_mass(0.0) - full).abs() < 1e-14);
    }

    #[test]
    fn dv_inner_at_eigenfunction_vanishes() {
        let s = TransferSpectrum::compute(&lazy(), &PotentialFamily::linear(), 1e-3, None).unwrap();
        let m = s.size();
        let mu: Vec<f64> = (0..m).map(|i| if i < 50 { 1.0 / 50.0 } else { 0.0 }).collect();
        assert!(s.dv_inner(&mu, &s.phi).unwrap().abs() < 1e-10);
        let mut u = s.phi.clone();
        u[3] = 0.0;
        assert!(matches!(
            s.dv_inner(&mu, &u),
            Err(Error::ZeroTestFunction { state: 4 })
        ));
    }
}
