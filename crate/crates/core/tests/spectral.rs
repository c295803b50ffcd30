use areatilt::model::{make_kernel, KernelSpec, PotentialFamily, WalkKernel};
use areatilt::spectral::{build_operator, leading_eigenpair, TransferSpectrum};
use nalgebra::{DMatrix, SymmetricEigen};

fn lazy() -> WalkKernel {
    make_kernel(&KernelSpec::LazyNearestNeighbor { a: 0.25 }).unwrap()
}

fn dense_top(op: &areatilt::spectral::TransferOperator) -> (f64, Vec<f64>) {
    let d = op.matrix().to_dense();
    let n = d.len();
    let m = DMatrix::from_fn(n, n, |i, j| d[i][j]);
    let eig = SymmetricEigen::new(m);
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let v: Vec<f64> = eig.eigenvectors.column(idx).iter().map(|x| x.abs()).collect();
    (*val, v)
}

#[test]
fn three_site_operator_matches_dense_oracle() {
    let op = build_operator(&lazy(), &PotentialFamily::linear(), 1.0, Some(3)).unwrap();
    let pair = leading_eigenpair(op.matrix(), 1e-14, 100).unwrap();
    let (val, vec) = dense_top(&op);
    assert!((pair.value - val).abs() < 1e-14);
    let scale = pair.right[0] / vec[0];
    for (a, b) in pair.right.iter().zip(&vec) {
        assert!((a - scale * b).abs() < 1e-12);
    }
}

#[test]
fn fifty_site_operator_matches_dense_oracle() {
    let op = build_operator(&lazy(), &PotentialFamily::linear(), 0.1, Some(50)).unwrap();
    let pair = leading_eigenpair(op.matrix(), 1e-13, 1000).unwrap();
    let (val, _) = dense_top(&op);
    assert!((pair.value - val).abs() < 1e-10, "{} vs {}", pair.value, val);
}

#[test]
fn asymmetric_kernel_left_and_right_vectors() {
    let k = make_kernel(&KernelSpec::Weights(vec![
        (-2, 0.1),
        (-1, 0.2),
        (0, 0.3),
        (1, 0.4),
    ]))
    .unwrap();
    let s = TransferSpectrum::compute(&k, &PotentialFamily::linear(), 1e-3, None).unwrap();
    let a = s.operator().matrix();
    let right = a.mul_vec(&s.phi);
    let left = a.transpose().mul_vec(&s.phi_star);
    for i in 0..s.size() {
        assert!((right[i] - s.eigenvalue * s.phi[i]).abs() < 1e-10);
        assert!((left[i] - s.eigenvalue * s.phi_star[i]).abs() < 1e-10);
    }
    let overlap: f64 = s.phi.iter().zip(&s.phi_star).map(|(a, b)| a * b).sum();
    assert!((1.0 / s.c - overlap).abs() < 1e-12 * overlap);
    assert!(s.phi.iter().zip(&s.phi_star).any(|(a, b)| (a - b).abs() > 1e-6));
}

#[test]
fn eigenvalue_sandwich_across_lambda() {
    let mut es = Vec::new();
    for k in 2..=7 {
        let s = TransferSpectrum::compute(&lazy(), &PotentialFamily::linear(), 10f64.powi(-k), None)
            .unwrap();
        assert!(s.eigenvalue < 1.0 && s.eigenvalue > 0.0);
        es.push(s.e);
    }
    // Continuum value for σ² = 1/2, q(r) = r is 2.33811·(1/4)^{1/3} ≈ 1.4729.
    eprintln!("{es:?}");
    for e in &es {
        assert!(*e > 1.0 && *e < 2.0, "{es:?}");
    }
}

#[test]
fn truncation_stability() {
    for lambda in [1e-3, 1e-4] {
        let base = TransferSpectrum::compute(&lazy(), &PotentialFamily::linear(), lambda, None).unwrap();
        let doubled = TransferSpectrum::compute(
            &lazy(),
            &PotentialFamily::linear(),
            lambda,
            Some(2 * base.size()),
        )
        .unwrap();
        let rel = (base.eigenvalue - doubled.eigenvalue).abs() / base.eigenvalue;
        assert!(rel < 1e-12, "lambda {lambda}: {rel:e}");
    }
}

#[test]
fn tail_decays_fast() {
    let s = TransferSpectrum::compute(&lazy(), &PotentialFamily::linear(), 1e-4, None).unwrap();
    let ratio = s.tail_mass(3.0) / s.tail_mass(1.0);
    assert!(ratio < (-1.0f64).exp(), "{ratio}");
}

#[test]
fn c_over_h_near_one() {
    let s = TransferSpectrum::compute(&lazy(), &PotentialFamily::linear(), 1e-4, None).unwrap();
    assert!(s.c_over_h() > 0.9 && s.c_over_h() < 1.1);
}
