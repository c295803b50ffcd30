use areatilt::continuum::{
    fs_semigroup_apply, sample_fs_fdd, simulate_fs, sl_solve, FsDiffusionModel, SturmLiouvilleSpectrum,
};
use areatilt::model::PotentialFamily;
use areatilt::stats::{ks_one_sample, mean_stderr, EmpiricalDistribution};

fn model() -> FsDiffusionModel {
    FsDiffusionModel::new(sl_solve(0.5, &PotentialFamily::linear(), 20.0, 4000, 3).unwrap()).unwrap()
}

fn pairs(m: &FsDiffusionModel, t: f64, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    sample_fs_fdd(m, &[0.0, t], 8e-5, samples, seed).unwrap().0
}

#[test]
fn stationary_law_is_preserved() {
    let m = model();
    let sample = pairs(&m, 1.0, 5000, 1);
    for j in 0..2 {
        let emp = EmpiricalDistribution::new(sample.iter().map(|r| r[j]).collect()).unwrap();
        let ks = ks_one_sample(&emp, |r| m.stationary_cdf(r));
        // 99% one-sample critical value at n = 5000 is ≈ 0.023.
        assert!(ks < 0.023, "time {j}: KS {ks}");
    }
}

/// `ψ = φ₁/φ₀` is an eigenfunction of the generator, so its stationary
/// autocovariance is `e^{−(e₁ − e₀) t}`.
#[test]
fn autocovariance_decays_at_the_gap() {
    let m = model();
    let s: &SturmLiouvilleSpectrum = m.spectrum();
    let gap = s.eigenvalues[1] - s.eigenvalues[0];
    let psi = |r: f64| s.eval(1, r) / s.eval(0, r);
    for (t, seed) in [(0.25, 2), (0.75, 3)] {
        let sample = pairs(&m, t, 8000, seed);
        let products: Vec<f64> = sample.iter().map(|r| psi(r[0]) * psi(r[1])).collect();
        let (mean, se) = mean_stderr(&products);
        let expected = (-gap * t).exp();
        assert!((mean - expected).abs() < 4.0 * se, "t = {t}: {mean} ± {se} vs {expected}");
    }
}

/// Reversibility: `E[f(X₀) g(X_t)] = E[g(X₀) f(X_t)]`.
#[test]
fn time_reversal_symmetry() {
    let m = model();
    let sample = pairs(&m, 0.5, 8000, 4);
    let diffs: Vec<f64> = sample
        .iter()
        .map(|r| r[0] * r[1] * r[1] - r[1] * r[0] * r[0])
        .collect();
    let (mean, se) = mean_stderr(&diffs);
    assert!(mean.abs() < 4.0 * se, "{mean} ± {se}");
}

#[test]
fn semigroup_composes() {
    let m = model();
    let s = m.spectrum();
    let psi: Vec<f64> = s.grid.iter().map(|r| (-(r - 1.5).powi(2)).exp()).collect();
    let two_step = fs_semigroup_apply(s, &fs_semigroup_apply(s, &psi, 0.2).unwrap(), 0.3).unwrap();
    let direct = fs_semigroup_apply(s, &psi, 0.5).unwrap();
    let interior = s.grid.iter().zip(two_step.iter().zip(&direct)).filter(|(r, _)| **r > 0.2 && **r < 5.0);
    for (_, (a, b)) in interior {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    assert!(fs_semigroup_apply(s, &psi, -1.0).is_err());
}

#[test]
fn long_path_diagnostics() {
    let m = model();
    let path = simulate_fs(&m, 1.0, 5e-5, 7).unwrap();
    assert_eq!(path.times.len(), path.values.len());
    assert!(path.values.iter().all(|&x| x > 0.0 && x < 20.0));
    assert!(path.diagnostics.escapes < 10);
    assert_eq!(simulate_fs(&m, 1.0, 5e-5, 7).unwrap(), path);
    assert!(simulate_fs(&m, 1.0, 1e-2, 7).is_err());
}
