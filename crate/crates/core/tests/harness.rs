use areatilt::chain::doob_transform;
use areatilt::continuum::{sl_solve, FsDiffusionModel};
use areatilt::harness::fdd::column;
use areatilt::harness::{
    chain_fdd_samples, fdd_compare, grid_project, meeting_probability, rescaled_norm, stay_positive_scaling,
    tightness_probe, tv_window, MeetingEndpoints,
};
use areatilt::model::{make_kernel, solve_scale, KernelSpec, PotentialFamily, WalkKernel};
use areatilt::rng::stream_rng;
use areatilt::spectral::TransferSpectrum;
use areatilt::stats::{ks_critical_99, ks_two_sample, BinGrid, EmpiricalDistribution};
use rand::Rng;

fn lazy() -> WalkKernel {
    make_kernel(&KernelSpec::LazyNearestNeighbor { a: 0.25 }).unwrap()
}

fn spectrum(lambda: f64) -> TransferSpectrum {
    TransferSpectrum::compute(&lazy(), &PotentialFamily::linear(), lambda, None).unwrap()
}

#[test]
fn null_two_sample_ks() {
    let chain = doob_transform(&spectrum(1e-3)).unwrap();
    let times = [0.0, 0.3];
    let a = chain_fdd_samples(&chain, &times, 10_000, 1).unwrap();
    let b = chain_fdd_samples(&chain, &times, 10_000, 2).unwrap();
    for j in 0..times.len() {
        let ea = EmpiricalDistribution::new(column(&a, j)).unwrap();
        let eb = EmpiricalDistribution::new(column(&b, j)).unwrap();
        let d = ks_two_sample(&ea, &eb);
        assert!(d < ks_critical_99(10_000, 10_000), "time {j}: {d}");
    }
    assert!(chain_fdd_samples(&chain, &times, 999, 1).is_err());
}

#[test]
fn projection_contracts() {
    let scale = solve_scale(&PotentialFamily::linear(), 1e-3).unwrap();
    let size = 80;
    let top = size as f64 * scale.small_h;
    let mut rng = stream_rng(5, 0);
    for _ in 0..20 {
        let (a, b, c, d): (f64, f64, f64, f64) = (
            rng.random_range(-2.0..2.0),
            rng.random_range(0.5..8.0),
            rng.random_range(0.0..6.3),
            rng.random_range(-1.0..1.0),
        );
        let f = move |s: f64| a * (b * s + c).sin() + d * s;
        let projected = grid_project(f, &scale, size);
        let fine = 200_000;
        let dx = top / fine as f64;
        let l2 = ((0..fine).map(|i| f((i as f64 + 0.5) * dx).powi(2)).sum::<f64>() * dx).sqrt();
        assert!(rescaled_norm(&projected, scale.small_h) <= l2 * (1.0 + 1e-9));
    }
}

#[test]
fn fdd_marginals_against_exact_lattice_law() {
    let s = spectrum(1e-3);
    let chain = doob_transform(&s).unwrap();
    let model = FsDiffusionModel::new(sl_solve(0.5, &PotentialFamily::linear(), 20.0, 4000, 2).unwrap()).unwrap();
    let sample = chain_fdd_samples(&chain, &[0.0, 0.5], 20_000, 3).unwrap();
    let cmp = fdd_compare(&sample, &[0.0, 0.5], &model, Some(&sample), BinGrid { upper: 4.0, bins: 30 }).unwrap();
    assert_eq!(cmp.pairs.len(), 1);
    assert_eq!(cmp.pairs[0].tv, 0.0);
    // At h = 0.1 the lattice law sits within a few percent of φ₀².
    assert!(cmp.marginals.iter().all(|m| m.ks < 0.07 && m.w1 < 0.05), "{:?}", cmp.marginals);
}

#[test]
fn tightness_probe_shape() {
    let chain = doob_transform(&spectrum(1e-3)).unwrap();
    let rows = tightness_probe(&chain, &[0.5, 10.0], &[0.4, 0.2, 0.1], 5000, 4).unwrap();
    for r in rows.iter().filter(|r| r.epsilon == 10.0) {
        assert_eq!(r.estimate, 0.0);
    }
    let mut eps: Vec<_> = rows.iter().filter(|r| r.epsilon == 0.5).collect();
    eps.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    assert!(eps.windows(2).all(|w| w[0].estimate <= w[1].estimate));
    assert!(eps.last().unwrap().estimate > 0.0);
}

#[test]
fn tv_window_preconditions_and_binning() {
    let s = spectrum(1e-2);
    let h2 = s.scale().time_scale();
    assert!(tv_window(&s, 1.0, &[h2 as usize], &[(1, 1)], 4.0, (20, 10)).is_err());
    assert!(tv_window(&s, 1.0, &[(3.0 * h2) as usize], &[(1, 1)], 4.0, (20, 7)).is_err());
    let ns = [(3.0 * h2) as usize, (8.0 * h2) as usize];
    let study = tv_window(&s, 1.0, &ns, &[(1, 1), (4, 4)], 4.0, (20, 10)).unwrap();
    for r in &study.rows {
        assert!(r.tv_coarse <= r.tv_fine + 1e-12);
        assert!(r.tv_fine <= r.tv_exact + 1e-12);
    }
    assert!(study.rows[2].tv_exact < study.rows[0].tv_exact);
}

#[test]
fn stay_positive_cap_and_range() {
    let rows = stay_positive_scaling(&lazy(), &[100, 400], 1, 1, &[1.0], 2.0).unwrap();
    for r in &rows {
        assert!(r.cap_effect >= 1.0 && r.cap_effect < 1.5, "{r:?}");
        assert!(r.probability > 0.0);
    }
    assert!(stay_positive_scaling(&lazy(), &[100], 1, 1, &[0.2], 2.0).is_err());
}

/// Monte Carlo `E[𝒩]` stays within three standard errors of the exact value
/// as the sample count grows tenfold.
#[test]
fn meeting_count_converges_to_exact() {
    let ends = MeetingEndpoints {
        x: 0.25,
        y: 0.5,
        z: 0.75,
        w: 1.0,
    };
    for samples in [400, 4000] {
        let row = &meeting_probability(&lazy(), &[144], ends, 2.0, samples, 6).unwrap()[0];
        let var = row.second_moment - row.mean_count.powi(2);
        let se = (var / samples as f64).sqrt();
        assert!((row.mean_count - row.mean_count_exact).abs() < 3.0 * se, "{row:?}");
        assert!(row.meeting >= row.pz_floor);
    }
    let same = MeetingEndpoints {
        x: 0.5,
        y: 0.5,
        z: 0.5,
        w: 1.0,
    };
    let row = &meeting_probability(&lazy(), &[100], same, 2.0, 200, 1).unwrap()[0];
    assert_eq!(row.meeting, 1.0);
}
