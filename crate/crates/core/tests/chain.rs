use areatilt::chain::{doob_transform, rescale, sample_stationary, GroundStateChain};
use areatilt::model::{make_kernel, KernelSpec, PotentialFamily};
use areatilt::rng::stream_rng;
use areatilt::spectral::TransferSpectrum;

fn chain(spec: KernelSpec, lambda: f64) -> GroundStateChain {
    let k = make_kernel(&spec).unwrap();
    let s = TransferSpectrum::compute(&k, &PotentialFamily::linear(), lambda, None).unwrap();
    doob_transform(&s).unwrap()
}

fn lazy_chain(lambda: f64) -> GroundStateChain {
    chain(KernelSpec::LazyNearestNeighbor { a: 0.25 }, lambda)
}

#[test]
fn invariant_sampling_matches_mu() {
    let c = lazy_chain(1e-2);
    let mu = c.spectrum().invariant_measure();
    let n = 200_000;
    let mut counts = vec![0.0; c.size()];
    let mut rng = stream_rng(3, 0);
    for _ in 0..n {
        counts[c.sample_invariant(&mut rng)] += 1.0 / n as f64;
    }
    let l1: f64 = counts.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
    assert!(l1 < 0.02, "ℓ¹ = {l1}");
}

/// Lag-1 pair frequencies along a long stationary run reproduce `μ(x)π(x,y)`.
#[test]
fn lag_one_frequencies() {
    let c = lazy_chain(1e-2);
    let mu = c.spectrum().invariant_measure();
    let path = c.run(400_000, &mut stream_rng(4, 0));
    let mut worst: f64 = 0.0;
    for x in 0..8usize {
        for dy in -1i64..=1 {
            let y = x as i64 + dy;
            if y < 0 {
                continue;
            }
            let y = y as usize;
            let count = path.windows(2).filter(|w| w[0] == x && w[1] == y).count() as f64;
            let freq = count / (path.len() - 1) as f64;
            let expected = mu[x] * c.transition(x + 1, y + 1);
            // Dependent samples: allow several (i.i.d.) standard errors.
            let se = (expected / path.len() as f64).sqrt();
            worst = worst.max((freq - expected).abs() / se);
        }
    }
    assert!(worst < 8.0, "worst normalized deviation {worst}");
}

/// Running the reversed kernel and flipping time gives π-transition statistics.
#[test]
fn reversed_chain_reverses_time() {
    let c = chain(
        KernelSpec::Weights(vec![(-1, 0.4), (0, 0.4), (2, 0.2)]),
        1e-2,
    );
    assert!(c.reversal_defect() < 1e-12);
    let mu = c.spectrum().invariant_measure();
    let mut rng = stream_rng(9, 0);
    let mut x = c.sample_invariant(&mut rng);
    let mut reversed = vec![x];
    for _ in 0..300_000 {
        let r: f64 = rand::Rng::random(&mut rng);
        let mut acc = 0.0;
        let mut next = c.size() - 1;
        for y in 0..c.size() {
            acc += c.reversed_transition(x + 1, y + 1);
            if r < acc {
                next = y;
                break;
            }
        }
        x = next;
        reversed.push(x);
    }
    reversed.reverse();
    let x0 = mu
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    let visits = reversed[..reversed.len() - 1].iter().filter(|&&x| x == x0).count() as f64;
    for dy in -1i64..=2 {
        let y = (x0 as i64 + dy) as usize;
        let moves = reversed.windows(2).filter(|w| w[0] == x0 && w[1] == y).count() as f64;
        let p = c.transition(x0 + 1, y + 1);
        let se = (p * (1.0 - p) / visits).sqrt();
        assert!((moves / visits - p).abs() < 5.0 * se + 1e-3, "dy = {dy}: {} vs {p}", moves / visits);
    }
}

#[test]
fn stationary_window_and_rescaling() {
    let c = lazy_chain(1e-3);
    let path = sample_stationary(&c, 1.0, 8).unwrap();
    assert_eq!(path.start_index, -100);
    assert_eq!(path.end_index(), 100);
    assert!(path.values.iter().all(|&v| v >= 1));
    let r = rescale(&path, c.scale());
    assert!((r.times[0] + 1.0).abs() < 1e-12);
    assert!((r.eval(0.0) - path.at(0).unwrap() as f64 * 0.1).abs() < 1e-12);
    assert_eq!(sample_stationary(&c, 1.0, 8).unwrap(), path);
    assert_ne!(sample_stationary(&c, 1.0, 9).unwrap(), path);
}

#[test]
fn rows_are_stochastic_for_geometric_kernel() {
    let c = chain(KernelSpec::TruncatedGeometric { rho: 0.3, range: 40 }, 1e-3);
    for x in 1..=c.size() {
        let s: f64 = (1..=c.size()).map(|y| c.transition(x, y)).sum();
        assert!((s - 1.0).abs() < 1e-12, "row {x}: {s}");
    }
    assert!(c.stationarity_defect() < 1e-10);
}
