//! Exact partition functions, marginals and samples for area-tilted positive
//! bridges, by a backward dynamic programme over time.
//!
//! A path `X_0 = u, …, X_n = v` on `{1..M}` carries weight
//! `Π p_{X_{k+1} − X_k} · Π_k w_k(X_k)`, where `w_k(x) = e^{−V_λ(x)}` inside
//! the allowed window at time `k` and `0` outside. With `n = 2N` and no
//! windows this is the tilted bridge `P^{u,v}_{N,+,λ}`.

use rand::Rng;
use rayon::prelude::*;

use crate::chain::LatticePath;
use crate::error::{Error, Result};
use crate::model::{solve_scale, PotentialFamily, WalkKernel};
use crate::rng::stream_rng;
use crate::spectral::default_truncation;

/// Allowed states per time index, as inclusive lattice intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    windows: Vec<(usize, usize)>,
}

impl Constraint {
    /// Every time index `0..=steps` allows `lo..=hi`.
    pub fn tube(steps: usize, lo: usize, hi: usize) -> Self {
        Self {
            windows: vec![(lo, hi); steps + 1],
        }
    }

    pub fn from_windows(windows: Vec<(usize, usize)>) -> Self {
        Self { windows }
    }

    pub fn unconstrained(steps: usize) -> Self {
        Self::tube(steps, 1, usize::MAX)
    }

    /// Restricts time index `k` to `lo..=hi` (intersecting with what is there).
    pub fn restrict(mut self, k: usize, lo: usize, hi: usize) -> Self {
        let w = &mut self.windows[k];
        *w = (w.0.max(lo), w.1.min(hi));
        self
    }

    pub fn steps(&self) -> usize {
        self.windows.len() - 1
    }

    pub fn window(&self, k: usize) -> (usize, usize) {
        self.windows[k]
    }
}

/// `log Z` of a constrained ensemble. `log_z = −∞` when the constraint leaves
/// no admissible path; `empty_at` then names the first time index (from the
/// end) at which the backward weights vanished.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedLogZ {
    pub log_z: f64,
    pub empty_at: Option<usize>,
}

impl RestrictedLogZ {
    pub fn is_empty(&self) -> bool {
        self.empty_at.is_some()
    }
}

/// Backward table for one `(u, v, n)` ensemble.
#[derive(Debug, Clone)]
pub struct BridgeEnsemble {
    jumps: Vec<(i64, f64)>,
    size: usize,
    start: usize,
    end: usize,
    start_index: i64,
    /// `e^{−V(x)}` for `x = 1..=size`.
    site: Vec<f64>,
    windows: Vec<(usize, usize)>,
    /// `ĝ_k`, each normalized to max 1.
    backward: Vec<Vec<f64>>,
    log_z: f64,
    empty_at: Option<usize>,
}

impl BridgeEnsemble {
    /// Builds the ensemble of `steps`-step paths from `u` to `v` on `{1..M}`
    /// with site weights `weights[x − 1]` and an optional constraint. Time
    /// index `k` of the DP is reported as `start_index + k` in sampled paths.
    pub fn new(
        kernel: &WalkKernel,
        weights: Vec<f64>,
        u: usize,
        v: usize,
        steps: usize,
        start_index: i64,
        constraint: Option<&Constraint>,
    ) -> Result<Self> {
        let size = weights.len();
        if u == 0 || v == 0 || u > size || v > size {
            return Err(Error::param(
                "u, v",
                format!("endpoints must lie in 1..={size}"),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::param("weights", "must be finite and nonnegative"));
        }
        let windows = match constraint {
            Some(c) if c.steps() != steps => {
                return Err(Error::param("constraint", "length must be steps + 1"))
            }
            Some(c) => c
                .windows
                .iter()
                .map(|&(lo, hi)| (lo.max(1), hi.min(size)))
                .collect(),
            None => vec![(1, size); steps + 1],
        };
        let mut ensemble = Self {
            jumps: kernel.iter().collect(),
            size,
            start: u,
            end: v,
            start_index,
            site: weights,
            windows,
            backward: Vec::new(),
            log_z: f64::NEG_INFINITY,
            empty_at: None,
        };
        ensemble.build_backward();
        Ok(ensemble)
    }

    fn weight(&self, k: usize, x: usize) -> f64 {
        let (lo, hi) = self.windows[k];
        if x >= lo && x <= hi {
            self.site[x - 1]
        } else {
            0.0
        }
    }

    fn build_backward(&mut self) {
        let steps = self.windows.len() - 1;
        let m = self.size;
        let mut table = vec![vec![0.0; m]; steps + 1];
        let mut log_scale = 0.0;
        let mut empty_at = None;
        table[steps][self.end - 1] = self.weight(steps, self.end);
        if table[steps][self.end - 1] == 0.0 {
            empty_at = Some(steps);
        }
        for k in (0..steps).rev() {
            if empty_at.is_some() {
                break;
            }
            let (lo, hi) = self.windows[k];
            let mut peak: f64 = 0.0;
            for x in lo..=hi.min(m) {
                let w = self.site[x - 1];
                if w == 0.0 {
                    continue;
                }
                let mut s = 0.0;
                for &(z, p) in &self.jumps {
                    let y = x as i64 + z;
                    if y >= 1 && y as usize <= m {
                        s += p * table[k + 1][y as usize - 1];
                    }
                }
                table[k][x - 1] = w * s;
                peak = peak.max(w * s);
            }
            if peak == 0.0 {
                empty_at = Some(k);
                break;
            }
            table[k].iter_mut().for_each(|g| *g /= peak);
            log_scale += peak.ln();
        }
        self.backward = table;
        let g0 = self.backward[0][self.start - 1];
        self.log_z = match empty_at {
            None if g0 > 0.0 => g0.ln() + log_scale,
            _ => f64::NEG_INFINITY,
        };
        if empty_at.is_none() && g0 == 0.0 {
            empty_at = Some(0);
        }
        self.empty_at = empty_at;
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn restricted(&self) -> RestrictedLogZ {
        RestrictedLogZ {
            log_z: self.log_z,
            empty_at: self.empty_at,
        }
    }

    pub fn steps(&self) -> usize {
        self.windows.len() - 1
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Normalized forward vectors `f̂_k` and the forward `log Z`.
    fn forward(&self) -> (Vec<Vec<f64>>, f64) {
        let steps = self.steps();
        let m = self.size;
        let mut table = vec![vec![0.0; m]; steps + 1];
        table[0][self.start - 1] = self.weight(0, self.start);
        let mut log_scale = 0.0;
        for k in 0..steps {
            let peak = table[k].iter().cloned().fold(0.0, f64::max);
            if peak == 0.0 {
                return (table, f64::NEG_INFINITY);
            }
            log_scale += peak.ln();
            let (prev, next) = table.split_at_mut(k + 1);
            let prev = &mut prev[k];
            prev.iter_mut().for_each(|f| *f /= peak);
            for (x, &f) in prev.iter().enumerate() {
                if f == 0.0 {
                    continue;
                }
                for &(z, p) in &self.jumps {
                    let y = x as i64 + 1 + z;
                    if y >= 1 && y as usize <= m {
                        next[0][y as usize - 1] += f * p;
                    }
                }
            }
            for y in 1..=m {
                next[0][y - 1] *= self.weight(k + 1, y);
            }
        }
        let last = table[steps][self.end - 1];
        let log_z = if last > 0.0 {
            last.ln() + log_scale
        } else {
            f64::NEG_INFINITY
        };
        (table, log_z)
    }

    /// `log Z` recomputed by the forward recursion.
    pub fn forward_log_z(&self) -> f64 {
        self.forward().1
    }

    /// Exact one-time marginals `P(X_k = x)` for `k = 0..=steps`.
    pub fn marginals(&self) -> Result<Vec<Vec<f64>>> {
        if self.empty_at.is_some() {
            return Err(Error::EmptyPathSpace {
                from: self.start,
                to: self.end,
            });
        }
        let (forward, _) = self.forward();
        Ok(forward
            .iter()
            .zip(&self.backward)
            .enumerate()
            .map(|(k, (f, g))| {
                let mut row: Vec<f64> = (0..self.size)
                    .map(|i| {
                        let w = self.weight(k, i + 1);
                        if w > 0.0 {
                            f[i] * g[i] / w
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|r| *r /= total);
                row
            })
            .collect())
    }

    /// One exact sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LatticePath> {
        if self.empty_at.is_some() {
            return Err(Error::EmptyPathSpace {
                from: self.start,
                to: self.end,
            });
        }
        let steps = self.steps();
        let mut values = Vec::with_capacity(steps + 1);
        let mut x = self.start;
        values.push(x as u32);
        let mut weights = Vec::with_capacity(self.jumps.len());
        for k in 0..steps {
            weights.clear();
            let next = &self.backward[k + 1];
            let mut total = 0.0;
            for &(z, p) in &self.jumps {
                let y = x as i64 + z;
                let w = if y >= 1 && y as usize <= self.size {
                    p * next[y as usize - 1]
                } else {
                    0.0
                };
                total += w;
                weights.push((y, w));
            }
            if !(total > 0.0) {
                return Err(Error::DeadEnd { step: k, state: x });
            }
            let mut u = rng.random::<f64>() * total;
            let mut chosen = None;
            for &(y, w) in &weights {
                if w > 0.0 {
                    chosen = Some(y);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            x = chosen.expect("positive total has a positive entry") as usize;
            values.push(x as u32);
        }
        Ok(LatticePath {
            start_index: self.start_index,
            values,
        })
    }

    /// `count` samples; sample `i` uses stream `i` of `seed`.
    pub fn sample_many(&self, count: usize, seed: u64) -> Result<Vec<LatticePath>> {
        (0..count)
            .into_par_iter()
            .map(|i| self.sample(&mut stream_rng(seed, i as u64)))
            .collect()
    }
}

/// `log Z` of a constrained ensemble without storing the backward table:
/// `O(M)` memory, for long untilted walks where only the weight is needed.
pub fn path_log_z(
    kernel: &WalkKernel,
    weights: &[f64],
    u: usize,
    v: usize,
    steps: usize,
    constraint: Option<&Constraint>,
) -> Result<RestrictedLogZ> {
    let m = weights.len();
    if u == 0 || v == 0 || u > m || v > m {
        return Err(Error::param("u, v", format!("endpoints must lie in 1..={m}")));
    }
    if let Some(c) = constraint {
        if c.steps() != steps {
            return Err(Error::param("constraint", "length must be steps + 1"));
        }
    }
    let window = |k: usize| -> (usize, usize) {
        constraint.map_or((1, m), |c| {
            let (lo, hi) = c.window(k);
            (lo.max(1), hi.min(m))
        })
    };
    let jumps: Vec<(i64, f64)> = kernel.iter().collect();
    let mut g = vec![0.0; m];
    let (lo, hi) = window(steps);
    if v >= lo && v <= hi {
        g[v - 1] = weights[v - 1];
    }
    let mut next = vec![0.0; m];
    let mut log_scale = 0.0;
    for k in (0..=steps).rev() {
        let peak = g.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return Ok(RestrictedLogZ {
                log_z: f64::NEG_INFINITY,
                empty_at: Some(k),
            });
        }
        g.iter_mut().for_each(|x| *x /= peak);
        log_scale += peak.ln();
        if k == 0 {
            break;
        }
        let (lo, hi) = window(k - 1);
        next.iter_mut().for_each(|x| *x = 0.0);
        for x in lo..=hi {
            let w = weights[x - 1];
            if w == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for &(z, p) in &jumps {
                let y = x as i64 + z;
                if y >= 1 && y as usize <= m {
                    s += p * g[y as usize - 1];
                }
            }
            next[x - 1] = w * s;
        }
        std::mem::swap(&mut g, &mut next);
    }
    let g0 = g[u - 1];
    Ok(if g0 > 0.0 {
        RestrictedLogZ {
            log_z: g0.ln() + log_scale,
            empty_at: None,
        }
    } else {
        RestrictedLogZ {
            log_z: f64::NEG_INFINITY,
            empty_at: Some(0),
        }
    })
}

/// `e^{−β V_λ(x)}` for `x = 1..=M`.
pub fn tilt_weights(potential: &PotentialFamily, lambda: f64, beta: f64, size: usize) -> Vec<f64> {
    (1..=size)
        .map(|x| (-beta * potential.eval(lambda, x as f64)).exp())
        .collect()
}

/// Truncation for a `2N`-step bridge: exact (never binding) when every path
/// from `u` to `v` fits below the spectral default, otherwise the default.
pub fn bridge_truncation(
    kernel: &WalkKernel,
    potential: &PotentialFamily,
    lambda: f64,
    u: usize,
    v: usize,
    n_half: usize,
) -> Result<usize> {
    let top = u.max(v);
    let reach = top.saturating_add(n_half.saturating_mul(kernel.range()));
    let scale = solve_scale(potential, lambda)?;
    let default = default_truncation(potential, &scale)?;
    Ok(reach.min(default.max(top + kernel.range())))
}

/// The tilted bridge `P^{u,v}_{N,+,λ}` over time indices `−N..=N`.
pub fn tilted_bridge(
    kernel: &WalkKernel,
    potential: &PotentialFamily,
    lambda: f64,
    u: usize,
    v: usize,
    n_half: usize,
    truncation: Option<usize>,
    constraint: Option<&Constraint>,
) -> Result<BridgeEnsemble> {
    if n_half == 0 {
        return Err(Error::param("N", "must be at least 1"));
    }
    if u == 0 || v == 0 {
        return Err(Error::param("u, v", "endpoints must be at least 1"));
    }
    let size = match truncation {
        Some(m) => m,
        None => bridge_truncation(kernel, potential, lambda, u, v, n_half)?,
    };
    let weights = tilt_weights(potential, lambda, 1.0, size);
    BridgeEnsemble::new(
        kernel,
        weights,
        u,
        v,
        2 * n_half,
        -(n_half as i64),
        constraint,
    )
}

/// `log Z^{u,v}_{N,+,λ}`.
pub fn partition_function(
    kernel: &WalkKernel,
    potential: &PotentialFamily,
    lambda: f64,
    u: usize,
    v: usize,
    n_half: usize,
) -> Result<f64> {
    let e = tilted_bridge(kernel, potential, lambda, u, v, n_half, None, None)?;
    if e.log_z().is_finite() {
        Ok(e.log_z())
    } else {
        Err(Error::EmptyPathSpace { from: u, to: v })
    }
}

/// `log Z` restricted to paths obeying `constraint` (time index `k` of the
/// constraint is lattice time `k − N`).
pub fn restricted_partition(
    kernel: &WalkKernel,
    potential: &PotentialFamily,
    lambda: f64,
    u: usize,
    v: usize,
    n_half: usize,
    constraint: &Constraint,
) -> Result<RestrictedLogZ> {
    Ok(tilted_bridge(kernel, potential, lambda, u, v, n_half, None, Some(constraint))?.restricted())
}

/// One exact sample of `P^{u,v}_{N,+,λ}`.
pub fn sample_bridge(
    kernel: &WalkKernel,
    potential: &PotentialFamily,
    lambda: f64,
    u: usize,
    v: usize,
    n_half: usize,
    seed: u64,
) -> Result<LatticePath> {
    tilted_bridge(kernel, potential, lambda, u, v, n_half, None, None)?.sample(&mut stream_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_kernel, KernelSpec};

    fn lazy() -> WalkKernel {
        make_kernel(&KernelSpec::LazyNearestNeighbor { a: 0.25 }).unwrap()
    }

    #[test]
    fn single_step_by_hand() {
        // N = 1: X_{−1} = 1, X_0, X_1 = 2 — the only paths are 1→1→2, 1→2→2.
        let k = lazy();
        let v = |x: f64| x;
        let expected = (0.5 * 0.25 * (-(v(1.0) + v(1.0) + v(2.0))).exp()
            + 0.25 * 0.5 * (-(v(1.0) + v(2.0) + v(2.0))).exp())
        .ln();
        let got = partition_function(&k, &PotentialFamily::linear(), 1.0, 1, 2, 1).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn forward_equals_backward() {
        let k = lazy();
        let e = tilted_bridge(&k, &PotentialFamily::linear(), 1e-3, 3, 7, 200, None, None).unwrap();
        assert!((e.log_z() - e.forward_log_z()).abs() < 1e-10 * e.log_z().abs());
    }

    #[test]
    fn constraints() {
        let k = lazy();
        let lin = PotentialFamily::linear();
        let full = partition_function(&k, &lin, 0.5, 1, 1, 4).unwrap();
        let same = restricted_partition(&k, &lin, 0.5, 1, 1, 4, &Constraint::unconstrained(8)).unwrap();
        assert_eq!(same.log_z, full);
        let blocked = Constraint::unconstrained(8).restrict(3, 10, 9);
        let r = restricted_partition(&k, &lin, 0.5, 1, 1, 4, &blocked).unwrap();
        assert!(r.is_empty() && r.log_z == f64::NEG_INFINITY);
        let tube = restricted_partition(&k, &lin, 0.5, 1, 1, 4, &Constraint::tube(8, 1, 2)).unwrap();
        assert!(tube.log_z < full);
        let weights = tilt_weights(&lin, 0.5, 1.0, 5);
        let light = path_log_z(&k, &weights, 1, 1, 8, Some(&Constraint::tube(8, 1, 2))).unwrap();
        assert!((light.log_z - tube.log_z).abs() < 1e-13);
        let free = path_log_z(&k, &weights, 1, 1, 8, None).unwrap();
        assert!((free.log_z - full).abs() < 1e-13);
    }

    #[test]
    fn samples_respect_endpoints_and_determinism() {
        let k = lazy();
        let lin = PotentialFamily::linear();
        let a = sample_bridge(&k, &lin, 1e-2, 2, 5, 30, 11).unwrap();
        let b = sample_bridge(&k, &lin, 1e-2, 2, 5, 30, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.start_index, -30);
        assert_eq!(a.values[0], 2);
        assert_eq!(*a.values.last().unwrap(), 5);
        assert!(a.values.iter().all(|&x| x >= 1));
    }
}
