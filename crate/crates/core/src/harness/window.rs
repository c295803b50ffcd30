//! Total variation between the window law of a long tilted bridge and that of
//! the stationary ground-state chain, computed exactly.
//!
//! On the window `[−n, n]`, `n = ⌈T H²⌉`, both laws have the form
//! `α(X_{−n}) · Π T̃(X_i, X_{i+1}) · β(X_n)`: for the chain `α = c φ* E^{−2n}`
//! and `β = φ`; for the bridge `α = e^{−V(u)/2} T̃^{N−n}(u, ·)` and
//! `β = T̃^{N−n}(·, v) e^{−V(v)/2}`, up to `Z`. The likelihood ratio therefore
//! depends on the window endpoints only, and the TV of the whole window law
//! equals the TV of the endpoint-pair laws, which are computed exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::TransferSpectrum;
use crate::stats::total_variation;

/// `T̃^{2n}(a, ·)` for every start `a`, each row stored normalized with its
/// log scale.
#[derive(Debug, Clone)]
pub struct WindowKernel {
    pub half_window: usize,
    size: usize,
    rows: Vec<Vec<f64>>,
    log_scales: Vec<f64>,
}

fn propagate(v: &mut Vec<f64>, steps: usize, step: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut log_scale = 0.0;
    for _ in 0..steps {
        *v = step(v);
        let peak = v.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            v.iter_mut().for_each(|x| *x /= peak);
            log_scale += peak.ln();
        }
    }
    log_scale
}

impl WindowKernel {
    pub fn new(spectrum: &TransferSpectrum, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::param("T", "must be positive"));
        }
        let half_window = (horizon * spectrum.scale().time_scale()).ceil() as usize;
        let matrix = spectrum.operator().matrix();
        let size = spectrum.size();
        let (rows, log_scales) = (0..size)
            .into_par_iter()
            .map(|a| {
                let mut v = vec![0.0; size];
                v[a] = 1.0;
                let ls = propagate(&mut v, 2 * half_window, |x| matrix.vec_mul(x));
                (v, ls)
            })
            .unzip();
        Ok(Self {
            half_window,
            size,
            rows,
            log_scales,
        })
    }

    /// Normalized pair law `∝ α(a) T̃^{2n}(a, b) β(b)`, row-major `M × M`,
    /// with `α = α̂ e^{log_alpha}` given per row in log form.
    fn pair_law(&self, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.size)
            .map(|a| if alpha[a] > 0.0 { alpha[a].ln() + self.log_scales[a] } else { f64::NEG_INFINITY })
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut law = vec![0.0; self.size * self.size];
        for a in 0..self.size {
            let wa = (logs[a] - top).exp();
            if wa == 0.0 {
                continue;
            }
            for b in 0..self.size {
                law[a * self.size + b] = wa * self.rows[a][b] * beta[b];
            }
        }
        let total: f64 = law.iter().sum();
        law.iter_mut().for_each(|p| *p /= total);
        law
    }
}

/// Endpoint-pair law of the stationary chain on the window.
pub fn chain_pair_law(spectrum: &TransferSpectrum, kernel: &WindowKernel) -> Vec<f64> {
    kernel.pair_law(&spectrum.phi_star, &spectrum.phi)
}

/// Endpoint-pair law of the bridge `P^{u,v}_{N,+,λ}` on the window.
pub fn bridge_pair_law(
    spectrum: &TransferSpectrum,
    kernel: &WindowKernel,
    u: usize,
    v: usize,
    n_half: usize,
) -> Result<Vec<f64>> {
    let size = spectrum.size();
    if u == 0 || v == 0 || u > size || v > size {
        return Err(Error::param("u, v", format!("must lie in 1..={size}")));
    }
    if n_half < kernel.half_window {
        return Err(Error::param("N", "bridge shorter than the window"));
    }
    let matrix = spectrum.operator().matrix();
    let half = spectrum.operator().half_weights();
    let outer = n_half - kernel.half_window;
    let mut left = vec![0.0; size];
    left[u - 1] = half[u - 1];
    propagate(&mut left, outer, |x| matrix.vec_mul(x));
    let mut right = vec![0.0; size];
    right[v - 1] = half[v - 1];
    propagate(&mut right, outer, |x| matrix.mul_vec(x));
    Ok(kernel.pair_law(&left, &right))
}

/// Coarse-grains a pair law: site `x` sits at the cell midpoint `(x − ½)h`
/// and is binned into `bins` equal cells on `[0, upper]` (edge cells absorb
/// the overflow).
pub fn bin_pair_law(law: &[f64], size: usize, small_h: f64, upper: f64, bins: usize) -> Vec<f64> {
    let cell = |x: usize| {
        let r = (x as f64 + 0.5) * small_h;
        ((r / upper * bins as f64).floor() as usize).min(bins - 1)
    };
    let mut out = vec![0.0; bins * bins];
    for a in 0..size {
        let ca = cell(a);
        for b in 0..size {
            out[ca * bins + cell(b)] += law[a * size + b];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRow {
    pub n_half: usize,
    pub n_over_h2: f64,
    pub u: usize,
    pub v: usize,
    pub tv_exact: f64,
    pub tv_fine: f64,
    pub tv_coarse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStudy {
    pub half_window: usize,
    pub rows: Vec<WindowRow>,
    /// Exact TV between the bridge window laws for the first two endpoint
    /// pairs at the largest `N`.
    pub endpoint_uniformity: Option<f64>,
    /// Fitted `c` in `TV ≈ A e^{−c N/H²}` from the smallest and largest `N`
    /// of the first endpoint pair.
    pub decay_rate: Option<f64>,
}

/// Window TV for every `(N, (u, v))`; `N` values below `(T + 1) H²` are
/// rejected.
pub fn tv_window(
    spectrum: &TransferSpectrum,
    horizon: f64,
    n_values: &[usize],
    endpoints: &[(usize, usize)],
    upper: f64,
    bins: (usize, usize),
) -> Result<WindowStudy> {
    let scale = *spectrum.scale();
    let h2 = scale.time_scale();
    if let Some(&n) = n_values.iter().find(|&&n| (n as f64) < (horizon + 1.0) * h2) {
        return Err(Error::param(
            "N",
            format!("N = {n} is below (T + 1) H^2 = {:.1}", (horizon + 1.0) * h2),
        ));
    }
    if bins.0 % bins.1 != 0 {
        return Err(Error::param("bins", "coarse bin count must divide the fine one"));
    }
    let kernel = WindowKernel::new(spectrum, horizon)?;
    let chain = chain_pair_law(spectrum, &kernel);
    let size = spectrum.size();
    let chain_fine = bin_pair_law(&chain, size, scale.small_h, upper, bins.0);
    let chain_coarse = bin_pair_law(&chain, size, scale.small_h, upper, bins.1);
    let mut rows = Vec::new();
    let mut largest_laws = Vec::new();
    let n_max = n_values.iter().copied().max();
    for &n_half in n_values {
        for &(u, v) in endpoints {
            let law = bridge_pair_law(spectrum, &kernel, u, v, n_half)?;
            rows.push(WindowRow {
                n_half,
                n_over_h2: n_half as f64 / h2,
                u,
                v,
                tv_exact: total_variation(&law, &chain),
                tv_fine: total_variation(&bin_pair_law(&law, size, scale.small_h, upper, bins.0), &chain_fine),
                tv_coarse: total_variation(&bin_pair_law(&law, size, scale.small_h, upper, bins.1), &chain_coarse),
            });
            if Some(n_half) == n_max {
                largest_laws.push(law);
            }
        }
    }
    let endpoint_uniformity = (largest_laws.len() >= 2).then(|| total_variation(&largest_laws[0], &largest_laws[1]));
    let decay_rate = endpoints.first().and_then(|&(u, v)| {
        let mine: Vec<&WindowRow> = rows.iter().filter(|r| r.u == u && r.v == v).collect();
        let lo = mine.iter().min_by_key(|r| r.n_half)?;
        let hi = mine.iter().max_by_key(|r| r.n_half)?;
        (hi.n_half > lo.n_half && lo.tv_exact > 0.0 && hi.tv_exact > 0.0)
            .then(|| (lo.tv_exact / hi.tv_exact).ln() / (hi.n_over_h2 - lo.n_over_h2))
    });
    Ok(WindowStudy {
        half_window: kernel.half_window,
        rows,
        endpoint_uniformity,
        decay_rate,
    })
}
