//! Random-walk kernels, area-tilt potential families and the characteristic
//! scale `H_λ` defined by `H² V_λ(H) = 1`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;
/// Largest relative mass a truncated geometric tail may drop.
pub const GEOMETRIC_TAIL_TOL: f64 = 1e-14;

/// Named kernel descriptors accepted by [`make_kernel`].
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `p₀ = 1 − 2a`, `p_{±1} = a`.
    LazyNearestNeighbor { a: f64 },
    /// Explicit finite table of `(offset, probability)` pairs.
    Weights(Vec<(i64, f64)>),
    /// `p_z ∝ ρ^{|z|}` for `|z| ≤ range`.
    TruncatedGeometric { rho: f64, range: u32 },
}

/// A zero-mean, irreducible jump distribution on ℤ with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkKernel {
    support: Vec<i64>,
    probs: Vec<f64>,
    sigma2: f64,
}

impl WalkKernel {
    /// Validates a support/probability table. Zero-probability entries are dropped.
    pub fn new(support: Vec<i64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::InvalidKernel(format!(
                "{} offsets but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        let mut pairs: Vec<(i64, f64)> = Vec::with_capacity(support.len());
        for (&z, &p) in support.iter().zip(&probs) {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidKernel(format!("weight {p} at offset {z}")));
            }
            if pairs.iter().any(|&(y, _)| y == z) {
                return Err(Error::InvalidKernel(format!("duplicate offset {z}")));
            }
            if p > 0.0 {
                pairs.push((z, p));
            }
        }
        pairs.sort_by_key(|&(z, _)| z);

        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidKernel(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mean: f64 = pairs.iter().map(|&(z, p)| z as f64 * p).sum();
        if mean.abs() > PROB_TOL {
            return Err(Error::NonZeroMean { mean });
        }
        let gcd = pairs
            .iter()
            .filter(|&&(z, _)| z != 0)
            .fold(0, |g, &(z, _)| gcd(g, z.abs()));
        if gcd != 1 {
            return Err(Error::ReducibleKernel { gcd });
        }

        let sigma2 = pairs.iter().map(|&(z, p)| (z * z) as f64 * p).sum();
        let (support, probs) = pairs.into_iter().unzip();
        Ok(Self {
            support,
            probs,
            sigma2,
        })
    }

    pub fn support(&self) -> &[i64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Variance `σ² = Σ z² p_z`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(z, p)| z as f64 * p).sum()
    }

    /// Largest jump `max |z|`.
    pub fn range(&self) -> usize {
        self.support.iter().map(|z| z.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn prob(&self, z: i64) -> f64 {
        match self.support.binary_search(&z) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn is_lazy(&self) -> bool {
        self.prob(0) > 0.0
    }

    pub fn is_symmetric(&self) -> bool {
        self.iter().all(|(z, p)| self.prob(-z) == p)
    }

    /// The kernel of the time-reversed walk, `z ↦ p_{−z}`.
    pub fn reversed(&self) -> WalkKernel {
        let mut pairs: Vec<(i64, f64)> = self.iter().map(|(z, p)| (-z, p)).collect();
        pairs.sort_by_key(|&(z, _)| z);
        let (support, probs) = pairs.into_iter().unzip();
        WalkKernel {
            support,
            probs,
            sigma2: self.sigma2,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Builds and validates a kernel from a named descriptor.
pub fn make_kernel(spec: &KernelSpec) -> Result<WalkKernel> {
    match spec {
        KernelSpec::LazyNearestNeighbor { a } => {
            if !(*a > 0.0 && *a <= 0.5) {
                return Err(Error::InvalidKernel(format!(
                    "lazy-nn parameter a = {a} outside (0, 1/2]"
                )));
            }
            WalkKernel::new(vec![-1, 0, 1], vec![*a, 1.0 - 2.0 * a, *a])
        }
        KernelSpec::Weights(pairs) => {
            let (support, probs) = pairs.iter().copied().unzip();
            WalkKernel::new(support, probs)
        }
        KernelSpec::TruncatedGeometric { rho, range } => {
            if !(*rho > 0.0 && *rho < 1.0) || *range == 0 {
                return Err(Error::InvalidKernel(format!(
                    "truncated-geometric needs 0 < rho < 1 and range >= 1 (rho = {rho}, range = {range})"
                )));
            }
            let dropped = 2.0 * rho.powi(*range as i32 + 1) / (1.0 + rho);
            if dropped >= GEOMETRIC_TAIL_TOL {
                return Err(Error::InvalidKernel(format!(
                    "truncation at range {range} drops relative mass {dropped:e} >= {GEOMETRIC_TAIL_TOL:e}"
                )));
            }
            let r = *range as i64;
            let support: Vec<i64> = (-r..=r).collect();
            let raw: Vec<f64> = support.iter().map(|z| rho.powi(z.abs() as i32)).collect();
            let total: f64 = raw.iter().sum();
            WalkKernel::new(support, raw.into_iter().map(|w| w / total).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// `V_λ(x) = λ x`, `q(r) = r`.
    Linear,
    /// `V_λ(x) = λ x^α`, `q(r) = r^α`.
    Power { alpha: f64 },
    Custom,
}

type PotentialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A λ-indexed self-potential together with its limit profile `q` and lower
/// envelope `q₀`.
#[derive(Clone)]
pub struct PotentialFamily {
    kind: PotentialKind,
    tag: String,
    value: PotentialFn,
    profile: ProfileFn,
    lower_envelope: ProfileFn,
}

impl fmt::Debug for PotentialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialFamily")
            .field("kind", &self.kind)
            .field("tag", &self.tag)
            .finish()
    }
}

impl PotentialFamily {
    pub fn linear() -> Self {
        Self {
            kind: PotentialKind::Linear,
            tag: "linear".into(),
            value: Arc::new(|lambda, x| lambda * x),
            profile: Arc::new(|r| r),
            lower_envelope: Arc::new(|r| r),
        }
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidPotential(format!("power exponent {alpha}")));
        }
        Ok(Self {
            kind: PotentialKind::Power { alpha },
            tag: format!("power-{alpha}"),
            value: Arc::new(move |lambda, x| lambda * x.powf(alpha)),
            profile: Arc::new(move |r| r.powf(alpha)),
            lower_envelope: Arc::new(move |r| r.powf(alpha)),
        })
    }

    /// A user potential. The caller supplies the limit profile and the lower
    /// envelope explicitly.
    pub fn custom<V, Q, Q0>(tag: &str, value: V, profile: Q, lower_envelope: Q0) -> Self
    where
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Q: Fn(f64) -> f64 + Send + Sync + 'static,
        Q0: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::Custom,
            tag: tag.to_string(),
            value: Arc::new(value),
            profile: Arc::new(profile),
            lower_envelope: Arc::new(lower_envelope),
        }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// `V_λ(x)`.
    pub fn eval(&self, lambda: f64, x: f64) -> f64 {
        (self.value)(lambda, x)
    }

    /// Limit profile `q(r)`.
    pub fn profile(&self, r: f64) -> f64 {
        (self.profile)(r)
    }

    /// Lower envelope `q₀(r)`.
    pub fn lower_envelope(&self, r: f64) -> f64 {
        (self.lower_envelope)(r)
    }

    /// Checks `V_λ(0) = 0`, monotonicity and growth on the grid `0, step, …, x_max`.
    pub fn check_shape(&self, lambda: f64, step: f64, x_max: f64) -> Result<()> {
        let v0 = self.eval(lambda, 0.0);
        if v0 != 0.0 {
            return Err(Error::InvalidPotential(format!("V(0) = {v0}")));
        }
        let n = (x_max / step).ceil() as usize;
        let mut prev = 0.0;
        for i in 1..=n {
            let v = self.eval(lambda, i as f64 * step);
            if !v.is_finite() || v < prev {
                return Err(Error::InvalidPotential(format!(
                    "not nondecreasing at x = {}",
                    i as f64 * step
                )));
            }
            prev = v;
        }
        if prev <= 0.0 {
            return Err(Error::InvalidPotential("V does not grow on the grid".into()));
        }
        Ok(())
    }

    /// Smallest `K` with `q₀(K) ≥ level`, found by doubling and bisection.
    pub fn envelope_level(&self, level: f64) -> Result<f64> {
        let mut hi = 1.0;
        while self.lower_envelope(hi) < level {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::InvalidPotential(format!(
                    "lower envelope never reaches {level}"
                )));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.lower_envelope(mid) >= level {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        Ok(hi)
    }
}

/// The characteristic scale of a tilted walk at fixed λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleInfo {
    pub lambda: f64,
    /// Spatial scale `H_λ` in lattice units.
    pub big_h: f64,
    /// `h_λ = 1 / H_λ`.
    pub small_h: f64,
}

impl ScaleInfo {
    pub fn from_h(lambda: f64, big_h: f64) -> Self {
        Self {
            lambda,
            big_h,
            small_h: 1.0 / big_h,
        }
    }

    /// Temporal scale `H_λ²` in lattice steps.
    pub fn time_scale(&self) -> f64 {
        self.big_h * self.big_h
    }
}

const SCALE_LO: f64 = 1e-9;
const SCALE_HI: f64 = 1e12;

/// Solves `H² V_λ(H) = 1` by geometric bisection on `[1e-9, 1e12]`.
pub fn solve_scale(potential: &PotentialFamily, lambda: f64) -> Result<ScaleInfo> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    let f = |h: f64| h * h * potential.eval(lambda, h) - 1.0;
    let (mut lo, mut hi) = (SCALE_LO, SCALE_HI);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::ScaleBracket {
            lambda,
            lo,
            hi,
            f_lo,
            f_hi,
        });
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let big_h = (lo * hi).sqrt();
    let defect = f(big_h).abs();
    if defect > 1e-10 {
        return Err(Error::InvalidPotential(format!(
            "H^2 V(H) = 1 solved only to {defect:e} at lambda = {lambda:e}"
        )));
    }
    Ok(ScaleInfo::from_h(lambda, big_h))
}

/// Values of `H_λ² V_λ(r H_λ)` on a grid, with the sup-distance to `q`.
#[derive(Debug, Clone)]
pub struct ProfileReport {
    pub scale: ScaleInfo,
    pub values: Vec<f64>,
    /// `max |H² V(rH) − q(r)|` over the grid.
    pub sup_distance: f64,
}

pub fn rescaled_profile(
    potential: &PotentialFamily,
    lambda: f64,
    grid: &[f64],
) -> Result<ProfileReport> {
    let scale = solve_scale(potential, lambda)?;
    let h2 = scale.time_scale();
    let mut values = Vec::with_capacity(grid.len());
    let mut sup_distance: f64 = 0.0;
    for &r in grid {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::param("grid", format!("value {r} outside [0, inf)")));
        }
        let v = h2 * potential.eval(lambda, r * scale.big_h);
        if !v.is_finite() {
            return Err(Error::InvalidPotential(format!("non-finite value at r = {r}")));
        }
        sup_distance = sup_distance.max((v - potential.profile(r)).abs());
        values.push(v);
    }
    Ok(ProfileReport {
        scale,
        values,
        sup_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lazy_nn_quarter() {
        let k = make_kernel(&KernelSpec::LazyNearestNeighbor { a: 0.25 }).unwrap();
        assert_eq!(k.support(), &[-1, 0, 1]);
        assert_eq!(k.probs(), &[0.25, 0.5, 0.25]);
        assert_eq!(k.sigma2(), 0.5);
        assert!(k.is_lazy() && k.is_symmetric());
    }

    #[test]
    fn symmetric_range_two() {
        let k = make_kernel(&KernelSpec::Weights(vec![
            (-2, 0.125),
            (-1, 0.25),
            (0, 0.25),
            (1, 0.25),
            (2, 0.125),
        ]))
        .unwrap();
        assert!((k.sigma2() - 1.5).abs() < 1e-15);
        assert_eq!(k.range(), 2);
    }

    #[test]
    fn rejects_drift() {
        let err = make_kernel(&KernelSpec::Weights(vec![(-1, 0.3), (1, 0.5), (0, 0.2)]));
        match err {
            Err(Error::NonZeroMean { mean }) => assert!((mean - 0.2).abs() < 1e-12),
            other => panic!("expected NonZeroMean, got {other:?}"),
        }
    }

    #[test]
    fn rejects_reducible_and_negative() {
        let reducible = make_kernel(&KernelSpec::Weights(vec![(-2, 0.25), (0, 0.5), (2, 0.25)]));
        assert!(matches!(reducible, Err(Error::ReducibleKernel { gcd: 2 })));
        let negative = make_kernel(&KernelSpec::Weights(vec![(-1, -0.1), (0, 1.0), (1, 0.1)]));
        assert!(matches!(negative, Err(Error::InvalidKernel(_))));
        let trivial = make_kernel(&KernelSpec::Weights(vec![(0, 1.0)]));
        assert!(matches!(trivial, Err(Error::ReducibleKernel { gcd: 0 })));
    }

    #[test]
    fn truncated_geometric_tail() {
        assert!(make_kernel(&KernelSpec::TruncatedGeometric { rho: 0.5, range: 10 }).is_err());
        let k = make_kernel(&KernelSpec::TruncatedGeometric { rho: 0.5, range: 48 }).unwrap();
        // Σ z² ρ^|z| / Σ ρ^|z| = 2ρ/(1−ρ)² for the untruncated law.
        let exact = 2.0 * 0.5 / (0.5f64 * 0.5);
        assert!((k.sigma2() - exact).abs() < 1e-10, "{}", k.sigma2());
        assert!(k.mean().abs() < 1e-15);
    }

    #[test]
    fn moments_recomputed_from_table() {
        let k = make_kernel(&KernelSpec::TruncatedGeometric { rho: 0.3, range: 30 }).unwrap();
        let total: f64 = k.probs().iter().sum();
        let s2: f64 = k.iter().map(|(z, p)| (z * z) as f64 * p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((s2 - k.sigma2()).abs() < 1e-12);
    }

    #[test]
    fn scale_examples() {
        let lin = PotentialFamily::linear();
        let quad = PotentialFamily::power(2.0).unwrap();
        assert!((solve_scale(&lin, 1e-3).unwrap().big_h - 10.0).abs() < 1e-9);
        assert!((solve_scale(&quad, 1e-4).unwrap().big_h - 10.0).abs() < 1e-9);
        assert!((solve_scale(&lin, 1e-6).unwrap().big_h - 100.0).abs() < 1e-8);
    }

    #[test]
    fn scale_is_monotone_and_consistent() {
        let lin = PotentialFamily::linear();
        let mut last = f64::INFINITY;
        for k in (2..=8).rev() {
            let s = solve_scale(&lin, 10f64.powi(-k)).unwrap();
            assert!(s.big_h < last);
            last = s.big_h;
            let defect = s.big_h * s.big_h * lin.eval(s.lambda, s.big_h) - 1.0;
            assert!(defect.abs() < 1e-10);
            assert!((s.big_h * s.small_h - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn scale_bracket_failure() {
        let flat = PotentialFamily::custom("flat", |_, _| 0.0, |_| 0.0, |_| 0.0);
        assert!(matches!(solve_scale(&flat, 1e-3), Err(Error::ScaleBracket { .. })));
        assert!(solve_scale(&PotentialFamily::linear(), -1.0).is_err());
    }

    #[test]
    fn builtin_profiles_are_lambda_independent() {
        let lin = PotentialFamily::linear();
        let quad = PotentialFamily::power(2.0).unwrap();
        for lambda in [1e-2, 1e-5, 1e-8] {
            let r = rescaled_profile(&lin, lambda, &[2.0]).unwrap();
            assert!((r.values[0] - 2.0).abs() < 1e-12);
            assert!(r.sup_distance < 1e-12);
            let r = rescaled_profile(&quad, lambda, &[3.0]).unwrap();
            assert!((r.values[0] - 9.0).abs() < 1e-11);
        }
    }

    #[test]
    fn custom_profile_against_quartic_oracle() {
        let lambda: f64 = 1e-3;
        let custom = PotentialFamily::custom(
            "lin+quad",
            |l, x| l * x + l * l * x * x,
            |r| r,
            |r| r,
        );
        // Independent route: Newton on λH³ + λ²H⁴ = 1 from H = λ^{-1/3}.
        let mut h = lambda.powf(-1.0 / 3.0);
        for _ in 0..50 {
            let f = lambda * h.powi(3) + lambda * lambda * h.powi(4) - 1.0;
            let df = 3.0 * lambda * h * h + 4.0 * lambda * lambda * h.powi(3);
            h -= f / df;
        }
        let report = rescaled_profile(&custom, lambda, &[1.0, 2.0]).unwrap();
        assert!((report.scale.big_h - h).abs() < 1e-9 * h);
        // At r = 1 the profile equals 1 by definition of H.
        assert!((report.values[0] - 1.0).abs() < 1e-10);
        let a = lambda * lambda * h.powi(4);
        assert!((report.values[1] - (2.0 + 2.0 * a)).abs() < 1e-9);
    }

    #[test]
    fn shape_checks() {
        let lin = PotentialFamily::linear();
        lin.check_shape(1e-3, 0.5, 100.0).unwrap();
        let bad = PotentialFamily::custom("bad", |l, x| l * (x - 1.0).abs(), |r| r, |r| r);
        assert!(bad.check_shape(1e-3, 0.5, 10.0).is_err());
        assert!((lin.envelope_level(40.0).unwrap() - 40.0).abs() < 1e-9);
        let quad = PotentialFamily::power(2.0).unwrap();
        assert!((quad.envelope_level(40.0).unwrap() - 40f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn lower_envelope_bounds_rescaled_profile() {
        let quad = PotentialFamily::power(2.0).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        for lambda in [1e-2, 1e-4, 1e-6] {
            let r = rescaled_profile(&quad, lambda, &grid).unwrap();
            for (v, &x) in r.values.iter().zip(&grid) {
                assert!(*v >= quad.lower_envelope(x) * (1.0 - 1e-12));
            }
        }
    }
}
