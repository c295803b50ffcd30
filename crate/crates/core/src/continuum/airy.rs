//! The Airy function `Ai` by Taylor-series marching of `y″ = x y`.
//!
//! Left of [`MATCH_POINT`] the solution is marched from the tabulated values
//! `Ai(0)`, `Ai′(0)`. To the right, forward marching would amplify the `Bi`
//! component, so the solution is instead marched *backwards* from a seed at
//! [`ASYMPTOTIC_START`] given by the large-`x` expansion, a direction in which
//! `Ai` is the dominant solution.

use std::f64::consts::PI;

pub const AI_0: f64 = 0.355_028_053_887_817_24;
pub const AI_PRIME_0: f64 = -0.258_819_403_792_806_8;

const MATCH_POINT: f64 = 2.0;
const ASYMPTOTIC_START: f64 = 8.0;
const MAX_STEP: f64 = 0.5;

/// Advances `(y, y′)` of `y″ = x y` from `x0` to `x0 + t` with one Taylor
/// expansion about `x0`.
fn taylor_step(x0: f64, y: f64, dy: f64, t: f64) -> (f64, f64) {
    // Coefficients a_k of y(x0 + s) = Σ a_k s^k obey
    // (k+2)(k+1) a_{k+2} = x0 a_k + a_{k−1}.
    let mut a = [0.0f64; 64];
    a[0] = y;
    a[1] = dy;
    a[2] = x0 * y / 2.0;
    let (mut value, mut deriv) = (a[0] + a[1] * t + a[2] * t * t, a[1] + 2.0 * a[2] * t);
    let mut tk = t * t; // t^k for k = 2
    let mut small = 0;
    for k in 3..a.len() {
        a[k] = (x0 * a[k - 2] + a[k - 3]) / (k as f64 * (k as f64 - 1.0));
        let dterm = k as f64 * a[k] * tk;
        tk *= t;
        let term = a[k] * tk;
        value += term;
        deriv += dterm;
        let scale = value.abs().max(deriv.abs()).max(f64::MIN_POSITIVE);
        if term.abs().max(dterm.abs()) < 1e-18 * scale {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
    (value, deriv)
}

fn march(mut x: f64, mut y: f64, mut dy: f64, target: f64) -> (f64, f64) {
    while (target - x).abs() > 0.0 {
        let t = (target - x).clamp(-MAX_STEP, MAX_STEP);
        (y, dy) = taylor_step(x, y, dy, t);
        x = if (target - x).abs() <= MAX_STEP { target } else { x + t };
    }
    (y, dy)
}

/// Large-`x` expansions of `Ai` and `Ai′`; relative accuracy about
/// `e^{−2ζ}` with `ζ = (2/3) x^{3/2}`, i.e. better than `1e-13` at `x ≥ 8`.
pub fn airy_asymptotic(x: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let (mut su, mut sv) = (1.0, 1.0);
    let mut u = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        let term = u / zeta.powi(k);
        if term.abs() >= last {
            break; // the series is asymptotic: stop at the smallest term
        }
        last = term.abs();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        su += sign * term;
        sv += sign * v / zeta.powi(k);
    }
    let base = (-zeta).exp() / (2.0 * PI.sqrt());
    (base * su / x.powf(0.25), -base * x.powf(0.25) * sv)
}

/// `(Ai(x), Ai′(x))`.
pub fn airy_ai(x: f64) -> (f64, f64) {
    if x >= ASYMPTOTIC_START {
        airy_asymptotic(x)
    } else if x > MATCH_POINT {
        let (y, dy) = airy_asymptotic(ASYMPTOTIC_START);
        march(ASYMPTOTIC_START, y, dy, x)
    } else {
        march(0.0, AI_0, AI_PRIME_0, x)
    }
}

/// The `k`-th zero (1-based) of `Ai`, returned as the positive number `ω_k`
/// with `Ai(−ω_k) = 0`.
pub fn airy_zero(k: usize) -> f64 {
    assert!(k >= 1, "zeros are numbered from 1");
    let step = 0.05;
    let mut found = 0;
    let mut x = 0.0;
    let mut fx = airy_ai(x).0;
    loop {
        let next = x - step;
        let fn_ = airy_ai(next).0;
        if fx.signum() != fn_.signum() {
            found += 1;
            if found == k {
                return -refine_zero(next, x);
            }
        }
        x = next;
        fx = fn_;
    }
}

fn refine_zero(mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = airy_ai(lo).0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = airy_ai(mid).0;
        if fm.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton polish from the bracket midpoint.
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let (y, dy) = airy_ai(x);
        x -= y / dy;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Ai(1), Ai(−1), Ai′(1) to 15 digits.
        let (a1, d1) = airy_ai(1.0);
        assert!((a1 - 0.135_292_416_312_881_4).abs() < 1e-15);
        assert!((d1 + 0.159_147_441_296_793_2).abs() < 1e-15);
        assert!((airy_ai(-1.0).0 - 0.535_560_883_292_352_1).abs() < 1e-15);
        // Ai(5) = 1.083444281360744e-4
        assert!((airy_ai(5.0).0 / 1.083_444_281_360_744e-4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn continuous_across_branches() {
        for &x in &[MATCH_POINT, ASYMPTOTIC_START] {
            let (a, da) = airy_ai(x - 1e-12);
            let (b, db) = airy_ai(x + 1e-12);
            assert!((a / b - 1.0).abs() < 1e-11);
            assert!((da / db - 1.0).abs() < 1e-11);
        }
        // Backward march agrees with the direct forward march at 2 (where Bi
        // growth is still harmless).
        let forward = march(0.0, AI_0, AI_PRIME_0, 2.5).0;
        assert!((forward / airy_ai(2.5).0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeros() {
        let expected = [2.338_107_410_459_767, 4.087_949_444_130_97, 5.520_559_828_095_551, 6.786_708_090_071_759];
        for (k, w) in expected.iter().enumerate() {
            assert!((airy_zero(k + 1) - w).abs() < 1e-12, "zero {}", k + 1);
        }
    }
}
