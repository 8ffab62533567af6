//! Small deterministic numerical kernels shared by the construction:
//! composite Simpson quadrature, bisection, log-sum-exp.

use crate::{Error, Result};

/// Default quadrature step for volume integrals.
pub const SIMPSON_STEP: f64 = 1e-3;

/// Composite Simpson rule on `[a, b]` with `intervals` subintervals
/// (rounded up to the next even number).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    if b == a {
        return 0.0;
    }
    let n = (intervals.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + h * i as f64;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    (f(a) + f(b) + 4.0 * odd + 2.0 * even) * h / 3.0
}

/// Number of Simpson subintervals giving a step no larger than `step`.
pub fn intervals_for(a: f64, b: f64, step: f64) -> usize {
    (((b - a).abs() / step).ceil() as usize).max(2)
}

/// Simpson with a fixed maximum step, plus the relative change observed when
/// the step is halved (a Richardson-style convergence indicator).
pub fn simpson_checked<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, step: f64) -> (f64, f64) {
    let n = intervals_for(a, b, step);
    let coarse = simpson(&f, a, b, n);
    let fine = simpson(&f, a, b, 2 * n);
    let rel = if fine == 0.0 {
        (fine - coarse).abs()
    } else {
        ((fine - coarse) / fine).abs()
    };
    (fine, rel)
}

/// Bisection for a root of `f` on `[lo, hi]`. Stops when the bracket is
/// narrower than `x_tol` or after `max_iter` halvings.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln Gamma(k/2)` for positive integer `k`, via the half-integer recurrence.
pub fn ln_gamma_half(k: u32) -> f64 {
    assert!(k > 0, "ln_gamma_half needs k >= 1");
    let (mut acc, mut x) = if k.is_multiple_of(2) {
        (0.0, 1.0)
    } else {
        (0.5 * std::f64::consts::PI.ln(), 0.5)
    };
    let target = k as f64 / 2.0;
    while x < target {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// `ln vol(S^{d})` for the unit `d`-sphere in `R^{d+1}`.
pub fn ln_sphere_volume(d: u32) -> f64 {
    let k = d + 1;
    std::f64::consts::LN_2 + 0.5 * k as f64 * std::f64::consts::PI.ln() - ln_gamma_half(k)
}
