//! Scalar numerics shared by the threshold solver and the BER formulas.

use crate::error::{Error, Result};

pub use libm::{erf, erfc};

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Probability that N(mean, sd²) exceeds `t`.
pub fn gauss_tail(t: f64, mean: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return if mean > t { 1.0 } else { 0.0 };
    }
    q_func((t - mean) / sd)
}

/// Result of a numeric integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Tanh-sinh integration of `f` over the finite interval `[a, b]` to a
/// relative tolerance. A coarse pass sets the absolute target.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let coarse = quadrature::double_exponential::integrate(&f, a, b, 1e-6);
    let target = (rel_tol * coarse.integral.abs()).max(1e-300);
    let out = quadrature::double_exponential::integrate(&f, a, b, target);
    if !out.integral.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integral over [{a}, {b}]"
        )));
    }
    if out.error_estimate > 1e3 * target.max(f64::EPSILON * out.integral.abs()) {
        return Err(Error::Numerical(format!(
            "quadrature did not converge: error estimate {:.3e} for target {:.3e}",
            out.error_estimate, target
        )));
    }
    Ok(Integral {
        value: out.integral,
        error: out.error_estimate,
        evaluations: (coarse.num_function_evaluations + out.num_function_evaluations) as usize,
    })
}

/// Integral of `f` over `[a, ∞)` via the map x = a + t/(1−t).
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64) -> Result<Integral> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let v = f(a + t / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, rel_tol)
}

/// Bisection for a root of `f` on `[lo, hi]`; `f(lo)` and `f(hi)` must differ
/// in sign. Stops when the bracket is narrower than `x_tol` or `done(f(x))`.
pub fn bisect<F, D>(f: F, mut lo: f64, mut hi: f64, x_tol: f64, done: D) -> Result<(f64, usize)>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> bool,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok((lo, 0));
    }
    if f_hi == 0.0 {
        return Ok((hi, 0));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Solver(format!(
            "root not bracketed on [{lo}, {hi}]: f = {f_lo:.3e}, {f_hi:.3e}"
        )));
    }
    for it in 1..=200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if done(fm) || (hi - lo) < x_tol {
            return Ok((mid, it));
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), 200))
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
