//! Optimum detection threshold for an EVM budget.
//!
//! With instantaneous power p = |x|² exponential with mean σ², the mean
//! squared excess above amplitude A is
//!
//! ```text
//! D(A) = ∫_{A²}^{∞} (√p − A)² (1/σ²) e^{−p/σ²} dp
//!      = σ² e^{−A²/σ²} − √π σ A erfc(A/σ)
//! ```
//!
//! and the threshold solves `e_i · D(A) = e_r · σ²`.

use serde::{Deserialize, Serialize};

use super::PcKernel;
use crate::error::{Error, Result};
use crate::numeric::{bisect, erfc, integrate_to_inf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistortionEvaluator {
    #[default]
    ClosedForm,
    Quadrature,
}

pub fn distortion_integral_closed(a: f64, sigma2: f64) -> f64 {
    let s = sigma2.sqrt();
    let u = a / s;
    sigma2 * (-u * u).exp() - std::f64::consts::PI.sqrt() * s * a * erfc(u)
}

/// Quadrature of the defining integral, after p = A² + σ²u.
pub fn distortion_integral_quadrature(a: f64, sigma2: f64, rel_tol: f64) -> Result<f64> {
    let f = |u: f64| {
        let r = (a * a + sigma2 * u).sqrt() - a;
        r * r * (-u).exp()
    };
    Ok((-a * a / sigma2).exp() * integrate_to_inf(f, 0.0, rel_tol)?.value)
}

pub fn distortion_integral(a: f64, sigma2: f64, evaluator: DistortionEvaluator) -> Result<f64> {
    match evaluator {
        DistortionEvaluator::ClosedForm => Ok(distortion_integral_closed(a, sigma2)),
        DistortionEvaluator::Quadrature => distortion_integral_quadrature(a, sigma2, 1e-12),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSolution {
    /// Threshold amplitude A_th.
    pub amplitude: f64,
    /// 10·log10(A_th²/σ²).
    pub power_db: f64,
    /// Budget exceeds e_i·D(0); no cancellation is ever needed.
    pub saturated: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThresholdSolver {
    pub evaluator: DistortionEvaluator,
}

impl ThresholdSolver {
    /// Solve for a linear EVM budget `evm` (relative to σ²).
    pub fn solve(&self, evm: f64, kernel: &PcKernel, sigma2: f64) -> Result<ThresholdSolution> {
        if !(evm > 0.0) {
            return Err(Error::Config(format!("EVM budget {evm} must be positive")));
        }
        if !(kernel.e_i > 0.0) || !(sigma2 > 0.0) {
            return Err(Error::Config("e_i and σ² must be positive".into()));
        }
        let target = evm * sigma2;
        let g = |a: f64| -> Result<f64> { Ok(kernel.e_i * distortion_integral(a, sigma2, self.evaluator)? - target) };
        let g0 = g(0.0)?;
        if g0 <= 0.0 {
            return Ok(ThresholdSolution { amplitude: 0.0, power_db: f64::NEG_INFINITY, saturated: true, iterations: 0 });
        }
        let hi = 6.0 * sigma2.sqrt();
        if g(hi)? > 0.0 {
            return Err(Error::Solver(format!("budget {evm:.3e} not bracketed on (0, 6σ]")));
        }
        let f = |a: f64| g(a).unwrap_or(f64::NAN);
        let (a, iterations) = bisect(f, 0.0, hi, 1e-15 * hi, |r| r.abs() < 1e-6 * target)?;
        Ok(ThresholdSolution {
            amplitude: a,
            power_db: 10.0 * (a * a / sigma2).log10(),
            saturated: false,
            iterations,
        })
    }
}

/// Threshold for a linear EVM budget with the closed-form evaluator.
pub fn solve_optimum_threshold(evm: f64, kernel: &PcKernel, sigma2: f64) -> Result<ThresholdSolution> {
    ThresholdSolver::default().solve(evm, kernel, sigma2)
}
