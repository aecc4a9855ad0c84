//! Measured EVM, ACLR, PSD and CCDF, plus multiplication counting.
//!
//! Accumulators are plain sums and counts, so merging in a fixed order gives
//! bit-identical results regardless of how trials were split across workers.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::{ComplexSignal, OfdmConfig, SymbolGrid};
use crate::pc::{PcKernel, PcReport};

/// Minimum symbols for a trustworthy ACLR estimate.
pub const MIN_ACLR_SYMBOLS: u64 = 1000;
/// Minimum samples for a CCDF read at 10⁻⁴.
pub const MIN_CCDF_SAMPLES: u64 = 1_000_000;

// ----------------------------------------------------------------------------
// EVM

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvmAccumulator {
    pub error_power: f64,
    pub reference_power: f64,
    pub symbols: u64,
}

impl EvmAccumulator {
    /// Add one symbol; `subcarrier_power` is the nominal S_t/L.
    pub fn add(&mut self, reference: &SymbolGrid, impaired: &SymbolGrid, subcarrier_power: f64) -> Result<()> {
        if reference.len() != impaired.len() {
            return Err(Error::Shape("reference and impaired grids differ in length".into()));
        }
        self.error_power += reference.symbols.iter().zip(&impaired.symbols).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        self.reference_power += subcarrier_power * reference.len() as f64;
        self.symbols += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &EvmAccumulator) {
        self.error_power += other.error_power;
        self.reference_power += other.reference_power;
        self.symbols += other.symbols;
    }

    pub fn evm(&self) -> Result<f64> {
        if self.reference_power <= 0.0 {
            return Err(Error::Degenerate("zero reference power".into()));
        }
        Ok(self.error_power / self.reference_power)
    }
}

/// Σ_l|X_l − X̃_l|² / Σ_l S_t[l], averaged over symbols.
pub fn measure_evm(reference: &[SymbolGrid], impaired: &[SymbolGrid], subcarrier_power: f64) -> Result<f64> {
    if reference.len() != impaired.len() {
        return Err(Error::Shape("streams differ in length".into()));
    }
    let mut acc = EvmAccumulator::default();
    for (r, i) in reference.iter().zip(impaired) {
        acc.add(r, i, subcarrier_power)?;
    }
    acc.evm()
}

// ----------------------------------------------------------------------------
// PSD and ACLR

/// Averaged per-symbol periodogram. Bin k holds |X[k]|² with the 1/N_f
/// transform scaling, so Σ_k PSD[k] is the mean body power.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdAccumulator {
    pub sum: Vec<f64>,
    pub symbols: u64,
}

impl PsdAccumulator {
    pub fn new(fft_size: usize) -> Self {
        PsdAccumulator { sum: vec![0.0; fft_size], symbols: 0 }
    }

    pub fn add_body(&mut self, body: &[Complex64], planner: &mut FftPlanner<f64>) {
        let n = self.sum.len();
        let mut buf = body.to_vec();
        planner.plan_fft_forward(n).process(&mut buf);
        let s = 1.0 / (n as f64 * n as f64);
        for (acc, x) in self.sum.iter_mut().zip(&buf) {
            *acc += x.norm_sqr() * s;
        }
        self.symbols += 1;
    }

    pub fn add_signal(&mut self, sig: &ComplexSignal, planner: &mut FftPlanner<f64>) {
        for k in 0..sig.num_symbols() {
            self.add_body(sig.body(k), planner);
        }
    }

    pub fn merge(&mut self, other: &PsdAccumulator) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.symbols += other.symbols;
    }

    pub fn psd(&self) -> Vec<f64> {
        let n = self.symbols.max(1) as f64;
        self.sum.iter().map(|p| p / n).collect()
    }

    /// ACLR from the accumulated spectrum on `cfg`'s grid.
    pub fn aclr(&self, cfg: &OfdmConfig) -> Result<AclrReport> {
        let psd = self.psd();
        let l = cfg.num_subcarriers as i64;
        let nf = cfg.fft_size as i64;
        if psd.len() as i64 != nf {
            return Err(Error::Shape("spectrum length differs from fft_size".into()));
        }
        let p = |li: i64| psd[li.rem_euclid(nf) as usize];
        let inband: f64 = (-l / 2 + 1..=l / 2).map(p).sum();
        if inband <= 0.0 {
            return Err(Error::Degenerate("no in-channel power".into()));
        }
        let upper = (l / 2 + 2..=3 * l / 2 + 1).map(p).sum::<f64>() / inband;
        let lower = (-3 * l / 2..=-(l + 2) / 2).map(p).sum::<f64>() / inband;
        Ok(AclrReport {
            upper,
            lower,
            worst: upper.max(lower),
            symbols: self.symbols,
            low_confidence: self.symbols < MIN_ACLR_SYMBOLS,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AclrReport {
    pub upper: f64,
    pub lower: f64,
    pub worst: f64,
    pub symbols: u64,
    /// Fewer than [`MIN_ACLR_SYMBOLS`] were averaged.
    pub low_confidence: bool,
}

/// Adjacent-band power over in-channel power, worst of upper and lower, with
/// the adjacent bands l ∈ [L/2+2, 3L/2+1] and [−3L/2, −(L+2)/2].
pub fn measure_aclr(sig: &ComplexSignal, cfg: &OfdmConfig) -> Result<AclrReport> {
    let mut acc = PsdAccumulator::new(cfg.fft_size);
    acc.add_signal(sig, &mut FftPlanner::new());
    acc.aclr(cfg)
}

// ----------------------------------------------------------------------------
// CCDF

/// Exceedance counts of |x|²/P_ref on a fixed dB grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdfAccumulator {
    pub abscissa_db: Vec<f64>,
    thresholds: Vec<f64>,
    pub exceed: Vec<u64>,
    pub samples: u64,
    pub reference_power: f64,
}

impl CcdfAccumulator {
    /// `abscissa_db` must be increasing.
    pub fn new(abscissa_db: Vec<f64>, reference_power: f64) -> Result<Self> {
        if abscissa_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("CCDF abscissae must be strictly increasing".into()));
        }
        if !(reference_power > 0.0) {
            return Err(Error::Config("reference power must be positive".into()));
        }
        let thresholds = abscissa_db.iter().map(|d| reference_power * 10f64.powf(d / 10.0)).collect();
        let n = abscissa_db.len();
        Ok(CcdfAccumulator { abscissa_db, thresholds, exceed: vec![0; n], samples: 0, reference_power })
    }

    /// Uniform grid from `lo` to `hi` dB inclusive.
    pub fn uniform(lo: f64, hi: f64, step: f64, reference_power: f64) -> Result<Self> {
        let n = ((hi - lo) / step).round() as usize + 1;
        Self::new((0..n).map(|i| lo + step * i as f64).collect(), reference_power)
    }

    pub fn add_samples(&mut self, samples: &[Complex64]) {
        for x in samples {
            let p = x.norm_sqr();
            // thresholds are increasing: count how many this sample exceeds
            let k = self.thresholds.partition_point(|&t| p > t);
            for e in &mut self.exceed[..k] {
                *e += 1;
            }
        }
        self.samples += samples.len() as u64;
    }

    /// Add every GI-stripped body of a signal.
    pub fn add_signal(&mut self, sig: &ComplexSignal) {
        for k in 0..sig.num_symbols() {
            self.add_samples(sig.body(k));
        }
    }

    pub fn merge(&mut self, other: &CcdfAccumulator) {
        for (a, b) in self.exceed.iter_mut().zip(&other.exceed) {
            *a += b;
        }
        self.samples += other.samples;
    }

    pub fn curve(&self) -> CcdfCurve {
        let n = self.samples.max(1) as f64;
        CcdfCurve {
            abscissa_db: self.abscissa_db.clone(),
            probability: self.exceed.iter().map(|&e| e as f64 / n).collect(),
            trials: self.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    pub abscissa_db: Vec<f64>,
    pub probability: Vec<f64>,
    pub trials: u64,
}

impl CcdfCurve {
    /// Exceedance probability at `db` by linear interpolation in log-probability.
    pub fn at(&self, db: f64) -> f64 {
        let x = &self.abscissa_db;
        let k = x.partition_point(|&a| a <= db);
        if k == 0 {
            return self.probability[0];
        }
        if k == x.len() {
            return *self.probability.last().unwrap();
        }
        let (p0, p1) = (self.probability[k - 1], self.probability[k]);
        if p0 <= 0.0 || p1 <= 0.0 {
            return if db == x[k - 1] { p0 } else { p1 };
        }
        let f = (db - x[k - 1]) / (x[k] - x[k - 1]);
        (p0.ln() + f * (p1.ln() - p0.ln())).exp()
    }

    /// Smallest abscissa where the curve falls to `prob`, interpolated in
    /// log-probability. `None` if the curve never gets that low.
    pub fn abscissa_at(&self, prob: f64) -> Option<f64> {
        let x = &self.abscissa_db;
        let p = &self.probability;
        let k = p.iter().position(|&v| v <= prob)?;
        if k == 0 {
            return Some(x[0]);
        }
        let (p0, p1) = (p[k - 1], p[k]);
        if p1 <= 0.0 {
            return Some(x[k]);
        }
        let f = (p0.ln() - prob.ln()) / (p0.ln() - p1.ln());
        Some(x[k - 1] + f * (x[k] - x[k - 1]))
    }
}

/// Empirical CCDF of |x|²/S_t over every symbol body of `sig`.
pub fn ccdf_power(sig: &ComplexSignal, abscissa_db: &[f64], reference_power: f64) -> Result<CcdfCurve> {
    let mut acc = CcdfAccumulator::new(abscissa_db.to_vec(), reference_power)?;
    acc.add_signal(sig);
    Ok(acc.curve())
}

// ----------------------------------------------------------------------------
// Complexity

/// Complex multiplications spent on peak reduction, excluding the FFTs
/// common to all methods.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexityCounter {
    pub multiplications: u64,
    /// N_pc for cancellation or N_it for C&F.
    pub operations: u64,
    /// Threshold crossings N_th^(j) per C&F iteration.
    pub crossings: Vec<u64>,
    pub symbols: u64,
}

impl ComplexityCounter {
    pub fn add_report(&mut self, report: &PcReport, k: &PcKernel) {
        self.multiplications += complexity_of_pc(report, k);
        self.operations += report.additions as u64;
        self.symbols += 1;
    }

    pub fn merge(&mut self, other: &ComplexityCounter) {
        self.multiplications += other.multiplications;
        self.operations += other.operations;
        if self.crossings.len() < other.crossings.len() {
            self.crossings.resize(other.crossings.len(), 0);
        }
        for (a, b) in self.crossings.iter_mut().zip(&other.crossings) {
            *a += b;
        }
        self.symbols += other.symbols;
    }

    pub fn mean_per_symbol(&self) -> f64 {
        self.multiplications as f64 / self.symbols.max(1) as f64
    }
}

/// N_w·N_pc.
pub fn complexity_of_pc(report: &PcReport, k: &PcKernel) -> u64 {
    (k.support_len() * report.additions) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn evm_single_term() {
        let r = SymbolGrid { symbols: vec![Complex64::new(1.0, 0.0); 4] };
        let mut i = r.clone();
        i.symbols[2] += Complex64::new(0.0, 0.1);
        assert_relative_eq!(measure_evm(&[r.clone()], &[i], 1.0).unwrap(), 0.01 / 4.0, max_relative = 1e-12);
        assert_eq!(measure_evm(&[r.clone()], &[r.clone()], 1.0).unwrap(), 0.0);
        assert!(measure_evm(&[r.clone()], &[r], 0.0).is_err());
    }

    #[test]
    fn ccdf_constant_envelope_is_a_step() {
        let x = vec![Complex64::from_polar(2.0, 0.3); 100];
        let sig = ComplexSignal::new(x, 64, 36).unwrap();
        let c = ccdf_power(&sig, &[5.0, 6.0, 7.0], 1.0).unwrap();
        // |x|² = 4 → 6.02 dB
        assert_eq!(c.probability, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn ccdf_interpolation() {
        let c = CcdfCurve { abscissa_db: vec![0.0, 1.0, 2.0], probability: vec![1.0, 1e-2, 1e-4], trials: 1 };
        assert_relative_eq!(c.abscissa_at(1e-3).unwrap(), 1.5, epsilon = 1e-12);
        assert_relative_eq!(c.at(1.5), 1e-3, max_relative = 1e-12);
        assert!(c.abscissa_at(1e-5).is_none());
    }

    #[test]
    fn complexity_arithmetic() {
        let r = PcReport {
            additions: 3,
            iterations: 3,
            stop: crate::pc::StopReason::AllBelowThreshold,
            evm_estimate: 0.0,
            aclr_estimate: 0.0,
            multiplications: 0,
        };
        let cfg = OfdmConfig::default();
        let k = PcKernel::from_samples(&cfg, -128, vec![Complex64::new(1.0, 0.0); 256], 1.0).unwrap();
        assert_eq!(complexity_of_pc(&r, &k), 768);
        assert_eq!(complexity_of_pc(&PcReport { additions: 0, ..r }, &k), 0);
    }
}
