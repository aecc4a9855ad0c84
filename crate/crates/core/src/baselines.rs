//! Limiter baselines: repeated clipping and filtering, the adaptive-threshold
//! variant, and companding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ComplexityCounter;
use crate::ofdm::{ComplexSignal, OfdmConfig};

pub const DEFAULT_FILTER_TAPS: usize = 65;

/// Split `x` into its part limited to `a_th` and the excess above it.
pub fn clip_samples(x: &[Complex64], a_th: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut clipped = Vec::with_capacity(x.len());
    let mut excess = Vec::with_capacity(x.len());
    for &v in x {
        let m = v.norm();
        if m > a_th {
            // v − e is exact here, so clipped + excess reproduces v bit for bit
            let e = v - v * (a_th / m);
            clipped.push(v - e);
            excess.push(e);
        } else {
            clipped.push(v);
            excess.push(Complex64::new(0.0, 0.0));
        }
    }
    (clipped, excess)
}

/// `clipped[s] = x[s]·min(1, A_th/|x[s]|)` and `excess = x − clipped`.
pub fn clip(sig: &ComplexSignal, a_th: f64) -> Result<(ComplexSignal, ComplexSignal)> {
    if !(a_th > 0.0) {
        return Err(Error::Config(format!("clip threshold {a_th} must be positive")));
    }
    let (c, e) = clip_samples(&sig.samples, a_th);
    Ok((
        ComplexSignal { samples: c, ..sig.clone() },
        ComplexSignal { samples: e, ..sig.clone() },
    ))
}

/// Centred brick-wall low-pass over the occupied band, truncated to `len`
/// taps: h[n] = (1/N_f)Σ_l e^{j2πln/N_f}, |n| ≤ (len−1)/2.
#[derive(Debug, Clone, PartialEq)]
pub struct LowpassFilter {
    pub taps: Vec<Complex64>,
}

impl LowpassFilter {
    pub fn new(cfg: &OfdmConfig, len: usize) -> Result<Self> {
        cfg.validate()?;
        if len % 2 == 0 || len == 0 || len > cfg.fft_size {
            return Err(Error::Config(format!("filter length {len} must be odd and at most fft_size")));
        }
        let half = (len / 2) as i64;
        let nf = cfg.fft_size as f64;
        let taps = (-half..=half)
            .map(|n| {
                (0..cfg.num_subcarriers)
                    .map(|i| {
                        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (cfg.subcarrier(i) * n) as f64 / nf)
                    })
                    .sum::<Complex64>()
                    / nf
            })
            .collect();
        Ok(LowpassFilter { taps })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Circular convolution of a sparse excess with the taps; returns the
    /// filtered signal and the number of nonzero input samples.
    pub fn filter_sparse(&self, excess: &[Complex64]) -> (Vec<Complex64>, u64) {
        let n = excess.len() as i64;
        let half = (self.taps.len() / 2) as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); excess.len()];
        let mut nonzero = 0;
        for (s, &e) in excess.iter().enumerate() {
            if e.re == 0.0 && e.im == 0.0 {
                continue;
            }
            nonzero += 1;
            for (k, &h) in self.taps.iter().enumerate() {
                let t = (s as i64 + k as i64 - half).rem_euclid(n) as usize;
                out[t] += e * h;
            }
        }
        (out, nonzero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfConfig {
    pub threshold: f64,
    pub iterations: usize,
    pub taps: usize,
}

impl CfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::Config("C&F threshold must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("C&F needs at least one iteration".into()));
        }
        if self.taps % 2 == 0 {
            return Err(Error::Config(format!("C&F filter length {} must be odd", self.taps)));
        }
        Ok(())
    }
}

fn count_iteration(cnt: &mut ComplexityCounter, j: usize, crossings: u64, taps: usize) {
    if cnt.crossings.len() <= j {
        cnt.crossings.resize(j + 1, 0);
    }
    cnt.crossings[j] += crossings;
    cnt.multiplications += crossings * taps as u64;
}

/// One clip-filter-subtract pass on a symbol body at threshold `a_th`.
fn cf_pass(body: &mut [Complex64], a_th: f64, filter: &LowpassFilter) -> u64 {
    let (_, excess) = clip_samples(body, a_th);
    let (filtered, n) = filter.filter_sparse(&excess);
    for (x, f) in body.iter_mut().zip(&filtered) {
        *x -= f;
    }
    n
}

/// Repeated C&F on one symbol body.
pub fn repeated_cf_body(body: &mut [Complex64], cfg: &CfConfig, filter: &LowpassFilter, cnt: &mut ComplexityCounter) {
    for j in 0..cfg.iterations {
        let n = cf_pass(body, cfg.threshold, filter);
        count_iteration(cnt, j, n, filter.len());
    }
    cnt.operations += cfg.iterations as u64;
    cnt.symbols += 1;
}

/// Repeated C&F applied symbol by symbol; guard intervals are re-copied.
pub fn repeated_cf(sig: &ComplexSignal, ofdm: &OfdmConfig, cfg: &CfConfig, cnt: &mut ComplexityCounter) -> Result<ComplexSignal> {
    cfg.validate()?;
    let filter = LowpassFilter::new(ofdm, cfg.taps)?;
    let mut out = sig.clone();
    for k in 0..out.num_symbols() {
        repeated_cf_body(out.body_mut(k), cfg, &filter, cnt);
    }
    out.recopy_gi();
    Ok(out)
}

// ----------------------------------------------------------------------------
// Adaptive threshold

/// Threshold schedule A⁰ = mean|x|, Aⁿ = √(N_f/N_p)·Aⁿ⁻¹ with N_p the count
/// of samples above Aⁿ⁻¹ in the current signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveCfSchedule {
    pub current: Option<f64>,
    pub finished: bool,
}

impl AdaptiveCfSchedule {
    pub fn new() -> Self {
        AdaptiveCfSchedule { current: None, finished: false }
    }

    /// Next threshold for `body`, or `None` once no sample exceeds the last one.
    pub fn next(&mut self, body: &[Complex64]) -> Option<f64> {
        if self.finished || body.is_empty() {
            return None;
        }
        let nf = body.len() as f64;
        let prev = match self.current {
            Some(a) => a,
            None => body.iter().map(|x| x.norm()).sum::<f64>() / nf,
        };
        // a relative guard keeps a constant envelope from crossing its own mean
        let np = body.iter().filter(|x| x.norm() > prev * (1.0 + 1e-12)).count();
        if np == 0 {
            self.finished = true;
            self.current = Some(prev);
            return None;
        }
        let a = (nf / np as f64).sqrt() * prev;
        self.current = Some(a);
        Some(a)
    }
}

impl Default for AdaptiveCfSchedule {
    fn default() -> Self {
        Self::new()
    }
}

/// Next threshold of the adaptive schedule for `body`.
pub fn adaptive_cf_threshold(body: &[Complex64], state: &mut AdaptiveCfSchedule) -> Option<f64> {
    state.next(body)
}

/// Adaptive-threshold C&F on one body: up to `iterations` passes, each at
/// the next scheduled threshold.
pub fn adaptive_cf_body(body: &mut [Complex64], iterations: usize, filter: &LowpassFilter, cnt: &mut ComplexityCounter) {
    let mut sched = AdaptiveCfSchedule::new();
    let mut done = 0;
    for j in 0..iterations {
        let Some(a) = sched.next(body) else { break };
        let n = cf_pass(body, a, filter);
        count_iteration(cnt, j, n, filter.len());
        done += 1;
    }
    cnt.operations += done;
    cnt.symbols += 1;
}

pub fn adaptive_cf(sig: &ComplexSignal, ofdm: &OfdmConfig, iterations: usize, taps: usize, cnt: &mut ComplexityCounter) -> Result<ComplexSignal> {
    let filter = LowpassFilter::new(ofdm, taps)?;
    let mut out = sig.clone();
    for k in 0..out.num_symbols() {
        adaptive_cf_body(out.body_mut(k), iterations, &filter, cnt);
    }
    out.recopy_gi();
    Ok(out)
}

// ----------------------------------------------------------------------------
// Companding

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompandConfig {
    pub v: f64,
    pub a: f64,
    pub ceiling: f64,
}

impl Default for CompandConfig {
    fn default() -> Self {
        CompandConfig { v: 7.0, a: 0.05, ceiling: 1.0 }
    }
}

impl CompandConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0 && self.a > 0.0 && self.ceiling > 0.0) {
            return Err(Error::Config("companding parameters must be positive".into()));
        }
        Ok(())
    }

    /// Output magnitude for input magnitude `r`.
    pub fn magnitude(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        // (1 + u)^{−a} with u = (v/r)^{1/a}, evaluated in logs to avoid overflow
        let ln_u = (self.v / r).ln() / self.a;
        let ln1p = if ln_u > 0.0 { ln_u + (-ln_u).exp().ln_1p() } else { ln_u.exp().ln_1p() };
        self.ceiling * (-self.a * ln1p).exp()
    }
}

pub fn compand_samples(x: &[Complex64], cfg: &CompandConfig) -> Vec<Complex64> {
    x.iter()
        .map(|&v| {
            let r = v.norm();
            if r == 0.0 {
                v
            } else {
                v * (cfg.magnitude(r) / r)
            }
        })
        .collect()
}

/// y = A_th·(x/|x|)·(1 + (v/|x|)^{1/a})^{−a}; zero samples pass unchanged.
pub fn compand(sig: &ComplexSignal, cfg: &CompandConfig) -> Result<ComplexSignal> {
    cfg.validate()?;
    Ok(ComplexSignal { samples: compand_samples(&sig.samples, cfg), ..sig.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clip_single_sample() {
        let x = vec![Complex64::from_polar(2.0, 0.4), Complex64::new(0.1, 0.0)];
        let (c, e) = clip_samples(&x, 1.0);
        assert_relative_eq!(e[0].norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(e[0].arg(), 0.4, epsilon = 1e-15);
        assert_eq!(e[1], Complex64::new(0.0, 0.0));
        assert_eq!(c[1], x[1]);
    }

    #[test]
    fn filter_rejects_even_length() {
        let cfg = OfdmConfig::default();
        assert!(LowpassFilter::new(&cfg, 64).is_err());
        let f = LowpassFilter::new(&cfg, 65).unwrap();
        assert_relative_eq!(f.taps[32].re, 64.0 / 512.0, epsilon = 1e-15);
    }

    #[test]
    fn below_threshold_is_identity() {
        let cfg = OfdmConfig::default();
        let sig = ComplexSignal::new(vec![Complex64::new(0.5, 0.0); 576], 512, 64).unwrap();
        let mut cnt = ComplexityCounter::default();
        let out = repeated_cf(&sig, &cfg, &CfConfig { threshold: 1.0, iterations: 1, taps: 65 }, &mut cnt).unwrap();
        assert_eq!(out, sig);
        assert_eq!(cnt.multiplications, 0);
    }

    #[test]
    fn schedule_edge_cases() {
        let flat = vec![Complex64::from_polar(0.7, 1.0); 16];
        let mut s = AdaptiveCfSchedule::new();
        assert_eq!(s.next(&flat), None);
        assert_relative_eq!(s.current.unwrap(), 0.7, epsilon = 1e-15);
        assert!(s.finished);
    }

    #[test]
    fn compand_limits() {
        let c = CompandConfig::default();
        assert_eq!(c.magnitude(0.0), 0.0);
        assert_relative_eq!(c.magnitude(1e9), 1.0, max_relative = 1e-9);
        let direct = (1.0 + 7f64.powi(20)).powf(-0.05);
        assert_relative_eq!(c.magnitude(1.0), direct, max_relative = 1e-13);
    }
}
