//! OFDM substrate: Gray constellations, oversampled modulation with a cyclic
//! prefix, demodulation and AWGN.
//!
//! Conventions used throughout the crate:
//!
//! * Occupied subcarriers are `l ∈ [−L/2+1, L/2]`; grid index `i` holds
//!   `l = i − L/2 + 1`, which lives in FFT bin `l mod N_f`.
//! * `x[s] = Σ_l X_l e^{j2πls/N_f}` and `X_l = (1/N_f) Σ_s x[s] e^{−j2πls/N_f}`,
//!   so a grid with per-subcarrier power `S_t/L` yields time-domain power `S_t`.
//! * A symbol's `Q` bits are split MSB-first: the first `Q/2` select the
//!   in-phase level, the rest the quadrature level. Each axis uses a binary
//!   reflected Gray code over levels ordered from most positive to most
//!   negative, so a leading 0 means a positive amplitude. For QPSK "00" is
//!   `(A, A)`; for 16QAM the high bit of each axis is the sign and the low bit
//!   selects outer (0) or inner (1).

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn from_bits(q: u32) -> Result<Self> {
        match q {
            2 => Ok(Modulation::Qpsk),
            4 => Ok(Modulation::Qam16),
            6 => Ok(Modulation::Qam64),
            _ => Err(Error::Config(format!("modulation order {q} not in {{2, 4, 6}}"))),
        }
    }

    /// Bits per symbol Q.
    pub fn bits(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    /// Amplitude levels per axis.
    pub fn levels(self) -> usize {
        1 << (self.bits() / 2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
            Modulation::Qam64 => "64qam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub num_subcarriers: usize,
    pub fft_size: usize,
    pub gi_length: usize,
    pub modulation: Modulation,
    pub average_power: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        OfdmConfig {
            num_subcarriers: 64,
            fft_size: 512,
            gi_length: 64,
            modulation: Modulation::Qpsk,
            average_power: 1.0,
        }
    }
}

impl OfdmConfig {
    pub fn with_modulation(modulation: Modulation) -> Self {
        OfdmConfig { modulation, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let (l, nf) = (self.num_subcarriers, self.fft_size);
        if !nf.is_power_of_two() {
            return Err(Error::Config(format!("fft_size {nf} is not a power of two")));
        }
        if l < 2 || l % 2 != 0 {
            return Err(Error::Config(format!("num_subcarriers {l} must be even and >= 2")));
        }
        if l >= nf || nf % l != 0 || nf / l < 2 {
            return Err(Error::Config(format!(
                "oversampling fft_size/num_subcarriers = {nf}/{l} must be an integer >= 2"
            )));
        }
        if self.gi_length > nf {
            return Err(Error::Config(format!("gi_length {} exceeds fft_size", self.gi_length)));
        }
        if !(self.average_power > 0.0 && self.average_power.is_finite()) {
            return Err(Error::Config("average_power must be positive".into()));
        }
        Ok(())
    }

    pub fn oversampling(&self) -> usize {
        self.fft_size / self.num_subcarriers
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.gi_length
    }

    /// Subcarrier index l of grid position i.
    pub fn subcarrier(&self, i: usize) -> i64 {
        i as i64 - (self.num_subcarriers / 2) as i64 + 1
    }

    /// FFT bin holding signed frequency index l.
    pub fn bin(&self, l: i64) -> usize {
        l.rem_euclid(self.fft_size as i64) as usize
    }

    /// Nominal per-subcarrier power S_t/L.
    pub fn subcarrier_power(&self) -> f64 {
        self.average_power / self.num_subcarriers as f64
    }
}

// ----------------------------------------------------------------------------
// Constellations

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSpec {
    pub modulation: Modulation,
    /// Half the minimum axis spacing.
    pub delta: f64,
    /// Points indexed by the Q-bit label read MSB-first.
    pub points: Vec<Complex64>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl ConstellationSpec {
    /// Gray constellation with average power `power` per symbol.
    pub fn new(modulation: Modulation, power: f64) -> Self {
        let m = modulation.levels();
        let half = modulation.bits() / 2;
        let delta = (3.0 * power / (2.0 * (m * m - 1) as f64)).sqrt();
        let mut level_of_label = vec![0.0; m];
        for i in 0..m {
            level_of_label[gray(i)] = (m as f64 - 1.0 - 2.0 * i as f64) * delta;
        }
        let points = (0..1usize << modulation.bits())
            .map(|label| {
                let li = label >> half;
                let lq = label & (m - 1);
                Complex64::new(level_of_label[li], level_of_label[lq])
            })
            .collect();
        ConstellationSpec { modulation, delta, points }
    }

    pub fn for_config(cfg: &OfdmConfig) -> Self {
        Self::new(cfg.modulation, cfg.subcarrier_power())
    }

    /// Per-axis amplitude of the QPSK points (equal to δ for every order).
    pub fn amplitude(&self) -> f64 {
        self.delta
    }

    pub fn bits(&self) -> usize {
        self.modulation.bits()
    }

    /// Axis levels ordered from most positive to most negative, with labels.
    pub fn axis_levels(&self) -> Vec<(f64, usize)> {
        let m = self.modulation.levels();
        (0..m)
            .map(|i| ((m as f64 - 1.0 - 2.0 * i as f64) * self.delta, gray(i)))
            .collect()
    }

    pub fn average_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Nearest axis label for amplitude `y` when the levels are scaled by `mu`.
    fn slice_axis(&self, y: f64, mu: f64) -> usize {
        let m = self.modulation.levels() as f64;
        let i = ((m - 1.0 - y / (mu * self.delta)) / 2.0).round();
        gray(i.clamp(0.0, m - 1.0) as usize)
    }

    /// Hard decision of one symbol to its label, levels scaled by `mu`.
    pub fn slice(&self, y: Complex64, mu: f64) -> usize {
        let half = self.bits() / 2;
        (self.slice_axis(y.re, mu) << half) | self.slice_axis(y.im, mu)
    }
}

/// Per-subcarrier symbols in grid order (see the module docs).
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    pub symbols: Vec<Complex64>,
}

impl SymbolGrid {
    pub fn zeros(l: usize) -> Self {
        SymbolGrid { symbols: vec![Complex64::new(0.0, 0.0); l] }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Map `L·Q` bits (0/1 bytes) onto a grid.
pub fn map_bits(bits: &[u8], spec: &ConstellationSpec) -> Result<SymbolGrid> {
    let q = spec.bits();
    if bits.len() % q != 0 {
        return Err(Error::Shape(format!(
            "{} bits is not a multiple of Q = {q}",
            bits.len()
        )));
    }
    let symbols = bits
        .chunks(q)
        .map(|c| {
            let label = c.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            spec.points[label]
        })
        .collect();
    Ok(SymbolGrid { symbols })
}

/// Hard-decision demapping with decision levels scaled by `mu` (1 for the
/// nominal constellation).
pub fn demap_hard(grid: &SymbolGrid, spec: &ConstellationSpec, mu: f64) -> Vec<u8> {
    let q = spec.bits();
    let mut out = Vec::with_capacity(grid.len() * q);
    for &y in &grid.symbols {
        let label = spec.slice(y, mu);
        for b in (0..q).rev() {
            out.push(((label >> b) & 1) as u8);
        }
    }
    out
}

pub fn random_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

// ----------------------------------------------------------------------------
// Signals

/// Time-domain complex baseband samples. `samples.len()` is a multiple of
/// `fft_size + gi_length`; each symbol is its GI followed by its body.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub fft_size: usize,
    pub gi_length: usize,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, fft_size: usize, gi_length: usize) -> Result<Self> {
        let n = fft_size + gi_length;
        if n == 0 || samples.len() % n != 0 {
            return Err(Error::Shape(format!(
                "{} samples is not a multiple of symbol length {n}",
                samples.len()
            )));
        }
        Ok(ComplexSignal { samples, fft_size, gi_length })
    }

    pub fn zeros(cfg: &OfdmConfig, symbols: usize) -> Self {
        ComplexSignal {
            samples: vec![Complex64::new(0.0, 0.0); symbols * cfg.symbol_len()],
            fft_size: cfg.fft_size,
            gi_length: cfg.gi_length,
        }
    }

    /// Sample spacing in units of the useful symbol duration T.
    pub fn sample_interval(&self) -> f64 {
        1.0 / self.fft_size as f64
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.gi_length
    }

    pub fn num_symbols(&self) -> usize {
        self.samples.len() / self.symbol_len()
    }

    /// GI-stripped body of symbol `k`.
    pub fn body(&self, k: usize) -> &[Complex64] {
        let start = k * self.symbol_len() + self.gi_length;
        &self.samples[start..start + self.fft_size]
    }

    pub fn body_mut(&mut self, k: usize) -> &mut [Complex64] {
        let start = k * self.symbol_len() + self.gi_length;
        &mut self.samples[start..start + self.fft_size]
    }

    /// Rewrite every GI as a copy of its symbol tail.
    pub fn recopy_gi(&mut self) {
        let (n, g, nf) = (self.symbol_len(), self.gi_length, self.fft_size);
        for sym in self.samples.chunks_mut(n) {
            let (gi, body) = sym.split_at_mut(g);
            gi.copy_from_slice(&body[nf - g..]);
        }
    }

    /// Mean power of all GI-stripped bodies.
    pub fn body_power(&self) -> f64 {
        let n = self.num_symbols();
        if n == 0 {
            return 0.0;
        }
        let e: f64 = (0..n).map(|k| self.body(k).iter().map(|x| x.norm_sqr()).sum::<f64>()).sum();
        e / (n * self.fft_size) as f64
    }

    /// Concatenate single- or multi-symbol signals with the same geometry.
    pub fn concat(parts: &[ComplexSignal]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        let mut samples = Vec::new();
        for p in parts {
            if p.fft_size != first.fft_size || p.gi_length != first.gi_length {
                return Err(Error::Shape("mismatched symbol geometry".into()));
            }
            samples.extend_from_slice(&p.samples);
        }
        Ok(ComplexSignal { samples, fft_size: first.fft_size, gi_length: first.gi_length })
    }
}

/// Modulator/demodulator with cached FFT plans.
#[derive(Clone)]
pub struct OfdmEngine {
    cfg: OfdmConfig,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OfdmEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmEngine").field("cfg", &self.cfg).finish()
    }
}

impl OfdmEngine {
    pub fn new(cfg: OfdmConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(OfdmEngine {
            cfg,
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    /// Unnormalised inverse transform of a full N_f spectrum, in place.
    pub fn ifft(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    /// Forward transform scaled by 1/N_f, in place.
    pub fn fft(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        let s = 1.0 / self.cfg.fft_size as f64;
        buf.iter_mut().for_each(|x| *x *= s);
    }

    /// Write the body of one symbol from its grid.
    pub fn synthesize_body(&self, grid: &SymbolGrid, body: &mut [Complex64]) -> Result<()> {
        let cfg = &self.cfg;
        if grid.len() != cfg.num_subcarriers {
            return Err(Error::Shape(format!(
                "grid has {} entries, expected {}",
                grid.len(),
                cfg.num_subcarriers
            )));
        }
        if body.len() != cfg.fft_size {
            return Err(Error::Shape("body length differs from fft_size".into()));
        }
        body.fill(Complex64::new(0.0, 0.0));
        for (i, &x) in grid.symbols.iter().enumerate() {
            body[cfg.bin(cfg.subcarrier(i))] = x;
        }
        self.ifft(body);
        Ok(())
    }

    /// Extract the occupied bins from one symbol body.
    pub fn analyze_body(&self, body: &[Complex64]) -> Result<SymbolGrid> {
        let cfg = &self.cfg;
        if body.len() != cfg.fft_size {
            return Err(Error::Shape(format!(
                "body has {} samples, expected {}",
                body.len(),
                cfg.fft_size
            )));
        }
        let mut buf = body.to_vec();
        self.fft(&mut buf);
        let symbols = (0..cfg.num_subcarriers).map(|i| buf[cfg.bin(cfg.subcarrier(i))]).collect();
        Ok(SymbolGrid { symbols })
    }

    /// One symbol with cyclic prefix.
    pub fn modulate(&self, grid: &SymbolGrid) -> Result<ComplexSignal> {
        let mut sig = ComplexSignal::zeros(&self.cfg, 1);
        self.synthesize_body(grid, sig.body_mut(0))?;
        sig.recopy_gi();
        Ok(sig)
    }

    /// Consecutive symbols with cyclic prefixes.
    pub fn modulate_many(&self, grids: &[SymbolGrid]) -> Result<ComplexSignal> {
        let mut sig = ComplexSignal::zeros(&self.cfg, grids.len());
        for (k, g) in grids.iter().enumerate() {
            self.synthesize_body(g, sig.body_mut(k))?;
        }
        sig.recopy_gi();
        Ok(sig)
    }

    /// Strip each GI and return the occupied bins of every symbol.
    pub fn demodulate(&self, sig: &ComplexSignal) -> Result<Vec<SymbolGrid>> {
        if sig.fft_size != self.cfg.fft_size || sig.gi_length != self.cfg.gi_length {
            return Err(Error::Shape("signal geometry differs from configuration".into()));
        }
        if sig.samples.len() % sig.symbol_len() != 0 {
            return Err(Error::Shape("signal length is not a whole number of symbols".into()));
        }
        (0..sig.num_symbols()).map(|k| self.analyze_body(sig.body(k))).collect()
    }
}

pub fn modulate(grid: &SymbolGrid, cfg: &OfdmConfig) -> Result<ComplexSignal> {
    OfdmEngine::new(*cfg)?.modulate(grid)
}

pub fn demodulate(sig: &ComplexSignal, cfg: &OfdmConfig) -> Result<Vec<SymbolGrid>> {
    OfdmEngine::new(*cfg)?.demodulate(sig)
}

/// Add complex Gaussian noise with per-component variance `sigma_n²`.
pub fn add_awgn_with<R: Rng + ?Sized>(samples: &mut [Complex64], sigma_n: f64, rng: &mut R) {
    if sigma_n == 0.0 {
        return;
    }
    for x in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *x += Complex64::new(re, im) * sigma_n;
    }
}

pub fn add_awgn(sig: &ComplexSignal, sigma_n: f64, seed_value: u64) -> Result<ComplexSignal> {
    if !(sigma_n >= 0.0) {
        return Err(Error::Config(format!("sigma_n = {sigma_n} must be >= 0")));
    }
    let mut out = sig.clone();
    add_awgn_with(&mut out.samples, sigma_n, &mut seed::rng(seed_value));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn config_validation() {
        assert!(OfdmConfig::default().validate().is_ok());
        let bad = OfdmConfig { fft_size: 500, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OfdmConfig { num_subcarriers: 512, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OfdmConfig { average_power: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn qpsk_zero_label_is_positive_corner() {
        let spec = ConstellationSpec::new(Modulation::Qpsk, 1.0 / 64.0);
        let g = map_bits(&[0, 0], &spec).unwrap();
        let a = (1.0f64 / 128.0).sqrt();
        assert_relative_eq!(g.symbols[0].re, a, epsilon = 1e-15);
        assert_relative_eq!(g.symbols[0].im, a, epsilon = 1e-15);
    }

    #[test]
    fn sixteen_qam_high_bit_is_sign() {
        let spec = ConstellationSpec::new(Modulation::Qam16, 1.0);
        for (label, p) in spec.points.iter().enumerate() {
            assert_eq!(label >> 3 & 1 == 1, p.re < 0.0);
            assert_eq!(label >> 1 & 1 == 1, p.im < 0.0);
            // low bit: 1 = inner level
            assert_eq!(label >> 2 & 1 == 1, p.re.abs() < 2.0 * spec.delta);
        }
    }

    #[test]
    fn constellation_power_is_normalised() {
        for m in [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64] {
            let spec = ConstellationSpec::new(m, 0.25);
            assert_relative_eq!(spec.average_power(), 0.25, max_relative = 1e-12);
        }
    }

    #[test]
    fn bad_bit_count_is_shape_error() {
        let spec = ConstellationSpec::new(Modulation::Qam16, 1.0);
        assert!(matches!(map_bits(&[0, 1, 1], &spec), Err(Error::Shape(_))));
    }

    #[test]
    fn single_subcarrier_is_a_tone() {
        let cfg = OfdmConfig::default();
        let mut grid = SymbolGrid::zeros(64);
        grid.symbols[32] = Complex64::new(1.0, 0.0); // l = 1
        assert_eq!(cfg.subcarrier(32), 1);
        let sig = modulate(&grid, &cfg).unwrap();
        for x in sig.body(0) {
            assert_relative_eq!(x.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_grid_zero_signal() {
        let cfg = OfdmConfig::default();
        let sig = modulate(&SymbolGrid::zeros(64), &cfg).unwrap();
        assert!(sig.samples.iter().all(|x| x.norm() == 0.0));
        let g = demodulate(&sig, &cfg).unwrap();
        assert!(g[0].symbols.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn demodulate_rejects_bad_length() {
        let cfg = OfdmConfig::default();
        let sig = ComplexSignal { samples: vec![Complex64::new(0.0, 0.0); 100], fft_size: 512, gi_length: 64 };
        assert!(demodulate(&sig, &cfg).is_err());
    }

    #[test]
    fn awgn_zero_sigma_is_identity() {
        let cfg = OfdmConfig::default();
        let sig = ComplexSignal::zeros(&cfg, 2);
        assert_eq!(add_awgn(&sig, 0.0, 3).unwrap(), sig);
        assert!(add_awgn(&sig, -1.0, 3).is_err());
    }
}
