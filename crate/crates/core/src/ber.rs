//! Gaussian model of the cancellation distortion and the theoretical BER it
//! implies for Gray QPSK, 16QAM and 64QAM in AWGN, flat Rayleigh fading and
//! the 4×2 eigen-beam link.
//!
//! Two parameterisations are provided:
//!
//! * [`ModelMode::Correlated`] (default). The removed peak energy is partly
//!   correlated with the data: each symbol shrinks by `c = S_in·(1 + A²/σ²)`
//!   (the exponential-tail estimate of the excess-signal correlation), and
//!   only `S_in − c²` remains as uncorrelated noise. A flat channel gain β is
//!   equalised, so the decision variable has mean `μ·level` with
//!   `μ = 1 − c` and per-axis variance `σ_e² + σ_n²/β`.
//! * [`ModelMode::AsPrinted`]. The literal parameterisation
//!   `x̄_e = −α√(S_in/L)`, `μ = 1 − x̄_e/A`, `σ_e² = μ²S_in/L`, with σ_e
//!   divided by 2 (16QAM) or 4 (64QAM), and β entering as `x̄_e/√β`,
//!   `σ_e²/β`, `μδ/√β`. Kept for comparison; it does not match measured
//!   error moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mimo::{gen_flat, ordered_eigenvalues};
use crate::numeric::{erfc, gauss_tail, integrate_to_inf};
use crate::ofdm::{ConstellationSpec, Modulation};
use crate::pc::{distortion_integral_closed, PcKernel};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    #[default]
    Correlated,
    AsPrinted,
}

/// Parameters of the Gaussian distortion model. Amplitudes are per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionModel {
    pub mode: ModelMode,
    pub modulation: Modulation,
    /// In-band distortion power relative to the per-antenna power.
    pub s_in: f64,
    /// Relative shrink of every constellation point (correlated mode).
    pub shrink: f64,
    /// Mean distortion x̄_e on a QPSK point of amplitude A.
    pub mean_shift: f64,
    /// Effective distortion deviation σ_e for this order.
    pub sigma_e: f64,
    pub mu: f64,
    pub num_subcarriers: usize,
    /// Per-stream symbol energy per subcarrier.
    pub symbol_energy: f64,
    /// K/M: fraction of the antenna distortion landing on one stream.
    pub spatial_share: f64,
    /// Per-axis QPSK amplitude.
    pub amplitude: f64,
    pub delta: f64,
    pub beta: f64,
    pub sigma_n: f64,
    pub alpha: f64,
}

impl DistortionModel {
    /// Distortion-free model for `modulation` with symbol energy `es`.
    pub fn clean(modulation: Modulation, num_subcarriers: usize, es: f64) -> Self {
        let delta = ConstellationSpec::new(modulation, es).delta;
        let amplitude = ConstellationSpec::new(Modulation::Qpsk, es).delta;
        DistortionModel {
            mode: ModelMode::Correlated,
            modulation,
            s_in: 0.0,
            shrink: 0.0,
            mean_shift: 0.0,
            sigma_e: 0.0,
            mu: 1.0,
            num_subcarriers,
            symbol_energy: es,
            spatial_share: 1.0,
            amplitude,
            delta,
            beta: 1.0,
            sigma_n: 0.0,
            alpha: 0.0,
        }
    }

    fn rebuild(mut self) -> Self {
        let l = self.num_subcarriers as f64;
        match self.mode {
            ModelMode::Correlated => {
                let c = self.shrink;
                self.mu = 1.0 - c;
                self.mean_shift = -c * self.amplitude;
                let resid = (self.s_in - c * c).max(0.0);
                self.sigma_e = (self.spatial_share * resid * self.symbol_energy / 2.0).sqrt();
            }
            ModelMode::AsPrinted => {
                let s_abs = self.s_in * self.spatial_share * self.symbol_energy * l;
                self.mean_shift = -self.alpha * (s_abs / l).sqrt();
                self.mu = 1.0 - self.mean_shift / self.amplitude;
                let base = self.mu * (s_abs / l).sqrt();
                self.sigma_e = match self.modulation {
                    Modulation::Qpsk => base,
                    Modulation::Qam16 => base / 2.0,
                    Modulation::Qam64 => base / 4.0,
                };
            }
        }
        self
    }

    pub fn with_mode(mut self, mode: ModelMode) -> Self {
        self.mode = mode;
        self.rebuild()
    }

    pub fn with_noise(mut self, sigma_n: f64) -> Self {
        self.sigma_n = sigma_n;
        self
    }

    pub fn with_gain(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Re-target the model to one of K streams on M antennas carrying
    /// symbol energy `es` each.
    pub fn for_streams(mut self, antennas: usize, streams: usize, es: f64) -> Self {
        self.spatial_share = streams as f64 / antennas as f64;
        self.symbol_energy = es;
        self.delta = ConstellationSpec::new(self.modulation, es).delta;
        self.amplitude = ConstellationSpec::new(Modulation::Qpsk, es).delta;
        self.rebuild()
    }

    /// Noise deviation σ_n per axis for an Eb/N0 in dB, with N0 = 2σ_n².
    pub fn sigma_for_ebn0(&self, ebn0_db: f64) -> f64 {
        sigma_for_ebn0(self.symbol_energy, self.modulation.bits(), ebn0_db)
    }

    /// Per-axis mean and deviation of the decision variable for axis level
    /// `level` (a multiple of δ, or ±A for QPSK).
    fn decision(&self, level: f64) -> (f64, f64) {
        match self.mode {
            ModelMode::Correlated => {
                let var = self.sigma_e * self.sigma_e + self.sigma_n * self.sigma_n / self.beta;
                (self.mu * level, var.sqrt())
            }
            ModelMode::AsPrinted => {
                let var = self.sigma_e * self.sigma_e / self.beta + self.sigma_n * self.sigma_n;
                let mean = match self.modulation {
                    Modulation::Qpsk => level.signum() * (self.amplitude + self.mean_shift / self.beta.sqrt()),
                    _ => self.mu * level / self.beta.sqrt(),
                };
                (mean, var.sqrt())
            }
        }
    }

    /// Decision-level scale applied by the optimal receiver.
    fn level_scale(&self) -> f64 {
        match self.mode {
            ModelMode::Correlated => self.mu,
            ModelMode::AsPrinted => self.mu / self.beta.sqrt(),
        }
    }
}

/// σ_n per axis for symbol energy `es`, Q bits per symbol, Eb/N0 in dB.
pub fn sigma_for_ebn0(es: f64, bits: usize, ebn0_db: f64) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    (es / (2.0 * bits as f64 * ebn0)).sqrt()
}

/// Model for threshold `a_th` on a signal of mean power σ² spread over `l`
/// subcarriers: S_in = e_i·D(A_th)/σ².
pub fn model_from_threshold(a_th: f64, sigma2: f64, kernel: &PcKernel, l: usize, modulation: Modulation) -> DistortionModel {
    let d = distortion_integral_closed(a_th, sigma2);
    let s_in = kernel.e_i * d / sigma2;
    let shrink = (s_in * (1.0 + a_th * a_th / sigma2)).min(1.0);
    let base = DistortionModel {
        s_in,
        shrink,
        alpha: kernel.alpha,
        ..DistortionModel::clean(modulation, l, sigma2 / l as f64)
    };
    base.rebuild()
}

// ----------------------------------------------------------------------------
// AWGN

/// Exact Gray PAM bit error rate per axis: enumerate every transmitted level
/// against every decision region. `levels` pairs axis amplitudes with Gray
/// labels; decisions use midpoints between the levels scaled by `scale`.
pub fn pam_ber<F: Fn(f64) -> (f64, f64)>(levels: &[(f64, usize)], scale: f64, decision: F) -> f64 {
    let m = levels.len();
    let bits = m.trailing_zeros() as usize;
    let mut sorted: Vec<(f64, usize)> = levels.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let thresholds: Vec<f64> = sorted.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0) * scale).collect();
    let mut total = 0.0;
    for &(level, label) in &sorted {
        let (mean, sd) = decision(level);
        for (j, &(_, lab_j)) in sorted.iter().enumerate() {
            let d = (label ^ lab_j).count_ones() as f64;
            if d == 0.0 {
                continue;
            }
            let above_lo = if j == 0 { 1.0 } else { gauss_tail(thresholds[j - 1], mean, sd) };
            let above_hi = if j == m - 1 { 0.0 } else { gauss_tail(thresholds[j], mean, sd) };
            total += d * (above_lo - above_hi);
        }
    }
    total / (m * bits) as f64
}

fn axis_levels(m: &DistortionModel) -> Vec<(f64, usize)> {
    ConstellationSpec::new(m.modulation, m.symbol_energy).axis_levels()
}

/// P_b = ½·erfc(mean/(√2·sd)).
pub fn ber_qpsk_awgn(m: &DistortionModel) -> f64 {
    let (mean, sd) = m.decision(m.amplitude);
    if sd == 0.0 {
        return if mean > 0.0 { 0.0 } else { 0.5 };
    }
    0.5 * erfc(mean / (std::f64::consts::SQRT_2 * sd))
}

/// Sign-bit error probability of 16QAM, decision threshold 0.
pub fn p_eh(m: &DistortionModel) -> f64 {
    let (m1, s) = m.decision(m.delta);
    let (m3, _) = m.decision(3.0 * m.delta);
    0.5 * (gauss_tail(0.0, -m1, s) + gauss_tail(0.0, -m3, s))
}

/// Magnitude-bit error probability of 16QAM with decision boundaries ±|t_l|:
/// an outer point errs inside (−|t|, |t|), an inner point errs outside it.
pub fn p_el(m: &DistortionModel, t_l: f64) -> f64 {
    let t = t_l.abs();
    let (m1, s) = m.decision(m.delta);
    let (m3, _) = m.decision(3.0 * m.delta);
    let outer_inside = gauss_tail(-t, m3, s) - gauss_tail(t, m3, s);
    let inner_outside = gauss_tail(t, m1, s) + gauss_tail(t, -m1, s);
    0.5 * (outer_inside + inner_outside)
}

/// Two-Gaussian form of the magnitude-bit error on the negative half axis:
/// points −μδ and −3μδ separated by a single boundary `t_l`. Its minimiser is
/// the midpoint −2μδ (scaled by 1/√β in the printed convention).
pub fn p_el_boundary(m: &DistortionModel, t_l: f64) -> f64 {
    let (m1, s) = m.decision(-m.delta);
    let (m3, _) = m.decision(-3.0 * m.delta);
    0.5 * (gauss_tail(t_l, m3, s) + gauss_tail(-t_l, -m1, s))
}

/// Optimal lower threshold T_L^o.
pub fn optimal_t_l(m: &DistortionModel) -> f64 {
    -2.0 * m.delta * m.level_scale()
}

/// Average of the sign-bit and magnitude-bit error probabilities.
pub fn ber_16qam_awgn(m: &DistortionModel) -> f64 {
    0.5 * (p_eh(m) + p_el(m, optimal_t_l(m)))
}

/// Gray 64QAM by bit-class enumeration over the 8-level axis.
pub fn ber_64qam_awgn(m: &DistortionModel) -> f64 {
    pam_ber(&axis_levels(m), m.level_scale(), |lv| m.decision(lv))
}

pub fn ber_awgn(m: &DistortionModel) -> f64 {
    match m.modulation {
        Modulation::Qpsk => ber_qpsk_awgn(m),
        Modulation::Qam16 => ber_16qam_awgn(m),
        Modulation::Qam64 => ber_64qam_awgn(m),
    }
}

// ----------------------------------------------------------------------------
// Flat Rayleigh

/// Average of the AWGN formula over β ~ Exp(1).
pub fn ber_flat_rayleigh(m: &DistortionModel) -> Result<f64> {
    let f = |b: f64| (-b).exp() * ber_awgn(&m.with_gain(b.max(1e-300)));
    let r = integrate_to_inf(f, 0.0, 1e-8)?;
    Ok(r.value.clamp(0.0, 0.5))
}

// ----------------------------------------------------------------------------
// Eigenvalue densities

/// Ordered-eigenvalue densities of a 4×2 channel (λ₁ ≥ λ₂).
#[derive(Debug, Clone, PartialEq)]
pub enum EigenPdfSpec {
    /// f₁ = Φ₁e^{−λ} + Φ₂e^{−2λ}, f₂ = −Φ₁e^{−2λ} with
    /// Φ₁ = λ²(λ²/6 − λ + 2), Φ₂ = λ²(λ²/6 + λ + 2), exactly as printed.
    /// They fail normalisation; see [`eigen_pdf_audit`].
    AnalyticAsPrinted,
    Empirical(EigenHistogram),
    /// Every eigenvalue equal to the given value.
    PointMass(f64),
}

/// Seeded histogram of ordered eigenvalues of H·H^H.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenHistogram {
    pub bin_width: f64,
    /// `density[i][b]` for stream i (0-based).
    pub density: Vec<Vec<f64>>,
    pub draws: usize,
    pub seed: u64,
}

impl EigenHistogram {
    /// Draw `draws` i.i.d. CN(0,1) `rx`×`tx` matrices.
    pub fn sample(rx: usize, tx: usize, draws: usize, bin_width: f64, seed_value: u64) -> Result<Self> {
        if draws == 0 || !(bin_width > 0.0) {
            return Err(Error::Config("need draws > 0 and a positive bin width".into()));
        }
        let mut rng = seed::rng(seed::derive(seed_value, seed::domain::EIGEN, 0));
        let r = rx.min(tx);
        let mut samples = vec![Vec::with_capacity(draws); r];
        for _ in 0..draws {
            let ev = ordered_eigenvalues(&gen_flat(rx, tx, &mut rng))?;
            for (i, v) in ev.into_iter().enumerate() {
                samples[i].push(v);
            }
        }
        let max = samples.iter().flatten().cloned().fold(0.0, f64::max);
        let bins = (max / bin_width).floor() as usize + 1;
        let density = samples
            .iter()
            .map(|s| {
                let mut h = vec![0.0; bins];
                for &v in s {
                    h[(v / bin_width) as usize] += 1.0;
                }
                h.iter().map(|c| c / (draws as f64 * bin_width)).collect()
            })
            .collect();
        Ok(EigenHistogram { bin_width, density, draws, seed: seed_value })
    }

    pub fn streams(&self) -> usize {
        self.density.len()
    }

    /// Σ density·width for stream `i` (1-based).
    pub fn integral(&self, i: usize) -> f64 {
        self.density[i - 1].iter().sum::<f64>() * self.bin_width
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        (b as f64 + 0.5) * self.bin_width
    }
}

fn phi1(l: f64) -> f64 {
    l * l * (l * l / 6.0 - l + 2.0)
}

fn phi2(l: f64) -> f64 {
    l * l * (l * l / 6.0 + l + 2.0)
}

/// Density of the i-th ordered eigenvalue (i ∈ {1, 2}).
pub fn eigen_pdf(lambda: f64, i: usize, spec: &EigenPdfSpec) -> Result<f64> {
    if !(1..=2).contains(&i) {
        return Err(Error::Domain(format!("stream index {i} not in {{1, 2}}")));
    }
    if lambda < 0.0 {
        return Ok(0.0);
    }
    match spec {
        EigenPdfSpec::AnalyticAsPrinted => Ok(if i == 1 {
            phi1(lambda) * (-lambda).exp() + phi2(lambda) * (-2.0 * lambda).exp()
        } else {
            -phi1(lambda) * (-2.0 * lambda).exp()
        }),
        EigenPdfSpec::Empirical(h) => {
            if i > h.streams() {
                return Err(Error::Domain(format!("histogram has {} streams", h.streams())));
            }
            let b = (lambda / h.bin_width) as usize;
            Ok(h.density[i - 1].get(b).cloned().unwrap_or(0.0))
        }
        EigenPdfSpec::PointMass(_) => Err(Error::Domain("a point mass has no density".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfAudit {
    pub integrals: [f64; 2],
    /// Some density does not integrate to one within 10⁻³.
    pub flagged: bool,
}

/// Integrals of both densities and whether either misses one by over 10⁻³.
pub fn eigen_pdf_audit(spec: &EigenPdfSpec) -> Result<PdfAudit> {
    let integrals = match spec {
        EigenPdfSpec::AnalyticAsPrinted => {
            let f1 = integrate_to_inf(|l| eigen_pdf(l, 1, spec).unwrap_or(0.0), 0.0, 1e-10)?.value;
            let f2 = integrate_to_inf(|l| eigen_pdf(l, 2, spec).unwrap_or(0.0), 0.0, 1e-10)?.value;
            [f1, f2]
        }
        EigenPdfSpec::Empirical(h) => [h.integral(1), h.integral(2)],
        EigenPdfSpec::PointMass(_) => [1.0, 1.0],
    };
    let flagged = integrals.iter().any(|v| (v - 1.0).abs() > 1e-3);
    Ok(PdfAudit { integrals, flagged })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsdmBer {
    pub per_stream: [f64; 2],
    pub average: f64,
}

/// Per-eigen-channel BER ∫f_i(λ)·P_b(λ)dλ with β = λ, and their mean.
pub fn ber_esdm(m: &DistortionModel, spec: &EigenPdfSpec) -> Result<EsdmBer> {
    let p = |l: f64| ber_awgn(&m.with_gain(l.max(1e-300)));
    let per_stream = match spec {
        EigenPdfSpec::PointMass(l0) => [p(*l0), p(*l0)],
        EigenPdfSpec::Empirical(h) => {
            if h.streams() < 2 {
                return Err(Error::Domain("histogram needs two streams".into()));
            }
            let mut out = [0.0; 2];
            for (i, o) in out.iter_mut().enumerate() {
                *o = h.density[i]
                    .iter()
                    .enumerate()
                    .filter(|(_, d)| **d > 0.0)
                    .map(|(b, d)| d * h.bin_width * p(h.bin_center(b)))
                    .sum();
            }
            out
        }
        EigenPdfSpec::AnalyticAsPrinted => {
            let mut out = [0.0; 2];
            for (i, o) in out.iter_mut().enumerate() {
                let f = |l: f64| eigen_pdf(l, i + 1, spec).unwrap_or(0.0) * p(l);
                *o = integrate_to_inf(f, 0.0, 1e-8)?.value;
            }
            out
        }
    };
    Ok(EsdmBer { per_stream, average: 0.5 * (per_stream[0] + per_stream[1]) })
}

// ----------------------------------------------------------------------------
// Threshold optimisation helper

/// Minimise `f` on [lo, hi] by bisection on the sign of a central
/// difference, to an interval of width `tol`.
pub fn minimize_unimodal<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let h = (hi - lo) * 1e-3;
        if f(mid + h) > f(mid - h) {
            hi = mid + h;
        } else {
            lo = mid - h;
        }
    }
    0.5 * (lo + hi)
}
