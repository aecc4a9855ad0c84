//! Multipath MIMO channels, per-subcarrier SVD and the eigen-beam (E-SDM)
//! link.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::{ComplexSignal, OfdmConfig, SymbolGrid};
use crate::seed;

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub tx: usize,
    pub rx: usize,
    pub streams: usize,
    pub total_power: f64,
}

impl StreamConfig {
    pub fn siso() -> Self {
        StreamConfig { tx: 1, rx: 1, streams: 1, total_power: 1.0 }
    }

    /// Four transmit, two receive antennas, two streams.
    pub fn esdm_4x2() -> Self {
        StreamConfig { tx: 4, rx: 2, streams: 2, total_power: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx == 0 || self.rx == 0 || self.streams == 0 {
            return Err(Error::Config("antenna and stream counts must be positive".into()));
        }
        if self.streams > self.tx.min(self.rx) {
            return Err(Error::Config(format!(
                "{} streams exceed min(M, N) = {}",
                self.streams,
                self.tx.min(self.rx)
            )));
        }
        if !(self.total_power > 0.0) {
            return Err(Error::Config("total power must be positive".into()));
        }
        Ok(())
    }

    /// Equal power per stream, S_t/K.
    pub fn stream_power(&self) -> f64 {
        self.total_power / self.streams as f64
    }
}

/// Delay profile: `taps` paths spaced `tap_spacing` samples apart, with
/// power falling `decay_db` per tap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub taps: usize,
    pub decay_db: f64,
    pub tap_spacing: usize,
}

impl Default for ChannelProfile {
    fn default() -> Self {
        ChannelProfile { taps: 6, decay_db: 1.0, tap_spacing: 8 }
    }
}

impl ChannelProfile {
    /// Tap powers, normalised to sum to one.
    pub fn powers(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.taps).map(|d| 10f64.powf(-self.decay_db * d as f64 / 10.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / s).collect()
    }

    pub fn max_delay(&self) -> usize {
        self.taps.saturating_sub(1) * self.tap_spacing
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub tx: usize,
    pub rx: usize,
    /// `taps[d]` is the N×M gain matrix of path d.
    pub taps: Vec<CMatrix>,
    pub tap_spacing: usize,
    pub decay_db: f64,
    /// H^l in grid order.
    pub per_subcarrier: Vec<CMatrix>,
}

fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

impl ChannelRealization {
    /// Realization from explicit taps; per-subcarrier matrices follow from
    /// H^l = Σ_d h[d]·e^{−j2πl·d·spacing/N_f}.
    pub fn from_taps(taps: Vec<CMatrix>, tap_spacing: usize, decay_db: f64, ofdm: &OfdmConfig) -> Result<Self> {
        let first = taps.first().ok_or_else(|| Error::Config("channel needs at least one tap".into()))?;
        let (rx, tx) = first.shape();
        if taps.iter().any(|t| t.shape() != (rx, tx)) {
            return Err(Error::Shape("tap matrices differ in shape".into()));
        }
        let nf = ofdm.fft_size as f64;
        let per_subcarrier = (0..ofdm.num_subcarriers)
            .map(|i| {
                let l = ofdm.subcarrier(i) as f64;
                let mut h = CMatrix::zeros(rx, tx);
                for (d, t) in taps.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * l * (d * tap_spacing) as f64 / nf;
                    h += t * Complex64::from_polar(1.0, ph);
                }
                h
            })
            .collect();
        Ok(ChannelRealization { tx, rx, taps, tap_spacing, decay_db, per_subcarrier })
    }

    /// Pass per-antenna waveforms through the multipath taps. Samples before
    /// the start of the stream are taken as zero.
    pub fn apply_waveform(&self, tx: &[ComplexSignal]) -> Result<Vec<ComplexSignal>> {
        if tx.len() != self.tx {
            return Err(Error::Shape(format!("{} transmit signals for {} antennas", tx.len(), self.tx)));
        }
        let n = tx[0].samples.len();
        if tx.iter().any(|s| s.samples.len() != n) {
            return Err(Error::Shape("transmit signals differ in length".into()));
        }
        (0..self.rx)
            .map(|r| {
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                for (d, h) in self.taps.iter().enumerate() {
                    let delay = d * self.tap_spacing;
                    for (m, x) in tx.iter().enumerate() {
                        let g = h[(r, m)];
                        for s in delay..n {
                            out[s] += g * x.samples[s - delay];
                        }
                    }
                }
                Ok(ComplexSignal { samples: out, ..tx[0].clone() })
            })
            .collect()
    }
}

/// I.i.d. complex Gaussian taps with the profile's power decay, so that
/// E‖H^l‖²_F = N·M.
pub fn gen_channel(cfg: &StreamConfig, ofdm: &OfdmConfig, profile: &ChannelProfile, seed_value: u64) -> Result<ChannelRealization> {
    cfg.validate()?;
    if !(profile.decay_db >= 0.0) || profile.taps == 0 {
        return Err(Error::Config("decay must be >= 0 and taps > 0".into()));
    }
    let mut rng = seed::rng(seed_value);
    gen_channel_with(cfg, ofdm, profile, &mut rng)
}

pub fn gen_channel_with<R: Rng + ?Sized>(
    cfg: &StreamConfig,
    ofdm: &OfdmConfig,
    profile: &ChannelProfile,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let taps = profile
        .powers()
        .into_iter()
        .map(|p| CMatrix::from_fn(cfg.rx, cfg.tx, |_, _| cn(rng, p)))
        .collect();
    ChannelRealization::from_taps(taps, profile.tap_spacing, profile.decay_db, ofdm)
}

/// Flat channel with i.i.d. CN(0,1) entries.
pub fn gen_flat<R: Rng + ?Sized>(rx: usize, tx: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rx, tx, |_, _| cn(rng, 1.0))
}

// ----------------------------------------------------------------------------
// SVD

/// Thin SVD H = U·diag(σ)·V^H, σ descending. The first nonzero entry of
/// every V column is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierSvd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl SubcarrierSvd {
    /// Eigenvalues λ_k = σ_k² of H·H^H.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s * s).collect()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let r = self.singular_values.len();
        let s = CMatrix::from_fn(r, r, |i, j| if i == j { Complex64::new(self.singular_values[i], 0.0) } else { Complex64::new(0.0, 0.0) });
        &self.u * s * self.v.adjoint()
    }
}

pub fn svd(h: &CMatrix) -> Result<SubcarrierSvd> {
    let d = h
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let mut u = d.u.ok_or_else(|| Error::Numerical("SVD returned no U".into()))?;
    let mut v = d.v_t.ok_or_else(|| Error::Numerical("SVD returned no V".into()))?.adjoint();
    let sv: Vec<f64> = d.singular_values.iter().cloned().collect();
    for k in 0..sv.len() {
        if let Some(first) = v.column(k).iter().find(|z| z.norm() > 1e-12).cloned() {
            let rot = Complex64::from_polar(1.0, -first.arg());
            v.column_mut(k).iter_mut().for_each(|z| *z *= rot);
            u.column_mut(k).iter_mut().for_each(|z| *z *= rot);
        }
    }
    Ok(SubcarrierSvd { u, singular_values: sv, v })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdSet {
    pub per_subcarrier: Vec<SubcarrierSvd>,
}

pub fn svd_per_subcarrier(ch: &ChannelRealization) -> Result<SvdSet> {
    let per_subcarrier = ch
        .per_subcarrier
        .iter()
        .enumerate()
        .map(|(l, h)| svd(h).map_err(|e| Error::Numerical(format!("subcarrier {l}: {e}"))))
        .collect::<Result<_>>()?;
    Ok(SvdSet { per_subcarrier })
}

/// Ordered eigenvalues of H·H^H for one flat matrix.
pub fn ordered_eigenvalues(h: &CMatrix) -> Result<Vec<f64>> {
    Ok(svd(h)?.eigenvalues())
}

// ----------------------------------------------------------------------------
// E-SDM link

/// Antenna grids X^l = V_l[:, ..K]·x^l from K stream grids.
pub fn precode(streams: &[SymbolGrid], svd: &SvdSet, tx: usize) -> Result<Vec<SymbolGrid>> {
    let k = streams.len();
    let l = svd.per_subcarrier.len();
    if streams.iter().any(|g| g.len() != l) {
        return Err(Error::Shape("stream grid length differs from subcarrier count".into()));
    }
    let mut out = vec![SymbolGrid::zeros(l); tx];
    for (i, f) in svd.per_subcarrier.iter().enumerate() {
        if f.v.nrows() != tx || f.v.ncols() < k {
            return Err(Error::Shape(format!("precoder at subcarrier {i} cannot carry {k} streams on {tx} antennas")));
        }
        for m in 0..tx {
            out[m].symbols[i] = (0..k).map(|s| f.v[(m, s)] * streams[s].symbols[i]).sum();
        }
    }
    Ok(out)
}

/// U_l^H·(H^l·X^l + n^l) keeping the first K outputs. Noise is complex
/// Gaussian with per-component variance σ_n².
pub fn esdm_receive<R: Rng + ?Sized>(
    antenna_grids: &[SymbolGrid],
    ch: &ChannelRealization,
    svd: &SvdSet,
    streams: usize,
    sigma_n: f64,
    rng: &mut R,
) -> Result<Vec<SymbolGrid>> {
    if antenna_grids.len() != ch.tx {
        return Err(Error::Shape(format!("{} antenna grids for {} antennas", antenna_grids.len(), ch.tx)));
    }
    let l = ch.per_subcarrier.len();
    let mut out = vec![SymbolGrid::zeros(l); streams];
    for i in 0..l {
        let x = nalgebra::DVector::from_fn(ch.tx, |m, _| antenna_grids[m].symbols[i]);
        let mut y = &ch.per_subcarrier[i] * x;
        if sigma_n > 0.0 {
            y.iter_mut().for_each(|v| *v += cn(rng, 2.0 * sigma_n * sigma_n));
        }
        let z = svd.per_subcarrier[i].u.adjoint() * y;
        if z.len() < streams {
            return Err(Error::Shape("fewer eigen-channels than streams".into()));
        }
        for (s, g) in out.iter_mut().enumerate() {
            g.symbols[i] = z[s];
        }
    }
    Ok(out)
}

/// Precode, propagate, add noise and post-code: y_k^l = √λ_k^l·x_k^l + noise.
pub fn esdm_link(
    streams: &[SymbolGrid],
    ch: &ChannelRealization,
    svd: &SvdSet,
    sigma_n: f64,
    seed_value: u64,
) -> Result<Vec<SymbolGrid>> {
    let ant = precode(streams, svd, ch.tx)?;
    esdm_receive(&ant, ch, svd, streams.len(), sigma_n, &mut seed::rng(seed_value))
}
