//! Seeded Monte Carlo driver.
//!
//! A run is split into frames of `frame_symbols` symbols. Frame `f` draws its
//! data, channel and noise from streams derived from `(seed, domain, f)`, owns
//! one distortion tracker, and returns mergeable accumulators. Frames run in
//! parallel and are merged in index order, so results do not depend on the
//! thread count.

use num_complex::Complex64;
use papr_core::baselines::{adaptive_cf_body, compand_samples, repeated_cf_body, CfConfig, CompandConfig, LowpassFilter};
use papr_core::ber::{model_from_threshold, sigma_for_ebn0, DistortionModel};
use papr_core::metrics::{CcdfAccumulator, ComplexityCounter, EvmAccumulator, PsdAccumulator};
use papr_core::mimo::{esdm_receive, gen_channel_with, precode, svd_per_subcarrier, ChannelProfile, StreamConfig};
use papr_core::ofdm::{
    add_awgn_with, demap_hard, map_bits, random_bits, ComplexSignal, ConstellationSpec, OfdmConfig, OfdmEngine, SymbolGrid,
};
use papr_core::pc::{
    cancel_peaks, synthesize_kernel_with, DistortionTracker, PcKernel, StopReason, ThresholdSolution, ThresholdSolver, WindowParams,
};
use papr_core::seed::{self, domain};
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::LabError;

/// Everything derived once from a configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub ofdm: OfdmConfig,
    pub engine: OfdmEngine,
    /// Per-stream constellation.
    pub constellation: ConstellationSpec,
    pub kernel: PcKernel,
    pub threshold: ThresholdSolution,
    /// Mean power per transmit antenna, S_t/M.
    pub antenna_power: f64,
    pub streams: StreamConfig,
    pub profile: ChannelProfile,
    /// Distortion model for one stream at the operating threshold.
    pub model: DistortionModel,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, LabError> {
        Self::with_window(cfg, cfg.window())
    }

    pub fn with_window(cfg: &ExperimentConfig, win: WindowParams) -> Result<Self, LabError> {
        cfg.validate()?;
        let ofdm = cfg.ofdm_config();
        let engine = OfdmEngine::new(ofdm)?;
        let streams = if cfg.kind == ExperimentKind::BerEsdm {
            StreamConfig { tx: cfg.mimo.tx, rx: cfg.mimo.rx, streams: cfg.mimo.streams, total_power: ofdm.average_power }
        } else {
            StreamConfig { total_power: ofdm.average_power, ..StreamConfig::siso() }
        };
        streams.validate()?;
        let antenna_power = ofdm.average_power / streams.tx as f64;
        let stream_energy = ofdm.average_power / (streams.streams * ofdm.num_subcarriers) as f64;
        let constellation = ConstellationSpec::new(ofdm.modulation, stream_energy);
        let kernel = synthesize_kernel_with(&ofdm, win, cfg.pc.peak_energy_scale)?;
        let threshold = match cfg.pc.threshold_db {
            Some(db) => ThresholdSolution {
                amplitude: (antenna_power * 10f64.powf(db / 10.0)).sqrt(),
                power_db: db,
                saturated: false,
                iterations: 0,
            },
            None => ThresholdSolver { evaluator: cfg.pc.evaluator }.solve(
                10f64.powf(cfg.evm_db() / 10.0),
                &kernel,
                antenna_power,
            )?,
        };
        if threshold.saturated {
            return Err(LabError::Field {
                field: "budgets.evm_db".into(),
                message: "budget is loose enough that no threshold is needed".into(),
            });
        }
        let model = model_from_threshold(threshold.amplitude, antenna_power, &kernel, ofdm.num_subcarriers, ofdm.modulation)
            .for_streams(streams.tx, streams.streams, stream_energy)
            .with_mode(cfg.ber.model);
        let profile = ChannelProfile { taps: cfg.mimo.taps, decay_db: cfg.mimo.decay_db, tap_spacing: cfg.mimo.tap_spacing };
        Ok(Setup { cfg: cfg.clone(), ofdm, engine, constellation, kernel, threshold, antenna_power, streams, profile, model })
    }

    pub fn evm_budget(&self) -> f64 {
        10f64.powf(self.cfg.evm_db() / 10.0)
    }

    pub fn aclr_budget(&self) -> Option<f64> {
        self.cfg.budgets.aclr_db.map(|d| 10f64.powf(d / 10.0))
    }

    pub fn stream_energy(&self) -> f64 {
        self.ofdm.average_power / (self.streams.streams * self.ofdm.num_subcarriers) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    None,
    Proposed,
    RepeatedCf { iterations: usize, taps: usize },
    AdaptiveCf { iterations: usize, taps: usize },
    Companding,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Proposed => "proposed",
            Method::RepeatedCf { .. } => "repeated-cf",
            Method::AdaptiveCf { .. } => "adaptive-cf",
            Method::Companding => "companding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    None,
    Awgn,
    Fading,
    Esdm,
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub method: Method,
    pub link: Link,
    pub ebn0_db: Vec<f64>,
    /// Decision-level scale for the demapper.
    pub demap_mu: f64,
    pub symbols: usize,
    pub frame_symbols: usize,
    pub seed: u64,
}

impl RunSpec {
    pub fn from_setup(setup: &Setup, method: Method, link: Link) -> Self {
        let cfg = &setup.cfg;
        RunSpec {
            method,
            link,
            ebn0_db: if link == Link::None { vec![] } else { cfg.ber.ebn0_db.clone() },
            demap_mu: if method == Method::Proposed { setup.model.mu } else { 1.0 },
            symbols: cfg.trials.symbols,
            frame_symbols: cfg.trials.frame_symbols,
            seed: cfg.seed,
        }
    }
}

/// Shrink and residual of the per-subcarrier error X̃ − X.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorMoments {
    pub error_power: f64,
    pub cross: f64,
    pub reference_power: f64,
    pub count: u64,
}

impl ErrorMoments {
    pub fn add(&mut self, reference: &SymbolGrid, impaired: &SymbolGrid) {
        for (x, y) in reference.symbols.iter().zip(&impaired.symbols) {
            let e = y - x;
            self.error_power += e.norm_sqr();
            self.cross += (e * x.conj()).re;
            self.reference_power += x.norm_sqr();
            self.count += 1;
        }
    }

    pub fn merge(&mut self, o: &ErrorMoments) {
        self.error_power += o.error_power;
        self.cross += o.cross;
        self.reference_power += o.reference_power;
        self.count += o.count;
    }

    /// c with E[X̃] = (1 − c)·X.
    pub fn shrink(&self) -> f64 {
        -self.cross / self.reference_power
    }

    /// Per-axis variance of X̃ − (1 − c)X.
    pub fn residual_variance(&self) -> f64 {
        let c = self.shrink();
        (self.error_power + 2.0 * c * self.cross + c * c * self.reference_power) / (2.0 * self.count as f64)
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub ccdf: CcdfAccumulator,
    pub psd: Vec<PsdAccumulator>,
    pub evm: EvmAccumulator,
    pub moments: ErrorMoments,
    pub complexity: ComplexityCounter,
    pub stops: [u64; 4],
    /// Largest tracked estimates seen at the end of any symbol.
    pub tracked_evm_max: f64,
    pub tracked_aclr_max: f64,
    /// Tracked sums at the end of each frame (worst antenna for ACLR).
    pub tracked_evm_sum: f64,
    pub tracked_aclr_sum: f64,
    /// `errors[p][k]`: bit errors at Eb/N0 point p on stream k.
    pub errors: Vec<Vec<u64>>,
    /// Bits per stream (identical for every Eb/N0 point).
    pub bits: u64,
    pub symbols: u64,
}

impl SimOutput {
    fn new(setup: &Setup, spec: &RunSpec) -> Result<Self, LabError> {
        let c = &setup.cfg.ccdf;
        Ok(SimOutput {
            ccdf: CcdfAccumulator::uniform(c.lo_db, c.hi_db, c.step_db, setup.antenna_power)?,
            psd: (0..setup.streams.tx).map(|_| PsdAccumulator::new(setup.ofdm.fft_size)).collect(),
            evm: EvmAccumulator::default(),
            moments: ErrorMoments::default(),
            complexity: ComplexityCounter::default(),
            stops: [0; 4],
            tracked_evm_max: 0.0,
            tracked_aclr_max: 0.0,
            tracked_evm_sum: 0.0,
            tracked_aclr_sum: 0.0,
            errors: vec![vec![0; setup.streams.streams]; spec.ebn0_db.len()],
            bits: 0,
            symbols: 0,
        })
    }

    pub fn merge(&mut self, o: &SimOutput) {
        self.ccdf.merge(&o.ccdf);
        for (a, b) in self.psd.iter_mut().zip(&o.psd) {
            a.merge(b);
        }
        self.evm.merge(&o.evm);
        self.moments.merge(&o.moments);
        self.complexity.merge(&o.complexity);
        for (a, b) in self.stops.iter_mut().zip(&o.stops) {
            *a += b;
        }
        self.tracked_evm_max = self.tracked_evm_max.max(o.tracked_evm_max);
        self.tracked_aclr_max = self.tracked_aclr_max.max(o.tracked_aclr_max);
        self.tracked_evm_sum += o.tracked_evm_sum;
        self.tracked_aclr_sum += o.tracked_aclr_sum;
        for (a, b) in self.errors.iter_mut().zip(&o.errors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.bits += o.bits;
        self.symbols += o.symbols;
    }

    pub fn measured_evm(&self) -> f64 {
        self.evm.evm().unwrap_or(f64::NAN)
    }

    /// Worst ACLR over antennas, in dB.
    pub fn measured_aclr(&self, ofdm: &OfdmConfig) -> f64 {
        self.psd.iter().filter_map(|p| p.aclr(ofdm).ok()).map(|r| 10.0 * r.worst.log10()).fold(f64::NAN, f64::max)
    }

    /// Mean tracked ACLR per symbol, in dB.
    pub fn tracked_aclr_db(&self) -> f64 {
        10.0 * (self.tracked_aclr_sum / self.symbols.max(1) as f64).log10()
    }

    pub fn mults_per_symbol(&self) -> f64 {
        self.complexity.multiplications as f64 / self.symbols.max(1) as f64
    }

    pub fn ber(&self, point: usize, stream: usize) -> f64 {
        self.errors[point][stream] as f64 / self.bits.max(1) as f64
    }

    pub fn ber_average(&self, point: usize) -> f64 {
        let e: u64 = self.errors[point].iter().sum();
        e as f64 / (self.bits.max(1) * self.errors[point].len() as u64) as f64
    }

    pub fn stop_index(r: StopReason) -> usize {
        StopReason::ALL.iter().position(|&s| s == r).unwrap()
    }
}

struct MethodState {
    tracker: Option<DistortionTracker>,
    filter: Option<LowpassFilter>,
}

fn method_state(setup: &Setup, method: Method) -> Result<MethodState, LabError> {
    let tracker = if method == Method::Proposed {
        let aclr = setup.aclr_budget().unwrap_or(f64::INFINITY);
        Some(
            DistortionTracker::new(setup.evm_budget(), aclr, setup.streams.tx, setup.ofdm.average_power)?
                .with_scope(setup.cfg.pc.scope)
                .with_evm_mode(setup.cfg.pc.evm_mode),
        )
    } else {
        None
    };
    let filter = match method {
        Method::RepeatedCf { taps, .. } | Method::AdaptiveCf { taps, .. } => Some(LowpassFilter::new(&setup.ofdm, taps)?),
        _ => None,
    };
    Ok(MethodState { tracker, filter })
}

fn apply_method(
    setup: &Setup,
    method: Method,
    st: &mut MethodState,
    ants: &mut [ComplexSignal],
    out: &mut SimOutput,
) -> Result<(), LabError> {
    let a_th = setup.threshold.amplitude;
    match method {
        Method::None => {}
        Method::Proposed => {
            let tr = st.tracker.as_mut().expect("tracker for proposed method");
            let reports = cancel_peaks(ants, &setup.kernel, a_th, tr, setup.cfg.pc.max_iter)?;
            for r in &reports {
                out.stops[SimOutput::stop_index(r.stop)] += 1;
                out.complexity.add_report(r, &setup.kernel);
            }
            // budget safety holds by construction; verify it on every symbol
            let slack = 1.0 + 1e-12;
            if tr.evm() > tr.evm_budget * slack || tr.max_aclr() > tr.aclr_budget * slack {
                return Err(LabError::Core(papr_core::Error::Numerical(format!(
                    "tracked budget exceeded: evm {:.4e}, aclr {:.4e}",
                    tr.evm(),
                    tr.max_aclr()
                ))));
            }
            out.tracked_evm_max = out.tracked_evm_max.max(tr.evm());
            out.tracked_aclr_max = out.tracked_aclr_max.max(tr.max_aclr());
        }
        Method::RepeatedCf { iterations, taps } => {
            let cf = CfConfig { threshold: a_th, iterations, taps };
            let filter = st.filter.as_ref().expect("filter");
            for a in ants.iter_mut() {
                repeated_cf_body(a.body_mut(0), &cf, filter, &mut out.complexity);
                a.recopy_gi();
            }
        }
        Method::AdaptiveCf { iterations, .. } => {
            let filter = st.filter.as_ref().expect("filter");
            for a in ants.iter_mut() {
                adaptive_cf_body(a.body_mut(0), iterations, filter, &mut out.complexity);
                a.recopy_gi();
            }
        }
        Method::Companding => {
            // place the compander's knee v at the detection threshold
            let c: CompandConfig = setup.cfg.compand;
            let g_in = c.v / a_th;
            let g_out = a_th / c.v * (c.v / c.ceiling);
            for a in ants.iter_mut() {
                let scaled: Vec<Complex64> = a.samples.iter().map(|x| x * g_in).collect();
                a.samples = compand_samples(&scaled, &c).into_iter().map(|y| y * g_out).collect();
            }
        }
    }
    Ok(())
}

fn cn<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Complex64 {
    let mut z = [Complex64::new(0.0, 0.0)];
    add_awgn_with(&mut z, sigma, rng);
    z[0]
}

fn count_errors(bits: &[u8], rx: &[u8]) -> u64 {
    bits.iter().zip(rx).filter(|(a, b)| a != b).count() as u64
}

fn run_frame(setup: &Setup, spec: &RunSpec, frame: usize, n_sym: usize) -> Result<SimOutput, LabError> {
    let mut out = SimOutput::new(setup, spec)?;
    let mut st = method_state(setup, spec.method)?;
    let mut data_rng = seed::rng(seed::derive(spec.seed, domain::BITS, frame as u64));
    let mut chan_rng = seed::rng(seed::derive(spec.seed, domain::CHANNEL, frame as u64));
    let mut noise_rng = seed::rng(seed::derive(spec.seed, domain::NOISE, frame as u64));
    let mut planner = FftPlanner::new();
    let ofdm = &setup.ofdm;
    let (l, q) = (ofdm.num_subcarriers, ofdm.modulation.bits());
    let k_streams = setup.streams.streams;
    let m_ant = setup.streams.tx;
    let es = setup.stream_energy();
    let sigmas: Vec<f64> = spec.ebn0_db.iter().map(|&e| sigma_for_ebn0(es, q, e)).collect();
    let nf_sqrt = (ofdm.fft_size as f64).sqrt();

    for _ in 0..n_sym {
        let bits: Vec<Vec<u8>> = (0..k_streams).map(|_| random_bits(l * q, &mut data_rng)).collect();
        let grids: Vec<SymbolGrid> =
            bits.iter().map(|b| map_bits(b, &setup.constellation)).collect::<Result<_, _>>()?;
        let channel = match spec.link {
            Link::Fading | Link::Esdm => {
                Some(gen_channel_with(&setup.streams, ofdm, &setup.profile, &mut chan_rng)?)
            }
            _ => None,
        };
        let svd = match (&channel, spec.link) {
            (Some(ch), Link::Esdm) => Some(svd_per_subcarrier(ch)?),
            _ => None,
        };
        let ant_grids = match &svd {
            Some(s) => precode(&grids, s, m_ant)?,
            None => grids.clone(),
        };
        let mut ants: Vec<ComplexSignal> =
            ant_grids.iter().map(|g| setup.engine.modulate(g)).collect::<Result<_, _>>()?;

        apply_method(setup, spec.method, &mut st, &mut ants, &mut out)?;

        let mut rx_grids = Vec::with_capacity(m_ant);
        for (m, a) in ants.iter().enumerate() {
            out.ccdf.add_signal(a);
            out.psd[m].add_signal(a, &mut planner);
            let g = setup.engine.analyze_body(a.body(0))?;
            out.evm.add(&ant_grids[m], &g, setup.antenna_power / l as f64)?;
            if m_ant == 1 {
                out.moments.add(&ant_grids[m], &g);
            }
            rx_grids.push(g);
        }

        for (p, &sigma) in sigmas.iter().enumerate() {
            let decided: Vec<SymbolGrid> = match spec.link {
                Link::None => vec![],
                Link::Awgn => {
                    let mut body = ants[0].body(0).to_vec();
                    add_awgn_with(&mut body, sigma * nf_sqrt, &mut noise_rng);
                    vec![setup.engine.analyze_body(&body)?]
                }
                Link::Fading => {
                    let h = &channel.as_ref().unwrap().per_subcarrier;
                    let symbols = (0..l)
                        .map(|i| {
                            let hi = h[i][(0, 0)];
                            (hi * rx_grids[0].symbols[i] + cn(&mut noise_rng, sigma)) / hi
                        })
                        .collect();
                    vec![SymbolGrid { symbols }]
                }
                Link::Esdm => {
                    let (ch, s) = (channel.as_ref().unwrap(), svd.as_ref().unwrap());
                    let mut z = esdm_receive(&rx_grids, ch, s, k_streams, sigma, &mut noise_rng)?;
                    for (k, g) in z.iter_mut().enumerate() {
                        for (i, y) in g.symbols.iter_mut().enumerate() {
                            *y /= s.per_subcarrier[i].singular_values[k];
                        }
                    }
                    z
                }
            };
            for (k, g) in decided.iter().enumerate() {
                let rx = demap_hard(g, &setup.constellation, spec.demap_mu);
                out.errors[p][k] += count_errors(&bits[k], &rx);
            }
        }
        if !sigmas.is_empty() {
            out.bits += (l * q) as u64;
        }
        out.symbols += 1;
    }
    if let Some(tr) = &st.tracker {
        let n = tr.symbols() as f64;
        out.tracked_evm_sum = tr.evm() * n;
        out.tracked_aclr_sum = tr.max_aclr() * n;
    }
    Ok(out)
}

/// Run all frames, in parallel on the current rayon pool, merged in order.
pub fn simulate(setup: &Setup, spec: &RunSpec) -> Result<SimOutput, LabError> {
    let fs = spec.frame_symbols.max(1);
    let n_frames = spec.symbols.div_ceil(fs);
    let parts: Vec<Result<SimOutput, LabError>> = (0..n_frames)
        .into_par_iter()
        .map(|f| run_frame(setup, spec, f, fs.min(spec.symbols - f * fs)))
        .collect();
    let mut total = SimOutput::new(setup, spec)?;
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}
