//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use papr_core::baselines::CompandConfig;
use papr_core::ber::ModelMode;
use papr_core::ofdm::{Modulation, OfdmConfig};
use papr_core::pc::{BudgetScope, DistortionEvaluator, EvmSumMode, WindowParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Ccdf,
    BerAwgn,
    BerFading,
    BerEsdm,
    Threshold,
    WindowSweep,
    Complexity,
    Psd,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Ccdf => "ccdf",
            ExperimentKind::BerAwgn => "ber-awgn",
            ExperimentKind::BerFading => "ber-fading",
            ExperimentKind::BerEsdm => "ber-esdm",
            ExperimentKind::Threshold => "threshold",
            ExperimentKind::WindowSweep => "window-sweep",
            ExperimentKind::Complexity => "complexity",
            ExperimentKind::Psd => "psd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    None,
    Proposed,
    RepeatedCf,
    AdaptiveCf,
    Companding,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::None => "none",
            MethodKind::Proposed => "proposed",
            MethodKind::RepeatedCf => "repeated-cf",
            MethodKind::AdaptiveCf => "adaptive-cf",
            MethodKind::Companding => "companding",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfdmSection {
    pub num_subcarriers: usize,
    pub fft_size: usize,
    pub gi_length: usize,
    pub modulation: Modulation,
    pub average_power: f64,
}

impl Default for OfdmSection {
    fn default() -> Self {
        let d = OfdmConfig::default();
        OfdmSection {
            num_subcarriers: d.num_subcarriers,
            fft_size: d.fft_size,
            gi_length: d.gi_length,
            modulation: d.modulation,
            average_power: d.average_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcSection {
    pub t1: f64,
    pub t2: f64,
    pub max_iter: usize,
    pub peak_energy_scale: f64,
    pub scope: BudgetScope,
    pub evm_mode: EvmSumMode,
    pub evaluator: DistortionEvaluator,
    /// Overrides the solved threshold, in dB relative to per-antenna power.
    pub threshold_db: Option<f64>,
}

impl Default for PcSection {
    fn default() -> Self {
        let w = WindowParams::default();
        PcSection {
            t1: w.t1,
            t2: w.t2,
            max_iter: papr_core::pc::DEFAULT_MAX_ITER,
            peak_energy_scale: papr_core::pc::DEFAULT_PEAK_ENERGY_SCALE,
            scope: BudgetScope::default(),
            evm_mode: EvmSumMode::default(),
            evaluator: DistortionEvaluator::default(),
            threshold_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSection {
    /// EVM budget in dB; defaults to −20/−25/−30 dB for QPSK/16QAM/64QAM.
    pub evm_db: Option<f64>,
    /// ACLR budget in dB; absent means unconstrained.
    pub aclr_db: Option<f64>,
}

impl Default for BudgetSection {
    fn default() -> Self {
        BudgetSection { evm_db: None, aclr_db: Some(-50.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfSection {
    pub iterations: Vec<usize>,
    pub taps: Vec<usize>,
}

impl Default for CfSection {
    fn default() -> Self {
        CfSection { iterations: vec![9], taps: vec![papr_core::baselines::DEFAULT_FILTER_TAPS] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialSection {
    pub symbols: usize,
    /// Symbols sharing one tracker and one random stream.
    pub frame_symbols: usize,
    /// Refuse runs below the statistical minimums. Disable only for smoke tests.
    pub enforce_minimums: bool,
}

impl Default for TrialSection {
    fn default() -> Self {
        TrialSection { symbols: 2000, frame_symbols: 1000, enforce_minimums: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BerSection {
    pub ebn0_db: Vec<f64>,
    /// Lowest BER the run must resolve with 100 errors.
    pub min_ber: f64,
    pub model: ModelMode,
    pub eigen_draws: usize,
    pub eigen_bin_width: f64,
}

impl Default for BerSection {
    fn default() -> Self {
        BerSection {
            ebn0_db: (0..=12).map(|x| x as f64).collect(),
            min_ber: 1e-3,
            model: ModelMode::default(),
            eigen_draws: 100_000,
            eigen_bin_width: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MimoSection {
    pub tx: usize,
    pub rx: usize,
    pub streams: usize,
    pub taps: usize,
    pub decay_db: f64,
    pub tap_spacing: usize,
}

impl Default for MimoSection {
    fn default() -> Self {
        MimoSection { tx: 4, rx: 2, streams: 2, taps: 6, decay_db: 1.0, tap_spacing: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub t2: Vec<f64>,
    /// T1 = ratio·T2.
    pub t1_ratio: f64,
    pub evm_db: Vec<f64>,
    pub aclr_target_db: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            t2: (2..=16).chain([18, 20]).map(|k| k as f64 / 64.0).collect(),
            t1_ratio: 0.5,
            evm_db: vec![-20.0, -25.0, -30.0],
            aclr_target_db: -50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CcdfSection {
    pub lo_db: f64,
    pub hi_db: f64,
    pub step_db: f64,
}

impl Default for CcdfSection {
    fn default() -> Self {
        CcdfSection { lo_db: 0.0, hi_db: 13.0, step_db: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub methods: Vec<MethodKind>,
    pub ofdm: OfdmSection,
    pub pc: PcSection,
    pub budgets: BudgetSection,
    pub cf: CfSection,
    pub compand: CompandConfig,
    pub trials: TrialSection,
    pub ber: BerSection,
    pub mimo: MimoSection,
    pub sweep: SweepSection,
    pub ccdf: CcdfSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Ccdf,
            seed: 1,
            output: None,
            methods: vec![MethodKind::None, MethodKind::Proposed],
            ofdm: OfdmSection::default(),
            pc: PcSection::default(),
            budgets: BudgetSection::default(),
            cf: CfSection::default(),
            compand: CompandConfig::default(),
            trials: TrialSection::default(),
            ber: BerSection::default(),
            mimo: MimoSection::default(),
            sweep: SweepSection::default(),
            ccdf: CcdfSection::default(),
        }
    }
}

fn field(name: &str, msg: impl Into<String>) -> LabError {
    LabError::Field { field: name.to_string(), message: msg.into() }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn ofdm_config(&self) -> OfdmConfig {
        OfdmConfig {
            num_subcarriers: self.ofdm.num_subcarriers,
            fft_size: self.ofdm.fft_size,
            gi_length: self.ofdm.gi_length,
            modulation: self.ofdm.modulation,
            average_power: self.ofdm.average_power,
        }
    }

    pub fn window(&self) -> WindowParams {
        WindowParams { t1: self.pc.t1, t2: self.pc.t2 }
    }

    pub fn evm_db(&self) -> f64 {
        self.budgets.evm_db.unwrap_or_else(|| default_evm_db(self.ofdm.modulation))
    }

    /// Antennas carrying PC: M for E-SDM, one otherwise.
    pub fn antennas(&self) -> usize {
        if self.kind == ExperimentKind::BerEsdm {
            self.mimo.tx
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        self.ofdm_config().validate().map_err(|e| field("ofdm", e.to_string()))?;
        self.window().validate().map_err(|e| field("pc.t1/pc.t2", e.to_string()))?;
        if self.pc.max_iter == 0 {
            return Err(field("pc.max_iter", "must be at least 1"));
        }
        if !(self.pc.peak_energy_scale > 0.0) {
            return Err(field("pc.peak_energy_scale", "must be positive"));
        }
        if let Some(e) = self.budgets.evm_db {
            if !(e < 0.0) {
                return Err(field("budgets.evm_db", "must be negative dB"));
            }
        }
        if let Some(a) = self.budgets.aclr_db {
            if !(a < 0.0) {
                return Err(field("budgets.aclr_db", "must be negative dB"));
            }
        }
        if self.methods.is_empty() && !matches!(self.kind, ExperimentKind::Threshold | ExperimentKind::WindowSweep) {
            return Err(field("methods", "list at least one method"));
        }
        if self.cf.iterations.is_empty() || self.cf.iterations.contains(&0) {
            return Err(field("cf.iterations", "need one or more positive counts"));
        }
        if self.cf.taps.is_empty() || self.cf.taps.iter().any(|t| t % 2 == 0 || *t > self.ofdm.fft_size) {
            return Err(field("cf.taps", "filter lengths must be odd and at most fft_size"));
        }
        self.compand.validate().map_err(|e| field("compand", e.to_string()))?;
        if self.trials.symbols == 0 || self.trials.frame_symbols == 0 {
            return Err(field("trials", "symbols and frame_symbols must be positive"));
        }
        if matches!(self.kind, ExperimentKind::BerAwgn | ExperimentKind::BerFading | ExperimentKind::BerEsdm) {
            if self.ber.ebn0_db.is_empty() {
                return Err(field("ber.ebn0_db", "empty grid"));
            }
            if !(self.ber.min_ber > 0.0 && self.ber.min_ber < 0.5) {
                return Err(field("ber.min_ber", "must lie in (0, 0.5)"));
            }
        }
        if self.kind == ExperimentKind::BerEsdm {
            let m = &self.mimo;
            if m.streams != 2 || m.tx < 2 || m.rx < 2 {
                return Err(field("mimo", "E-SDM theory covers two streams on at least 2x2"));
            }
            if !(self.ber.eigen_draws > 0 && self.ber.eigen_bin_width > 0.0) {
                return Err(field("ber.eigen_draws", "need draws and a positive bin width"));
            }
        }
        if matches!(self.kind, ExperimentKind::BerFading | ExperimentKind::BerEsdm) {
            let m = &self.mimo;
            if m.taps == 0 || !(m.decay_db >= 0.0) {
                return Err(field("mimo.taps/decay_db", "need taps > 0 and decay >= 0"));
            }
            if m.taps.saturating_sub(1) * m.tap_spacing > self.ofdm.gi_length {
                return Err(field("mimo.tap_spacing", "delay spread exceeds the guard interval"));
            }
        }
        if self.kind == ExperimentKind::WindowSweep {
            if self.sweep.t2.is_empty() || self.sweep.evm_db.is_empty() {
                return Err(field("sweep", "need T2 values and EVM targets"));
            }
            if !(self.sweep.t1_ratio > 0.0 && self.sweep.t1_ratio <= 1.0) {
                return Err(field("sweep.t1_ratio", "must lie in (0, 1]"));
            }
            for &t2 in &self.sweep.t2 {
                WindowParams::new(self.sweep.t1_ratio * t2, t2).map_err(|e| field("sweep.t2", e.to_string()))?;
            }
        }
        if !(self.ccdf.step_db > 0.0 && self.ccdf.hi_db > self.ccdf.lo_db) {
            return Err(field("ccdf", "need lo_db < hi_db and positive step"));
        }
        Ok(())
    }

    /// Check the statistical minimums, returning what is required if unmet.
    pub fn check_minimums(&self) -> Result<(), LabError> {
        if !self.trials.enforce_minimums {
            return Ok(());
        }
        let n = self.trials.symbols as u64;
        let samples = n * (self.ofdm.fft_size * self.antennas()) as u64;
        match self.kind {
            ExperimentKind::Ccdf | ExperimentKind::Complexity => {
                let need = papr_core::metrics::MIN_CCDF_SAMPLES;
                if samples < need {
                    let per = (self.ofdm.fft_size * self.antennas()) as u64;
                    return Err(LabError::Minimum(format!(
                        "CCDF at 1e-4 needs {need} samples: set trials.symbols >= {} (have {n})",
                        need.div_ceil(per)
                    )));
                }
            }
            ExperimentKind::Psd | ExperimentKind::WindowSweep => {
                let need = papr_core::metrics::MIN_ACLR_SYMBOLS;
                if n < need {
                    return Err(LabError::Minimum(format!("spectral averaging needs trials.symbols >= {need} (have {n})")));
                }
            }
            ExperimentKind::BerAwgn | ExperimentKind::BerFading | ExperimentKind::BerEsdm => {
                let bits = n * (self.ofdm.num_subcarriers * self.ofdm.modulation.bits() * self.mimo_streams()) as u64;
                let need = (100.0 / self.ber.min_ber).ceil() as u64;
                if bits < need {
                    let per = (self.ofdm.num_subcarriers * self.ofdm.modulation.bits() * self.mimo_streams()) as u64;
                    return Err(LabError::Minimum(format!(
                        "100 errors at BER {:e} need {need} bits per point: set trials.symbols >= {} (have {n})",
                        self.ber.min_ber,
                        need.div_ceil(per)
                    )));
                }
            }
            ExperimentKind::Threshold => {}
        }
        Ok(())
    }

    pub fn mimo_streams(&self) -> usize {
        if self.kind == ExperimentKind::BerEsdm {
            self.mimo.streams
        } else {
            1
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", self.kind.name())))
    }
}

pub fn default_evm_db(m: Modulation) -> f64 {
    match m {
        Modulation::Qpsk => -20.0,
        Modulation::Qam16 => -25.0,
        Modulation::Qam64 => -30.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn unknown_field_is_reported() {
        let e = ExperimentConfig::from_toml("kind = \"ccdf\"\n[pc]\nt3 = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("t3"), "{e}");
    }

    #[test]
    fn field_level_diagnostics() {
        let e = ExperimentConfig::from_toml("[pc]\nt1 = 0.3\nt2 = 0.2\n").unwrap_err();
        assert!(e.to_string().contains("pc.t1/pc.t2"), "{e}");
        let e = ExperimentConfig::from_toml("[cf]\ntaps = [64]\n").unwrap_err();
        assert!(e.to_string().contains("cf.taps"), "{e}");
    }

    #[test]
    fn minimums_are_enforced() {
        let c = ExperimentConfig::from_toml("kind = \"ccdf\"\n[trials]\nsymbols = 10\n").unwrap();
        let e = c.check_minimums().unwrap_err();
        assert!(e.to_string().contains("1954"), "{e}");
    }
}
