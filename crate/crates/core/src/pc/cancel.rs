use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{estimate_increments, DistortionTracker, PcKernel};
use crate::error::{Error, Result};
use crate::ofdm::ComplexSignal;

pub const DEFAULT_MAX_ITER: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEvent {
    pub antenna: usize,
    pub iteration: usize,
    /// Sample index t0 within the symbol body.
    pub index: usize,
    /// A_p = |x(t0)| − A_th.
    pub excess: f64,
    /// θ0 = arg x(t0).
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    AllBelowThreshold,
    BudgetEvm,
    BudgetAclr,
    MaxIterations,
}

impl StopReason {
    pub const ALL: [StopReason; 4] =
        [StopReason::AllBelowThreshold, StopReason::BudgetEvm, StopReason::BudgetAclr, StopReason::MaxIterations];

    pub fn name(self) -> &'static str {
        match self {
            StopReason::AllBelowThreshold => "below",
            StopReason::BudgetEvm => "evm",
            StopReason::BudgetAclr => "aclr",
            StopReason::MaxIterations => "max-iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcReport {
    /// Kernel additions N_pc, summed over antennas.
    pub additions: usize,
    pub iterations: usize,
    pub stop: StopReason,
    pub evm_estimate: f64,
    pub aclr_estimate: f64,
    pub multiplications: u64,
}

/// Global maximum of |x| if it exceeds `a_th`; ties go to the smallest index.
pub fn detect_peak(body: &[Complex64], a_th: f64) -> Option<PeakEvent> {
    let mut best = 0usize;
    let mut best_p = f64::NEG_INFINITY;
    for (s, x) in body.iter().enumerate() {
        let p = x.norm_sqr();
        if p > best_p {
            best_p = p;
            best = s;
        }
    }
    let mag = best_p.sqrt();
    (mag > a_th).then(|| PeakEvent {
        antenna: 0,
        iteration: 0,
        index: best,
        excess: mag - a_th,
        phase: body[best].arg(),
    })
}

/// Subtract A_p·e^{jθ0}·g′(t − t0), wrapping circularly within the body.
fn apply(body: &mut [Complex64], k: &PcKernel, ev: &PeakEvent) {
    let nf = body.len() as i64;
    let scale = Complex64::from_polar(ev.excess, ev.phase);
    for (off, g) in k.taps() {
        let s = (ev.index as i64 + off).rem_euclid(nf) as usize;
        body[s] -= scale * g;
    }
}

/// Cancel peaks on one symbol, given its per-antenna bodies. The tracker
/// must already have the symbol opened.
pub fn cancel_symbol(
    bodies: &mut [&mut [Complex64]],
    k: &PcKernel,
    a_th: f64,
    tr: &mut DistortionTracker,
    max_iter: usize,
) -> Result<PcReport> {
    if bodies.len() != tr.antennas {
        return Err(Error::Config(format!(
            "{} antenna signals for a tracker of {}",
            bodies.len(),
            tr.antennas
        )));
    }
    if bodies.iter().any(|b| b.len() != k.fft_size) {
        return Err(Error::Config("kernel grid differs from signal grid".into()));
    }
    if !(a_th > 0.0) {
        return Err(Error::Config(format!("threshold {a_th} must be positive")));
    }
    let mut additions = 0;
    let mut iterations = 0;
    let stop = loop {
        if iterations >= max_iter {
            break StopReason::MaxIterations;
        }
        let events: Vec<Option<PeakEvent>> = bodies
            .iter()
            .enumerate()
            .map(|(m, b)| {
                detect_peak(b, a_th).map(|e| PeakEvent { antenna: m, iteration: iterations, ..e })
            })
            .collect();
        if events.iter().all(Option::is_none) {
            break StopReason::AllBelowThreshold;
        }
        let inc = estimate_increments(&events, k, tr);
        if !tr.evm_admits(&inc) {
            break StopReason::BudgetEvm;
        }
        if !tr.aclr_admits(&inc) {
            break StopReason::BudgetAclr;
        }
        for ev in events.iter().flatten() {
            apply(bodies[ev.antenna], k, ev);
            additions += 1;
        }
        tr.commit(&inc);
        iterations += 1;
    };
    Ok(PcReport {
        additions,
        iterations,
        stop,
        evm_estimate: tr.evm(),
        aclr_estimate: tr.max_aclr(),
        multiplications: (additions * k.support_len()) as u64,
    })
}

/// Cancel peaks symbol by symbol on per-antenna signals, opening one tracker
/// symbol each, and re-copy the guard intervals. Returns one report per symbol.
pub fn cancel_peaks(
    signals: &mut [ComplexSignal],
    k: &PcKernel,
    a_th: f64,
    tr: &mut DistortionTracker,
    max_iter: usize,
) -> Result<Vec<PcReport>> {
    let first = signals.first().ok_or_else(|| Error::Config("no antenna signals".into()))?;
    let (n_sym, nf) = (first.num_symbols(), first.fft_size);
    if signals.iter().any(|s| s.num_symbols() != n_sym || s.fft_size != nf || s.gi_length != first.gi_length) {
        return Err(Error::Config("antenna signals do not share one grid".into()));
    }
    if nf != k.fft_size {
        return Err(Error::Config("kernel grid differs from signal grid".into()));
    }
    let mut reports = Vec::with_capacity(n_sym);
    for sym in 0..n_sym {
        tr.begin_symbol();
        let mut bodies: Vec<&mut [Complex64]> = signals.iter_mut().map(|s| s.body_mut(sym)).collect();
        reports.push(cancel_symbol(&mut bodies, k, a_th, tr, max_iter)?);
    }
    signals.iter_mut().for_each(ComplexSignal::recopy_gi);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::OfdmConfig;
    use crate::pc::{synthesize_kernel, WindowParams};

    #[test]
    fn detect_ties_pick_first() {
        let mut b = vec![Complex64::new(0.1, 0.0); 8];
        b[3] = Complex64::new(0.0, 2.0);
        b[6] = Complex64::new(-2.0, 0.0);
        let e = detect_peak(&b, 1.0).unwrap();
        assert_eq!(e.index, 3);
        assert!((e.excess - 1.0).abs() < 1e-15);
        assert!(detect_peak(&b, 2.0).is_none());
    }

    #[test]
    fn single_addition_lands_on_threshold() {
        let cfg = OfdmConfig::default();
        let k = synthesize_kernel(&cfg, WindowParams::default()).unwrap();
        let mut sig = ComplexSignal::zeros(&cfg, 1);
        sig.body_mut(0)[500] = Complex64::from_polar(3.0, 0.7);
        let mut tr = DistortionTracker::new(1.0, 1.0, 1, 1.0).unwrap();
        let r = cancel_peaks(std::slice::from_mut(&mut sig), &k, 1.0, &mut tr, 1).unwrap();
        assert_eq!(r[0].additions, 1);
        assert!((sig.body(0)[500].norm() - 1.0).abs() < 1e-10);
        // circular wrap reaches the start of the body and the GI is refreshed
        assert!(sig.body(0)[100].norm() > 0.0);
        assert_eq!(&sig.samples[..64], &sig.body(0)[448..]);
    }

    #[test]
    fn grid_mismatch_is_config_error() {
        let cfg = OfdmConfig::default();
        let k = synthesize_kernel(&cfg, WindowParams::default()).unwrap();
        let small = OfdmConfig { fft_size: 256, gi_length: 32, ..cfg };
        let mut sig = ComplexSignal::zeros(&small, 1);
        let mut tr = DistortionTracker::new(1.0, 1.0, 1, 1.0).unwrap();
        assert!(matches!(cancel_peaks(std::slice::from_mut(&mut sig), &k, 1.0, &mut tr, 4), Err(Error::Config(_))));
    }
}
