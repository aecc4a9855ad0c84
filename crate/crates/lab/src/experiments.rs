//! Experiment presets: each turns a configuration into a result table and a
//! short text summary.

use papr_core::ber::{ber_awgn, ber_esdm, ber_flat_rayleigh, DistortionModel, EigenHistogram, EigenPdfSpec};
use papr_core::numeric::{bisect, lin_to_db};
use papr_core::ofdm::Modulation;
use papr_core::pc::WindowParams;

use crate::config::{default_evm_db, ExperimentConfig, ExperimentKind, MethodKind};
use crate::driver::{simulate, Link, Method, RunSpec, Setup, SimOutput};
use crate::error::LabError;
use crate::output::{fmt, fmt_bool, Table};

/// Probability at which PAPR is quoted.
pub const PAPR_PROBABILITY: f64 = 1e-4;
/// Bit errors below which a BER point is marked low-confidence.
pub const MIN_ERROR_EVENTS: u64 = 100;

#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub summary: Vec<String>,
}

/// Methods named in the config; C&F variants use the first iteration and
/// tap counts.
pub fn methods(cfg: &ExperimentConfig) -> Vec<Method> {
    let (iterations, taps) = (cfg.cf.iterations[0], cfg.cf.taps[0]);
    cfg.methods
        .iter()
        .map(|m| match m {
            MethodKind::None => Method::None,
            MethodKind::Proposed => Method::Proposed,
            MethodKind::RepeatedCf => Method::RepeatedCf { iterations, taps },
            MethodKind::AdaptiveCf => Method::AdaptiveCf { iterations, taps },
            MethodKind::Companding => Method::Companding,
        })
        .collect()
}

fn cf_params(m: Method) -> (Option<usize>, Option<usize>) {
    match m {
        Method::RepeatedCf { iterations, taps } | Method::AdaptiveCf { iterations, taps } => (Some(iterations), Some(taps)),
        _ => (None, None),
    }
}

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn db(v: f64) -> f64 {
    lin_to_db(v)
}

/// Dispatch on `cfg.kind` after enforcing trial minimums.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    cfg.validate()?;
    cfg.check_minimums()?;
    match cfg.kind {
        ExperimentKind::Threshold => run_threshold(cfg),
        ExperimentKind::Ccdf => run_ccdf(cfg),
        ExperimentKind::Psd => run_psd(cfg),
        ExperimentKind::BerAwgn | ExperimentKind::BerFading | ExperimentKind::BerEsdm => run_ber(cfg),
        ExperimentKind::WindowSweep => sweep_window(cfg).map(|(_, r)| r),
        ExperimentKind::Complexity => compare_complexity(cfg).map(|(_, r)| r),
    }
}

pub fn run_threshold(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let s = Setup::new(cfg)?;
    let k = &s.kernel;
    let mut t = Table::new(
        "threshold",
        &[
            "modulation", "evm_db", "threshold_db", "threshold_amplitude", "solver_iterations", "t1", "t2", "n_w", "e_i",
            "e_o", "alpha", "delta_p_in", "delta_p_out",
        ],
    );
    t.push(vec![
        s.ofdm.modulation.name().to_string(),
        fmt(cfg.evm_db()),
        fmt(s.threshold.power_db),
        fmt(s.threshold.amplitude),
        s.threshold.iterations.to_string(),
        fmt(k.window.map_or(f64::NAN, |w| w.t1)),
        fmt(k.window.map_or(f64::NAN, |w| w.t2)),
        k.support_len().to_string(),
        fmt(k.e_i),
        fmt(k.e_o),
        fmt(k.alpha),
        fmt(k.delta_p_in),
        fmt(k.delta_p_out),
    ]);
    let summary = vec![format!(
        "{} at EVM {} dB: threshold {:.3} dB above mean power (N_w = {}, alpha = {:.4})",
        s.ofdm.modulation.name(),
        cfg.evm_db(),
        s.threshold.power_db,
        k.support_len(),
        k.alpha
    )];
    Ok(Report { table: t, summary })
}

const CCDF_COLUMNS: &[&str] = &[
    "method", "abscissa_db", "probability", "samples", "papr_db", "evm_db", "aclr_db", "mults_per_symbol", "stop_below",
    "stop_evm", "stop_aclr", "stop_max_iter", "seed",
];

fn stop_cells(o: &SimOutput) -> Vec<String> {
    o.stops.iter().map(|s| s.to_string()).collect()
}

pub fn run_ccdf(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let s = Setup::new(cfg)?;
    let mut t = Table::new("ccdf", CCDF_COLUMNS);
    let mut summary = vec![format!("threshold {:.3} dB", s.threshold.power_db)];
    for m in methods(cfg) {
        let o = simulate(&s, &RunSpec::from_setup(&s, m, Link::None))?;
        let curve = o.ccdf.curve();
        let papr = curve.abscissa_at(PAPR_PROBABILITY).unwrap_or(f64::NAN);
        let (evm, aclr) = (db(o.measured_evm()), o.measured_aclr(&s.ofdm));
        summary.push(format!(
            "{:<12} PAPR@1e-4 {:>6.2} dB  P(>threshold+0.2 dB) {:.2e}  EVM {:>7.2} dB  ACLR {:>7.2} dB  mults/symbol {:.0}",
            m.name(),
            papr,
            curve.at(s.threshold.power_db + 0.2),
            evm,
            aclr,
            o.mults_per_symbol()
        ));
        for (x, p) in curve.abscissa_db.iter().zip(&curve.probability) {
            let mut row = vec![
                m.name().to_string(),
                fmt(*x),
                fmt(*p),
                curve.trials.to_string(),
                fmt(papr),
                fmt(evm),
                fmt(aclr),
                fmt(o.mults_per_symbol()),
            ];
            row.extend(stop_cells(&o));
            row.push(cfg.seed.to_string());
            t.push(row);
        }
    }
    Ok(Report { table: t, summary })
}

pub fn run_psd(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let s = Setup::new(cfg)?;
    let mut t = Table::new("psd", &["method", "subcarrier", "psd_db", "aclr_db", "seed"]);
    let mut summary = Vec::new();
    let nf = s.ofdm.fft_size as i64;
    for m in methods(cfg) {
        let o = simulate(&s, &RunSpec::from_setup(&s, m, Link::None))?;
        let psd = o.psd[0].psd();
        let aclr = o.measured_aclr(&s.ofdm);
        let peak = psd.iter().cloned().fold(0.0, f64::max);
        summary.push(format!("{:<12} ACLR {:>7.2} dB", m.name(), aclr));
        for l in (-nf / 2 + 1)..=(nf / 2) {
            let v = psd[l.rem_euclid(nf) as usize] / peak;
            t.push(vec![m.name().to_string(), l.to_string(), fmt(db(v)), fmt(aclr), cfg.seed.to_string()]);
        }
    }
    Ok(Report { table: t, summary })
}

/// Theoretical BER for `method` at per-axis noise `sigma`, where a model exists.
pub fn ber_theory(
    s: &Setup,
    method: Method,
    link: Link,
    sigma: f64,
    eigen: Option<&EigenPdfSpec>,
) -> Result<Option<(f64, Vec<f64>)>, LabError> {
    let model = match method {
        Method::Proposed => s.model,
        Method::None => DistortionModel::clean(s.ofdm.modulation, s.ofdm.num_subcarriers, s.stream_energy()),
        _ => return Ok(None),
    }
    .with_noise(sigma);
    Ok(Some(match link {
        Link::Awgn => (ber_awgn(&model), vec![]),
        Link::Fading => (ber_flat_rayleigh(&model)?, vec![]),
        Link::Esdm => {
            let r = ber_esdm(&model, eigen.expect("eigen densities for E-SDM"))?;
            (r.average, r.per_stream.to_vec())
        }
        Link::None => return Ok(None),
    }))
}

pub fn link_for(kind: ExperimentKind) -> Link {
    match kind {
        ExperimentKind::BerAwgn => Link::Awgn,
        ExperimentKind::BerFading => Link::Fading,
        ExperimentKind::BerEsdm => Link::Esdm,
        _ => Link::None,
    }
}

/// Empirical eigenvalue densities for the configured antenna pair.
pub fn eigen_spec(cfg: &ExperimentConfig) -> Result<EigenPdfSpec, LabError> {
    Ok(EigenPdfSpec::Empirical(EigenHistogram::sample(
        cfg.mimo.rx,
        cfg.mimo.tx,
        cfg.ber.eigen_draws,
        cfg.ber.eigen_bin_width,
        cfg.seed,
    )?))
}

pub fn run_ber(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let s = Setup::new(cfg)?;
    let link = link_for(cfg.kind);
    let eigen = if link == Link::Esdm { Some(eigen_spec(cfg)?) } else { None };
    let mut t = Table::new(
        cfg.kind.name(),
        &[
            "method", "ebn0_db", "stream", "ber_sim", "ber_theory", "bit_errors", "bits", "low_confidence", "evm_db", "seed",
        ],
    );
    let mut summary = vec![format!(
        "threshold {:.3} dB, model mu = {:.4}, sigma_e = {:.4e}",
        s.threshold.power_db, s.model.mu, s.model.sigma_e
    )];
    let q = s.ofdm.modulation.bits();
    for m in methods(cfg) {
        let spec = RunSpec::from_setup(&s, m, link);
        let o = simulate(&s, &spec)?;
        let evm = db(o.measured_evm());
        for (p, &e) in spec.ebn0_db.iter().enumerate() {
            let sigma = papr_core::ber::sigma_for_ebn0(s.stream_energy(), q, e);
            let theory = ber_theory(&s, m, link, sigma, eigen.as_ref())?;
            let k = o.errors[p].len();
            let mut push = |stream: String, sim: f64, th: f64, errs: u64, bits: u64| {
                t.push(vec![
                    m.name().to_string(),
                    fmt(e),
                    stream,
                    fmt(sim),
                    fmt(th),
                    errs.to_string(),
                    bits.to_string(),
                    fmt_bool(errs < MIN_ERROR_EVENTS),
                    fmt(evm),
                    cfg.seed.to_string(),
                ])
            };
            let total: u64 = o.errors[p].iter().sum();
            let th_avg = theory.as_ref().map(|t| t.0).unwrap_or(f64::NAN);
            push("all".into(), o.ber_average(p), th_avg, total, o.bits * k as u64);
            if k > 1 {
                for i in 0..k {
                    let th = theory.as_ref().and_then(|t| t.1.get(i).cloned()).unwrap_or(f64::NAN);
                    push((i + 1).to_string(), o.ber(p, i), th, o.errors[p][i], o.bits);
                }
            }
            if let Some(&last) = spec.ebn0_db.last() {
                if e == last {
                    summary.push(format!(
                        "{:<12} BER {:.3e} at {} dB (theory {:.3e}), EVM {:.2} dB",
                        m.name(),
                        o.ber_average(p),
                        e,
                        th_avg,
                        evm
                    ));
                }
            }
        }
    }
    Ok(Report { table: t, summary })
}

/// Eb/N0 where a sampled BER curve crosses `target`, interpolating
/// log10(BER) linearly in dB.
pub fn crossing_db(ebn0: &[f64], ber: &[f64], target: f64) -> Option<f64> {
    for i in 1..ebn0.len() {
        let (b0, b1) = (ber[i - 1], ber[i]);
        if b0 >= target && b1 <= target && b0 > 0.0 && b1 > 0.0 && b0 != b1 {
            let f = (b0.log10() - target.log10()) / (b0.log10() - b1.log10());
            return Some(ebn0[i - 1] + f * (ebn0[i] - ebn0[i - 1]));
        }
    }
    None
}

/// Eb/N0 where a decreasing BER function crosses `target` on [lo, hi].
pub fn theory_crossing_db<F: Fn(f64) -> f64>(f: F, target: f64, lo: f64, hi: f64) -> Option<f64> {
    let g = |e: f64| f(e).log10() - target.log10();
    if g(lo) < 0.0 || g(hi) > 0.0 {
        return None;
    }
    bisect(g, lo, hi, 1e-6, |_| false).ok().map(|(x, _)| x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub evm_target_db: f64,
    pub modulation: Modulation,
    pub t1: f64,
    pub t2: f64,
    pub n_w: usize,
    pub threshold_db: f64,
    pub aclr_db: f64,
    pub tracked_aclr_db: f64,
    pub evm_db: f64,
    pub mults_per_symbol: f64,
    pub selected: bool,
}

/// Modulation paired with an EVM target in the sweep.
pub fn modulation_for_evm(evm_db: f64, fallback: Modulation) -> Modulation {
    [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64]
        .into_iter()
        .find(|&m| default_evm_db(m) == evm_db)
        .unwrap_or(fallback)
}

/// For each EVM target and T2: solve the threshold, run PC without an ACLR
/// budget, and measure ACLR and complexity. The smallest T2 whose measured
/// and tracked ACLR both meet the target is marked selected; at that window
/// an ACLR budget equal to the target rarely stops cancellation.
pub fn sweep_window(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, Report), LabError> {
    let mut rows = Vec::new();
    for &evm in &cfg.sweep.evm_db {
        let mut c = cfg.clone();
        c.kind = ExperimentKind::WindowSweep;
        c.budgets.evm_db = Some(evm);
        c.budgets.aclr_db = None;
        c.ofdm.modulation = modulation_for_evm(evm, cfg.ofdm.modulation);
        let first = rows.len();
        for &t2 in &cfg.sweep.t2 {
            let win = WindowParams::new(cfg.sweep.t1_ratio * t2, t2)?;
            let s = Setup::with_window(&c, win)?;
            let o = simulate(&s, &RunSpec::from_setup(&s, Method::Proposed, Link::None))?;
            rows.push(SweepRow {
                evm_target_db: evm,
                modulation: c.ofdm.modulation,
                t1: win.t1,
                t2,
                n_w: s.kernel.support_len(),
                threshold_db: s.threshold.power_db,
                aclr_db: o.measured_aclr(&s.ofdm),
                tracked_aclr_db: o.tracked_aclr_db(),
                evm_db: db(o.measured_evm()),
                mults_per_symbol: o.mults_per_symbol(),
                selected: false,
            });
        }
        if let Some(r) = rows[first..]
            .iter_mut()
            .filter(|r| r.aclr_db <= cfg.sweep.aclr_target_db && r.tracked_aclr_db <= cfg.sweep.aclr_target_db)
            .min_by(|a, b| a.t2.total_cmp(&b.t2))
        {
            r.selected = true;
        }
    }
    let mut t = Table::new(
        "window-sweep",
        &[
            "evm_target_db", "modulation", "t1", "t2", "n_w", "threshold_db", "aclr_db", "tracked_aclr_db", "evm_db",
            "mults_per_symbol", "selected", "seed",
        ],
    );
    let mut summary = Vec::new();
    for r in &rows {
        t.push(vec![
            fmt(r.evm_target_db),
            r.modulation.name().to_string(),
            fmt(r.t1),
            fmt(r.t2),
            r.n_w.to_string(),
            fmt(r.threshold_db),
            fmt(r.aclr_db),
            fmt(r.tracked_aclr_db),
            fmt(r.evm_db),
            fmt(r.mults_per_symbol),
            fmt_bool(r.selected),
            cfg.seed.to_string(),
        ]);
        if r.selected {
            summary.push(format!(
                "EVM {} dB: selected T2 = {:.5}T (ACLR {:.2} dB, {:.0} mults/symbol)",
                r.evm_target_db, r.t2, r.aclr_db, r.mults_per_symbol
            ));
        }
    }
    for &evm in &cfg.sweep.evm_db {
        if !rows.iter().any(|r| r.evm_target_db == evm && r.selected) {
            summary.push(format!("EVM {evm} dB: no swept T2 meets ACLR {} dB", cfg.sweep.aclr_target_db));
        }
    }
    Ok((rows, Report { table: t, summary }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub method: Method,
    pub papr_db: f64,
    pub mults_per_symbol: f64,
    pub evm_db: f64,
    pub aclr_db: f64,
    pub evm_ok: bool,
    pub aclr_ok: bool,
    pub stops: [u64; 4],
}

/// Every configured method at the common threshold; C&F variants expand over
/// all configured tap and iteration counts. Flags compare measured EVM and
/// ACLR with the budgets.
pub fn compare_complexity(cfg: &ExperimentConfig) -> Result<(Vec<ComplexityRow>, Report), LabError> {
    let s = Setup::new(cfg)?;
    let mut runs = Vec::new();
    for &k in &cfg.methods {
        match k {
            MethodKind::RepeatedCf | MethodKind::AdaptiveCf => {
                for &taps in &cfg.cf.taps {
                    for &iterations in &cfg.cf.iterations {
                        runs.push(if k == MethodKind::RepeatedCf {
                            Method::RepeatedCf { iterations, taps }
                        } else {
                            Method::AdaptiveCf { iterations, taps }
                        });
                    }
                }
            }
            MethodKind::None => runs.push(Method::None),
            MethodKind::Proposed => runs.push(Method::Proposed),
            MethodKind::Companding => runs.push(Method::Companding),
        }
    }
    let evm_budget = cfg.evm_db();
    let aclr_budget = cfg.budgets.aclr_db.unwrap_or(f64::INFINITY);
    let mut rows = Vec::new();
    for m in runs {
        let o = simulate(&s, &RunSpec::from_setup(&s, m, Link::None))?;
        let (evm, aclr) = (db(o.measured_evm()), o.measured_aclr(&s.ofdm));
        rows.push(ComplexityRow {
            method: m,
            papr_db: o.ccdf.curve().abscissa_at(PAPR_PROBABILITY).unwrap_or(f64::NAN),
            mults_per_symbol: o.mults_per_symbol(),
            evm_db: evm,
            aclr_db: aclr,
            // an undistorted signal has no measurable EVM
            evm_ok: evm.is_nan() || evm <= evm_budget,
            aclr_ok: aclr <= aclr_budget,
            stops: o.stops,
        });
    }
    let mut t = Table::new(
        "complexity",
        &[
            "method", "n_it", "n_tap", "papr_db", "mults_per_symbol", "evm_db", "aclr_db", "evm_ok", "aclr_ok", "stop_below",
            "stop_evm", "stop_aclr", "stop_max_iter", "seed",
        ],
    );
    let mut summary = vec![format!("threshold {:.3} dB", s.threshold.power_db)];
    for r in &rows {
        let (it, taps) = cf_params(r.method);
        let mut row = vec![
            r.method.name().to_string(),
            opt(it),
            opt(taps),
            fmt(r.papr_db),
            fmt(r.mults_per_symbol),
            fmt(r.evm_db),
            fmt(r.aclr_db),
            fmt_bool(r.evm_ok),
            fmt_bool(r.aclr_ok),
        ];
        row.extend(r.stops.iter().map(|v| v.to_string()));
        row.push(cfg.seed.to_string());
        t.push(row);
        summary.push(format!(
            "{:<12} n_it {:>3} n_tap {:>4}  PAPR {:>6.2} dB  mults {:>9.0}  EVM ok {}  ACLR ok {}",
            r.method.name(),
            opt(it),
            opt(taps),
            r.papr_db,
            r.mults_per_symbol,
            r.evm_ok,
            r.aclr_ok
        ));
    }
    Ok((rows, Report { table: t, summary }))
}
