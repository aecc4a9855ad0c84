use num_complex::Complex64;
use papr_core::ofdm::{map_bits, random_bits, ComplexSignal, ConstellationSpec, OfdmConfig, OfdmEngine, SymbolGrid};
use papr_core::pc::{
    cancel_peaks, cancel_symbol, detect_peak, estimate_increments, synthesize_kernel, DistortionTracker, EvmSumMode,
    PeakEvent, StopReason, WindowParams,
};
use papr_core::seed;
use proptest::prelude::*;

fn signal(symbols: usize, seed_value: u64) -> (OfdmConfig, ComplexSignal) {
    let cfg = OfdmConfig::default();
    let spec = ConstellationSpec::for_config(&cfg);
    let mut rng = seed::rng(seed_value);
    let grids: Vec<SymbolGrid> = (0..symbols)
        .map(|_| map_bits(&random_bits(cfg.num_subcarriers * spec.bits(), &mut rng), &spec).unwrap())
        .collect();
    let sig = OfdmEngine::new(cfg).unwrap().modulate_many(&grids).unwrap();
    (cfg, sig)
}

fn event(antenna: usize, excess: f64) -> Option<PeakEvent> {
    Some(PeakEvent { antenna, iteration: 0, index: 0, excess, phase: 0.0 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn detect_matches_brute_force(
        v in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..64),
        th in 0.0f64..2.5,
    ) {
        let x: Vec<Complex64> = v.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let max = x.iter().map(|z| z.norm_sqr()).fold(f64::NEG_INFINITY, f64::max);
        let first = x.iter().position(|z| z.norm_sqr() == max).unwrap();
        match detect_peak(&x, th) {
            Some(e) => {
                prop_assert_eq!(e.index, first);
                prop_assert!(max.sqrt() > th);
                prop_assert!((e.excess - (max.sqrt() - th)).abs() < 1e-15);
                prop_assert!((e.phase - x[first].arg()).abs() < 1e-15);
            }
            None => prop_assert!(max.sqrt() <= th),
        }
    }

    #[test]
    fn increments_scale_with_squared_excess(a in 0.01f64..3.0, b in 0.01f64..3.0, m in 1usize..5) {
        let cfg = OfdmConfig::default();
        let k = synthesize_kernel(&cfg, WindowParams::default()).unwrap();
        let tr = DistortionTracker::new(0.01, 1e-5, m, 1.0).unwrap();
        let mut events = vec![None; m];
        events[0] = event(0, a);
        events[m - 1] = event(m - 1, b);
        let inc = estimate_increments(&events, &k, &tr);
        let sum = if m == 1 { b * b } else { a * a + b * b };
        prop_assert!((inc.evm - k.delta_p_in * sum).abs() < 1e-15 * inc.evm.max(1.0));
        prop_assert!((inc.aclr[m - 1] - m as f64 * k.delta_p_out * b * b).abs() < 1e-18);
        let div = tr.clone().with_evm_mode(EvmSumMode::DivideByAntennas);
        prop_assert!((estimate_increments(&events, &k, &div).evm * m as f64 - inc.evm).abs() < 1e-15);
    }

    #[test]
    fn tracker_estimates_never_decrease_within_a_symbol(
        steps in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..40),
    ) {
        let mut tr = DistortionTracker::new(1.0, 1.0, 2, 1.0).unwrap();
        tr.begin_symbol();
        let cfg = OfdmConfig::default();
        let k = synthesize_kernel(&cfg, WindowParams::default()).unwrap();
        let (mut e, mut a0, mut a1) = (0.0, 0.0, 0.0);
        for (x, y) in steps {
            let inc = estimate_increments(&[event(0, x), event(1, y)], &k, &tr);
            tr.commit(&inc);
            prop_assert!(tr.evm() >= e && tr.aclr(0) >= a0 && tr.aclr(1) >= a1);
            (e, a0, a1) = (tr.evm(), tr.aclr(0), tr.aclr(1));
        }
    }

    #[test]
    fn cancellation_respects_budgets(s in any::<u64>(), evm_db in -35.0f64..-15.0, aclr_db in -70.0f64..-40.0) {
        let (cfg, mut sig) = signal(8, s);
        let k = synthesize_kernel(&cfg, WindowParams::default()).unwrap();
        let (evm, aclr) = (10f64.powf(evm_db / 10.0), 10f64.powf(aclr_db / 10.0));
        let mut tr = DistortionTracker::new(evm, aclr, 1, 1.0).unwrap();
        let a_th = 1.8;
        let reports = cancel_peaks(std::slice::from_mut(&mut sig), &k, a_th, &mut tr, 32).unwrap();
        prop_assert!(tr.evm() <= evm * (1.0 + 1e-12));
        prop_assert!(tr.max_aclr() <= aclr * (1.0 + 1e-12));
        for (i, r) in reports.iter().enumerate() {
            if r.stop == StopReason::AllBelowThreshold {
                prop_assert!(sig.body(i).iter().all(|x| x.norm() <= a_th * (1.0 + 1e-12)));
            }
            prop_assert_eq!(r.multiplications, (r.additions * k.support_len()) as u64);
        }
        let g = cfg.gi_length;
        for (j, sym) in sig.samples.chunks(cfg.symbol_len()).enumerate() {
            prop_assert_eq!(&sym[..g], &sig.body(j)[cfg.fft_size - g..]);
        }
    }
}

#[test]
fn one_addition_subtracts_the_shifted_kernel() {
    let (cfg, sig) = signal(1, 3);
    let k = synthesize_kernel(&cfg, WindowParams::default()).unwrap();
    let before = sig.body(0).to_vec();
    let ev = detect_peak(&before, 0.0).unwrap();
    let a_th = ev.excess * 0.5;
    let ev = detect_peak(&before, a_th).unwrap();
    let mut tr = DistortionTracker::new(1.0, 1.0, 1, 1.0).unwrap();
    tr.begin_symbol();
    let mut body = before.clone();
    let r = cancel_symbol(&mut [&mut body[..]], &k, a_th, &mut tr, 1).unwrap();
    assert_eq!((r.additions, r.stop), (1, StopReason::MaxIterations));
    let nf = cfg.fft_size as i64;
    let mut expect = before.clone();
    for (off, g) in k.taps() {
        let s = (ev.index as i64 + off).rem_euclid(nf) as usize;
        expect[s] -= Complex64::from_polar(ev.excess, ev.phase) * g;
    }
    for (a, b) in body.iter().zip(&expect) {
        assert!((a - b).norm() < 1e-15);
    }
    assert!((body[ev.index].norm() - a_th).abs() < 1e-12);
}
