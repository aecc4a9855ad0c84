use num_complex::Complex64;
use papr_core::baselines::{clip_samples, compand_samples, CompandConfig, LowpassFilter};
use papr_core::ofdm::OfdmConfig;
use proptest::prelude::*;

fn samples() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| Complex64::new(a, b)), 1..128)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clip_splits_exactly(x in samples(), th in 0.01f64..4.0) {
        let (c, e) = clip_samples(&x, th);
        for ((v, c), e) in x.iter().zip(&c).zip(&e) {
            prop_assert_eq!(c + e, *v);
            prop_assert!(c.norm() <= th * (1.0 + 1e-12));
            if v.norm() > th {
                prop_assert!((c.arg() - v.arg()).abs() < 1e-12);
            } else {
                prop_assert_eq!(*e, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn clip_is_idempotent(x in samples(), th in 0.01f64..4.0) {
        let (c, _) = clip_samples(&x, th);
        let (cc, _) = clip_samples(&c, th * (1.0 + 1e-12));
        prop_assert_eq!(cc, c);
    }

    #[test]
    fn compand_is_monotone_and_keeps_phase(
        r in prop::collection::vec(0.0f64..10.0, 2..32),
        v in 0.5f64..10.0, a in 0.01f64..0.5, ph in -3.0f64..3.0,
    ) {
        let cfg = CompandConfig { v, a, ceiling: 1.0 };
        let mut r = r;
        r.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let x: Vec<Complex64> = r.iter().map(|&m| Complex64::from_polar(m, ph)).collect();
        let y = compand_samples(&x, &cfg);
        for w in y.windows(2) {
            prop_assert!(w[1].norm() >= w[0].norm() * (1.0 - 1e-12));
        }
        for (a, b) in x.iter().zip(&y) {
            prop_assert!(b.norm() <= cfg.ceiling * (1.0 + 1e-12));
            if a.norm() > 1e-9 && b.norm() > 1e-12 {
                let d = (b / a).arg();
                prop_assert!(d.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sparse_filter_is_circular_convolution(
        idx in prop::collection::vec(0usize..512, 0..8),
        taps in prop::sample::select(vec![17usize, 33, 65, 129]),
    ) {
        let cfg = OfdmConfig::default();
        let f = LowpassFilter::new(&cfg, taps).unwrap();
        let mut e = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
        for (j, &i) in idx.iter().enumerate() {
            e[i] = Complex64::new(1.0 + j as f64, -0.5);
        }
        let (out, nz) = f.filter_sparse(&e);
        let n = cfg.fft_size as i64;
        let half = (taps / 2) as i64;
        for t in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in -half..=half {
                acc += f.taps[(k + half) as usize] * e[(t - k).rem_euclid(n) as usize];
            }
            prop_assert!((acc - out[t as usize]).norm() < 1e-12);
        }
        prop_assert_eq!(nz as usize, e.iter().filter(|z| z.norm() > 0.0).count());
    }
}

#[test]
fn long_filter_passes_the_occupied_band() {
    let cfg = OfdmConfig::default();
    let f = LowpassFilter::new(&cfg, 511).unwrap();
    let nf = cfg.fft_size as f64;
    let gain = |l: f64| -> f64 {
        f.taps
            .iter()
            .enumerate()
            .map(|(k, h)| h * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * l * (k as f64 - 255.0) / nf))
            .sum::<Complex64>()
            .norm()
    };
    assert!((gain(0.0) - 1.0).abs() < 1e-9);
    assert!(gain(100.0) < 1e-9);
}
