use num_complex::Complex64;
use papr_core::mimo::{
    esdm_link, esdm_receive, gen_channel, gen_flat, svd, svd_per_subcarrier, ChannelProfile, CMatrix, StreamConfig,
};
use papr_core::ofdm::{map_bits, random_bits, ConstellationSpec, OfdmConfig, OfdmEngine, SymbolGrid};
use papr_core::seed;
use proptest::prelude::*;

fn random_grids(cfg: &OfdmConfig, n: usize, rng: &mut impl rand::Rng) -> Vec<SymbolGrid> {
    let spec = ConstellationSpec::for_config(cfg);
    (0..n).map(|_| map_bits(&random_bits(cfg.num_subcarriers * spec.bits(), rng), &spec).unwrap()).collect()
}

fn identity_err(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    let i = CMatrix::identity(g.nrows(), g.ncols());
    (g - i).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_invariants(rx in 1usize..5, tx in 1usize..5, s in any::<u64>()) {
        let h = gen_flat(rx, tx, &mut seed::rng(s));
        let d = svd(&h).unwrap();
        let scale = h.norm();
        prop_assert!((d.reconstruct() - &h).norm() < 1e-12 * scale);
        prop_assert!(identity_err(&d.u) < 1e-12);
        prop_assert!(identity_err(&d.v) < 1e-12);
        prop_assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let trace: f64 = d.eigenvalues().iter().sum();
        prop_assert!((trace - h.norm_squared()).abs() < 1e-12 * h.norm_squared());
        for c in d.v.column_iter() {
            let first = c.iter().find(|z| z.norm() > 1e-12).unwrap();
            prop_assert!(first.im.abs() < 1e-12 && first.re > 0.0);
        }
    }

    #[test]
    fn waveform_channel_matches_per_subcarrier_matrices(s in any::<u64>()) {
        let cfg = OfdmConfig::default();
        let sc = StreamConfig::esdm_4x2();
        let ch = gen_channel(&sc, &cfg, &ChannelProfile::default(), s).unwrap();
        let eng = OfdmEngine::new(cfg).unwrap();
        let mut rng = seed::rng(s ^ 1);
        let x = random_grids(&cfg, sc.tx, &mut rng);
        let tx: Vec<_> = x.iter().map(|g| eng.modulate(g).unwrap()).collect();
        let rx = ch.apply_waveform(&tx).unwrap();
        for (r, sig) in rx.iter().enumerate() {
            let y = &eng.demodulate(sig).unwrap()[0];
            for i in 0..cfg.num_subcarriers {
                let expect: Complex64 = (0..sc.tx).map(|m| ch.per_subcarrier[i][(r, m)] * x[m].symbols[i]).sum();
                prop_assert!((y.symbols[i] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_eigen_link_scales_by_singular_values(s in any::<u64>()) {
        let cfg = OfdmConfig::default();
        let ch = gen_channel(&StreamConfig::esdm_4x2(), &cfg, &ChannelProfile::default(), s).unwrap();
        let svds = svd_per_subcarrier(&ch).unwrap();
        let x = random_grids(&cfg, 2, &mut seed::rng(s ^ 2));
        let y = esdm_link(&x, &ch, &svds, 0.0, 0).unwrap();
        for k in 0..2 {
            for i in 0..cfg.num_subcarriers {
                let sv = svds.per_subcarrier[i].singular_values[k];
                prop_assert!((y[k].symbols[i] - x[k].symbols[i] * sv).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn channel_power_and_post_coded_noise() {
    let cfg = OfdmConfig::default();
    let sc = StreamConfig::esdm_4x2();
    let draws = 400;
    let mut power = 0.0;
    let mut noise = [0.0; 2];
    let sigma = 0.5;
    let zeros = vec![SymbolGrid::zeros(cfg.num_subcarriers); sc.tx];
    let mut rng = seed::rng(11);
    for d in 0..draws {
        let ch = gen_channel(&sc, &cfg, &ChannelProfile::default(), d).unwrap();
        power += ch.per_subcarrier.iter().map(|h| h.norm_squared()).sum::<f64>() / cfg.num_subcarriers as f64;
        let svds = svd_per_subcarrier(&ch).unwrap();
        let y = esdm_receive(&zeros, &ch, &svds, 2, sigma, &mut rng).unwrap();
        for z in y.iter().flat_map(|g| &g.symbols) {
            noise[0] += z.re * z.re;
            noise[1] += z.im * z.im;
        }
    }
    let per = (sc.rx * sc.tx) as f64;
    assert!((power / draws as f64 / per - 1.0).abs() < 0.05, "{}", power / draws as f64);
    let n = (draws as usize * 2 * cfg.num_subcarriers) as f64;
    for v in noise {
        assert!((v / n / (sigma * sigma) - 1.0).abs() < 0.03, "{}", v / n);
    }
}
