use papr_core::ber::{
    ber_awgn, ber_esdm, ber_flat_rayleigh, eigen_pdf_audit, model_from_threshold, optimal_t_l, p_el_boundary,
    DistortionModel, EigenHistogram, EigenPdfSpec, ModelMode,
};
use papr_core::numeric::erfc;
use papr_core::ofdm::{add_awgn_with, demap_hard, map_bits, random_bits, ConstellationSpec, Modulation, SymbolGrid};
use papr_core::pc::{synthesize_kernel, WindowParams};
use papr_core::ofdm::OfdmConfig;
use papr_core::seed;
use proptest::prelude::*;

const ALL: [Modulation; 3] = [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64];

fn distorted(m: Modulation, th_db: f64) -> DistortionModel {
    let cfg = OfdmConfig::with_modulation(m);
    let k = synthesize_kernel(&cfg, WindowParams::default()).unwrap();
    model_from_threshold(10f64.powf(th_db / 20.0), 1.0, &k, 64, m)
}

fn p_between(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let cdf = |x: f64| if x.is_infinite() { if x > 0.0 { 1.0 } else { 0.0 } } else { 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2)) };
    cdf(hi) - cdf(lo)
}

// every transmitted point against every decision rectangle of the 2-D constellation
fn ber_by_enumeration(m: &DistortionModel) -> f64 {
    let spec = ConstellationSpec::new(m.modulation, m.symbol_energy);
    let mut levels: Vec<f64> = spec.axis_levels().iter().map(|l| l.0).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let bounds: Vec<f64> = std::iter::once(f64::NEG_INFINITY)
        .chain(levels.windows(2).map(|w| 0.5 * (w[0] + w[1]) * m.mu))
        .chain(std::iter::once(f64::INFINITY))
        .collect();
    let region = |x: f64| levels.iter().position(|&l| l == x).unwrap();
    let sd = (m.sigma_e * m.sigma_e + m.sigma_n * m.sigma_n).sqrt();
    let mut total = 0.0;
    for (a, p) in spec.points.iter().enumerate() {
        for (b, q) in spec.points.iter().enumerate() {
            let d = (a ^ b).count_ones() as f64;
            if d == 0.0 {
                continue;
            }
            let (ri, rq) = (region(q.re), region(q.im));
            let pi = p_between(bounds[ri], bounds[ri + 1], m.mu * p.re, sd);
            let pq = p_between(bounds[rq], bounds[rq + 1], m.mu * p.im, sd);
            total += d * pi * pq;
        }
    }
    total / (spec.points.len() * spec.bits()) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ber_matches_two_dimensional_enumeration(mi in 0usize..3, th in 4.0f64..9.0, ebn0 in 0.0f64..20.0) {
        let m0 = distorted(ALL[mi], th);
        let m = m0.with_noise(m0.sigma_for_ebn0(ebn0));
        let a = ber_awgn(&m);
        let b = ber_by_enumeration(&m);
        prop_assert!((a - b).abs() <= 1e-6 * b + 1e-15, "{} vs {}", a, b);
    }

    #[test]
    fn ber_is_bounded_and_falls_with_ebn0(mi in 0usize..3, th in 4.0f64..9.0, e1 in 0.0f64..25.0, d in 0.1f64..5.0) {
        for mode in [ModelMode::Correlated, ModelMode::AsPrinted] {
            let m = distorted(ALL[mi], th).with_mode(mode);
            let lo = ber_awgn(&m.with_noise(m.sigma_for_ebn0(e1)));
            let hi = ber_awgn(&m.with_noise(m.sigma_for_ebn0(e1 + d)));
            prop_assert!((0.0..=0.5).contains(&lo) && (0.0..=0.5).contains(&hi));
            prop_assert!(hi <= lo * (1.0 + 1e-12));
        }
    }

    #[test]
    fn boundary_optimum_is_stationary(th in 4.0f64..9.0, ebn0 in 4.0f64..20.0) {
        for mode in [ModelMode::Correlated, ModelMode::AsPrinted] {
            let m0 = distorted(Modulation::Qam16, th).with_mode(mode);
            let m = m0.with_noise(m0.sigma_for_ebn0(ebn0)).with_gain(0.7);
            let t = optimal_t_l(&m);
            let h = 1e-4 * m.delta;
            let f0 = p_el_boundary(&m, t);
            let slope = (p_el_boundary(&m, t + h) - p_el_boundary(&m, t - h)) / (2.0 * h);
            let curv = (p_el_boundary(&m, t + h) - 2.0 * f0 + p_el_boundary(&m, t - h)) / (h * h);
            prop_assert!(slope.abs() * m.delta <= 1e-6 * f0.max(1e-300) + 1e-14, "slope {}", slope);
            prop_assert!(curv >= -1e-6 * f0 / (m.delta * m.delta));
        }
    }
}

#[test]
fn clean_qpsk_rayleigh_matches_closed_form() {
    for ebn0 in [0.0, 5.0, 10.0, 20.0, 30.0] {
        let m = DistortionModel::clean(Modulation::Qpsk, 64, 1.0 / 64.0);
        let m = m.with_noise(m.sigma_for_ebn0(ebn0));
        let g = 10f64.powf(ebn0 / 10.0);
        let exact = 0.5 * (1.0 - (g / (1.0 + g)).sqrt());
        let got = ber_flat_rayleigh(&m).unwrap();
        assert!((got / exact - 1.0).abs() < 1e-5, "{ebn0}: {got} vs {exact}");
    }
}

#[test]
fn hard_decisions_agree_with_theory_in_awgn() {
    let mut rng = seed::rng(5);
    for (m, ebn0) in [(Modulation::Qpsk, 4.0), (Modulation::Qam16, 8.0), (Modulation::Qam64, 12.0)] {
        let es = 1.0 / 64.0;
        let spec = ConstellationSpec::new(m, es);
        let model = DistortionModel::clean(m, 64, es);
        let model = model.with_noise(model.sigma_for_ebn0(ebn0));
        let (mut errors, mut bits) = (0usize, 0usize);
        for _ in 0..3000 {
            let b = random_bits(64 * spec.bits(), &mut rng);
            let mut g: SymbolGrid = map_bits(&b, &spec).unwrap();
            add_awgn_with(&mut g.symbols, model.sigma_n, &mut rng);
            errors += demap_hard(&g, &spec, 1.0).iter().zip(&b).filter(|(x, y)| x != y).count();
            bits += b.len();
        }
        let sim = errors as f64 / bits as f64;
        let th = ber_awgn(&model);
        assert!((sim / th - 1.0).abs() < 0.05, "{m:?}: {sim} vs {th}");
    }
}

#[test]
fn point_mass_eigen_link_is_awgn_with_gain() {
    for m in ALL {
        let d = distorted(m, 6.0);
        let d = d.with_noise(d.sigma_for_ebn0(12.0));
        let r = ber_esdm(&d, &EigenPdfSpec::PointMass(1.7)).unwrap();
        let direct = ber_awgn(&d.with_gain(1.7));
        assert!((r.average - direct).abs() <= 1e-15 * direct);
    }
}

#[test]
fn eigen_histograms_are_normalised_with_known_mean() {
    let h = EigenHistogram::sample(2, 4, 20_000, 0.05, 3).unwrap();
    let a = eigen_pdf_audit(&EigenPdfSpec::Empirical(h.clone())).unwrap();
    assert!(!a.flagged);
    for v in a.integrals {
        assert!((v - 1.0).abs() < 1e-9);
    }
    // E[λ1 + λ2] = E‖H‖²_F = 8
    let mean: f64 = (0..2)
        .map(|i| h.density[i].iter().enumerate().map(|(b, d)| d * h.bin_width * h.bin_center(b)).sum::<f64>())
        .sum();
    assert!((mean / 8.0 - 1.0).abs() < 0.02, "{mean}");
}
