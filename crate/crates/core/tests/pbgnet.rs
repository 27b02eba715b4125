use std::time::Instant;

use ednmr_core::pbgnet::{
    bandgap_edges, find_resonance, fit_uniform_loss, half_wave_frequency, quarter_wave_gap_fraction, s11, s21, sweep_s21,
    BraggDesign, TransmissionNetwork,
};
use proptest::prelude::*;

fn db(network: &TransmissionNetwork, f: f64) -> f64 {
    20.0 * s21(network, f).unwrap().norm().log10()
}

fn grid() -> Vec<f64> {
    (1..=20000).map(|k| k as f64 * 0.6e6).collect()
}

fn edges(network: &TransmissionNetwork) -> (f64, f64) {
    bandgap_edges(&sweep_s21(network, &grid()).unwrap(), -20.0).unwrap()
}

#[test]
fn reference_mirror_gap() {
    let net = TransmissionNetwork::reference_geometry();
    let start = Instant::now();
    let (lo, hi) = edges(&net);
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert!((lo / 4.5e9 - 1.0).abs() <= 0.10, "{lo}");
    assert!((hi / 9.0e9 - 1.0).abs() <= 0.10, "{hi}");
    assert!(db(&net, 5.5e9) <= -60.0);
    let d = BraggDesign::reference();
    let fraction = (hi - lo) / (0.5 * (hi + lo));
    assert!((fraction / quarter_wave_gap_fraction(d.z_high, d.z_low) - 1.0).abs() <= 0.15);
}

#[test]
fn low_frequency_passband() {
    let net = TransmissionNetwork::reference_geometry();
    for k in 1..=60 {
        let f = k as f64 * 50e6;
        assert!(db(&net, f) > -3.0, "{f}: {}", db(&net, f));
    }
}

#[test]
fn more_periods_deepen_the_gap() {
    let one = BraggDesign { periods: 1, ..BraggDesign::reference() }.network().unwrap();
    let five = TransmissionNetwork::reference_geometry();
    assert!(db(&one, 5.5e9) - db(&five, 5.5e9) >= 30.0);
}

#[test]
fn defect_mode_is_pulled_inside_the_gap() {
    let d = BraggDesign::reference();
    let net = d.network().unwrap();
    let (lo, hi) = edges(&net);
    let fit = find_resonance(&net, lo, hi).unwrap();
    assert!(fit.f0 > lo && fit.f0 < hi);
    let isolated = half_wave_frequency(&net.sections[2 * d.periods]);
    assert!((fit.f0 / isolated - 1.0).abs() > 0.01);
}

#[test]
fn q_grows_with_mirror_periods() {
    let mut prev = 0.0;
    for periods in 3..=5 {
        let net = BraggDesign { periods, ..BraggDesign::reference() }.network().unwrap();
        let q = find_resonance(&net, 5e9, 9e9).unwrap().loaded_q;
        assert!(q > prev, "{periods} periods: {q}");
        prev = q;
    }
}

#[test]
fn loss_lowers_q_continuously() {
    let net = TransmissionNetwork::reference_geometry();
    let q = |loss: f64| find_resonance(&net.with_loss(loss).unwrap(), 5e9, 9e9).unwrap().loaded_q;
    let qs: Vec<f64> = [0.0, 0.5, 1.0, 2.0].iter().map(|&l| q(l)).collect();
    assert!(qs.windows(2).all(|w| w[1] < w[0]), "{qs:?}");
    let nudged = q(0.5 + 1e-4);
    assert!((nudged / qs[1] - 1.0).abs() < 1e-3);
    let target = 0.5 * (qs[2] + qs[3]);
    let loss = fit_uniform_loss(&net, target, 5e9, 9e9).unwrap();
    assert!(loss > 1.0 && loss < 2.0 && (q(loss) / target - 1.0).abs() < 1e-3);
}

#[test]
fn reversal_keeps_the_gap() {
    let asym = TransmissionNetwork::new(
        BraggDesign { periods: 4, ..BraggDesign::reference() }.network().unwrap().sections[..9].to_vec(),
        50.0,
    )
    .unwrap();
    let (a, b) = (edges(&asym), edges(&asym.reversed()));
    assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn network_is_reciprocal_and_passive(f in 1e8f64..1.2e10, loss in 0.0f64..20.0) {
        let net = TransmissionNetwork::reference_geometry().with_loss(loss).unwrap();
        let det = net.cascade(f).unwrap().determinant();
        prop_assert!((det - 1.0).norm() < 1e-6);
        let power = s21(&net, f).unwrap().norm_sqr() + s11(&net, f).unwrap().norm_sqr();
        if loss == 0.0 {
            prop_assert!((power - 1.0).abs() < 1e-9);
        } else {
            prop_assert!(power <= 1.0 + 1e-12);
        }
    }
}
