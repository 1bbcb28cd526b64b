mod common;

use common::*;
use lowres_precoding::linalg::hermitian_eigenvalues;
use lowres_precoding::metrics::{energy_efficiency, signal_covariance, PowerModel};
use lowres_precoding::quantizer::{empirical_qd_covariance, lloyd_max_codebook, MAX_BITS};
use lowres_precoding::system::generate_sv_channel;
use lowres_precoding::{ChannelParams, SystemConfig};

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `(mass, first moment)` of the standard normal on `[a, b]` by Simpson's rule,
/// with infinite ends clipped at +-12.
fn moments(a: f64, b: f64) -> (f64, f64) {
    let (a, b) = (a.max(-12.0), b.min(12.0));
    let n = 4000;
    let h = (b - a) / n as f64;
    let (mut m0, mut m1) = (0.0, 0.0);
    for i in 0..=n {
        let x = a + i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        m0 += w * normal_pdf(x);
        m1 += w * x * normal_pdf(x);
    }
    (m0 * h / 3.0, m1 * h / 3.0)
}

/// Plain Lloyd iteration from uniformly spaced levels; returns the MSE.
fn lloyd_oracle(bits: u32) -> f64 {
    let n = 1usize << bits;
    let mut levels: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / n as f64).collect();
    let bounds = |l: &[f64]| {
        let mut t = vec![f64::NEG_INFINITY];
        t.extend(l.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        t.push(f64::INFINITY);
        t
    };
    for _ in 0..2000 {
        let t = bounds(&levels);
        levels = (0..n)
            .map(|i| {
                let (m0, m1) = moments(t[i], t[i + 1]);
                m1 / m0
            })
            .collect();
    }
    let t = bounds(&levels);
    // E[x^2] - sum_i c_i^2 P_i for a centroid quantizer
    1.0 - (0..n)
        .map(|i| {
            let (m0, _) = moments(t[i], t[i + 1]);
            levels[i] * levels[i] * m0
        })
        .sum::<f64>()
}

#[test]
fn two_bit_codebook_mse_against_lloyd_oracle() {
    let oracle = lloyd_oracle(2);
    assert!((oracle - 0.1175).abs() < 1e-4, "oracle {oracle}");
    for bits in 2..=3 {
        let q = lloyd_max_codebook(bits, 1e-10).unwrap();
        let ora = lloyd_oracle(bits);
        assert!((q.gamma - ora).abs() < 1e-7, "b = {bits}: {} vs {ora}", q.gamma);
    }
}

#[test]
fn every_resolution_converges_with_decreasing_mse() {
    let mut prev = 1.0;
    for bits in 1..=MAX_BITS {
        let q = lloyd_max_codebook(bits, 1e-10).unwrap();
        assert!(q.gamma < prev && q.gamma > 0.0);
        // high-resolution asymptote: MSE ~ (sqrt(3) pi / 2) 4^-b
        if bits >= 8 {
            let asym = 3f64.sqrt() * std::f64::consts::PI / 2.0 * 4f64.powi(-(bits as i32));
            assert!((q.gamma / asym - 1.0).abs() < 0.05, "b = {bits}");
        }
        prev = q.gamma;
    }
}

#[test]
fn distortion_vanishes_at_full_resolution() {
    let cfg = SystemConfig::desk();
    let h = generate_sv_channel(&cfg, &ChannelParams::default(), 4).unwrap().h;
    let f = scaled_to(randn(cfg.nt, cfg.ns, &mut rng(1)), cfg.pt);
    let q = lloyd_max_codebook(12, 1e-10).unwrap();
    let qd = empirical_qd_covariance(&h, &f, &q, &cfg, 20_000, 5).unwrap();
    let cy = signal_covariance(&h, &f, cfg.sigma_n2).unwrap();
    assert!(qd.c_eta.norm() / cy.norm() < 1e-3);
}

#[test]
fn empirical_distortion_is_hermitian_psd() {
    let mut cfg = SystemConfig::desk();
    cfg.bits = 2;
    let h = generate_sv_channel(&cfg, &ChannelParams::default(), 6).unwrap().h;
    let f = scaled_to(randn(cfg.nt, cfg.ns, &mut rng(2)), cfg.pt);
    let q = lloyd_max_codebook(2, 1e-10).unwrap();
    let c = empirical_qd_covariance(&h, &f, &q, &cfg, 10_000, 7).unwrap().c_eta;
    assert!((&c - c.adjoint()).norm() <= 1e-10 * c.norm());
    assert!(hermitian_eigenvalues(&c)[0] >= -1e-8);
}

#[test]
fn received_covariance_floor_is_noise() {
    let cfg = SystemConfig::desk();
    let mut r = rng(12);
    for _ in 0..5 {
        let h = randn(cfg.nr, cfg.nt, &mut r);
        let f = randn(cfg.nt, cfg.ns, &mut r);
        let cy = signal_covariance(&h, &f, cfg.sigma_n2).unwrap();
        assert!(hermitian_eigenvalues(&cy)[0] >= cfg.sigma_n2 * (1.0 - 1e-10));
    }
}

#[test]
fn adc_power_and_efficiency_trend() {
    let pm = PowerModel::default();
    assert!((pm.adc_power(1) - 0.988e-3).abs() < 1e-15);
    let mut cfg = SystemConfig::desk();
    let mut prev = f64::INFINITY;
    for bits in 1..=8 {
        cfg.bits = bits;
        assert!((pm.adc_power(bits) / pm.adc_power(1) - 2f64.powi(bits as i32 - 1)).abs() < 1e-12);
        let ee = energy_efficiency(10.0, &cfg, &pm);
        assert!(ee < prev);
        prev = ee;
    }
    assert_eq!(energy_efficiency(0.0, &cfg, &pm), 0.0);
}
