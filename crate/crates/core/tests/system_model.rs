mod common;

use common::*;
use lowres_precoding::system::{degrade_csi, generate_sv_channel, svd_basis, svd_basis_of, ChannelRealization};
use lowres_precoding::{CMat, ChannelParams, SystemConfig};

#[test]
fn mean_channel_energy_matches_normalization() {
    let cfg = SystemConfig::desk();
    let params = ChannelParams::default();
    let n = 10_000;
    let mean: f64 = (0..n)
        .map(|s| power(&generate_sv_channel(&cfg, &params, s).unwrap().h))
        .sum::<f64>()
        / n as f64;
    let target = (cfg.nt * cfg.nr) as f64;
    assert!((mean / target - 1.0).abs() < 0.02, "mean ||H||^2 = {mean}, expected {target}");
}

#[test]
fn svd_basis_residual_and_orthonormality() {
    let mut r = rng(3);
    for (nr, nt, ns, nrf) in [(6, 8, 2, 3), (8, 6, 3, 3), (16, 16, 4, 4)] {
        let h = randn(nr, nt, &mut r);
        let b = svd_basis_of(&h, ns, nrf, None).unwrap();
        let resid = &h * &b.v_tilde - &b.u * diag(&b.singular_values[..nrf.min(b.singular_values.len())]);
        assert!(resid.norm() <= 1e-8 * h.norm(), "residual {}", resid.norm());
        let gram = b.v.adjoint() * &b.v;
        assert!((gram - CMat::identity(ns, ns)).norm() < 1e-10);
        let ora = singular_values(&h);
        for (a, o) in b.singular_values.iter().zip(&ora) {
            assert!((a - o).abs() < 1e-10 * ora[0]);
        }
        assert!(b.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn basis_of_realization_uses_config_sizes() {
    let cfg = SystemConfig::with_dims(8, 8, 2, 3);
    let ch = generate_sv_channel(&cfg, &ChannelParams::default(), 5).unwrap();
    let b = svd_basis(&ch, &cfg).unwrap();
    assert_eq!(b.v.shape(), (8, 2));
    assert_eq!(b.v_tilde.shape(), (8, 3));
    assert_eq!(b.v.columns(0, 2), b.v_tilde.columns(0, 2));
}

fn iid_realization(nr: usize, nt: usize, seed: u64) -> ChannelRealization {
    ChannelRealization {
        h: randn(nr, nt, &mut rng(seed)),
        clusters: 1,
        rays_per_cluster: 1,
        xi: 1.0,
        error: None,
        seed,
    }
}

#[test]
fn csi_degradation_keeps_unit_entry_variance() {
    let ch = iid_realization(64, 64, 8);
    for xi in [0.0, 0.5, 0.9] {
        let est = degrade_csi(&ch, xi, 9).unwrap();
        let var = power(&est.h) / (64.0 * 64.0);
        assert!((var - 1.0).abs() < 0.05, "xi = {xi}: variance {var}");
        let e = est.error.as_ref().unwrap();
        let rebuilt = ch.h.map(|z| z * xi) + e.map(|z| z * (1.0 - xi * xi).sqrt());
        assert!((rebuilt - &est.h).norm() < 1e-12);
    }
    let zero = degrade_csi(&ch, 0.0, 9).unwrap();
    assert_eq!(&zero.h, zero.error.as_ref().unwrap());
    assert_eq!(degrade_csi(&ch, 1.0, 9).unwrap().h, ch.h);
    // the error draw depends only on its seed
    let other = iid_realization(64, 64, 99);
    assert_eq!(degrade_csi(&other, 0.0, 9).unwrap().h, zero.h);
}

#[test]
fn snr_definition() {
    let mut cfg = SystemConfig::desk();
    assert!((cfg.snr_db() - 20.0).abs() < 1e-12);
    cfg.pt = 2.0;
    cfg.set_snr_db(10.0);
    assert!((cfg.pt / cfg.sigma_n2 - 10.0).abs() < 1e-12);
}
