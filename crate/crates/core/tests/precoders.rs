mod common;

use common::*;
use lowres_precoding::digital::power_step;
use lowres_precoding::hybrid::{connectivity_mask, digital_step, pgd_analog_step, project_analog, HybridPrecoder};
use lowres_precoding::quantizer::BussgangModel;
use lowres_precoding::surrogate::{build_state, hybrid_objective, surrogate_value_nats};
use lowres_precoding::{Architecture, CMat, PowerUpdate, SystemConfig, C64};
use nalgebra::{DMatrix, DVector};

#[test]
fn symmetric_streams_split_power_equally() {
    let h = CMat::identity(4, 4);
    let v = CMat::identity(4, 2);
    let p_hat = [0.5, 0.5];
    let f_hat = v.map(|z| z * 0.5f64.sqrt());
    let g = BussgangModel::uniform(4, 0.3);
    let st = build_state(&h, &f_hat, &g, 0.01, Some((&v, &p_hat))).unwrap();
    for rule in [PowerUpdate::Printed, PowerUpdate::Stationarity] {
        let a = power_step(&st, 1.0, 1e-12, rule).unwrap();
        assert!((a.p[0] - 0.5).abs() < 1e-12 && (a.p[1] - 0.5).abs() < 1e-12, "{rule:?}: {:?}", a.p);
    }
}

#[test]
fn objective_ordering_mirrors_surrogate() {
    let (nt, nr, ns, nrf) = (8, 6, 2, 4);
    let mut r = rng(21);
    let h = randn(nr, nt, &mut r);
    let g = BussgangModel::uniform(nr, 0.2);
    let f_hat = scaled_to(randn(nt, ns, &mut r), 1.0);
    let st = build_state(&h, &f_hat, &g, 0.1, None).unwrap();
    let mask = connectivity_mask(nt, nrf, Architecture::FcHybrid);
    assert_eq!(hybrid_objective(&st, &project_analog(&randn(nt, nrf, &mut r), &mask), &CMat::zeros(nrf, ns)), 0.0);
    let mut sum = None;
    for _ in 0..50 {
        let a = project_analog(&randn(nt, nrf, &mut r), &mask);
        let b = randn(nrf, ns, &mut r).map(|z| z * 0.3);
        let f = hybrid_objective(&st, &a, &b);
        let gv = surrogate_value_nats(&st, &(&a * &b)).unwrap();
        let s = f + gv;
        let s0 = *sum.get_or_insert(s);
        assert!((s - s0).abs() < 1e-9 * s0.abs().max(1.0), "g + f not constant: {s} vs {s0}");
    }
}

#[test]
fn pgd_step_never_increases_objective() {
    let (nt, nr, ns, nrf) = (8, 6, 2, 4);
    let mut r = rng(31);
    for arch in [Architecture::FcHybrid, Architecture::PcHybrid] {
        for _ in 0..10 {
            let h = randn(nr, nt, &mut r);
            let g = BussgangModel::uniform(nr, 0.36);
            let st = build_state(&h, &scaled_to(randn(nt, ns, &mut r), 1.0), &g, 0.1, None).unwrap();
            let mask = connectivity_mask(nt, nrf, arch);
            let hp = HybridPrecoder {
                f_rf: project_analog(&randn(nt, nrf, &mut r), &mask),
                f_bb: randn(nrf, ns, &mut r).map(|z| z * 0.3),
                mask: mask.clone(),
                architecture: arch,
            };
            let next = pgd_analog_step(&st, &hp, 1);
            assert!(hybrid_objective(&st, &next.f_rf, &next.f_bb) <= hybrid_objective(&st, &hp.f_rf, &hp.f_bb));
            assert!(next.is_feasible_analog(1e-12));

            let still = HybridPrecoder {
                f_bb: CMat::zeros(nrf, ns),
                ..hp.clone()
            };
            assert_eq!(pgd_analog_step(&st, &still, 3).f_rf, hp.f_rf);
        }
    }
}

/// Quadratic `x^T A x - 2 b^T x + c` read off `fun` on the real coordinates of a
/// complex `rows x cols` matrix.
fn real_quadratic(rows: usize, cols: usize, fun: impl Fn(&CMat) -> f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = 2 * rows * cols;
    let to_mat = |x: &DVector<f64>| CMat::from_fn(rows, cols, |i, j| C64::new(x[2 * (i * cols + j)], x[2 * (i * cols + j) + 1]));
    let at = |x: &DVector<f64>| fun(&to_mat(x));
    let e = |i: usize| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
    let c = at(&DVector::zeros(n));
    let fp: Vec<f64> = (0..n).map(|i| at(&e(i))).collect();
    let fm: Vec<f64> = (0..n).map(|i| at(&(-e(i)))).collect();
    let b = DVector::from_fn(n, |i, _| -(fp[i] - fm[i]) / 4.0);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = (fp[i] + fm[i] - 2.0 * c) / 2.0;
        for j in 0..i {
            let v = (at(&(e(i) + e(j))) - fp[i] - fp[j] + c) / 2.0;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    (a, b)
}

#[test]
fn baseband_step_matches_convex_oracle() {
    let (nt, nr, ns, nrf, sigma2, pt) = (4, 4, 2, 2, 0.05, 1.0);
    let gain = 0.6;
    let g = BussgangModel::uniform(nr, 1.0 - gain);
    let mut r = rng(41);
    for arch in [Architecture::FcHybrid, Architecture::PcHybrid, Architecture::FcHybrid] {
        let h = randn(nr, nt, &mut r);
        let f_hat = scaled_to(randn(nt, ns, &mut r), pt);
        let st = build_state(&h, &f_hat, &g, sigma2, None).unwrap();
        let f_rf = project_analog(&randn(nt, nrf, &mut r), &connectivity_mask(nt, nrf, arch));

        let obj = |b: &CMat| -surrogate_nats(&h, &f_hat, &(&f_rf * b), gain, sigma2);
        let (a, lin) = real_quadratic(nrf, ns, obj);
        let (pw, _) = real_quadratic(nrf, ns, |b| power(&(&f_rf * b)));
        // whiten the power constraint: x = L^-T y with P = L L^T, ||y||^2 <= pt
        let l = pw.clone().cholesky().unwrap().l();
        let l_inv_t = l.clone().try_inverse().unwrap().transpose();
        let aw = l_inv_t.transpose() * &a * &l_inv_t;
        let bw = l_inv_t.transpose() * &lin;
        let step = 1.0 / (2.0 * aw.symmetric_eigenvalues().max());
        let mut y = DVector::zeros(aw.nrows());
        for _ in 0..200_000 {
            y -= (&aw * &y - &bw) * (2.0 * step);
            let n2 = y.norm_squared();
            if n2 > pt {
                y *= (pt / n2).sqrt();
            }
        }
        let x = &l_inv_t * &y;
        let oracle_val = (x.transpose() * &a * &x)[(0, 0)] - 2.0 * lin.dot(&x);
        let c0 = obj(&CMat::zeros(nrf, ns));

        let (b, _) = digital_step(&st, &f_rf, pt, 1e-12).unwrap();
        let ours = obj(&b) - c0;
        assert!((ours - oracle_val).abs() <= 1e-6, "{arch:?}: step {ours} vs oracle {oracle_val}");
        assert!(power(&(&f_rf * &b)) <= pt * (1.0 + 1e-8));
    }
}

#[test]
fn default_inner_loop_counts() {
    let cfg = SystemConfig::full();
    assert_eq!((cfg.inner_iters, cfg.pgd_iters), (1, 1));
}
