//! Reference computations for the integration tests. These use direct inverses,
//! LU determinants and plain loops rather than the library's code paths.
#![allow(dead_code)]

use lowres_precoding::{CMat, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn power(f: &CMat) -> f64 {
    f.iter().map(|z| z.norm_sqr()).sum()
}

pub fn scaled_to(f: CMat, pt: f64) -> CMat {
    let s = (pt / power(&f)).sqrt();
    f.map(|z| z * s)
}

pub fn re_tr(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

pub fn diag(v: &[f64]) -> CMat {
    CMat::from_fn(v.len(), v.len(), |i, j| if i == j { C64::new(v[i], 0.0) } else { C64::new(0.0, 0.0) })
}

pub fn inv(m: &CMat) -> CMat {
    m.clone().try_inverse().expect("invertible")
}

pub fn ln_det(m: &CMat) -> f64 {
    m.clone().determinant().norm().ln()
}

/// `G (I - G) diag(H F F^H H^H) + sigma2 G` for a common gain `g`.
pub fn effective_noise(h: &CMat, f: &CMat, g: f64, sigma2: f64) -> CMat {
    let hf = h * f;
    let nr = h.nrows();
    let d: Vec<f64> = (0..nr)
        .map(|i| g * (1.0 - g) * (0..hf.ncols()).map(|k| hf[(i, k)].norm_sqr()).sum::<f64>() + sigma2 * g)
        .collect();
    diag(&d)
}

/// Quantization-aware SE in nats: `ln det(C_e + X X^H) - ln det(C_e)` with `X = G H F`.
pub fn se_nats(h: &CMat, f: &CMat, g: f64, sigma2: f64) -> f64 {
    let ce = effective_noise(h, f, g, sigma2);
    let x = (h * f).map(|z| z * g);
    ln_det(&(&ce + &x * x.adjoint())) - ln_det(&ce)
}

pub fn se_bits(h: &CMat, f: &CMat, g: f64, sigma2: f64) -> f64 {
    se_nats(h, f, g, sigma2) / std::f64::consts::LN_2
}

/// The MM lower bound `g(F, F_hat)` in nats with `S = C^-1 - (C + X X^H)^-1`.
pub fn surrogate_nats(h: &CMat, f_hat: &CMat, f: &CMat, g: f64, sigma2: f64) -> f64 {
    let c_hat = effective_noise(h, f_hat, g, sigma2);
    let x_hat = (h * f_hat).map(|z| z * g);
    let x = (h * f).map(|z| z * g);
    let c_inv = inv(&c_hat);
    let s = &c_inv - inv(&(&c_hat + &x_hat * x_hat.adjoint()));
    let r_hat = se_nats(h, f_hat, g, sigma2);
    let ce = effective_noise(h, f, g, sigma2);
    r_hat - re_tr(&(x_hat.adjoint() * &c_inv * &x_hat)) + 2.0 * re_tr(&(x_hat.adjoint() * &c_inv * &x))
        - re_tr(&(s * (ce + &x * x.adjoint())))
}

/// Singular values of `h`, descending.
pub fn singular_values(h: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = h.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Water-filling over the `ns` strongest modes by trying every active-set size.
pub fn waterfilling(sv: &[f64], pt: f64, sigma2: f64) -> Vec<f64> {
    let inv_gain: Vec<f64> = sv.iter().map(|s| sigma2 / (s * s)).collect();
    for k in (1..=sv.len()).rev() {
        let level = (pt + inv_gain[..k].iter().sum::<f64>()) / k as f64;
        if level > inv_gain[k - 1] {
            let mut p: Vec<f64> = inv_gain[..k].iter().map(|g| level - g).collect();
            p.resize(sv.len(), 0.0);
            return p;
        }
    }
    unreachable!("the strongest mode is always active")
}

/// Closed-form SE of water-filling with ideal ADCs, bits/s/Hz.
pub fn waterfilling_se(h: &CMat, pt: f64, sigma2: f64, ns: usize) -> f64 {
    let sv: Vec<f64> = singular_values(h).into_iter().take(ns).collect();
    let p = waterfilling(&sv, pt, sigma2);
    sv.iter().zip(&p).map(|(s, p)| (1.0 + p * s * s / sigma2).log2()).sum()
}
