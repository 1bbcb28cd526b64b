//! Signal and effective-noise covariances, the quantization-aware SE lower bound
//! and the energy-efficiency model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ln_det_eye_plus, scale_rows, CMat, C64};
use crate::quantizer::{BussgangModel, QdCovariance, QdSource};
use crate::system::{Architecture, SystemConfig};

fn check_hf(op: &'static str, h: &CMat, f: &CMat) -> Result<()> {
    if h.ncols() != f.nrows() {
        return Err(Error::dims(op, format!("F with {} rows", h.ncols()), format!("{} rows", f.nrows())));
    }
    Ok(())
}

/// `C_y = H F F^H H^H + sigma_n2 I`.
pub fn signal_covariance(h: &CMat, f: &CMat, sigma_n2: f64) -> Result<CMat> {
    check_hf("signal_covariance", h, f)?;
    let hf = h * f;
    let mut cy = &hf * hf.adjoint();
    for i in 0..cy.nrows() {
        cy[(i, i)] += C64::new(sigma_n2, 0.0);
    }
    Ok(crate::linalg::hermitian_part(&cy))
}

/// Covariance of the effective noise `e = G n + eta`.
#[derive(Debug, Clone)]
pub struct EffectiveNoise {
    pub c_e: CMat,
    pub variant: QdSource,
}

/// `C_e = G (I - G) diag(H F F^H H^H) + sigma_n2 G`.
pub fn effective_noise_cov_approx(h: &CMat, f: &CMat, g: &BussgangModel, sigma_n2: f64) -> Result<EffectiveNoise> {
    check_hf("effective_noise_cov_approx", h, f)?;
    if g.nr() != h.nrows() {
        return Err(Error::dims("effective_noise_cov_approx", format!("G of size {}", h.nrows()), format!("{}", g.nr())));
    }
    let hf = h * f;
    let n = h.nrows();
    let mut c_e = CMat::zeros(n, n);
    for i in 0..n {
        let power: f64 = hf.row(i).iter().map(|z| z.norm_sqr()).sum();
        let gi = g.gain[i];
        c_e[(i, i)] = C64::new(gi * (1.0 - gi) * power + sigma_n2 * gi, 0.0);
    }
    Ok(EffectiveNoise {
        c_e,
        variant: QdSource::Approximate,
    })
}

/// `C_e = C_eta + sigma_n2 G^2` from a distortion covariance.
pub fn effective_noise_from_qd(qd: &QdCovariance, g: &BussgangModel, sigma_n2: f64) -> Result<EffectiveNoise> {
    if qd.c_eta.nrows() != g.nr() {
        return Err(Error::dims("effective_noise_from_qd", format!("{}", g.nr()), format!("{}", qd.c_eta.nrows())));
    }
    let mut c_e = qd.c_eta.clone();
    for (i, gi) in g.gain.iter().enumerate() {
        c_e[(i, i)] += C64::new(sigma_n2 * gi * gi, 0.0);
    }
    Ok(EffectiveNoise {
        c_e,
        variant: qd.source,
    })
}

/// `ln det(I + C_e^{-1} G H F F^H H^H G)` in nats.
pub fn spectral_efficiency_nats(h: &CMat, f: &CMat, g: &BussgangModel, c_e: &CMat) -> Result<f64> {
    check_hf("spectral_efficiency", h, f)?;
    if c_e.nrows() != h.nrows() || g.nr() != h.nrows() {
        return Err(Error::dims("spectral_efficiency", format!("{} receive dims", h.nrows()), format!("{}", c_e.nrows())));
    }
    let x = scale_rows(&g.gain, &(h * f));
    ln_det_eye_plus(c_e, &x, "spectral_efficiency")
}

/// SE lower bound in bits/s/Hz.
pub fn spectral_efficiency(h: &CMat, f: &CMat, g: &BussgangModel, c_e: &CMat) -> Result<f64> {
    Ok(spectral_efficiency_nats(h, f, g, c_e)? / std::f64::consts::LN_2)
}

/// SE under the diagonal distortion approximation, in nats. This is the objective
/// the MM algorithms increase.
pub fn approx_se_nats(h: &CMat, f: &CMat, g: &BussgangModel, sigma_n2: f64) -> Result<f64> {
    let ce = effective_noise_cov_approx(h, f, g, sigma_n2)?;
    spectral_efficiency_nats(h, f, g, &ce.c_e)
}

pub fn approx_se(h: &CMat, f: &CMat, g: &BussgangModel, sigma_n2: f64) -> Result<f64> {
    Ok(approx_se_nats(h, f, g, sigma_n2)? / std::f64::consts::LN_2)
}

/// Unquantized SE `log2 det(I + H F F^H H^H / sigma_n2)`.
pub fn unquantized_se(h: &CMat, f: &CMat, sigma_n2: f64) -> Result<f64> {
    check_hf("unquantized_se", h, f)?;
    let n = h.nrows();
    let c = CMat::identity(n, n).scale(sigma_n2);
    Ok(ln_det_eye_plus(&c, &(h * f), "unquantized_se")? / std::f64::consts::LN_2)
}

/// Hardware power figures, all in watts except `kappa` (J/step/Hz) and `f_s` (Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerModel {
    pub p_rf: f64,
    pub p_lna: f64,
    pub kappa: f64,
    pub f_s: f64,
    pub p_ps: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            p_rf: 43e-3,
            p_lna: 25e-3,
            kappa: 494e-15,
            f_s: 1e9,
            p_ps: 10e-3,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.p_rf, self.p_lna, self.kappa, self.f_s, self.p_ps];
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!("power model entries must be nonnegative: {self:?}")));
        }
        Ok(())
    }

    /// `P_ADC = kappa f_s 2^b`.
    pub fn adc_power(&self, bits: u32) -> f64 {
        self.kappa * self.f_s * 2f64.powi(bits as i32)
    }

    /// `P_R = Nr (P_LNA + P_RF + 2 P_ADC)`.
    pub fn receiver_power(&self, cfg: &SystemConfig) -> f64 {
        cfg.nr as f64 * (self.p_lna + self.p_rf + 2.0 * self.adc_power(cfg.bits))
    }

    pub fn transmitter_power(&self, cfg: &SystemConfig) -> f64 {
        let (nt, nrf) = (cfg.nt as f64, cfg.nrf as f64);
        match cfg.architecture {
            Architecture::Digital => cfg.pt + nt * self.p_rf,
            Architecture::FcHybrid => cfg.pt + nrf * self.p_rf + nt * nrf * self.p_ps,
            Architecture::PcHybrid => cfg.pt + nrf * self.p_rf + nt * self.p_ps,
        }
    }
}

/// `R / (P_T + P_R)` in bits/Hz/J.
pub fn energy_efficiency(se_bits: f64, cfg: &SystemConfig, pm: &PowerModel) -> f64 {
    se_bits / (pm.transmitter_power(cfg) + pm.receiver_power(cfg))
}
