//! System configuration, clustered mmWave channels and their SVD bases.
//!
//! Channels follow the Saleh-Valenzuela model with half-wavelength uniform linear
//! arrays at both ends:
//!
//! `H = sqrt(Nt*Nr / (Ncl*Nray)) * sum_{i,l} alpha_il * a_r(phi_il) * a_t(theta_il)^H`
//!
//! with unit-norm array responses and `alpha_il ~ CN(0, 1)`, so that
//! `E[||H||_F^2] = Nt*Nr`.

use std::f64::consts::PI;

use nalgebra::SVD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// Transmit beamforming architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    #[default]
    Digital,
    FcHybrid,
    PcHybrid,
}

impl Architecture {
    pub fn is_hybrid(self) -> bool {
        !matches!(self, Architecture::Digital)
    }
}

/// Closed-form power update used by the digital MM iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerUpdate {
    /// `p_i = sqrt(K_ii / (J_ii + mu))` with `K = diag(p) A diag(p)`.
    Printed,
    /// `p_i = (k_i / (J_ii + mu))^2` with `k_i` the exact linear coefficient of the
    /// surrogate in `sqrt(p_i)`; the exact maximizer of the per-iteration problem.
    #[default]
    Stationarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub nt: usize,
    pub nr: usize,
    pub ns: usize,
    pub nrf: usize,
    /// Transmit power budget in watts.
    pub pt: f64,
    /// Noise power in watts.
    pub sigma_n2: f64,
    /// ADC resolution in bits.
    pub bits: u32,
    #[serde(default)]
    pub architecture: Architecture,
    /// Outer-loop stopping tolerance on the SE, bits/s/Hz.
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::max_outer_iters")]
    pub max_outer_iters: usize,
    #[serde(default = "defaults::one")]
    pub inner_iters: usize,
    #[serde(default = "defaults::one")]
    pub pgd_iters: usize,
    /// Relative tolerance on the power residual for the multiplier bisections.
    #[serde(default = "defaults::bisection_tol")]
    pub bisection_tol: f64,
    #[serde(default)]
    pub power_update: PowerUpdate,
}

mod defaults {
    pub fn epsilon() -> f64 {
        1e-4
    }
    pub fn max_outer_iters() -> usize {
        500
    }
    pub fn one() -> usize {
        1
    }
    pub fn bisection_tol() -> f64 {
        1e-12
    }
}

impl SystemConfig {
    /// `Nt = Nr = 64`, `Ns = Nrf = 8`, 20 dB SNR.
    pub fn full() -> Self {
        Self::with_dims(64, 64, 8, 8)
    }

    /// `Nt = Nr = 16`, `Ns = Nrf = 4`, 20 dB SNR.
    pub fn desk() -> Self {
        Self::with_dims(16, 16, 4, 4)
    }

    pub fn with_dims(nt: usize, nr: usize, ns: usize, nrf: usize) -> Self {
        Self {
            nt,
            nr,
            ns,
            nrf,
            pt: 1.0,
            sigma_n2: 0.01,
            bits: 1,
            architecture: Architecture::Digital,
            epsilon: defaults::epsilon(),
            max_outer_iters: defaults::max_outer_iters(),
            inner_iters: 1,
            pgd_iters: 1,
            bisection_tol: defaults::bisection_tol(),
            power_update: PowerUpdate::default(),
        }
    }

    pub fn snr(&self) -> f64 {
        self.pt / self.sigma_n2
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr().log10()
    }

    /// Keeps `Pt` fixed and sets the noise power so that `Pt / sigma_n2` equals the
    /// requested SNR.
    pub fn set_snr_db(&mut self, snr_db: f64) {
        self.sigma_n2 = self.pt / 10f64.powf(snr_db / 10.0);
    }

    /// Antennas per RF chain in the partially connected architecture.
    pub fn subarray_size(&self) -> usize {
        self.nt / self.nrf.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.nt == 0 || self.nr == 0 || self.ns == 0 || self.nrf == 0 {
            return cfg_err("antenna, stream and RF-chain counts must be positive".into());
        }
        if self.ns > self.nrf || self.nrf > self.nt {
            return cfg_err(format!(
                "need Ns <= Nrf <= Nt, got Ns={} Nrf={} Nt={}",
                self.ns, self.nrf, self.nt
            ));
        }
        if self.ns > self.nt.min(self.nr) {
            return cfg_err(format!("Ns={} exceeds min(Nt, Nr)={}", self.ns, self.nt.min(self.nr)));
        }
        if self.architecture == Architecture::PcHybrid && !self.nt.is_multiple_of(self.nrf) {
            return cfg_err(format!(
                "partially connected architecture needs Nt divisible by Nrf, got {}/{}",
                self.nt, self.nrf
            ));
        }
        if !(self.pt.is_finite() && self.pt > 0.0) {
            return cfg_err(format!("Pt must be positive, got {}", self.pt));
        }
        if !(self.sigma_n2.is_finite() && self.sigma_n2 > 0.0) {
            return cfg_err(format!("noise power must be positive, got {}", self.sigma_n2));
        }
        if !(1..=crate::quantizer::MAX_BITS).contains(&self.bits) {
            return cfg_err(format!("ADC bits must be in [1, {}], got {}", crate::quantizer::MAX_BITS, self.bits));
        }
        if !(self.epsilon > 0.0) || !(self.bisection_tol > 0.0) {
            return cfg_err("tolerances must be positive".into());
        }
        if self.max_outer_iters == 0 || self.inner_iters == 0 || self.pgd_iters == 0 {
            return cfg_err("iteration caps must be positive".into());
        }
        Ok(())
    }
}

/// Geometry and scattering parameters of the clustered channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub clusters: usize,
    pub rays_per_cluster: usize,
    /// Standard deviation of the Laplacian ray offsets around the cluster center.
    pub angle_spread_deg: f64,
    /// Element spacing in wavelengths.
    pub antenna_spacing: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            clusters: 5,
            rays_per_cluster: 10,
            angle_spread_deg: 10.0,
            antenna_spacing: 0.5,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.rays_per_cluster == 0 {
            return Err(Error::Config(format!(
                "channel needs at least one cluster and one ray, got {} x {}",
                self.clusters, self.rays_per_cluster
            )));
        }
        if !(self.angle_spread_deg.is_finite() && self.angle_spread_deg >= 0.0) {
            return Err(Error::Config(format!("invalid angle spread {}", self.angle_spread_deg)));
        }
        if !(self.antenna_spacing.is_finite() && self.antenna_spacing > 0.0) {
            return Err(Error::Config(format!("invalid antenna spacing {}", self.antenna_spacing)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: CMat,
    pub clusters: usize,
    pub rays_per_cluster: usize,
    /// CSI accuracy; 1 for a perfectly known channel.
    pub xi: f64,
    /// Estimation error matrix, present only after degradation with `xi < 1`.
    pub error: Option<CMat>,
    pub seed: u64,
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn complex_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

fn laplace<R: Rng + ?Sized>(rng: &mut R, std_dev: f64) -> f64 {
    let scale = std_dev / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

/// Unit-norm ULA response.
pub fn ula_response(n: usize, spacing: f64, angle: f64) -> Vec<C64> {
    let norm = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| C64::from_polar(norm, 2.0 * PI * spacing * k as f64 * angle.sin()))
        .collect()
}

pub fn generate_sv_channel(cfg: &SystemConfig, params: &ChannelParams, seed: u64) -> Result<ChannelRealization> {
    params.validate()?;
    if cfg.nt == 0 || cfg.nr == 0 {
        return Err(Error::Config("array sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = params.clusters * params.rays_per_cluster;
    let gain = ((cfg.nt * cfg.nr) as f64 / paths as f64).sqrt();
    let spread = params.angle_spread_deg.to_radians();
    let mut h = CMat::zeros(cfg.nr, cfg.nt);
    for _ in 0..params.clusters {
        let aoa_center = rng.random::<f64>() * 2.0 * PI;
        let aod_center = rng.random::<f64>() * 2.0 * PI;
        for _ in 0..params.rays_per_cluster {
            let aoa = aoa_center + laplace(&mut rng, spread);
            let aod = aod_center + laplace(&mut rng, spread);
            let alpha = complex_normal(&mut rng) * gain;
            let ar = ula_response(cfg.nr, params.antenna_spacing, aoa);
            let at = ula_response(cfg.nt, params.antenna_spacing, aod);
            for (i, ari) in ar.iter().enumerate() {
                let s = alpha * ari;
                for (j, atj) in at.iter().enumerate() {
                    h[(i, j)] += s * atj.conj();
                }
            }
        }
    }
    Ok(ChannelRealization {
        h,
        clusters: params.clusters,
        rays_per_cluster: params.rays_per_cluster,
        xi: 1.0,
        error: None,
        seed,
    })
}

/// Imperfect-CSI model `H_est = xi * H + sqrt(1 - xi^2) * E`, `E` i.i.d. CN(0, 1).
pub fn degrade_csi(ch: &ChannelRealization, xi: f64, seed: u64) -> Result<ChannelRealization> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::Domain(format!("CSI accuracy must lie in [0, 1], got {xi}")));
    }
    if xi == 1.0 {
        return Ok(ChannelRealization { xi, error: None, ..ch.clone() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = complex_normal_matrix(ch.h.nrows(), ch.h.ncols(), &mut rng);
    let h = ch.h.scale(xi) + e.scale((1.0 - xi * xi).sqrt());
    Ok(ChannelRealization {
        h,
        xi,
        error: Some(e),
        ..ch.clone()
    })
}

/// Dominant right singular vectors of a channel.
#[derive(Debug, Clone)]
pub struct SvdBasis {
    /// `Nt x Ns`.
    pub v: CMat,
    /// `Nt x Nrf`.
    pub v_tilde: CMat,
    /// `Nr x Nrf` left singular vectors matching `v_tilde`, so `H v_k = s_k u_k`.
    pub u: CMat,
    /// Descending.
    pub singular_values: Vec<f64>,
}

pub fn svd_basis(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<SvdBasis> {
    svd_basis_of(&ch.h, cfg.ns, cfg.nrf, Some(ch.seed))
}

/// Computes the basis of an arbitrary matrix. Each right singular vector is rotated
/// so that its largest-magnitude entry (first one on ties) is real and positive.
pub fn svd_basis_of(h: &CMat, ns: usize, nrf: usize, seed: Option<u64>) -> Result<SvdBasis> {
    let (nr, nt) = h.shape();
    if ns > nrf || nrf > nt {
        return Err(Error::Config(format!("need Ns <= Nrf <= Nt, got {ns}, {nrf}, {nt}")));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numerical("svd_basis", format!("non-finite channel entries (seed {seed:?})")));
    }
    // pad with zero rows so that all Nt right singular vectors are available
    let rows = nr.max(nt);
    let mut padded = CMat::zeros(rows, nt);
    padded.view_mut((0, 0), (nr, nt)).copy_from(h);
    let svd = SVD::try_new_unordered(padded, true, true, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::numerical("svd_basis", format!("SVD did not converge (channel seed {seed:?})"))
    })?;
    let (u_full, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::numerical("svd_basis", "singular vectors missing")),
    };
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut v_tilde = CMat::zeros(nt, nrf);
    let mut u = CMat::zeros(nr, nrf);
    for (k, &idx) in order.iter().take(nrf).enumerate() {
        let mut col: Vec<C64> = v_t.row(idx).iter().map(|z| z.conj()).collect();
        let mut pivot = 0;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > col[pivot].norm() {
                pivot = i;
            }
        }
        let rot = if col[pivot].norm() > 0.0 {
            C64::from_polar(1.0, -col[pivot].arg())
        } else {
            C64::new(1.0, 0.0)
        };
        for z in col.iter_mut() {
            *z *= rot;
        }
        col[pivot] = C64::new(col[pivot].re, 0.0);
        for (i, z) in col.into_iter().enumerate() {
            v_tilde[(i, k)] = z;
        }
        for i in 0..nr {
            u[(i, k)] = u_full[(i, idx)] * rot;
        }
    }
    let singular_values: Vec<f64> = order.iter().take(nr.min(nt)).map(|&i| sv[i]).collect();
    let v = v_tilde.columns(0, ns).into_owned();
    Ok(SvdBasis {
        v,
        v_tilde,
        u,
        singular_values,
    })
}
