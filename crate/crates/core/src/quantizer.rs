//! Lloyd-Max scalar quantizers for Gaussian inputs and the Bussgang linearization
//! `z = G y + eta` of an element-wise complex quantizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erf_inv, erfc};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, CMat, C64};
use crate::metrics::signal_covariance;
use crate::system::{complex_normal_matrix, SystemConfig};

pub const MAX_BITS: u32 = 12;
pub const MIN_QD_SAMPLES: usize = 10_000;

const LLOYD_MAX_ITERS: usize = 10_000;
const QD_BATCH: usize = 1024;

/// Fitted distortion factor `gamma(b) = 2^(-1.74 b + 0.28)`.
pub fn distortion_factor(bits: u32) -> Result<f64> {
    if bits < 1 {
        return Err(Error::Domain(format!("ADC resolution must be at least 1 bit, got {bits}")));
    }
    Ok(2f64.powf(-1.74 * bits as f64 + 0.28))
}

/// Scalar quantizer designed for a zero-mean, unit-variance real Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub bits: u32,
    /// `2^b` reconstruction levels, strictly increasing.
    pub levels: Vec<f64>,
    /// `2^b + 1` thresholds, `-inf` and `+inf` at the ends.
    pub thresholds: Vec<f64>,
    /// Normalized mean-squared error `E[(x - Q(x))^2]`.
    pub gamma: f64,
}

fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// `P(a < x < b)` for a standard normal, accurate in both tails.
fn mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a * s) - erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * s) - erfc(-a * s))
    } else {
        0.5 * (erf(b * s) - erf(a * s))
    }
}

fn normal_quantile(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0)
}

fn midpoints(levels: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(levels.len() + 1);
    t.push(f64::NEG_INFINITY);
    t.extend(levels.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    t.push(f64::INFINITY);
    t
}

/// Centroid map of the Lloyd iteration: the conditional means of the cells whose
/// boundaries are the midpoints of `levels`.
fn lloyd_map(levels: &[f64]) -> Vec<f64> {
    let t = midpoints(levels);
    (0..levels.len())
        .map(|i| (pdf(t[i]) - pdf(t[i + 1])) / mass(t[i], t[i + 1]))
        .collect()
}

fn symmetrize(levels: &mut [f64]) {
    let n = levels.len();
    for i in 0..n / 2 {
        let m = 0.5 * (levels[n - 1 - i] - levels[i]);
        levels[i] = -m;
        levels[n - 1 - i] = m;
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton direction for the fixed-point equation `T(c) - c = 0` of the centroid
/// map. Level `i` only depends on its two neighbours, so `I - dT/dc` is
/// tridiagonal and is solved with the Thomas algorithm.
fn newton_direction(levels: &[f64], mapped: &[f64]) -> Option<Vec<f64>> {
    let n = levels.len();
    let t = midpoints(levels);
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let (a, b) = (t[i], t[i + 1]);
        let p = mass(a, b);
        let m = mapped[i];
        let da = if a.is_finite() { pdf(a) * (m - a) / p } else { 0.0 };
        let db = if b.is_finite() { pdf(b) * (b - m) / p } else { 0.0 };
        lower[i] = -0.5 * da;
        diag[i] = 1.0 - 0.5 * (da + db);
        upper[i] = -0.5 * db;
    }
    let mut rhs: Vec<f64> = mapped.iter().zip(levels).map(|(m, c)| m - c).collect();
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Lloyd-Max codebook for a unit-variance Gaussian.
///
/// Levels start at the quantiles of `N(0, 3)`, whose density matches the optimal
/// high-resolution point density `p(x)^(1/3)`. Each iteration tries a Newton step
/// on the Lloyd fixed-point equation and falls back to the plain centroid update
/// when the step does not shrink the residual. Stops once `max |T(c) - c| <= tol`.
pub fn lloyd_max_codebook(bits: u32, tol: f64) -> Result<Quantizer> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(Error::Domain(format!("codebook resolution must be in [1, {MAX_BITS}], got {bits}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let nq = 1usize << bits;
    let mut levels: Vec<f64> = (0..nq)
        .map(|i| 3f64.sqrt() * normal_quantile((i as f64 + 0.5) / nq as f64))
        .collect();
    symmetrize(&mut levels);
    let mut converged = false;
    for _ in 0..LLOYD_MAX_ITERS {
        let mapped = lloyd_map(&levels);
        let residual = max_abs(&mapped.iter().zip(&levels).map(|(m, c)| m - c).collect::<Vec<_>>());
        if residual <= tol {
            converged = true;
            break;
        }
        let newton = newton_direction(&levels, &mapped).and_then(|dir| {
            let mut cand: Vec<f64> = levels.iter().zip(&dir).map(|(c, d)| c + d).collect();
            symmetrize(&mut cand);
            if !cand.windows(2).all(|w| w[0] < w[1]) {
                return None;
            }
            let r = lloyd_map(&cand);
            let cand_res = max_abs(&r.iter().zip(&cand).map(|(m, c)| m - c).collect::<Vec<_>>());
            (cand_res < residual).then_some(cand)
        });
        levels = match newton {
            Some(c) => c,
            None => {
                let mut c = mapped;
                symmetrize(&mut c);
                c
            }
        };
    }
    if !converged || levels.iter().any(|c| !c.is_finite()) {
        return Err(Error::numerical(
            "lloyd_max_codebook",
            format!("no fixed point within {LLOYD_MAX_ITERS} iterations for b = {bits}"),
        ));
    }
    let thresholds = midpoints(&levels);
    let gamma = quantizer_mse(&levels, &thresholds);
    Ok(Quantizer {
        bits,
        levels,
        thresholds,
        gamma,
    })
}

/// `E[(x - Q(x))^2]` for a standard normal `x`.
fn quantizer_mse(levels: &[f64], thresholds: &[f64]) -> f64 {
    let captured: f64 = levels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let (a, b) = (thresholds[i], thresholds[i + 1]);
            2.0 * c * (pdf(a) - pdf(b)) - c * c * mass(a, b)
        })
        .sum();
    1.0 - captured
}

impl Quantizer {
    pub fn levels_count(&self) -> usize {
        self.levels.len()
    }

    /// Index of the cell containing `x`; inputs exactly on a threshold go to the
    /// upper cell.
    pub fn cell(&self, x: f64) -> usize {
        let finite = &self.thresholds[1..self.thresholds.len() - 1];
        finite.partition_point(|&t| t <= x)
    }

    pub fn quantize_real(&self, x: f64) -> f64 {
        self.levels[self.cell(x)]
    }

    /// Bussgang gain of this quantizer for a matched Gaussian input. With the
    /// centroid condition this equals `1 - gamma`.
    pub fn bussgang_gain(&self) -> f64 {
        1.0 - self.gamma
    }
}

/// Element-wise complex quantization with per-entry scaling of each real dimension.
pub fn quantize(x: &[C64], per_dim_scale: &[f64], q: &Quantizer) -> Result<Vec<C64>> {
    if x.len() != per_dim_scale.len() {
        return Err(Error::dims("quantize", format!("{} scales", x.len()), format!("{}", per_dim_scale.len())));
    }
    x.iter()
        .zip(per_dim_scale)
        .map(|(&z, &s)| {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Domain(format!("quantizer scale must be positive, got {s}")));
            }
            Ok(C64::new(q.quantize_real(z.re / s) * s, q.quantize_real(z.im / s) * s))
        })
        .collect()
}

/// Quantizes every column of `y` (one receive vector per column).
pub fn quantize_columns(y: &CMat, per_dim_scale: &[f64], q: &Quantizer) -> Result<CMat> {
    if y.nrows() != per_dim_scale.len() {
        return Err(Error::dims("quantize_columns", format!("{} scales", y.nrows()), format!("{}", per_dim_scale.len())));
    }
    if let Some(&s) = per_dim_scale.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::Domain(format!("quantizer scale must be positive, got {s}")));
    }
    Ok(CMat::from_fn(y.nrows(), y.ncols(), |i, j| {
        let s = per_dim_scale[i];
        let z = y[(i, j)];
        C64::new(q.quantize_real(z.re / s) * s, q.quantize_real(z.im / s) * s)
    }))
}

/// Diagonal Bussgang model `G = I - Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct BussgangModel {
    pub gain: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl BussgangModel {
    pub fn uniform(nr: usize, gamma: f64) -> Self {
        Self {
            gain: vec![1.0 - gamma; nr],
            gamma: vec![gamma; nr],
        }
    }

    /// Full-resolution receiver, `G = I`.
    pub fn identity(nr: usize) -> Self {
        Self::uniform(nr, 0.0)
    }

    pub fn nr(&self) -> usize {
        self.gain.len()
    }

    pub fn g_matrix(&self) -> CMat {
        crate::linalg::diag_from(&self.gain)
    }
}

/// Model used by the optimizers: identical `b`-bit ADCs with the fitted `gamma(b)`.
pub fn bussgang_model(cfg: &SystemConfig) -> Result<BussgangModel> {
    cfg.validate()?;
    Ok(BussgangModel::uniform(cfg.nr, distortion_factor(cfg.bits)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QdSource {
    Approximate,
    Empirical,
}

/// Covariance of the quantization distortion `eta`.
#[derive(Debug, Clone)]
pub struct QdCovariance {
    pub c_eta: CMat,
    pub source: QdSource,
    pub sample_count: usize,
}

/// Diagonal approximation `G (I - G) diag(C_y)`.
pub fn approximate_qd_covariance(h: &CMat, f: &CMat, g: &BussgangModel, sigma_n2: f64) -> Result<QdCovariance> {
    let cy = signal_covariance(h, f, sigma_n2)?;
    let n = cy.nrows();
    let c_eta = CMat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(g.gain[i] * (1.0 - g.gain[i]) * cy[(i, i)].re, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(QdCovariance {
        c_eta,
        source: QdSource::Approximate,
        sample_count: 0,
    })
}

/// Per-antenna gain control: the standard deviation of each real dimension of `y`.
pub fn agc_scales(h: &CMat, f: &CMat, sigma_n2: f64) -> Result<Vec<f64>> {
    let cy = signal_covariance(h, f, sigma_n2)?;
    Ok((0..cy.nrows()).map(|i| (cy[(i, i)].re / 2.0).sqrt()).collect())
}

/// Draws `n` received vectors `y = H F s + noise` as the columns of an `Nr x n` matrix.
pub fn draw_received<R: rand::Rng + ?Sized>(hf: &CMat, sigma_n2: f64, n: usize, rng: &mut R) -> CMat {
    let s = complex_normal_matrix(hf.ncols(), n, rng);
    let noise = complex_normal_matrix(hf.nrows(), n, rng).scale(sigma_n2.sqrt());
    hf * s + noise
}

/// Sample covariance of `eta = Q(y) - G y`.
///
/// `G` is the Bussgang gain of the codebook actually applied, `1 - q.gamma`, so
/// that `eta` is uncorrelated with `y`.
pub fn empirical_qd_covariance(
    h: &CMat,
    f: &CMat,
    q: &Quantizer,
    cfg: &SystemConfig,
    n_samples: usize,
    seed: u64,
) -> Result<QdCovariance> {
    if n_samples < MIN_QD_SAMPLES {
        return Err(Error::Config(format!(
            "empirical distortion covariance needs at least {MIN_QD_SAMPLES} samples, got {n_samples}"
        )));
    }
    if h.nrows() != cfg.nr || h.ncols() != f.nrows() {
        return Err(Error::dims(
            "empirical_qd_covariance",
            format!("H {}x{} and F {}x_", cfg.nr, f.nrows(), f.nrows()),
            format!("H {}x{}", h.nrows(), h.ncols()),
        ));
    }
    let scales = agc_scales(h, f, cfg.sigma_n2)?;
    let gain = q.bussgang_gain();
    let hf = h * f;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = CMat::zeros(cfg.nr, cfg.nr);
    let mut done = 0;
    while done < n_samples {
        let batch = QD_BATCH.min(n_samples - done);
        let y = draw_received(&hf, cfg.sigma_n2, batch, &mut rng);
        let z = quantize_columns(&y, &scales, q)?;
        let eta = z - y.scale(gain);
        acc += &eta * eta.adjoint();
        done += batch;
    }
    let c_eta = hermitian_part(&acc.scale(1.0 / n_samples as f64));
    Ok(QdCovariance {
        c_eta,
        source: QdSource::Empirical,
        sample_count: n_samples,
    })
}
