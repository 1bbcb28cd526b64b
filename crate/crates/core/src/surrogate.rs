//! Minorizer of the quantization-aware SE around a frozen precoder `F_hat`.
//!
//! With `X = G H F` and `C_e(F)` from the diagonal distortion model,
//!
//! ```text
//! g(F, F_hat) = R(F_hat) - tr(X_hat^H C_hat^-1 X_hat) + 2 Re tr(X_hat^H C_hat^-1 X)
//!               - tr(S_hat (C_e(F) + X X^H))
//! S_hat       = C_hat^-1 - (C_hat + X_hat X_hat^H)^-1
//! ```
//!
//! satisfies `g(F, F_hat) <= R(F)` with equality at `F = F_hat`. Because `C_e(F)`
//! only enters through its diagonal, `g = const - f(F)` where
//! `f(F) = tr(L_hat F F^H) - 2 Re tr(D_hat F)`.
//!
//! All quantities are carried in nats; `surrogate_value` converts to bits.

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, hermitian_part, inv_hpd, re_trace_prod, scale_cols, scale_rows, CMat, C64,
};
use crate::metrics::effective_noise_cov_approx;
use crate::quantizer::BussgangModel;

/// Per-stream coefficients of the digital power-allocation subproblem.
#[derive(Debug, Clone)]
pub struct PowerTerms {
    pub v: CMat,
    pub p_hat: Vec<f64>,
    /// `V^H L_hat V`.
    pub j_hat: CMat,
    /// `diag(p_hat) V^H H^H G C_hat^-1 G H V diag(p_hat)`.
    pub k_hat: CMat,
    /// `Re (D_hat V)_ii`, the coefficient of `sqrt(p_i)` in the surrogate.
    pub k_lin: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SurrogateState {
    pub h: CMat,
    pub g: BussgangModel,
    pub sigma_n2: f64,
    pub f_hat: CMat,
    pub x_hat: CMat,
    pub c_e_hat: CMat,
    pub c_e_hat_inv: CMat,
    pub s_hat: CMat,
    /// `R(F_hat)` in nats.
    pub r_hat: f64,
    pub l_hat: CMat,
    pub d_hat: CMat,
    pub power: Option<PowerTerms>,
    /// `tr(X_hat^H C_hat^-1 X_hat)`.
    quad_hat: f64,
    /// `g = offset - f`.
    offset: f64,
}

/// Builds the frozen MM quantities at `f_hat`. Passing `(V, p_hat)` also fills the
/// digital power-allocation coefficients.
pub fn build_state(
    h: &CMat,
    f_hat: &CMat,
    g: &BussgangModel,
    sigma_n2: f64,
    power: Option<(&CMat, &[f64])>,
) -> Result<SurrogateState> {
    let (nr, nt) = h.shape();
    if f_hat.nrows() != nt || g.nr() != nr {
        return Err(Error::dims(
            "build_state",
            format!("F_hat with {nt} rows and G of size {nr}"),
            format!("{} rows, G {}", f_hat.nrows(), g.nr()),
        ));
    }
    let gh = scale_rows(&g.gain, h);
    let x_hat = &gh * f_hat;
    let c_e_hat = effective_noise_cov_approx(h, f_hat, g, sigma_n2)?.c_e;
    let c_inv = inv_hpd(&c_e_hat, "build_state")?;

    // S_hat via Woodbury: C^-1 X (I + X^H C^-1 X)^-1 X^H C^-1, PSD by construction
    let cinv_x = &c_inv * &x_hat;
    let mut w = x_hat.adjoint() * &cinv_x;
    let quad_hat: f64 = (0..w.nrows()).map(|i| w[(i, i)].re).sum();
    for i in 0..w.nrows() {
        w[(i, i)] += C64::new(1.0, 0.0);
    }
    let w_chol = cholesky(&w, "build_state")?;
    let r_hat = w_chol.ln_det().max(0.0);
    let s_hat = hermitian_part(&(&cinv_x * w_chol.solve(&cinv_x.adjoint())));

    // L_hat = H^H (diag(S) G (I - G) + G S G) H
    let dq: Vec<f64> = (0..nr).map(|i| s_hat[(i, i)].re * g.gain[i] * (1.0 - g.gain[i])).collect();
    let l_hat = hermitian_part(&(gh.adjoint() * &s_hat * &gh + h.adjoint() * scale_rows(&dq, h)));
    let d_hat = cinv_x.adjoint() * &gh;

    let s_g: f64 = (0..nr).map(|i| s_hat[(i, i)].re * g.gain[i]).sum();
    let offset = r_hat - quad_hat - sigma_n2 * s_g;

    let power = match power {
        None => None,
        Some((v, p_hat)) => {
            if v.nrows() != nt || v.ncols() != p_hat.len() {
                return Err(Error::dims(
                    "build_state",
                    format!("V {nt}x{}", p_hat.len()),
                    format!("{}x{}", v.nrows(), v.ncols()),
                ));
            }
            let ghv = &gh * v;
            let a = ghv.adjoint() * &c_inv * &ghv;
            let j_hat = hermitian_part(&(v.adjoint() * &l_hat * v));
            let k_hat = hermitian_part(&scale_cols(&scale_rows(p_hat, &a), p_hat));
            let dv = &d_hat * v;
            let k_lin = (0..p_hat.len()).map(|i| dv[(i, i)].re).collect();
            Some(PowerTerms {
                v: v.clone(),
                p_hat: p_hat.to_vec(),
                j_hat,
                k_hat,
                k_lin,
            })
        }
    };

    Ok(SurrogateState {
        h: h.clone(),
        g: g.clone(),
        sigma_n2,
        f_hat: f_hat.clone(),
        x_hat,
        c_e_hat,
        c_e_hat_inv: c_inv,
        s_hat,
        r_hat,
        l_hat,
        d_hat,
        power,
        quad_hat,
        offset,
    })
}

impl SurrogateState {
    pub fn r_hat_bits(&self) -> f64 {
        self.r_hat / std::f64::consts::LN_2
    }

    /// `f(F) = tr(L_hat F F^H) - 2 Re tr(D_hat F)`.
    pub fn objective(&self, f: &CMat) -> f64 {
        let lf = &self.l_hat * f;
        re_trace_prod(&f.adjoint(), &lf) - 2.0 * re_trace_prod(&self.d_hat, f)
    }

    /// `g(F, F_hat)` in nats, through `g = offset - f`.
    pub fn surrogate_from_objective(&self, f: &CMat) -> f64 {
        self.offset - self.objective(f)
    }
}

/// `g(F, F_hat)` in nats, evaluated term by term.
pub fn surrogate_value_nats(state: &SurrogateState, f: &CMat) -> Result<f64> {
    if f.nrows() != state.h.ncols() {
        return Err(Error::dims("surrogate_value", format!("{} rows", state.h.ncols()), format!("{}", f.nrows())));
    }
    let x = scale_rows(&state.g.gain, &(&state.h * f));
    let c_e = effective_noise_cov_approx(&state.h, f, &state.g, state.sigma_n2)?.c_e;
    let cross = re_trace_prod(&(state.x_hat.adjoint() * &state.c_e_hat_inv), &x);
    let penalty = re_trace_prod(&state.s_hat, &(c_e + &x * x.adjoint()));
    Ok(state.r_hat - state.quad_hat + 2.0 * cross - penalty)
}

/// `g(F, F_hat)` in bits/s/Hz.
pub fn surrogate_value(state: &SurrogateState, f: &CMat) -> Result<f64> {
    Ok(surrogate_value_nats(state, f)? / std::f64::consts::LN_2)
}

/// `f(F_RF, F_BB)`; minimizing it maximizes the surrogate over `F = F_RF F_BB`.
pub fn hybrid_objective(state: &SurrogateState, f_rf: &CMat, f_bb: &CMat) -> f64 {
    state.objective(&(f_rf * f_bb))
}

/// `2 (L_hat F_RF F_BB - D_hat^H) F_BB^H`. For a perturbation `dF_RF`,
/// `df = Re tr(grad^H dF_RF)`.
pub fn analog_gradient(state: &SurrogateState, f_rf: &CMat, f_bb: &CMat) -> CMat {
    ((&state.l_hat * f_rf * f_bb - state.d_hat.adjoint()) * f_bb.adjoint()).scale(2.0)
}

/// `2 F_RF^H (L_hat F_RF F_BB - D_hat^H)`.
pub fn baseband_gradient(state: &SurrogateState, f_rf: &CMat, f_bb: &CMat) -> CMat {
    (f_rf.adjoint() * (&state.l_hat * f_rf * f_bb - state.d_hat.adjoint())).scale(2.0)
}
