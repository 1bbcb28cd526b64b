//! Alternating analog/digital optimization for fully and partially connected
//! hybrid precoders.
//!
//! Each outer iteration freezes the surrogate at the current `F = F_RF F_BB`. The
//! inner loop takes projected normalized-gradient steps on `F_RF` followed by the
//! closed-form `F_BB` that minimizes `f` under the power budget.

use nalgebra::DMatrix;

use crate::digital::waterfilling_from_basis;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, frob2, hermitian_part, CMat, HermitianCholesky, C64};
use crate::metrics::approx_se_nats;
use crate::quantizer::bussgang_model;
use crate::surrogate::{analog_gradient, build_state, hybrid_objective, SurrogateState};
use crate::system::{svd_basis_of, Architecture, SystemConfig};

const BETA_FLOOR: f64 = 1e-8;
const BISECTION_CAP: usize = 200;
const BRACKET_GROWTH_CAP: u32 = 16;
const INNER_REL_DECREASE: f64 = 1e-6;

/// Antenna-to-chain connectivity `W`: all ones for FC, block diagonal with
/// `M = Nt / Nrf` rows per chain for PC.
pub fn connectivity_mask(nt: usize, nrf: usize, architecture: Architecture) -> DMatrix<bool> {
    match architecture {
        Architecture::PcHybrid => {
            let m = nt / nrf;
            DMatrix::from_fn(nt, nrf, |i, j| i / m == j)
        }
        _ => DMatrix::from_element(nt, nrf, true),
    }
}

#[derive(Debug, Clone)]
pub struct HybridPrecoder {
    pub f_rf: CMat,
    pub f_bb: CMat,
    pub mask: DMatrix<bool>,
    pub architecture: Architecture,
}

impl HybridPrecoder {
    pub fn precoder(&self) -> CMat {
        &self.f_rf * &self.f_bb
    }

    /// Unit modulus on the mask (within `tol`) and exact zeros off it.
    pub fn is_feasible_analog(&self, tol: f64) -> bool {
        self.f_rf
            .iter()
            .zip(self.mask.iter())
            .all(|(z, &on)| if on { (z.norm() - 1.0).abs() <= tol } else { *z == C64::new(0.0, 0.0) })
    }
}

/// `W .* exp(j angle(F_RF))`, with `angle(0) = 0`.
pub fn project_analog(f_rf: &CMat, mask: &DMatrix<bool>) -> CMat {
    CMat::from_fn(f_rf.nrows(), f_rf.ncols(), |i, j| {
        if !mask[(i, j)] {
            return C64::new(0.0, 0.0);
        }
        let z = f_rf[(i, j)];
        if z == C64::new(0.0, 0.0) {
            C64::new(1.0, 0.0)
        } else if (z.norm_sqr() - 1.0).abs() <= 4.0 * f64::EPSILON {
            // already on the circle; re-deriving the phase would only add rounding
            z
        } else {
            C64::from_polar(1.0, z.arg())
        }
    })
}

fn masked(m: &CMat, mask: &DMatrix<bool>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| if mask[(i, j)] { m[(i, j)] } else { C64::new(0.0, 0.0) })
}

/// `pgd_iters` projected steps along the normalized (masked) gradient. Each step
/// backtracks `beta` from 1 by halving until `f` does not increase, and stays put
/// once `beta` falls below `1e-8`.
pub fn pgd_analog_step(state: &SurrogateState, hp: &HybridPrecoder, pgd_iters: usize) -> HybridPrecoder {
    let mut f_rf = hp.f_rf.clone();
    for _ in 0..pgd_iters {
        let grad = masked(&analog_gradient(state, &f_rf, &hp.f_bb), &hp.mask);
        let norm = frob2(&grad).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let f0 = hybrid_objective(state, &f_rf, &hp.f_bb);
        let dir = grad.scale(1.0 / norm);
        let mut beta = 1.0;
        let mut moved = false;
        while beta >= BETA_FLOOR {
            let cand = project_analog(&(&f_rf - dir.scale(beta)), &hp.mask);
            if hybrid_objective(state, &cand, &hp.f_bb) <= f0 {
                f_rf = cand;
                moved = true;
                break;
            }
            beta *= 0.5;
        }
        if !moved {
            break;
        }
    }
    HybridPrecoder {
        f_rf,
        ..hp.clone()
    }
}

fn bb_power(p: &CMat, f_bb: &CMat) -> f64 {
    crate::linalg::re_trace_prod(&f_bb.adjoint(), &(p * f_bb))
}

/// Closed-form baseband update
/// `F_BB = (F_RF^H L F_RF + lambda F_RF^H F_RF)^-1 F_RF^H D^H`,
/// with `lambda = 0` if that already satisfies the budget and otherwise a
/// bisection over `(0, lambda_ub]` until the power matches `Pt` within `tol`.
/// Returns `(F_BB, lambda)`.
pub fn digital_step(state: &SurrogateState, f_rf: &CMat, pt: f64, tol: f64) -> Result<(CMat, f64)> {
    let q = hermitian_part(&(f_rf.adjoint() * &state.l_hat * f_rf));
    let p = hermitian_part(&(f_rf.adjoint() * f_rf));
    let z = f_rf.adjoint() * state.d_hat.adjoint();
    let nrf = f_rf.ncols();
    if frob2(&z) == 0.0 {
        return Ok((CMat::zeros(nrf, z.ncols()), 0.0));
    }

    if let Some(ch) = HermitianCholesky::new(&q) {
        let b = ch.solve(&z);
        let pw = bb_power(&p, &b);
        if pw.is_finite() && pw <= pt {
            return Ok((b, 0.0));
        }
    }

    let p_chol = cholesky(&p, "digital_step")
        .map_err(|_| Error::numerical("digital_step", "F_RF^H F_RF is singular"))?;
    let whitened = p_chol.solve_lower(&z);
    let lambda_ub = frob2(&whitened).sqrt() / pt.sqrt();

    let solve = |lambda: f64| -> Result<(CMat, f64)> {
        let ch = cholesky(&(&q + p.scale(lambda)), "digital_step")?;
        let b = ch.solve(&z);
        let pw = bb_power(&p, &b);
        Ok((b, pw))
    };

    let mut hi = lambda_ub;
    let mut grown = 0;
    let mut hi_sol = solve(hi)?;
    while hi_sol.1 > pt {
        if grown == BRACKET_GROWTH_CAP {
            return Err(Error::numerical(
                "digital_step",
                format!("power root not bracketed in (0, {hi:e}] after {grown} doublings"),
            ));
        }
        hi *= 2.0;
        grown += 1;
        hi_sol = solve(hi)?;
    }
    let mut lo = 0.0;
    let mut lambda = hi;
    let mut best = hi_sol;
    let mut converged = (best.1 - pt).abs() <= tol * pt;
    for _ in 0..BISECTION_CAP {
        if converged {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            converged = (best.1 - pt).abs() <= 1e-8 * pt;
            break;
        }
        let sol = solve(mid)?;
        if (sol.1 - pt).abs() <= tol * pt {
            lambda = mid;
            best = sol;
            converged = true;
        } else if sol.1 > pt {
            lo = mid;
        } else {
            hi = mid;
            lambda = mid;
            best = sol;
        }
    }
    if !converged {
        return Err(Error::numerical(
            "digital_step",
            format!("bisection on lambda did not converge, bracket [{lo:e}, {hi:e}]"),
        ));
    }
    let (b, pw) = best;
    Ok((b.scale((pt / pw).sqrt()), lambda))
}

#[derive(Debug, Clone)]
pub struct HybridResult {
    pub precoder: HybridPrecoder,
    /// Quantization-aware SE (diagonal distortion model) per outer iterate, bits/s/Hz,
    /// starting with the initial point.
    pub se_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations_total: usize,
    pub lambda: f64,
}

/// Feasible starting point: `F_RF = Proj(W .* V_tilde)`, `F_BB = F_RF^+ F_WF`,
/// scaled down onto the power sphere if needed.
pub fn initial_hybrid(h: &CMat, cfg: &SystemConfig) -> Result<HybridPrecoder> {
    let basis = svd_basis_of(h, cfg.ns, cfg.nrf, None)?;
    let (f_wf, _) = waterfilling_from_basis(&basis, cfg.pt, cfg.sigma_n2)?;
    let mask = connectivity_mask(cfg.nt, cfg.nrf, cfg.architecture);
    let f_rf = project_analog(&basis.v_tilde, &mask);
    let pinv = f_rf
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::numerical("initial_hybrid", e.to_string()))?;
    let mut f_bb = pinv * f_wf;
    let power = frob2(&(&f_rf * &f_bb));
    if power > cfg.pt {
        f_bb = f_bb.scale((cfg.pt / power).sqrt());
    }
    Ok(HybridPrecoder {
        f_rf,
        f_bb,
        mask,
        architecture: cfg.architecture,
    })
}

/// MM hybrid precoding for `cfg.architecture` in {fc-hybrid, pc-hybrid}.
pub fn mm_hybrid(h: &CMat, cfg: &SystemConfig) -> Result<HybridResult> {
    cfg.validate()?;
    if !cfg.architecture.is_hybrid() {
        return Err(Error::Config("mm_hybrid needs a hybrid architecture".into()));
    }
    let g = bussgang_model(cfg)?;
    let mut hp = initial_hybrid(h, cfg)?;
    let ln2 = std::f64::consts::LN_2;

    let mut r_prev = approx_se_nats(h, &hp.precoder(), &g, cfg.sigma_n2)?;
    let mut trace = vec![r_prev / ln2];
    let mut outer = 0;
    let mut inner_total = 0;
    let mut lambda = 0.0;
    for k in 1..=cfg.max_outer_iters {
        let at_iter = |e: Error| Error::numerical("mm_hybrid", format!("outer iteration {k}: {e}"));
        let state = build_state(h, &hp.precoder(), &g, cfg.sigma_n2, None).map_err(at_iter)?;
        let mut f_cur = hybrid_objective(&state, &hp.f_rf, &hp.f_bb);
        for _ in 0..cfg.inner_iters {
            inner_total += 1;
            let stepped = pgd_analog_step(&state, &hp, cfg.pgd_iters);
            let (f_bb, lam) = digital_step(&state, &stepped.f_rf, cfg.pt, cfg.bisection_tol).map_err(at_iter)?;
            let mut f_new = hybrid_objective(&state, &stepped.f_rf, &f_bb);
            let mut accepted = None;
            if f_new <= f_cur {
                accepted = Some((stepped.f_rf, f_bb, lam));
            } else {
                // the analog step can make the old F_BB infeasible; re-solve the
                // baseband problem on the unchanged analog precoder instead
                let (f_bb, lam) = digital_step(&state, &hp.f_rf, cfg.pt, cfg.bisection_tol).map_err(at_iter)?;
                let f_alt = hybrid_objective(&state, &hp.f_rf, &f_bb);
                if f_alt <= f_cur {
                    f_new = f_alt;
                    accepted = Some((hp.f_rf.clone(), f_bb, lam));
                }
            }
            let Some((f_rf, f_bb, lam)) = accepted else { break };
            hp.f_rf = f_rf;
            hp.f_bb = f_bb;
            lambda = lam;
            let rel = (f_cur - f_new) / f_cur.abs().max(f64::MIN_POSITIVE);
            f_cur = f_new;
            if rel < INNER_REL_DECREASE {
                break;
            }
        }
        outer = k;
        let r = approx_se_nats(h, &hp.precoder(), &g, cfg.sigma_n2).map_err(at_iter)?;
        trace.push(r / ln2);
        let done = ((r - r_prev) / ln2).abs() <= cfg.epsilon;
        r_prev = r;
        if done {
            break;
        }
    }
    Ok(HybridResult {
        precoder: hp,
        se_trace: trace,
        outer_iterations: outer,
        inner_iterations_total: inner_total,
        lambda,
    })
}
