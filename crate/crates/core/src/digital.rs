//! Water-filling and the MM power-allocation iteration for fully digital precoding.

use crate::error::{Error, Result};
use crate::linalg::{scale_cols, CMat};
use crate::metrics::approx_se_nats;
use crate::quantizer::bussgang_model;
use crate::surrogate::{build_state, SurrogateState};
use crate::system::{svd_basis_of, PowerUpdate, SvdBasis, SystemConfig};

const BISECTION_CAP: usize = 200;
const BRACKET_GROWTH_CAP: u32 = 16;
const DENOM_FLOOR: f64 = 1e-12;

/// Classic water-filling over per-stream gains `s_i^2 / sigma_n2`.
pub fn waterfilling_powers(singular_values: &[f64], pt: f64, sigma_n2: f64) -> Vec<f64> {
    let inv_gain: Vec<f64> = singular_values
        .iter()
        .map(|s| if *s > 0.0 { sigma_n2 / (s * s) } else { f64::INFINITY })
        .collect();
    let mut order: Vec<usize> = (0..inv_gain.len()).collect();
    order.sort_by(|&a, &b| inv_gain[a].total_cmp(&inv_gain[b]));
    let mut p = vec![0.0; inv_gain.len()];
    for active in (1..=order.len()).rev() {
        let weakest = inv_gain[order[active - 1]];
        if !weakest.is_finite() {
            continue;
        }
        let level = (pt + order[..active].iter().map(|&i| inv_gain[i]).sum::<f64>()) / active as f64;
        if level > weakest {
            for &i in &order[..active] {
                p[i] = level - inv_gain[i];
            }
            break;
        }
    }
    p
}

/// `F = V diag(p)^(1/2)`.
pub fn precoder_from_powers(v: &CMat, p: &[f64]) -> CMat {
    let amp: Vec<f64> = p.iter().map(|x| x.max(0.0).sqrt()).collect();
    scale_cols(v, &amp)
}

/// Water-filling precoder on an existing basis; returns `(F_WF, p_wf)`.
pub fn waterfilling_from_basis(basis: &SvdBasis, pt: f64, sigma_n2: f64) -> Result<(CMat, Vec<f64>)> {
    let ns = basis.v.ncols();
    let sv = &basis.singular_values[..ns.min(basis.singular_values.len())];
    if sv.iter().all(|s| *s <= 0.0) {
        return Err(Error::numerical("waterfilling", "all singular values are zero (degenerate channel)"));
    }
    let mut p = waterfilling_powers(sv, pt, sigma_n2);
    p.resize(ns, 0.0);
    Ok((precoder_from_powers(&basis.v, &p), p))
}

pub fn waterfilling(h: &CMat, pt: f64, sigma_n2: f64, ns: usize) -> Result<CMat> {
    let basis = svd_basis_of(h, ns, ns, None)?;
    Ok(waterfilling_from_basis(&basis, pt, sigma_n2)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
    /// Lagrange multiplier; zero when the budget is not binding for the subproblem.
    pub mu: f64,
}

fn powers_at(numer: &[f64], j_diag: &[f64], mu: f64, rule: PowerUpdate) -> Vec<f64> {
    numer
        .iter()
        .zip(j_diag)
        .map(|(&a, &j)| {
            let d = (j + mu).max(DENOM_FLOOR);
            match rule {
                PowerUpdate::Printed => (a / d).sqrt(),
                PowerUpdate::Stationarity => (a / d).powi(2),
            }
        })
        .collect()
}

/// Solves the per-iteration power-allocation subproblem with a bisection on `mu`.
///
/// The bracket starts at the `J_hat = 0` value of `mu` and is doubled (up to
/// `2^16` times) while the total power still exceeds `Pt`. When the unconstrained
/// stationary point already fits the budget it is returned with `mu = 0`.
pub fn power_step(state: &SurrogateState, pt: f64, tol: f64, rule: PowerUpdate) -> Result<PowerAllocation> {
    let terms = state
        .power
        .as_ref()
        .ok_or_else(|| Error::Config("surrogate state was built without power-allocation terms".into()))?;
    let ns = terms.p_hat.len();
    let j_diag: Vec<f64> = (0..ns).map(|i| terms.j_hat[(i, i)].re).collect();
    let numer: Vec<f64> = match rule {
        PowerUpdate::Printed => (0..ns).map(|i| terms.k_hat[(i, i)].re.max(0.0)).collect(),
        PowerUpdate::Stationarity => terms.k_lin.iter().map(|k| k.max(0.0)).collect(),
    };
    if numer.iter().all(|a| *a == 0.0) {
        return Err(Error::numerical("power_step", "all stream coefficients vanish"));
    }
    let total = |mu: f64| powers_at(&numer, &j_diag, mu, rule).iter().sum::<f64>();

    if j_diag.iter().all(|j| *j > DENOM_FLOOR) && total(0.0) <= pt {
        return Ok(PowerAllocation {
            p: powers_at(&numer, &j_diag, 0.0, rule),
            mu: 0.0,
        });
    }

    let norm = numer.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mu_ub = norm / pt.sqrt();
    let mut hi = mu_ub;
    let mut grown = 0;
    while total(hi) > pt {
        if grown == BRACKET_GROWTH_CAP {
            return Err(Error::numerical(
                "power_step",
                format!("root not bracketed in (0, {hi:e}] after {grown} doublings"),
            ));
        }
        hi *= 2.0;
        grown += 1;
    }
    let mut lo = 0.0;
    let mut mu = hi;
    let mut converged = (total(hi) - pt).abs() <= tol * pt;
    for _ in 0..BISECTION_CAP {
        if converged {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket collapsed to adjacent floats
            mu = hi;
            converged = (total(hi) - pt).abs() <= 1e-8 * pt;
            break;
        }
        let s = total(mid);
        if (s - pt).abs() <= tol * pt {
            mu = mid;
            converged = true;
        } else if s > pt {
            lo = mid;
        } else {
            hi = mid;
            mu = hi;
        }
    }
    if !converged {
        return Err(Error::numerical(
            "power_step",
            format!("bisection on mu did not converge, bracket [{lo:e}, {hi:e}]"),
        ));
    }
    let mut p = powers_at(&numer, &j_diag, mu, rule);
    let s: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x *= pt / s;
    }
    Ok(PowerAllocation { p, mu })
}

#[derive(Debug, Clone)]
pub struct DigitalResult {
    pub f: CMat,
    pub p: Vec<f64>,
    /// Quantization-aware SE (diagonal distortion model) per iterate, bits/s/Hz,
    /// starting with the initial point.
    pub se_trace: Vec<f64>,
    pub iterations: usize,
    pub mu: f64,
}

/// MM digital precoding: `F = V diag(p)^(1/2)` with `p` refined by repeated
/// power steps from the water-filling start until the SE changes by at most
/// `cfg.epsilon`.
pub fn mm_digital(h: &CMat, cfg: &SystemConfig) -> Result<DigitalResult> {
    cfg.validate()?;
    let g = bussgang_model(cfg)?;
    let basis = svd_basis_of(h, cfg.ns, cfg.ns, None)?;
    let (_, mut p) = waterfilling_from_basis(&basis, cfg.pt, cfg.sigma_n2)?;
    let v = &basis.v;
    let ln2 = std::f64::consts::LN_2;

    let mut r_prev = approx_se_nats(h, &precoder_from_powers(v, &p), &g, cfg.sigma_n2)?;
    let mut trace = vec![r_prev / ln2];
    let mut mu = 0.0;
    let mut iterations = 0;
    for k in 1..=cfg.max_outer_iters {
        let f_hat = precoder_from_powers(v, &p);
        let at_iter = |e: Error| Error::numerical("mm_digital", format!("outer iteration {k}: {e}"));
        let state = build_state(h, &f_hat, &g, cfg.sigma_n2, Some((v, &p))).map_err(at_iter)?;
        let alloc = power_step(&state, cfg.pt, cfg.bisection_tol, cfg.power_update).map_err(at_iter)?;
        let mut next = alloc.p;
        // R is nondecreasing in a common power scale, so an interior solution is
        // lifted to the full budget.
        let s: f64 = next.iter().sum();
        if s < cfg.pt && s > 0.0 {
            next.iter_mut().for_each(|x| *x *= cfg.pt / s);
        }
        p = next;
        mu = alloc.mu;
        iterations = k;
        let r = approx_se_nats(h, &precoder_from_powers(v, &p), &g, cfg.sigma_n2).map_err(at_iter)?;
        trace.push(r / ln2);
        let done = ((r - r_prev) / ln2).abs() <= cfg.epsilon;
        r_prev = r;
        if done {
            break;
        }
    }
    Ok(DigitalResult {
        f: precoder_from_powers(v, &p),
        p,
        se_trace: trace,
        iterations,
        mu,
    })
}
