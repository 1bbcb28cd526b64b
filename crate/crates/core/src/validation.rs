//! Self-check suite run by `lrprecode validate`.
//!
//! Each check draws its own channels from a fixed seed, runs the library on them
//! and compares against the property it is supposed to satisfy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::digital::{mm_digital, waterfilling};
use crate::error::Result;
use crate::hybrid::mm_hybrid;
use crate::linalg::{frob2, CMat, C64};
use crate::metrics::{approx_se_nats, unquantized_se};
use crate::quantizer::{bussgang_model, lloyd_max_codebook, BussgangModel};
use crate::surrogate::{analog_gradient, build_state, hybrid_objective, surrogate_value_nats};
use crate::system::{complex_normal_matrix, generate_sv_channel, Architecture, ChannelParams, SystemConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn channels(cfg: &SystemConfig, n: usize, seed: u64) -> Result<Vec<CMat>> {
    let params = ChannelParams::default();
    (0..n as u64)
        .map(|k| generate_sv_channel(cfg, &params, seed.wrapping_add(k)).map(|c| c.h))
        .collect()
}

fn on_sphere(f: CMat, pt: f64) -> CMat {
    let s = (pt / frob2(&f)).sqrt();
    f.scale(s)
}

/// Runs every check on `n_channels` desk-scale channels.
pub fn run_validation(n_channels: usize, seed: u64) -> Result<Report> {
    let n = n_channels.max(1);
    let mut checks = Vec::new();

    let q = lloyd_max_codebook(1, 1e-10)?;
    let c1 = (2.0 / std::f64::consts::PI).sqrt();
    let err = (q.levels[1] - c1).abs().max((q.gamma - (1.0 - 2.0 / std::f64::consts::PI)).abs());
    checks.push(check("one-bit codebook", err <= 1e-6, format!("max error {err:.2e}")));

    let cfg = SystemConfig::desk();
    let g = bussgang_model(&cfg)?;
    let hs = channels(&cfg, n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gap, mut excess) = (0.0f64, f64::NEG_INFINITY);
    for h in &hs {
        let f_hat = on_sphere(complex_normal_matrix(cfg.nt, cfg.ns, &mut rng), cfg.pt);
        let st = build_state(h, &f_hat, &g, cfg.sigma_n2, None)?;
        gap = gap.max((surrogate_value_nats(&st, &f_hat)? - st.r_hat).abs());
        for _ in 0..20 {
            let f = on_sphere(complex_normal_matrix(cfg.nt, cfg.ns, &mut rng), cfg.pt);
            excess = excess.max(surrogate_value_nats(&st, &f)? - approx_se_nats(h, &f, &g, cfg.sigma_n2)?);
        }
    }
    checks.push(check("surrogate tightness", gap <= 1e-9, format!("max |g - R| {gap:.2e}")));
    checks.push(check("surrogate minorization", excess <= 1e-9, format!("max g - R {excess:.2e}")));

    let mut worst_drop = 0.0f64;
    let mut worst_power = 0.0f64;
    let mut worst_modulus = 0.0f64;
    let mut pc_leak = 0.0f64;
    for bits in [1, 3] {
        for arch in [Architecture::Digital, Architecture::FcHybrid, Architecture::PcHybrid] {
            let mut c = cfg.clone();
            c.bits = bits;
            c.architecture = arch;
            for h in &hs {
                let (trace, f) = if arch == Architecture::Digital {
                    let r = mm_digital(h, &c)?;
                    (r.se_trace, r.f)
                } else {
                    let r = mm_hybrid(h, &c)?;
                    let hp = &r.precoder;
                    for (m, z) in hp.mask.iter().zip(hp.f_rf.iter()) {
                        if *m {
                            worst_modulus = worst_modulus.max((z.norm() - 1.0).abs());
                        } else {
                            pc_leak = pc_leak.max(z.norm());
                        }
                    }
                    (r.se_trace, hp.precoder())
                };
                for w in trace.windows(2) {
                    worst_drop = worst_drop.max(w[0] - w[1]);
                }
                worst_power = worst_power.max(frob2(&f) / c.pt - 1.0);
            }
        }
    }
    checks.push(check("MM monotonicity", worst_drop <= 1e-9, format!("largest SE decrease {worst_drop:.2e}")));
    checks.push(check(
        "power feasibility",
        worst_power <= 1e-8,
        format!("largest relative excess {worst_power:.2e}"),
    ));
    checks.push(check(
        "analog feasibility",
        worst_modulus <= 1e-12 && pc_leak == 0.0,
        format!("modulus error {worst_modulus:.2e}, off-mask magnitude {pc_leak:.2e}"),
    ));

    let mut fd_err = 0.0f64;
    for h in hs.iter().take(3) {
        let mut c = cfg.clone();
        c.architecture = Architecture::FcHybrid;
        let f_rf = complex_normal_matrix(c.nt, c.nrf, &mut rng);
        let f_bb = complex_normal_matrix(c.nrf, c.ns, &mut rng).scale(0.1);
        let st = build_state(h, &(&f_rf * &f_bb), &g, c.sigma_n2, None)?;
        let grad = analog_gradient(&st, &f_rf, &f_bb);
        let dir = complex_normal_matrix(c.nt, c.nrf, &mut rng);
        let t = 1e-6;
        let fp = hybrid_objective(&st, &(&f_rf + dir.scale(t)), &f_bb);
        let fm = hybrid_objective(&st, &(&f_rf - dir.scale(t)), &f_bb);
        let fd = (fp - fm) / (2.0 * t);
        let an = crate::linalg::re_trace_prod(&grad.adjoint(), &dir);
        fd_err = fd_err.max((fd - an).abs() / an.abs().max(1e-12));
    }
    checks.push(check("analog gradient", fd_err <= 1e-5, format!("max relative error {fd_err:.2e}")));

    let mut c = cfg.clone();
    c.bits = 12;
    let g12 = bussgang_model(&c)?;
    let mut worst_rel = 0.0f64;
    for h in &hs {
        let wf = waterfilling(h, c.pt, c.sigma_n2, c.ns)?;
        let r_wf = approx_se_nats(h, &wf, &g12, c.sigma_n2)?;
        let r_mm = approx_se_nats(h, &mm_digital(h, &c)?.f, &g12, c.sigma_n2)?;
        worst_rel = worst_rel.max((r_mm - r_wf).abs() / r_wf);
        let closed = unquantized_se(h, &wf, c.sigma_n2)?;
        let via_model = approx_se_nats(h, &wf, &BussgangModel::identity(c.nr), c.sigma_n2)? / std::f64::consts::LN_2;
        worst_rel = worst_rel.max((closed - via_model).abs() / closed);
    }
    checks.push(check(
        "full-resolution limit",
        worst_rel <= 5e-3,
        format!("largest relative gap to water-filling {worst_rel:.2e}"),
    ));

    let zero = CMat::from_element(cfg.nt, cfg.ns, C64::new(0.0, 0.0));
    let r0 = approx_se_nats(&hs[0], &zero, &g, cfg.sigma_n2)?;
    checks.push(check("zero precoder", r0 == 0.0, format!("R(0) = {r0}")));

    Ok(Report { checks })
}
