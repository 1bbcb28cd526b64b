use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::{channel_seed, derive_seed, AggregateRow, Axis, Scheme, SweepSpec};
use crate::digital::{mm_digital, waterfilling};
use crate::error::{Error, Result};
use crate::hybrid::mm_hybrid;
use crate::linalg::CMat;
use crate::metrics::{effective_noise_from_qd, energy_efficiency, spectral_efficiency, unquantized_se};
use crate::quantizer::{empirical_qd_covariance, lloyd_max_codebook, BussgangModel, Quantizer};
use crate::system::{degrade_csi, generate_sv_channel, SystemConfig};

pub(super) const PURPOSE_CHANNEL: u64 = 1;
const PURPOSE_CSI: u64 = 2;
const PURPOSE_QD: u64 = 3;
const CODEBOOK_TOL: f64 = 1e-10;

/// One scheme evaluated on one channel at one axis value.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub axis_value: f64,
    pub channel: usize,
    pub ok: bool,
    /// Reported SE in bits/s/Hz (empirical distortion covariance, true channel).
    pub se_bits: f64,
    /// Energy efficiency in bits/Hz/J.
    pub ee: f64,
    pub iterations: usize,
    pub ms: Option<f64>,
    /// Objective trace of the optimizer (diagonal distortion model, estimated channel).
    pub trace: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Ordered by channel, then axis value, then scheme.
    pub records: Vec<RunRecord>,
    /// One row per scheme and axis value, schemes in spec order.
    pub rows: Vec<AggregateRow>,
}

struct Outcome {
    se_bits: f64,
    iterations: usize,
    ms: f64,
    trace: Vec<f64>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, true)
}

/// `parallel = false` runs channels in order on the calling thread; the result is
/// identical either way.
pub fn run_sweep_with(spec: &SweepSpec, parallel: bool) -> Result<SweepResult> {
    spec.validate()?;
    let mut codebooks = BTreeMap::new();
    for &s in &spec.schemes {
        for &v in &spec.values {
            let bits = spec.config_for(s, v)?.bits;
            if let std::collections::btree_map::Entry::Vacant(e) = codebooks.entry(bits) {
                e.insert(lloyd_max_codebook(bits, CODEBOOK_TOL)?);
            }
        }
    }
    let per_channel: Vec<Vec<RunRecord>> = if parallel {
        (0..spec.n_channels)
            .into_par_iter()
            .map(|c| run_channel(spec, &codebooks, c))
            .collect()
    } else {
        (0..spec.n_channels).map(|c| run_channel(spec, &codebooks, c)).collect()
    };
    let records: Vec<RunRecord> = per_channel.into_iter().flatten().collect();
    let rows = aggregate(spec, &records);
    Ok(SweepResult {
        spec: spec.clone(),
        records,
        rows,
    })
}

fn run_channel(spec: &SweepSpec, codebooks: &BTreeMap<u32, Quantizer>, c: usize) -> Vec<RunRecord> {
    let ch_seed = channel_seed(spec.seed, c);
    let channel = generate_sv_channel(&spec.base, &spec.channel, ch_seed);
    let mut out = Vec::with_capacity(spec.values.len() * spec.schemes.len());
    for (vi, &value) in spec.values.iter().enumerate() {
        for &scheme in &spec.schemes {
            let res = channel
                .as_ref()
                .map_err(|e| Error::numerical("generate_sv_channel", e.to_string())).and_then(|ch| {
                let h_est = match spec.axis {
                    // the same error matrix is reused across xi values
                    Axis::Xi => degrade_csi(ch, value, derive_seed(spec.seed, c as u64, PURPOSE_CSI, 0))?.h,
                    _ => ch.h.clone(),
                };
                let cfg = spec.config_for(scheme, value)?;
                let qd_seed = derive_seed(spec.seed, c as u64, PURPOSE_QD, vi as u64);
                run_one(spec, &cfg, scheme, &ch.h, &h_est, &codebooks[&cfg.bits], qd_seed)
                    .map(|o| (o, cfg))
            });
            out.push(match res {
                Ok((o, cfg)) => RunRecord {
                    scheme,
                    axis_value: value,
                    channel: c,
                    ok: true,
                    se_bits: o.se_bits,
                    ee: energy_efficiency(o.se_bits, &cfg, &spec.power),
                    iterations: o.iterations,
                    ms: spec.timing.then_some(o.ms),
                    trace: o.trace,
                    error: None,
                },
                Err(e) => RunRecord {
                    scheme,
                    axis_value: value,
                    channel: c,
                    ok: false,
                    se_bits: f64::NAN,
                    ee: f64::NAN,
                    iterations: 0,
                    ms: None,
                    trace: Vec::new(),
                    error: Some(e.to_string()),
                },
            });
        }
    }
    out
}

fn run_one(
    spec: &SweepSpec,
    cfg: &SystemConfig,
    scheme: Scheme,
    h: &CMat,
    h_est: &CMat,
    q: &Quantizer,
    qd_seed: u64,
) -> Result<Outcome> {
    let start = Instant::now();
    let (f, iterations, trace) = match scheme {
        Scheme::DbfProposed => {
            let r = mm_digital(h_est, cfg)?;
            (r.f, r.iterations, r.se_trace)
        }
        Scheme::FcProposed | Scheme::PcProposed => {
            let r = mm_hybrid(h_est, cfg)?;
            (r.precoder.precoder(), r.outer_iterations, r.se_trace)
        }
        Scheme::DbfWf | Scheme::UnquantizedWf => (waterfilling(h_est, cfg.pt, cfg.sigma_n2, cfg.ns)?, 0, Vec::new()),
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let se_bits = if scheme == Scheme::UnquantizedWf {
        unquantized_se(h, &f, cfg.sigma_n2)?
    } else {
        let g = BussgangModel::uniform(cfg.nr, q.gamma);
        let qd = empirical_qd_covariance(h, &f, q, cfg, spec.qd_samples, qd_seed)?;
        let ce = effective_noise_from_qd(&qd, &g, cfg.sigma_n2)?;
        spectral_efficiency(h, &f, &g, &ce.c_e)?
    };
    if !se_bits.is_finite() {
        return Err(Error::numerical("run_sweep", format!("non-finite SE for {scheme}")));
    }
    Ok(Outcome {
        se_bits,
        iterations,
        ms,
        trace,
    })
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per (scheme, axis value) means over successful runs, summed in channel order.
pub fn aggregate(spec: &SweepSpec, records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut rows = Vec::with_capacity(spec.schemes.len() * spec.values.len());
    for &scheme in &spec.schemes {
        for &value in &spec.values {
            let mut sel: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.scheme == scheme && r.axis_value == value)
                .collect();
            sel.sort_by_key(|r| r.channel);
            let ok: Vec<&RunRecord> = sel.iter().copied().filter(|r| r.ok).collect();
            let se: Vec<f64> = ok.iter().map(|r| r.se_bits).collect();
            let ee: Vec<f64> = ok.iter().map(|r| r.ee).collect();
            let iters: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
            let (mean_se_bits, se_stderr) = mean_and_stderr(&se);
            let (mean_ee, ee_stderr) = mean_and_stderr(&ee);
            let mean_ms = if spec.timing {
                let ms: Vec<f64> = ok.iter().filter_map(|r| r.ms).collect();
                Some(mean_and_stderr(&ms).0)
            } else {
                None
            };
            rows.push(AggregateRow {
                scheme,
                axis_name: spec.axis,
                axis_value: value,
                mean_se_bits,
                se_stderr,
                mean_ee,
                ee_stderr,
                mean_iters: mean_and_stderr(&iters).0,
                mean_ms,
                n_ok: ok.len(),
                n_failed: sel.len() - ok.len(),
            });
        }
    }
    rows
}
