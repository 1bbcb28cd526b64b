use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Axis, Scheme, SweepResult, SweepSpec};
use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const SIDECAR_FILE: &str = "spec.json";
pub const RUNS_FILE: &str = "runs.csv";
pub const TRACES_FILE: &str = "traces.csv";

/// Column order of `results.csv`.
pub const RESULT_COLUMNS: [&str; 11] = [
    "scheme",
    "axis_name",
    "axis_value",
    "mean_se_bits",
    "se_stderr",
    "mean_ee",
    "ee_stderr",
    "mean_iters",
    "mean_ms",
    "n_ok",
    "n_failed",
];

const SIDECAR_FORMAT: u32 = 1;
const SE_AVERAGING: &str = "arithmetic mean of per-channel SE in bits/s/Hz (linear domain)";
const REPORTED_SE: &str =
    "Bussgang lower bound on the true channel with the distortion covariance estimated from qd_samples quantized draws";

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub axis_name: Axis,
    pub axis_value: f64,
    pub mean_se_bits: f64,
    pub se_stderr: f64,
    /// bits/Hz/J.
    pub mean_ee: f64,
    pub ee_stderr: f64,
    pub mean_iters: f64,
    /// Empty unless the sweep recorded timing.
    pub mean_ms: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

/// Provenance written next to `results.csv`; `spec` alone reproduces the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: u32,
    pub generator: String,
    pub columns: Vec<String>,
    pub se_averaging: String,
    pub reported_se: String,
    pub spec: SweepSpec,
}

impl Sidecar {
    pub fn new(spec: &SweepSpec) -> Self {
        Self {
            format: SIDECAR_FORMAT,
            generator: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            columns: RESULT_COLUMNS.iter().map(|s| s.to_string()).collect(),
            se_averaging: SE_AVERAGING.into(),
            reported_se: REPORTED_SE.into(),
            spec: spec.clone(),
        }
    }
}

#[derive(Serialize)]
struct RunRow<'a> {
    scheme: Scheme,
    axis_name: Axis,
    axis_value: f64,
    channel: usize,
    ok: bool,
    se_bits: f64,
    ee: f64,
    iterations: usize,
    ms: Option<f64>,
    error: &'a str,
}

#[derive(Serialize)]
struct TraceRow {
    scheme: Scheme,
    axis_name: Axis,
    axis_value: f64,
    channel: usize,
    iteration: usize,
    se_bits: f64,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_bytes<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let parse_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(parse_err)?;
    }
    w.into_inner().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn write_results_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let bytes = if rows.is_empty() {
        format!("{}\n", RESULT_COLUMNS.join(",")).into_bytes()
    } else {
        csv_bytes(path, rows)?
    };
    write_file(path, &bytes)
}

pub fn write_runs_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let axis = result.spec.axis;
    let rows = result.records.iter().map(|r| RunRow {
        scheme: r.scheme,
        axis_name: axis,
        axis_value: r.axis_value,
        channel: r.channel,
        ok: r.ok,
        se_bits: r.se_bits,
        ee: r.ee,
        iterations: r.iterations,
        ms: r.ms,
        error: r.error.as_deref().unwrap_or(""),
    });
    write_file(path, &csv_bytes(path, rows)?)
}

pub fn write_traces_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let axis = result.spec.axis;
    let rows = result.records.iter().flat_map(|r| {
        r.trace.iter().enumerate().map(move |(k, &se)| TraceRow {
            scheme: r.scheme,
            axis_name: axis,
            axis_value: r.axis_value,
            channel: r.channel,
            iteration: k,
            se_bits: se,
        })
    });
    let bytes = csv_bytes(path, rows)?;
    let bytes = if bytes.is_empty() {
        b"scheme,axis_name,axis_value,channel,iteration,se_bits\n".to_vec()
    } else {
        bytes
    };
    write_file(path, &bytes)
}

pub fn write_sidecar(path: &Path, spec: &SweepSpec) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Sidecar::new(spec)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    sidecar.spec.validate()?;
    Ok(sidecar)
}

/// Reads `results.csv`, checking the header against the documented columns.
pub fn parse_results_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let parse_err = |detail: String| Error::Parse {
        path: path.to_path_buf(),
        detail,
    };
    let text = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(text.as_slice());
    let header = r.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    for (i, col) in RESULT_COLUMNS.iter().enumerate() {
        if header.get(i) != Some(*col) {
            return Err(parse_err(format!("missing or misplaced column {col:?}")));
        }
    }
    if header.len() != RESULT_COLUMNS.len() {
        return Err(parse_err(format!("unexpected column {:?}", header.get(RESULT_COLUMNS.len()).unwrap_or(""))));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| parse_err(e.to_string())))
        .collect()
}

/// Writes `results.csv` and `spec.json` into `dir`, plus `runs.csv` and
/// `traces.csv` when `traces` is set. Returns the written paths.
pub fn emit(result: &SweepResult, dir: &Path, traces: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = vec![dir.join(RESULTS_FILE), dir.join(SIDECAR_FILE)];
    write_results_csv(&written[0], &result.rows)?;
    write_sidecar(&written[1], &result.spec)?;
    if traces {
        let runs = dir.join(RUNS_FILE);
        let tr = dir.join(TRACES_FILE);
        write_runs_csv(&runs, result)?;
        write_traces_csv(&tr, result)?;
        written.extend([runs, tr]);
    }
    Ok(written)
}
