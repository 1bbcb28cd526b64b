//! Monte Carlo sweeps over SNR, ADC resolution and CSI accuracy.
//!
//! A [`SweepSpec`] fully determines a sweep: channels, CSI errors and the
//! receiver noise used for the empirical distortion covariance are all drawn from
//! seeds derived from `spec.seed`, so aggregates do not depend on thread count or
//! scheduling.

mod output;
mod run;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PowerModel;
use crate::quantizer::{MAX_BITS, MIN_QD_SAMPLES};
use crate::system::{Architecture, ChannelParams, SystemConfig};

pub use output::{
    emit, parse_results_csv, read_sidecar, write_results_csv, write_runs_csv, write_sidecar, write_traces_csv,
    AggregateRow, Sidecar, RESULTS_FILE, RESULT_COLUMNS, RUNS_FILE, SIDECAR_FILE, TRACES_FILE,
};
pub use run::{aggregate, run_sweep, run_sweep_with, RunRecord, SweepResult};

pub const DEFAULT_QD_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// MM digital precoder.
    DbfProposed,
    /// Water-filling digital precoder evaluated with quantized receivers.
    DbfWf,
    FcProposed,
    PcProposed,
    /// Water-filling with ideal ADCs.
    UnquantizedWf,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::DbfProposed,
        Scheme::DbfWf,
        Scheme::FcProposed,
        Scheme::PcProposed,
        Scheme::UnquantizedWf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::DbfProposed => "dbf-proposed",
            Scheme::DbfWf => "dbf-wf",
            Scheme::FcProposed => "fc-proposed",
            Scheme::PcProposed => "pc-proposed",
            Scheme::UnquantizedWf => "unquantized-wf",
        }
    }

    /// Architecture whose hardware the scheme runs on (used for EE).
    pub fn architecture(self) -> Architecture {
        match self {
            Scheme::FcProposed => Architecture::FcHybrid,
            Scheme::PcProposed => Architecture::PcHybrid,
            _ => Architecture::Digital,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    SnrDb,
    Bits,
    Xi,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::SnrDb => "snr_db",
            Axis::Bits => "bits",
            Axis::Xi => "xi",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr_db" | "snr" => Ok(Axis::SnrDb),
            "bits" => Ok(Axis::Bits),
            "xi" => Ok(Axis::Xi),
            _ => Err(Error::Config(format!("unknown axis {s:?}"))),
        }
    }
}

fn default_qd_samples() -> usize {
    DEFAULT_QD_SAMPLES
}

/// Everything a sweep depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub n_channels: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    /// Samples for the empirical distortion covariance used to report SE.
    #[serde(default = "default_qd_samples")]
    pub qd_samples: usize,
    /// Record wall time per run. Off by default so that results are byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    pub base: SystemConfig,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub power: PowerModel,
}

/// Named starting points for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 64 x 64 link, 8 streams and RF chains, 1000 channels.
    Full,
    /// 16 x 16 link, 4 streams and RF chains, 50 channels.
    Desk,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::Config(format!("unknown preset {s:?}"))),
        }
    }
}

impl SweepSpec {
    /// SNR sweep at 1-bit resolution over every scheme.
    pub fn preset(preset: Preset) -> Self {
        let (base, n_channels) = match preset {
            Preset::Full => (SystemConfig::full(), 1000),
            Preset::Desk => (SystemConfig::desk(), 50),
        };
        Self {
            axis: Axis::SnrDb,
            values: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            n_channels,
            seed: 1,
            schemes: Scheme::ALL.to_vec(),
            qd_samples: DEFAULT_QD_SAMPLES,
            timing: false,
            base,
            channel: ChannelParams::default(),
            power: PowerModel::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Parse {
                path: path.to_path_buf(),
                detail: m,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Configuration used for `scheme` at the axis value `value`.
    pub fn config_for(&self, scheme: Scheme, value: f64) -> Result<SystemConfig> {
        let mut cfg = self.base.clone();
        cfg.architecture = scheme.architecture();
        match self.axis {
            Axis::SnrDb => cfg.set_snr_db(value),
            Axis::Bits => cfg.bits = bits_value(value)?,
            Axis::Xi => {}
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one axis value".into()));
        }
        if self.n_channels == 0 {
            return Err(Error::Config("sweep needs at least one channel".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("sweep needs at least one scheme".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.schemes.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::Config(format!("scheme {dup} listed twice")));
        }
        let mut seen = Vec::new();
        for &v in &self.values {
            if !v.is_finite() {
                return Err(Error::Config(format!("axis value {v} is not finite")));
            }
            if seen.contains(&v) {
                return Err(Error::Config(format!("axis value {v} listed twice")));
            }
            seen.push(v);
        }
        if self.qd_samples < MIN_QD_SAMPLES {
            return Err(Error::Config(format!(
                "qd_samples must be at least {MIN_QD_SAMPLES}, got {}",
                self.qd_samples
            )));
        }
        if self.axis == Axis::Xi {
            if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Config(format!("CSI accuracy must lie in [0, 1], got {v}")));
            }
        }
        self.channel.validate()?;
        self.power.validate()?;
        for &scheme in &self.schemes {
            for &v in &self.values {
                self.config_for(scheme, v)?.validate()?;
            }
        }
        Ok(())
    }
}

fn bits_value(v: f64) -> Result<u32> {
    if v.fract() != 0.0 || !(1.0..=MAX_BITS as f64).contains(&v) {
        return Err(Error::Config(format!("ADC bits must be an integer in [1, {MAX_BITS}], got {v}")));
    }
    Ok(v as u32)
}

/// Seed of the channel drawn for index `channel` of a sweep with seed `seed`.
pub fn channel_seed(seed: u64, channel: usize) -> u64 {
    derive_seed(seed, channel as u64, run::PURPOSE_CHANNEL, 0)
}

/// Independent stream seeds for `(seed, channel, purpose, sub)` via SplitMix64 mixing.
pub fn derive_seed(seed: u64, channel: u64, purpose: u64, sub: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(mix(seed) ^ channel) ^ purpose) ^ sub)
}
