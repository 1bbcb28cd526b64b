//! Precoding for point-to-point massive MIMO links whose receiver uses
//! low-resolution ADCs.
//!
//! The crate maximizes a Bussgang-based lower bound on the spectral efficiency by
//! majorization-minimization, for fully digital precoders ([`digital`]) and for
//! fully or partially connected hybrid precoders ([`hybrid`]). The [`harness`]
//! module runs reproducible Monte Carlo sweeps over SNR, ADC resolution and CSI
//! accuracy.

pub mod digital;
pub mod error;
pub mod harness;
pub mod hybrid;
pub mod linalg;
pub mod metrics;
pub mod quantizer;
pub mod surrogate;
pub mod system;
pub mod validation;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
pub use system::{Architecture, ChannelParams, PowerUpdate, SystemConfig};
