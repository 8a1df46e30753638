//! Simulation models for a die-level balanced homodyne receiver.
//!
//! - [`receiver`]: photocurrents, receiver response and common-mode rejection.
//! - [`noise`]: shot and electronic noise spectra, trace synthesis and QCNR.
//! - [`linearity`]: single-tone sweeps and dynamic range of the TIA.
//! - [`qpsk`]: heterodyne QPSK transmission, BER and sensitivity.
//! - [`cvqkd`]: asymptotic CV-QKD secret-key rate with an untrusted receiver.
//! - [`calibration`]: anchor fitting and the shipped parameter profile.

pub mod calibration;
pub mod cvqkd;
pub mod error;
pub mod linearity;
pub mod noise;
pub mod qpsk;
pub mod receiver;
pub mod units;

pub use calibration::{calibrate, Anchors, CalibrationReport, Profile};
pub use cvqkd::{KeyRateResult, LinkParams, NoisePlane};
pub use error::{Error, Result};
pub use linearity::{DynamicRangeReport, LinearityModel, SweepPoint, ToneBeatSpec};
pub use noise::{CaptureConfig, NoiseSpectrum, NoiseTrace, QcnrMethod, QcnrReport, SpectrumLabel};
pub use qpsk::{BerPoint, ModemConfig, SensitivityResult};
pub use receiver::{NoiseReference, ReceiverParams};
pub use units::{PowerDbm, PowerWatts};
