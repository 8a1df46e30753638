//! Heterodyne QPSK over the balanced receiver: waveform synthesis at an IF,
//! the photocurrent front end, digital I/Q demodulation, and BER-based
//! sensitivity measurement.

mod ber;
mod modem;
pub mod rrc;

pub use ber::{
    analytic_ber, analytic_es_n0, backend_noise_for_sensitivity, ber_sweep, gray_qpsk_ber, measure_ber,
    optical_budget, sensitivity_search, BerPoint, SensitivityResult,
};
pub use modem::{awgn_channel, demodulate, front_end, generate_qpsk, Demodulated, FrontEndOutput, QpskFrame};

use crate::error::{invalid, Result};
use crate::units::{dbm_to_watts, PowerDbm, PowerWatts};

#[derive(Debug, Clone, PartialEq)]
pub struct ModemConfig {
    /// Symbol rate, Bd.
    pub baud: f64,
    pub if_freq: f64,
    pub rolloff: f64,
    pub sample_rate: f64,
    /// Symbols per trial frame; frames are cyclic.
    pub n_symbols: usize,
    pub p_lo: PowerWatts,
    /// RRC half-length in symbols.
    pub rrc_span: usize,
    /// White noise added after the TIA by the digitising back end, referred
    /// to the TIA input, A²/Hz.
    pub backend_noise_psd: f64,
    /// When false the front end adds no noise at all.
    pub noise_enabled: bool,
    pub bit_cap: u64,
    pub min_errors: u64,
    /// Per-channel launch power used for the optical budget.
    pub launch_power: PowerDbm,
}

impl Default for ModemConfig {
    fn default() -> Self {
        ModemConfig {
            baud: 250e6,
            if_freq: 500e6,
            rolloff: 0.2,
            sample_rate: 4e9,
            n_symbols: 1 << 16,
            p_lo: dbm_to_watts(PowerDbm(13.0)),
            rrc_span: 10,
            backend_noise_psd: crate::calibration::SHIPPED_BACKEND_NOISE_PSD,
            noise_enabled: true,
            bit_cap: 10_000_000,
            min_errors: 100,
            launch_power: PowerDbm(-6.0),
        }
    }
}

impl ModemConfig {
    pub fn samples_per_symbol(&self) -> usize {
        (self.sample_rate / self.baud).round() as usize
    }

    pub fn frame_len(&self) -> usize {
        self.n_symbols * self.samples_per_symbol()
    }

    /// Bits carried per frame on the channel symbols.
    pub fn bits_per_frame(&self) -> u64 {
        2 * self.n_symbols as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.baud > 0.0) || !(self.if_freq > 0.0) || !(self.sample_rate > 0.0) {
            return Err(invalid("qpsk.baud, qpsk.if_freq and qpsk.sample_rate must be > 0"));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(invalid("qpsk.rolloff must be in (0, 1]"));
        }
        let ratio = self.sample_rate / self.baud;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 2.0 {
            return Err(invalid("qpsk.sample_rate must be an integer multiple of qpsk.baud"));
        }
        let top = self.if_freq + self.baud * (1.0 + self.rolloff) / 2.0;
        if self.sample_rate < 2.0 * top {
            return Err(invalid(format!(
                "qpsk.sample_rate must be at least {:e} Hz to hold the IF band",
                2.0 * top
            )));
        }
        if self.if_freq - self.baud * (1.0 + self.rolloff) / 2.0 <= 0.0 {
            return Err(invalid("qpsk.if_freq must exceed the signal half-bandwidth"));
        }
        if self.n_symbols < 4 * self.rrc_span || !self.frame_len().is_power_of_two() {
            return Err(invalid(
                "qpsk.n_symbols times samples per symbol must be a power of two and cover the filter span",
            ));
        }
        if self.rrc_span == 0 {
            return Err(invalid("qpsk.rrc_span must be >= 1"));
        }
        if !(self.backend_noise_psd >= 0.0) {
            return Err(invalid("qpsk.backend_noise_psd must be >= 0"));
        }
        if self.min_errors == 0 || self.bit_cap == 0 {
            return Err(invalid("qpsk.min_errors and qpsk.bit_cap must be >= 1"));
        }
        Ok(())
    }
}
