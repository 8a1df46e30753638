//! Device parameters of the balanced receiver and the quantities that follow
//! directly from them: arm photocurrents, common-mode rejection and the
//! capacitance scaling of the TIA input noise.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::units::{dbm_to_watts, PowerDbm, PowerWatts};

/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// How `input_noise_current_rms` relates to the input noise density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseReference {
    /// The rms figure integrates the bare input density over the reference band.
    InputBand,
    /// The rms figure integrates the density as seen through the receiver
    /// response (output noise divided by midband transimpedance).
    ReceivedBand,
}

impl NoiseReference {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseReference::InputBand => "input",
            NoiseReference::ReceivedBand => "received",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "input" => Some(NoiseReference::InputBand),
            "received" => Some(NoiseReference::ReceivedBand),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverParams {
    /// A/W.
    pub responsivity: f64,
    /// Fibre-to-photodiode coupling, in (0, 1].
    pub coupling_efficiency: f64,
    /// Photodiode capacitance, F.
    pub c_pd: f64,
    /// Input-referred rms noise current over `reference_bandwidth`, A.
    pub input_noise_current_rms: f64,
    pub reference_bandwidth: f64,
    /// -3 dB bandwidth of the receiver response, Hz.
    pub tia_bandwidth: f64,
    /// LO power at which gain compression sets in.
    pub saturation_lo_power: PowerWatts,
    /// Splitting fractions of the 180° hybrid onto the two photodiodes.
    pub arm_split: [f64; 2],
    /// Relative responsivity deficit of the second photodiode.
    pub arm_responsivity_mismatch: f64,
    /// Differential delay between arms, s.
    pub arm_skew: f64,
    /// Clamp for CMRR values when the balanced residual vanishes.
    pub cmrr_ceiling_db: f64,
    /// Corner frequency of the capacitive rise of the TIA input noise, Hz.
    pub noise_corner_freq: f64,
    pub noise_reference: NoiseReference,
    /// Exponent applied to LO power growth beyond `saturation_lo_power`;
    /// 1 means no compression.
    pub compression_exponent: f64,
}

impl Default for ReceiverParams {
    fn default() -> Self {
        ReceiverParams {
            responsivity: 1.0,
            coupling_efficiency: 0.84,
            c_pd: 200e-15,
            input_noise_current_rms: 60e-9,
            reference_bandwidth: 1e9,
            tia_bandwidth: 750e6,
            saturation_lo_power: dbm_to_watts(PowerDbm(9.4)),
            arm_split: [0.5, 0.5],
            arm_responsivity_mismatch: crate::calibration::SHIPPED_CMRR_MISMATCH,
            arm_skew: 0.0,
            cmrr_ceiling_db: 120.0,
            noise_corner_freq: crate::calibration::SHIPPED_NOISE_CORNER_HZ,
            noise_reference: NoiseReference::ReceivedBand,
            compression_exponent: crate::calibration::SHIPPED_COMPRESSION_EXPONENT,
        }
    }
}

impl ReceiverParams {
    /// Checks every field invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("receiver.responsivity", self.responsivity),
            ("receiver.c_pd", self.c_pd),
            ("receiver.reference_bandwidth", self.reference_bandwidth),
            ("receiver.tia_bandwidth", self.tia_bandwidth),
            ("receiver.saturation_lo_power", self.saturation_lo_power.watts()),
            ("receiver.noise_corner_freq", self.noise_corner_freq),
            ("receiver.cmrr_ceiling_db", self.cmrr_ceiling_db),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.coupling_efficiency > 0.0 && self.coupling_efficiency <= 1.0) {
            return Err(invalid(format!(
                "receiver.coupling_efficiency must be in (0, 1], got {}",
                self.coupling_efficiency
            )));
        }
        if !(self.input_noise_current_rms >= 0.0) {
            return Err(invalid("receiver.input_noise_current_rms must be >= 0"));
        }
        if self.arm_split.iter().any(|s| !(0.0..=1.0).contains(s))
            || (self.arm_split[0] + self.arm_split[1] - 1.0).abs() > 1e-12
        {
            return Err(invalid(format!(
                "receiver.arm_split must be two fractions summing to 1, got {:?}",
                self.arm_split
            )));
        }
        if !(self.arm_responsivity_mismatch.abs() < 1.0) {
            return Err(invalid("receiver.arm_responsivity_mismatch must be in (-1, 1)"));
        }
        if !(self.arm_skew >= 0.0) {
            return Err(invalid("receiver.arm_skew must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.compression_exponent) {
            return Err(invalid("receiver.compression_exponent must be in [0, 1]"));
        }
        Ok(())
    }

    /// Net responsivity from fibre input to photocurrent, A/W.
    pub fn effective_responsivity(&self) -> f64 {
        self.responsivity * self.coupling_efficiency
    }

    /// Second-order Butterworth response with its -3 dB point at `tia_bandwidth`.
    pub fn tia_response(&self, freq: f64) -> Complex64 {
        let x = freq / self.tia_bandwidth;
        Complex64::new(1.0 - x * x, SQRT_2 * x).inv()
    }

    /// |H(f)|².
    pub fn tia_gain_sq(&self, freq: f64) -> f64 {
        let x = freq / self.tia_bandwidth;
        1.0 / (1.0 + x.powi(4))
    }

    /// DC photocurrent summed over both arms for an LO power.
    pub fn dc_photocurrent(&self, p_lo: PowerWatts) -> f64 {
        self.effective_responsivity() * p_lo.watts()
    }
}

/// Photocurrent in each photodiode for an optical input split by the hybrid.
pub fn per_arm_photocurrent(p_in: PowerWatts, params: &ReceiverParams) -> [f64; 2] {
    let r = params.effective_responsivity() * p_in.watts();
    [
        r * params.arm_split[0],
        r * params.arm_split[1] * (1.0 - params.arm_responsivity_mismatch),
    ]
}

fn arm_amplitudes(params: &ReceiverParams) -> (f64, f64) {
    let a1 = params.arm_split[0] * params.responsivity;
    let a2 = params.arm_split[1] * params.responsivity * (1.0 - params.arm_responsivity_mismatch);
    (a1, a2)
}

/// CMRR at a single frequency; arm 1 is the unbalanced reference.
pub fn cmrr_at(params: &ReceiverParams, freq: f64) -> f64 {
    let (a1, a2) = arm_amplitudes(params);
    let phase = -2.0 * PI * freq * params.arm_skew;
    let residual = (Complex64::new(a1, 0.0) - a2 * Complex64::from_polar(1.0, phase)).norm();
    let floor = a1.abs() * 10f64.powf(-params.cmrr_ceiling_db / 20.0);
    if residual <= floor {
        params.cmrr_ceiling_db
    } else {
        20.0 * (a1.abs() / residual).log10()
    }
}

/// Unbalanced-to-balanced response ratio in dB over a frequency grid.
pub fn cmrr_spectrum(params: &ReceiverParams, freqs: &[f64]) -> Result<Vec<f64>> {
    check_grid(freqs)?;
    Ok(freqs.iter().map(|&f| cmrr_at(params, f)).collect())
}

/// Responsivity mismatch that yields `target_db` of CMRR at `freq` with the
/// split ratio and skew of `params` held fixed.
pub fn mismatch_for_cmrr(params: &ReceiverParams, target_db: f64, freq: f64) -> Result<f64> {
    if !(freq > 0.0) {
        return Err(invalid("calibration frequency must be > 0"));
    }
    let a1 = params.arm_split[0] * params.responsivity;
    let a2_nominal = params.arm_split[1] * params.responsivity;
    let theta = 2.0 * PI * freq * params.arm_skew;
    let rho = a1 * 10f64.powf(-target_db / 20.0);
    let disc = rho * rho - (a1 * theta.sin()).powi(2);
    if disc < 0.0 {
        return Err(invalid(format!(
            "skew of {:e} s alone limits the CMRR below {target_db} dB at {freq:e} Hz",
            params.arm_skew
        )));
    }
    // |a1 - a2 e^{-jθ}| = ρ has two roots in a2; prefer the one that needs the
    // smaller non-negative mismatch.
    let roots = [a1 * theta.cos() - disc.sqrt(), a1 * theta.cos() + disc.sqrt()];
    roots
        .iter()
        .map(|r| 1.0 - r / a2_nominal)
        .filter(|m| (0.0..1.0).contains(m))
        .min_by(|a, b| a.total_cmp(b))
        .ok_or_else(|| invalid(format!("no non-negative mismatch reaches {target_db} dB")))
}

/// Scales an input-referred noise current to a different photodiode capacitance.
pub fn noise_current_for_capacitance(i_ref: f64, c_ref: f64, c_new: f64) -> Result<f64> {
    if !(c_ref > 0.0) || !(c_new > 0.0) {
        return Err(invalid("capacitances must be > 0"));
    }
    if !(i_ref >= 0.0) {
        return Err(invalid("reference noise current must be >= 0"));
    }
    Ok(i_ref * (c_new / c_ref).sqrt())
}

pub(crate) fn check_grid(freqs: &[f64]) -> Result<()> {
    if freqs.is_empty() {
        return Err(invalid("frequency grid is empty"));
    }
    if !(freqs[0] > 0.0) {
        return Err(invalid("frequency grid must be strictly positive"));
    }
    if freqs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("frequency grid must be strictly ascending"));
    }
    Ok(())
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
