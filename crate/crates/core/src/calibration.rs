//! Fitting of the free model parameters to measured anchor values, and the
//! parameter set that ships as the default.

use crate::cvqkd::LinkParams;
use crate::error::{Error, Result};
use crate::linearity::{analysis_bandwidth_for, ceiling_current_for, LinearityModel};
use crate::noise::{clearance_spectrum, expected_time_domain_qcnr, model_qcnr, CaptureConfig};
use crate::qpsk::{backend_noise_for_sensitivity, ModemConfig};
use crate::receiver::{cmrr_at, mismatch_for_cmrr, ReceiverParams};
use crate::units::{dbm_to_watts, PowerDbm, PowerWatts};

// Output of `calibrate` on the reference anchors.
pub const SHIPPED_NOISE_CORNER_HZ: f64 = 296_474_944.503_671_65;
pub const SHIPPED_COMPRESSION_EXPONENT: f64 = 0.0;
pub const SHIPPED_CAPTURE_BAND_HZ: f64 = 2_682_731_135.984_875_7;
pub const SHIPPED_CMRR_MISMATCH: f64 = 0.010_000_000_000_000_009;
pub const SHIPPED_CEILING_CURRENT_A: f64 = 9.381_278_080_888_86e-6;
pub const SHIPPED_ANALYSIS_BANDWIDTH_HZ: f64 = 544_672_627.321_906_8;
pub const SHIPPED_BACKEND_NOISE_PSD: f64 = 9.213_639_589_753_129e-21;

/// Largest anchor miss accepted from a fit, dB.
pub const RESIDUAL_LIMIT_DB: f64 = 0.5;

/// Target values and the conditions they were taken under. Absent targets
/// leave the corresponding parameters at their base values.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchors {
    /// LO power of the noise anchors.
    pub noise_lo: PowerDbm,
    /// Clearance at `clearance_freq`, dB.
    pub clearance_db: Option<f64>,
    pub clearance_freq: f64,
    /// Frequency-domain QCNR over `qcnr_band`, dB.
    pub qcnr_freq_db: Option<f64>,
    pub qcnr_band: (f64, f64),
    /// Variance-based QCNR of a capture, dB.
    pub qcnr_time_db: Option<f64>,
    pub cmrr_db: Option<f64>,
    pub cmrr_freq: f64,
    /// LO power of the linearity anchors.
    pub linearity_lo: PowerWatts,
    pub linearity_ceiling: Option<PowerDbm>,
    pub linearity_floor: Option<PowerDbm>,
    pub sensitivity: Option<PowerDbm>,
    pub target_ber: f64,
}

impl Anchors {
    /// The reference measurement set of the modelled receiver.
    pub fn reference() -> Self {
        Anchors {
            clearance_db: Some(21.5),
            qcnr_freq_db: Some(26.8),
            qcnr_time_db: Some(24.74),
            cmrr_db: Some(40.0),
            linearity_ceiling: Some(PowerDbm(-38.0)),
            linearity_floor: Some(PowerDbm(-71.0)),
            sensitivity: Some(PowerDbm(-55.8)),
            ..Anchors::empty()
        }
    }

    /// Measurement conditions with no targets.
    pub fn empty() -> Self {
        Anchors {
            noise_lo: PowerDbm(10.9),
            clearance_db: None,
            clearance_freq: 1e9,
            qcnr_freq_db: None,
            qcnr_band: (1e6, 1e9),
            qcnr_time_db: None,
            cmrr_db: None,
            cmrr_freq: 1e9,
            linearity_lo: PowerWatts::new(100e-6),
            linearity_ceiling: None,
            linearity_floor: None,
            sensitivity: None,
            target_ber: 1e-3,
        }
    }
}

/// Every tunable model setting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Profile {
    pub receiver: ReceiverParams,
    pub capture: CaptureConfig,
    pub linearity: LinearityModel,
    pub modem: ModemConfig,
    pub link: LinkParams,
}

impl Profile {
    pub fn shipped() -> Self {
        Profile::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorResidual {
    pub anchor: &'static str,
    pub target: f64,
    pub achieved: f64,
}

impl AnchorResidual {
    pub fn residual(&self) -> f64 {
        self.achieved - self.target
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub profile: Profile,
    pub residuals: Vec<AnchorResidual>,
}

impl CalibrationReport {
    pub fn worst(&self) -> Option<&AnchorResidual> {
        self.residuals.iter().max_by(|a, b| a.residual().abs().total_cmp(&b.residual().abs()))
    }
}

fn bisect(mut lo: f64, mut hi: f64, geometric: bool, f: impl Fn(f64) -> Result<f64>) -> Result<Option<f64>> {
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if f_lo.signum() == f_hi.signum() {
        return Ok(None);
    }
    let rising = f_hi > f_lo;
    for _ in 0..100 {
        let mid = if geometric { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if (f(mid)? < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(if geometric { (lo * hi).sqrt() } else { 0.5 * (lo + hi) }))
}

fn golden_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > 1e-7 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { x1 } else { x2 })
}

fn clearance_at(p_lo: PowerWatts, params: &ReceiverParams, freq: f64) -> Result<f64> {
    Ok(clearance_spectrum(p_lo, params, &[freq])?[0])
}

const CORNER_RANGE: (f64, f64) = (1e6, 1e11);
const CAPTURE_RANGE: (f64, f64) = (1.1e8, 2e10);

/// Corner frequency that meets the clearance anchor, or the bound nearer to it.
fn fit_corner(p_lo: PowerWatts, params: &ReceiverParams, target: f64, freq: f64) -> Result<f64> {
    let miss = |fc: f64| {
        let p = ReceiverParams { noise_corner_freq: fc, ..params.clone() };
        Ok(clearance_at(p_lo, &p, freq)? - target)
    };
    match bisect(CORNER_RANGE.0, CORNER_RANGE.1, true, miss)? {
        Some(fc) => Ok(fc),
        None if miss(CORNER_RANGE.0)?.abs() < miss(CORNER_RANGE.1)?.abs() => Ok(CORNER_RANGE.0),
        None => Ok(CORNER_RANGE.1),
    }
}

/// Least-squares fit of the free parameters to `anchors`, starting from
/// `base`.
///
/// The noise corner follows the clearance anchor exactly; the compression
/// exponent, searched over [0, 1], takes up the integrated-QCNR anchor; the
/// capture band then meets the time-domain anchor. The CMRR mismatch,
/// limiter level, analysis bandwidth and back-end noise each follow from
/// their own anchor in closed form or by bisection.
pub fn calibrate(base: &Profile, anchors: &Anchors) -> Result<CalibrationReport> {
    let mut profile = base.clone();
    let mut residuals = Vec::new();
    let p_noise = dbm_to_watts(anchors.noise_lo);
    let (band_lo, band_hi) = anchors.qcnr_band;

    let fd = |p: &ReceiverParams| Ok(model_qcnr(p_noise, p, band_lo, band_hi)?.qcnr_db);
    match (anchors.clearance_db, anchors.qcnr_freq_db) {
        (Some(clr), Some(qcnr)) => {
            let fit_for = |kappa: f64| -> Result<ReceiverParams> {
                let p = ReceiverParams { compression_exponent: kappa, ..profile.receiver.clone() };
                let fc = fit_corner(p_noise, &p, clr, anchors.clearance_freq)?;
                Ok(ReceiverParams { noise_corner_freq: fc, ..p })
            };
            let cost = |kappa: f64| Ok((fd(&fit_for(kappa)?)? - qcnr).powi(2));
            let inner = golden_min(0.0, 1.0, cost)?;
            let mut best = (inner, cost(inner)?);
            for edge in [0.0, 1.0] {
                let c = cost(edge)?;
                if c < best.1 {
                    best = (edge, c);
                }
            }
            profile.receiver = fit_for(best.0)?;
        }
        (Some(clr), None) => {
            profile.receiver.noise_corner_freq = fit_corner(p_noise, &profile.receiver, clr, anchors.clearance_freq)?;
        }
        (None, Some(qcnr)) => {
            let p = &profile.receiver;
            let cost = |kappa: f64| Ok((fd(&ReceiverParams { compression_exponent: kappa, ..p.clone() })? - qcnr).powi(2));
            let kappa = golden_min(0.0, 1.0, cost)?;
            profile.receiver.compression_exponent = [kappa, 0.0, 1.0]
                .into_iter()
                .map(|k| cost(k).map(|c| (k, c)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
        }
        (None, None) => {}
    }
    if let Some(target) = anchors.clearance_db {
        let achieved = clearance_at(p_noise, &profile.receiver, anchors.clearance_freq)?;
        residuals.push(AnchorResidual { anchor: "noise.clearance", target, achieved });
    }
    if let Some(target) = anchors.qcnr_freq_db {
        let achieved = fd(&profile.receiver)?;
        residuals.push(AnchorResidual { anchor: "noise.qcnr_frequency_domain", target, achieved });
    }

    if let Some(target) = anchors.qcnr_time_db {
        let (receiver, capture) = (profile.receiver.clone(), profile.capture.clone());
        let td = |band: f64| {
            let capture = CaptureConfig { analysis_band: band, ..capture.clone() };
            Ok(expected_time_domain_qcnr(p_noise, &receiver, &capture)?.qcnr_db)
        };
        let band = match bisect(CAPTURE_RANGE.0, CAPTURE_RANGE.1, true, |b| Ok(td(b)? - target))? {
            Some(b) => b,
            None if (td(CAPTURE_RANGE.0)? - target).abs() < (td(CAPTURE_RANGE.1)? - target).abs() => CAPTURE_RANGE.0,
            None => CAPTURE_RANGE.1,
        };
        profile.capture.analysis_band = band;
        residuals.push(AnchorResidual { anchor: "noise.qcnr_time_domain", target, achieved: td(band)? });
    }

    if let Some(target) = anchors.cmrr_db {
        let mismatch = mismatch_for_cmrr(&profile.receiver, target, anchors.cmrr_freq)?;
        profile.receiver.arm_responsivity_mismatch = mismatch;
        let achieved = cmrr_at(&profile.receiver, anchors.cmrr_freq);
        residuals.push(AnchorResidual { anchor: "receiver.cmrr", target, achieved });
    }

    let lin_lo = anchors.linearity_lo;
    if let Some(ceiling) = anchors.linearity_ceiling {
        let model = &mut profile.linearity;
        model.ceiling_current = ceiling_current_for(lin_lo, ceiling, &profile.receiver, model.offset_freq);
        let achieved = crate::linearity::max_signal_power(lin_lo, &profile.receiver, model)?;
        residuals.push(AnchorResidual { anchor: "linearity.ceiling", target: ceiling.0, achieved: achieved.0 });
    }
    if let Some(floor) = anchors.linearity_floor {
        let bw = analysis_bandwidth_for(lin_lo, floor, &profile.receiver, &profile.linearity)?;
        profile.linearity.analysis_bandwidth = bw;
        let achieved = crate::linearity::dynamic_range(lin_lo, &profile.receiver, &profile.linearity)?.floor;
        residuals.push(AnchorResidual { anchor: "linearity.floor", target: floor.0, achieved: achieved.0 });
    }

    if let Some(sens) = anchors.sensitivity {
        let backend = backend_noise_for_sensitivity(&profile.modem, &profile.receiver, sens, anchors.target_ber)?;
        profile.modem.backend_noise_psd = backend;
        let ber = crate::qpsk::analytic_ber(&profile.modem, &profile.receiver, sens.to_watts());
        // Express the miss as a power offset through the local BER slope.
        let up = crate::qpsk::analytic_ber(&profile.modem, &profile.receiver, PowerDbm(sens.0 + 0.01).to_watts());
        let slope = (up.ln() - ber.ln()) / 0.01;
        let achieved = sens.0 + (anchors.target_ber.ln() - ber.ln()) / slope;
        residuals.push(AnchorResidual { anchor: "qpsk.sensitivity", target: sens.0, achieved });
    }

    let report = CalibrationReport { profile, residuals };
    if let Some(worst) = report.worst() {
        if worst.residual().abs() > RESIDUAL_LIMIT_DB {
            return Err(Error::Calibration {
                anchor: worst.anchor.to_string(),
                residual: worst.residual(),
                limit: RESIDUAL_LIMIT_DB,
            });
        }
    }
    Ok(report)
}
