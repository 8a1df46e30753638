//! Single-tone beat analysis of the receiver's linear region.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Result};
use crate::noise::{lit_and_dark, synthesize_trace, NoiseSpectrum};
use crate::receiver::{log_grid, ReceiverParams};
use crate::units::{db, watts_to_dbm, PowerDbm, PowerWatts};

/// Compression that defines the top of the linear range, dB.
pub const COMPRESSION_DB: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneBeatSpec {
    pub p_lo: PowerWatts,
    pub p_sig: PowerWatts,
    pub offset_freq: f64,
}

impl ToneBeatSpec {
    pub fn new(p_lo: PowerWatts, p_sig: PowerWatts) -> Self {
        ToneBeatSpec { p_lo, p_sig, offset_freq: 120e6 }
    }

    pub fn validate(&self, params: &ReceiverParams) -> Result<()> {
        if !(self.offset_freq > 0.0 && self.offset_freq <= params.tia_bandwidth) {
            return Err(invalid(format!(
                "offset_freq {:e} Hz must lie in (0, tia_bandwidth]",
                self.offset_freq
            )));
        }
        Ok(())
    }
}

/// rms beat current across the balanced pair, before any compression.
pub fn beat_current_rms(spec: &ToneBeatSpec, params: &ReceiverParams) -> f64 {
    SQRT_2
        * params.effective_responsivity()
        * (spec.p_lo.watts() * spec.p_sig.watts()).sqrt()
        * params.tia_gain_sq(spec.offset_freq).sqrt()
}

/// Output stage of the TIA and the settings of the simulated measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearityModel {
    /// Saturation level of the soft limiter `I_c·tanh(i/I_c)`, A.
    pub ceiling_current: f64,
    /// Noise bandwidth around the tone against which detectability is judged, Hz.
    pub analysis_bandwidth: f64,
    pub offset_freq: f64,
    pub sample_rate: f64,
    pub n_samples: usize,
}

impl Default for LinearityModel {
    fn default() -> Self {
        LinearityModel {
            ceiling_current: crate::calibration::SHIPPED_CEILING_CURRENT_A,
            analysis_bandwidth: crate::calibration::SHIPPED_ANALYSIS_BANDWIDTH_HZ,
            offset_freq: 120e6,
            // 62.5 kHz bins put the 120 MHz tone exactly on bin 1920.
            sample_rate: 4.096e9,
            n_samples: 1 << 16,
        }
    }
}

impl LinearityModel {
    pub fn validate(&self, params: &ReceiverParams) -> Result<()> {
        if !(self.ceiling_current > 0.0) {
            return Err(invalid("linearity.ceiling_current must be > 0"));
        }
        if !(self.analysis_bandwidth > 0.0) {
            return Err(invalid("linearity.analysis_bandwidth must be > 0"));
        }
        if !(self.sample_rate > 2.0 * self.offset_freq) {
            return Err(invalid("linearity.sample_rate must exceed twice the tone offset"));
        }
        if !self.n_samples.is_power_of_two() {
            return Err(invalid("linearity.n_samples must be a power of two"));
        }
        ToneBeatSpec { offset_freq: self.offset_freq, ..ToneBeatSpec::new(PowerWatts::ZERO, PowerWatts::ZERO) }
            .validate(params)
    }

    fn limit(&self, i: f64) -> f64 {
        self.ceiling_current * (i / self.ceiling_current).tanh()
    }
}

/// Fundamental gain of `tanh(a cos θ)` relative to the small-signal gain.
pub fn limiter_fundamental_ratio(a: f64) -> f64 {
    if a < 1e-6 {
        return 1.0;
    }
    const M: usize = 512;
    let c1: f64 = (0..M)
        .map(|m| {
            let th = 2.0 * PI * m as f64 / M as f64;
            (a * th.cos()).tanh() * th.cos()
        })
        .sum::<f64>()
        * 2.0
        / M as f64;
    c1 / a
}

/// Normalised drive `A/I_c` at which the fundamental is compressed by `comp_db`.
pub fn compression_drive(comp_db: f64) -> f64 {
    let target = 10f64.powf(-comp_db / 20.0);
    let (mut lo, mut hi) = (1e-3, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if limiter_fundamental_ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Output fundamental power (A²) for a tone of the given input rms current.
pub fn compressed_tone_power(i_rms: f64, model: &LinearityModel) -> f64 {
    let a = SQRT_2 * i_rms / model.ceiling_current;
    let out_peak = SQRT_2 * i_rms * limiter_fundamental_ratio(a);
    out_peak * out_peak / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub input: PowerDbm,
    /// Measured output tone power, dB re 1 A².
    pub output_db: f64,
    pub detectable: bool,
}

fn noise_spectrum(p_lo: PowerWatts, params: &ReceiverParams, model: &LinearityModel) -> Result<NoiseSpectrum> {
    let grid = log_grid(1e6, model.sample_rate / 2.0, 2048);
    Ok(lit_and_dark(p_lo, params, &grid)?.0)
}

/// Noise power in the analysis band centred on the tone, A².
pub fn analysis_noise_power(p_lo: PowerWatts, params: &ReceiverParams, model: &LinearityModel) -> Result<f64> {
    let total = noise_spectrum(p_lo, params, model)?;
    band_power(&total, model.offset_freq, model.analysis_bandwidth)
}

fn band_power(total: &NoiseSpectrum, centre: f64, width: f64) -> Result<f64> {
    let lo = (centre - width / 2.0).max(total.freqs[0]);
    let hi = (centre + width / 2.0).min(*total.freqs.last().unwrap());
    total.integrate(lo, hi)
}

/// Simulated single-tone power sweep at a fixed LO.
///
/// One noise realisation is drawn for the whole sweep; each point adds the
/// beat tone, passes the sum through the output limiter and reads the tone
/// back by projecting onto its frequency.
pub fn single_tone_sweep(
    p_lo: PowerWatts,
    p_sig_grid: &[PowerDbm],
    params: &ReceiverParams,
    model: &LinearityModel,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    model.validate(params)?;
    if p_sig_grid.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(invalid("signal power grid must be ascending"));
    }
    let total = noise_spectrum(p_lo, params, model)?;
    let noise = synthesize_trace(&total, model.sample_rate, model.n_samples, seed)?;
    let threshold = band_power(&total, model.offset_freq, model.analysis_bandwidth)?;
    let w = 2.0 * PI * model.offset_freq / model.sample_rate;
    let n = model.n_samples as f64;
    let carrier: Vec<(f64, f64)> = (0..model.n_samples).map(|k| (w * k as f64).sin_cos()).collect();

    Ok(p_sig_grid
        .iter()
        .map(|&p_sig| {
            let spec = ToneBeatSpec {
                p_lo,
                p_sig: p_sig.to_watts(),
                offset_freq: model.offset_freq,
            };
            let amp = SQRT_2 * beat_current_rms(&spec, params);
            let (mut re, mut im) = (0.0, 0.0);
            for (x, &(sin, cos)) in noise.samples.iter().zip(&carrier) {
                let y = model.limit(amp * cos + x);
                re += y * cos;
                im -= y * sin;
            }
            let (re, im) = (2.0 * re / n, 2.0 * im / n);
            let tone = (re * re + im * im) / 2.0;
            SweepPoint { input: p_sig, output_db: db(tone), detectable: tone >= threshold }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicRangeReport {
    /// Minimum detectable signal.
    pub floor: PowerDbm,
    /// 1 dB compression input.
    pub ceiling: PowerDbm,
    pub range_db: f64,
}

impl DynamicRangeReport {
    /// Shifts both ends by `-10·log10(p_lo / p_ref)`, the constant-product
    /// scaling of the beat amplitude.
    pub fn scaled_to_lo(&self, p_ref: PowerWatts, p_lo: PowerWatts) -> DynamicRangeReport {
        let shift = db(p_ref.watts() / p_lo.watts());
        DynamicRangeReport {
            floor: PowerDbm(self.floor.0 + shift),
            ceiling: PowerDbm(self.ceiling.0 + shift),
            range_db: self.range_db,
        }
    }
}

/// Signal power whose uncompressed beat carries `i_rms`.
fn signal_for_current(i_rms: f64, p_lo: PowerWatts, params: &ReceiverParams, offset: f64) -> PowerWatts {
    let per_watt = 2.0 * params.effective_responsivity().powi(2) * p_lo.watts() * params.tia_gain_sq(offset);
    PowerWatts::new(i_rms * i_rms / per_watt)
}

/// Input power at the 1 dB compression point for an LO power.
pub fn max_signal_power(p_lo: PowerWatts, params: &ReceiverParams, model: &LinearityModel) -> Result<PowerDbm> {
    if !(p_lo.watts() > 0.0) {
        return Err(invalid("LO power must be > 0"));
    }
    let i_rms = compression_drive(COMPRESSION_DB) * model.ceiling_current / SQRT_2;
    Ok(watts_to_dbm(signal_for_current(i_rms, p_lo, params, model.offset_freq)))
}

/// Noise-limited floor and compression ceiling at an LO power.
pub fn dynamic_range(p_lo: PowerWatts, params: &ReceiverParams, model: &LinearityModel) -> Result<DynamicRangeReport> {
    model.validate(params)?;
    let ceiling = max_signal_power(p_lo, params, model)?;
    let noise = analysis_noise_power(p_lo, params, model)?;
    let floor = watts_to_dbm(signal_for_current(noise.sqrt(), p_lo, params, model.offset_freq));
    Ok(DynamicRangeReport { floor, ceiling, range_db: ceiling.0 - floor.0 })
}

/// Limiter level that puts the 1 dB compression point at `ceiling` for `p_lo`.
pub fn ceiling_current_for(
    p_lo: PowerWatts,
    ceiling: PowerDbm,
    params: &ReceiverParams,
    offset_freq: f64,
) -> f64 {
    let spec = ToneBeatSpec { p_lo, p_sig: ceiling.to_watts(), offset_freq };
    SQRT_2 * beat_current_rms(&spec, params) / compression_drive(COMPRESSION_DB)
}

/// Analysis bandwidth that puts the detectability floor at `floor` for `p_lo`.
pub fn analysis_bandwidth_for(
    p_lo: PowerWatts,
    floor: PowerDbm,
    params: &ReceiverParams,
    model: &LinearityModel,
) -> Result<f64> {
    let spec = ToneBeatSpec { p_lo, p_sig: floor.to_watts(), offset_freq: model.offset_freq };
    let tone = beat_current_rms(&spec, params).powi(2);
    let total = noise_spectrum(p_lo, params, model)?;
    let max_width = model.sample_rate;
    if band_power(&total, model.offset_freq, max_width)? < tone {
        return Err(invalid("floor lies below the noise of the full capture band"));
    }
    let (mut lo, mut hi) = (1.0f64, max_width);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if band_power(&total, model.offset_freq, mid)? < tone {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::dbm_to_watts;
    use proptest::prelude::*;

    fn lo_100uw() -> PowerWatts {
        PowerWatts::new(100e-6)
    }

    #[test]
    fn beat_current_values() {
        let p = ReceiverParams::default();
        let zero = ToneBeatSpec::new(lo_100uw(), PowerWatts::ZERO);
        assert_eq!(beat_current_rms(&zero, &p), 0.0);

        let spec = ToneBeatSpec::new(lo_100uw(), dbm_to_watts(PowerDbm(-38.0)));
        let h = p.tia_gain_sq(120e6).sqrt();
        let i = beat_current_rms(&spec, &p) / h;
        assert!((i - 4.7293e-6).abs() < 0.0001e-6, "{i}");

        let quad = ToneBeatSpec { p_lo: PowerWatts::new(400e-6), ..spec };
        assert!((beat_current_rms(&quad, &p) / beat_current_rms(&spec, &p) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn offset_must_sit_in_band() {
        let p = ReceiverParams::default();
        let spec = ToneBeatSpec { offset_freq: 2e9, ..ToneBeatSpec::new(lo_100uw(), lo_100uw()) };
        assert!(spec.validate(&p).is_err());
    }

    #[test]
    fn ceiling_scaling_law() {
        let p = ReceiverParams::default();
        let m = LinearityModel::default();
        let at = |w: f64| max_signal_power(PowerWatts::new(w), &p, &m).unwrap().0;
        assert!((at(100e-6) + 38.0).abs() < 0.05, "{}", at(100e-6));
        assert!((at(1e-3) - at(100e-6) + 10.0).abs() < 1e-9);
        assert!((at(10e-6) - at(100e-6) - 10.0).abs() < 1e-9);
        assert!(max_signal_power(PowerWatts::ZERO, &p, &m).is_err());
    }

    #[test]
    fn limiter_compression_point() {
        let a = compression_drive(1.0);
        assert!((db(limiter_fundamental_ratio(a).powi(2)) + 1.0).abs() < 1e-9);
        // Small-signal limit
        assert!((limiter_fundamental_ratio(1e-4) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ceiling_current_inverts_compression_point() {
        let p = ReceiverParams::default();
        let ic = ceiling_current_for(lo_100uw(), PowerDbm(-40.0), &p, 120e6);
        let m = LinearityModel { ceiling_current: ic, ..Default::default() };
        let c = max_signal_power(lo_100uw(), &p, &m).unwrap();
        assert!((c.0 + 40.0).abs() < 1e-9);
    }

    #[test]
    fn analysis_bandwidth_inverts_floor() {
        let p = ReceiverParams::default();
        let m = LinearityModel::default();
        let b = analysis_bandwidth_for(lo_100uw(), PowerDbm(-75.0), &p, &m).unwrap();
        let m = LinearityModel { analysis_bandwidth: b, ..m };
        let r = dynamic_range(lo_100uw(), &p, &m).unwrap();
        assert!((r.floor.0 + 75.0).abs() < 1e-6, "{:?}", r);
    }

    #[test]
    fn sweep_slope_and_flags() {
        let p = ReceiverParams::default();
        let m = LinearityModel::default();
        let grid: Vec<PowerDbm> = (-90..=-30).map(|d| PowerDbm(d as f64)).collect();
        let sweep = single_tone_sweep(lo_100uw(), &grid, &p, &m, 5).unwrap();
        let range = dynamic_range(lo_100uw(), &p, &m).unwrap();

        let linear: Vec<_> = sweep
            .iter()
            .filter(|s| s.input.0 >= range.floor.0 + 10.0 && s.input.0 <= range.ceiling.0 - 10.0)
            .collect();
        assert!(linear.len() >= 5);
        let (a, b) = (linear[0], linear[linear.len() - 1]);
        let slope = (b.output_db - a.output_db) / (b.input.0 - a.input.0);
        assert!((slope - 1.0).abs() < 0.05, "{slope}");

        assert!(!sweep[0].detectable);
        assert!(sweep.last().unwrap().detectable);
        for s in &sweep {
            if s.input.0 < range.floor.0 - 1.0 {
                assert!(!s.detectable, "{s:?}");
            }
            if s.input.0 > range.floor.0 + 1.0 {
                assert!(s.detectable, "{s:?}");
            }
        }
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let p = ReceiverParams::default();
        let grid = [PowerDbm(-40.0), PowerDbm(-50.0)];
        assert!(single_tone_sweep(lo_100uw(), &grid, &p, &LinearityModel::default(), 1).is_err());
    }

    #[test]
    fn scaled_report_keeps_range() {
        let p = ReceiverParams::default();
        let r = dynamic_range(lo_100uw(), &p, &LinearityModel::default()).unwrap();
        for w in [1e-6, 1e-5, 1e-3, 1e-2] {
            let s = r.scaled_to_lo(lo_100uw(), PowerWatts::new(w));
            assert!((s.ceiling.0 - s.floor.0 - r.range_db).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn beat_symmetric_in_powers(a in 0.0f64..1e-2, b in 0.0f64..1e-2) {
            let p = ReceiverParams::default();
            let x = beat_current_rms(&ToneBeatSpec::new(PowerWatts::new(a), PowerWatts::new(b)), &p);
            let y = beat_current_rms(&ToneBeatSpec::new(PowerWatts::new(b), PowerWatts::new(a)), &p);
            prop_assert!((x - y).abs() <= 1e-15 * x.max(1e-30));
        }

        #[test]
        fn compression_monotone_and_concave(start in -80.0f64..-30.0) {
            let p = ReceiverParams::default();
            let m = LinearityModel::default();
            let out = |dbm: f64| {
                let spec = ToneBeatSpec::new(lo_100uw(), dbm_to_watts(PowerDbm(dbm)));
                db(compressed_tone_power(beat_current_rms(&spec, &p), &m))
            };
            let (a, b, c) = (out(start), out(start + 1.0), out(start + 2.0));
            prop_assert!(b >= a && c >= b);
            prop_assert!((c - b) <= (b - a) + 1e-9);
        }
    }
}
