//! The full parameter set of a run and its `key = value` encoding.

use anyhow::{anyhow, Context, Result};
use bhdtwin::units::{dbm_to_watts, watts_to_dbm, PowerDbm, PowerWatts};
use bhdtwin::{NoisePlane, NoiseReference, Profile};

use crate::config::ConfigFile;

#[derive(Debug, Clone, PartialEq)]
pub struct CmrrSweep {
    pub f_min: f64,
    pub f_max: f64,
    pub f_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcnrSweep {
    /// LO powers, dBm; `-inf` is a dark row.
    pub lo_dbm: Vec<f64>,
    pub band_lo: f64,
    pub band_hi: f64,
    pub f_step: f64,
    pub f_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearitySweep {
    pub p_lo: PowerWatts,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    pub p_step_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpskRun {
    pub target_ber: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    pub p_step_db: f64,
    pub constellation_dbm: f64,
    pub constellation_symbols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkrSweep {
    pub zeta: Vec<f64>,
    pub d_max: f64,
    pub d_step: f64,
    /// Distances added to the regular grid, km.
    pub extra: Vec<f64>,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub profile: Profile,
    pub cmrr: CmrrSweep,
    pub qcnr: QcnrSweep,
    pub linearity: LinearitySweep,
    pub qpsk: QpskRun,
    pub skr: SkrSweep,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            profile: Profile::shipped(),
            cmrr: CmrrSweep { f_min: 10e6, f_max: 2e9, f_step: 10e6 },
            qcnr: QcnrSweep {
                lo_dbm: vec![f64::NEG_INFINITY, -5.0, -2.0, 1.0, 4.4, 7.4, 9.4, 10.9, 12.0],
                band_lo: 1e6,
                band_hi: 1e9,
                f_step: 10e6,
                f_max: 2e9,
            },
            linearity: LinearitySweep { p_lo: PowerWatts::new(100e-6), p_min_dbm: -90.0, p_max_dbm: -20.0, p_step_db: 1.0 },
            qpsk: QpskRun {
                target_ber: 1e-3,
                p_min_dbm: -62.0,
                p_max_dbm: -50.0,
                p_step_db: 2.0,
                constellation_dbm: -50.0,
                constellation_symbols: 2000,
            },
            skr: SkrSweep { zeta: vec![0.0, 0.01, 0.02, 0.03, 0.04], d_max: 50.0, d_step: 0.5, extra: vec![0.1], floor: 1e6 },
        }
    }
}

/// Text form of one kind of setting.
trait Codec {
    type Value;
    fn decode(s: &str) -> Result<Self::Value>;
    fn encode(v: &Self::Value) -> String;
}

struct Float;
struct Count;
struct Bits;
struct Flag;
struct Dbm;
struct LoDbm;
struct Split;
struct Reference;
struct Plane;
struct Floats;

impl Codec for Float {
    type Value = f64;
    fn decode(s: &str) -> Result<f64> {
        s.parse().map_err(|_| anyhow!("`{s}` is not a number"))
    }
    fn encode(v: &f64) -> String {
        v.to_string()
    }
}

impl Codec for Count {
    type Value = usize;
    fn decode(s: &str) -> Result<usize> {
        parse_count(s).and_then(|n| usize::try_from(n).map_err(|_| anyhow!("`{s}` is too large")))
    }
    fn encode(v: &usize) -> String {
        v.to_string()
    }
}

impl Codec for Bits {
    type Value = u64;
    fn decode(s: &str) -> Result<u64> {
        parse_count(s)
    }
    fn encode(v: &u64) -> String {
        v.to_string()
    }
}

fn parse_count(s: &str) -> Result<u64> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    // Accept exact scientific forms such as 1e7 or 2^16.
    if let Some((base, exp)) = s.split_once('^') {
        let (b, e): (u64, u32) = (base.parse()?, exp.parse()?);
        return b.checked_pow(e).ok_or_else(|| anyhow!("`{s}` overflows"));
    }
    let x: f64 = s.parse().map_err(|_| anyhow!("`{s}` is not a non-negative integer"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(63) {
        Ok(x as u64)
    } else {
        Err(anyhow!("`{s}` is not a non-negative integer"))
    }
}

impl Codec for Flag {
    type Value = bool;
    fn decode(s: &str) -> Result<bool> {
        match s {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(anyhow!("`{s}` is not a boolean")),
        }
    }
    fn encode(v: &bool) -> String {
        v.to_string()
    }
}

impl Codec for Dbm {
    type Value = PowerDbm;
    fn decode(s: &str) -> Result<PowerDbm> {
        parse_power(s).map(watts_to_dbm)
    }
    fn encode(v: &PowerDbm) -> String {
        v.0.to_string()
    }
}

/// A power field held in watts but written in dBm.
impl Codec for LoDbm {
    type Value = PowerWatts;
    fn decode(s: &str) -> Result<PowerWatts> {
        parse_power(s)
    }
    fn encode(v: &PowerWatts) -> String {
        v.to_dbm().0.to_string()
    }
}

impl Codec for Split {
    type Value = [f64; 2];
    fn decode(s: &str) -> Result<[f64; 2]> {
        let first = Float::decode(s)?;
        Ok([first, 1.0 - first])
    }
    fn encode(v: &[f64; 2]) -> String {
        v[0].to_string()
    }
}

impl Codec for Reference {
    type Value = NoiseReference;
    fn decode(s: &str) -> Result<NoiseReference> {
        NoiseReference::parse(s).ok_or_else(|| anyhow!("`{s}` is not one of input, received"))
    }
    fn encode(v: &NoiseReference) -> String {
        v.as_str().to_string()
    }
}

impl Codec for Plane {
    type Value = NoisePlane;
    fn decode(s: &str) -> Result<NoisePlane> {
        NoisePlane::parse(s).ok_or_else(|| anyhow!("`{s}` is not one of fiber, fiber+detection"))
    }
    fn encode(v: &NoisePlane) -> String {
        v.as_str().to_string()
    }
}

impl Codec for Floats {
    type Value = Vec<f64>;
    fn decode(s: &str) -> Result<Vec<f64>> {
        s.split(',').map(|x| Float::decode(x.trim())).collect()
    }
    fn encode(v: &Vec<f64>) -> String {
        v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
    }
}

/// Optical power with a unit: `W`, `mW`, `uW`, `nW`, `pW` or `dBm`. A bare
/// number is read as dBm, and `-inf` as zero power.
pub fn parse_power(s: &str) -> Result<PowerWatts> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    let (num, scale) = if let Some(v) = lower.strip_suffix("dbm") {
        let dbm: f64 = v.trim().parse().map_err(|_| anyhow!("`{s}` is not a power"))?;
        return Ok(dbm_to_watts(PowerDbm(dbm)));
    } else if let Some(v) = t.strip_suffix("mW") {
        (v, 1e-3)
    } else if let Some(v) = t.strip_suffix("uW").or_else(|| t.strip_suffix("µW")) {
        (v, 1e-6)
    } else if let Some(v) = t.strip_suffix("nW") {
        (v, 1e-9)
    } else if let Some(v) = t.strip_suffix("pW") {
        (v, 1e-12)
    } else if let Some(v) = t.strip_suffix('W') {
        (v, 1.0)
    } else {
        let dbm: f64 = t.parse().map_err(|_| anyhow!("`{s}` is not a power"))?;
        return Ok(dbm_to_watts(PowerDbm(dbm)));
    };
    let x: f64 = num.trim().parse().map_err(|_| anyhow!("`{s}` is not a power"))?;
    PowerWatts::try_new(x * scale).ok_or_else(|| anyhow!("power `{s}` must be >= 0"))
}

/// Time with an optional unit suffix (`s`, `ms`, `us`, `ns`, `ps`, `fs`).
pub fn parse_duration(s: &str) -> Result<f64> {
    let t = s.trim();
    for (suffix, scale) in [("fs", 1e-15), ("ps", 1e-12), ("ns", 1e-9), ("us", 1e-6), ("ms", 1e-3), ("s", 1.0)] {
        if let Some(v) = t.strip_suffix(suffix) {
            return v.trim().parse::<f64>().map(|x| x * scale).map_err(|_| anyhow!("`{s}` is not a duration"));
        }
    }
    t.parse().map_err(|_| anyhow!("`{s}` is not a duration"))
}

fn unknown_key(key: &str) -> anyhow::Error {
    let module = key.split('.').next().unwrap_or("");
    let known: Vec<&str> =
        Settings::KEYS.iter().copied().filter(|k| k.split('.').next() == Some(module)).collect();
    if known.is_empty() {
        anyhow!("unknown key `{key}`")
    } else {
        anyhow!("unknown key `{key}`; `{module}` accepts {}", known.join(", "))
    }
}

macro_rules! keys {
    ($($key:literal => $codec:ident : $($field:ident).+;)*) => {
        impl Settings {
            /// Every recognised key.
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => self.$($field).+ = $codec::decode(value).with_context(|| format!("{key}"))?,)*
                    _ => return Err(unknown_key(key)),
                }
                Ok(())
            }

            /// Current values in a fixed order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$(($key, $codec::encode(&self.$($field).+))),*]
            }
        }
    };
}

keys! {
    "receiver.responsivity" => Float: profile.receiver.responsivity;
    "receiver.coupling_efficiency" => Float: profile.receiver.coupling_efficiency;
    "receiver.c_pd" => Float: profile.receiver.c_pd;
    "receiver.input_noise_current_rms" => Float: profile.receiver.input_noise_current_rms;
    "receiver.reference_bandwidth" => Float: profile.receiver.reference_bandwidth;
    "receiver.tia_bandwidth" => Float: profile.receiver.tia_bandwidth;
    "receiver.saturation_lo_power_dbm" => LoDbm: profile.receiver.saturation_lo_power;
    "receiver.split_ratio" => Split: profile.receiver.arm_split;
    "receiver.arm_responsivity_mismatch" => Float: profile.receiver.arm_responsivity_mismatch;
    "receiver.arm_skew" => Float: profile.receiver.arm_skew;
    "receiver.cmrr_ceiling_db" => Float: profile.receiver.cmrr_ceiling_db;
    "receiver.noise_corner_freq" => Float: profile.receiver.noise_corner_freq;
    "receiver.noise_reference" => Reference: profile.receiver.noise_reference;
    "receiver.compression_exponent" => Float: profile.receiver.compression_exponent;
    "capture.analysis_band" => Float: profile.capture.analysis_band;
    "capture.n_samples" => Count: profile.capture.n_samples;
    "linearity.ceiling_current" => Float: profile.linearity.ceiling_current;
    "linearity.analysis_bandwidth" => Float: profile.linearity.analysis_bandwidth;
    "linearity.offset_freq" => Float: profile.linearity.offset_freq;
    "linearity.sample_rate" => Float: profile.linearity.sample_rate;
    "linearity.n_samples" => Count: profile.linearity.n_samples;
    "linearity.p_lo_dbm" => LoDbm: linearity.p_lo;
    "linearity.p_sig_min_dbm" => Float: linearity.p_min_dbm;
    "linearity.p_sig_max_dbm" => Float: linearity.p_max_dbm;
    "linearity.p_sig_step_db" => Float: linearity.p_step_db;
    "qpsk.baud" => Float: profile.modem.baud;
    "qpsk.if_freq" => Float: profile.modem.if_freq;
    "qpsk.rolloff" => Float: profile.modem.rolloff;
    "qpsk.sample_rate" => Float: profile.modem.sample_rate;
    "qpsk.n_symbols" => Count: profile.modem.n_symbols;
    "qpsk.p_lo_dbm" => LoDbm: profile.modem.p_lo;
    "qpsk.rrc_span" => Count: profile.modem.rrc_span;
    "qpsk.backend_noise_psd" => Float: profile.modem.backend_noise_psd;
    "qpsk.noise_enabled" => Flag: profile.modem.noise_enabled;
    "qpsk.bit_cap" => Bits: profile.modem.bit_cap;
    "qpsk.min_errors" => Bits: profile.modem.min_errors;
    "qpsk.launch_power_dbm" => Dbm: profile.modem.launch_power;
    "qpsk.target_ber" => Float: qpsk.target_ber;
    "qpsk.p_sig_min_dbm" => Float: qpsk.p_min_dbm;
    "qpsk.p_sig_max_dbm" => Float: qpsk.p_max_dbm;
    "qpsk.p_sig_step_db" => Float: qpsk.p_step_db;
    "qpsk.constellation_power_dbm" => Float: qpsk.constellation_dbm;
    "qpsk.constellation_symbols" => Count: qpsk.constellation_symbols;
    "qkd.fiber_loss" => Float: profile.link.fiber_loss;
    "qkd.detection_loss" => Float: profile.link.detection_loss;
    "qkd.receiver_excess_noise" => Float: profile.link.receiver_excess_noise;
    "qkd.beta" => Float: profile.link.beta;
    "qkd.symbol_rate" => Float: profile.link.symbol_rate;
    "qkd.noise_plane" => Plane: profile.link.noise_plane;
    "qkd.zeta" => Floats: skr.zeta;
    "qkd.distance_max" => Float: skr.d_max;
    "qkd.distance_step" => Float: skr.d_step;
    "qkd.distance_extra" => Floats: skr.extra;
    "qkd.skr_floor" => Float: skr.floor;
    "cmrr.f_min" => Float: cmrr.f_min;
    "cmrr.f_max" => Float: cmrr.f_max;
    "cmrr.f_step" => Float: cmrr.f_step;
    "qcnr.lo_dbm" => Floats: qcnr.lo_dbm;
    "qcnr.band_lo" => Float: qcnr.band_lo;
    "qcnr.band_hi" => Float: qcnr.band_hi;
    "qcnr.f_step" => Float: qcnr.f_step;
    "qcnr.f_max" => Float: qcnr.f_max;
}

impl Settings {
    /// Defaults, then the file, then the overrides; later sources win.
    pub fn resolve(file: Option<&ConfigFile>, overrides: &[(&str, String)]) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(file) = file {
            for (key, value, line) in &file.entries {
                s.set(key, value).with_context(|| format!("config line {line}"))?;
            }
        }
        for (key, value) in overrides {
            s.set(key, value).with_context(|| "command-line override".to_string())?;
        }
        Ok(s)
    }
}

/// Ascending grid `start, start + step, …` up to and including `stop`.
pub fn stepped(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(anyhow!("sweep needs finite start <= stop and step > 0, got {start}..{stop} by {step}"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(anyhow!("sweep of {n} points is too long"));
    }
    // Multiples of the step keep values such as 1 GHz exact.
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let s = Settings::default();
        let mut t = Settings { qpsk: QpskRun { target_ber: 0.5, ..s.qpsk.clone() }, ..s.clone() };
        for (k, v) in s.entries() {
            t.set(k, &v).unwrap();
        }
        assert_eq!(t.entries(), s.entries());
        assert_eq!(s.entries().len(), Settings::KEYS.len());
    }

    #[test]
    fn precedence_cli_over_file_over_default() {
        let file = ConfigFile::parse("receiver.c_pd = 3e-13\nqkd.beta = 0.9\n").unwrap();
        let s = Settings::resolve(Some(&file), &[("qkd.beta", "0.95".into())]).unwrap();
        assert_eq!(s.profile.receiver.c_pd, 3e-13);
        assert_eq!(s.profile.link.beta, 0.95);
        assert_eq!(s.profile.receiver.responsivity, 1.0);
    }

    #[test]
    fn errors_name_key_and_line() {
        let file = ConfigFile::parse("\nreceiver.c_pd = big\n").unwrap();
        let err = format!("{:#}", Settings::resolve(Some(&file), &[]).unwrap_err());
        assert!(err.contains("line 2") && err.contains("receiver.c_pd"), "{err}");
        let file = ConfigFile::parse("receiver.nonsense = 1\n").unwrap();
        assert!(format!("{:#}", Settings::resolve(Some(&file), &[]).unwrap_err()).contains("receiver.nonsense"));
    }

    #[test]
    fn power_units() {
        assert!((parse_power("1mW").unwrap().watts() - 1e-3).abs() < 1e-18);
        assert!((parse_power("100uW").unwrap().watts() - 1e-4).abs() < 1e-18);
        assert!((parse_power("-10dBm").unwrap().watts() - 1e-4).abs() < 1e-15);
        assert!((parse_power("-10").unwrap().watts() - 1e-4).abs() < 1e-15);
        assert_eq!(parse_power("-inf").unwrap().watts(), 0.0);
        assert!(parse_power("-1mW").is_err());
        assert!(parse_power("lots").is_err());
    }

    #[test]
    fn durations_and_counts() {
        assert!((parse_duration("10ps").unwrap() - 1e-11).abs() < 1e-24);
        assert_eq!(parse_duration("1e-11").unwrap(), 1e-11);
        assert_eq!(parse_count("1e7").unwrap(), 10_000_000);
        assert_eq!(parse_count("2^16").unwrap(), 65_536);
        assert!(parse_count("1.5").is_err());
    }

    #[test]
    fn stepped_grid_hits_multiples() {
        let g = stepped(10e6, 2e9, 10e6).unwrap();
        assert_eq!(g.len(), 200);
        assert!(g.contains(&1e9));
        assert!(stepped(1.0, 0.0, 1.0).is_err());
    }
}
