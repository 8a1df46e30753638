//! Optical power units.
//!
//! Powers are carried as [`PowerWatts`] internally; [`PowerDbm`] exists for the
//! places where a value is naturally quoted in dBm (sweeps, sensitivities).

use std::fmt;

/// Optical power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PowerDbm(pub f64);

/// Optical power in watts. Never negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PowerWatts(f64);

impl PowerWatts {
    pub const ZERO: PowerWatts = PowerWatts(0.0);

    /// Panics on negative or NaN input; use [`PowerWatts::try_new`] for untrusted values.
    pub fn new(watts: f64) -> Self {
        Self::try_new(watts).expect("optical power must be finite and non-negative")
    }

    pub fn try_new(watts: f64) -> Option<Self> {
        (watts.is_finite() && watts >= 0.0).then_some(PowerWatts(watts))
    }

    pub fn from_mw(milliwatts: f64) -> Self {
        Self::new(milliwatts * 1e-3)
    }

    pub fn watts(self) -> f64 {
        self.0
    }

    pub fn to_dbm(self) -> PowerDbm {
        watts_to_dbm(self)
    }
}

impl PowerDbm {
    pub fn dbm(self) -> f64 {
        self.0
    }

    pub fn to_watts(self) -> PowerWatts {
        dbm_to_watts(self)
    }
}

impl From<PowerDbm> for PowerWatts {
    fn from(p: PowerDbm) -> Self {
        dbm_to_watts(p)
    }
}

impl From<PowerWatts> for PowerDbm {
    fn from(p: PowerWatts) -> Self {
        watts_to_dbm(p)
    }
}

impl fmt::Display for PowerDbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} dBm", self.0)
    }
}

impl fmt::Display for PowerWatts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} W", self.0)
    }
}

pub fn dbm_to_watts(p: PowerDbm) -> PowerWatts {
    PowerWatts(1e-3 * 10f64.powf(p.0 / 10.0))
}

/// Zero watts maps to negative infinity dBm.
pub fn watts_to_dbm(p: PowerWatts) -> PowerDbm {
    PowerDbm(10.0 * (p.0 / 1e-3).log10())
}

/// Power ratio to decibels.
pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn from_db(value_db: f64) -> f64 {
    10f64.powf(value_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_lo_power_in_both_units() {
        let p = dbm_to_watts(PowerDbm(10.9));
        assert!((p.watts() * 1e3 - 12.3).abs() < 0.05, "{p}");
    }

    #[test]
    fn reference_points() {
        assert!((dbm_to_watts(PowerDbm(0.0)).watts() - 1e-3).abs() < 1e-18);
        let p = dbm_to_watts(PowerDbm(-17.0)).watts();
        assert!((p - 19.95e-6).abs() < 0.01e-6);
        assert_eq!(watts_to_dbm(PowerWatts::ZERO).0, f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_negative_power() {
        assert!(PowerWatts::try_new(-1e-9).is_none());
        assert!(PowerWatts::try_new(f64::NAN).is_none());
    }

    proptest! {
        #[test]
        fn round_trip(watts in 1e-15f64..10.0) {
            let p = PowerWatts::new(watts);
            let back = dbm_to_watts(watts_to_dbm(p)).watts();
            prop_assert!(((back - watts) / watts).abs() < 1e-12);
        }
    }
}
