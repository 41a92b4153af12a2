//! Analytic energy model: per-inference energy from a power/duration
//! profile, and a battery-lifetime estimate for duty-cycled operation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Power/timing profile of the target device.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyProfile {
    /// Power draw while running an inference, mW.
    pub active_power_mw: f64,
    /// Power draw of the awake-but-idle device, mW.
    pub baseline_power_mw: f64,
    /// Duration of one inference, ms.
    pub inference_duration_ms: f64,
}

impl Default for EnergyProfile {
    fn default() -> Self {
        EnergyProfile {
            active_power_mw: 316.0,
            baseline_power_mw: 300.0,
            inference_duration_ms: 27.0,
        }
    }
}

impl EnergyProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.active_power_mw > 0.0) || !(self.baseline_power_mw > 0.0) {
            return Err(Error::Config("powers must be positive".into()));
        }
        if !(self.inference_duration_ms > 0.0) {
            return Err(Error::Config("inference duration must be positive".into()));
        }
        Ok(())
    }
}

/// Per-inference energy, mJ.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyEstimate {
    /// activePower * duration / 1000.
    pub total_mj: f64,
    /// (activePower - baselinePower) * duration / 1000: the cost of
    /// computing over merely being awake.
    pub marginal_mj: f64,
}

pub fn estimate_inference_energy(profile: &EnergyProfile) -> Result<EnergyEstimate> {
    profile.validate()?;
    Ok(EnergyEstimate {
        total_mj: profile.active_power_mw * profile.inference_duration_ms / 1000.0,
        marginal_mj: (profile.active_power_mw - profile.baseline_power_mw)
            * profile.inference_duration_ms
            / 1000.0,
    })
}

/// Days of operation on a battery, assuming `wakes_per_day` wake-ups that
/// each pay one inference plus `awake_overhead_ms` of baseline power.
/// `daily = wakes * (E_inf + baseline * overhead / 1000)` mJ;
/// `days = capacity_mwh * 3600 / daily` (1 mWh = 3600 mJ). Zero wakes
/// return the `f64::INFINITY` sentinel (the model never drains the
/// battery).
pub fn estimate_wake_budget(
    profile: &EnergyProfile,
    wakes_per_day: u64,
    awake_overhead_ms: f64,
    battery_capacity_mwh: f64,
) -> Result<f64> {
    if !(battery_capacity_mwh > 0.0) {
        return Err(Error::Config("battery capacity must be positive".into()));
    }
    if awake_overhead_ms < 0.0 {
        return Err(Error::Config("awake overhead must be non-negative".into()));
    }
    let inference = estimate_inference_energy(profile)?;
    if wakes_per_day == 0 {
        return Ok(f64::INFINITY);
    }
    let per_wake_mj = inference.total_mj + profile.baseline_power_mw * awake_overhead_ms / 1000.0;
    let daily_mj = wakes_per_day as f64 * per_wake_mj;
    Ok(battery_capacity_mwh * 3600.0 / daily_mj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_energy() {
        let e = estimate_inference_energy(&EnergyProfile::default()).unwrap();
        assert_eq!(e.total_mj, 8.532);
        assert_eq!(e.marginal_mj, 0.432);
    }

    #[test]
    fn marginal_plus_baseline_decomposition() {
        let p = EnergyProfile::default();
        let e = estimate_inference_energy(&p).unwrap();
        let baseline_part = p.baseline_power_mw * p.inference_duration_ms / 1000.0;
        assert!((e.marginal_mj + baseline_part - e.total_mj).abs() < 1e-12);
    }

    #[test]
    fn invalid_profiles_rejected() {
        let mut p = EnergyProfile::default();
        p.inference_duration_ms = 0.0;
        assert!(estimate_inference_energy(&p).is_err());
        let mut p = EnergyProfile::default();
        p.active_power_mw = -1.0;
        assert!(estimate_inference_energy(&p).is_err());
    }

    #[test]
    fn wake_budget_by_hand() {
        // Defaults: 100 wakes/day, 500 ms overhead, 4000 mWh.
        // per wake: 8.532 + 300*0.5 = 158.532 mJ; daily 15853.2 mJ;
        // days = 4000*3600 / 15853.2.
        let days =
            estimate_wake_budget(&EnergyProfile::default(), 100, 500.0, 4000.0).unwrap();
        assert!((days - 4000.0 * 3600.0 / 15853.2).abs() < 1e-9);
    }

    #[test]
    fn doubling_wakes_halves_budget() {
        let p = EnergyProfile::default();
        let once = estimate_wake_budget(&p, 50, 500.0, 4000.0).unwrap();
        let twice = estimate_wake_budget(&p, 100, 500.0, 4000.0).unwrap();
        assert!((once - 2.0 * twice).abs() < 1e-9 * once);
    }

    #[test]
    fn monotone_in_overhead() {
        let p = EnergyProfile::default();
        let short = estimate_wake_budget(&p, 100, 100.0, 4000.0).unwrap();
        let long = estimate_wake_budget(&p, 100, 1000.0, 4000.0).unwrap();
        assert!(long < short);
    }

    #[test]
    fn zero_wakes_is_unbounded() {
        let days = estimate_wake_budget(&EnergyProfile::default(), 0, 500.0, 4000.0).unwrap();
        assert!(days.is_infinite());
    }

    #[test]
    fn zero_battery_rejected() {
        assert!(estimate_wake_budget(&EnergyProfile::default(), 100, 500.0, 0.0).is_err());
    }
}
