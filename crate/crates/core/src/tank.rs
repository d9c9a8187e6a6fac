//! Physical and normalized descriptions of the resonant tank.
//!
//! [`TankParams`] holds the component values every analysis consumes;
//! [`NormalizedPoint`] is the dimensionless `(Ln, Qe, fn)` triple the gain
//! function works in. Everything here is a plain value with pure conversions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gate dead time used when a configuration omits it.
pub const DEFAULT_DEAD_TIME: f64 = 100e-9;
/// Output capacitance used when a configuration omits it.
pub const DEFAULT_OUTPUT_CAPACITANCE: f64 = 100e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be {rule}, got {value}")]
    OutOfRange {
        name: &'static str,
        rule: &'static str,
        value: f64,
    },
    #[error("{0}")]
    Inconsistent(String),
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::OutOfRange {
            name,
            rule: "positive and finite",
            value,
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::OutOfRange {
            name,
            rule: "non-negative and finite",
            value,
        })
    }
}

fn default_dead_time() -> f64 {
    DEFAULT_DEAD_TIME
}

fn default_cout() -> f64 {
    DEFAULT_OUTPUT_CAPACITANCE
}

/// Component values of the half-bridge LLC stage, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankParams {
    /// Series resonant inductance (H), including transformer leakage.
    pub lr: f64,
    /// Resonant capacitor (F).
    pub cr: f64,
    /// Magnetizing inductance (H).
    pub lm: f64,
    /// Primary to secondary turns ratio (per secondary half).
    pub n: f64,
    /// Rectifier diode forward drop (V).
    #[serde(default)]
    pub vf: f64,
    /// Output capacitor (F).
    #[serde(default = "default_cout")]
    pub cout: f64,
    /// Half-bridge dead time (s).
    #[serde(default = "default_dead_time")]
    pub t_dead: f64,
}

impl TankParams {
    /// Tank with default rectifier drop, output capacitor and dead time.
    pub fn new(lr: f64, cr: f64, lm: f64, n: f64) -> Self {
        Self {
            lr,
            cr,
            lm,
            n,
            vf: 0.0,
            cout: DEFAULT_OUTPUT_CAPACITANCE,
            t_dead: DEFAULT_DEAD_TIME,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        positive("lr", self.lr)?;
        positive("cr", self.cr)?;
        positive("lm", self.lm)?;
        positive("n", self.n)?;
        positive("cout", self.cout)?;
        non_negative("t_dead", self.t_dead)?;
        non_negative("vf", self.vf)?;
        if self.lm <= self.lr {
            return Err(ParamError::Inconsistent(format!(
                "lm ({:e}) must exceed lr ({:e})",
                self.lm, self.lr
            )));
        }
        Ok(())
    }

    /// Inductance ratio `Lm / Lr`.
    pub fn ln(&self) -> f64 {
        self.lm / self.lr
    }

    /// Characteristic impedance `sqrt(Lr / Cr)` of the series branch.
    pub fn characteristic_impedance(&self) -> f64 {
        (self.lr / self.cr).sqrt()
    }

    pub fn derived(&self, vout: f64, iout: f64) -> DerivedQuantities {
        let rl = load_resistance(vout, iout);
        DerivedQuantities {
            f0: series_resonance(self),
            fp: noload_resonance(self),
            re: effective_load(self.n, rl),
            rl,
        }
    }

    /// Rebuilds a tank from its normalized description around a series
    /// resonance `f0` and an equivalent load `re`.
    pub fn from_normalized(ln: f64, qe: f64, f0: f64, re: f64, n: f64) -> Self {
        let w0 = 2.0 * PI * f0;
        let cr = 1.0 / (w0 * qe * re);
        let lr = 1.0 / (w0 * w0 * cr);
        Self::new(lr, cr, ln * lr, n)
    }
}

/// Electrical requirements the tank is designed against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRequirements {
    pub vin_min: f64,
    pub vin_nom: f64,
    pub vin_max: f64,
    pub vout_min: f64,
    pub vout_nom: f64,
    pub vout_max: f64,
    pub iout_min: f64,
    pub iout_max: f64,
    /// Target series resonance (Hz).
    pub f0_target: f64,
    /// Controller frequency clamp (Hz).
    pub fsw_min: f64,
    pub fsw_max: f64,
}

impl DesignRequirements {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("vin_min", self.vin_min)?;
        positive("vout_min", self.vout_min)?;
        non_negative("iout_min", self.iout_min)?;
        positive("iout_max", self.iout_max)?;
        positive("f0_target", self.f0_target)?;
        positive("fsw_min", self.fsw_min)?;
        let ordered = |lo: f64, mid: f64, hi: f64| lo <= mid && mid <= hi;
        if !ordered(self.vin_min, self.vin_nom, self.vin_max) {
            return Err(ParamError::Inconsistent(
                "input voltages must satisfy vin_min <= vin_nom <= vin_max".into(),
            ));
        }
        if !ordered(self.vout_min, self.vout_nom, self.vout_max) {
            return Err(ParamError::Inconsistent(
                "output voltages must satisfy vout_min <= vout_nom <= vout_max".into(),
            ));
        }
        if self.iout_min > self.iout_max {
            return Err(ParamError::Inconsistent("iout_min must not exceed iout_max".into()));
        }
        if !(self.fsw_min < self.f0_target && self.f0_target < self.fsw_max) {
            return Err(ParamError::Inconsistent(
                "frequencies must satisfy fsw_min < f0_target < fsw_max".into(),
            ));
        }
        Ok(())
    }

    /// The reference requirement: a 48 V bus (allowed to sag to
    /// 39 V) feeding 12 V at up to 0.5 A with a 100 kHz series resonance.
    pub fn reference_48v_to_12v() -> Self {
        Self {
            vin_min: 39.0,
            vin_nom: 48.0,
            vin_max: 48.0,
            vout_min: 12.0,
            vout_nom: 12.0,
            vout_max: 12.0,
            iout_min: 0.0,
            iout_max: 0.5,
            f0_target: 100e3,
            fsw_min: 80e3,
            fsw_max: 130e3,
        }
    }
}

/// Dimensionless operating descriptor fed to the gain function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint {
    pub ln: f64,
    pub qe: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

impl NormalizedPoint {
    pub fn new(ln: f64, qe: f64, fn_: f64) -> Self {
        Self { ln, qe, fn_ }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    pub f0: f64,
    pub fp: f64,
    pub re: f64,
    pub rl: f64,
}

/// Series resonance of `Lr` with `Cr` (Hz).
pub fn series_resonance(tank: &TankParams) -> f64 {
    1.0 / (2.0 * PI * (tank.lr * tank.cr).sqrt())
}

/// No-load resonance of `Lr + Lm` with `Cr` (Hz).
pub fn noload_resonance(tank: &TankParams) -> f64 {
    1.0 / (2.0 * PI * ((tank.lr + tank.lm) * tank.cr).sqrt())
}

/// FHA reflection of a rectified DC load to the primary: `8 n² RL / π²`.
///
/// An open load (`RL = ∞`) reflects to an infinite resistance.
pub fn effective_load(n: f64, rl: f64) -> f64 {
    8.0 * n * n * rl / (PI * PI)
}

/// DC load resistance `Vout / Iout`; zero current maps to an open circuit.
pub fn load_resistance(vout: f64, iout: f64) -> f64 {
    if iout == 0.0 {
        f64::INFINITY
    } else {
        vout / iout
    }
}

pub fn normalize(tank: &TankParams, re: f64, fsw: f64) -> NormalizedPoint {
    NormalizedPoint {
        ln: tank.ln(),
        qe: tank.characteristic_impedance() / re,
        fn_: fsw / series_resonance(tank),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_tank() -> TankParams {
        TankParams::new(37e-6, 68e-9, 75e-6, 1.83)
    }

    #[test]
    fn series_resonance_values() {
        let f0 = series_resonance(&reference_tank());
        assert!((f0 - 100.3e3).abs() < 0.1e3, "f0 = {f0}");

        let unit = TankParams::new(1.0, 1.0 / (4.0 * PI * PI), 2.0, 1.0);
        assert_relative_eq!(series_resonance(&unit), 1.0, epsilon = 1e-12);

        let built = TankParams::new(28e-6 + 6e-6, 68e-9, 75e-6, 1.83);
        assert!((series_resonance(&built) - 104.7e3).abs() < 0.1e3);
    }

    #[test]
    fn noload_resonance_values() {
        let fp = noload_resonance(&reference_tank());
        assert!((fp - 57.7e3).abs() < 0.1e3, "fp = {fp}");

        // raw formula with no magnetizing branch collapses onto f0
        let mut t = reference_tank();
        t.lm = 0.0;
        assert_relative_eq!(noload_resonance(&t), series_resonance(&t), epsilon = 1e-9);

        let t = TankParams::new(10e-6, 50e-9, 20.5e-6, 1.0);
        let ratio = noload_resonance(&t) / series_resonance(&t);
        assert_relative_eq!(ratio, 1.0 / 3.05f64.sqrt(), epsilon = 1e-12);
        assert!((ratio - 0.573).abs() < 5e-4);
    }

    #[test]
    fn effective_load_values() {
        assert!((effective_load(1.83, 24.0) - 65.1).abs() < 0.05);
        assert_relative_eq!(effective_load(1.0, PI * PI / 8.0), 1.0, epsilon = 1e-12);
        assert!((effective_load(2.0, 24.0) - 77.8).abs() < 0.05);
        assert!(effective_load(1.83, load_resistance(12.0, 0.0)).is_infinite());
    }

    #[test]
    fn normalize_reference_point() {
        let tank = reference_tank();
        let re = effective_load(tank.n, load_resistance(12.0, 0.5));
        let p = normalize(&tank, re, 100e3);
        assert!((p.ln - 2.03).abs() < 0.005);
        assert!((p.qe - 0.36).abs() < 0.005);
        assert!((p.fn_ - 0.997).abs() < 0.001);

        let at_f0 = normalize(&tank, re, series_resonance(&tank));
        assert_eq!(at_f0.fn_, 1.0);

        let open = normalize(&tank, effective_load(tank.n, load_resistance(12.0, 0.0)), 1e5);
        assert_eq!(open.qe, 0.0);
    }

    #[test]
    fn validation_rejects_bad_tanks() {
        assert!(reference_tank().validate().is_ok());
        let mut t = reference_tank();
        t.lm = t.lr * 0.5;
        assert!(matches!(t.validate(), Err(ParamError::Inconsistent(_))));
        let mut t = reference_tank();
        t.cr = -1.0;
        assert!(matches!(t.validate(), Err(ParamError::OutOfRange { name: "cr", .. })));
        let mut t = reference_tank();
        t.t_dead = f64::NAN;
        assert!(t.validate().is_err());
    }

    #[test]
    fn requirements_validation() {
        let r = DesignRequirements::reference_48v_to_12v();
        assert!(r.validate().is_ok());
        let mut bad = r;
        bad.vin_min = 50.0;
        assert!(bad.validate().is_err());
        let mut bad = r;
        bad.fsw_max = 90e3;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn normalized_round_trip(
            ln in 1.01f64..20.0,
            qe in 0.01f64..5.0,
            f0 in 1e3f64..1e7,
            re in 0.1f64..1e4,
        ) {
            let tank = TankParams::from_normalized(ln, qe, f0, re, 1.0);
            let p = normalize(&tank, re, f0);
            prop_assert!(((p.ln - ln) / ln).abs() < 1e-12);
            prop_assert!(((p.qe - qe) / qe).abs() < 1e-12);
            prop_assert!((p.fn_ - 1.0).abs() < 1e-12);
        }

        #[test]
        fn noload_below_series(
            lr in 1e-7f64..1e-2,
            cr in 1e-10f64..1e-4,
            ratio in 1.0001f64..50.0,
        ) {
            let t = TankParams::new(lr, cr, lr * ratio, 1.0);
            prop_assert!(noload_resonance(&t) < series_resonance(&t));
        }

        #[test]
        fn effective_load_scaling(n in 0.1f64..10.0, rl in 0.1f64..1e3, k in 0.1f64..10.0) {
            let base = effective_load(n, rl);
            prop_assert!((effective_load(n, k * rl) / (k * base) - 1.0).abs() < 1e-12);
            prop_assert!((effective_load(k * n, rl) / (k * k * base) - 1.0).abs() < 1e-12);
        }
    }
}
