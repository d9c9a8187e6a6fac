//! First-harmonic voltage gain of the LLC tank and the analyses built on it.
//!
//! The gain is
//!
//! ```text
//!            Ln·fn²
//! Mg = ─────────────────────────────────────────
//!      [(Ln+1)·fn² − 1] + j·[(fn² − 1)·fn·Qe·Ln]
//! ```
//!
//! and only its magnitude is used for regulation; the phase of the tank
//! input impedance decides whether an operating point is inductive.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::bracketed_root;
use crate::tank::{DesignRequirements, NormalizedPoint};

/// Denominator magnitude below which the gain is reported as a pole.
pub const POLE_THRESHOLD: f64 = 1e-15;
/// Stand-in for an infinite quality factor (shorted output).
pub const SHORT_CIRCUIT_QE: f64 = 1e6;
/// Upper end of the frequency bracket for all solves.
pub const FN_SEARCH_MAX: f64 = 100.0;
/// Width of the band around a region boundary reported as `Boundary`.
pub const BOUNDARY_WIDTH: f64 = 1e-9;
/// Default logarithmic sampling density for curves.
pub const SAMPLES_PER_DECADE: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GainError {
    #[error("gain pole at fn = {fn_} (Ln = {ln}, Qe = {qe})")]
    Pole { ln: f64, qe: f64, fn_: f64 },
    #[error("target gain {target} exceeds the peak gain {peak} (fn_peak = {fn_peak})")]
    Unreachable { target: f64, peak: f64, fn_peak: f64 },
    #[error("target gain {target} is at or below the high-frequency asymptote {asymptote}")]
    BelowAsymptote { target: f64, asymptote: f64 },
    #[error("shorted output at series resonance: tank current diverges")]
    ShortCircuitResonance,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub complex: Complex64,
    pub magnitude: f64,
    /// Phase of the complex gain in `(-π, π]`.
    pub phase: f64,
    /// Set when the point sits on a pole; `magnitude` is then infinite.
    pub pole: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub ln: f64,
    pub qe: f64,
    pub points: Vec<GainPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Inductive,
    Capacitive,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBand {
    pub mg_min: f64,
    pub mg_max: f64,
    /// No-load high-frequency asymptote `Ln / (Ln + 1)`.
    pub mg_inf: f64,
}

fn denominator(ln: f64, qe: f64, fn_: f64) -> Complex64 {
    let f2 = fn_ * fn_;
    Complex64::new((ln + 1.0) * f2 - 1.0, (f2 - 1.0) * fn_ * qe * ln)
}

fn magnitude(ln: f64, qe: f64, fn_: f64) -> f64 {
    ln * fn_ * fn_ / denominator(ln, qe, fn_).norm()
}

/// Evaluates the complex gain at a normalized operating point.
pub fn gain(p: NormalizedPoint) -> Result<GainPoint, GainError> {
    if !(p.fn_ > 0.0) {
        return Err(GainError::InvalidArgument(format!(
            "fn must be positive, got {}",
            p.fn_
        )));
    }
    let den = denominator(p.ln, p.qe, p.fn_);
    if den.norm() < POLE_THRESHOLD {
        return Err(GainError::Pole {
            ln: p.ln,
            qe: p.qe,
            fn_: p.fn_,
        });
    }
    let mg = Complex64::new(p.ln * p.fn_ * p.fn_, 0.0) / den;
    let mut phase = mg.arg();
    if phase <= -PI {
        phase += 2.0 * PI;
    }
    Ok(GainPoint {
        fn_: p.fn_,
        complex: mg,
        magnitude: mg.norm(),
        phase,
        pole: false,
    })
}

/// Log-spaced grid of `samples` points on `[lo, hi]`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let last = samples - 1;
    (0..samples)
        .map(|i| match i {
            0 => lo,
            i if i == last => hi,
            i => (a + (b - a) * i as f64 / last as f64).exp(),
        })
        .collect()
}

/// Number of samples giving `per_decade` density over `[lo, hi]`.
pub fn samples_for_span(lo: f64, hi: f64, per_decade: usize) -> usize {
    ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize + 1
}

/// Sweeps the gain over a log-spaced grid. Poles are kept as flagged
/// points rather than aborting the sweep.
pub fn gain_curve(ln: f64, qe: f64, fn_lo: f64, fn_hi: f64, samples: usize) -> Result<GainCurve, GainError> {
    if !(fn_lo > 0.0 && fn_lo < fn_hi) {
        return Err(GainError::InvalidArgument(format!(
            "need 0 < fn_lo < fn_hi, got [{fn_lo}, {fn_hi}]"
        )));
    }
    if samples < 2 {
        return Err(GainError::InvalidArgument("samples must be >= 2".into()));
    }
    let points = log_grid(fn_lo, fn_hi, samples)
        .into_iter()
        .map(|fn_| match gain(NormalizedPoint::new(ln, qe, fn_)) {
            Ok(p) => p,
            Err(_) => GainPoint {
                fn_,
                complex: Complex64::new(f64::INFINITY, 0.0),
                magnitude: f64::INFINITY,
                phase: 0.0,
                pole: true,
            },
        })
        .collect();
    Ok(GainCurve { ln, qe, points })
}

/// Location of the no-load pole, `fp / f0 = 1 / sqrt(Ln + 1)`.
pub fn noload_pole(ln: f64) -> f64 {
    1.0 / (ln + 1.0).sqrt()
}

/// Sign of `d|Mg|/dfn`, up to a positive factor: negative while the gain
/// rises. Comes from differentiating `|den|² / fn⁴`.
fn slope_indicator(ln: f64, qe: f64, f: f64) -> f64 {
    let r = (ln + 1.0) * f * f - 1.0;
    let x = qe * ln * (f * f * f - f);
    let dr = 2.0 * (ln + 1.0) * f;
    let dx = qe * ln * (3.0 * f * f - 1.0);
    f * (r * dr + x * dx) - 2.0 * (r * r + x * x)
}

/// Maximum of the gain between the two resonances, located as the
/// stationary point of `|Mg|` on `(fp/f0, 1]`. Returns `(fn_peak, Mg_peak)`.
pub fn peak_gain(ln: f64, qe: f64) -> Result<(f64, f64), GainError> {
    if !(qe > 0.0) {
        return Err(GainError::InvalidArgument(
            "peak gain needs Qe > 0; the open-load curve diverges at its pole".into(),
        ));
    }
    let lo = noload_pole(ln) + 1e-6;
    // the slope at fn = 1 is -2/Ln for every Qe, so the peak is interior
    let f = if slope_indicator(ln, qe, lo) >= 0.0 {
        lo
    } else {
        bracketed_root(|f| slope_indicator(ln, qe, f), lo, 1.0, 1e-15, 0.0, 500)
            .map_err(|e| GainError::InvalidArgument(e.to_string()))?
    };
    Ok((f, magnitude(ln, qe, f)))
}

/// Finds the normalized frequency on the inductive branch (`fn >= fn_peak`)
/// that produces `target` gain.
pub fn solve_frequency(ln: f64, qe: f64, target: f64) -> Result<f64, GainError> {
    let asymptote = high_frequency_asymptote(ln);
    if target <= asymptote {
        return Err(GainError::BelowAsymptote { target, asymptote });
    }
    if target == 1.0 {
        return Ok(1.0);
    }
    let lo = if qe > 0.0 {
        let (fn_peak, peak) = peak_gain(ln, qe)?;
        if target > peak {
            return Err(GainError::Unreachable { target, peak, fn_peak });
        }
        fn_peak
    } else {
        // open load: gain falls monotonically from the pole
        noload_pole(ln) * (1.0 + 1e-9)
    };
    let hi = FN_SEARCH_MAX;
    if magnitude(ln, qe, hi) > target {
        return Err(GainError::BelowAsymptote {
            target,
            asymptote: magnitude(ln, qe, hi),
        });
    }
    bracketed_root(|f| magnitude(ln, qe, f) - target, lo, hi, 1e-15, 1e-12, 500)
        .map_err(|e| GainError::InvalidArgument(e.to_string()))
}

/// `Ln / (Ln + 1)`: the gain approached at high frequency with no load.
pub fn high_frequency_asymptote(ln: f64) -> f64 {
    (ln / (ln + 1.0)).abs()
}

/// Gain window needed for line and load regulation with turns ratio `n`.
pub fn gain_band(req: &DesignRequirements, n: f64, ln: f64) -> GainBand {
    GainBand {
        mg_min: n * req.vout_min / (req.vin_max / 2.0),
        mg_max: n * req.vout_max / (req.vin_min / 2.0),
        mg_inf: high_frequency_asymptote(ln),
    }
}

/// Input impedance of the tank normalized to `sqrt(Lr/Cr)`:
/// `j·fn + 1/(j·fn) + (j·fn·Ln ∥ 1/Qe)`.
pub fn input_impedance(p: NormalizedPoint) -> Complex64 {
    let x = Complex64::new(0.0, p.fn_);
    let zm = x * p.ln;
    let parallel = if p.qe == 0.0 {
        zm
    } else {
        let re = Complex64::new(1.0 / p.qe, 0.0);
        zm * re / (zm + re)
    };
    x + x.inv() + parallel
}

/// Normalized frequency where the tank input reactance changes sign.
pub fn zero_phase_frequency(ln: f64, qe: f64) -> Result<f64, GainError> {
    let reactance = |f: f64| input_impedance(NormalizedPoint::new(ln, qe, f)).im;
    // reactance is negative well below fp and positive at series resonance
    bracketed_root(reactance, 1e-3 * noload_pole(ln), 1.0, 1e-15, 0.0, 500)
        .map_err(|e| GainError::InvalidArgument(e.to_string()))
}

/// Inductive when the tank input reactance is positive, so the tank current
/// lags the switch-node voltage.
pub fn classify_region(p: NormalizedPoint) -> Result<Region, GainError> {
    if !(p.qe > 0.0) {
        return Err(GainError::InvalidArgument("classification needs Qe > 0".into()));
    }
    let boundary = zero_phase_frequency(p.ln, p.qe)?;
    Ok(if (p.fn_ - boundary).abs() < BOUNDARY_WIDTH {
        Region::Boundary
    } else if p.fn_ > boundary {
        Region::Inductive
    } else {
        Region::Capacitive
    })
}

/// Gain with the output shorted, approximated with `Qe = 1e6`.
pub fn short_circuit_gain(ln: f64, fn_: f64) -> Result<f64, GainError> {
    if (fn_ - 1.0).abs() < 1e-12 {
        return Err(GainError::ShortCircuitResonance);
    }
    gain(NormalizedPoint::new(ln, SHORT_CIRCUIT_QE, fn_)).map(|g| g.magnitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // straight complex arithmetic, written independently of `gain`
    fn oracle(ln: f64, qe: f64, fn_: f64) -> f64 {
        let w2 = fn_ * fn_;
        let re = (ln + 1.0) * w2 - 1.0;
        let im = (w2 - 1.0) * fn_ * qe * ln;
        ln * w2 / (re * re + im * im).sqrt()
    }

    fn brute_peak(ln: f64, qe: f64, points: usize) -> (f64, f64) {
        let lo = noload_pole(ln) + 1e-6;
        (0..points)
            .map(|i| lo + (1.0 - lo) * i as f64 / (points - 1) as f64)
            .map(|f| (f, oracle(ln, qe, f)))
            .fold((0.0, 0.0), |b, c| if c.1 > b.1 { c } else { b })
    }

    #[test]
    fn unity_at_resonance() {
        for &(ln, qe) in &[(2.05, 0.36), (5.0, 0.0), (1.5, 10.0)] {
            let g = gain(NormalizedPoint::new(ln, qe, 1.0)).unwrap();
            assert_eq!(g.magnitude, 1.0);
            assert_eq!(g.phase, 0.0);
        }
    }

    #[test]
    fn gain_at_reference_point() {
        let g = gain(NormalizedPoint::new(2.05, 0.36, 1.1)).unwrap();
        assert!((g.magnitude - 0.920).abs() < 5e-4, "{}", g.magnitude);
        assert!((g.magnitude - oracle(2.05, 0.36, 1.1)).abs() < 1e-14);
    }

    #[test]
    fn open_load_high_frequency_limit() {
        let g = gain(NormalizedPoint::new(2.05, 0.0, 100.0)).unwrap();
        assert!((g.magnitude - 0.672).abs() < 5e-4);
        assert!((high_frequency_asymptote(2.05) - 0.672).abs() < 5e-4);
    }

    #[test]
    fn pole_reported_at_noload_resonance() {
        let ln = 3.0;
        let err = gain(NormalizedPoint::new(ln, 0.0, noload_pole(ln))).unwrap_err();
        assert!(matches!(err, GainError::Pole { .. }));
        assert_eq!(noload_pole(ln), 0.5);
    }

    #[test]
    fn curve_endpoints_and_flags() {
        let c = gain_curve(2.05, 0.36, 0.5, 2.0, 2).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.points[0].fn_, 0.5);
        assert_eq!(c.points[1].fn_, 2.0);

        // a grid that lands exactly on the open-load pole keeps going
        let c = gain_curve(3.0, 0.0, 0.25, 1.0, 3).unwrap();
        assert!(c.points[1].pole);
        assert!(c.points[2].magnitude.is_finite());

        assert!(gain_curve(2.0, 0.1, 1.0, 1.0, 10).is_err());
        assert!(gain_curve(2.0, 0.1, 0.5, 1.0, 1).is_err());
    }

    #[test]
    fn curve_decreasing_above_peak() {
        let (fp, _) = peak_gain(2.05, 0.36).unwrap();
        let c = gain_curve(2.05, 0.36, 0.5, 2.0, 2000).unwrap();
        let above: Vec<_> = c.points.iter().filter(|p| p.fn_ > fp).collect();
        assert!(above.windows(2).all(|w| w[1].magnitude < w[0].magnitude));
    }

    #[test]
    fn curve_family_crosses_at_unity() {
        for qe in [0.0, 0.1, 0.3, 0.5, 1.0, 5.0, SHORT_CIRCUIT_QE] {
            let c = gain_curve(5.0, qe, 0.5, 2.0, 3).unwrap();
            assert!((c.points[1].fn_ - 1.0).abs() < 1e-15);
            assert!((c.points[1].magnitude - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn peak_matches_dense_grid() {
        let (fn_peak, peak) = peak_gain(2.05, 0.36).unwrap();
        let (bf, bm) = brute_peak(2.05, 0.36, 1_000_001);
        assert!(peak > 1.2);
        assert!(fn_peak > 0.573 && fn_peak < 1.0);
        assert!((peak - bm).abs() < 1e-6, "{peak} vs {bm}");
        assert!((fn_peak - bf).abs() < 1e-5);
    }

    #[test]
    fn peak_shrinks_with_load() {
        let peaks: Vec<f64> = [0.1, 0.2, 0.36, 0.6, 1.0, 3.0]
            .iter()
            .map(|&q| peak_gain(2.05, q).unwrap().1)
            .collect();
        assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
        let (f, m) = peak_gain(2.05, 1e6).unwrap();
        assert!((m - 1.0).abs() < 1e-4 && (f - 1.0).abs() < 1e-3);
        assert!(peak_gain(2.05, 0.0).is_err());
    }

    #[test]
    fn solve_reference_nominal() {
        let f = solve_frequency(2.05, 0.36, 0.915).unwrap();
        assert!((f - 1.10).abs() < 0.01, "{f}");
        // frozen from an independent brentq run on the same expression
        assert!((f - 1.107_906_947).abs() < 1e-8);
        assert!((oracle(2.05, 0.36, f) - 0.915).abs() < 1e-9);
        assert_eq!(solve_frequency(2.05, 0.36, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn solve_error_paths() {
        let (_, peak) = peak_gain(2.05, 0.36).unwrap();
        assert!(matches!(
            solve_frequency(2.05, 0.36, 2.0 * peak),
            Err(GainError::Unreachable { .. })
        ));
        assert!(matches!(
            solve_frequency(2.05, 0.36, 0.6),
            Err(GainError::BelowAsymptote { .. })
        ));
    }

    #[test]
    fn solve_open_load() {
        let f = solve_frequency(2.05, 0.0, 0.915).unwrap();
        assert!((f - 1.111_411_067).abs() < 1e-8, "{f}");
    }

    #[test]
    fn band_values() {
        let mut req = DesignRequirements::reference_48v_to_12v();
        req.vin_min = 48.0;
        let b = gain_band(&req, 1.83, 2.05);
        assert!((b.mg_min - 0.915).abs() < 1e-12 && (b.mg_max - 0.915).abs() < 1e-12);
        let b = gain_band(&req, 2.0, 2.05);
        assert_eq!((b.mg_min, b.mg_max), (1.0, 1.0));
        assert!((b.mg_inf - 0.672).abs() < 5e-4);
    }

    #[test]
    fn regions_follow_impedance_phase() {
        let phase = |f: f64| input_impedance(NormalizedPoint::new(2.05, 0.36, f)).arg();
        assert!(phase(1.1) > 0.0 && phase(0.6) < 0.0);
        let r = |f| classify_region(NormalizedPoint::new(2.05, 0.36, f)).unwrap();
        assert_eq!(r(1.1), Region::Inductive);
        assert_eq!(r(0.6), Region::Capacitive);
        let b = zero_phase_frequency(2.05, 0.36).unwrap();
        assert!((b - 0.607_839_820).abs() < 1e-8);
        assert_eq!(r(b), Region::Boundary);
    }

    #[test]
    fn short_circuit_behaviour() {
        assert!(short_circuit_gain(2.05, 1.5).unwrap() < 0.01);
        let g = |f| short_circuit_gain(2.05, f).unwrap();
        assert!(g(1.2) > g(1.5) && g(1.5) > g(2.0));
        assert_eq!(short_circuit_gain(2.05, 1.0), Err(GainError::ShortCircuitResonance));
    }

    proptest! {
        #[test]
        fn solve_inverts_gain(ln in 1.0f64..10.0, qe in 0.1f64..1.0, u in 0.01f64..0.99) {
            let (_, peak) = peak_gain(ln, qe).unwrap();
            let lo = high_frequency_asymptote(ln).max(magnitude(ln, qe, 50.0));
            let target = lo + u * (peak - lo);
            let f = solve_frequency(ln, qe, target).unwrap();
            prop_assert!((gain(NormalizedPoint::new(ln, qe, f)).unwrap().magnitude - target).abs() < 1e-8);
        }

        #[test]
        fn decreasing_above_peak(ln in 1.0f64..10.0, qe in 0.1f64..1.0) {
            let (fp, _) = peak_gain(ln, qe).unwrap();
            let grid = log_grid(fp + 1e-6, 4.0, 2000);
            prop_assert!(grid.windows(2).all(|w| oracle(ln, qe, w[1]) < oracle(ln, qe, w[0])));
        }
    }
}
