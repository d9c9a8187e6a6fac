//! Tank synthesis from electrical requirements, regulation feasibility and
//! E-series rounding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gain::{classify_region, gain_band, noload_pole, peak_gain, solve_frequency, GainBand, GainError, Region};
use crate::tank::{
    effective_load, load_resistance, noload_resonance, series_resonance, DesignRequirements, NormalizedPoint,
    ParamError, TankParams,
};

/// Headroom below which a design is flagged as sitting close to the peak.
pub const HEADROOM_WARNING: f64 = 0.10;
/// Headroom demanded by [`search_design`].
pub const SEARCH_HEADROOM: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("invalid design input: {0}")]
    InvalidArgument(String),
}

/// Where the nominal operating point sits on the gain curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Nominal output at unity gain, i.e. at series resonance.
    AtResonance,
    /// Nominal output at the given gain.
    Shifted(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    E12,
    E24,
    None,
}

impl std::str::FromStr for Series {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "e12" => Ok(Series::E12),
            "e24" => Ok(Series::E24),
            "none" => Ok(Series::None),
            other => Err(format!(
                "unknown component series `{other}` (expected e12, e24 or none)"
            )),
        }
    }
}

const E12: [f64; 12] = [1.0, 1.2, 1.5, 1.8, 2.2, 2.7, 3.3, 3.9, 4.7, 5.6, 6.8, 8.2];
const E24: [f64; 24] = [
    1.0, 1.1, 1.2, 1.3, 1.5, 1.6, 1.8, 2.0, 2.2, 2.4, 2.7, 3.0, 3.3, 3.6, 3.9, 4.3, 4.7, 5.1, 5.6, 6.2, 6.8, 7.5, 8.2,
    9.1,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub mg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub requirements: DesignRequirements,
    pub n: f64,
    pub ln: f64,
    /// Quality factor at nominal output voltage and full load.
    pub qe: f64,
    pub tank: TankParams,
    pub tank_rounded: TankParams,
    pub series: Series,
    pub f0: f64,
    pub fp: f64,
    pub band: GainBand,
    /// Gain peak at full load; `None` when the load is open.
    pub peak: Option<Peak>,
    pub feasible: bool,
    /// Switching frequencies at `(Mg_max, Mg_min)` on the full-load curve.
    pub fsw_band: Option<(f64, f64)>,
    /// Same, but `Mg_min` is solved at the lightest load, which sets the
    /// highest frequency the controller has to reach.
    pub fsw_band_all_loads: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Turns ratio placing the nominal output at the requested gain.
pub fn choose_turns_ratio(req: &DesignRequirements, centering: Centering) -> f64 {
    let mg = match centering {
        Centering::AtResonance => 1.0,
        Centering::Shifted(mg) => mg,
    };
    mg * (req.vin_nom / 2.0) / req.vout_nom
}

/// Quality factor of `tank` at the given output operating point.
pub fn quality_factor(tank: &TankParams, vout: f64, iout: f64) -> f64 {
    let re = effective_load(tank.n, load_resistance(vout, iout));
    if re.is_finite() {
        tank.characteristic_impedance() / re
    } else {
        0.0
    }
}

/// Exact tank for the normalized choice `(ln, qe)` at the target series
/// resonance, with `Re` taken at nominal output and full load.
pub fn synthesize_tank(req: &DesignRequirements, n: f64, ln: f64, qe: f64) -> Result<TankParams, DesignError> {
    req.validate()?;
    if !(ln > 1.0) {
        return Err(DesignError::InvalidArgument(format!("Ln must exceed 1, got {ln}")));
    }
    if !(qe > 0.0) {
        return Err(DesignError::InvalidArgument(format!("Qe must be positive, got {qe}")));
    }
    if !(n > 0.0) {
        return Err(DesignError::InvalidArgument(format!("n must be positive, got {n}")));
    }
    let re = effective_load(n, load_resistance(req.vout_nom, req.iout_max));
    Ok(TankParams::from_normalized(ln, qe, req.f0_target, re, n))
}

/// Nearest preferred value by logarithmic distance.
pub fn nearest_preferred(value: f64, series: Series) -> f64 {
    let table: &[f64] = match series {
        Series::E12 => &E12,
        Series::E24 => &E24,
        Series::None => return value,
    };
    if !(value > 0.0 && value.is_finite()) {
        return value;
    }
    let decade = 10f64.powf(value.log10().floor());
    table
        .iter()
        .map(|m| m * decade)
        .chain(std::iter::once(10.0 * decade))
        .min_by(|a, b| {
            let da = (a / value).ln().abs();
            let db = (b / value).ln().abs();
            da.total_cmp(&db)
        })
        .unwrap_or(value)
}

/// Snaps `Cr` to the series and recomputes `Lr` for the original series
/// resonance; `Lm` keeps the original inductance ratio.
pub fn round_components(tank: &TankParams, series: Series) -> TankParams {
    if series == Series::None {
        return *tank;
    }
    let f0 = series_resonance(tank);
    let w0 = 2.0 * std::f64::consts::PI * f0;
    let cr = nearest_preferred(tank.cr, series);
    let lr = 1.0 / (w0 * w0 * cr);
    TankParams {
        lr,
        cr,
        lm: tank.ln() * lr,
        ..*tank
    }
}

fn region_at(ln: f64, qe: f64, fn_: f64) -> Result<Region, GainError> {
    if qe > 0.0 {
        classify_region(NormalizedPoint::new(ln, qe, fn_))
    } else if fn_ > noload_pole(ln) {
        Ok(Region::Inductive)
    } else {
        Ok(Region::Capacitive)
    }
}

/// Regulation check of `tank` against `req`, reporting E12-rounded parts.
pub fn check_feasibility(tank: &TankParams, req: &DesignRequirements, n: f64) -> Result<DesignReport, DesignError> {
    check_feasibility_with(tank, req, n, Series::E12)
}

pub fn check_feasibility_with(
    tank: &TankParams,
    req: &DesignRequirements,
    n: f64,
    series: Series,
) -> Result<DesignReport, DesignError> {
    req.validate()?;
    tank.validate()?;
    let ln = tank.ln();
    let qe = quality_factor(tank, req.vout_nom, req.iout_max);
    let qe_light = quality_factor(tank, req.vout_nom, req.iout_min);
    let f0 = series_resonance(tank);
    let band = gain_band(req, n, ln);
    let mut warnings = Vec::new();
    let mut feasible = true;

    let peak = if qe > 0.0 {
        let (fn_, mg) = peak_gain(ln, qe).map_err(|e| DesignError::InvalidArgument(e.to_string()))?;
        Some(Peak { fn_, mg })
    } else {
        None
    };
    if let Some(p) = peak {
        if band.mg_max >= p.mg {
            feasible = false;
            warnings.push(format!(
                "Mg_max {:.4} is not below the full-load peak gain {:.4}",
                band.mg_max, p.mg
            ));
        } else {
            let headroom = p.mg / band.mg_max - 1.0;
            if headroom < HEADROOM_WARNING {
                warnings.push(format!(
                    "gain headroom {:.1}% above Mg_max is below {:.0}%",
                    100.0 * headroom,
                    100.0 * HEADROOM_WARNING
                ));
            }
        }
    }

    let mut edge = |label: &str, qe_edge: f64, target: f64| -> Option<f64> {
        match solve_frequency(ln, qe_edge, target) {
            Ok(fn_) => {
                match region_at(ln, qe_edge, fn_) {
                    Ok(Region::Inductive) => {}
                    Ok(region) => {
                        feasible = false;
                        warnings.push(format!("{label} edge at fn {fn_:.5} is {region:?}, not inductive"));
                    }
                    Err(e) => {
                        feasible = false;
                        warnings.push(format!("{label} edge could not be classified: {e}"));
                    }
                }
                Some(fn_ * f0)
            }
            Err(e) => {
                feasible = false;
                warnings.push(format!("{label} edge not solvable: {e}"));
                None
            }
        }
    };
    let lo = edge("Mg_max", qe, band.mg_max);
    let hi = edge("Mg_min", qe, band.mg_min);
    let hi_light = if qe_light == qe {
        hi
    } else {
        edge("light-load Mg_min", qe_light, band.mg_min)
    };
    let fsw_band = lo.zip(hi);
    let fsw_band_all_loads = lo.zip(hi_light);

    if let Some((a, b)) = fsw_band_all_loads {
        if a < req.fsw_min || b > req.fsw_max {
            warnings.push(format!(
                "regulation band {:.0}..{:.0} Hz leaves the controller clamp {:.0}..{:.0} Hz",
                a, b, req.fsw_min, req.fsw_max
            ));
        }
    }

    let tank_rounded = round_components(tank, series);
    if series != Series::None {
        let qe_rounded = quality_factor(&tank_rounded, req.vout_nom, req.iout_max);
        warnings.push(format!(
            "rounding to {:?}: Cr {:.4e} -> {:.4e} F, f0 drift {:.2e}, Qe {:.4} -> {:.4}",
            series,
            tank.cr,
            tank_rounded.cr,
            series_resonance(&tank_rounded) / f0 - 1.0,
            qe,
            qe_rounded
        ));
    }

    Ok(DesignReport {
        requirements: *req,
        n,
        ln,
        qe,
        tank: *tank,
        tank_rounded,
        series,
        f0,
        fp: noload_resonance(tank),
        band,
        peak,
        feasible,
        fsw_band,
        fsw_band_all_loads,
        warnings,
    })
}

/// Full pipeline: synthesize the exact tank, check it and round it.
pub fn design(req: &DesignRequirements, n: f64, ln: f64, qe: f64, series: Series) -> Result<DesignReport, DesignError> {
    let tank = synthesize_tank(req, n, ln, qe)?;
    check_feasibility_with(&tank, req, n, series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub ln: f64,
    pub qe: f64,
    pub feasible: bool,
    /// Peak gain over `Mg_max`, minus one.
    pub headroom: f64,
    /// Full-load regulation band width (Hz); infinite when unsolvable.
    pub band_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Option<Candidate>,
    pub candidates: Vec<Candidate>,
}

fn evaluate(req: &DesignRequirements, n: f64, ln: f64, qe: f64) -> Candidate {
    let report = design(req, n, ln, qe, Series::None);
    let (feasible, headroom, band_width) = match report {
        Ok(r) => (
            r.feasible,
            r.peak.map_or(f64::INFINITY, |p| p.mg / r.band.mg_max - 1.0),
            r.fsw_band.map_or(f64::INFINITY, |(a, b)| b - a),
        ),
        Err(_) => (false, f64::NEG_INFINITY, f64::INFINITY),
    };
    Candidate {
        ln,
        qe,
        feasible,
        headroom,
        band_width,
    }
}

/// Grid search over `(Ln, Qe)` for the narrowest full-load frequency band
/// among feasible designs with at least [`SEARCH_HEADROOM`] gain headroom.
/// Ties go to the earlier grid point, so the result does not depend on
/// thread scheduling.
pub fn search_design(req: &DesignRequirements, n: f64, ln_grid: &[f64], qe_grid: &[f64]) -> SearchResult {
    let grid: Vec<(f64, f64)> = ln_grid
        .iter()
        .flat_map(|&ln| qe_grid.iter().map(move |&qe| (ln, qe)))
        .collect();
    let candidates: Vec<Candidate> = grid.par_iter().map(|&(ln, qe)| evaluate(req, n, ln, qe)).collect();
    let best = candidates
        .iter()
        .filter(|c| c.feasible && c.headroom >= SEARCH_HEADROOM)
        .fold(None::<Candidate>, |best, c| match best {
            Some(b) if b.band_width <= c.band_width => Some(b),
            _ => Some(*c),
        });
    SearchResult { best, candidates }
}

/// Evenly spaced grid including both ends.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|k| {
                let m = (points - 1) as f64;
                (lo * (m - k as f64) + hi * k as f64) / m
            })
            .collect(),
    }
}
