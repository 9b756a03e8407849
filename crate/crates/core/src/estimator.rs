//! Photon-number estimation from the splitting of the two principal dips,
//! the semiclassical comparator, and parameter scans over the KPO detuning.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{convergence_check, ConvergenceReport};
use crate::error::{KpoError, Result};
use crate::fockspace::{cat_state, HilbertSpec, Ket, Parity};
use crate::linalg;
use crate::model::{angular_to_mhz, build_h_kpo, mhz_to_angular, semiclassical_alpha, SystemParams};
use crate::spectroscopy::{
    find_extrema, principal_dips, sweep, sweep_points, ExtremumKind, ExtremumPoint, GridSpec, SweepSettings,
};

/// Relative prominence separating the two main dips from ripples.
pub const PRINCIPAL_PROMINENCE: f64 = 0.1;
/// Lower tier that also picks up the weak strong-drive dips.
pub const SECONDARY_PROMINENCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub dip_low: f64,
    pub dip_high: f64,
    pub splitting: f64,
    pub g: f64,
    pub alpha_est_sq: f64,
    pub alpha_ana_sq: f64,
    pub alpha_true_sq: f64,
    pub eps1: f64,
    pub eps2: f64,
}

/// `α_est = (dip_high − dip_low)/(4g)`, all in MHz.
pub fn estimate_alpha(dip_low: f64, dip_high: f64, g: f64) -> Result<f64> {
    if !(dip_high > dip_low) || !(g > 0.0) {
        return Err(KpoError::InvalidSplitting { dip_low, dip_high, g });
    }
    Ok((dip_high - dip_low) / (4.0 * g))
}

pub fn relative_error(estimated_sq: f64, true_sq: f64) -> Result<f64> {
    if true_sq == 0.0 {
        return Err(KpoError::DivisionByZeroPhotonNumber);
    }
    Ok(((estimated_sq - true_sq) / true_sq).abs())
}

/// `Tr[ρ_ss a†a]` of the undriven, uncoupled oscillator, with the truncation
/// convergence report.
pub fn true_photon_number_checked(p: &SystemParams, space: &HilbertSpec) -> Result<(f64, ConvergenceReport)> {
    let mut q = *p;
    q.lambda_p = 0.0;
    q.g = 0.0;
    q.delta_q = 0.0;
    if q.gamma2 == 0.0 {
        // the qubit is irrelevant here; give it a rate so the state is unique
        q.gamma2 = 1.0;
    }
    let report = convergence_check(&q, space)?;
    Ok((report.value, report))
}

pub fn true_photon_number(p: &SystemParams, space: &HilbertSpec) -> Result<f64> {
    Ok(true_photon_number_checked(p, space)?.0)
}

/// Assembles the report from detected dips (MHz) and the true photon number.
pub fn build_report(dip_low: f64, dip_high: f64, p: &SystemParams, alpha_true_sq: f64) -> Result<EstimationReport> {
    let g = angular_to_mhz(p.g);
    let alpha_est = estimate_alpha(dip_low, dip_high, g)?;
    let alpha_ana = semiclassical_alpha(p)?;
    let alpha_est_sq = alpha_est * alpha_est;
    let alpha_ana_sq = alpha_ana * alpha_ana;
    Ok(EstimationReport {
        dip_low,
        dip_high,
        splitting: dip_high - dip_low,
        g,
        alpha_est_sq,
        alpha_ana_sq,
        alpha_true_sq,
        eps1: relative_error(alpha_est_sq, alpha_true_sq)?,
        eps2: relative_error(alpha_ana_sq, alpha_true_sq)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationDiagnostics {
    pub bifurcated: bool,
    /// `(2β + Δ)/χ`.
    pub threshold_ratio: f64,
    /// Overlap of the KPO ground state with the best-fitting even cat.
    pub cat_overlap: f64,
    pub best_alpha: f64,
}

fn cat_overlap(alpha: f64, ground: &Ket, space: &HilbertSpec) -> f64 {
    cat_state(alpha, Parity::Even, space).map(|c| c.overlap(ground)).unwrap_or(0.0)
}

/// True when `2β + Δ > 0` and the oscillator ground state (the top of the
/// spectrum, as the Kerr term is negative) overlaps an even cat by more than 0.9.
pub fn bifurcation_check(p: &SystemParams, space: &HilbertSpec) -> Result<BifurcationDiagnostics> {
    let n = space.fock_cutoff();
    let full = build_h_kpo(p, space);
    let h = faer::Mat::from_fn(n, n, |i, j| full.get(2 * i, 2 * j));
    let (_, vecs) = linalg::hermitian_eigen(h.as_ref())?;
    let ground = Ket::new((0..n).map(|i| vecs[(i, n - 1)]).collect())?;

    let amax = (n as f64).sqrt();
    let mut best = (0.0, cat_overlap(0.0, &ground, space));
    let samples = 400;
    for k in 1..=samples {
        let a = amax * k as f64 / samples as f64;
        let o = cat_overlap(a, &ground, space);
        if o > best.1 {
            best = (a, o);
        }
    }
    // golden-section polish around the best sample
    let step = amax / samples as f64;
    let (mut lo, mut hi) = ((best.0 - step).max(0.0), (best.0 + step).min(amax));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if cat_overlap(a, &ground, space) > cat_overlap(b, &ground, space) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let a = 0.5 * (lo + hi);
    let o = cat_overlap(a, &ground, space);
    if o > best.1 {
        best = (a, o);
    }
    let threshold_ratio = (2.0 * p.beta + p.delta) / p.chi;
    Ok(BifurcationDiagnostics {
        bifurcated: threshold_ratio > 0.0 && best.1 > 0.9,
        threshold_ratio,
        cat_overlap: best.1,
        best_alpha: best.0,
    })
}

/// How the principal dips are located: a coarse sweep followed by fine sweeps
/// around each of the two strongest dips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipSearch {
    pub coarse: GridSpec,
    pub fine_step_mhz: f64,
    pub fine_halfwidth_mhz: f64,
    pub min_prominence: f64,
    pub sweep: SweepSettings,
}

impl Default for DipSearch {
    fn default() -> Self {
        Self {
            coarse: GridSpec { min_mhz: -25.0, max_mhz: 25.0, step_mhz: 0.25 },
            fine_step_mhz: 0.05,
            fine_halfwidth_mhz: 0.5,
            min_prominence: PRINCIPAL_PROMINENCE,
            sweep: SweepSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipPair {
    pub low: ExtremumPoint,
    pub high: ExtremumPoint,
    /// Dips found at the principal tier on the coarse sweep.
    pub n_dips: usize,
}

fn refine_dip(p: &SystemParams, space: &HilbertSpec, search: &DipSearch, center: f64) -> Result<ExtremumPoint> {
    let grid = GridSpec {
        min_mhz: center - search.fine_halfwidth_mhz,
        max_mhz: center + search.fine_halfwidth_mhz,
        step_mhz: search.fine_step_mhz,
    };
    let points = grid.points()?;
    let fine = sweep_points(p, space, &points, &search.sweep)?;
    // the deepest interior sample is the dip; keep its refined position
    let ex = crate::spectroscopy::find_extrema_in(&fine.grid, &fine.signal, 0.0)?;
    ex.into_iter()
        .filter(|e| e.kind == ExtremumKind::Dip)
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or(KpoError::NoExtrema { min_prominence: 0.0 })
}

pub fn locate_principal_dips(p: &SystemParams, space: &HilbertSpec, search: &DipSearch) -> Result<DipPair> {
    let coarse = sweep(p, space, &search.coarse, &search.sweep)?;
    let extrema = find_extrema(&coarse, search.min_prominence)?;
    let n_dips = extrema.iter().filter(|e| e.kind == ExtremumKind::Dip).count();
    let (lo, hi) = principal_dips(&extrema).ok_or(KpoError::NoExtrema { min_prominence: search.min_prominence })?;
    let low = refine_dip(p, space, search, coarse.grid[lo.index])?;
    let high = refine_dip(p, space, search, coarse.grid[hi.index])?;
    Ok(DipPair { low, high, n_dips })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScanMode {
    FixedBeta,
    /// `β = (constant − Δ)/2`, constant in MHz.
    Constrained { constant_mhz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    SkippedNotBifurcated,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub delta_mhz: f64,
    pub beta_mhz: f64,
    pub alpha_true_sq: f64,
    pub alpha_est_sq: f64,
    pub alpha_ana_sq: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub n_dips: usize,
    pub dip_low: f64,
    pub dip_high: f64,
    pub status: RowStatus,
}

fn scan_row(base: &SystemParams, delta_mhz: f64, mode: ScanMode, space: &HilbertSpec, search: &DipSearch) -> ScanRow {
    let mut p = *base;
    p.delta = mhz_to_angular(delta_mhz);
    if let ScanMode::Constrained { constant_mhz } = mode {
        p.beta = mhz_to_angular(0.5 * (constant_mhz - delta_mhz));
    }
    let mut row = ScanRow {
        delta_mhz,
        beta_mhz: angular_to_mhz(p.beta),
        alpha_true_sq: f64::NAN,
        alpha_est_sq: f64::NAN,
        alpha_ana_sq: f64::NAN,
        eps1: f64::NAN,
        eps2: f64::NAN,
        n_dips: 0,
        dip_low: f64::NAN,
        dip_high: f64::NAN,
        status: RowStatus::Ok,
    };
    match bifurcation_check(&p, space) {
        Ok(d) if d.bifurcated => {}
        Ok(_) => {
            row.status = RowStatus::SkippedNotBifurcated;
            return row;
        }
        Err(e) => {
            row.status = RowStatus::Failed(e.to_string());
            return row;
        }
    }
    let result = (|| -> Result<()> {
        let alpha_true_sq = true_photon_number(&p, space)?;
        let dips = locate_principal_dips(&p, space, search)?;
        let report = build_report(dips.low.freq, dips.high.freq, &p, alpha_true_sq)?;
        row.alpha_true_sq = report.alpha_true_sq;
        row.alpha_est_sq = report.alpha_est_sq;
        row.alpha_ana_sq = report.alpha_ana_sq;
        row.eps1 = report.eps1;
        row.eps2 = report.eps2;
        row.n_dips = dips.n_dips;
        row.dip_low = dips.low.freq;
        row.dip_high = dips.high.freq;
        Ok(())
    })();
    if let Err(e) = result {
        row.status = RowStatus::Failed(e.to_string());
    }
    row
}

/// One row per KPO detuning (MHz); rows are computed in parallel and
/// returned in input order.
pub fn scan_detuning(
    base: &SystemParams,
    delta_values: &[f64],
    mode: ScanMode,
    space: &HilbertSpec,
    search: &DipSearch,
) -> Result<Vec<ScanRow>> {
    if delta_values.is_empty() {
        return Err(KpoError::InvalidParams("detuning list is empty".into()));
    }
    Ok(delta_values.par_iter().map(|&d| scan_row(base, d, mode, space, search)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamsMhz;

    #[test]
    fn estimate_from_dips() {
        let a = estimate_alpha(-16.80, 17.10, 5.0).unwrap();
        assert!((a - 1.695).abs() < 1e-12);
        assert!((a * a - 2.873).abs() < 1e-3);
        assert!((estimate_alpha(-10.0, 10.0, 5.0).unwrap() - 1.0).abs() < 1e-15);
        let b = estimate_alpha(-33.6, 34.2, 5.0).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!((estimate_alpha(-15.8, 18.1, 5.0).unwrap() - a).abs() < 1e-12);
        assert!(estimate_alpha(1.0, 1.0, 5.0).is_err());
        assert!(estimate_alpha(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn relative_errors() {
        assert_eq!(relative_error(2.0, 2.0).unwrap(), 0.0);
        assert!((relative_error(3.0, 2.0).unwrap() - relative_error(6.0, 4.0).unwrap()).abs() < 1e-15);
        assert!(matches!(relative_error(1.0, 0.0), Err(KpoError::DivisionByZeroPhotonNumber)));
    }

    #[test]
    fn vacuum_below_threshold() {
        let mut m = ParamsMhz::reference();
        m.beta_mhz = 0.0;
        let p = SystemParams::from_mhz(&m).unwrap();
        let s = HilbertSpec::new(8).unwrap();
        assert!(true_photon_number(&p, &s).unwrap().abs() < 1e-6);
        assert!(!bifurcation_check(&p, &s).unwrap().bifurcated);
        m.beta_mhz = 14.9;
        let p = SystemParams::from_mhz(&m).unwrap();
        let d = bifurcation_check(&p, &s).unwrap();
        assert!(d.threshold_ratio < 0.0 && !d.bifurcated);
    }

    #[test]
    fn reference_point_is_bifurcated() {
        let p = SystemParams::from_mhz(&ParamsMhz::reference()).unwrap();
        let d = bifurcation_check(&p, &HilbertSpec::new(20).unwrap()).unwrap();
        assert!(d.bifurcated, "{d:?}");
        assert!(d.best_alpha > 1.5 && d.best_alpha < 1.9);
    }

    #[test]
    fn empty_scan_is_rejected() {
        let p = SystemParams::from_mhz(&ParamsMhz::reference()).unwrap();
        let s = HilbertSpec::new(4).unwrap();
        assert!(scan_detuning(&p, &[], ScanMode::FixedBeta, &s, &DipSearch::default()).is_err());
    }
}
