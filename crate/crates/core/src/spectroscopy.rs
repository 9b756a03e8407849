//! Drive-detuning sweeps of the time-integrated qubit excitation and
//! peak/dip detection on the resulting spectra.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve, steady_state, time_integrated_excitation, EvolveControls, Tolerances, WindowEngine, WindowSettings,
};
use crate::error::{KpoError, Result};
use crate::fockspace::HilbertSpec;
use crate::model::{mhz_to_angular, ParamsMhz, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min_mhz: f64,
    pub max_mhz: f64,
    pub step_mhz: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { min_mhz: -25.0, max_mhz: 25.0, step_mhz: 0.05 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_mhz > 0.0) || !self.min_mhz.is_finite() || !self.max_mhz.is_finite() {
            return Err(KpoError::InvalidParams(format!("invalid grid {self:?}")));
        }
        if self.max_mhz < self.min_mhz {
            return Err(KpoError::InvalidParams("grid max must not be below min".into()));
        }
        Ok(())
    }

    /// `min + k·step` up to `max` inclusive, rounded to 1e-9 MHz so that
    /// grid values print cleanly.
    pub fn points(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let count = ((self.max_mhz - self.min_mhz) / self.step_mhz + 1e-9).floor() as usize;
        Ok((0..=count)
            .map(|k| ((self.min_mhz + k as f64 * self.step_mhz) * 1e9).round() / 1e9)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepMethod {
    /// Spectral window engine (fast, fixed step).
    Window(WindowSettings),
    /// Adaptive Runge–Kutta on the full truncated space.
    Full(Tolerances),
}

impl Default for SweepMethod {
    fn default() -> Self {
        SweepMethod::Window(WindowSettings::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub t_final_us: f64,
    pub method: SweepMethod,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { t_final_us: 3.0, method: SweepMethod::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    /// Drive detunings Δq/2π (MHz), strictly increasing.
    pub grid: Vec<f64>,
    pub signal: Vec<f64>,
    pub trace_error: Vec<f64>,
    pub params: ParamsMhz,
    pub fock_cutoff: usize,
    pub settings: SweepSettings,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dynamic_range(&self) -> f64 {
        let max = self.signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.signal.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Evaluates the spectrum on an evenly spaced grid.
pub fn sweep(p: &SystemParams, space: &HilbertSpec, grid: &GridSpec, settings: &SweepSettings) -> Result<SweepResult> {
    sweep_points(p, space, &grid.points()?, settings)
}

/// Evaluates the spectrum at the given strictly increasing detunings (MHz).
pub fn sweep_points(
    p: &SystemParams,
    space: &HilbertSpec,
    points: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult> {
    if points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(KpoError::InvalidParams("sweep points must be strictly increasing".into()));
    }
    if !(settings.t_final_us > 0.0) {
        return Err(KpoError::InvalidParams("t_final must be positive".into()));
    }
    let values: Vec<Result<(f64, f64)>> = match settings.method {
        SweepMethod::Window(w) => {
            let engine = WindowEngine::new(p, space, settings.t_final_us, &w)?;
            points
                .par_iter()
                .map(|&f| {
                    let r = engine.excitation(mhz_to_angular(f));
                    Ok((r.excitation, r.trace_error))
                })
                .collect()
        }
        SweepMethod::Full(tol) => {
            let rho0 = steady_state(&p.with_lambda_p(0.0), space)?;
            let controls = EvolveControls { tolerances: tol, ..Default::default() };
            points
                .par_iter()
                .map(|&f| {
                    let q = p.with_delta_q(mhz_to_angular(f));
                    let traj = evolve(&rho0, &q, settings.t_final_us, &controls)
                        .map_err(|e| KpoError::SweepPoint { detuning_mhz: f, source: Box::new(e) })?;
                    Ok((time_integrated_excitation(&traj), traj.max_trace_error()))
                })
                .collect()
        }
    };
    let mut signal = Vec::with_capacity(points.len());
    let mut trace_error = Vec::with_capacity(points.len());
    for (f, v) in points.iter().zip(values) {
        let (i, e) = v.map_err(|e| match e {
            e @ KpoError::SweepPoint { .. } => e,
            e => KpoError::SweepPoint { detuning_mhz: *f, source: Box::new(e) },
        })?;
        signal.push(i);
        trace_error.push(e);
    }
    Ok(SweepResult {
        grid: points.to_vec(),
        signal,
        trace_error,
        params: p.to_mhz(),
        fock_cutoff: space.fock_cutoff(),
        settings: *settings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Peak,
    Dip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremumPoint {
    /// Refined position (MHz).
    pub freq: f64,
    /// Refined signal value.
    pub value: f64,
    pub kind: ExtremumKind,
    /// Topographic prominence divided by the spectrum's dynamic range.
    pub prominence: f64,
    /// Topographic prominence in units of the signal.
    pub prominence_abs: f64,
    /// Index of the sample the extremum was found at.
    pub index: usize,
}

/// Topographic prominence of a local maximum at `i`.
fn peak_prominence(y: &[f64], i: usize) -> f64 {
    let v = y[i];
    let mut left_min = v;
    for k in (0..i).rev() {
        if y[k] > v {
            break;
        }
        left_min = left_min.min(y[k]);
    }
    let mut right_min = v;
    for &yk in &y[i + 1..] {
        if yk > v {
            break;
        }
        right_min = right_min.min(yk);
    }
    v - left_min.max(right_min)
}

/// Vertex of the parabola through three samples, clamped to the outer nodes.
fn refine(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curv = (d2 - d1) / (x[2] - x[0]);
    if curv == 0.0 {
        return (x[1], y[1]);
    }
    // y = y1 + d(x − x1) + curv (x − x1)², with d the slope at x1
    let slope = d1 + curv * (x[1] - x[0]);
    let xv = (x[1] - slope / (2.0 * curv)).clamp(x[0], x[2]);
    let yv = y[1] + slope * (xv - x[1]) + curv * (xv - x[1]).powi(2);
    (xv, yv)
}

/// Local maxima and minima whose relative prominence reaches `min_prominence`.
pub fn find_extrema(s: &SweepResult, min_prominence: f64) -> Result<Vec<ExtremumPoint>> {
    find_extrema_in(&s.grid, &s.signal, min_prominence)
}

pub fn find_extrema_in(grid: &[f64], signal: &[f64], min_prominence: f64) -> Result<Vec<ExtremumPoint>> {
    if grid.len() != signal.len() {
        return Err(KpoError::DimensionMismatch { expected: grid.len(), found: signal.len() });
    }
    if grid.len() < 5 {
        return Err(KpoError::InvalidParams("extremum search needs at least five samples".into()));
    }
    let max = signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = signal.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if !(range > 0.0) {
        return Err(KpoError::NoExtrema { min_prominence });
    }
    let negated: Vec<f64> = signal.iter().map(|v| -v).collect();
    let mut out = Vec::new();
    for (kind, y) in [(ExtremumKind::Peak, signal), (ExtremumKind::Dip, negated.as_slice())] {
        let mut i = 1;
        while i + 1 < y.len() {
            if y[i] > y[i - 1] {
                // walk across a flat top and use its middle sample
                let mut j = i;
                while j + 1 < y.len() && y[j + 1] == y[i] {
                    j += 1;
                }
                if j + 1 < y.len() && y[j + 1] < y[i] {
                    let c = (i + j) / 2;
                    let prom = peak_prominence(y, c);
                    if prom > 0.0 && prom / range >= min_prominence {
                        let (xv, yv) = refine([grid[c - 1], grid[c], grid[c + 1]], [y[c - 1], y[c], y[c + 1]]);
                        let value = if kind == ExtremumKind::Peak { yv } else { -yv };
                        out.push(ExtremumPoint {
                            freq: xv,
                            value,
                            kind,
                            prominence: prom / range,
                            prominence_abs: prom,
                            index: c,
                        });
                    }
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
    }
    if out.is_empty() {
        return Err(KpoError::NoExtrema { min_prominence });
    }
    out.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    Ok(out)
}

/// The two most prominent dips, ordered by frequency.
pub fn principal_dips(extrema: &[ExtremumPoint]) -> Option<(ExtremumPoint, ExtremumPoint)> {
    let mut dips: Vec<&ExtremumPoint> = extrema.iter().filter(|e| e.kind == ExtremumKind::Dip).collect();
    if dips.len() < 2 {
        return None;
    }
    dips.sort_by(|a, b| b.prominence_abs.total_cmp(&a.prominence_abs));
    let (a, b) = (*dips[0], *dips[1]);
    Some(if a.freq < b.freq { (a, b) } else { (b, a) })
}

/// The most prominent peak.
pub fn principal_peak(extrema: &[ExtremumPoint]) -> Option<ExtremumPoint> {
    extrema
        .iter()
        .filter(|e| e.kind == ExtremumKind::Peak)
        .max_by(|a, b| a.prominence_abs.total_cmp(&b.prominence_abs))
        .copied()
}
