use serde::Serialize;

use kpo_core::dynamics::{convergence_report, expectation, steady_state_with_info, ConvergenceReport};
use kpo_core::eigenanalysis::{spectrum, transition_table, Transition};
use kpo_core::estimator::{
    bifurcation_check, build_report, scan_detuning, true_photon_number_checked, BifurcationDiagnostics,
    EstimationReport, RowStatus, ScanRow,
};
use kpo_core::model::CompositeOps;
use kpo_core::perturbation::{amplitude_scan, line_weights, resonance_frequencies, z_eigenstates, LineWeight, Resonance};
use kpo_core::spectroscopy::{find_extrema, principal_dips, principal_peak, sweep, ExtremumKind, ExtremumPoint};
use kpo_core::KpoError;
use num_complex::Complex64 as C64;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Serialize)]
struct SweepRow {
    detuning_mhz: f64,
    excitation: f64,
    trace_error: f64,
}

#[derive(Serialize)]
struct SweepMeta {
    fock_cutoff: usize,
    dynamic_range: f64,
}

#[derive(Serialize)]
struct ExtremaDoc {
    dynamic_range: f64,
    principal_prominence: f64,
    secondary_prominence: f64,
    principal: Vec<ExtremumPoint>,
    secondary: Vec<ExtremumPoint>,
    peak: Option<ExtremumPoint>,
    dips: Option<[ExtremumPoint; 2]>,
    /// Secondary-tier dips other than the two principal ones.
    additional_dips: Vec<ExtremumPoint>,
}

#[derive(Serialize)]
struct EstimateDoc {
    report: EstimationReport,
    convergence: ConvergenceReport,
    bifurcation: BifurcationDiagnostics,
}

fn extrema_or_empty(r: kpo_core::Result<Vec<ExtremumPoint>>) -> Result<Vec<ExtremumPoint>, CliError> {
    match r {
        Ok(v) => Ok(v),
        Err(KpoError::NoExtrema { .. }) => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_sweep(cfg: &RunConfig, out: &OutputDir) -> Result<(), CliError> {
    let p = cfg.params()?;
    let space = cfg.space()?;
    let res = sweep(&p, &space, &cfg.sweep, &cfg.sweep_settings())?;
    let rows: Vec<SweepRow> = (0..res.len())
        .map(|k| SweepRow { detuning_mhz: res.grid[k], excitation: res.signal[k], trace_error: res.trace_error[k] })
        .collect();
    let range = res.dynamic_range();
    out.csv("sweep.csv", &rows, &SweepMeta { fock_cutoff: res.fock_cutoff, dynamic_range: range })?;

    let principal = extrema_or_empty(find_extrema(&res, cfg.extrema.principal_prominence))?;
    let secondary = extrema_or_empty(find_extrema(&res, cfg.extrema.secondary_prominence))?;
    let dips = principal_dips(&principal);
    let additional_dips = secondary
        .iter()
        .filter(|e| e.kind == ExtremumKind::Dip)
        .filter(|e| dips.is_none_or(|(a, b)| e.index != a.index && e.index != b.index))
        .copied()
        .collect();
    out.json(
        "extrema.json",
        &ExtremaDoc {
            dynamic_range: range,
            principal_prominence: cfg.extrema.principal_prominence,
            secondary_prominence: cfg.extrema.secondary_prominence,
            peak: principal_peak(&principal),
            dips: dips.map(|(a, b)| [a, b]),
            principal: principal.clone(),
            secondary,
            additional_dips,
        },
    )?;
    if principal.is_empty() {
        return Err(KpoError::NoExtrema { min_prominence: cfg.extrema.principal_prominence }.into());
    }
    let Some((low, high)) = dips else {
        eprintln!("fewer than two principal dips; no estimate written");
        return Ok(());
    };
    let bifurcation = bifurcation_check(&p, &space)?;
    if !bifurcation.bifurcated {
        return Err(CliError::Physics(format!(
            "oscillator is not bifurcated ((2β+Δ)/χ = {:.4}, cat overlap {:.4})",
            bifurcation.threshold_ratio, bifurcation.cat_overlap
        )));
    }
    let (alpha_true_sq, convergence) = true_photon_number_checked(&p, &space)?;
    let report = build_report(low.freq, high.freq, &p, alpha_true_sq)?;
    out.json("estimate.json", &EstimateDoc { report, convergence, bifurcation })?;
    Ok(())
}

#[derive(Serialize)]
struct ScanCsvRow {
    delta_mhz: f64,
    beta_mhz: f64,
    alpha_true_sq: f64,
    alpha_est_sq: f64,
    alpha_ana_sq: f64,
    eps1: f64,
    eps2: f64,
    n_dips: usize,
    dip_low_mhz: f64,
    dip_high_mhz: f64,
    status: String,
}

fn status_text(s: &RowStatus) -> String {
    match s {
        RowStatus::Ok => "ok".into(),
        RowStatus::SkippedNotBifurcated => "skipped_not_bifurcated".into(),
        RowStatus::Failed(m) => format!("failed: {m}"),
    }
}

#[derive(Serialize)]
struct ScanMetaDoc {
    mode: kpo_core::estimator::ScanMode,
    bifurcated_rows: usize,
    eps1_below_eps2_on_every_row: bool,
}

#[derive(Serialize)]
struct ScanDoc<'a> {
    #[serde(flatten)]
    meta: &'a ScanMetaDoc,
    rows: &'a [ScanRow],
}

pub fn cmd_scan(cfg: &RunConfig, out: &OutputDir) -> Result<(), CliError> {
    let scan = cfg.scan.as_ref().ok_or_else(|| CliError::Config("scan command needs a [scan] section".into()))?;
    let p = cfg.params()?;
    let space = cfg.space()?;
    let deltas = scan.deltas()?;
    let rows = scan_detuning(&p, &deltas, scan.mode(), &space, &cfg.dip_search())?;
    let ok: Vec<&ScanRow> = rows.iter().filter(|r| r.status == RowStatus::Ok).collect();
    let meta = ScanMetaDoc {
        mode: scan.mode(),
        bifurcated_rows: ok.len(),
        eps1_below_eps2_on_every_row: !ok.is_empty() && ok.iter().all(|r| r.eps1 < r.eps2),
    };
    let csv_rows: Vec<ScanCsvRow> = rows
        .iter()
        .map(|r| ScanCsvRow {
            delta_mhz: r.delta_mhz,
            beta_mhz: r.beta_mhz,
            alpha_true_sq: r.alpha_true_sq,
            alpha_est_sq: r.alpha_est_sq,
            alpha_ana_sq: r.alpha_ana_sq,
            eps1: r.eps1,
            eps2: r.eps2,
            n_dips: r.n_dips,
            dip_low_mhz: r.dip_low,
            dip_high_mhz: r.dip_high,
            status: status_text(&r.status),
        })
        .collect();
    out.csv("scan.csv", &csv_rows, &meta)?;
    out.json("scan.json", &ScanDoc { meta: &meta, rows: &rows })?;
    if let Some(r) = rows.iter().find(|r| matches!(r.status, RowStatus::Failed(_))) {
        return Err(CliError::Analysis(format!("scan row Δ = {} MHz {}", r.delta_mhz, status_text(&r.status))));
    }
    if ok.is_empty() {
        return Err(CliError::Physics("no scan row is bifurcated".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct LevelRow {
    index: usize,
    energy_mhz: f64,
    joint_parity: &'static str,
    label: String,
    overlap: f64,
}

#[derive(Serialize)]
struct EigenDoc {
    alpha: f64,
    ordering: &'static str,
    levels: Vec<LevelRow>,
    transitions: Vec<Transition>,
}

/// Levels listed and the highest level included in the transition table.
const LISTED_LEVELS: usize = 12;
const TRANSITION_LEVELS: usize = 5;

pub fn cmd_eigen(cfg: &RunConfig, out: &OutputDir) -> Result<(), CliError> {
    let p = cfg.params()?;
    let space = cfg.space()?;
    let s = spectrum(&p, &space)?;
    let levels = s
        .levels
        .iter()
        .take(LISTED_LEVELS)
        .map(|l| LevelRow {
            index: l.index,
            energy_mhz: l.energy_mhz,
            joint_parity: if l.parity_even { "even" } else { "odd" },
            label: l.label.name.clone(),
            overlap: l.label.overlap,
        })
        .collect();
    out.json(
        "eigen.json",
        &EigenDoc {
            alpha: s.alpha,
            ordering: "descending energy; level 0 is the top of the spectrum",
            levels,
            transitions: transition_table(&s, TRANSITION_LEVELS),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ResonanceDoc {
    g_mhz: f64,
    alpha: f64,
    alpha_source: &'static str,
    resonances: Vec<Resonance>,
    /// Line weights per transition; absent when `gα = 0` and the lines coincide.
    line_weights: Option<LineWeightDoc>,
}

#[derive(Serialize)]
struct LineWeightDoc {
    time_us: f64,
    lambda_p_mhz: f64,
    g_to_e: Vec<LineWeight>,
    plus_to_minus: Vec<LineWeight>,
    minus_to_plus: Vec<LineWeight>,
}

#[derive(Serialize)]
struct AmplitudeCsvRow {
    delta_q_mhz: f64,
    c1_sq_g_to_e: f64,
    c2_sq_g_to_e: f64,
    c1_sq_plus_to_minus: f64,
    c2_sq_plus_to_minus: f64,
    c1_sq_minus_to_plus: f64,
    c2_sq_minus_to_plus: f64,
}

#[derive(Serialize)]
struct AmplitudeMeta {
    time_us: f64,
    lambda_p_mhz: f64,
}

pub fn cmd_resonances(cfg: &RunConfig, out: &OutputDir) -> Result<(), CliError> {
    let p = cfg.params()?;
    let space = cfg.space()?;
    let (n, _) = true_photon_number_checked(&p, &space)?;
    let alpha = n.max(0.0).sqrt();
    let g_mhz = cfg.system.g_mhz;
    let set = resonance_frequencies(g_mhz, alpha);
    let (t, lp) = (cfg.resonances.time_us, cfg.system.lambda_p_mhz);
    let (plus, minus) = z_eigenstates();
    let (g, e) = ([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let weights = if g_mhz * alpha > 0.0 {
        Some(LineWeightDoc {
            time_us: t,
            lambda_p_mhz: lp,
            g_to_e: line_weights(&g, &e, t, lp, g_mhz, alpha)?,
            plus_to_minus: line_weights(&plus, &minus, t, lp, g_mhz, alpha)?,
            minus_to_plus: line_weights(&minus, &plus, t, lp, g_mhz, alpha)?,
        })
    } else {
        None
    };
    out.json(
        "resonances.json",
        &ResonanceDoc {
            g_mhz,
            alpha,
            alpha_source: "steady-state photon number with g = λp = 0",
            resonances: set.entries,
            line_weights: weights,
        },
    )?;
    let grid = cfg.sweep.points()?;
    let ge = amplitude_scan(&g, &e, t, lp, g_mhz, alpha, &grid);
    let pm = amplitude_scan(&plus, &minus, t, lp, g_mhz, alpha, &grid);
    let mp = amplitude_scan(&minus, &plus, t, lp, g_mhz, alpha, &grid);
    let rows: Vec<AmplitudeCsvRow> = (0..grid.len())
        .map(|k| AmplitudeCsvRow {
            delta_q_mhz: grid[k],
            c1_sq_g_to_e: ge[k].c1_sq,
            c2_sq_g_to_e: ge[k].c2_sq,
            c1_sq_plus_to_minus: pm[k].c1_sq,
            c2_sq_plus_to_minus: pm[k].c2_sq,
            c1_sq_minus_to_plus: mp[k].c1_sq,
            c2_sq_minus_to_plus: mp[k].c2_sq,
        })
        .collect();
    out.csv("amplitudes.csv", &rows, &AmplitudeMeta { time_us: t, lambda_p_mhz: lp })?;
    Ok(())
}

#[derive(Serialize)]
struct SteadyDoc {
    /// Tr[ρ_ss a†a] of the oscillator alone (g = λp = 0).
    photon_number: f64,
    convergence: ConvergenceReport,
    /// Coupled model with λp = 0.
    coupled_photon_number: f64,
    coupled_sigma_z: f64,
    residual: f64,
    smallest_singular_values: Vec<f64>,
}

pub fn cmd_steady(cfg: &RunConfig, out: &OutputDir) -> Result<(), CliError> {
    let p = cfg.params()?;
    let space = cfg.space()?;
    let mut kpo_only = p.with_lambda_p(0.0);
    kpo_only.g = 0.0;
    if kpo_only.gamma2 == 0.0 {
        kpo_only.gamma2 = 1.0;
    }
    let convergence = convergence_report(&kpo_only, &space)?;
    let ss = steady_state_with_info(&p.with_lambda_p(0.0), &space)?;
    let ops = CompositeOps::new(&space);
    let doc = SteadyDoc {
        photon_number: convergence.value,
        convergence,
        coupled_photon_number: expectation(&ss.rho, &ops.number)?.re,
        coupled_sigma_z: expectation(&ss.rho, &ops.sigma_z)?.re,
        residual: ss.info.residual,
        smallest_singular_values: ss.info.smallest_singular_values,
    };
    out.json("steady.json", &doc)?;
    if !convergence.passed {
        return Err(CliError::Physics(format!(
            "photon number not converged: {} at N = {} vs {} at N = {}",
            convergence.value, convergence.fock_cutoff, convergence.reference_value, convergence.reference_cutoff
        )));
    }
    Ok(())
}
