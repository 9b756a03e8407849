use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kpo_core::dynamics::{Tolerances, WindowSettings};
use kpo_core::estimator::{DipSearch, ScanMode, PRINCIPAL_PROMINENCE, SECONDARY_PROMINENCE};
use kpo_core::fockspace::HilbertSpec;
use kpo_core::model::{ParamsMhz, SystemParams};
use kpo_core::spectroscopy::{GridSpec, SweepMethod, SweepSettings};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: ParamsMhz,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub sweep: GridSpec,
    #[serde(default)]
    pub extrema: ExtremaConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub resonances: ResonanceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Window,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub fock_cutoff: usize,
    pub t_final_us: f64,
    pub method: Method,
    pub window_size: usize,
    pub window_step_us: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        let w = WindowSettings::default();
        let t = Tolerances::default();
        Self {
            fock_cutoff: 20,
            t_final_us: 3.0,
            method: Method::Window,
            window_size: w.size,
            window_step_us: w.step_us,
            rtol: t.rtol,
            atol: t.atol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtremaConfig {
    /// Relative to the spectrum's dynamic range.
    pub principal_prominence: f64,
    pub secondary_prominence: f64,
}

impl Default for ExtremaConfig {
    fn default() -> Self {
        Self { principal_prominence: PRINCIPAL_PROMINENCE, secondary_prominence: SECONDARY_PROMINENCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    FixedBeta,
    Constrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub mode: ScanKind,
    /// `2β + Δ` in MHz for the constrained mode.
    #[serde(default = "default_constraint")]
    pub constraint_mhz: f64,
    /// Explicit detunings (MHz); takes precedence over the range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_range: Option<GridSpec>,
    #[serde(default = "default_coarse_step")]
    pub coarse_step_mhz: f64,
    #[serde(default = "default_fine_step")]
    pub fine_step_mhz: f64,
    #[serde(default = "default_fine_halfwidth")]
    pub fine_halfwidth_mhz: f64,
}

fn default_constraint() -> f64 {
    50.0
}
fn default_coarse_step() -> f64 {
    0.25
}
fn default_fine_step() -> f64 {
    0.05
}
fn default_fine_halfwidth() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceConfig {
    /// Interaction time (µs) for the amplitude table.
    pub time_us: f64,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        Self { time_us: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.system;
        for (name, v) in [("gamma1_mhz", s.gamma1_mhz), ("gamma2_mhz", s.gamma2_mhz), ("beta_mhz", s.beta_mhz)] {
            if !(v >= 0.0) {
                return Err(CliError::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        SystemParams::from_mhz(s).map_err(|e| CliError::Config(e.to_string()))?;
        HilbertSpec::new(self.numerics.fock_cutoff).map_err(|e| CliError::Config(e.to_string()))?;
        positive("t_final_us", self.numerics.t_final_us)?;
        positive("window_step_us", self.numerics.window_step_us)?;
        positive("rtol", self.numerics.rtol)?;
        positive("atol", self.numerics.atol)?;
        if self.numerics.window_size < 2 {
            return Err(CliError::Config("window_size must be at least 2".into()));
        }
        self.sweep.validate().map_err(|e| CliError::Config(e.to_string()))?;
        positive("principal_prominence", self.extrema.principal_prominence)?;
        positive("secondary_prominence", self.extrema.secondary_prominence)?;
        positive("resonances.time_us", self.resonances.time_us)?;
        if let Some(scan) = &self.scan {
            positive("coarse_step_mhz", scan.coarse_step_mhz)?;
            positive("fine_step_mhz", scan.fine_step_mhz)?;
            positive("fine_halfwidth_mhz", scan.fine_halfwidth_mhz)?;
            scan.deltas()?;
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams, CliError> {
        SystemParams::from_mhz(&self.system).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn space(&self) -> Result<HilbertSpec, CliError> {
        HilbertSpec::new(self.numerics.fock_cutoff).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        let n = &self.numerics;
        let method = match n.method {
            Method::Window => SweepMethod::Window(WindowSettings { size: n.window_size, step_us: n.window_step_us }),
            Method::Full => SweepMethod::Full(Tolerances { rtol: n.rtol, atol: n.atol, ..Tolerances::default() }),
        };
        SweepSettings { t_final_us: n.t_final_us, method }
    }

    pub fn dip_search(&self) -> DipSearch {
        let scan = self.scan.as_ref();
        DipSearch {
            coarse: GridSpec {
                step_mhz: scan.map_or(default_coarse_step(), |s| s.coarse_step_mhz),
                ..self.sweep
            },
            fine_step_mhz: scan.map_or(default_fine_step(), |s| s.fine_step_mhz),
            fine_halfwidth_mhz: scan.map_or(default_fine_halfwidth(), |s| s.fine_halfwidth_mhz),
            min_prominence: self.extrema.principal_prominence,
            sweep: self.sweep_settings(),
        }
    }
}

impl ScanConfig {
    pub fn deltas(&self) -> Result<Vec<f64>, CliError> {
        let values = match (&self.delta_values, &self.delta_range) {
            (Some(v), _) => v.clone(),
            (None, Some(r)) => r.points().map_err(|e| CliError::Config(e.to_string()))?,
            (None, None) => Vec::new(),
        };
        if values.is_empty() {
            return Err(CliError::Config("scan needs a non-empty detuning list".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("scan detunings must be finite".into()));
        }
        Ok(values)
    }

    pub fn mode(&self) -> ScanMode {
        match self.mode {
            ScanKind::FixedBeta => ScanMode::FixedBeta,
            ScanKind::Constrained => ScanMode::Constrained { constant_mhz: self.constraint_mhz },
        }
    }
}

/// Parses `MIN:MAX:STEP`.
pub fn parse_grid(s: &str) -> Result<GridSpec, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("grid must be MIN:MAX:STEP, got {s:?}")));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad grid value {p:?}: {e}")));
    let grid = GridSpec { min_mhz: num(parts[0])?, max_mhz: num(parts[1])?, step_mhz: num(parts[2])? };
    grid.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
delta_mhz = -30.0
chi_mhz = 18.0
beta_mhz = 42.0
g_mhz = 5.0
lambda_p_mhz = 0.5
gamma1_mhz = 0.8
gamma2_mhz = 0.8
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.numerics.fock_cutoff, 20);
        assert_eq!(c.sweep.step_mhz, 0.05);
        assert_eq!(c.output.dir, PathBuf::from("out"));
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.scan = Some(ScanConfig {
            mode: ScanKind::Constrained,
            constraint_mhz: 50.0,
            delta_values: None,
            delta_range: Some(GridSpec { min_mhz: -34.0, max_mhz: -26.0, step_mhz: 2.0 }),
            coarse_step_mhz: 0.25,
            fine_step_mhz: 0.05,
            fine_halfwidth_mhz: 0.5,
        });
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.scan.unwrap().deltas().unwrap(), vec![-34.0, -32.0, -30.0, -28.0, -26.0]);
    }

    #[test]
    fn rejects_bad_values() {
        let bad_step = format!("{MINIMAL}\n[sweep]\nmin_mhz = -1.0\nmax_mhz = 1.0\nstep_mhz = 0.0\n");
        assert!(RunConfig::parse(&bad_step).unwrap().validate().is_err());
        let bad_rate = MINIMAL.replace("gamma1_mhz = 0.8", "gamma1_mhz = -0.8");
        assert!(RunConfig::parse(&bad_rate).unwrap().validate().is_err());
        let bad_cutoff = format!("{MINIMAL}\n[numerics]\nfock_cutoff = 1\nt_final_us = 3.0\nmethod = \"window\"\nwindow_size = 12\nwindow_step_us = 0.002\nrtol = 1e-8\natol = 1e-10\n");
        assert!(RunConfig::parse(&bad_cutoff).unwrap().validate().is_err());
        let empty_scan = format!("{MINIMAL}\n[scan]\nmode = \"fixed_beta\"\ndelta_values = []\n");
        assert!(RunConfig::parse(&empty_scan).unwrap().validate().is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}\nunknown = 1\n")).is_err());
    }

    #[test]
    fn grid_flag() {
        let g = parse_grid("-5:5:0.5").unwrap();
        assert_eq!((g.min_mhz, g.max_mhz, g.step_mhz), (-5.0, 5.0, 0.5));
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("0:1:-1").is_err());
    }
}
