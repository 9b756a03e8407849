use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::integrator::{dopri5, hermite, IntegrationStats, Step, Tolerances};
use crate::error::{KpoError, Result};
use crate::fockspace::{DensityMatrix, HilbertSpec, Operator};
use crate::linalg::{self, ZERO};
use crate::model::{build_static, CompositeOps, SystemParams};

/// Row-compressed sparse matrix, enough to apply the model operators to
/// column-major density matrices.
#[derive(Debug, Clone)]
struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    fn from_dense(m: &linalg::CMat) -> Self {
        let n = m.nrows();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    /// `out = S X` with `X` column-major `n × n`.
    fn mul_mat(&self, x: &[C64], out: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            let xc = &x[j * n..(j + 1) * n];
            let oc = &mut out[j * n..(j + 1) * n];
            for i in 0..n {
                let mut acc = ZERO;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[k] * xc[self.cols[k]];
                }
                oc[i] = acc;
            }
        }
    }

    /// `out += γ U S†` with `U` column-major.
    fn add_mul_adjoint_right(&self, u: &[C64], gamma: f64, out: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            let oc_start = j * n;
            for k in self.row_ptr[j]..self.row_ptr[j + 1] {
                let w = self.vals[k].conj() * gamma;
                let uc = &u[self.cols[k] * n..(self.cols[k] + 1) * n];
                for (o, v) in out[oc_start..oc_start + n].iter_mut().zip(uc) {
                    *o += v * w;
                }
            }
        }
    }

    /// `Tr(S X)` for column-major `X`.
    fn trace_product(&self, x: &[C64]) -> C64 {
        let n = self.n;
        let mut acc = ZERO;
        for i in 0..n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[i + n * self.cols[k]];
            }
        }
        acc
    }
}

/// Qubit drive `λp(σ+ e^{−iΔq t} + σ− e^{iΔq t})` on the composite space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub lambda_p: f64,
    pub delta_q: f64,
}

/// GKSL equation with a static Hamiltonian, an optional qubit drive, and a
/// set of jump operators.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    dim: usize,
    k_eff: Csr,
    jumps: Vec<(Csr, f64)>,
    drive: Option<Drive>,
    observable: Csr,
    max_frequency_mhz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolveControls {
    pub tolerances: Tolerances,
    /// Times at which full density matrices are stored.
    pub snapshot_times: Vec<f64>,
    /// Overrides the automatic observable sampling spacing (µs).
    pub sample_spacing: Option<f64>,
}

impl Default for EvolveControls {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), snapshot_times: Vec::new(), sample_spacing: None }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub state: DensityMatrix,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub trace_err: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub params: Option<SystemParams>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn t_final(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn final_state(&self) -> Option<&DensityMatrix> {
        self.snapshots.last().map(|s| &s.state)
    }

    pub fn max_trace_error(&self) -> f64 {
        self.trace_err.iter().copied().fold(0.0, f64::max)
    }

    /// Writes `time_us,sigma_z,trace_err` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_us,sigma_z,trace_err")?;
        for ((t, s), e) in self.times.iter().zip(&self.sigma_z).zip(&self.trace_err) {
            writeln!(w, "{t},{s},{e}")?;
        }
        Ok(())
    }
}

impl MasterEquation {
    /// Generic equation; `observable` is the operator sampled along the trajectory.
    pub fn new(h: &Operator, dissipators: &[(Operator, f64)], observable: &Operator) -> Result<Self> {
        let d = h.dim();
        for (c, rate) in dissipators {
            if c.dim() != d {
                return Err(KpoError::DimensionMismatch { expected: d, found: c.dim() });
            }
            if !(*rate >= 0.0) {
                return Err(KpoError::InvalidParams(format!("negative dissipation rate {rate}")));
            }
        }
        if observable.dim() != d {
            return Err(KpoError::DimensionMismatch { expected: d, found: observable.dim() });
        }
        let mut k = linalg::scale(h.entries().as_ref(), C64::new(0.0, -1.0));
        for (c, rate) in dissipators {
            let cdc = c.entries().adjoint() * c.entries();
            k = k - linalg::scale(cdc.as_ref(), C64::new(0.5 * rate, 0.0));
        }
        let jumps = dissipators
            .iter()
            .filter(|(_, r)| *r > 0.0)
            .map(|(c, r)| (Csr::from_dense(c.entries()), *r))
            .collect();
        Ok(Self {
            dim: d,
            k_eff: Csr::from_dense(&k),
            jumps,
            drive: None,
            observable: Csr::from_dense(observable.entries()),
            max_frequency_mhz: 0.0,
        })
    }

    /// Model equation with photon loss `γ₁` on `a`, qubit decay `γ₂` on σ−,
    /// the time-dependent drive, and ⟨σz⟩ as the sampled observable.
    pub fn from_params(p: &SystemParams, space: &HilbertSpec) -> Result<Self> {
        p.validate()?;
        let ops = CompositeOps::new(space);
        let h0 = build_static(p, space);
        let mut me = Self::new(&h0, &[(ops.a, p.gamma1), (ops.sigma_minus, p.gamma2)], &ops.sigma_z)?;
        if p.lambda_p != 0.0 {
            me.drive = Some(Drive { lambda_p: p.lambda_p, delta_q: p.delta_q });
        }
        me.max_frequency_mhz = [p.delta_q.abs(), 2.0 * p.lambda_p.abs(), p.delta.abs()]
            .into_iter()
            .fold(0.0, f64::max)
            / TAU;
        Ok(me)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Uniform observable spacing `min(1 ns, 1/(20 f_max))`.
    pub fn default_sample_spacing(&self) -> f64 {
        let base: f64 = 1e-3;
        if self.max_frequency_mhz > 0.0 {
            base.min(1.0 / (20.0 * self.max_frequency_mhz))
        } else {
            base
        }
    }

    /// `dρ/dt = S + S†` with `S = Kρ + ½Σγ cρc†`, which equals the GKSL
    /// right-hand side for Hermitian ρ. Writing it in this symmetric form keeps
    /// rounding-level anti-Hermitian noise from being amplified by the jump
    /// terms, so the trace stays conserved to machine precision.
    fn rhs(&self, t: f64, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let n = self.dim;
        let (s, tmp) = scratch.split_at_mut(n * n);
        self.k_eff.mul_mat(rho, s);
        if let Some(dr) = self.drive {
            let up = C64::from_polar(dr.lambda_p, -dr.delta_q * t) * C64::new(0.0, -1.0);
            let down = C64::from_polar(dr.lambda_p, dr.delta_q * t) * C64::new(0.0, -1.0);
            // σ+ moves the qubit index 0 → 1 inside each Fock block
            for j in 0..n {
                let col = &rho[j * n..(j + 1) * n];
                let sc = &mut s[j * n..(j + 1) * n];
                for b in (0..n).step_by(2) {
                    sc[b + 1] += up * col[b];
                    sc[b] += down * col[b + 1];
                }
            }
        }
        for (c, gamma) in &self.jumps {
            c.mul_mat(rho, tmp);
            c.add_mul_adjoint_right(tmp, 0.5 * gamma, s);
        }
        for j in 0..n {
            for i in 0..n {
                out[i + n * j] = s[i + n * j] + s[j + n * i].conj();
            }
        }
    }

    pub fn observable_value(&self, rho: &[C64]) -> f64 {
        self.observable.trace_product(rho).re
    }

    pub fn trace_value(&self, rho: &[C64]) -> f64 {
        (0..self.dim).map(|i| rho[i * (self.dim + 1)].re).sum()
    }

    /// `L[ρ]` via the same kernel used by the integrator (drive at time `t`).
    pub fn apply(&self, t: f64, rho: &DensityMatrix) -> Result<linalg::CMat> {
        if rho.dim() != self.dim {
            return Err(KpoError::DimensionMismatch { expected: self.dim, found: rho.dim() });
        }
        let v = super::liouvillian::vectorize(rho.entries());
        let mut out = vec![ZERO; v.len()];
        let mut scratch = vec![ZERO; 2 * v.len()];
        self.rhs(t, &v, &mut out, &mut scratch);
        Ok(super::liouvillian::unvectorize(&out, self.dim))
    }

    pub fn evolve(&self, rho0: &DensityMatrix, t_final: f64, controls: &EvolveControls) -> Result<Trajectory> {
        let n = self.dim;
        if rho0.dim() != n {
            return Err(KpoError::DimensionMismatch { expected: n, found: rho0.dim() });
        }
        if !(t_final >= 0.0) {
            return Err(KpoError::InvalidParams(format!("t_final must be non-negative, got {t_final}")));
        }
        let y0 = super::liouvillian::vectorize(rho0.entries());
        let spacing = controls.sample_spacing.unwrap_or_else(|| self.default_sample_spacing());
        let samples = if t_final > 0.0 { (t_final / spacing).ceil().max(1.0) as usize } else { 0 };
        let times: Vec<f64> = (0..=samples)
            .map(|k| if samples == 0 { 0.0 } else { t_final * k as f64 / samples as f64 })
            .collect();
        let mut sigma_z = Vec::with_capacity(times.len());
        let mut trace_err = Vec::with_capacity(times.len());
        sigma_z.push(self.observable_value(&y0));
        trace_err.push((self.trace_value(&y0) - 1.0).abs());

        let mut stops: Vec<f64> =
            controls.snapshot_times.iter().copied().filter(|&t| t > 0.0 && t < t_final).collect();
        stops.sort_by(|a, b| a.total_cmp(b));
        stops.dedup();
        let mut snapshots = Vec::new();
        for &t in &controls.snapshot_times {
            if t == 0.0 && !snapshots.iter().any(|s: &Snapshot| s.time == 0.0) {
                snapshots.push(Snapshot { time: 0.0, state: rho0.clone() });
            }
        }

        let mut scratch = vec![ZERO; 2 * n * n];
        let mut next_sample = 1usize;
        let snap_set = controls.snapshot_times.clone();
        let mut observer = |s: &Step<'_>| {
            let o0 = self.observable_value(s.y0);
            let o1 = self.observable_value(s.y1);
            let do0 = self.observable_value(s.f0);
            let do1 = self.observable_value(s.f1);
            let r0 = self.trace_value(s.y0);
            let r1 = self.trace_value(s.y1);
            let dr0 = self.trace_value(s.f0);
            let dr1 = self.trace_value(s.f1);
            while next_sample < times.len() && times[next_sample] <= s.t1 + 1e-12 * t_final {
                let t = times[next_sample].min(s.t1);
                sigma_z.push(hermite(s.t0, s.t1, o0, do0, o1, do1, t));
                trace_err.push((hermite(s.t0, s.t1, r0, dr0, r1, dr1, t) - 1.0).abs());
                next_sample += 1;
            }
            if snap_set.iter().any(|&ts| ts == s.t1) {
                let m = super::liouvillian::unvectorize(s.y1, n);
                if let Ok(state) = DensityMatrix::new_unchecked(m) {
                    snapshots.push(Snapshot { time: s.t1, state });
                }
            }
        };
        let (_, stats) = dopri5(
            |t, y, dy| self.rhs(t, y, dy, &mut scratch),
            0.0,
            &y0,
            t_final,
            &controls.tolerances,
            &stops,
            &mut observer,
        )?;
        Ok(Trajectory { times, sigma_z, trace_err, snapshots, params: None, stats })
    }
}

/// Evolve the model master equation from `rho0` for `t_final` µs.
pub fn evolve(rho0: &DensityMatrix, p: &SystemParams, t_final: f64, controls: &EvolveControls) -> Result<Trajectory> {
    if rho0.dim() % 2 != 0 {
        return Err(KpoError::DimensionMismatch { expected: rho0.dim() + 1, found: rho0.dim() });
    }
    let space = HilbertSpec::new(rho0.dim() / 2)?;
    let me = MasterEquation::from_params(p, &space)?;
    let mut traj = me.evolve(rho0, t_final, controls)?;
    traj.params = Some(*p);
    Ok(traj)
}

/// `(1/t)∫(⟨σz⟩ + 1)/2 dτ` by the trapezoid rule on the sampled grid.
pub fn time_integrated_excitation(traj: &Trajectory) -> f64 {
    let t = traj.t_final();
    if traj.times.len() < 2 || t <= 0.0 {
        return traj.sigma_z.first().map(|s| 0.5 * (s + 1.0)).unwrap_or(0.0);
    }
    let mut acc = 0.0;
    for k in 1..traj.times.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        acc += 0.5 * dt * (traj.sigma_z[k] + traj.sigma_z[k - 1]);
    }
    0.5 * (acc / t + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{pauli, Ket, Pauli};
    use crate::model::ParamsMhz;
    use std::f64::consts::PI;

    fn tight() -> Tolerances {
        Tolerances { rtol: 1e-11, atol: 1e-13, ..Default::default() }
    }

    fn rabi_params() -> SystemParams {
        let mut m = ParamsMhz::reference();
        m.beta_mhz = 0.0;
        m.g_mhz = 0.0;
        m.gamma1_mhz = 0.0;
        m.gamma2_mhz = 0.0;
        m.delta_q_mhz = 0.0;
        m.qubit_offset_mhz = 0.0;
        m.lambda_p_mhz = 0.5;
        SystemParams::from_mhz(&m).unwrap()
    }

    #[test]
    fn zero_generator_keeps_state() {
        let h = Operator::zero(2);
        let me = MasterEquation::new(&h, &[], &pauli(Pauli::Z)).unwrap();
        let rho = Ket::qubit_x(crate::fockspace::Parity::Even).projector();
        let controls = EvolveControls { snapshot_times: vec![1.0], ..Default::default() };
        let traj = me.evolve(&rho, 1.0, &controls).unwrap();
        assert!(rho.trace_distance(traj.final_state().unwrap()).unwrap() < 1e-14);
    }

    #[test]
    fn resonant_rabi_oscillation() {
        let p = rabi_params();
        let s = HilbertSpec::new(3).unwrap();
        let rho = Ket::fock(0, &s).tensor(&Ket::ground()).projector();
        let traj = evolve(&rho, &p, 1.0, &EvolveControls::default()).unwrap();
        for (t, sz) in traj.times.iter().zip(&traj.sigma_z) {
            assert!((sz + (2.0 * p.lambda_p * t).cos()).abs() < 1e-6, "t = {t}");
        }
        let k = traj.times.iter().position(|&t| (t - 0.25).abs() < 1e-12).unwrap();
        assert!(traj.sigma_z[k].abs() < 1e-6);
        // one full period, 1/(2·0.5 MHz) = 1 µs, averages to one half
        assert!((time_integrated_excitation(&traj) - 0.5).abs() < 1e-6);
        assert!(traj.max_trace_error() < 1e-10);
    }

    #[test]
    fn ground_state_has_zero_excitation() {
        let mut p = rabi_params();
        p.lambda_p = 0.0;
        p.gamma2 = 2.0 * PI;
        let s = HilbertSpec::new(3).unwrap();
        let rho = Ket::fock(0, &s).tensor(&Ket::ground()).projector();
        let traj = evolve(&rho, &p, 0.5, &EvolveControls::default()).unwrap();
        assert!(traj.sigma_z.iter().all(|v| (v + 1.0).abs() < 1e-12));
        assert!(time_integrated_excitation(&traj).abs() < 1e-12);
    }

    #[test]
    fn unitary_limit_matches_propagator() {
        let mut m = ParamsMhz::reference();
        m.gamma1_mhz = 0.0;
        m.gamma2_mhz = 0.0;
        m.lambda_p_mhz = 0.0;
        let p = SystemParams::from_mhz(&m).unwrap();
        let s = HilbertSpec::new(6).unwrap();
        let psi = Ket::fock(1, &s).tensor(&Ket::qubit_x(crate::fockspace::Parity::Odd));
        let t = 0.2;
        let controls = EvolveControls { snapshot_times: vec![t], tolerances: tight(), ..Default::default() };
        let traj = evolve(&psi.projector(), &p, t, &controls).unwrap();
        let h = build_static(&p, &s);
        let u = linalg::expm(linalg::scale(h.entries().as_ref(), C64::new(0.0, -t)).as_ref());
        let rho = psi.projector();
        let exact = &u * rho.entries() * u.adjoint();
        let got = traj.final_state().unwrap().entries();
        let d = linalg::max_abs_diff(exact.as_ref(), got.as_ref());
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let mut m = ParamsMhz::reference();
        m.lambda_p_mhz = 0.0;
        let p = SystemParams::from_mhz(&m).unwrap();
        let s = HilbertSpec::new(8).unwrap();
        let rho = super::super::steady_state(&p, &s).unwrap();
        let controls = EvolveControls { snapshot_times: vec![0.5], tolerances: tight(), ..Default::default() };
        let traj = evolve(&rho, &p, 0.5, &controls).unwrap();
        let d = rho.trace_distance(traj.final_state().unwrap()).unwrap();
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = rabi_params();
        let rho = Ket::ground().projector();
        let me = MasterEquation::from_params(&p, &HilbertSpec::new(3).unwrap()).unwrap();
        assert!(matches!(
            me.evolve(&rho, 1.0, &EvolveControls::default()),
            Err(KpoError::DimensionMismatch { .. })
        ));
        let s = HilbertSpec::new(3).unwrap();
        let rho = Ket::fock(0, &s).tensor(&Ket::ground()).projector();
        assert!(me.evolve(&rho, -1.0, &EvolveControls::default()).is_err());
    }
}
