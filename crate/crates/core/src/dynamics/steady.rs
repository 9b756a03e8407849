//! Steady states from the null space of the Liouvillian.
//!
//! The static Hamiltonian commutes with the joint parity `exp(iπ(a†a + σ+σ−))`
//! and both jump operators flip it, so the generator maps the block of
//! coherences between equal-parity states onto itself. The trace and any
//! parity-even observable live entirely in that block, so the null vector is
//! searched there, which halves the dimension of the singular value problem.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{KpoError, Result};
use crate::fockspace::{DensityMatrix, HilbertSpec, Operator, StateDiagnostics};
use crate::linalg::{self, CMat, ZERO};
use crate::model::{build_h_kpo, build_static, joint_parity_of_index, CompositeOps, SystemParams};

use super::liouvillian::apply_superoperator;

/// Relative singular-value threshold below which a direction counts as null.
pub const NULL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateInfo {
    /// Frobenius norm of `L[ρ_ss]`.
    pub residual: f64,
    pub smallest_singular_values: Vec<f64>,
    pub largest_singular_value: f64,
    pub diagnostics: StateDiagnostics,
    pub decoupled: bool,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub info: SteadyStateInfo,
}

/// Matrix of the generator `L = I⊗K + K̄⊗I + Σγ c̄⊗c` restricted to the
/// vectorised entries `(i, j)` listed in `pairs`.
fn sector_matrix(k: &CMat, jumps: &[(CMat, f64)], pairs: &[(usize, usize)]) -> CMat {
    let m = pairs.len();
    Mat::from_fn(m, m, |r, c| {
        let (i, j) = pairs[r];
        let (k2, l) = pairs[c];
        let mut v = ZERO;
        if j == l {
            v += k[(i, k2)];
        }
        if i == k2 {
            v += k[(j, l)].conj();
        }
        for (op, g) in jumps {
            v += op[(j, l)].conj() * op[(i, k2)] * *g;
        }
        v
    })
}

fn effective_generator(h: &CMat, jumps: &[(CMat, f64)]) -> CMat {
    let mut k = linalg::scale(h.as_ref(), C64::new(0.0, -1.0));
    for (c, g) in jumps {
        let cdc = c.adjoint() * c;
        k = k - linalg::scale(cdc.as_ref(), C64::new(0.5 * g, 0.0));
    }
    k
}

/// Null vector of the generator on the block spanned by `pairs`, returned as a
/// Hermitian, unit-trace matrix.
pub fn null_state(h: &CMat, jumps: &[(CMat, f64)], pairs: &[(usize, usize)]) -> Result<(CMat, Vec<f64>, f64)> {
    let d = h.nrows();
    let k = effective_generator(h, jumps);
    let l = sector_matrix(&k, jumps, pairs);
    let svd = l.svd().map_err(|e| KpoError::Linalg(format!("{e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|v| v.re).collect();
    let m = pairs.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let smax = s[order[m - 1]];
    let null: Vec<f64> = order.iter().map(|&i| s[i]).take_while(|&v| v <= NULL_TOLERANCE * smax).collect();
    if null.len() > 1 {
        return Err(KpoError::DegenerateSteadyState { count: null.len(), smallest: null });
    }
    let v = svd.V();
    let col = order[0];
    let mut rho = linalg::zeros(d);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        rho[(i, j)] = v[(r, col)];
    }
    let mut rho = Mat::from_fn(d, d, |i, j| 0.5 * (rho[(i, j)] + rho[(j, i)].conj()));
    let tr = linalg::trace(rho.as_ref());
    if tr.norm() < 1e-14 {
        return Err(KpoError::Linalg("null vector has vanishing trace".into()));
    }
    rho = linalg::scale(rho.as_ref(), tr.inv());
    let smallest = order.iter().take(3).map(|&i| s[i]).collect();
    Ok((rho, smallest, smax))
}

/// All pairs `(i, j)` with equal parity labels.
pub fn even_pairs(parity: &[bool]) -> Vec<(usize, usize)> {
    let d = parity.len();
    let mut pairs = Vec::with_capacity(d * d / 2 + 1);
    for j in 0..d {
        for i in 0..d {
            if parity[i] == parity[j] {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

fn residual(h: &CMat, jumps: &[(CMat, f64)], rho: &CMat) -> f64 {
    let r = apply_superoperator(h, jumps, rho);
    r.norm_l2()
}

/// Steady state of the undriven model (`λp` must be zero).
pub fn steady_state(p: &SystemParams, space: &HilbertSpec) -> Result<DensityMatrix> {
    Ok(steady_state_with_info(p, space)?.rho)
}

pub fn steady_state_with_info(p: &SystemParams, space: &HilbertSpec) -> Result<SteadyState> {
    p.validate()?;
    if p.lambda_p != 0.0 {
        return Err(KpoError::InvalidParams("steady state requires lambda_p = 0".into()));
    }
    if p.gamma1 == 0.0 && p.gamma2 == 0.0 {
        return Err(KpoError::NoDissipation);
    }
    if p.g == 0.0 {
        return decoupled_steady_state(p, space);
    }
    let ops = CompositeOps::new(space);
    let h = build_static(p, space).into_entries();
    let jumps = vec![(ops.a.into_entries(), p.gamma1), (ops.sigma_minus.into_entries(), p.gamma2)];
    let parity: Vec<bool> = (0..space.total_dim()).map(joint_parity_of_index).collect();
    let (rho, smallest, smax) = null_state(&h, &jumps, &even_pairs(&parity))?;
    let res = residual(&h, &jumps, &rho);
    finish(rho, res, smallest, smax, false)
}

/// With `g = 0` the oscillator and qubit relax independently, so the steady
/// state factorises as `ρ_KPO ⊗ |g⟩⟨g|`.
fn decoupled_steady_state(p: &SystemParams, space: &HilbertSpec) -> Result<SteadyState> {
    if p.gamma2 == 0.0 {
        return Err(KpoError::DegenerateSteadyState { count: 2, smallest: vec![0.0, 0.0] });
    }
    let n = space.fock_cutoff();
    let full = build_h_kpo(p, space);
    // H_KPO ⊗ I₂: take the qubit-ground block
    let h = Mat::from_fn(n, n, |i, j| full.get(2 * i, 2 * j));
    let a = crate::fockspace::annihilation(space).into_entries();
    let jumps = vec![(a, p.gamma1)];
    let parity: Vec<bool> = (0..n).map(|k| k % 2 == 0).collect();
    let (rho_kpo, smallest, smax) = null_state(&h, &jumps, &even_pairs(&parity))?;
    let res_kpo = residual(&h, &jumps, &rho_kpo);
    let mut g = linalg::zeros(2);
    g[(0, 0)] = C64::new(1.0, 0.0);
    let rho = linalg::kron(rho_kpo.as_ref(), g.as_ref());
    finish(rho, res_kpo, smallest, smax, true)
}

fn finish(rho: CMat, residual: f64, smallest: Vec<f64>, smax: f64, decoupled: bool) -> Result<SteadyState> {
    let rho = DensityMatrix::new_unchecked(rho)?;
    let diagnostics = rho.diagnostics()?;
    if diagnostics.min_eigenvalue < -1e-8 {
        return Err(KpoError::Linalg(format!(
            "steady state is not positive (minimum eigenvalue {:.3e})",
            diagnostics.min_eigenvalue
        )));
    }
    Ok(SteadyState {
        rho,
        info: SteadyStateInfo {
            residual,
            smallest_singular_values: smallest,
            largest_singular_value: smax,
            diagnostics,
            decoupled,
        },
    })
}

/// Generic steady state of `h` with the given jump operators, searched over
/// the full operator space.
pub fn steady_state_general(h: &Operator, dissipators: &[(Operator, f64)]) -> Result<DensityMatrix> {
    if dissipators.iter().all(|(_, g)| *g == 0.0) {
        return Err(KpoError::NoDissipation);
    }
    let d = h.dim();
    let jumps: Vec<(CMat, f64)> = dissipators.iter().map(|(c, g)| (c.entries().clone(), *g)).collect();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|j| (0..d).map(move |i| (i, j))).collect();
    let (rho, _, _) = null_state(h.entries(), &jumps, &pairs)?;
    DensityMatrix::new_unchecked(rho)
}

/// Tr(obs ρ).
pub fn expectation(rho: &DensityMatrix, obs: &Operator) -> Result<C64> {
    if rho.dim() != obs.dim() {
        return Err(KpoError::DimensionMismatch { expected: rho.dim(), found: obs.dim() });
    }
    Ok(linalg::trace((obs.entries() * rho.entries()).as_ref()))
}

/// Steady-state photon number `Tr[ρ_ss a†a]` with the drive removed.
pub fn steady_photon_number(p: &SystemParams, space: &HilbertSpec) -> Result<f64> {
    let rho = steady_state(&p.with_lambda_p(0.0), space)?;
    let ops = CompositeOps::new(space);
    Ok(expectation(&rho, &ops.number)?.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub fock_cutoff: usize,
    pub value: f64,
    pub reference_cutoff: usize,
    pub reference_value: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the steady-state photon number at `N` and `N + 5`.
pub fn convergence_report(p: &SystemParams, space: &HilbertSpec) -> Result<ConvergenceReport> {
    let n = space.fock_cutoff();
    let value = steady_photon_number(p, space)?;
    let reference_value = steady_photon_number(p, &HilbertSpec::new(n + 5)?)?;
    let difference = (value - reference_value).abs();
    let tolerance = 1e-3;
    Ok(ConvergenceReport {
        fock_cutoff: n,
        value,
        reference_cutoff: n + 5,
        reference_value,
        difference,
        tolerance,
        passed: difference < tolerance,
    })
}

/// Like [`convergence_report`] but fails with `NotConverged`.
pub fn convergence_check(p: &SystemParams, space: &HilbertSpec) -> Result<ConvergenceReport> {
    let r = convergence_report(p, space)?;
    if !r.passed {
        return Err(KpoError::NotConverged {
            n: r.fock_cutoff,
            m: r.reference_cutoff,
            value_n: r.value,
            value_m: r.reference_value,
        });
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{pauli, Pauli};
    use crate::model::ParamsMhz;

    fn params(f: impl FnOnce(&mut ParamsMhz)) -> SystemParams {
        let mut m = ParamsMhz::reference();
        m.lambda_p_mhz = 0.0;
        f(&mut m);
        SystemParams::from_mhz(&m).unwrap()
    }

    #[test]
    fn vacuum_without_pump() {
        let s = HilbertSpec::new(8).unwrap();
        for g in [0.0, 5.0] {
            let p = params(|m| {
                m.beta_mhz = 0.0;
                m.g_mhz = g;
            });
            let ss = steady_state_with_info(&p, &s).unwrap();
            let rho = ss.rho.entries();
            assert!((rho[(0, 0)].re - 1.0).abs() < 1e-9, "g = {g}");
            assert!(ss.info.residual < 1e-8);
        }
    }

    #[test]
    fn coupled_state_is_physical() {
        let s = HilbertSpec::new(10).unwrap();
        let ss = steady_state_with_info(&params(|_| {}), &s).unwrap();
        assert!(!ss.info.decoupled);
        assert!(ss.info.residual < 1e-8);
        assert!(ss.info.diagnostics.trace_error < 1e-12);
        assert!(ss.info.diagnostics.hermitian_deviation < 1e-12);
        assert!(ss.info.diagnostics.min_eigenvalue > -1e-8);
        // the null vector is isolated
        assert!(ss.info.smallest_singular_values[1] > 1e-6 * ss.info.largest_singular_value, "{:?}", ss.info);
    }

    #[test]
    fn decoupled_fast_path_matches_full_search() {
        let s = HilbertSpec::new(8).unwrap();
        let p = params(|m| m.g_mhz = 0.0);
        let fast = steady_state(&p, &s).unwrap();
        let ops = CompositeOps::new(&s);
        let h = build_static(&p, &s);
        let general = steady_state_general(&h, &[(ops.a, p.gamma1), (ops.sigma_minus, p.gamma2)]).unwrap();
        assert!(fast.trace_distance(&general).unwrap() < 1e-8);
    }

    #[test]
    fn error_cases() {
        let s = HilbertSpec::new(6).unwrap();
        let p = params(|m| {
            m.gamma1_mhz = 0.0;
            m.gamma2_mhz = 0.0;
        });
        assert!(matches!(steady_state(&p, &s), Err(KpoError::NoDissipation)));
        let p = params(|m| m.lambda_p_mhz = 0.5);
        assert!(steady_state(&p, &s).is_err());
        // pure dephasing of a qubit leaves both populations stationary
        let h = pauli(Pauli::Z).scale(C64::new(0.3, 0.0));
        let r = steady_state_general(&h, &[(pauli(Pauli::Z), 1.0)]);
        assert!(matches!(r, Err(KpoError::DegenerateSteadyState { count: 2, .. })), "{r:?}");
    }

    #[test]
    fn truncation_convergence() {
        let p = params(|_| {});
        let small = convergence_check(&p, &HilbertSpec::new(5).unwrap());
        assert!(matches!(small, Err(KpoError::NotConverged { n: 5, m: 10, .. })));
        let mut q = p;
        q.g = 0.0;
        let r = convergence_check(&q, &HilbertSpec::new(20).unwrap()).unwrap();
        assert!(r.passed && r.difference < 1e-5);
        assert!((r.value - 2.81097).abs() < 1e-4);
    }
}
