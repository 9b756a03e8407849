//! Fast evaluation of the time-integrated excitation for many drive detunings.
//!
//! The static generator `L0` does not depend on `Δq`, so it is worth
//! diagonalising once per parameter set and reusing for every point of a
//! sweep. To keep that diagonalisation small the dynamics is restricted to the
//! `K` highest eigenstates of the static Hamiltonian: with the negative Kerr
//! term those form the cat manifold and its nearest excitations, which carry
//! essentially all of the steady-state population.
//!
//! In the eigenbasis of `L0` the equation reads `x' = Λx + λp(e^{−iΔq t}A₊ +
//! e^{iΔq t}A₋)x` and is stepped with the second-order exponential
//! time-differencing scheme of Cox and Matthews. The integral of ⟨σz⟩ over
//! each step is taken exactly for the scheme's own interpolant, so no extra
//! quadrature error enters the spectrum.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::DenseSolveCore;
use faer::{Accum, Mat, Par};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{KpoError, Result};
use crate::fockspace::HilbertSpec;
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::model::{build_static, joint_parity_of_index, CompositeOps, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSettings {
    /// Number of highest-energy eigenstates kept.
    pub size: usize,
    /// Fixed time step (µs).
    pub step_us: f64,
}

impl Default for WindowSettings {
    fn default() -> Self {
        Self { size: 12, step_us: 0.002 }
    }
}

/// Eigenstates of the static Hamiltonian, each with a definite joint parity.
#[derive(Debug, Clone)]
pub struct ParityEigenbasis {
    /// Eigenvalues in rad/µs, descending.
    pub energies: Vec<f64>,
    /// Columns are eigenvectors in the composite Fock⊗qubit basis.
    pub vectors: CMat,
    pub parity_even: Vec<bool>,
}

/// Diagonalises `H0` separately inside each joint-parity block.
pub fn parity_eigenbasis(p: &SystemParams, space: &HilbertSpec) -> Result<ParityEigenbasis> {
    let h = build_static(p, space);
    let d = space.total_dim();
    let mut levels: Vec<(f64, Vec<C64>, bool)> = Vec::with_capacity(d);
    for even in [true, false] {
        let idx: Vec<usize> = (0..d).filter(|&i| joint_parity_of_index(i) == even).collect();
        let block = Mat::from_fn(idx.len(), idx.len(), |r, c| h.get(idx[r], idx[c]));
        let (vals, vecs) = linalg::hermitian_eigen(block.as_ref())?;
        for (k, e) in vals.into_iter().enumerate() {
            let mut v = vec![ZERO; d];
            for (r, &i) in idx.iter().enumerate() {
                v[i] = vecs[(r, k)];
            }
            levels.push((e, v, even));
        }
    }
    levels.sort_by(|a, b| b.0.total_cmp(&a.0));
    let vectors = Mat::from_fn(d, d, |i, k| levels[k].1[i]);
    Ok(ParityEigenbasis {
        energies: levels.iter().map(|l| l.0).collect(),
        vectors,
        parity_even: levels.iter().map(|l| l.2).collect(),
    })
}

fn phi_functions(z: C64) -> (C64, C64, C64) {
    if z.norm() < 0.5 {
        // φk(z) = Σ z^m / (m + k)!
        let mut p1 = ZERO;
        let mut p2 = ZERO;
        let mut p3 = ZERO;
        let mut zm = ONE;
        let mut f1 = 1.0;
        let mut f2 = 2.0;
        let mut f3 = 6.0;
        for m in 0..20 {
            p1 += zm / f1;
            p2 += zm / f2;
            p3 += zm / f3;
            zm *= z;
            let mf = m as f64;
            f1 *= mf + 2.0;
            f2 *= mf + 3.0;
            f3 *= mf + 4.0;
        }
        (p1, p2, p3)
    } else {
        let ez = z.exp();
        let p1 = (ez - 1.0) / z;
        let p2 = (ez - 1.0 - z) / (z * z);
        let p3 = (ez - 1.0 - z - 0.5 * z * z) / (z * z * z);
        (p1, p2, p3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointResult {
    pub detuning: f64,
    pub excitation: f64,
    pub trace_error: f64,
}

/// Precomputed spectral data shared by every detuning of a sweep.
#[derive(Debug, Clone)]
pub struct WindowEngine {
    lambda_p: f64,
    t_final: f64,
    steps: usize,
    h: f64,
    /// Eigenvalues of the even and odd coherence blocks.
    lam_e: Vec<C64>,
    lam_o: Vec<C64>,
    /// Drive couplings in eigen-coordinates: `plus_eo` maps odd → even, etc.
    plus_eo: CMat,
    minus_eo: CMat,
    plus_oe: CMat,
    minus_oe: CMat,
    x0: Vec<C64>,
    sz_coeff: Vec<C64>,
    trace_coeff: Vec<C64>,
    window_energies: Vec<f64>,
    steady_excitation: f64,
}

struct Decomposition {
    lam: Vec<C64>,
    r: CMat,
    r_inv: CMat,
}

fn decompose(m: &CMat) -> Result<Decomposition> {
    let evd = m.eigen().map_err(|e| KpoError::Linalg(format!("{e:?}")))?;
    let lam: Vec<C64> = evd.S().column_vector().iter().copied().collect();
    let r = evd.U().to_owned();
    let r_inv = r.partial_piv_lu().inverse();
    Ok(Decomposition { lam, r, r_inv })
}

impl WindowEngine {
    pub fn new(p: &SystemParams, space: &HilbertSpec, t_final: f64, settings: &WindowSettings) -> Result<Self> {
        p.validate()?;
        if !(t_final > 0.0) || !(settings.step_us > 0.0) {
            return Err(KpoError::InvalidParams("t_final and step must be positive".into()));
        }
        if p.gamma1 == 0.0 && p.gamma2 == 0.0 {
            return Err(KpoError::NoDissipation);
        }
        let k = settings.size.min(space.total_dim());
        if k < 2 {
            return Err(KpoError::InvalidParams("window must hold at least two levels".into()));
        }
        let basis = parity_eigenbasis(p, space)?;
        let v = basis.vectors.as_ref().subcols(0, k).to_owned();
        let par = &basis.parity_even[..k];
        let ops = CompositeOps::new(space);
        let project = |op: &CMat| -> CMat { v.adjoint() * op * &v };
        let a = project(ops.a.entries());
        let sm = project(ops.sigma_minus.entries());
        let sp = project(ops.sigma_plus.entries());
        let sz = project(ops.sigma_z.entries());

        // K = −iH − ½Σγ c†c in the window eigenbasis
        let mut keff = linalg::zeros(k);
        for i in 0..k {
            keff[(i, i)] = C64::new(0.0, -basis.energies[i]);
        }
        let jumps = [(a, p.gamma1), (sm.clone(), p.gamma2)];
        for (c, g) in &jumps {
            let cdc = c.adjoint() * c;
            keff = keff - linalg::scale(cdc.as_ref(), C64::new(0.5 * g, 0.0));
        }
        let even: Vec<(usize, usize)> =
            (0..k).flat_map(|j| (0..k).map(move |i| (i, j))).filter(|&(i, j)| par[i] == par[j]).collect();
        let odd: Vec<(usize, usize)> =
            (0..k).flat_map(|j| (0..k).map(move |i| (i, j))).filter(|&(i, j)| par[i] != par[j]).collect();
        let generator = |rows: &[(usize, usize)], cols: &[(usize, usize)]| -> CMat {
            Mat::from_fn(rows.len(), cols.len(), |r, c| {
                let (i, j) = rows[r];
                let (kk, l) = cols[c];
                let mut val = ZERO;
                if j == l {
                    val += keff[(i, kk)];
                }
                if i == kk {
                    val += keff[(j, l)].conj();
                }
                for (op, g) in &jumps {
                    val += op[(j, l)].conj() * op[(i, kk)] * *g;
                }
                val
            })
        };
        // S = −i(I⊗σ − σᵀ⊗I)
        let drive = |s: &CMat, rows: &[(usize, usize)], cols: &[(usize, usize)]| -> CMat {
            Mat::from_fn(rows.len(), cols.len(), |r, c| {
                let (i, j) = rows[r];
                let (kk, l) = cols[c];
                let mut val = ZERO;
                if j == l {
                    val += s[(i, kk)];
                }
                if i == kk {
                    val -= s[(l, j)];
                }
                val * C64::new(0.0, -1.0)
            })
        };
        let de = decompose(&generator(&even, &even))?;
        let dodd = decompose(&generator(&odd, &odd))?;
        let plus_eo = &de.r_inv * drive(&sp, &even, &odd) * &dodd.r;
        let minus_eo = &de.r_inv * drive(&sm, &even, &odd) * &dodd.r;
        let plus_oe = &dodd.r_inv * drive(&sp, &odd, &even) * &de.r;
        let minus_oe = &dodd.r_inv * drive(&sm, &odd, &even) * &de.r;

        // observables as row functionals on eigen-coordinates
        let functional = |w: &dyn Fn(usize, usize) -> C64| -> Vec<C64> {
            (0..even.len())
                .map(|col| even.iter().enumerate().map(|(r, &(i, j))| w(i, j) * de.r[(r, col)]).sum())
                .collect()
        };
        let sz_coeff = functional(&|i, j| sz[(j, i)]);
        let trace_coeff = functional(&|i, j| if i == j { ONE } else { ZERO });

        let null = (0..de.lam.len())
            .min_by(|&a, &b| de.lam[a].norm().total_cmp(&de.lam[b].norm()))
            .ok_or_else(|| KpoError::Linalg("empty coherence block".into()))?;
        let mut x0 = vec![ZERO; even.len()];
        if trace_coeff[null].norm() < 1e-12 {
            return Err(KpoError::Linalg("window null mode has vanishing trace".into()));
        }
        x0[null] = trace_coeff[null].inv();
        let steady_excitation = 0.5 * (1.0 + (sz_coeff[null] * x0[null]).re);

        let steps = (t_final / settings.step_us).round().max(1.0) as usize;
        Ok(Self {
            lambda_p: p.lambda_p,
            t_final,
            steps,
            h: t_final / steps as f64,
            lam_e: de.lam,
            lam_o: dodd.lam,
            plus_eo,
            minus_eo,
            plus_oe,
            minus_oe,
            x0,
            sz_coeff,
            trace_coeff,
            window_energies: basis.energies[..k].to_vec(),
            steady_excitation,
        })
    }

    pub fn window_energies(&self) -> &[f64] {
        &self.window_energies
    }

    /// `(⟨σz⟩ + 1)/2` of the undriven window steady state.
    pub fn steady_excitation(&self) -> f64 {
        self.steady_excitation
    }

    fn nonlinear(&self, t: f64, detuning: f64, xe: &[C64], xo: &[C64], ne: &mut [C64], no: &mut [C64]) {
        let ep = C64::from_polar(self.lambda_p, -detuning * t);
        let em = C64::from_polar(self.lambda_p, detuning * t);
        let xo_m = faer::MatRef::from_column_major_slice(xo, xo.len(), 1);
        let xe_m = faer::MatRef::from_column_major_slice(xe, xe.len(), 1);
        let mut ne_m = faer::MatMut::from_column_major_slice_mut(ne, self.lam_e.len(), 1);
        matmul(ne_m.as_mut(), Accum::Replace, self.plus_eo.as_ref(), xo_m, ep, Par::Seq);
        matmul(ne_m.as_mut(), Accum::Add, self.minus_eo.as_ref(), xo_m, em, Par::Seq);
        let mut no_m = faer::MatMut::from_column_major_slice_mut(no, self.lam_o.len(), 1);
        matmul(no_m.as_mut(), Accum::Replace, self.plus_oe.as_ref(), xe_m, ep, Par::Seq);
        matmul(no_m.as_mut(), Accum::Add, self.minus_oe.as_ref(), xe_m, em, Par::Seq);
    }

    /// Time-integrated excitation for one detuning (rad/µs).
    pub fn excitation(&self, detuning: f64) -> PointResult {
        let h = self.h;
        let coeffs = |lam: &[C64]| -> Vec<(C64, C64, C64, C64)> {
            lam.iter()
                .map(|&l| {
                    let z = l * h;
                    let (p1, p2, p3) = phi_functions(z);
                    (z.exp(), p1 * h, p2 * h, p3 * h)
                })
                .collect()
        };
        let ce = coeffs(&self.lam_e);
        let co = coeffs(&self.lam_o);
        let me = self.lam_e.len();
        let mo = self.lam_o.len();
        let mut xe = self.x0.clone();
        let mut xo = vec![ZERO; mo];
        let mut ae = vec![ZERO; me];
        let mut ao = vec![ZERO; mo];
        let mut ne = vec![ZERO; me];
        let mut no = vec![ZERO; mo];
        let mut nae = vec![ZERO; me];
        let mut nao = vec![ZERO; mo];
        // ∫⟨σz⟩ needs the even block only; accumulate per-mode weights
        let mut acc = vec![ZERO; me];

        let mut t = 0.0;
        self.nonlinear(t, detuning, &xe, &xo, &mut ne, &mut no);
        for step in 0..self.steps {
            for i in 0..me {
                ae[i] = ce[i].0 * xe[i] + ce[i].1 * ne[i];
            }
            for i in 0..mo {
                ao[i] = co[i].0 * xo[i] + co[i].1 * no[i];
            }
            let t1 = (step + 1) as f64 * h;
            self.nonlinear(t1, detuning, &ae, &ao, &mut nae, &mut nao);
            for i in 0..me {
                let dn = nae[i] - ne[i];
                acc[i] += ce[i].1 * xe[i] + h * (ce[i].2 * ne[i] + ce[i].3 * dn);
                xe[i] = ae[i] + ce[i].2 * dn;
            }
            for i in 0..mo {
                xo[i] = ao[i] + co[i].2 * (nao[i] - no[i]);
            }
            t = t1;
            self.nonlinear(t, detuning, &xe, &xo, &mut ne, &mut no);
        }
        let integral: C64 = acc.iter().zip(&self.sz_coeff).map(|(a, c)| a * c).sum();
        let tr: C64 = xe.iter().zip(&self.trace_coeff).map(|(a, c)| a * c).sum();
        PointResult {
            detuning,
            excitation: 0.5 + 0.5 * integral.re / self.t_final,
            trace_error: (tr - ONE).norm(),
        }
    }

    /// ⟨σz⟩ sampled at every step, for diagnostics.
    pub fn sigma_z_series(&self, detuning: f64) -> Vec<(f64, f64)> {
        let h = self.h;
        let mut out = Vec::with_capacity(self.steps + 1);
        let me = self.lam_e.len();
        let mo = self.lam_o.len();
        let mut xe = self.x0.clone();
        let mut xo = vec![ZERO; mo];
        let (mut ne, mut no) = (vec![ZERO; me], vec![ZERO; mo]);
        let (mut nae, mut nao) = (vec![ZERO; me], vec![ZERO; mo]);
        let (mut ae, mut ao) = (vec![ZERO; me], vec![ZERO; mo]);
        let value = |xe: &[C64]| xe.iter().zip(&self.sz_coeff).map(|(a, c)| a * c).sum::<C64>().re;
        out.push((0.0, value(&xe)));
        let ce: Vec<(C64, C64, C64)> = self.lam_e.iter().map(|&l| coeff2(l, h)).collect();
        let co: Vec<(C64, C64, C64)> = self.lam_o.iter().map(|&l| coeff2(l, h)).collect();
        self.nonlinear(0.0, detuning, &xe, &xo, &mut ne, &mut no);
        for step in 0..self.steps {
            for i in 0..me {
                ae[i] = ce[i].0 * xe[i] + ce[i].1 * ne[i];
            }
            for i in 0..mo {
                ao[i] = co[i].0 * xo[i] + co[i].1 * no[i];
            }
            let t1 = (step + 1) as f64 * h;
            self.nonlinear(t1, detuning, &ae, &ao, &mut nae, &mut nao);
            for i in 0..me {
                xe[i] = ae[i] + ce[i].2 * (nae[i] - ne[i]);
            }
            for i in 0..mo {
                xo[i] = ao[i] + co[i].2 * (nao[i] - no[i]);
            }
            self.nonlinear(t1, detuning, &xe, &xo, &mut ne, &mut no);
            out.push((t1, value(&xe)));
        }
        out
    }
}

fn coeff2(l: C64, h: f64) -> (C64, C64, C64) {
    let z = l * h;
    let (p1, p2, _) = phi_functions(z);
    ((z).exp(), p1 * h, p2 * h)
}
