//! Rotating-frame Hamiltonian of the Kerr parametric oscillator coupled to a
//! driven two-level ancilla.
//!
//! All frequencies are stored as angular frequencies in rad/µs. Values quoted
//! in MHz (ordinary frequency) are converted once, by `× 2π`, in
//! [`SystemParams::from_mhz`].

use std::f64::consts::TAU;

use log::warn;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{KpoError, Result};
use crate::fockspace::{annihilation, number, pauli, tensor, HilbertSpec, Operator, Pauli};
use crate::linalg;

pub fn mhz_to_angular(f: f64) -> f64 {
    f * TAU
}

pub fn angular_to_mhz(w: f64) -> f64 {
    w / TAU
}

/// Physical parameters in MHz, the units every reported number uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsMhz {
    pub delta_mhz: f64,
    pub chi_mhz: f64,
    pub beta_mhz: f64,
    pub g_mhz: f64,
    pub lambda_p_mhz: f64,
    #[serde(default)]
    pub delta_q_mhz: f64,
    #[serde(default)]
    pub qubit_offset_mhz: f64,
    pub gamma1_mhz: f64,
    pub gamma2_mhz: f64,
}

impl ParamsMhz {
    /// Operating point used for the reference spectrum: Δ = −30, χ = 18,
    /// β = 42, g = 5, λp = 0.5, γ₁ = γ₂ = 0.8 MHz.
    pub fn reference() -> Self {
        Self {
            delta_mhz: -30.0,
            chi_mhz: 18.0,
            beta_mhz: 42.0,
            g_mhz: 5.0,
            lambda_p_mhz: 0.5,
            delta_q_mhz: 0.0,
            qubit_offset_mhz: 0.0,
            gamma1_mhz: 0.8,
            gamma2_mhz: 0.8,
        }
    }
}

/// Physical parameters in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub delta: f64,
    pub chi: f64,
    pub beta: f64,
    pub g: f64,
    pub lambda_p: f64,
    pub delta_q: f64,
    pub qubit_offset: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl SystemParams {
    pub fn from_mhz(p: &ParamsMhz) -> Result<Self> {
        let s = Self {
            delta: mhz_to_angular(p.delta_mhz),
            chi: mhz_to_angular(p.chi_mhz),
            beta: mhz_to_angular(p.beta_mhz),
            g: mhz_to_angular(p.g_mhz),
            lambda_p: mhz_to_angular(p.lambda_p_mhz),
            delta_q: mhz_to_angular(p.delta_q_mhz),
            qubit_offset: mhz_to_angular(p.qubit_offset_mhz),
            gamma1: mhz_to_angular(p.gamma1_mhz),
            gamma2: mhz_to_angular(p.gamma2_mhz),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_mhz(&self) -> ParamsMhz {
        ParamsMhz {
            delta_mhz: angular_to_mhz(self.delta),
            chi_mhz: angular_to_mhz(self.chi),
            beta_mhz: angular_to_mhz(self.beta),
            g_mhz: angular_to_mhz(self.g),
            lambda_p_mhz: angular_to_mhz(self.lambda_p),
            delta_q_mhz: angular_to_mhz(self.delta_q),
            qubit_offset_mhz: angular_to_mhz(self.qubit_offset),
            gamma1_mhz: angular_to_mhz(self.gamma1),
            gamma2_mhz: angular_to_mhz(self.gamma2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.delta,
            self.chi,
            self.beta,
            self.g,
            self.lambda_p,
            self.delta_q,
            self.qubit_offset,
            self.gamma1,
            self.gamma2,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(KpoError::InvalidParams("parameters must be finite".into()));
        }
        if !(self.chi > 0.0) {
            return Err(KpoError::InvalidParams(format!("chi must be positive, got {}", self.chi)));
        }
        if self.beta < 0.0 || self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return Err(KpoError::InvalidParams("beta, gamma1 and gamma2 must be non-negative".into()));
        }
        if self.delta >= 0.0 {
            warn!("KPO detuning is non-negative ({:.3} MHz)", angular_to_mhz(self.delta));
        }
        Ok(())
    }

    pub fn with_delta_q(mut self, delta_q: f64) -> Self {
        self.delta_q = delta_q;
        self
    }

    pub fn with_lambda_p(mut self, lambda_p: f64) -> Self {
        self.lambda_p = lambda_p;
        self
    }
}

/// `Δ a†a − (χ/2) a†a†aa + β(a² + a†²)` lifted to the composite space.
pub fn build_h_kpo(p: &SystemParams, space: &HilbertSpec) -> Operator {
    let n = space.fock_cutoff();
    let a = annihilation(space);
    let a2 = a.matmul(&a);
    let mut h = linalg::zeros(n);
    for k in 0..n {
        let kf = k as f64;
        h[(k, k)] = C64::new(p.delta * kf - 0.5 * p.chi * kf * (kf - 1.0), 0.0);
    }
    for j in 0..n {
        for i in 0..n {
            h[(i, j)] += p.beta * (a2.get(i, j) + a2.get(j, i).conj());
        }
    }
    space.embed_kpo(&Operator::from_parts(h, "H_KPO", true)).with_label("H_KPO")
}

/// `(offset/2) σz` on the qubit factor.
pub fn build_h_qubit(p: &SystemParams, space: &HilbertSpec) -> Operator {
    space
        .embed_qubit(&pauli(Pauli::Z).scale(C64::new(0.5 * p.qubit_offset, 0.0)))
        .with_label("H_G")
}

/// `g(a σ+ + a† σ−)`.
pub fn build_h_int(p: &SystemParams, space: &HilbertSpec) -> Operator {
    let a = annihilation(space);
    let x = tensor(&a, &pauli(Pauli::Plus));
    let h = x.add(&x.dagger()).scale(C64::new(p.g, 0.0));
    Operator::from_parts(h.into_entries(), "H_I", true)
}

/// `λp(σ+ e^{−iΔq t} + σ− e^{iΔq t})`.
pub fn build_h_drive(p: &SystemParams, space: &HilbertSpec, t: f64) -> Operator {
    let phase = C64::from_polar(p.lambda_p, -p.delta_q * t);
    let mut m = linalg::zeros(2);
    m[(1, 0)] = phase;
    m[(0, 1)] = phase.conj();
    space.embed_qubit(&Operator::from_parts(m, "", true)).with_label("H_D")
}

/// Time-independent part `H_KPO + H_G + H_I`.
pub fn build_static(p: &SystemParams, space: &HilbertSpec) -> Operator {
    build_h_kpo(p, space)
        .add(&build_h_qubit(p, space))
        .add(&build_h_int(p, space))
        .with_label("H0")
}

pub fn build_total(p: &SystemParams, space: &HilbertSpec, t: f64) -> Operator {
    build_static(p, space).add(&build_h_drive(p, space, t)).with_label("H")
}

/// Composite-space operators used by the master equation and observables.
#[derive(Debug, Clone)]
pub struct CompositeOps {
    pub a: Operator,
    pub sigma_minus: Operator,
    pub sigma_plus: Operator,
    pub sigma_z: Operator,
    pub number: Operator,
}

impl CompositeOps {
    pub fn new(space: &HilbertSpec) -> Self {
        Self {
            a: space.embed_kpo(&annihilation(space)),
            sigma_minus: space.embed_qubit(&pauli(Pauli::Minus)),
            sigma_plus: space.embed_qubit(&pauli(Pauli::Plus)),
            sigma_z: space.embed_qubit(&pauli(Pauli::Z)),
            number: space.embed_kpo(&number(space)),
        }
    }
}

/// Semiclassical amplitude `√((2β + Δ)/χ)`.
pub fn semiclassical_alpha(p: &SystemParams) -> Result<f64> {
    let ratio = (2.0 * p.beta + p.delta) / p.chi;
    if ratio < 0.0 {
        return Err(KpoError::BelowBifurcation { ratio });
    }
    Ok(ratio.sqrt())
}

/// Joint parity `exp(iπ(a†a + σ+σ−))` of a composite basis index.
pub fn joint_parity_of_index(index: usize) -> bool {
    let n = index / 2;
    let q = index % 2;
    (n + q) % 2 == 0
}
