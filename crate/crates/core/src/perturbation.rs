//! Driven effective qubit `gα σx + λp(σ+ e^{−iΔq t} + σ− e^{iΔq t})` in the
//! interaction picture of `gα σx`, with first- and second-order transition
//! amplitudes in closed form and the resulting resonance conditions.
//!
//! Operators are written in the relabelled frame `{Z, Y, X} = {σx, σy, σz}`,
//! where `σ'±` raise and lower between the eigenstates of `Z`. All matrices
//! below are expressed in the original `{|g⟩, |e⟩}` basis.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use std::f64::consts::TAU;

use crate::error::{KpoError, Result};
use crate::fockspace::Operator;
use crate::linalg::{self, I, ONE, ZERO};

pub type Mat2 = [[C64; 2]; 2];
pub type Ket2 = [C64; 2];

/// Eigenstates of `Z = σx`: `(|g⟩ ± |e⟩)/√2`.
pub fn z_eigenstates() -> (Ket2, Ket2) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ([re(h), re(h)], [re(h), re(-h)])
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `Z = σx`.
pub fn z_op() -> Mat2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

/// `σ'+`, with `X = σ'+ + σ'−` and `Y = −i(σ'+ − σ'−)`.
pub fn sigma_plus_rot() -> Mat2 {
    [[re(-0.5), re(-0.5)], [re(0.5), re(0.5)]]
}

pub fn sigma_minus_rot() -> Mat2 {
    [[re(-0.5), re(0.5)], [re(-0.5), re(0.5)]]
}

/// One term `c·O·e^{iωt}` of the interaction-picture Hamiltonian, with
/// `ω = a·2gα + b·Δq`.
#[derive(Debug, Clone, Copy)]
struct Term {
    coeff: f64,
    op: Mat2,
    omega: f64,
    a: i8,
    b: i8,
}

fn terms(g: f64, alpha: f64, delta_q: f64) -> [Term; 6] {
    let w = 2.0 * g * alpha;
    let (z, sp, sm) = (z_op(), sigma_plus_rot(), sigma_minus_rot());
    let mk = |coeff, op, a: i8, b: i8| Term { coeff, op, omega: f64::from(a) * w + f64::from(b) * delta_q, a, b };
    [
        mk(0.5, z, 0, -1),
        mk(0.5, sp, 1, -1),
        mk(-0.5, sm, -1, -1),
        mk(0.5, z, 0, 1),
        mk(-0.5, sp, 1, 1),
        mk(0.5, sm, -1, 1),
    ]
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn sandwich(f: &Ket2, op: &Mat2, i: &Ket2) -> C64 {
    let mut acc = ZERO;
    for r in 0..2 {
        acc += f[r].conj() * (op[r][0] * i[0] + op[r][1] * i[1]);
    }
    acc
}

/// Interaction-picture Hamiltonian (without the `λp` prefactor) at time `t`.
/// Angular units: `g`, `delta_q` in rad/µs, `t` in µs.
pub fn interaction_matrix(t: f64, g: f64, alpha: f64, delta_q: f64) -> Mat2 {
    let mut h = [[ZERO; 2]; 2];
    for term in terms(g, alpha, delta_q) {
        let phase = (I * term.omega * t).exp() * term.coeff;
        for r in 0..2 {
            for c in 0..2 {
                h[r][c] += term.op[r][c] * phase;
            }
        }
    }
    h
}

pub fn interaction_hamiltonian(t: f64, g: f64, alpha: f64, delta_q: f64) -> Operator {
    let h = interaction_matrix(t, g, alpha, delta_q);
    let m = faer::Mat::from_fn(2, 2, |r, c| h[r][c]);
    Operator::new(m, "H_I(t)").expect("2×2 matrix is square")
}

/// `∫₀ᵗ e^{iωs} ds`.
pub fn e1(omega: f64, t: f64) -> C64 {
    let z = I * (omega * t);
    if (omega * t).abs() < 1e-3 {
        // t·Σ zᵐ/(m+1)!
        let mut acc = ZERO;
        let mut term = re(t);
        for m in 1..10 {
            acc += term;
            term *= z / (m as f64 + 1.0);
        }
        acc
    } else {
        (z.exp() - 1.0) / (I * omega)
    }
}

/// `∫₀ᵗ sᵐ e^{iωs} ds` for `m = 0..=mmax`.
fn moments(omega: f64, t: f64, mmax: usize) -> Vec<C64> {
    let x = omega * t;
    if x.abs() < 2.0 {
        (0..=mmax)
            .map(|m| {
                // t^{m+1} Σ_p (ix)^p / (p!(m+p+1))
                let mut acc = ZERO;
                let mut pw = ONE;
                for p in 0..60 {
                    acc += pw / (m + p + 1) as f64;
                    pw *= I * x / (p as f64 + 1.0);
                }
                acc * t.powi(m as i32 + 1)
            })
            .collect()
    } else {
        let e = (I * x).exp();
        let mut out = Vec::with_capacity(mmax + 1);
        out.push(e1(omega, t));
        for m in 1..=mmax {
            let prev = out[m - 1];
            out.push((e * t.powi(m as i32) - prev * m as f64) / (I * omega));
        }
        out
    }
}

/// `∫₀ᵗ ds₁ e^{iω₁s₁} ∫₀^{s₁} ds₂ e^{iω₂s₂}`.
pub fn e2(omega1: f64, omega2: f64, t: f64) -> C64 {
    if (omega2 * t).abs() < 1e-2 {
        // expand the inner exponential in ω₂
        let jmax = 9;
        let m = moments(omega1, t, jmax + 1);
        let mut acc = ZERO;
        let mut coef = ONE;
        for j in 0..=jmax {
            coef /= (j + 1) as f64;
            acc += coef * m[j + 1];
            coef *= I * omega2;
        }
        acc
    } else {
        (e1(omega1 + omega2, t) - e1(omega1, t)) / (I * omega2)
    }
}

/// `(C1, C2)` with `C1 = λp⟨f|D1|0⟩`, `C2 = λp²⟨f|D2|0⟩`, `D1 = −i∫H_I`,
/// `D2 = −∫∫_{t₂<t₁} H_I(t₁)H_I(t₂)`.
pub fn perturbative_amplitudes(
    psi0: &Ket2,
    psif: &Ket2,
    t: f64,
    lambda_p: f64,
    g: f64,
    alpha: f64,
    delta_q: f64,
) -> (C64, C64) {
    let ts = terms(g, alpha, delta_q);
    let mut d1 = ZERO;
    for a in &ts {
        d1 += sandwich(psif, &a.op, psi0) * a.coeff * e1(a.omega, t);
    }
    let mut d2 = ZERO;
    for a in &ts {
        for b in &ts {
            let prod = mat_mul(&a.op, &b.op);
            d2 += sandwich(psif, &prod, psi0) * (a.coeff * b.coeff) * e2(a.omega, b.omega, t);
        }
    }
    (lambda_p * (-I) * d1, -lambda_p * lambda_p * d2)
}

/// `|⟨f|0⟩ + C1 + C2|²`.
pub fn transition_probability(psi0: &Ket2, psif: &Ket2, t: f64, lambda_p: f64, g: f64, alpha: f64, delta_q: f64) -> f64 {
    let direct = psif[0].conj() * psi0[0] + psif[1].conj() * psi0[1];
    let (c1, c2) = perturbative_amplitudes(psi0, psif, t, lambda_p, g, alpha, delta_q);
    (direct + c1 + c2).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResonanceOrigin {
    #[serde(rename = "dq=0")]
    Zero,
    #[serde(rename = "+-2g*alpha")]
    TwoGAlpha,
    #[serde(rename = "+-g*alpha")]
    GAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub freq_mhz: f64,
    pub order: u8,
    pub origin: ResonanceOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSet {
    pub entries: Vec<Resonance>,
}

impl ResonanceSet {
    pub fn of_order(&self, order: u8) -> impl Iterator<Item = &Resonance> {
        self.entries.iter().filter(move |r| r.order == order)
    }

    /// Entry closest to `freq_mhz` among those of the given origin.
    pub fn nearest(&self, freq_mhz: f64, origin: ResonanceOrigin) -> Option<Resonance> {
        self.entries
            .iter()
            .filter(|r| r.origin == origin)
            .min_by(|a, b| (a.freq_mhz - freq_mhz).abs().total_cmp(&(b.freq_mhz - freq_mhz).abs()))
            .copied()
    }
}

/// Drive detunings (MHz) at which the amplitudes grow secularly:
/// `0` and `±2gα` at first order, `±gα` at second order. `g` in MHz.
pub fn resonance_frequencies(g_mhz: f64, alpha: f64) -> ResonanceSet {
    let w = g_mhz * alpha;
    let mk = |freq_mhz, order, origin| Resonance { freq_mhz, order, origin };
    ResonanceSet {
        entries: vec![
            mk(0.0, 1, ResonanceOrigin::Zero),
            mk(-2.0 * w, 1, ResonanceOrigin::TwoGAlpha),
            mk(2.0 * w, 1, ResonanceOrigin::TwoGAlpha),
            mk(-w, 2, ResonanceOrigin::GAlpha),
            mk(w, 2, ResonanceOrigin::GAlpha),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeRow {
    pub delta_q_mhz: f64,
    pub c1_sq: f64,
    pub c2_sq: f64,
    pub probability: f64,
}

/// `|C1|²`, `|C2|²` and the second-order transition probability `ψ0 → ψf`
/// over a list of drive detunings (MHz). `lambda_p_mhz`, `g_mhz` in MHz.
pub fn amplitude_scan(
    psi0: &Ket2,
    psif: &Ket2,
    t: f64,
    lambda_p_mhz: f64,
    g_mhz: f64,
    alpha: f64,
    detunings_mhz: &[f64],
) -> Vec<AmplitudeRow> {
    use crate::model::mhz_to_angular;
    let (lp, g) = (mhz_to_angular(lambda_p_mhz), mhz_to_angular(g_mhz));
    detunings_mhz
        .iter()
        .map(|&d| {
            let dq = mhz_to_angular(d);
            let (c1, c2) = perturbative_amplitudes(psi0, psif, t, lp, g, alpha, dq);
            AmplitudeRow {
                delta_q_mhz: d,
                c1_sq: c1.norm_sqr(),
                c2_sq: c2.norm_sqr(),
                probability: transition_probability(psi0, psif, t, lp, g, alpha, dq),
            }
        })
        .collect()
}

/// Weight of one line in the long-time form
/// `|⟨f|ψ(t)⟩|² ≃ |⟨f|0⟩|² + A₁δ(Δq) + A₂δ(2gα+Δq) + A₃δ(2gα−Δq) + A₄δ(gα+Δq) + A₅δ(gα−Δq)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineWeight {
    /// `"A1"` .. `"A5"`.
    pub label: &'static str,
    pub freq_mhz: f64,
    pub order: u8,
    /// `∫|C_res|² dΔq/2π` over a window of width `gα/2π` centred on the line,
    /// in MHz. `C_res` keeps only the terms (first order) or term pairs
    /// (second order) whose total frequency vanishes on the line.
    pub weight_mhz: f64,
}

/// Line positions in units of `2gα`, with their labels and orders.
const LINES: [(&str, f64, u8); 5] = [("A1", 0.0, 1), ("A2", -1.0, 1), ("A3", 1.0, 1), ("A4", -0.5, 2), ("A5", 0.5, 2)];

/// Amplitude of the given order restricted to terms resonant at `Δq = position·2gα`.
fn resonant_amplitude(
    psi0: &Ket2,
    psif: &Ket2,
    t: f64,
    lambda_p: f64,
    g: f64,
    alpha: f64,
    delta_q: f64,
    line: (f64, u8),
) -> C64 {
    let (position, order) = line;
    let ts = terms(g, alpha, delta_q);
    if order == 1 {
        let d1: C64 = ts
            .iter()
            .filter(|a| f64::from(-a.a * a.b) == position)
            .map(|a| sandwich(psif, &a.op, psi0) * a.coeff * e1(a.omega, t))
            .sum();
        return lambda_p * (-I) * d1;
    }
    let mut d2 = ZERO;
    for a in &ts {
        for b in &ts {
            let bs = a.b + b.b;
            if bs == 0 || -f64::from(a.a + b.a) / f64::from(bs) != position {
                continue;
            }
            let prod = mat_mul(&a.op, &b.op);
            d2 += sandwich(psif, &prod, psi0) * (a.coeff * b.coeff) * e2(a.omega, b.omega, t);
        }
    }
    -lambda_p * lambda_p * d2
}

/// Numerical line weights `A₁..A₅` for `ψ0 → ψf` after time `t` (µs).
/// `lambda_p_mhz`, `g_mhz` in MHz; `g·α` must be positive so the lines are
/// separated.
pub fn line_weights(
    psi0: &Ket2,
    psif: &Ket2,
    t: f64,
    lambda_p_mhz: f64,
    g_mhz: f64,
    alpha: f64,
) -> Result<Vec<LineWeight>> {
    use crate::model::mhz_to_angular;
    if !(g_mhz * alpha > 0.0) || !(t > 0.0) {
        return Err(KpoError::InvalidParams(format!(
            "line weights need g*alpha > 0 and t > 0 (g*alpha = {}, t = {t})",
            g_mhz * alpha
        )));
    }
    let (lp, g) = (mhz_to_angular(lambda_p_mhz), mhz_to_angular(g_mhz));
    let w = 2.0 * g * alpha;
    let half = w / 4.0;
    // resolve the 2π/t fringes with about forty points each
    let n = {
        let n = ((2.0 * half * t / TAU) * 40.0).ceil().max(400.0) as usize;
        n + n % 2
    };
    let step = 2.0 * half / n as f64;
    Ok(LINES
        .iter()
        .map(|&(label, position, order)| {
            let center = position * w;
            let f = |k: usize| {
                let dq = center - half + k as f64 * step;
                resonant_amplitude(psi0, psif, t, lp, g, alpha, dq, (position, order)).norm_sqr()
            };
            let mut acc = f(0) + f(n);
            for k in 1..n {
                acc += if k % 2 == 1 { 4.0 * f(k) } else { 2.0 * f(k) };
            }
            LineWeight {
                label,
                freq_mhz: center / TAU,
                order,
                weight_mhz: acc * step / 3.0 / TAU,
            }
        })
        .collect())
}

/// Hermitian deviation of the interaction Hamiltonian, for diagnostics.
pub fn hermiticity_defect(t: f64, g: f64, alpha: f64, delta_q: f64) -> f64 {
    linalg::hermitian_deviation(interaction_hamiltonian(t, g, alpha, delta_q).entries().as_ref())
}
