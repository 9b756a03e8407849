//! Truncated Fock space of the oscillator, the two-level ancilla, and the
//! states built on top of them (coherent, cat and displaced-Fock cat states).
//!
//! Composite operators always use the factor order `KPO ⊗ qubit`, so the
//! composite index of `|n⟩ ⊗ |q⟩` is `2 n + q` with `q = 0` for `|g⟩` and
//! `q = 1` for `|e⟩`.

use faer::Mat;
use log::warn;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{KpoError, Result};
use crate::linalg::{self, CMat, ONE, ZERO};

pub const QUBIT_LEVELS: usize = 2;

/// Extra Fock levels used internally when a displaced state has to be
/// produced accurately and then projected back onto the working space.
const PADDING: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpec {
    fock_cutoff: usize,
}

impl HilbertSpec {
    pub fn new(fock_cutoff: usize) -> Result<Self> {
        if fock_cutoff < 2 {
            return Err(KpoError::InvalidParams(format!(
                "fock_cutoff must be at least 2, got {fock_cutoff}"
            )));
        }
        Ok(Self { fock_cutoff })
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn qubit_levels(&self) -> usize {
        QUBIT_LEVELS
    }

    pub fn total_dim(&self) -> usize {
        self.fock_cutoff * QUBIT_LEVELS
    }

    pub fn index(&self, n: usize, q: usize) -> usize {
        n * QUBIT_LEVELS + q
    }

    /// Lift an oscillator operator to the composite space (`op ⊗ I₂`).
    pub fn embed_kpo(&self, op: &Operator) -> Operator {
        tensor(op, &Operator::identity(QUBIT_LEVELS))
    }

    /// Lift a qubit operator to the composite space (`I_N ⊗ op`).
    pub fn embed_qubit(&self, op: &Operator) -> Operator {
        tensor(&Operator::identity(self.fock_cutoff), op)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    #[serde(rename = "+")]
    Even,
    #[serde(rename = "-")]
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn of_number(n: usize) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Dense square operator. `hermitian` records what the constructor promised.
#[derive(Debug, Clone)]
pub struct Operator {
    entries: CMat,
    label: String,
    hermitian: bool,
}

impl Operator {
    pub fn new(entries: CMat, label: impl Into<String>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(KpoError::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(Self { entries, label: label.into(), hermitian: false })
    }

    /// Same as [`Operator::new`] but checks and records Hermiticity.
    pub fn hermitian(entries: CMat, label: impl Into<String>) -> Result<Self> {
        let op = Self::new(entries, label)?;
        let dev = linalg::hermitian_deviation(op.entries.as_ref());
        if dev > 1e-12 * linalg::max_abs(op.entries.as_ref()).max(1.0) {
            return Err(KpoError::InvalidParams(format!(
                "operator '{}' is not Hermitian (deviation {dev:.3e})",
                op.label
            )));
        }
        Ok(Self { hermitian: true, ..op })
    }

    pub(crate) fn from_parts(entries: CMat, label: impl Into<String>, hermitian: bool) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self { entries, label: label.into(), hermitian }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(linalg::identity(dim), format!("I{dim}"), true)
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_parts(linalg::zeros(dim), format!("0{dim}"), true)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    pub fn hermitian_deviation(&self) -> f64 {
        linalg::hermitian_deviation(self.entries.as_ref())
    }

    pub fn dagger(&self) -> Self {
        Self::from_parts(linalg::dagger(self.entries.as_ref()), format!("{}†", self.label), self.hermitian)
    }

    pub fn matmul(&self, rhs: &Operator) -> Self {
        Self::from_parts(&self.entries * &rhs.entries, format!("{}·{}", self.label, rhs.label), false)
    }

    pub fn add(&self, rhs: &Operator) -> Self {
        Self::from_parts(
            &self.entries + &rhs.entries,
            format!("{}+{}", self.label, rhs.label),
            self.hermitian && rhs.hermitian,
        )
    }

    pub fn sub(&self, rhs: &Operator) -> Self {
        Self::from_parts(
            &self.entries - &rhs.entries,
            format!("{}-{}", self.label, rhs.label),
            self.hermitian && rhs.hermitian,
        )
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_parts(
            linalg::scale(self.entries.as_ref(), s),
            self.label.clone(),
            self.hermitian && s.im == 0.0,
        )
    }

    pub fn commutator(&self, rhs: &Operator) -> Self {
        Self::from_parts(
            linalg::commutator(self.entries.as_ref(), rhs.entries.as_ref()),
            format!("[{},{}]", self.label, rhs.label),
            false,
        )
    }

    pub fn apply(&self, ket: &Ket) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim()];
        linalg::matvec(self.entries.as_ref(), &ket.amplitudes, &mut out);
        out
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation_ket(&self, ket: &Ket) -> C64 {
        let av = self.apply(ket);
        ket.amplitudes.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        linalg::max_abs_diff(self.entries.as_ref(), other.entries.as_ref())
    }
}

/// Normalised state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: Vec<C64>,
}

impl Ket {
    /// Normalise `amplitudes`; fails when the norm is below 1e-8.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm >= 1e-8) {
            return Err(KpoError::DegenerateState { norm });
        }
        Ok(Self { amplitudes: amplitudes.into_iter().map(|a| a / norm).collect() })
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[k] = ONE;
        Self { amplitudes }
    }

    pub fn fock(n: usize, space: &HilbertSpec) -> Self {
        Self::basis(space.fock_cutoff(), n)
    }

    pub fn ground() -> Self {
        Self::basis(2, 0)
    }

    pub fn excited() -> Self {
        Self::basis(2, 1)
    }

    /// `(|g⟩ ± |e⟩)/√2`, the eigenstates of σx.
    pub fn qubit_x(sign: Parity) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amplitudes: vec![C64::new(h, 0.0), C64::new(sign.sign() * h, 0.0)] }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn overlap(&self, other: &Ket) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ket { amplitudes }
    }

    pub fn projector(&self) -> DensityMatrix {
        let n = self.dim();
        let entries = Mat::from_fn(n, n, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        DensityMatrix { entries }
    }
}

/// Density matrix. Constructors check trace, Hermiticity and positivity.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: CMat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateDiagnostics {
    pub trace_error: f64,
    pub hermitian_deviation: f64,
    pub min_eigenvalue: f64,
}

impl DensityMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        let rho = Self::new_unchecked(entries)?;
        let d = rho.diagnostics()?;
        if d.trace_error > 1e-8 || d.hermitian_deviation > 1e-10 || d.min_eigenvalue < -1e-8 {
            return Err(KpoError::InvalidParams(format!("not a valid density matrix: {d:?}")));
        }
        Ok(rho)
    }

    /// Wraps a square matrix without physical validation.
    pub fn new_unchecked(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(KpoError::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(self.entries.as_ref())
    }

    pub fn diagnostics(&self) -> Result<StateDiagnostics> {
        Ok(StateDiagnostics {
            trace_error: (self.trace() - ONE).norm(),
            hermitian_deviation: linalg::hermitian_deviation(self.entries.as_ref()),
            min_eigenvalue: linalg::min_eigenvalue(self.entries.as_ref())?,
        })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { entries: linalg::kron(self.entries.as_ref(), other.entries.as_ref()) }
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn population(&self, ket: &Ket) -> f64 {
        let mut out = vec![ZERO; self.dim()];
        linalg::matvec(self.entries.as_ref(), ket.amplitudes(), &mut out);
        ket.amplitudes().iter().zip(&out).map(|(a, b)| a.conj() * b).sum::<C64>().re
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        linalg::trace_distance(self.entries.as_ref(), other.entries.as_ref())
    }
}

fn annihilation_matrix(n: usize) -> CMat {
    let mut a = linalg::zeros(n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

/// Oscillator annihilation operator on the `N`-level truncated space.
pub fn annihilation(space: &HilbertSpec) -> Operator {
    Operator::from_parts(annihilation_matrix(space.fock_cutoff()), "a", false)
}

pub fn creation(space: &HilbertSpec) -> Operator {
    annihilation(space).dagger().with_label("a†")
}

pub fn number(space: &HilbertSpec) -> Operator {
    let n = space.fock_cutoff();
    let entries = Mat::from_fn(n, n, |i, j| if i == j { C64::new(i as f64, 0.0) } else { ZERO });
    Operator::from_parts(entries, "n", true)
}

/// Photon-number parity `exp(iπ a†a)` on the oscillator.
pub fn fock_parity(space: &HilbertSpec) -> Operator {
    let n = space.fock_cutoff();
    let entries = Mat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        } else {
            ZERO
        }
    });
    Operator::from_parts(entries, "P", true)
}

pub fn pauli(which: Pauli) -> Operator {
    let mut m = linalg::zeros(2);
    let (label, hermitian) = match which {
        Pauli::X => {
            m[(0, 1)] = ONE;
            m[(1, 0)] = ONE;
            ("σx", true)
        }
        Pauli::Y => {
            m[(0, 1)] = C64::new(0.0, 1.0);
            m[(1, 0)] = C64::new(0.0, -1.0);
            ("σy", true)
        }
        Pauli::Z => {
            m[(0, 0)] = -ONE;
            m[(1, 1)] = ONE;
            ("σz", true)
        }
        Pauli::Plus => {
            m[(1, 0)] = ONE;
            ("σ+", false)
        }
        Pauli::Minus => {
            m[(0, 1)] = ONE;
            ("σ-", false)
        }
    };
    Operator::from_parts(m, label, hermitian)
}

/// Kronecker product, `a` on the outer (KPO) factor.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    Operator::from_parts(
        linalg::kron(a.entries.as_ref(), b.entries.as_ref()),
        format!("{}⊗{}", a.label, b.label),
        a.hermitian && b.hermitian,
    )
}

fn check_truncation(alpha: C64, space: &HilbertSpec) {
    if alpha.norm_sqr() > space.fock_cutoff() as f64 / 4.0 {
        warn!(
            "truncation risk: |alpha|^2 = {:.3} exceeds fock_cutoff/4 = {:.3}",
            alpha.norm_sqr(),
            space.fock_cutoff() as f64 / 4.0
        );
    }
}

fn displacement_matrix(alpha: C64, n: usize) -> CMat {
    let a = annihilation_matrix(n);
    let gen = Mat::from_fn(n, n, |i, j| alpha * a[(j, i)] - alpha.conj() * a[(i, j)]);
    linalg::expm(gen.as_ref())
}

/// `D(α) = exp(α a† − α* a)` on the truncated space.
pub fn displacement(alpha: C64, space: &HilbertSpec) -> Operator {
    check_truncation(alpha, space);
    Operator::from_parts(
        displacement_matrix(alpha, space.fock_cutoff()),
        format!("D({:.4}{:+.4}i)", alpha.re, alpha.im),
        false,
    )
}

/// Coherent state from the analytic Fock amplitudes, renormalised after truncation.
pub fn coherent_state(alpha: C64, space: &HilbertSpec) -> Ket {
    check_truncation(alpha, space);
    let n = space.fock_cutoff();
    let mut amps = Vec::with_capacity(n);
    let mut term = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 0..n {
        if k > 0 {
            term = term * alpha / (k as f64).sqrt();
        }
        amps.push(term);
    }
    // the vacuum amplitude is never zero, so normalisation cannot fail
    Ket::new(amps).expect("coherent state has nonzero vacuum amplitude")
}

/// Normalised `|α⟩ ± |−α⟩`.
pub fn cat_state(alpha: f64, parity: Parity, space: &HilbertSpec) -> Result<Ket> {
    if parity == Parity::Odd && alpha == 0.0 {
        return Err(KpoError::DegenerateState { norm: 0.0 });
    }
    check_truncation(C64::new(alpha, 0.0), space);
    let n = space.fock_cutoff();
    // Only the matching-parity terms of the coherent expansion survive.
    let mut amps = vec![ZERO; n];
    let mut term = 1.0f64;
    for (k, amp) in amps.iter_mut().enumerate() {
        if k > 0 {
            term *= alpha / (k as f64).sqrt();
        }
        if Parity::of_number(k) == parity {
            *amp = C64::new(term, 0.0);
        }
    }
    Ket::new(amps)
}

/// Normalised `(D(α) ± D(−α))|n⟩`, computed on a padded space and projected back.
pub fn displaced_fock_cat(alpha: f64, n: usize, parity: Parity, space: &HilbertSpec) -> Result<Ket> {
    let cutoff = space.fock_cutoff();
    if 2 * n >= cutoff {
        return Err(KpoError::InvalidParams(format!(
            "displaced Fock level n = {n} must be below fock_cutoff/2 = {}",
            cutoff / 2
        )));
    }
    check_truncation(C64::new(alpha, 0.0), space);
    let big = cutoff + PADDING;
    let dp = displacement_matrix(C64::new(alpha, 0.0), big);
    let dm = displacement_matrix(C64::new(-alpha, 0.0), big);
    let s = parity.sign();
    let amps: Vec<C64> = (0..cutoff).map(|k| dp[(k, n)] + s * dm[(k, n)]).collect();
    Ket::new(amps)
}
