use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{KpoError, Result};
use crate::fockspace::Operator;
use crate::linalg::{self, CMat, ZERO};

/// Vectorised GKSL generator acting on column-stacked density matrices,
/// `vec(ρ)[i + d·j] = ρ[i, j]`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    matrix: CMat,
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let d = self.dim;
        let v = vectorize(rho);
        let mut out = vec![ZERO; d * d];
        linalg::matvec(self.matrix.as_ref(), &v, &mut out);
        unvectorize(&out, d)
    }

    /// Largest `|Σ_i L[(i,i), k]|`, which vanishes for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        (0..d * d)
            .map(|k| (0..d).map(|i| self.matrix[(i + d * i, k)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }
}

fn conj(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

pub fn vectorize(rho: &CMat) -> Vec<C64> {
    let d = rho.nrows();
    let mut v = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            v.push(rho[(i, j)]);
        }
    }
    v
}

pub fn unvectorize(v: &[C64], d: usize) -> CMat {
    Mat::from_fn(d, d, |i, j| v[i + d * j])
}

/// `L = −i(I⊗H − Hᵀ⊗I) + Σ γ/2 (2 c̄⊗c − I⊗c†c − (c†c)ᵀ⊗I)`.
pub fn liouvillian(h: &Operator, dissipators: &[(Operator, f64)]) -> Result<Liouvillian> {
    let d = h.dim();
    if h.hermitian_deviation() > 1e-10 * linalg::max_abs(h.entries().as_ref()).max(1.0) {
        return Err(KpoError::InvalidParams(format!("Hamiltonian '{}' is not Hermitian", h.label())));
    }
    let mut eff = linalg::scale(h.entries().as_ref(), C64::new(0.0, -1.0));
    for (c, rate) in dissipators {
        if c.dim() != d {
            return Err(KpoError::DimensionMismatch { expected: d, found: c.dim() });
        }
        if !(*rate >= 0.0) {
            return Err(KpoError::InvalidParams(format!("dissipation rate must be non-negative, got {rate}")));
        }
        let cdc = c.entries().adjoint() * c.entries();
        eff = eff - linalg::scale(cdc.as_ref(), C64::new(0.5 * rate, 0.0));
    }
    // Kρ + ρK† with K = −iH − ½Σγ c†c
    let id = linalg::identity(d);
    let mut matrix = linalg::kron(id.as_ref(), eff.as_ref()) + linalg::kron(conj(&eff).as_ref(), id.as_ref());
    for (c, rate) in dissipators {
        if *rate == 0.0 {
            continue;
        }
        let jump = linalg::kron(conj(c.entries()).as_ref(), c.entries().as_ref());
        matrix = matrix + linalg::scale(jump.as_ref(), C64::new(*rate, 0.0));
    }
    Ok(Liouvillian { dim: d, matrix })
}

/// `L[ρ]` evaluated directly with matrix products instead of the vectorised form.
pub fn apply_superoperator(h: &CMat, dissipators: &[(CMat, f64)], rho: &CMat) -> CMat {
    let i = C64::new(0.0, 1.0);
    let mut out = linalg::scale((h * rho - rho * h).as_ref(), -i);
    for (c, rate) in dissipators {
        let cd = c.adjoint();
        let cdc = cd * c;
        let term = linalg::scale((c * rho * cd).as_ref(), C64::new(*rate, 0.0))
            - linalg::scale((&cdc * rho + rho * &cdc).as_ref(), C64::new(0.5 * rate, 0.0));
        out = out + term;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{pauli, HilbertSpec, Ket, Pauli};
    use crate::model::CompositeOps;

    fn random_hermitian(d: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = Mat::from_fn(d, d, |_, _| C64::new(next(), next()));
        Mat::from_fn(d, d, |i, j| m[(i, j)] + m[(j, i)].conj())
    }

    #[test]
    fn vacuum_is_dark_for_photon_loss() {
        let s = HilbertSpec::new(4).unwrap();
        let ops = CompositeOps::new(&s);
        let l = liouvillian(&Operator::zero(8), &[(ops.a.clone(), 1.3)]).unwrap();
        let vac = Ket::fock(0, &s).tensor(&Ket::ground()).projector();
        assert!(linalg::max_abs(l.apply(vac.entries()).as_ref()) < 1e-15);
    }

    #[test]
    fn qubit_decay_rate() {
        let sm = pauli(Pauli::Minus);
        let l = liouvillian(&Operator::zero(2), &[(sm, 0.7)]).unwrap();
        let e = Ket::excited().projector();
        let d = l.apply(e.entries());
        assert!((d[(1, 1)].re + 0.7).abs() < 1e-15);
    }

    #[test]
    fn preserves_trace_of_random_states() {
        let s = HilbertSpec::new(3).unwrap();
        let ops = CompositeOps::new(&s);
        let h = Operator::hermitian(random_hermitian(6, 3), "H").unwrap();
        let l = liouvillian(&h, &[(ops.a.clone(), 0.4), (ops.sigma_minus.clone(), 1.1)]).unwrap();
        assert!(l.trace_defect() < 1e-12);
        for k in 0..100 {
            let rho = random_hermitian(6, 100 + k);
            let out = l.apply(&rho);
            assert!(linalg::trace(out.as_ref()).norm() < 1e-10);
            assert!(linalg::hermitian_deviation(out.as_ref()) < 1e-12);
        }
    }

    #[test]
    fn matches_direct_superoperator() {
        let s = HilbertSpec::new(3).unwrap();
        let ops = CompositeOps::new(&s);
        let h = random_hermitian(6, 9);
        let l = liouvillian(&Operator::hermitian(h.clone(), "H").unwrap(), &[(ops.a.clone(), 0.4)]).unwrap();
        let rho = random_hermitian(6, 10);
        let direct = apply_superoperator(&h, &[(ops.a.entries().clone(), 0.4)], &rho);
        assert!(linalg::max_abs_diff(direct.as_ref(), l.apply(&rho).as_ref()) < 1e-12);
    }
}
