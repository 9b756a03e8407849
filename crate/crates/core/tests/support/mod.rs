//! Shared oracles and invariant checks for the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use kpo_core::dynamics::{evolve, liouvillian, steady_state, time_integrated_excitation, EvolveControls, Tolerances};
use kpo_core::fockspace::{
    annihilation, coherent_state, cat_state, displacement, fock_parity, HilbertSpec, Ket, Operator, Parity, StateDiagnostics,
};
use kpo_core::linalg;
use kpo_core::model::{build_static, CompositeOps, ParamsMhz, SystemParams};
use kpo_core::perturbation::{perturbative_amplitudes, z_eigenstates, Ket2};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::PI;

// ---- two-level perturbation oracle -------------------------------------

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Interaction-picture Hamiltonian typed out independently from the six
/// exponential terms, built from σx and σz rather than the library matrices.
#[inline]
pub fn h_i(t: f64, g: f64, alpha: f64, dq: f64) -> [[C64; 2]; 2] {
    let w = 2.0 * g * alpha;
    let z = [[c(0.0), c(1.0)], [c(1.0), c(0.0)]];
    // σ'± = (X ± iY)/2 with X = σz, Y = σy
    let x = [[c(-1.0), c(0.0)], [c(0.0), c(1.0)]];
    let y = [[c(0.0), I], [-I, c(0.0)]];
    let mut sp = [[c(0.0); 2]; 2];
    let mut sm = [[c(0.0); 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            sp[r][k] = 0.5 * (x[r][k] + I * y[r][k]);
            sm[r][k] = 0.5 * (x[r][k] - I * y[r][k]);
        }
    }
    let e = |om: f64| (I * om * t).exp();
    let (e1, e2, e3, e4, e5, e6) = (e(-dq), e(w - dq), e(-(w + dq)), e(dq), e(w + dq), e(-w + dq));
    let mut h = [[c(0.0); 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            h[r][k] = 0.5
                * (z[r][k] * e1 + sp[r][k] * e2 - sm[r][k] * e3 + z[r][k] * e4 - sp[r][k] * e5 + sm[r][k] * e6);
        }
    }
    h
}

#[inline]
pub fn apply(h: &[[C64; 2]; 2], v: &Ket2) -> Ket2 {
    [h[0][0] * v[0] + h[0][1] * v[1], h[1][0] * v[0] + h[1][1] * v[1]]
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Gauss–Kronrod 15-point rule for a two-component integrand, with the
/// Kronrod–Gauss difference as error estimate.
pub fn gk15<F: Fn(f64) -> Ket2>(f: &F, a: f64, b: f64) -> (Ket2, f64) {
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(m);
    let mut k = [fc[0] * WGK[7], fc[1] * WGK[7]];
    let mut g = [fc[0] * WG[3], fc[1] * WG[3]];
    for j in 0..7 {
        let x = h * XGK[j];
        let (lo, hi) = (f(m - x), f(m + x));
        for r in 0..2 {
            let s = lo[r] + hi[r];
            k[r] += s * WGK[j];
            if j % 2 == 1 {
                g[r] += s * WG[j / 2];
            }
        }
    }
    let err = ((k[0] - g[0]) * h).norm().max(((k[1] - g[1]) * h).norm());
    ([k[0] * h, k[1] * h], err)
}

/// Adaptive bisection on [`gk15`] down to an absolute tolerance.
pub fn integrate2<F: Fn(f64) -> Ket2>(f: &F, a: f64, b: f64, tol: f64) -> Ket2 {
    let (v, err) = gk15(f, a, b);
    if err <= tol || (b - a) < 1e-9 {
        return v;
    }
    let m = 0.5 * (a + b);
    let (l, r) = (integrate2(f, a, m, 0.5 * tol), integrate2(f, m, b, 0.5 * tol));
    [l[0] + r[0], l[1] + r[1]]
}

pub fn integrate<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64) -> C64 {
    integrate2(&|s| [f(s), c(0.0)], a, b, tol)[0]
}

#[inline]
pub fn dot(a: &Ket2, b: &Ket2) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Clears the upper halves of the vector registers. faer's larger
/// matrix-product kernels can leave the AVX upper state dirty, after which
/// the scalar quadrature below runs about nine times slower on recent Intel
/// cores.
fn settle_simd() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: AVX is available, and vzeroupper only zeroes the upper
        // register halves, all of which the C ABI treats as clobbered.
        unsafe { std::arch::asm!("vzeroupper", options(nomem, nostack, preserves_flags), clobber_abi("C")) };
    }
}

pub fn quadrature_amplitudes(p0: &Ket2, pf: &Ket2, t: f64, lp: f64, g: f64, al: f64, dq: f64) -> (C64, C64) {
    settle_simd();
    let first = integrate(&|s| dot(pf, &apply(&h_i(s, g, al, dq), p0)), 0.0, t, 1e-13);
    let inner = |t1: f64| integrate2(&|s| apply(&h_i(s, g, al, dq), p0), 0.0, t1, 1e-14);
    let second = integrate(
        &|t1| dot(pf, &apply(&h_i(t1, g, al, dq), &inner(t1))),
        0.0,
        t,
        1e-12,
    );
    (-I * lp * first, -lp * lp * second)
}

pub fn rk4_probability(p0: &Ket2, pf: &Ket2, t: f64, lp: f64, g: f64, al: f64, dq: f64) -> f64 {
    let f = |s: f64, v: &Ket2| -> Ket2 {
        let hv = apply(&h_i(s, g, al, dq), v);
        [-I * lp * hv[0], -I * lp * hv[1]]
    };
    let n = 20_000;
    let h = t / n as f64;
    let mut v = *p0;
    for k in 0..n {
        let s = k as f64 * h;
        let k1 = f(s, &v);
        let y2 = [v[0] + 0.5 * h * k1[0], v[1] + 0.5 * h * k1[1]];
        let k2 = f(s + 0.5 * h, &y2);
        let y3 = [v[0] + 0.5 * h * k2[0], v[1] + 0.5 * h * k2[1]];
        let k3 = f(s + 0.5 * h, &y3);
        let y4 = [v[0] + h * k3[0], v[1] + h * k3[1]];
        let k4 = f(s + h, &y4);
        for r in 0..2 {
            v[r] += h / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
        }
    }
    dot(pf, &v).norm_sqr()
}

pub fn mhz(x: f64) -> f64 {
    2.0 * PI * x
}

pub fn state_pairs() -> Vec<(Ket2, Ket2)> {
    let (plus, minus) = z_eigenstates();
    let (g, e) = ([c(1.0), c(0.0)], [c(0.0), c(1.0)]);
    vec![(g, e), (plus, minus), (minus, plus), (g, g), (plus, plus)]
}

// ---- master-equation invariants ----------------------------------------

/// Physically sensible random operating points on a small truncation.
pub fn params_strategy() -> impl Strategy<Value = ParamsMhz> {
    (
        (-40.0..-10.0f64, 5.0..25.0f64, 0.0..50.0f64, 0.0..8.0f64),
        (0.05..2.0f64, -20.0..20.0f64, -2.0..2.0f64),
        (0.1..2.0f64, 0.1..2.0f64),
    )
        .prop_map(|((delta, chi, beta, g), (lp, dq, off), (g1, g2))| ParamsMhz {
            delta_mhz: delta,
            chi_mhz: chi,
            beta_mhz: beta,
            g_mhz: g,
            lambda_p_mhz: lp,
            delta_q_mhz: dq,
            qubit_offset_mhz: off,
            gamma1_mhz: g1,
            gamma2_mhz: g2,
        })
}

/// Deterministic sample of `count` operating points from [`params_strategy`].
pub fn sample_params(count: usize) -> Vec<ParamsMhz> {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let strategy = params_strategy();
    (0..count).map(|_| strategy.new_tree(&mut runner).unwrap().current()).collect()
}

pub const SMALL_CUTOFF: usize = 5;

/// Worst trace error, Hermiticity defect and smallest eigenvalue over four
/// snapshots of a driven, damped trajectory started from a pure state.
pub fn trajectory_defects(m: &ParamsMhz, cutoff: usize, t_final: f64) -> StateDiagnostics {
    let p = SystemParams::from_mhz(m).unwrap();
    let space = HilbertSpec::new(cutoff).unwrap();
    let psi = coherent_state(C64::new(0.6, 0.3), &space).tensor(&Ket::qubit_x(Parity::Odd));
    let times: Vec<f64> = (1..=4).map(|k| t_final * k as f64 / 4.0).collect();
    let controls = EvolveControls { snapshot_times: times, ..Default::default() };
    let traj = evolve(&psi.projector(), &p, t_final, &controls).unwrap();
    let mut worst = StateDiagnostics { trace_error: 0.0, hermitian_deviation: 0.0, min_eigenvalue: f64::INFINITY };
    for s in &traj.snapshots {
        let d = s.state.diagnostics().unwrap();
        worst.trace_error = worst.trace_error.max(d.trace_error);
        worst.hermitian_deviation = worst.hermitian_deviation.max(d.hermitian_deviation);
        worst.min_eigenvalue = worst.min_eigenvalue.min(d.min_eigenvalue);
    }
    worst.trace_error = worst.trace_error.max(traj.max_trace_error());
    worst
}

fn model_generator(p: &SystemParams, space: &HilbertSpec) -> kpo_core::dynamics::Liouvillian {
    let ops = CompositeOps::new(space);
    liouvillian(&build_static(p, space), &[(ops.a, p.gamma1), (ops.sigma_minus, p.gamma2)]).unwrap()
}

/// `max_k |Σ_i L[(i,i),k]|` for the undriven model generator.
pub fn liouvillian_trace_defect(m: &ParamsMhz, cutoff: usize) -> f64 {
    let p = SystemParams::from_mhz(m).unwrap().with_lambda_p(0.0);
    model_generator(&p, &HilbertSpec::new(cutoff).unwrap()).trace_defect()
}

/// `max |L[ρ_ss]|` for the steady state of the undriven model.
pub fn steady_residual(m: &ParamsMhz, cutoff: usize) -> f64 {
    let p = SystemParams::from_mhz(m).unwrap().with_lambda_p(0.0);
    let space = HilbertSpec::new(cutoff).unwrap();
    let rho = steady_state(&p, &space).unwrap();
    linalg::max_abs(model_generator(&p, &space).apply(rho.entries()).as_ref())
}

fn tight() -> Tolerances {
    Tolerances { rtol: 1e-11, atol: 1e-13, ..Default::default() }
}

/// Without dissipation or drive, evolution must equal `U ρ U†` with `U`
/// assembled from the eigendecomposition of the static Hamiltonian.
pub fn unitary_oracle_error(m: &ParamsMhz, cutoff: usize, t: f64) -> f64 {
    let mut m = *m;
    m.gamma1_mhz = 0.0;
    m.gamma2_mhz = 0.0;
    m.lambda_p_mhz = 0.0;
    let p = SystemParams::from_mhz(&m).unwrap();
    let space = HilbertSpec::new(cutoff).unwrap();
    let psi = Ket::fock(1, &space).tensor(&Ket::qubit_x(Parity::Even));
    let controls = EvolveControls { snapshot_times: vec![t], tolerances: tight(), ..Default::default() };
    let traj = evolve(&psi.projector(), &p, t, &controls).unwrap();
    let (vals, vecs) = linalg::hermitian_eigen(build_static(&p, &space).entries().as_ref()).unwrap();
    let d = vals.len();
    let phases = faer::Mat::from_fn(d, d, |i, j| if i == j { (-I * vals[i] * t).exp() } else { C64::new(0.0, 0.0) });
    let u = &vecs * &phases * vecs.adjoint();
    let exact = &u * psi.projector().entries() * u.adjoint();
    linalg::max_abs_diff(exact.as_ref(), traj.final_state().unwrap().entries().as_ref())
}

/// Largest deviation of `⟨σz⟩(t)` from `−cos(2λp t)` for a bare resonant
/// qubit, together with the deviation of the one-period average from 1/2.
pub fn rabi_error() -> f64 {
    let m = ParamsMhz {
        delta_mhz: -30.0,
        chi_mhz: 18.0,
        beta_mhz: 0.0,
        g_mhz: 0.0,
        lambda_p_mhz: 0.5,
        delta_q_mhz: 0.0,
        qubit_offset_mhz: 0.0,
        gamma1_mhz: 0.0,
        gamma2_mhz: 0.0,
    };
    let p = SystemParams::from_mhz(&m).unwrap();
    let space = HilbertSpec::new(3).unwrap();
    let rho = Ket::fock(0, &space).tensor(&Ket::ground()).projector();
    let traj = evolve(&rho, &p, 1.0, &EvolveControls::default()).unwrap();
    let worst = traj
        .times
        .iter()
        .zip(&traj.sigma_z)
        .map(|(t, sz)| (sz + (2.0 * p.lambda_p * t).cos()).abs())
        .fold(0.0, f64::max);
    worst.max((time_integrated_excitation(&traj) - 0.5).abs())
}

/// Defects of the coherent and cat state identities on a 40-level space.
/// The first entry collects identities that hold exactly on any truncation
/// (`D†D = 1`, cat parities `±1`, even/odd orthogonality). The second
/// collects those that only hold up to truncation: `D(α)|0⟩ = |α⟩`,
/// `a|α⟩ = α|α⟩` below the cutoff, `⟨α|−α⟩ = e^{−2α²}`, and the cat
/// assembled from coherent states.
pub fn cat_identity_defects(alpha: f64) -> (f64, f64) {
    let space = HilbertSpec::new(40).unwrap();
    let n = space.fock_cutoff();
    let a_c = C64::new(alpha, 0.0);
    let coh = coherent_state(a_c, &space);
    let coh_m = coherent_state(-a_c, &space);
    let d = displacement(a_c, &space);
    let parity = fock_parity(&space);
    let even = cat_state(alpha, Parity::Even, &space).unwrap();
    let odd = cat_state(alpha, Parity::Odd, &space).unwrap();

    let exact = d
        .dagger()
        .matmul(&d)
        .max_abs_diff(&Operator::identity(n))
        .max((parity.expectation_ket(&even) - 1.0).norm())
        .max((parity.expectation_ket(&odd) + 1.0).norm())
        .max(even.inner(&odd).norm());

    let dvac = d.apply(&Ket::fock(0, &space));
    let mut trunc = dvac.iter().zip(coh.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let av = annihilation(&space).apply(&coh);
    // the last Fock component loses its partner under truncation
    trunc = trunc.max((0..n - 1).map(|k| (av[k] - a_c * coh.amplitudes()[k]).norm()).fold(0.0, f64::max));
    trunc = trunc.max((coh.inner(&coh_m) - C64::new((-2.0 * alpha * alpha).exp(), 0.0)).norm());
    let sum: Vec<C64> = coh.amplitudes().iter().zip(coh_m.amplitudes()).map(|(x, y)| x + y).collect();
    trunc = trunc.max((Ket::new(sum).unwrap().overlap(&even) - 1.0).abs());
    (exact, trunc)
}

/// Largest `|closed form − nested quadrature|` over the given detunings (MHz)
/// for `|g⟩→|e⟩` and `|+⟩→|−⟩`.
pub fn amplitude_quadrature_defect(detunings_mhz: &[f64], t: f64) -> f64 {
    let (g, al, lp) = (mhz(5.0), 1.68, mhz(0.05));
    let mut worst: f64 = 0.0;
    for (p0, pf) in state_pairs().into_iter().step_by(2) {
        for &d in detunings_mhz {
            let (c1, c2) = perturbative_amplitudes(&p0, &pf, t, lp, g, al, mhz(d));
            let (q1, q2) = quadrature_amplitudes(&p0, &pf, t, lp, g, al, mhz(d));
            worst = worst.max((c1 - q1).norm()).max((c2 - q2).norm());
        }
    }
    worst
}

/// Relative departure from `C1 ∝ λp` and `C2 ∝ λp²` between `λp` and `k·λp`.
pub fn amplitude_scaling_defect(lambda_p: f64, k: f64, delta_q_mhz: f64, t: f64) -> f64 {
    let (g, al) = (mhz(5.0), 1.68);
    let mut worst: f64 = 0.0;
    for (p0, pf) in state_pairs() {
        let (a1, a2) = perturbative_amplitudes(&p0, &pf, t, lambda_p, g, al, mhz(delta_q_mhz));
        let (b1, b2) = perturbative_amplitudes(&p0, &pf, t, k * lambda_p, g, al, mhz(delta_q_mhz));
        let s1 = a1.norm().max(1e-300) * k;
        let s2 = a2.norm().max(1e-300) * k * k;
        worst = worst.max((b1 - k * a1).norm() / s1).max((b2 - k * k * a2).norm() / s2);
    }
    worst
}
