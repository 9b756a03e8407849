//! Eigenstates of the static Hamiltonian, their transition frequencies,
//! identification against cat-state ansätze, and level populations along a
//! trajectory.
//!
//! The Kerr term is negative, so the physically "lowest" levels of the
//! rotating-frame oscillator sit at the top of the spectrum. Levels are
//! therefore indexed in descending energy: level 0 is the highest eigenvalue.

use serde::Serialize;

use crate::dynamics::{parity_eigenbasis, steady_photon_number, Trajectory};
use crate::error::{KpoError, Result};
use crate::fockspace::{displaced_fock_cat, HilbertSpec, Ket, Parity};
use crate::model::{angular_to_mhz, semiclassical_alpha, SystemParams};

#[derive(Debug, Clone, Serialize)]
pub struct StateLabel {
    pub name: String,
    pub overlap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Level {
    pub index: usize,
    pub energy_mhz: f64,
    pub parity_even: bool,
    pub label: StateLabel,
    #[serde(skip)]
    pub state: Ket,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    /// Amplitude used for the ansatz states.
    pub alpha: f64,
    pub levels: Vec<Level>,
}

impl Spectrum {
    pub fn energies_mhz(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy_mhz).collect()
    }

    pub fn gap_mhz(&self, i: usize, j: usize) -> f64 {
        (self.levels[i].energy_mhz - self.levels[j].energy_mhz).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub gap_mhz: f64,
}

/// The amplitude used for labelling: the square root of the steady photon
/// number of the undriven, uncoupled oscillator, or the semiclassical value
/// when that cannot be computed.
pub fn labelling_alpha(p: &SystemParams, space: &HilbertSpec) -> Result<f64> {
    let mut q = *p;
    q.g = 0.0;
    q.lambda_p = 0.0;
    if q.gamma2 == 0.0 {
        q.gamma2 = 1.0;
    }
    match steady_photon_number(&q, space) {
        Ok(n) if n > 0.0 => Ok(n.sqrt()),
        _ => semiclassical_alpha(p),
    }
}

pub fn spectrum(p: &SystemParams, space: &HilbertSpec) -> Result<Spectrum> {
    let basis = parity_eigenbasis(p, space)?;
    let alpha = labelling_alpha(p, space)?;
    let candidates = ansatz_set(alpha, space)?;
    let d = space.total_dim();
    let levels = (0..d)
        .map(|k| {
            let state = Ket::new((0..d).map(|i| basis.vectors[(i, k)]).collect())?;
            let label = best_match(&state, &candidates);
            Ok(Level {
                index: k,
                energy_mhz: angular_to_mhz(basis.energies[k]),
                parity_even: basis.parity_even[k],
                label,
                state,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum { alpha, levels })
}

/// All pairs among the first `max_level + 1` levels, sorted by gap.
pub fn transition_table(s: &Spectrum, max_level: usize) -> Vec<Transition> {
    let top = max_level.min(s.levels.len().saturating_sub(1));
    let mut out = Vec::new();
    for i in 0..=top {
        for j in i + 1..=top {
            out.push(Transition { from: i, to: j, gap_mhz: s.gap_mhz(i, j) });
        }
    }
    out.sort_by(|a, b| a.gap_mhz.total_cmp(&b.gap_mhz));
    out
}

fn qubit_name(sign: Parity) -> &'static str {
    match sign {
        Parity::Even => "|+⟩",
        Parity::Odd => "|−⟩",
    }
}

fn cat_name(parity: Parity, n: usize) -> String {
    let kind = if parity == Parity::Even { "even" } else { "odd" };
    if n == 0 {
        format!("{kind}-cat(n=0)")
    } else {
        format!("{kind} displaced-cat(n={n})")
    }
}

/// `|±⟩ ⊗ (D(α) ± D(−α))|n⟩` for `n ≤ 3` (fewer when the cutoff is small).
pub fn ansatz_set(alpha: f64, space: &HilbertSpec) -> Result<Vec<(String, Ket)>> {
    let mut out = Vec::new();
    let nmax = 3.min((space.fock_cutoff() - 1) / 2);
    for n in 0..=nmax {
        for cat_parity in [Parity::Even, Parity::Odd] {
            let cat = match displaced_fock_cat(alpha, n, cat_parity, space) {
                Ok(c) => c,
                // odd cat of the vacuum at α = 0 does not exist
                Err(KpoError::DegenerateState { .. }) => continue,
                Err(e) => return Err(e),
            };
            for q in [Parity::Even, Parity::Odd] {
                let name = format!("{} ⊗ {}", qubit_name(q), cat_name(cat_parity, n));
                out.push((name, cat.tensor(&Ket::qubit_x(q))));
            }
        }
    }
    Ok(out)
}

fn best_match(state: &Ket, candidates: &[(String, Ket)]) -> StateLabel {
    candidates
        .iter()
        .map(|(name, k)| StateLabel { name: name.clone(), overlap: k.overlap(state) })
        .max_by(|a, b| a.overlap.total_cmp(&b.overlap))
        .unwrap_or(StateLabel { name: "unlabelled".into(), overlap: 0.0 })
}

/// Best-matching ansatz for `v` and its overlap `|⟨ansatz|v⟩|²`.
pub fn identify_state(v: &Ket, p: &SystemParams, space: &HilbertSpec) -> Result<StateLabel> {
    if v.dim() != space.total_dim() {
        return Err(KpoError::DimensionMismatch { expected: space.total_dim(), found: v.dim() });
    }
    let alpha = labelling_alpha(p, space)?;
    Ok(best_match(v, &ansatz_set(alpha, space)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct PopulationRow {
    pub time: f64,
    pub populations: Vec<f64>,
}

/// `⟨ψ_i|ρ(t)|ψ_i⟩` for the given levels at every stored snapshot.
pub fn eigen_populations(traj: &Trajectory, s: &Spectrum, levels: &[usize]) -> Result<Vec<PopulationRow>> {
    if traj.snapshots.is_empty() {
        return Err(KpoError::MissingSnapshots);
    }
    let mut rows = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        if snap.state.dim() != s.levels.first().map_or(0, |l| l.state.dim()) {
            return Err(KpoError::DimensionMismatch {
                expected: s.levels.first().map_or(0, |l| l.state.dim()),
                found: snap.state.dim(),
            });
        }
        let populations = levels
            .iter()
            .map(|&i| {
                s.levels
                    .get(i)
                    .map(|l| snap.state.population(&l.state))
                    .ok_or_else(|| KpoError::InvalidParams(format!("level {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(PopulationRow { time: snap.time, populations });
    }
    Ok(rows)
}
