//! GKSL master-equation machinery: generator construction, steady states,
//! adaptive time evolution and the fast sweep engine.

pub mod evolve;
pub mod integrator;
pub mod liouvillian;
pub mod spectral;
pub mod steady;

pub use evolve::{evolve, time_integrated_excitation, EvolveControls, MasterEquation, Snapshot, Trajectory};
pub use integrator::{IntegrationStats, Tolerances};
pub use liouvillian::{liouvillian, Liouvillian};
pub use spectral::{parity_eigenbasis, ParityEigenbasis, WindowEngine, WindowSettings};
pub use steady::{
    convergence_check, convergence_report, expectation, steady_photon_number, steady_state, steady_state_general,
    steady_state_with_info, ConvergenceReport, SteadyState,
};
