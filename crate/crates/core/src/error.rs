use thiserror::Error;

pub type Result<T> = std::result::Result<T, KpoError>;

#[derive(Debug, Error)]
pub enum KpoError {
    #[error("state has vanishing norm ({norm:.3e}) and cannot be normalised")]
    DegenerateState { norm: f64 },

    #[error("KPO is below the bifurcation threshold: (2*beta + delta)/chi = {ratio:.6}")]
    BelowBifurcation { ratio: f64 },

    #[error("steady state is not unique: {count} near-null singular values (smallest {smallest:?})")]
    DegenerateSteadyState { count: usize, smallest: Vec<f64> },

    #[error("step size underflow at t = {t:.6e} us (dt = {dt:.3e} us)")]
    StepSizeUnderflow { t: f64, dt: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no extrema with prominence >= {min_prominence:.3e}")]
    NoExtrema { min_prominence: f64 },

    #[error("invalid splitting: dip_low = {dip_low} MHz, dip_high = {dip_high} MHz, g = {g} MHz")]
    InvalidSplitting { dip_low: f64, dip_high: f64, g: f64 },

    #[error("reference photon number is zero")]
    DivisionByZeroPhotonNumber,

    #[error("Fock truncation not converged: <n> = {value_n} at N = {n}, {value_m} at N = {m}")]
    NotConverged { n: usize, m: usize, value_n: f64, value_m: f64 },

    #[error("trajectory carries no state snapshots")]
    MissingSnapshots,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("sweep point {detuning_mhz} MHz failed: {source}")]
    SweepPoint {
        detuning_mhz: f64,
        #[source]
        source: Box<KpoError>,
    },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("no dissipation: steady state is not unique when gamma1 = gamma2 = 0")]
    NoDissipation,
}
