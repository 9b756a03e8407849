use kpo_core::KpoError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("analysis failed: {0}")]
    Analysis(String),
    #[error("physics validation failed: {0}")]
    Physics(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Analysis(_) | CliError::Io(_) | CliError::Csv(_) => 2,
            CliError::Physics(_) => 3,
        }
    }
}

impl From<KpoError> for CliError {
    fn from(e: KpoError) -> Self {
        match e {
            KpoError::InvalidParams(m) => CliError::Config(m),
            KpoError::NotConverged { .. }
            | KpoError::BelowBifurcation { .. }
            | KpoError::NoDissipation
            | KpoError::DegenerateSteadyState { .. } => CliError::Physics(e.to_string()),
            e => CliError::Analysis(e.to_string()),
        }
    }
}
