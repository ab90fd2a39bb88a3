use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("support not normalized: mass defect {mass_defect:.3e}, first moment {first_moment:.3e} (run normalize_support first)")]
    SupportNotNormalized { mass_defect: f64, first_moment: f64 },

    #[error("critical or multi-cut potential: min S = {min_s:.3e} on [-1, 1]")]
    CriticalOrMultiCut { min_s: f64 },

    #[error("Euler-Lagrange residual {residual:.3e} exceeds tolerance")]
    EulerLagrange { residual: f64 },

    #[error("no one-cut normalization found after {iterations} Newton iterations")]
    NoOneCutNormalization { iterations: usize },

    #[error("near-critical edge at x = {x:.6}: |m_V - V'| = {value:.3e}, shrink delta")]
    NearCriticalEdge { x: f64, value: f64 },

    #[error("master operator inversion residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    InversionResidual { residual: f64, tolerance: f64 },

    #[error("outlier configuration: max |lambda| = {max_abs:.6} outside U")]
    OutlierConfiguration { max_abs: f64 },

    #[error("freeness violated: smallest covariance eigenvalue {min_eigenvalue:.3e}")]
    FreenessViolated { min_eigenvalue: f64 },

    #[error("coincident coordinates in configuration")]
    Collision,

    #[error("tridiagonal eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid batch file: {0}")]
    BatchFormat(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn rejected(msg: impl Into<String>) -> Self {
        Error::RejectedInput(msg.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The underlying error with stage annotations removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Stable machine-readable name of the error kind; stage wrappers are transparent.
    pub fn code(&self) -> &'static str {
        match self {
            Error::RejectedInput(_) => "rejected_input",
            Error::SupportNotNormalized { .. } => "support_not_normalized",
            Error::CriticalOrMultiCut { .. } => "critical_or_multi_cut",
            Error::EulerLagrange { .. } => "euler_lagrange",
            Error::NoOneCutNormalization { .. } => "no_one_cut_normalization",
            Error::NearCriticalEdge { .. } => "near_critical_edge",
            Error::InversionResidual { .. } => "inversion_residual",
            Error::OutlierConfiguration { .. } => "outlier_configuration",
            Error::FreenessViolated { .. } => "freeness_violated",
            Error::Collision => "collision",
            Error::EigenNoConvergence => "eigen_no_convergence",
            Error::Config(_) => "config",
            Error::BatchFormat(_) => "batch_format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Stage { source, .. } => source.code(),
        }
    }

    /// Process exit code used by the CLI: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RejectedInput(_)
            | Error::Config(_)
            | Error::SupportNotNormalized { .. }
            | Error::FreenessViolated { .. } => 2,
            Error::Io(_) | Error::Json(_) | Error::BatchFormat(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
