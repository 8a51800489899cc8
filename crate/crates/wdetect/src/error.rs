use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma function pole at {re}{im:+}i (factor {factor:?})")]
    Pole {
        re: f64,
        im: f64,
        factor: Option<usize>,
    },
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("{what} did not converge (best residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },
    #[error("intermediate value overflow in {0}")]
    Overflow(&'static str),
    #[error("series diverges: {0}")]
    SeriesDivergence(String),
    #[error("quadrature budget of {budget} evaluations exhausted (error estimate {error:e})")]
    QuadratureFailure { budget: usize, error: f64 },
    #[error("contour integral not converged: last {last:e}, previous {previous:e}")]
    NotConverged { last: f64, previous: f64 },
    #[error("no feasible contour offset")]
    NoFeasibleOffset,
    #[error("imaginary residue {0:e} too large")]
    ImaginaryResidue(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short tag for report rows.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Pole { .. } => "pole",
            Error::Domain(_) => "domain",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Overflow(_) => "overflow",
            Error::SeriesDivergence(_) => "series_divergence",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::NotConverged { .. } => "not_converged",
            Error::NoFeasibleOffset => "no_feasible_offset",
            Error::ImaginaryResidue(_) => "imaginary_residue",
            Error::Config(_) => "config",
        }
    }
}
