use thiserror::Error;

use crate::lattice::Site;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice dimensions must be positive, got {width}x{height}")]
    EmptyLattice { width: usize, height: usize },
    #[error("interaction range must be at least 1")]
    ZeroRange,
    #[error("lattice has {0} sites; configurations are limited to 64")]
    TooManySites(usize),
    #[error("width {width} does not tile lattice dimension {dim}")]
    NonDividingWidth { width: usize, dim: usize },
    #[error("width {width} is smaller than the interaction range {range}")]
    WidthTooSmall { width: usize, range: usize },
    #[error("move kind does not match the rate model")]
    WrongMoveKind,
    #[error("group id must be 1 or 2, got {0}")]
    InvalidGroup(u8),
    #[error("state space has {size} states, cap is {cap}")]
    StateSpaceTooLarge { size: u128, cap: usize },
    #[error("path enumeration needs {0} paths, more than the 10^7 limit")]
    TooManyPaths(u128),
    #[error("forward transition {from}->{to} is positive but the reverse is zero")]
    InfiniteEpr { from: usize, to: usize },
    #[error("approximate transition {from}->{to} is outside the support of the exact one")]
    SupportViolation { from: usize, to: usize },
    #[error("stationary solve did not converge (residual {residual:e})")]
    NotConverged { residual: f64 },
    #[error("|M| = {value} >= 1 at state {state:?}, target flips {target:?}")]
    AtanhDomain {
        value: f64,
        state: Vec<u8>,
        target: Vec<Site>,
    },
    #[error("reverse rate vanishes at state {state:?}, target flips {target:?}")]
    ZeroReverseRate { state: Vec<u8>, target: Vec<Site> },
    #[error("no transition probabilities available for this sample")]
    UnavailableTransitionProbability,
    #[error("reports are not comparable: {0}")]
    IncompatibleReports(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{cell}: {source}")]
    Cell { cell: String, source: Box<Error> },
}

impl Error {
    /// Short stable identifier for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyLattice { .. }
            | Error::ZeroRange
            | Error::TooManySites(_)
            | Error::NonDividingWidth { .. }
            | Error::WidthTooSmall { .. }
            | Error::InvalidGroup(_)
            | Error::Config(_) => "config",
            Error::WrongMoveKind => "wrong_move_kind",
            Error::StateSpaceTooLarge { .. } => "state_space_too_large",
            Error::TooManyPaths(_) => "too_many_paths",
            Error::InfiniteEpr { .. } => "infinite_epr",
            Error::SupportViolation { .. } => "support_violation",
            Error::NotConverged { .. } => "not_converged",
            Error::AtanhDomain { .. } => "atanh_domain",
            Error::ZeroReverseRate { .. } => "zero_reverse_rate",
            Error::UnavailableTransitionProbability => "unavailable_transition_probability",
            Error::IncompatibleReports(_) => "incompatible_reports",
            Error::Io(_) => "io",
            Error::Cell { source, .. } => source.kind(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
