use thiserror::Error;

/// Everything that can go wrong in the simulation library.
///
/// Variants are grouped by [`ErrorKind`], which the CLI maps onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} out of range for a {n_sites}-site state")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("site {site} has dimension {dim}, expected a qubit")]
    NotQubit { site: usize, dim: usize },
    #[error("observable list uses site {0} more than once")]
    DuplicateSite(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("state is not normalized (norm {0:.15})")]
    NotNormalized(f64),
    #[error("selected a measurement branch with zero probability")]
    ZeroProbabilityBranch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("packet truncated by the grid boundary (tail mass {0:.3e})")]
    PacketTruncated(f64),
    #[error("wave function reached the grid edge (edge mass {0:.3e})")]
    Aliasing(f64),
    #[error("time step or grid does not resolve the momentum content (spectral edge mass {0:.3e})")]
    UnresolvedMomentum(f64),
    #[error("support leaks outside the packet modes (leaked weight {0:.3e})")]
    ModeLeakage(f64),

    #[error("guidance undefined near a node: |psi|^2 = {density:.3e} <= {threshold:.3e}")]
    NodeProximity { density: f64, threshold: f64 },
    #[error("step violates the CFL bound: |v| dt = {step:.3e} >= spacing {spacing:.3e}")]
    CflViolation { step: f64, spacing: f64 },
    #[error("configuration outside the grid: {0}")]
    OutsideGrid(f64),
    #[error("conditional slice is identically zero")]
    AllZeroSlice,

    #[error("hit left a degenerate state (norm {0:.3e})")]
    DegenerateHit(f64),

    #[error("record basis is not orthonormal (max deviation {0:.3e})")]
    NonOrthonormalBasis(f64),
    #[error("region is empty")]
    EmptyRegion,
    #[error("transform touches protected branch {0:?}")]
    ProtectedBranch(String),
    #[error("no branch labelled {0:?}")]
    UnknownBranch(String),

    #[error("initial position lies on the symmetry line")]
    SymmetryLine,
    #[error("positions inconsistent with the state support: {0}")]
    InconsistentPositions(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed config, invalid parameters, unknown names.
    Config,
    /// A numerical contract was violated (norm drift, nodes, aliasing, ...).
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            SiteOutOfRange { .. }
            | NotQubit { .. }
            | DuplicateSite(_)
            | DimensionMismatch { .. }
            | NotHermitian(_)
            | InvalidGrid(_)
            | NonOrthonormalBasis(_)
            | EmptyRegion
            | ProtectedBranch(_)
            | UnknownBranch(_)
            | SymmetryLine
            | InconsistentPositions(_)
            | InvalidParameter(_)
            | UnknownScenario(_)
            | Config(_) => ErrorKind::Config,
            NotNormalized(_)
            | ZeroProbabilityBranch
            | PacketTruncated(_)
            | Aliasing(_)
            | UnresolvedMomentum(_)
            | ModeLeakage(_)
            | NodeProximity { .. }
            | CflViolation { .. }
            | OutsideGrid(_)
            | AllZeroSlice
            | DegenerateHit(_) => ErrorKind::Numerical,
            Io(_) => ErrorKind::Io,
        }
    }

    /// Short machine-readable tag, used in the CLI error object.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            SiteOutOfRange { .. } => "site_out_of_range",
            NotQubit { .. } => "not_qubit",
            DuplicateSite(_) => "duplicate_site",
            DimensionMismatch { .. } => "dimension_mismatch",
            NotHermitian(_) => "not_hermitian",
            NotNormalized(_) => "not_normalized",
            ZeroProbabilityBranch => "zero_probability_branch",
            InvalidGrid(_) => "invalid_grid",
            PacketTruncated(_) => "packet_truncated",
            Aliasing(_) => "aliasing",
            UnresolvedMomentum(_) => "unresolved_momentum",
            ModeLeakage(_) => "mode_leakage",
            NodeProximity { .. } => "node_proximity",
            CflViolation { .. } => "cfl_violation",
            OutsideGrid(_) => "outside_grid",
            AllZeroSlice => "all_zero_slice",
            DegenerateHit(_) => "degenerate_hit",
            NonOrthonormalBasis(_) => "non_orthonormal_basis",
            EmptyRegion => "empty_region",
            ProtectedBranch(_) => "protected_branch",
            UnknownBranch(_) => "unknown_branch",
            SymmetryLine => "symmetry_line",
            InconsistentPositions(_) => "inconsistent_positions",
            InvalidParameter(_) => "invalid_parameter",
            UnknownScenario(_) => "unknown_scenario",
            Config(_) => "config",
            Io(_) => "io",
        }
    }
}
