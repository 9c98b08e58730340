use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unsupported root system type: {0}")]
    UnsupportedType(String),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("point lies on the wall of {0} (|(a,x)| = {1:e})")]
    OnWall(String, f64),
    #[error("point has non-positive level {0}")]
    NotPositiveLevel(f64),
    #[error("relation fails: {0}")]
    RelationFailure(String),
    #[error("singular spectral point: {0}")]
    SingularSpectralPoint(String),
    #[error("multiplicity function depends on the level: {0}")]
    LevelDependentK(String),
    #[error("multiplicity function is not invariant: {0}")]
    NonInvariantMultiplicity(String),
    #[error("series does not converge: {0}")]
    NoConvergence(String),
    #[error("spectral parameter outside the convergence domain; witness y = {0:?}")]
    DomainViolation(Vec<String>),
    #[error("(Y,P) is not integral: {0}")]
    ParityViolation(String),
    #[error("point is not on the wall: {0}")]
    NotOnWall(String),
    #[error("quadrature box touches the level-zero hyperplane")]
    WallEnumerationIncomplete,
    #[error("family is not continuous across walls: {0}")]
    NotContinuous(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
