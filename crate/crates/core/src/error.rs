use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("source list is empty")]
    NoSources,
    #[error("sink list is empty")]
    NoSinks,
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("atom {index} of the {side} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        side: &'static str,
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("atom {index} of the {side} has a non-finite coordinate or mass")]
    NonFinite { side: &'static str, index: usize },
    #[error("atom {index} of the {side} has negative mass {mass}")]
    NegativeMass {
        side: &'static str,
        index: usize,
        mass: f64,
    },
    #[error("unbalanced masses: sources sum to {sources}, sinks sum to {sinks}")]
    Unbalanced { sources: f64, sinks: f64 },
    #[error("total mass must be positive")]
    ZeroTotalMass,
    #[error("exponent q = {0} must exceed 1")]
    ExponentTooSmall(f64),
    #[error("free atom {index} has dimension {found}, expected {expected}")]
    FreeAtomDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("min-cost flow did not converge after {iterations} augmentations")]
    FlowNotConverged { iterations: usize },
    #[error("plan is not regular: {0}")]
    NotRegular(String),
    #[error("path enumeration exceeded the cap of {0} paths")]
    PathCap(usize),
    #[error("chain flows differ beyond tolerance: {first} vs {other}")]
    UnequalChainFlow { first: f64, other: f64 },
    #[error("graph is not acyclic")]
    Cyclic,
    #[error("edge {0} has zero length or zero weight")]
    DegenerateEdge(usize),
    #[error("need at least {needed} atoms for this graph, got {got}")]
    TooFewAtoms { needed: usize, got: usize },
    #[error("topology enumeration exceeded the cap of {0}")]
    EnumerationCap(usize),
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("rendering needs a planar embedding, got dimension {0}")]
    NotPlanar(usize),
    #[error("malformed document: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
