use thiserror::Error;

/// Errors raised by model construction, design evaluation and optimization.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid weighting measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the experimental region")]
    OutOfRegion { point: Vec<f64> },

    #[error("image points outside the target region: {points:?}")]
    ImageOutOfRegion { points: Vec<Vec<f64>> },

    #[error("linear component {value} is not positive{}", fmt_index(*.index))]
    NonpositiveLinearComponent { value: f64, index: Option<usize> },

    #[error("custom intensity returned {value} at linear component {z}")]
    InvalidIntensity { z: f64, value: f64 },

    #[error("information matrix is singular")]
    SingularInformation,

    #[error("basis is not linearly equivariant under the map (residual {residual:.3e})")]
    NotEquivariant { residual: f64 },

    #[error("could not find a nonsingular sample of basis values")]
    DegenerateSample,

    #[error("rescaled parameter transform undefined: transformed intercept {intercept} is not positive")]
    RescaleUndefined { intercept: f64 },

    #[error("intercept-rescaled transforms require the first basis function to be constant 1")]
    MissingIntercept,

    #[error("point map is not axis aligned; the image of a box is not a box")]
    NonAxisAlignedImage,

    #[error("transform pairs have different parameter modes")]
    ModeMismatch,

    #[error("group closure exceeded {max_size} elements")]
    GroupTooLarge { max_size: usize },

    #[error("transformation does not map the region onto itself")]
    NotRegionPreserving,

    #[error("group structure violated: {0}")]
    NotAGroup(String),

    #[error("candidate set is not closed under the group; missing images {missing:?}")]
    CandidateSetNotClosed { missing: Vec<Vec<f64>> },

    #[error("orbit weights sum to {sum}, expected 1")]
    WeightSumViolation { sum: f64 },

    #[error("no convergence after {iterations} iterations (sensitivity gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("equivalence check failed: sensitivity {max_sensitivity} exceeds bound {bound} at {point:?}")]
    EquivalenceCheckFailed {
        max_sensitivity: f64,
        bound: f64,
        point: Vec<f64>,
    },

    #[error("operation requires {0}")]
    WrongModelShape(String),

    #[error("parameter outside its admissible region: {0}")]
    OutOfParameterRegion(String),

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("unsupported region: {0}")]
    UnsupportedRegion(String),

    #[error("parse error: {0}")]
    Parse(String),
}

fn fmt_index(index: Option<usize>) -> String {
    match index {
        Some(i) => format!(" at support point {i}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, DesignError>;
