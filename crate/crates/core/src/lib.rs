//! Locally optimal and maximin efficient approximate designs for gamma
//! generalized linear models with inverse link.
//!
//! The crate covers information matrices and criteria, equivariant transfer of
//! designs between regions and parameters, reduction by finite symmetry
//! groups, and numerical optimization of design weights.

pub mod criteria;
pub mod design;
pub mod error;
pub mod invariance;
pub mod linalg;
pub mod measure;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod region;
pub mod transforms;

pub use design::Design;
pub use error::{DesignError, Result};
pub use measure::WeightingMeasure;
pub use model::{Basis, InfoMatrix, Intensity, ModelSpec, ParameterVector};
pub use region::{Point, Region};
pub use criteria::CriterionSpec;
pub use transforms::{AffinePointMap, ParamMode, TransformPair};
