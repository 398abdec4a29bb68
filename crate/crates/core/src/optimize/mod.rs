//! Locally optimal designs, closed forms and maximin search.

pub mod closed_form;
pub mod maximin;
pub mod weights;

pub use closed_form::{
    classify_region, equal_slopes_closed_form, prop1_closed_form, w_star_beta1_zero, NuVariant,
    RegionLabel,
};
pub use maximin::{maximin_invariant, InvariantFamily, MaximinResult};
pub use weights::{local_opt_design, optimal_weights_fixed_support, OptimizationResult, OptimizeOptions};
