//! Closed-form optimal designs for the one- and two-factor gamma models and
//! the classification of minimally supported D-optimal designs.
//!
//! Two-factor vertices are named `x1 = (0,0)`, `x2 = (1,0)`, `x3 = (0,1)`,
//! `x4 = (1,1)`; designs are returned with support in lexicographic order.

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{DesignError, Result};
use crate::model::ParameterVector;
use crate::region::Point;

pub const X1: [f64; 2] = [0.0, 0.0];
pub const X2: [f64; 2] = [1.0, 0.0];
pub const X3: [f64; 2] = [0.0, 1.0];
pub const X4: [f64; 2] = [1.0, 1.0];

const BOUNDARY_TOL: f64 = 1e-12;

/// Weighting measures with a closed-form IMSE-optimal design on `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuVariant {
    /// Uniform on `[0, 1]`.
    UniformContinuous,
    /// Equal masses at 0 and 1.
    UniformEndpoints,
    /// Unit mass at 1/2.
    MidpointMass,
}

impl NuVariant {
    pub fn measure(self) -> crate::measure::WeightingMeasure {
        use crate::measure::WeightingMeasure;
        match self {
            NuVariant::UniformContinuous => WeightingMeasure::uniform(),
            NuVariant::UniformEndpoints => {
                WeightingMeasure::discrete_uniform(vec![vec![0.0], vec![1.0]])
            }
            NuVariant::MidpointMass => WeightingMeasure::point_mass(vec![0.5]),
        }
    }
}

/// IMSE-optimal design on the endpoints of `[0, 1]` for `(1, x)`.
pub fn prop1_closed_form(beta: &ParameterVector, variant: NuVariant) -> Result<Design> {
    let [b0, b1] = beta.as_slice() else {
        return Err(DesignError::WrongModelShape(
            "the one-factor model with parameter (beta_0, beta_1)".into(),
        ));
    };
    let (b0, b1) = (*b0, *b1);
    if !(b0 > 0.0 && b0 + b1 > 0.0) {
        return Err(DesignError::OutOfParameterRegion(
            "beta_0 > 0 and beta_0 + beta_1 > 0 required".into(),
        ));
    }
    let s = 2.0 * b0 + b1;
    let w0 = match variant {
        NuVariant::UniformContinuous => 0.5,
        NuVariant::UniformEndpoints => (b0 + b1) / s,
        NuVariant::MidpointMass => b0 / s,
    };
    Design::new(vec![vec![0.0], vec![1.0]], vec![w0, 1.0 - w0])
}

/// Optimal `w` of the invariant design with `w` at `x1, x2` and `1/2 - w`
/// at `x3, x4` when `beta_1 = 0`, as a function of `gamma_2 = beta_2/beta_0`.
pub fn w_star_beta1_zero(gamma2: f64) -> Result<f64> {
    if !(gamma2 > -1.0 && gamma2.is_finite()) {
        return Err(DesignError::OutOfParameterRegion(format!(
            "gamma_2 = {gamma2} must exceed -1"
        )));
    }
    if gamma2 == 0.0 {
        return Ok(0.25);
    }
    // stationary point of w^2 (1/2 - w) + r w (1/2 - w)^2 with r = (1 + gamma_2)^-2:
    // 3u w^2 - (u - 1) w - 1/4 = 0, u = gamma_2 (gamma_2 + 2), root taken in
    // the cancellation-free form
    let u = gamma2 * (gamma2 + 2.0);
    Ok(0.5 / ((u * u + u + 1.0).sqrt() + 1.0 - u))
}

/// The invariant two-factor design `w` at `x1, x2`, `1/2 - w` at `x3, x4`.
pub fn g3_invariant_design(w: f64) -> Result<Design> {
    Design::from_atoms(vec![
        (X1.to_vec(), w),
        (X3.to_vec(), 0.5 - w),
        (X2.to_vec(), w),
        (X4.to_vec(), 0.5 - w),
    ])
}

/// The invariant two-factor design `w` at `x1, x4`, `1/2 - w` at `x2, x3`.
pub fn equal_slopes_invariant_design(w: f64) -> Result<Design> {
    Design::from_atoms(vec![
        (X1.to_vec(), w),
        (X3.to_vec(), 0.5 - w),
        (X2.to_vec(), 0.5 - w),
        (X4.to_vec(), w),
    ])
}

/// Locally D-optimal design at `beta = (beta_0, beta, beta)` with
/// `gamma = beta / beta_0 > -1/2`.
pub fn equal_slopes_closed_form(gamma: f64) -> Result<Design> {
    if !(gamma > -0.5 && gamma.is_finite()) {
        return Err(DesignError::OutOfParameterRegion(format!(
            "gamma = {gamma} must exceed -1/2"
        )));
    }
    let third = 1.0 / 3.0;
    let (w1, w2, w3) = if gamma >= 1.0 {
        (third, third, 0.0)
    } else if gamma > -third {
        let d = 4.0 * (2.0 * gamma + 1.0);
        ((3.0 * gamma + 1.0) / d, (gamma + 1.0).powi(2) / d, (1.0 - gamma) / 4.0)
    } else {
        (0.0, third, third)
    };
    Design::from_atoms(vec![
        (X1.to_vec(), w1),
        (X3.to_vec(), w2),
        (X2.to_vec(), w2),
        (X4.to_vec(), w3),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    B1,
    B2,
    B3,
    B4,
    Interior,
}

impl RegionLabel {
    /// Support of the minimally supported D-optimal design, if any.
    pub fn support(self) -> Option<[[f64; 2]; 3]> {
        match self {
            RegionLabel::B1 => Some([X1, X3, X2]),
            RegionLabel::B2 => Some([X3, X2, X4]),
            RegionLabel::B3 => Some([X1, X2, X4]),
            RegionLabel::B4 => Some([X1, X3, X4]),
            RegionLabel::Interior => None,
        }
    }

    /// Equal weights 1/3 on the minimal support.
    pub fn minimal_design(self) -> Option<Design> {
        let support: Vec<Point> = self.support()?.iter().map(|x| x.to_vec()).collect();
        Design::uniform(support).ok()
    }
}

/// Region of the reduced parameter `(gamma_1, gamma_2)` in which a
/// minimally supported design is D-optimal; ties go to the lower index.
/// The regions are closed and boundary values within rounding of zero
/// count as on the boundary.
pub fn classify_region(gamma1: f64, gamma2: f64) -> Result<RegionLabel> {
    if !(gamma1 > -1.0 && gamma2 > -1.0 && gamma1 + gamma2 > -1.0)
        || !gamma1.is_finite()
        || !gamma2.is_finite()
    {
        return Err(DesignError::OutOfParameterRegion(format!(
            "({gamma1}, {gamma2}) outside gamma_1 > -1, gamma_2 > -1, gamma_1 + gamma_2 > -1"
        )));
    }
    let prod = gamma1 * gamma2;
    let eps = BOUNDARY_TOL * (1.0 + prod.abs() + (gamma1 + gamma2).powi(2));
    let label = if 1.0 - prod <= eps {
        RegionLabel::B1
    } else if (1.0 + gamma1 + gamma2).powi(2) - prod <= eps {
        RegionLabel::B2
    } else if (1.0 + gamma1).powi(2) + prod <= eps {
        RegionLabel::B3
    } else if (1.0 + gamma2).powi(2) + prod <= eps {
        RegionLabel::B4
    } else {
        RegionLabel::Interior
    };
    Ok(label)
}
