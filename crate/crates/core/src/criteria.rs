//! Local D- and IMSE-criteria, sensitivity functions, equivalence checks and
//! efficiencies.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::design::Design;
use crate::error::{DesignError, Result};
use crate::linalg;
use crate::measure::WeightingMeasure;
use crate::model::{InfoMatrix, ModelSpec, ParameterVector};
use crate::region::Point;

/// Grid resolution per coordinate for equivalence checks.
pub const CHECK_GRID_PER_AXIS: usize = 101;
/// Maximum number of grid points for equivalence checks.
pub const CHECK_GRID_CAP: usize = 10_201;
/// Relative violation tolerance of the equivalence check.
pub const DEFAULT_SENSITIVITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum CriterionSpec {
    D,
    Imse { nu: WeightingMeasure },
}

impl CriterionSpec {
    pub fn imse(nu: WeightingMeasure) -> Self {
        CriterionSpec::Imse { nu }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CriterionSpec::D => "D",
            CriterionSpec::Imse { .. } => "IMSE",
        }
    }

    pub fn measure(&self) -> Option<&WeightingMeasure> {
        match self {
            CriterionSpec::D => None,
            CriterionSpec::Imse { nu } => Some(nu),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CriterionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<WeightingMeasure>,
}

impl Serialize for CriterionSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CriterionFile {
            kind: Some(self.name().to_string()),
            nu: self.measure().cloned(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CriterionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let file = CriterionFile::deserialize(d)?;
        match (file.kind.as_deref(), file.nu) {
            (Some("D"), None) => Ok(CriterionSpec::D),
            (Some("IMSE") | None, Some(nu)) => Ok(CriterionSpec::Imse { nu }),
            (Some("D"), Some(_)) => Err(D::Error::custom("D criterion takes no measure")),
            (Some("IMSE"), None) => Err(D::Error::custom("IMSE criterion needs a measure 'nu'")),
            (Some(other), _) => Err(D::Error::custom(format!("unknown criterion '{other}'"))),
            (None, None) => Err(D::Error::custom("criterion needs 'kind' or 'nu'")),
        }
    }
}

/// `det(M^-1)`, or `+inf` when `M` is singular.
pub fn d_value(m: &InfoMatrix) -> f64 {
    match linalg::pd_determinant(m.matrix()) {
        Some(det) => 1.0 / det,
        None => f64::INFINITY,
    }
}

/// `det(M)^(-1/p)`, or `+inf` when `M` is singular.
pub fn d_homogeneous(m: &InfoMatrix, p: usize) -> f64 {
    match linalg::pd_determinant(m.matrix()) {
        Some(det) => det.powf(-1.0 / p as f64),
        None => f64::INFINITY,
    }
}

/// `trace(V M^-1)`, or `+inf` when `M` is singular.
pub fn imse_from_matrices(v: &DMatrix<f64>, m: &InfoMatrix) -> f64 {
    match linalg::pd_inverse(m.matrix()) {
        Some(inv) => (v * inv).trace(),
        None => f64::INFINITY,
    }
}

pub fn imse_value(
    model: &ModelSpec,
    xi: &Design,
    beta: &ParameterVector,
    nu: &WeightingMeasure,
) -> Result<f64> {
    let m = model.design_info(xi, beta)?;
    let v = model.weight_matrix_v(beta, nu)?;
    Ok(imse_from_matrices(&v, &m))
}

/// Criterion value to be minimized: `det(M^-1)` for D, `trace(V M^-1)` for IMSE.
pub fn criterion_value(
    model: &ModelSpec,
    xi: &Design,
    beta: &ParameterVector,
    crit: &CriterionSpec,
) -> Result<f64> {
    match crit {
        CriterionSpec::D => Ok(d_value(&model.design_info(xi, beta)?)),
        CriterionSpec::Imse { nu } => imse_value(model, xi, beta, nu),
    }
}

/// Positively homogeneous criterion used for efficiencies: `det(M)^(-1/p)`
/// for D and the IMSE itself.
pub fn homogeneous_value(
    model: &ModelSpec,
    xi: &Design,
    beta: &ParameterVector,
    crit: &CriterionSpec,
) -> Result<f64> {
    match crit {
        CriterionSpec::D => Ok(d_homogeneous(&model.design_info(xi, beta)?, model.p())),
        CriterionSpec::Imse { nu } => imse_value(model, xi, beta, nu),
    }
}

/// Precomputed sensitivity function `x -> lambda(f'beta) f' A f` of a design
/// with its equivalence bound. `A = M^-1` and bound `p` for D;
/// `A = M^-1 V M^-1` and bound `trace(V M^-1)` for IMSE.
#[derive(Debug, Clone)]
pub struct Sensitivity<'a> {
    model: &'a ModelSpec,
    beta: ParameterVector,
    a: DMatrix<f64>,
    bound: f64,
}

impl<'a> Sensitivity<'a> {
    pub fn new(
        model: &'a ModelSpec,
        xi: &Design,
        beta: &ParameterVector,
        crit: &CriterionSpec,
    ) -> Result<Self> {
        let m = model.design_info(xi, beta)?;
        let minv = linalg::pd_inverse(m.matrix()).ok_or(DesignError::SingularInformation)?;
        let (a, bound) = match crit {
            CriterionSpec::D => (minv, model.p() as f64),
            CriterionSpec::Imse { nu } => {
                let v = model.weight_matrix_v(beta, nu)?;
                let bound = (&v * &minv).trace();
                (linalg::symmetrize(&(&minv * v * &minv)), bound)
            }
        };
        Ok(Sensitivity {
            model,
            beta: beta.clone(),
            a,
            bound,
        })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn at(&self, x: &[f64]) -> Result<f64> {
        let (f, lambda) = self.model.basis_and_intensity(x, &self.beta)?;
        Ok(lambda * linalg::quad_form(&self.a, &f))
    }

    fn at_with(&self, x: &[f64], buf: &mut Vec<f64>) -> Result<f64> {
        if !self.model.region().contains(x) {
            return Err(DesignError::OutOfRegion { point: x.to_vec() });
        }
        self.model.basis_into(x, buf);
        let z: f64 = buf.iter().zip(self.beta.as_slice()).map(|(f, b)| f * b).sum();
        let lambda = self.model.intensity(z)?;
        let p = buf.len();
        let mut q = 0.0;
        for i in 0..p {
            let row: f64 = buf.iter().enumerate().map(|(j, v)| self.a[(i, j)] * v).sum();
            q += buf[i] * row;
        }
        Ok(lambda * q)
    }

    /// Largest sensitivity over `points` with its location; ties go to the
    /// earliest point.
    pub fn max_over(&self, points: &[Point]) -> Result<(f64, usize)> {
        let values: Vec<f64> = points
            .par_iter()
            .map_init(Vec::new, |buf, x| self.at_with(x, buf))
            .collect::<Result<_>>()?;
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, v) in values.into_iter().enumerate() {
            if v > best.0 {
                best = (v, i);
            }
        }
        Ok(best)
    }
}

/// Result of an equivalence check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub max_sensitivity: f64,
    pub bound: f64,
    pub point: Point,
    pub passed: bool,
}

impl Certificate {
    /// Relative excess of the largest sensitivity over the bound.
    pub fn gap(&self) -> f64 {
        (self.max_sensitivity - self.bound) / self.bound
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(DesignError::EquivalenceCheckFailed {
                max_sensitivity: self.max_sensitivity,
                bound: self.bound,
                point: self.point,
            })
        }
    }
}

/// Equivalence check on given points: passes when the largest sensitivity
/// is at most `bound * (1 + tol)`.
pub fn equivalence_check_on(
    model: &ModelSpec,
    xi: &Design,
    beta: &ParameterVector,
    crit: &CriterionSpec,
    points: &[Point],
    tol: f64,
) -> Result<Certificate> {
    if points.is_empty() {
        return Err(DesignError::EmptyGrid);
    }
    let sens = Sensitivity::new(model, xi, beta, crit)?;
    let (max, idx) = sens.max_over(points)?;
    Ok(Certificate {
        max_sensitivity: max,
        bound: sens.bound,
        point: points[idx].clone(),
        passed: max <= sens.bound * (1.0 + tol),
    })
}

/// Points used to certify optimality over the whole region: extremal points
/// plus a uniform grid.
pub fn region_check_points(model: &ModelSpec) -> Vec<Point> {
    model
        .region()
        .check_points(CHECK_GRID_PER_AXIS, CHECK_GRID_CAP)
}

/// Equivalence check over the region's extremal points and check grid.
pub fn equivalence_check(
    model: &ModelSpec,
    xi: &Design,
    beta: &ParameterVector,
    crit: &CriterionSpec,
    tol: f64,
) -> Result<Certificate> {
    equivalence_check_on(model, xi, beta, crit, &region_check_points(model), tol)
}

pub fn d_sensitivity(model: &ModelSpec, xi: &Design, beta: &ParameterVector, x: &[f64]) -> Result<f64> {
    Sensitivity::new(model, xi, beta, &CriterionSpec::D)?.at(x)
}

pub fn imse_sensitivity(
    model: &ModelSpec,
    xi: &Design,
    beta: &ParameterVector,
    nu: &WeightingMeasure,
    x: &[f64],
) -> Result<f64> {
    Sensitivity::new(model, xi, beta, &CriterionSpec::imse(nu.clone()))?.at(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub value: f64,
    pub criterion: CriterionSpec,
    pub beta: ParameterVector,
    pub reference_design: Design,
}

/// `Phi(xi*) / Phi(xi)` with the homogeneous criterion. A singular `xi` has
/// efficiency zero; a singular reference is an error.
pub fn efficiency(
    model: &ModelSpec,
    xi: &Design,
    beta: &ParameterVector,
    crit: &CriterionSpec,
    xi_opt: &Design,
) -> Result<EfficiencyReport> {
    let reference = homogeneous_value(model, xi_opt, beta, crit)?;
    if !reference.is_finite() {
        return Err(DesignError::SingularInformation);
    }
    let value = homogeneous_value(model, xi, beta, crit)?;
    Ok(EfficiencyReport {
        value: if value.is_finite() { reference / value } else { 0.0 },
        criterion: crit.clone(),
        beta: beta.clone(),
        reference_design: xi_opt.clone(),
    })
}

/// Efficiencies of `xi` at each parameter against the matching local optimum.
pub fn efficiencies(
    model: &ModelSpec,
    xi: &Design,
    crit: &CriterionSpec,
    params: &[ParameterVector],
    local_optima: &[Design],
) -> Result<Vec<f64>> {
    if params.is_empty() {
        return Err(DesignError::EmptyGrid);
    }
    if params.len() != local_optima.len() {
        return Err(DesignError::DimensionMismatch {
            expected: params.len(),
            got: local_optima.len(),
        });
    }
    params
        .par_iter()
        .zip(local_optima.par_iter())
        .map(|(beta, opt)| efficiency(model, xi, beta, crit, opt).map(|r| r.value))
        .collect()
}

/// `sup_beta Phi_beta(xi) / Phi_beta(xi*_beta)` over a finite parameter set,
/// the reciprocal of the minimal efficiency.
pub fn maximin_objective(
    model: &ModelSpec,
    xi: &Design,
    crit: &CriterionSpec,
    params: &[ParameterVector],
    local_optima: &[Design],
) -> Result<f64> {
    let effs = efficiencies(model, xi, crit, params, local_optima)?;
    let min = effs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if min > 0.0 { 1.0 / min } else { f64::INFINITY })
}
