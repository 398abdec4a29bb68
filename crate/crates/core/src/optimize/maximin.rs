//! Maximin efficient designs within one-parameter families of invariant
//! designs.

use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{self, CriterionSpec};
use crate::design::Design;
use crate::error::{DesignError, Result};
use crate::invariance::{generate_group, orbits, OrbitPartition, DEFAULT_MAX_GROUP_SIZE};
use crate::model::{ModelSpec, ParameterVector};
use crate::optimize::closed_form::equal_slopes_closed_form;
use crate::optimize::weights::{local_opt_design, OptimizeOptions};
use crate::transforms::{ParamMode, TransformPair};

/// Interval tolerance of the golden-section search.
pub const GOLDEN_TOL: f64 = 1e-8;

/// Invariant designs on two orbits of sizes `s1, s2` with per-point weights
/// `w` and `(1 - s1 w) / s2`, `0 < w < 1/s1`.
#[derive(Debug, Clone)]
pub struct InvariantFamily {
    partition: OrbitPartition,
}

impl InvariantFamily {
    pub fn new(partition: OrbitPartition) -> Result<Self> {
        if partition.len() != 2 {
            return Err(DesignError::WrongModelShape(format!(
                "a family with two orbits, got {}",
                partition.len()
            )));
        }
        Ok(InvariantFamily { partition })
    }

    pub fn partition(&self) -> &OrbitPartition {
        &self.partition
    }

    /// Upper end of the admissible range of `w`.
    pub fn upper(&self) -> f64 {
        1.0 / self.partition.orbits[0].len() as f64
    }

    pub fn design(&self, w: f64) -> Result<Design> {
        let s = self.partition.sizes();
        let w2 = (1.0 - s[0] as f64 * w) / s[1] as f64;
        self.partition.invariant_design(&[w, w2.max(0.0)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximinResult {
    pub design: Design,
    pub w: f64,
    pub min_efficiency: f64,
    /// Grid index of the smallest efficiency, `None` when the limit term is
    /// the smallest.
    pub worst_index: Option<usize>,
    /// The worst grid parameter is the one of largest magnitude, so the
    /// infimum may lie beyond the grid.
    pub at_grid_edge: bool,
    /// Efficiencies of the returned design on the grid.
    pub efficiencies: Vec<f64>,
}

/// Efficiency as a function of the family parameter over a fixed grid, with
/// cached reference values of the local optima.
pub struct FamilyObjective<'a> {
    model: &'a ModelSpec,
    crit: &'a CriterionSpec,
    family: &'a InvariantFamily,
    params: &'a [ParameterVector],
    reference: Vec<f64>,
    limit: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
}

impl<'a> FamilyObjective<'a> {
    pub fn new(
        model: &'a ModelSpec,
        crit: &'a CriterionSpec,
        family: &'a InvariantFamily,
        params: &'a [ParameterVector],
        local_optima: &[Design],
        limit: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
    ) -> Result<Self> {
        if params.is_empty() {
            return Err(DesignError::EmptyGrid);
        }
        if params.len() != local_optima.len() {
            return Err(DesignError::DimensionMismatch {
                expected: params.len(),
                got: local_optima.len(),
            });
        }
        let reference = params
            .par_iter()
            .zip(local_optima.par_iter())
            .map(|(b, d)| criteria::homogeneous_value(model, d, b, crit))
            .collect::<Result<Vec<_>>>()?;
        if reference.iter().any(|r| !r.is_finite()) {
            return Err(DesignError::SingularInformation);
        }
        Ok(FamilyObjective {
            model,
            crit,
            family,
            params,
            reference,
            limit,
        })
    }

    /// Efficiencies of the family member at `w` on the grid.
    pub fn efficiencies(&self, w: f64) -> Result<Vec<f64>> {
        let xi = self.family.design(w)?;
        self.params
            .par_iter()
            .zip(self.reference.par_iter())
            .map(|(b, r)| {
                let v = criteria::homogeneous_value(self.model, &xi, b, self.crit)?;
                Ok(if v.is_finite() { r / v } else { 0.0 })
            })
            .collect()
    }

    /// Smallest efficiency over the grid and the limit term, with the index
    /// of the worst grid point (`None` when the limit is smaller).
    pub fn min_efficiency(&self, w: f64) -> Result<(f64, Option<usize>)> {
        let effs = self.efficiencies(w)?;
        let mut best = (f64::INFINITY, None);
        for (i, e) in effs.iter().enumerate() {
            if *e < best.0 {
                best = (*e, Some(i));
            }
        }
        if let Some(limit) = self.limit {
            let l = limit(w);
            if l < best.0 {
                best = (l, None);
            }
        }
        Ok(best)
    }
}

/// Maximizes a function that is unimodal on `(lo, hi)` by golden sections.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Maximin efficient member of an invariant family over a parameter grid.
/// Local optima are computed numerically unless supplied. `limit` adds an
/// efficiency term for parameters beyond the grid.
pub fn maximin_invariant(
    model: &ModelSpec,
    crit: &CriterionSpec,
    family: &InvariantFamily,
    param_grid: &[ParameterVector],
    local_optima: Option<&[Design]>,
    limit: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    opts: &OptimizeOptions,
) -> Result<MaximinResult> {
    if param_grid.is_empty() {
        return Err(DesignError::EmptyGrid);
    }
    let computed;
    let optima = match local_optima {
        Some(o) => o,
        None => {
            computed = param_grid
                .par_iter()
                .map(|b| local_opt_design(model, b, crit, None, opts).map(|r| r.design))
                .collect::<Result<Vec<_>>>()?;
            &computed
        }
    };
    let objective = FamilyObjective::new(model, crit, family, param_grid, optima, limit)?;
    let w = golden_section_max(|w| Ok(objective.min_efficiency(w)?.0), 0.0, family.upper(), GOLDEN_TOL)?;
    evaluate_member(&objective, param_grid, w)
}

/// Efficiency summary of the family member at a fixed `w`.
pub fn evaluate_member(
    objective: &FamilyObjective<'_>,
    param_grid: &[ParameterVector],
    w: f64,
) -> Result<MaximinResult> {
    let (min_efficiency, worst_index) = objective.min_efficiency(w)?;
    let edge = largest_parameter(param_grid);
    Ok(MaximinResult {
        design: objective.family.design(w)?,
        w,
        min_efficiency,
        worst_index,
        at_grid_edge: worst_index == Some(edge),
        efficiencies: objective.efficiencies(w)?,
    })
}

fn largest_parameter(grid: &[ParameterVector]) -> usize {
    let size = |b: &ParameterVector| b.reduced().iter().fold(0.0f64, |m, g| m.max(g.abs()));
    (0..grid.len())
        .max_by(|&a, &b| size(&grid[a]).total_cmp(&size(&grid[b])))
        .unwrap_or(0)
}

/// Reduced slopes `gamma` for the equal-slopes family: log-spaced towards
/// `-1/2` from above, zero, and log-spaced over `[1e-4, 1e4]`.
pub fn equal_slopes_gamma_grid() -> Vec<f64> {
    let mut grid = Vec::new();
    let top = 0.5f64.log10();
    let mut t = -4.0;
    while t < top - 1e-12 {
        grid.push(-0.5 + 10f64.powf(t));
        t += 0.01;
    }
    grid.push(0.0);
    for k in 0..=800 {
        grid.push(10f64.powf(-4.0 + 0.01 * k as f64));
    }
    grid
}

/// `(1, gamma, gamma)` for each `gamma`.
pub fn equal_slopes_params(gammas: &[f64]) -> Vec<ParameterVector> {
    gammas
        .iter()
        .map(|&g| ParameterVector::new(vec![1.0, g, g]))
        .collect()
}

/// Efficiency of the equal-slopes invariant design as `gamma -> infinity`:
/// the cube root of `27 w (1 - 2w)(1 - w) / 4`.
pub fn equal_slopes_limit_efficiency(w: f64) -> f64 {
    (27.0 * w * (1.0 - 2.0 * w) * (1.0 - w) / 4.0).max(0.0).cbrt()
}

/// Cubed D-efficiency of the equal-slopes invariant design for `gamma >= 1`.
pub fn equal_slopes_efficiency_cubed(w: f64, gamma: f64) -> f64 {
    27.0 * w * (1.0 - 2.0 * w) * ((1.0 + gamma).powi(2) + gamma * gamma * (1.0 - 2.0 * w))
        / (2.0 * (1.0 + 2.0 * gamma).powi(2))
}

/// Family with weight `w` on `(0,0), (1,1)` and `1/2 - w` on `(0,1), (1,0)`,
/// the designs invariant under the point reflection through the centre and
/// the coordinate swap.
pub fn equal_slopes_family(model: &ModelSpec) -> Result<InvariantFamily> {
    let gens = [
        TransformPair::named(model, "reflect:1,2", ParamMode::Linear)?,
        TransformPair::named(model, "swap:1,2", ParamMode::Linear)?,
    ];
    let group = generate_group(model, &gens, DEFAULT_MAX_GROUP_SIZE)?;
    InvariantFamily::new(orbits(&group, &model.region().extremal_points())?)
}

/// D-maximin design in the equal-slopes family over `gammas`, using the
/// closed-form local optima. `include_limit` adds the `gamma -> infinity`
/// term; `fixed_w` evaluates one member instead of optimizing.
pub fn equal_slopes_maximin(
    gammas: &[f64],
    include_limit: bool,
    fixed_w: Option<f64>,
) -> Result<MaximinResult> {
    let model = ModelSpec::two_factor();
    let family = equal_slopes_family(&model)?;
    let params = equal_slopes_params(gammas);
    let optima = gammas
        .iter()
        .map(|&g| equal_slopes_closed_form(g))
        .collect::<Result<Vec<_>>>()?;
    let limit_fn = equal_slopes_limit_efficiency;
    let limit: Option<&(dyn Fn(f64) -> f64 + Sync)> = if include_limit { Some(&limit_fn) } else { None };
    let crit = CriterionSpec::D;
    let objective = FamilyObjective::new(&model, &crit, &family, &params, &optima, limit)?;
    let w = match fixed_w {
        Some(w) => w,
        None => golden_section_max(
            |w| Ok(objective.min_efficiency(w)?.0),
            0.0,
            family.upper(),
            GOLDEN_TOL,
        )?,
    };
    evaluate_member(&objective, &params, w)
}
