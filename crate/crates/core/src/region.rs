//! Experimental regions: axis-aligned boxes or explicit finite candidate sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};

/// A covariate vector.
pub type Point = Vec<f64>;

/// Tolerance for region membership on each coordinate.
pub const REGION_TOL: f64 = 1e-12;

/// Max-norm distance under which two points are treated as the same point.
pub const POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Region {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Finite { points: Vec<Point> },
}

impl Region {
    pub fn unit_box(dim: usize) -> Self {
        Region::Box {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let region = Region::Box { lower, upper };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(DesignError::InvalidModel(
                        "box bounds must be nonempty and of equal length".into(),
                    ));
                }
                for (l, u) in lower.iter().zip(upper) {
                    if !(l.is_finite() && u.is_finite() && l < u) {
                        return Err(DesignError::InvalidModel(format!(
                            "degenerate box side [{l}, {u}]"
                        )));
                    }
                }
                Ok(())
            }
            Region::Finite { points } => {
                let Some(first) = points.first() else {
                    return Err(DesignError::InvalidModel("empty candidate list".into()));
                };
                let dim = first.len();
                if dim == 0 || points.iter().any(|p| p.len() != dim) {
                    return Err(DesignError::InvalidModel(
                        "candidate points must share a positive dimension".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lower, .. } => lower.len(),
            Region::Finite { points } => points[0].len(),
        }
    }

    pub fn as_box(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Region::Box { lower, upper } => Some((lower, upper)),
            Region::Finite { .. } => None,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            Region::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(xi, (l, u))| *xi >= l - REGION_TOL && *xi <= u + REGION_TOL),
            Region::Finite { points } => points.iter().any(|p| max_dist(p, x) <= POINT_TOL),
        }
    }

    /// Vertices of a box in lexicographic order (first coordinate most
    /// significant), or all candidates of a finite region.
    pub fn extremal_points(&self) -> Vec<Point> {
        match self {
            Region::Box { lower, upper } => {
                let d = lower.len();
                (0..1usize << d)
                    .map(|k| {
                        (0..d)
                            .map(|j| {
                                if (k >> (d - 1 - j)) & 1 == 1 {
                                    upper[j]
                                } else {
                                    lower[j]
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
            Region::Finite { points } => points.clone(),
        }
    }

    /// Uniform grid with `per_axis` points per coordinate, reduced so that the
    /// total does not exceed `cap`. Finite regions return their candidates.
    pub fn grid(&self, per_axis: usize, cap: usize) -> Vec<Point> {
        match self {
            Region::Box { lower, upper } => {
                let d = lower.len();
                let mut n = per_axis.max(2);
                while n > 2 && n.checked_pow(d as u32).is_none_or(|t| t > cap) {
                    n -= 1;
                }
                let total = n.pow(d as u32);
                let mut out = Vec::with_capacity(total);
                let mut idx = vec![0usize; d];
                for _ in 0..total {
                    out.push(
                        idx.iter()
                            .enumerate()
                            .map(|(j, &k)| {
                                lower[j] + (upper[j] - lower[j]) * k as f64 / (n - 1) as f64
                            })
                            .collect(),
                    );
                    for j in (0..d).rev() {
                        idx[j] += 1;
                        if idx[j] < n {
                            break;
                        }
                        idx[j] = 0;
                    }
                }
                out
            }
            Region::Finite { points } => points.clone(),
        }
    }

    /// Extremal points followed by the uniform grid, without duplicates.
    pub fn check_points(&self, per_axis: usize, cap: usize) -> Vec<Point> {
        let mut pts = self.extremal_points();
        for g in self.grid(per_axis, cap) {
            if !pts.iter().any(|p| max_dist(p, &g) <= POINT_TOL) {
                pts.push(g);
            }
        }
        pts
    }

    /// Random points drawn uniformly from the region (candidates for finite
    /// regions).
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Point> {
        match self {
            Region::Box { lower, upper } => (0..n)
                .map(|_| {
                    lower
                        .iter()
                        .zip(upper)
                        .map(|(l, u)| rng.gen_range(*l..=*u))
                        .collect()
                })
                .collect(),
            Region::Finite { points } => (0..n)
                .map(|_| points[rng.gen_range(0..points.len())].clone())
                .collect(),
        }
    }

    pub fn approx_eq(&self, other: &Region, tol: f64) -> bool {
        match (self, other) {
            (Region::Box { lower: l1, upper: u1 }, Region::Box { lower: l2, upper: u2 }) => {
                l1.len() == l2.len()
                    && max_dist(l1, l2) <= tol
                    && max_dist(u1, u2) <= tol
            }
            (Region::Finite { points: a }, Region::Finite { points: b }) => {
                a.len() == b.len()
                    && a.iter().all(|p| b.iter().any(|q| max_dist(p, q) <= tol))
                    && b.iter().all(|p| a.iter().any(|q| max_dist(p, q) <= tol))
            }
            _ => false,
        }
    }
}

pub fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
