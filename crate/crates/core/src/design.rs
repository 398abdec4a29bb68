//! Approximate designs: finitely supported probability measures on the region.

use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};
use crate::region::{max_dist, Point, Region, POINT_TOL};

/// Tolerance on the total mass of a design.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Mutually distinct support points with positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDesign")]
pub struct Design {
    support: Vec<Point>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDesign {
    support: Vec<Point>,
    weights: Vec<f64>,
}

impl TryFrom<RawDesign> for Design {
    type Error = DesignError;

    fn try_from(raw: RawDesign) -> Result<Self> {
        Design::new(raw.support, raw.weights)
    }
}

impl Design {
    pub fn new(support: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(DesignError::InvalidDesign("empty support".into()));
        }
        if support.len() != weights.len() {
            return Err(DesignError::InvalidDesign(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        let dim = support[0].len();
        if dim == 0 || support.iter().any(|x| x.len() != dim) {
            return Err(DesignError::InvalidDesign(
                "support points must share a positive dimension".into(),
            ));
        }
        if support.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DesignError::InvalidDesign("non-finite coordinate".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(DesignError::InvalidDesign(format!(
                "weights must be positive, found {w}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(DesignError::InvalidDesign(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        for i in 0..support.len() {
            for j in 0..i {
                if max_dist(&support[i], &support[j]) <= POINT_TOL {
                    return Err(DesignError::InvalidDesign(format!(
                        "support points {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(Design { support, weights })
    }

    /// Builds a design from weighted atoms: coincident points are merged
    /// (first occurrence keeps its position), zero weights are dropped and
    /// the total mass is renormalized to one.
    pub fn from_atoms<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Point, f64)>,
    {
        let mut support: Vec<Point> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (x, w) in atoms {
            if w < 0.0 || !w.is_finite() {
                return Err(DesignError::InvalidDesign(format!("invalid atom weight {w}")));
            }
            if w == 0.0 {
                continue;
            }
            match support.iter().position(|s| max_dist(s, &x) <= POINT_TOL) {
                Some(k) => weights[k] += w,
                None => {
                    support.push(x);
                    weights.push(w);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(DesignError::InvalidDesign("no positive mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Design::new(support, weights)
    }

    pub fn one_point(x: Point) -> Self {
        Design {
            support: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn uniform(support: Vec<Point>) -> Result<Self> {
        let n = support.len();
        Design::new(support, vec![1.0 / n as f64; n])
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.support.iter().zip(self.weights.iter().copied())
    }

    /// Mass at `x` (zero when `x` is not a support point).
    pub fn weight_at(&self, x: &[f64]) -> f64 {
        self.atoms()
            .filter(|(s, _)| max_dist(s, x) <= POINT_TOL)
            .fold(0.0, |acc, (_, w)| acc + w)
    }

    /// Weights of this design on an ordered list of points, zero where absent.
    pub fn weights_on(&self, points: &[Point]) -> Vec<f64> {
        points.iter().map(|p| self.weight_at(p)).collect()
    }

    /// Same measure with support sorted lexicographically.
    pub fn sorted(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.support[a]
                .iter()
                .zip(&self.support[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Design {
            support: idx.iter().map(|&i| self.support[i].clone()).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Max-norm of the weight difference between two designs as measures.
    pub fn distance(&self, other: &Design) -> f64 {
        let mut points: Vec<Point> = self.support.clone();
        for p in &other.support {
            if !points.iter().any(|q| max_dist(p, q) <= POINT_TOL) {
                points.push(p.clone());
            }
        }
        points
            .iter()
            .map(|p| (self.weight_at(p) - other.weight_at(p)).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_in_region(&self, region: &Region) -> Result<()> {
        if self.dim() != region.dim() {
            return Err(DesignError::DimensionMismatch {
                expected: region.dim(),
                got: self.dim(),
            });
        }
        match self.support.iter().find(|x| !region.contains(x)) {
            Some(x) => Err(DesignError::OutOfRegion { point: x.clone() }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_weights() {
        assert!(Design::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.4]).is_err());
        assert!(Design::new(vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]).is_err());
        assert!(Design::new(vec![vec![0.0]], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn rejects_coincident_support() {
        let err = Design::new(vec![vec![0.0], vec![1e-10]], vec![0.5, 0.5]);
        assert!(matches!(err, Err(DesignError::InvalidDesign(_))));
    }

    #[test]
    fn from_atoms_merges_and_normalizes() {
        let d = Design::from_atoms(vec![
            (vec![0.0], 1.0),
            (vec![1.0], 1.0),
            (vec![1e-12], 2.0),
            (vec![0.5], 0.0),
        ])
        .unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.weight_at(&[0.0]) - 0.75).abs() < 1e-15);
        assert_eq!(d.weight_at(&[0.5]), 0.0);
    }

    #[test]
    fn sorted_orders_lexicographically() {
        let d = Design::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap()
        .sorted();
        assert_eq!(d.support()[0], vec![0.0, 0.0]);
        assert_eq!(d.support()[2], vec![1.0, 0.0]);
        assert_eq!(d.weights(), &[0.5, 0.3, 0.2]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let d = Design::new(vec![vec![0.1], vec![0.7]], vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: Design = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
        let bad = r#"{"support":[[0.0],[1.0]],"weights":[0.5,0.6]}"#;
        assert!(serde_json::from_str::<Design>(bad).is_err());
    }
}
