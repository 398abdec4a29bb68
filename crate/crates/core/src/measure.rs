use serde::{Deserialize, Serialize};

use crate::design::WEIGHT_SUM_TOL;
use crate::error::{DesignError, Result};
use crate::region::{Point, Region};

/// Standardized measure used to average prediction variance in the IMSE
/// criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightingMeasure {
    /// Atoms with positive weights summing to one.
    Discrete { points: Vec<Point>, weights: Vec<f64> },
    /// Uniform probability on a box: the given bounds, or the model region
    /// when absent.
    Uniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<Vec<f64>>,
    },
}

impl WeightingMeasure {
    /// Uniform measure over whatever region the model carries.
    pub fn uniform() -> Self {
        WeightingMeasure::Uniform {
            lower: None,
            upper: None,
        }
    }

    pub fn uniform_on(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        WeightingMeasure::Uniform {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn point_mass(x: Point) -> Self {
        WeightingMeasure::Discrete {
            points: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn discrete_uniform(points: Vec<Point>) -> Self {
        let n = points.len();
        WeightingMeasure::Discrete {
            points,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Checks weights and that all mass lies in `region`.
    pub fn validate(&self, region: &Region) -> Result<()> {
        match self {
            WeightingMeasure::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(DesignError::InvalidMeasure(
                        "points and weights must be nonempty and of equal length".into(),
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(DesignError::InvalidMeasure("weights must be positive".into()));
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(DesignError::InvalidMeasure(format!(
                        "weights sum to {sum}, expected 1"
                    )));
                }
                if let Some(p) = points.iter().find(|p| !region.contains(p)) {
                    return Err(DesignError::OutOfRegion { point: p.clone() });
                }
                Ok(())
            }
            WeightingMeasure::Uniform { .. } => {
                let (lower, upper) = self.uniform_bounds(region)?;
                for (l, u) in lower.iter().zip(&upper) {
                    if l.partial_cmp(u) != Some(std::cmp::Ordering::Less) {
                        return Err(DesignError::InvalidMeasure(format!(
                            "degenerate box side [{l}, {u}]"
                        )));
                    }
                }
                for corner in (Region::Box { lower, upper }).extremal_points() {
                    if !region.contains(&corner) {
                        return Err(DesignError::OutOfRegion { point: corner });
                    }
                }
                Ok(())
            }
        }
    }

    /// Integration box for a uniform measure. Finite regions carry no
    /// Lebesgue measure and are rejected.
    pub fn uniform_bounds(&self, region: &Region) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            WeightingMeasure::Uniform {
                lower: Some(l),
                upper: Some(u),
            } => {
                if l.len() != region.dim() || u.len() != region.dim() {
                    return Err(DesignError::DimensionMismatch {
                        expected: region.dim(),
                        got: l.len(),
                    });
                }
                Ok((l.clone(), u.clone()))
            }
            WeightingMeasure::Uniform {
                lower: None,
                upper: None,
            } => match region.as_box() {
                Some((l, u)) => Ok((l.to_vec(), u.to_vec())),
                None => Err(DesignError::UnsupportedRegion(
                    "continuous uniform measure needs a box region".into(),
                )),
            },
            WeightingMeasure::Uniform { .. } => Err(DesignError::InvalidMeasure(
                "uniform measure needs both lower and upper bounds or neither".into(),
            )),
            WeightingMeasure::Discrete { .. } => Err(DesignError::InvalidMeasure(
                "not a uniform measure".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shapes() {
        let m: WeightingMeasure = serde_json::from_str(r#"{"kind":"uniform"}"#).unwrap();
        assert_eq!(m, WeightingMeasure::uniform());
        let d: WeightingMeasure = serde_json::from_str(
            r#"{"kind":"discrete","points":[[0],[1]],"weights":[0.5,0.5]}"#,
        )
        .unwrap();
        assert_eq!(d, WeightingMeasure::discrete_uniform(vec![vec![0.0], vec![1.0]]));
    }

    #[test]
    fn validation() {
        let r = Region::unit_box(1);
        assert!(WeightingMeasure::point_mass(vec![0.5]).validate(&r).is_ok());
        assert!(WeightingMeasure::point_mass(vec![1.5]).validate(&r).is_err());
        let bad = WeightingMeasure::Discrete {
            points: vec![vec![0.0], vec![1.0]],
            weights: vec![0.5, 0.6],
        };
        assert!(bad.validate(&r).is_err());
        let finite = Region::Finite {
            points: vec![vec![0.0], vec![1.0]],
        };
        assert!(WeightingMeasure::uniform().validate(&finite).is_err());
        assert!(WeightingMeasure::uniform_on(vec![0.2], vec![0.8]).validate(&r).is_ok());
    }
}
