//! Finite transformation groups, orbits, symmetrization and invariant designs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criteria::CriterionSpec;
use crate::design::{Design, WEIGHT_SUM_TOL};
use crate::error::{DesignError, Result};
use crate::measure::WeightingMeasure;
use crate::model::{ModelSpec, ParameterVector};
use crate::region::{max_dist, Point, POINT_TOL};
use crate::transforms::{image_region, measure_image, ParamMode, TransformPair};

/// Default bound on the size of a generated group.
pub const DEFAULT_MAX_GROUP_SIZE: usize = 64;

const ACTION_TOL: f64 = 1e-10;
const PARAM_TOL: f64 = 1e-9;
const PROBE_INTERIOR: usize = 8;
const PARAM_PROBES: usize = 20;
const GROUP_SEED: u64 = 0x6772_6f75_705f_6964;

/// Finite group of transformation pairs acting on a model's region. The
/// identity comes first, followed by elements in order of discovery.
#[derive(Debug, Clone)]
pub struct TransformGroup {
    model: ModelSpec,
    elements: Vec<TransformPair>,
    probe: Vec<Point>,
}

impl TransformGroup {
    pub fn elements(&self) -> &[TransformPair] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// Index of the element acting on the probe set like `pair`.
    pub fn find(&self, pair: &TransformPair) -> Option<usize> {
        let action = action_of(pair, &self.probe);
        self.elements
            .iter()
            .position(|e| same_action(&action_of(e, &self.probe), &action))
    }
}

fn action_of(pair: &TransformPair, probe: &[Point]) -> Vec<Point> {
    probe.iter().map(|x| pair.apply_point(x)).collect()
}

fn same_action(a: &[Point], b: &[Point]) -> bool {
    a.iter().zip(b).all(|(x, y)| max_dist(x, y) <= ACTION_TOL)
}

/// Closure of `generators` under composition. Elements are identified by
/// their action on the extremal points plus a few interior points.
pub fn generate_group(
    model: &ModelSpec,
    generators: &[TransformPair],
    max_size: usize,
) -> Result<TransformGroup> {
    let mode = generators.first().map_or(ParamMode::Linear, |g| g.mode());
    if generators.iter().any(|g| g.mode() != mode) {
        return Err(DesignError::ModeMismatch);
    }
    for g in generators {
        let image = image_region(model.region(), g.g()).map_err(|e| match e {
            DesignError::NonAxisAlignedImage => DesignError::NotRegionPreserving,
            other => other,
        })?;
        if !image.approx_eq(model.region(), ACTION_TOL) {
            return Err(DesignError::NotRegionPreserving);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(GROUP_SEED);
    let mut probe = model.region().extremal_points();
    probe.extend(model.region().sample(PROBE_INTERIOR, &mut rng));

    let mut group = TransformGroup {
        model: model.clone(),
        elements: vec![TransformPair::identity(model, mode)],
        probe,
    };
    let mut next = 0;
    while next < group.elements.len() {
        let current = group.elements[next].clone();
        for h in generators {
            let candidate = TransformPair::compose(&current, h)?;
            if group.find(&candidate).is_none() {
                if group.elements.len() >= max_size {
                    return Err(DesignError::GroupTooLarge { max_size });
                }
                group.elements.push(candidate);
            }
        }
        next += 1;
    }
    verify_group(&group, &mut rng)?;
    Ok(group)
}

/// Checks closure and inverses by action, and that parameter maps of
/// composed elements agree with the matching element on random parameters.
fn verify_group(group: &TransformGroup, rng: &mut ChaCha8Rng) -> Result<()> {
    let betas = random_parameters(&group.model, PARAM_PROBES, rng);
    for a in &group.elements {
        if group.find(&a.inverse()).is_none() {
            return Err(DesignError::NotAGroup("missing inverse".into()));
        }
        for b in &group.elements {
            let c = TransformPair::compose(a, b)?;
            let k = group
                .find(&c)
                .ok_or_else(|| DesignError::NotAGroup("not closed under composition".into()))?;
            let e = &group.elements[k];
            for beta in &betas {
                match (c.param_transform(beta), e.param_transform(beta)) {
                    (Ok(x), Ok(y)) => {
                        if x.max_abs_diff(&y) > PARAM_TOL * y.as_vector().amax().max(1.0) {
                            return Err(DesignError::NotAGroup(
                                "parameter maps disagree on a composed element".into(),
                            ));
                        }
                    }
                    (Err(_), Err(_)) => {}
                    _ => {
                        return Err(DesignError::NotAGroup(
                            "parameter map defined for only one of two equal elements".into(),
                        ))
                    }
                }
            }
        }
    }
    Ok(())
}

/// Admissible parameters with entries drawn from `[0.1, 1]`, kept only when
/// the linear component is positive on the region.
fn random_parameters(model: &ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<ParameterVector> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..50 * n {
        if out.len() == n {
            break;
        }
        let beta = ParameterVector::new((0..model.p()).map(|_| rng.gen_range(0.1..1.0)).collect());
        if model.check_parameter(&beta).is_ok() {
            out.push(beta);
        }
    }
    out
}

/// Partition of a candidate list into orbits, as index lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitPartition {
    pub points: Vec<Point>,
    pub orbits: Vec<Vec<usize>>,
}

impl OrbitPartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.orbits.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    pub fn orbit_points(&self, k: usize) -> Vec<Point> {
        self.orbits[k].iter().map(|&i| self.points[i].clone()).collect()
    }

    /// Design with weight `orbit_weights[k]` on every point of orbit `k`;
    /// zero-weight orbits are left out. Support follows candidate order.
    pub fn invariant_design(&self, orbit_weights: &[f64]) -> Result<Design> {
        if orbit_weights.len() != self.orbits.len() {
            return Err(DesignError::DimensionMismatch {
                expected: self.orbits.len(),
                got: orbit_weights.len(),
            });
        }
        if orbit_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DesignError::InvalidDesign("orbit weights must be nonnegative".into()));
        }
        let sum: f64 = self
            .orbits
            .iter()
            .zip(orbit_weights)
            .map(|(o, w)| o.len() as f64 * w)
            .sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(DesignError::WeightSumViolation { sum });
        }
        let mut per_point = vec![0.0; self.points.len()];
        for (o, w) in self.orbits.iter().zip(orbit_weights) {
            for &i in o {
                per_point[i] = *w;
            }
        }
        let (support, weights): (Vec<Point>, Vec<f64>) = self
            .points
            .iter()
            .cloned()
            .zip(per_point)
            .filter(|(_, w)| *w > 0.0)
            .unzip();
        Design::new(support, weights)
    }

    /// Weight of `xi` on each point, averaged per orbit.
    pub fn orbit_weights(&self, xi: &Design) -> Vec<f64> {
        self.orbits
            .iter()
            .map(|o| o.iter().map(|&i| xi.weight_at(&self.points[i])).sum::<f64>() / o.len() as f64)
            .collect()
    }
}

/// Orbits of `candidates` under `group`; every image must be a candidate.
pub fn orbits(group: &TransformGroup, candidates: &[Point]) -> Result<OrbitPartition> {
    let n = candidates.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut missing = Vec::new();
    for (i, x) in candidates.iter().enumerate() {
        for e in group.elements() {
            let z = e.apply_point(x);
            match candidates.iter().position(|c| max_dist(c, &z) <= POINT_TOL) {
                Some(j) => {
                    let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
                None => missing.push(z),
            }
        }
    }
    if !missing.is_empty() {
        return Err(DesignError::CandidateSetNotClosed { missing });
    }
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    let mut label = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = orbits.len();
            orbits.push(Vec::new());
        }
        orbits[label[r]].push(i);
    }
    Ok(OrbitPartition {
        points: candidates.to_vec(),
        orbits,
    })
}

/// `(1/|G|) sum_g xi^g`, with coincident points merged.
pub fn symmetrize(xi: &Design, group: &TransformGroup) -> Result<Design> {
    let scale = 1.0 / group.len() as f64;
    let mut atoms = Vec::with_capacity(xi.len() * group.len());
    for e in group.elements() {
        for (x, w) in xi.atoms() {
            let z = e.apply_point(x);
            if !group.model.region().contains(&z) {
                return Err(DesignError::OutOfRegion { point: z });
            }
            atoms.push((z, w * scale));
        }
    }
    Design::from_atoms(atoms)
}

/// True when every element fixes `beta` and, for IMSE, maps `nu` onto itself.
pub fn check_invariant_criterion(
    group: &TransformGroup,
    crit: &CriterionSpec,
    beta: &ParameterVector,
) -> bool {
    let region = group.model.region();
    let scale = beta.as_vector().amax().max(1.0);
    group.elements().iter().all(|e| {
        let fixes_beta = e
            .param_transform(beta)
            .is_ok_and(|b| b.max_abs_diff(beta) <= PARAM_TOL * scale);
        let fixes_nu = match crit {
            CriterionSpec::D => true,
            CriterionSpec::Imse { nu } => measure_image(nu, e.g(), region)
                .is_ok_and(|img| same_measure(&img, nu, region)),
        };
        fixes_beta && fixes_nu
    })
}

fn same_measure(a: &WeightingMeasure, b: &WeightingMeasure, region: &crate::region::Region) -> bool {
    match (a, b) {
        (
            WeightingMeasure::Discrete { points: pa, weights: wa },
            WeightingMeasure::Discrete { points: pb, weights: wb },
        ) => {
            let da = Design::from_atoms(pa.iter().cloned().zip(wa.iter().copied()));
            let db = Design::from_atoms(pb.iter().cloned().zip(wb.iter().copied()));
            match (da, db) {
                (Ok(x), Ok(y)) => x.distance(&y) <= PARAM_TOL,
                _ => false,
            }
        }
        (WeightingMeasure::Uniform { .. }, WeightingMeasure::Uniform { .. }) => {
            match (a.uniform_bounds(region), b.uniform_bounds(region)) {
                (Ok((la, ua)), Ok((lb, ub))) => {
                    max_dist(&la, &lb) <= ACTION_TOL && max_dist(&ua, &ub) <= ACTION_TOL
                }
                _ => false,
            }
        }
        _ => false,
    }
}

/// JSON description of a group by named generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFile {
    pub generators: Vec<String>,
    #[serde(default)]
    pub param_mode: ParamMode,
}

impl GroupFile {
    pub fn resolve(&self, model: &ModelSpec, max_size: usize) -> Result<TransformGroup> {
        let gens = self
            .generators
            .iter()
            .map(|g| TransformPair::named(model, g, self.param_mode))
            .collect::<Result<Vec<_>>>()?;
        generate_group(model, &gens, max_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::criterion_value;

    fn pair(model: &ModelSpec, name: &str, mode: ParamMode) -> TransformPair {
        TransformPair::named(model, name, mode).unwrap()
    }

    fn group(model: &ModelSpec, names: &[&str], mode: ParamMode) -> TransformGroup {
        let gens: Vec<_> = names.iter().map(|n| pair(model, n, mode)).collect();
        generate_group(model, &gens, DEFAULT_MAX_GROUP_SIZE).unwrap()
    }

    // canonical vertex order: (0,0), (0,1), (1,0), (1,1)
    fn vertices() -> Vec<Point> {
        ModelSpec::two_factor().region().extremal_points()
    }

    #[test]
    fn group_sizes() {
        let m1 = ModelSpec::one_factor();
        assert_eq!(group(&m1, &["reflect:1"], ParamMode::InterceptRescaled).len(), 2);
        let m = ModelSpec::two_factor();
        assert_eq!(group(&m, &["reflect:1,2", "swap:1,2"], ParamMode::Linear).len(), 4);
        assert_eq!(group(&m, &["reflect:1", "reflect:2"], ParamMode::Linear).len(), 4);
        assert_eq!(group(&m, &["reflect:1", "swap:1,2"], ParamMode::Linear).len(), 8);
        let gens = vec![pair(&m, "reflect:1", ParamMode::Linear), pair(&m, "swap:1,2", ParamMode::Linear)];
        assert_eq!(
            generate_group(&m, &gens, 4).unwrap_err(),
            DesignError::GroupTooLarge { max_size: 4 }
        );
        let shift = pair(&m1, "shift_scale:0.5,1", ParamMode::Linear);
        assert_eq!(
            generate_group(&m1, &[shift], 8).unwrap_err(),
            DesignError::NotRegionPreserving
        );
    }

    #[test]
    fn secondary_diagonal_is_generated() {
        let m = ModelSpec::two_factor();
        let g = group(&m, &["reflect:1,2", "swap:1,2"], ParamMode::Linear);
        // (x1, x2) -> (1 - x2, 1 - x1)
        assert!(g
            .elements()
            .iter()
            .any(|e| max_dist(&e.apply_point(&[0.3, 0.1]), &[0.9, 0.7]) < 1e-12));
    }

    #[test]
    fn orbit_examples() {
        let m = ModelSpec::two_factor();
        let v = vertices();
        let full = group(&m, &["reflect:1", "reflect:2"], ParamMode::Linear);
        assert_eq!(orbits(&full, &v).unwrap().orbits, vec![vec![0, 1, 2, 3]]);

        // (0,0)<->(1,0) and (0,1)<->(1,1)
        let g3 = group(&m, &["reflect:1"], ParamMode::Linear);
        assert_eq!(orbits(&g3, &v).unwrap().orbits, vec![vec![0, 2], vec![1, 3]]);

        let gp = group(&m, &["reflect:1,2", "swap:1,2"], ParamMode::Linear);
        assert_eq!(orbits(&gp, &v).unwrap().orbits, vec![vec![0, 3], vec![1, 2]]);

        let err = orbits(&g3, &[vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, DesignError::CandidateSetNotClosed { .. }));
    }

    #[test]
    fn symmetrize_examples() {
        let m1 = ModelSpec::one_factor();
        let g = group(&m1, &["reflect:1"], ParamMode::Linear);
        let s = symmetrize(&Design::one_point(vec![0.0]), &g).unwrap();
        assert_eq!(s.weight_at(&[0.0]), 0.5);
        assert_eq!(s.weight_at(&[1.0]), 0.5);
        let again = symmetrize(&s, &g).unwrap();
        assert!(again.distance(&s) < 1e-12);

        let m = ModelSpec::two_factor();
        let full = group(&m, &["reflect:1", "reflect:2"], ParamMode::Linear);
        let xi = Design::new(vertices(), vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let s = symmetrize(&xi, &full).unwrap();
        for w in s.weights() {
            assert!((w - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_design_examples() {
        let m = ModelSpec::two_factor();
        let g3 = group(&m, &["reflect:1"], ParamMode::Linear);
        let part = orbits(&g3, &vertices()).unwrap();
        let w = 0.3;
        let xi = part.invariant_design(&[w, 0.5 - w]).unwrap();
        assert_eq!(xi.weight_at(&[0.0, 0.0]), w);
        assert_eq!(xi.weight_at(&[1.0, 0.0]), w);
        assert_eq!(xi.weight_at(&[0.0, 1.0]), 0.5 - w);
        assert_eq!(
            part.invariant_design(&[0.3, 0.3]).unwrap_err(),
            DesignError::WeightSumViolation { sum: 1.2 }
        );
        assert_eq!(part.invariant_design(&[0.5, 0.0]).unwrap().len(), 2);

        let full = group(&m, &["reflect:1", "reflect:2"], ParamMode::Linear);
        let part = orbits(&full, &vertices()).unwrap();
        assert_eq!(part.invariant_design(&[0.25]).unwrap().len(), 4);
    }

    #[test]
    fn invariant_criterion_examples() {
        let m1 = ModelSpec::one_factor();
        let g = group(&m1, &["reflect:1"], ParamMode::Linear);
        let b0 = ParameterVector::new(vec![1.0, 0.0]);
        assert!(check_invariant_criterion(&g, &CriterionSpec::D, &b0));
        assert!(!check_invariant_criterion(&g, &CriterionSpec::D, &ParameterVector::new(vec![1.0, 1.0])));
        let u = CriterionSpec::imse(WeightingMeasure::uniform());
        assert!(check_invariant_criterion(&g, &u, &b0));
        let lopsided = CriterionSpec::imse(WeightingMeasure::point_mass(vec![0.2]));
        assert!(!check_invariant_criterion(&g, &lopsided, &b0));

        let m = ModelSpec::two_factor();
        let swap = group(&m, &["swap:1,2"], ParamMode::Linear);
        let b = ParameterVector::new(vec![1.0, 2.5, 2.5]);
        assert!(check_invariant_criterion(&swap, &CriterionSpec::D, &b));
        let xi = Design::new(vertices(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let e = &swap.elements()[1];
        let img = crate::transforms::design_image(&xi, e, m.region()).unwrap();
        let a = criterion_value(&m, &xi, &b, &CriterionSpec::D).unwrap();
        let c = criterion_value(&m, &img, &b, &CriterionSpec::D).unwrap();
        assert!((a - c).abs() < 1e-9 * a);
    }

    #[test]
    fn rescaled_group_is_verified() {
        let m = ModelSpec::two_factor();
        let g = group(&m, &["reflect:1,2", "swap:1,2"], ParamMode::InterceptRescaled);
        assert_eq!(g.len(), 4);
        let gf: GroupFile =
            serde_json::from_str(r#"{"generators":["reflect:1","swap:1,2"],"param_mode":"intercept_rescaled"}"#).unwrap();
        assert_eq!(gf.resolve(&m, 64).unwrap().len(), 8);
    }
}
