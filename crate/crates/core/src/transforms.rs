//! Equivariance: affine point maps `g`, induced basis matrices `Q` with
//! `f(g(x)) = Q f(x)`, parameter maps and the transfer of optimal designs.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criteria::CriterionSpec;
use crate::design::Design;
use crate::error::{DesignError, Result};
use crate::linalg;
use crate::measure::WeightingMeasure;
use crate::model::{ModelSpec, ParameterVector};
use crate::region::{Point, Region};

/// Relative residual allowed in `f(g(x)) = Q f(x)`.
pub const EQUIVARIANCE_TOL: f64 = 1e-9;

const VERIFY_SAMPLES: usize = 50;
const VERIFY_SEED: u64 = 0x7172_5f76_6572_6966;
const POOL_GRID_PER_AXIS: usize = 7;
const POOL_GRID_CAP: usize = 4_096;

/// `g(x) = b + A x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMap", into = "RawMap")]
pub struct AffinePointMap {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMap {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl TryFrom<RawMap> for AffinePointMap {
    type Error = DesignError;

    fn try_from(raw: RawMap) -> Result<Self> {
        let d = raw.b.len();
        if raw.a.len() != d || raw.a.iter().any(|r| r.len() != d) {
            return Err(DesignError::Parse(format!("'a' must be a {d}x{d} matrix")));
        }
        let a = DMatrix::from_fn(d, d, |i, j| raw.a[i][j]);
        AffinePointMap::new(a, DVector::from_vec(raw.b))
    }
}

impl From<AffinePointMap> for RawMap {
    fn from(g: AffinePointMap) -> Self {
        RawMap {
            a: g.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: g.b.iter().copied().collect(),
        }
    }
}

impl AffinePointMap {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() || b.is_empty() {
            return Err(DesignError::DimensionMismatch {
                expected: b.len(),
                got: a.nrows(),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(DesignError::Parse("non-finite map entry".into()));
        }
        if a.determinant().abs() <= 1e-12 {
            return Err(DesignError::InvalidModel("point map matrix is singular".into()));
        }
        Ok(AffinePointMap { a, b })
    }

    pub fn identity(dim: usize) -> Self {
        AffinePointMap {
            a: DMatrix::identity(dim, dim),
            b: DVector::zeros(dim),
        }
    }

    /// `x -> a + c x` in every coordinate.
    pub fn shift_scale(dim: usize, a: f64, c: f64) -> Result<Self> {
        AffinePointMap::new(DMatrix::identity(dim, dim) * c, DVector::from_element(dim, a))
    }

    /// Reflects the given coordinates (0-based) about the centre of the box.
    pub fn reflect(lower: &[f64], upper: &[f64], coords: &[usize]) -> Result<Self> {
        let d = lower.len();
        let mut a = DMatrix::identity(d, d);
        let mut b = DVector::zeros(d);
        for &j in coords {
            if j >= d {
                return Err(DesignError::Parse(format!("coordinate {} out of range", j + 1)));
            }
            a[(j, j)] = -1.0;
            b[j] = lower[j] + upper[j];
        }
        AffinePointMap::new(a, b)
    }

    /// Exchanges two coordinates (0-based).
    pub fn swap(dim: usize, i: usize, j: usize) -> Result<Self> {
        if i >= dim || j >= dim || i == j {
            return Err(DesignError::Parse(format!(
                "cannot swap coordinates {} and {}",
                i + 1,
                j + 1
            )));
        }
        let mut a = DMatrix::identity(dim, dim);
        a.swap_rows(i, j);
        AffinePointMap::new(a, DVector::zeros(dim))
    }

    /// Parses `identity`, `reflect:i[,j..]`, `swap:i,j` or `shift_scale:a,c`
    /// with 1-based coordinates. Reflections use the bounds of a box region.
    pub fn named(spec: &str, region: &Region) -> Result<Self> {
        let dim = region.dim();
        let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| DesignError::Parse(format!("bad argument '{s}' in '{spec}'")))
                })
                .collect()
        };
        let coords = || -> Result<Vec<usize>> {
            nums()?
                .into_iter()
                .map(|v| {
                    if v >= 1.0 && v.fract() == 0.0 {
                        Ok(v as usize - 1)
                    } else {
                        Err(DesignError::Parse(format!("bad coordinate {v} in '{spec}'")))
                    }
                })
                .collect()
        };
        match name.trim() {
            "identity" | "id" => Ok(AffinePointMap::identity(dim)),
            "reflect" => {
                let (l, u) = region.as_box().ok_or_else(|| {
                    DesignError::UnsupportedRegion("reflections need a box region".into())
                })?;
                AffinePointMap::reflect(l, u, &coords()?)
            }
            "swap" => match coords()?.as_slice() {
                [i, j] => AffinePointMap::swap(dim, *i, *j),
                _ => Err(DesignError::Parse(format!("'{spec}' needs two coordinates"))),
            },
            "shift_scale" => match nums()?.as_slice() {
                [a, c] => AffinePointMap::shift_scale(dim, *a, *c),
                _ => Err(DesignError::Parse(format!("'{spec}' needs a shift and a scale"))),
            },
            other => Err(DesignError::Parse(format!("unknown transform '{other}'"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn apply(&self, x: &[f64]) -> Point {
        let y = &self.b + &self.a * DVector::from_column_slice(x);
        y.iter().copied().collect()
    }

    pub fn inverse(&self) -> Self {
        let a = self.a.clone().try_inverse().expect("nonsingular by construction");
        let b = -(&a * &self.b);
        AffinePointMap { a, b }
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &AffinePointMap) -> Self {
        AffinePointMap {
            a: &self.a * &first.a,
            b: &self.a * &first.b + &self.b,
        }
    }

    /// Every row and column of `A` has exactly one nonzero entry, so boxes
    /// map to boxes.
    pub fn is_axis_aligned(&self) -> bool {
        let d = self.dim();
        let nz = |v: f64| v.abs() > 1e-14;
        (0..d).all(|i| (0..d).filter(|&j| nz(self.a[(i, j)])).count() == 1)
            && (0..d).all(|j| (0..d).filter(|&i| nz(self.a[(i, j)])).count() == 1)
    }

    pub fn max_abs_diff(&self, other: &AffinePointMap) -> f64 {
        (&self.a - &other.a).amax().max((&self.b - &other.b).amax())
    }
}

/// Image of a region: boxes need an axis-aligned map.
pub fn image_region(region: &Region, g: &AffinePointMap) -> Result<Region> {
    check_dim(region.dim(), g)?;
    match region {
        Region::Box { lower, upper } => {
            if !g.is_axis_aligned() {
                return Err(DesignError::NonAxisAlignedImage);
            }
            let (l, u) = image_bounds(lower, upper, g);
            Region::new_box(l, u)
        }
        Region::Finite { points } => Ok(Region::Finite {
            points: points.iter().map(|x| g.apply(x)).collect(),
        }),
    }
}

fn image_bounds(lower: &[f64], upper: &[f64], g: &AffinePointMap) -> (Vec<f64>, Vec<f64>) {
    let lo = g.apply(lower);
    let hi = g.apply(upper);
    let l = lo.iter().zip(&hi).map(|(a, b)| a.min(*b)).collect();
    let u = lo.iter().zip(&hi).map(|(a, b)| a.max(*b)).collect();
    (l, u)
}

fn check_dim(dim: usize, g: &AffinePointMap) -> Result<()> {
    if g.dim() != dim {
        return Err(DesignError::DimensionMismatch {
            expected: dim,
            got: g.dim(),
        });
    }
    Ok(())
}

/// Pushforward `nu^g`: atoms mapped with weights kept, uniform boxes mapped
/// to their image boxes.
pub fn measure_image(nu: &WeightingMeasure, g: &AffinePointMap, region: &Region) -> Result<WeightingMeasure> {
    check_dim(region.dim(), g)?;
    match nu {
        WeightingMeasure::Discrete { points, weights } => Ok(WeightingMeasure::Discrete {
            points: points.iter().map(|x| g.apply(x)).collect(),
            weights: weights.clone(),
        }),
        WeightingMeasure::Uniform { .. } => {
            if !g.is_axis_aligned() {
                return Err(DesignError::NonAxisAlignedImage);
            }
            let (l, u) = nu.uniform_bounds(region)?;
            let (l, u) = image_bounds(&l, &u, g);
            Ok(WeightingMeasure::uniform_on(l, u))
        }
    }
}

/// Solves `F_g = Q F` on a greedily chosen well-conditioned sample of `p`
/// region points, then verifies the residual on further random points.
pub fn derive_q(model: &ModelSpec, g: &AffinePointMap) -> Result<DMatrix<f64>> {
    check_dim(model.dim_x(), g)?;
    let p = model.p();
    let pool = model.region().check_points(POOL_GRID_PER_AXIS, POOL_GRID_CAP);
    let chosen = max_volume_selection(model, &pool, p).ok_or(DesignError::DegenerateSample)?;
    let f = DMatrix::from_columns(&chosen.iter().map(|x| model.basis_at(x)).collect::<Vec<_>>());
    let fg = DMatrix::from_columns(
        &chosen
            .iter()
            .map(|x| model.basis_at(&g.apply(x)))
            .collect::<Vec<_>>(),
    );
    let f_inv = f.try_inverse().ok_or(DesignError::DegenerateSample)?;
    let q = fg * f_inv;

    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let mut verify = model.region().sample(VERIFY_SAMPLES, &mut rng);
    verify.extend(pool);
    let residual = verify
        .iter()
        .map(|x| {
            let lhs = model.basis_at(&g.apply(x));
            let rhs = &q * model.basis_at(x);
            (&lhs - rhs).amax() / lhs.amax().max(1.0)
        })
        .fold(0.0, f64::max);
    if residual >= EQUIVARIANCE_TOL {
        return Err(DesignError::NotEquivariant { residual });
    }
    Ok(q)
}

fn max_volume_selection(model: &ModelSpec, pool: &[Point], p: usize) -> Option<Vec<Point>> {
    let vectors: Vec<DVector<f64>> = pool.iter().map(|x| model.basis_at(x)).collect();
    let scale = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut residuals = vectors.clone();
    let mut chosen = Vec::with_capacity(p);
    for _ in 0..p {
        let (idx, norm) = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.norm()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if norm <= 1e-10 * scale {
            return None;
        }
        let e = &residuals[idx] / norm;
        for r in residuals.iter_mut() {
            let c = r.dot(&e);
            *r -= &e * c;
        }
        chosen.push(pool[idx].clone());
    }
    Some(chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    /// `beta -> Q^-T beta`.
    #[default]
    Linear,
    /// `beta -> c(beta) Q^-T beta` with `c` chosen to keep the intercept.
    InterceptRescaled,
}

/// Point map with its basis matrix and parameter map.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformPair {
    g: AffinePointMap,
    q: DMatrix<f64>,
    q_inv_t: DMatrix<f64>,
    mode: ParamMode,
}

impl TransformPair {
    /// Derives `Q` for `g` under the model's basis.
    pub fn new(model: &ModelSpec, g: AffinePointMap, mode: ParamMode) -> Result<Self> {
        if mode == ParamMode::InterceptRescaled && !model.has_intercept() {
            return Err(DesignError::MissingIntercept);
        }
        let q = derive_q(model, &g)?;
        TransformPair::from_parts(g, q, mode)
    }

    pub fn from_parts(g: AffinePointMap, q: DMatrix<f64>, mode: ParamMode) -> Result<Self> {
        let q_inv = q
            .clone()
            .try_inverse()
            .filter(|_| q.determinant().abs() > 1e-12)
            .ok_or_else(|| DesignError::InvalidModel("basis matrix Q is singular".into()))?;
        Ok(TransformPair {
            g,
            q,
            q_inv_t: q_inv.transpose(),
            mode,
        })
    }

    pub fn identity(model: &ModelSpec, mode: ParamMode) -> Self {
        let p = model.p();
        TransformPair {
            g: AffinePointMap::identity(model.dim_x()),
            q: DMatrix::identity(p, p),
            q_inv_t: DMatrix::identity(p, p),
            mode,
        }
    }

    /// Named shortcut such as `reflect:1` or `swap:1,2` on the model region.
    pub fn named(model: &ModelSpec, spec: &str, mode: ParamMode) -> Result<Self> {
        TransformPair::new(model, AffinePointMap::named(spec, model.region())?, mode)
    }

    pub fn g(&self) -> &AffinePointMap {
        &self.g
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn mode(&self) -> ParamMode {
        self.mode
    }

    pub fn apply_point(&self, x: &[f64]) -> Point {
        self.g.apply(x)
    }

    /// `c(beta) = beta_0 / (Q^-T beta)_0` in rescaled mode, 1 otherwise.
    pub fn rescale_factor(&self, beta: &ParameterVector) -> Result<f64> {
        self.check_len(beta)?;
        match self.mode {
            ParamMode::Linear => Ok(1.0),
            ParamMode::InterceptRescaled => {
                let t0 = self.q_inv_t.row(0).transpose().dot(beta.as_vector());
                let b0 = beta.as_slice()[0];
                if t0 <= 0.0 || b0 <= 0.0 {
                    return Err(DesignError::RescaleUndefined { intercept: t0 });
                }
                Ok(b0 / t0)
            }
        }
    }

    pub fn param_transform(&self, beta: &ParameterVector) -> Result<ParameterVector> {
        let c = self.rescale_factor(beta)?;
        Ok(ParameterVector::from_vector(&self.q_inv_t * beta.as_vector() * c))
    }

    pub fn inverse(&self) -> Self {
        let q_inv = self.q_inv_t.transpose();
        TransformPair {
            g: self.g.inverse(),
            q_inv_t: self.q.transpose(),
            q: q_inv,
            mode: self.mode,
        }
    }

    /// `second` applied after `first`.
    pub fn compose(first: &TransformPair, second: &TransformPair) -> Result<Self> {
        if first.mode != second.mode {
            return Err(DesignError::ModeMismatch);
        }
        if first.q.nrows() != second.q.nrows() || first.g.dim() != second.g.dim() {
            return Err(DesignError::DimensionMismatch {
                expected: first.q.nrows(),
                got: second.q.nrows(),
            });
        }
        Ok(TransformPair {
            g: second.g.after(&first.g),
            q: &second.q * &first.q,
            q_inv_t: &second.q_inv_t * &first.q_inv_t,
            mode: first.mode,
        })
    }

    fn check_len(&self, beta: &ParameterVector) -> Result<()> {
        if beta.len() != self.q.nrows() {
            return Err(DesignError::DimensionMismatch {
                expected: self.q.nrows(),
                got: beta.len(),
            });
        }
        Ok(())
    }
}

/// Image design `xi^g`: support mapped, weights kept, coincident images
/// merged. All images must lie in `target`.
pub fn design_image(xi: &Design, pair: &TransformPair, target: &Region) -> Result<Design> {
    check_dim(xi.dim(), pair.g())?;
    let atoms: Vec<(Point, f64)> = xi.atoms().map(|(x, w)| (pair.apply_point(x), w)).collect();
    let outside: Vec<Point> = atoms
        .iter()
        .filter(|(z, _)| !target.contains(z))
        .map(|(z, _)| z.clone())
        .collect();
    if !outside.is_empty() {
        return Err(DesignError::ImageOutOfRegion { points: outside });
    }
    Design::from_atoms(atoms)
}

/// Information matrix of weighted atoms without region membership checks.
fn info_of_atoms<'a, I>(model: &ModelSpec, atoms: I, beta: &ParameterVector) -> Result<DMatrix<f64>>
where
    I: Iterator<Item = (Point, f64)> + 'a,
{
    let p = model.p();
    let mut m = DMatrix::zeros(p, p);
    for (x, w) in atoms {
        let f = model.basis_at(&x);
        let lambda = model.intensity(f.dot(beta.as_vector()))?;
        m += &f * f.transpose() * (w * lambda);
    }
    Ok(m)
}

/// Largest entrywise relative difference between `M(xi^g; g~(beta))` and
/// `c^-2 Q M(xi; beta) Q'` (`c = 1` in linear mode).
pub fn verify_info_equivariance(
    model: &ModelSpec,
    xi: &Design,
    beta: &ParameterVector,
    pair: &TransformPair,
) -> Result<f64> {
    let m = model.design_info(xi, beta)?;
    let beta_t = pair.param_transform(beta)?;
    let c = pair.rescale_factor(beta)?;
    let lhs = info_of_atoms(
        model,
        xi.atoms().map(|(x, w)| (pair.apply_point(x), w)),
        &beta_t,
    )?;
    let rhs = pair.q() * m.matrix() * pair.q().transpose() / (c * c);
    Ok(linalg::max_rel_diff(&lhs, &rhs))
}

/// Everything needed to use a transferred optimal design.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub model: ModelSpec,
    pub design: Design,
    pub criterion: CriterionSpec,
    pub pair: TransformPair,
}

impl Transfer {
    /// Parameter at which the image design is optimal.
    pub fn beta(&self, beta: &ParameterVector) -> Result<ParameterVector> {
        self.pair.param_transform(beta)
    }
}

/// Image of an optimal design, its model on the image region and the
/// pushed-forward criterion.
pub fn transfer_optimal(
    model: &ModelSpec,
    xi_opt: &Design,
    pair: &TransformPair,
    crit: &CriterionSpec,
) -> Result<Transfer> {
    let region = image_region(model.region(), pair.g())?;
    let target = model.with_region(region)?;
    let design = design_image(xi_opt, pair, target.region())?;
    let criterion = match crit {
        CriterionSpec::D => CriterionSpec::D,
        CriterionSpec::Imse { nu } => {
            CriterionSpec::imse(measure_image(nu, pair.g(), model.region())?)
        }
    };
    Ok(Transfer {
        model: target,
        design,
        criterion,
        pair: pair.clone(),
    })
}

/// JSON description of a transform: a named shortcut, optionally with a
/// parameter mode, or explicit `a` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransformFile {
    Shortcut(String),
    Named {
        name: String,
        #[serde(default)]
        param_mode: ParamMode,
    },
    Affine {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        param_mode: ParamMode,
    },
}

impl TransformFile {
    pub fn resolve(&self, model: &ModelSpec) -> Result<TransformPair> {
        match self {
            TransformFile::Shortcut(name) => TransformPair::named(model, name, ParamMode::Linear),
            TransformFile::Named { name, param_mode } => TransformPair::named(model, name, *param_mode),
            TransformFile::Affine { a, b, param_mode } => {
                let g = AffinePointMap::try_from(RawMap {
                    a: a.clone(),
                    b: b.clone(),
                })?;
                TransformPair::new(model, g, *param_mode)
            }
        }
    }
}
