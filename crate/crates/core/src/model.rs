//! Gamma GLM design primitives: regression basis, intensity, information
//! matrices and the IMSE weighting matrix.
//!
//! For a setting `x` with regression vector `f(x)` and linear component
//! `z = f(x)' beta` the elemental information is `lambda(z) f(x) f(x)'`.
//! Under the gamma model with inverse link `lambda(z) = kappa / z^2`, which
//! requires `z > 0` everywhere on the region.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::design::Design;
use crate::error::{DesignError, Result};
use crate::linalg;
use crate::measure::WeightingMeasure;
use crate::quadrature;
use crate::region::{Point, Region};

/// Gauss–Legendre order per coordinate for continuous uniform measures.
pub const DEFAULT_QUADRATURE_ORDER: usize = 32;

const POSITIVITY_GRID_PER_AXIS: usize = 16;
const POSITIVITY_GRID_CAP: usize = 65_536;
const SAMPLE_SEED: u64 = 0x6d6f_6465_6c5f_7370;

pub type BasisFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type IntensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Vector of regression functions.
#[derive(Clone)]
pub enum Basis {
    /// `(1, x_1, ..., x_d)`, named for the one-factor case.
    Linear,
    /// `(1, x_1, ..., x_d)`, named for multi-factor first-order models.
    Additive,
    Custom {
        name: String,
        len: usize,
        func: BasisFn,
    },
}

impl Basis {
    pub fn custom<F>(name: &str, len: usize, func: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Basis::Custom {
            name: name.to_string(),
            len,
            func: Arc::new(func),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Basis::Linear => "linear",
            Basis::Additive => "additive",
            Basis::Custom { name, .. } => name,
        }
    }

    fn is_affine(&self) -> bool {
        matches!(self, Basis::Linear | Basis::Additive)
    }

    fn len(&self, dim_x: usize) -> usize {
        match self {
            Basis::Linear | Basis::Additive => dim_x + 1,
            Basis::Custom { len, .. } => *len,
        }
    }

    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        match self {
            Basis::Linear | Basis::Additive => {
                out.clear();
                out.push(1.0);
                out.extend_from_slice(x);
            }
            Basis::Custom { func, .. } => *out = func(x),
        }
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Basis::Linear | Basis::Additive => {
                let mut v = Vec::with_capacity(x.len() + 1);
                v.push(1.0);
                v.extend_from_slice(x);
                v
            }
            Basis::Custom { func, .. } => func(x),
        }
    }
}

impl fmt::Debug for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Custom { name, len, .. } => write!(f, "Custom({name}, p={len})"),
            other => write!(f, "{}", other.name()),
        }
    }
}

#[derive(Clone)]
pub enum Intensity {
    /// `kappa / z^2` for the gamma model with inverse link.
    GammaInverseLink { kappa: f64 },
    /// Any positive function of the linear component.
    Custom { name: String, func: IntensityFn },
}

impl Intensity {
    pub fn gamma(kappa: f64) -> Self {
        Intensity::GammaInverseLink { kappa }
    }

    pub fn custom<F>(name: &str, func: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Intensity::Custom {
            name: name.to_string(),
            func: Arc::new(func),
        }
    }
}

impl fmt::Debug for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intensity::GammaInverseLink { kappa } => write!(f, "GammaInverseLink(kappa={kappa})"),
            Intensity::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Parameter vector `beta` of the linear component.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(DVector<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParameterVector(DVector::from_vec(values))
    }

    pub fn from_vector(v: DVector<f64>) -> Self {
        ParameterVector(v)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        ParameterVector(&self.0 * c)
    }

    /// Slope-to-intercept ratios `beta_j / beta_0`, `j >= 1`.
    pub fn reduced(&self) -> Vec<f64> {
        self.0.iter().skip(1).map(|b| b / self.0[0]).collect()
    }

    pub fn max_abs_diff(&self, other: &ParameterVector) -> f64 {
        (&self.0 - &other.0).amax()
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        ParameterVector::new(v)
    }
}

impl Serialize for ParameterVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParameterVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Vec::<f64>::deserialize(d).map(ParameterVector::new)
    }
}

/// Symmetric positive semidefinite information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix(DMatrix<f64>);

impl InfoMatrix {
    /// Validates symmetry (1e-12 relative) and semidefiniteness
    /// (eigenvalues at least `-1e-10 * trace`).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(DesignError::InvalidModel("information matrix must be square".into()));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(DesignError::InvalidModel("information matrix not symmetric".into()));
        }
        let trace = m.trace();
        if linalg::sym_eigenvalues(&m).min() < -1e-10 * trace.abs() {
            return Err(DesignError::InvalidModel(
                "information matrix not positive semidefinite".into(),
            ));
        }
        Ok(InfoMatrix(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Regression basis, intensity family and experimental region.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    dim_x: usize,
    p: usize,
    basis: Basis,
    intensity: Intensity,
    region: Region,
}

impl ModelSpec {
    pub fn new(dim_x: usize, basis: Basis, intensity: Intensity, region: Region) -> Result<Self> {
        if dim_x == 0 {
            return Err(DesignError::InvalidModel("dim_x must be at least 1".into()));
        }
        region.validate()?;
        if region.dim() != dim_x {
            return Err(DesignError::DimensionMismatch {
                expected: dim_x,
                got: region.dim(),
            });
        }
        if let Intensity::GammaInverseLink { kappa } = intensity {
            if !(kappa > 0.0 && kappa.is_finite()) {
                return Err(DesignError::InvalidModel(format!("kappa must be positive, got {kappa}")));
            }
        }
        let p = basis.len(dim_x);
        if p < 2 {
            return Err(DesignError::InvalidModel("basis length must be at least 2".into()));
        }
        let model = ModelSpec {
            dim_x,
            p,
            basis,
            intensity,
            region,
        };
        model.check_basis()?;
        Ok(model)
    }

    /// Simple linear regression `(1, x)` on `[0, 1]`, gamma with `kappa = 1`.
    pub fn one_factor() -> Self {
        ModelSpec::new(1, Basis::Linear, Intensity::gamma(1.0), Region::unit_box(1))
            .expect("valid built-in model")
    }

    /// First-order model `(1, x_1, x_2)` on `[0, 1]^2`, gamma with `kappa = 1`.
    pub fn two_factor() -> Self {
        ModelSpec::new(2, Basis::Additive, Intensity::gamma(1.0), Region::unit_box(2))
            .expect("valid built-in model")
    }

    /// Same basis and intensity on another region.
    pub fn with_region(&self, region: Region) -> Result<Self> {
        ModelSpec::new(self.dim_x, self.basis.clone(), self.intensity.clone(), region)
    }

    pub fn with_intensity(&self, intensity: Intensity) -> Result<Self> {
        ModelSpec::new(self.dim_x, self.basis.clone(), intensity, self.region.clone())
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn intensity_kind(&self) -> &Intensity {
        &self.intensity
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn kappa(&self) -> Option<f64> {
        match self.intensity {
            Intensity::GammaInverseLink { kappa } => Some(kappa),
            Intensity::Custom { .. } => None,
        }
    }

    pub fn is_gamma(&self) -> bool {
        matches!(self.intensity, Intensity::GammaInverseLink { .. })
    }

    pub fn has_affine_basis(&self) -> bool {
        self.basis.is_affine()
    }

    /// Basis values without the region check. Used for images of points
    /// under transformations, which may leave the region.
    pub fn basis_at(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(self.basis.eval(x))
    }

    /// Basis values written into a reusable buffer, without region checks.
    pub fn basis_into(&self, x: &[f64], out: &mut Vec<f64>) {
        self.basis.eval_into(x, out)
    }

    pub fn eval_basis(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim_x {
            return Err(DesignError::DimensionMismatch {
                expected: self.dim_x,
                got: x.len(),
            });
        }
        if !self.region.contains(x) {
            return Err(DesignError::OutOfRegion { point: x.to_vec() });
        }
        Ok(self.basis_at(x))
    }

    pub fn intensity(&self, z: f64) -> Result<f64> {
        match &self.intensity {
            Intensity::GammaInverseLink { kappa } => {
                if z > 0.0 {
                    Ok(kappa / (z * z))
                } else {
                    Err(DesignError::NonpositiveLinearComponent { value: z, index: None })
                }
            }
            Intensity::Custom { func, .. } => {
                let v = func(z);
                if v > 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(DesignError::InvalidIntensity { z, value: v })
                }
            }
        }
    }

    fn check_beta_len(&self, beta: &ParameterVector) -> Result<()> {
        if beta.len() != self.p {
            return Err(DesignError::DimensionMismatch {
                expected: self.p,
                got: beta.len(),
            });
        }
        Ok(())
    }

    /// Basis vector and intensity at `x` (region checked).
    pub fn basis_and_intensity(&self, x: &[f64], beta: &ParameterVector) -> Result<(DVector<f64>, f64)> {
        self.check_beta_len(beta)?;
        let f = self.eval_basis(x)?;
        let lambda = self.intensity(f.dot(beta.as_vector()))?;
        Ok((f, lambda))
    }

    pub fn linear_component(&self, x: &[f64], beta: &ParameterVector) -> Result<f64> {
        self.check_beta_len(beta)?;
        Ok(self.eval_basis(x)?.dot(beta.as_vector()))
    }

    pub fn elemental_info(&self, x: &[f64], beta: &ParameterVector) -> Result<InfoMatrix> {
        let (f, lambda) = self.basis_and_intensity(x, beta)?;
        Ok(InfoMatrix(&f * f.transpose() * lambda))
    }

    pub fn design_info(&self, xi: &Design, beta: &ParameterVector) -> Result<InfoMatrix> {
        self.check_beta_len(beta)?;
        if xi.dim() != self.dim_x {
            return Err(DesignError::DimensionMismatch {
                expected: self.dim_x,
                got: xi.dim(),
            });
        }
        let mut m = DMatrix::zeros(self.p, self.p);
        for (i, (x, w)) in xi.atoms().enumerate() {
            let (f, lambda) = self.basis_and_intensity(x, beta).map_err(|e| with_index(e, i))?;
            m += &f * f.transpose() * (w * lambda);
        }
        Ok(InfoMatrix(linalg::symmetrize(&m)))
    }

    /// `V(beta; nu) = int lambda(f'beta)^2 f f' dnu`, exact for discrete
    /// measures and by tensor Gauss–Legendre for uniform ones.
    pub fn weight_matrix_v(&self, beta: &ParameterVector, nu: &WeightingMeasure) -> Result<DMatrix<f64>> {
        self.weight_matrix_v_with_order(beta, nu, DEFAULT_QUADRATURE_ORDER)
    }

    pub fn weight_matrix_v_with_order(
        &self,
        beta: &ParameterVector,
        nu: &WeightingMeasure,
        order: usize,
    ) -> Result<DMatrix<f64>> {
        self.check_beta_len(beta)?;
        nu.validate(&self.region)?;
        let atoms: Vec<(Point, f64)> = match nu {
            WeightingMeasure::Discrete { points, weights } => {
                points.iter().cloned().zip(weights.iter().copied()).collect()
            }
            WeightingMeasure::Uniform { .. } => {
                let (lower, upper) = nu.uniform_bounds(&self.region)?;
                quadrature::uniform_box_rule(&lower, &upper, order)
            }
        };
        let mut v = DMatrix::zeros(self.p, self.p);
        for (i, (x, w)) in atoms.iter().enumerate() {
            let f = self.basis_at(x);
            let lambda = self.intensity(f.dot(beta.as_vector())).map_err(|e| with_index(e, i))?;
            v += &f * f.transpose() * (w * lambda * lambda);
        }
        Ok(linalg::symmetrize(&v))
    }

    /// Points at which positivity of the linear component is enforced:
    /// extremal points for affine bases, otherwise also a capped grid.
    pub fn positivity_points(&self) -> Vec<Point> {
        if self.basis.is_affine() {
            self.region.extremal_points()
        } else {
            self.region
                .check_points(POSITIVITY_GRID_PER_AXIS, POSITIVITY_GRID_CAP)
        }
    }

    /// Checks that `beta` has length `p` and a positive linear component on
    /// the region.
    pub fn check_parameter(&self, beta: &ParameterVector) -> Result<()> {
        self.check_beta_len(beta)?;
        if beta.as_slice().iter().any(|b| !b.is_finite()) {
            return Err(DesignError::OutOfParameterRegion("non-finite entry".into()));
        }
        if !self.is_gamma() {
            return Ok(());
        }
        for x in self.positivity_points() {
            let z = self.basis_at(&x).dot(beta.as_vector());
            if z <= 0.0 {
                return Err(DesignError::NonpositiveLinearComponent { value: z, index: None });
            }
        }
        Ok(())
    }

    /// True when the first basis function is identically one on a sample.
    pub fn has_intercept(&self) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        let mut pts = self.region.extremal_points();
        pts.extend(self.region.sample(16, &mut rng));
        pts.iter().all(|x| (self.basis_at(x)[0] - 1.0).abs() <= 1e-12)
    }

    fn check_basis(&self) -> Result<()> {
        let n = self.p + self.p.div_ceil(2);
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        let pts = match &self.region {
            Region::Box { .. } => self.region.sample(n, &mut rng),
            Region::Finite { points } => points.clone(),
        };
        let mut gram = DMatrix::zeros(self.p, self.p);
        for x in &pts {
            let f = self.basis.eval(x);
            if f.len() != self.p {
                return Err(DesignError::InvalidModel(format!(
                    "basis returned {} values, expected {}",
                    f.len(),
                    self.p
                )));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(DesignError::InvalidModel("basis returned non-finite values".into()));
            }
            let f = DVector::from_vec(f);
            gram += &f * f.transpose();
        }
        if !linalg::is_positive_definite(&gram) {
            return Err(DesignError::InvalidModel(
                "basis functions are linearly dependent on the region".into(),
            ));
        }
        Ok(())
    }
}

fn with_index(e: DesignError, i: usize) -> DesignError {
    match e {
        DesignError::NonpositiveLinearComponent { value, .. } => {
            DesignError::NonpositiveLinearComponent { value, index: Some(i) }
        }
        other => other,
    }
}

/// JSON shape of a model: `{"dim_x":1,"basis":"linear","region":{...},"kappa":1.0}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    dim_x: usize,
    basis: String,
    region: Region,
    #[serde(default = "default_kappa")]
    kappa: f64,
}

fn default_kappa() -> f64 {
    1.0
}

impl Serialize for ModelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error;
        let kappa = self
            .kappa()
            .ok_or_else(|| S::Error::custom("custom intensities cannot be serialized"))?;
        if !self.basis.is_affine() {
            return Err(S::Error::custom("custom bases cannot be serialized"));
        }
        ModelFile {
            dim_x: self.dim_x,
            basis: self.basis.name().to_string(),
            region: self.region.clone(),
            kappa,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let file = ModelFile::deserialize(d)?;
        let basis = match file.basis.as_str() {
            "linear" => Basis::Linear,
            "additive" => Basis::Additive,
            other => return Err(D::Error::custom(format!("unknown basis '{other}'"))),
        };
        ModelSpec::new(file.dim_x, basis, Intensity::gamma(file.kappa), file.region)
            .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beta(v: &[f64]) -> ParameterVector {
        ParameterVector::new(v.to_vec())
    }

    #[test]
    fn eval_basis_examples() {
        let m1 = ModelSpec::one_factor();
        assert_eq!(m1.eval_basis(&[0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(m1.eval_basis(&[1.0]).unwrap().as_slice(), &[1.0, 1.0]);
        let m2 = ModelSpec::two_factor();
        assert_eq!(m2.eval_basis(&[1.0, 0.0]).unwrap().as_slice(), &[1.0, 1.0, 0.0]);
        assert!(matches!(
            m1.eval_basis(&[1.0 + 1e-9]),
            Err(DesignError::OutOfRegion { .. })
        ));
    }

    #[test]
    fn intensity_examples() {
        let m = ModelSpec::one_factor();
        assert_eq!(m.intensity(1.0).unwrap(), 1.0);
        assert_eq!(m.intensity(2.0).unwrap(), 0.25);
        let m2 = m.with_intensity(Intensity::gamma(2.0)).unwrap();
        assert_eq!(m2.intensity(1.0).unwrap(), 2.0);
        assert!(matches!(
            m.intensity(0.0),
            Err(DesignError::NonpositiveLinearComponent { .. })
        ));
        assert!(m.intensity(-1.0).is_err());
    }

    #[test]
    fn elemental_info_examples() {
        let m = ModelSpec::one_factor();
        let e = m.elemental_info(&[0.0], &beta(&[1.0, 0.0])).unwrap();
        assert_eq!(e.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let e = m.elemental_info(&[1.0], &beta(&[1.0, 1.0])).unwrap();
        assert_eq!(e.matrix(), &DMatrix::from_row_slice(2, 2, &[0.25; 4]));
        let m3 = m.with_intensity(Intensity::gamma(3.0)).unwrap();
        let e3 = m3.elemental_info(&[1.0], &beta(&[1.0, 1.0])).unwrap();
        assert!((e3.matrix() - e.matrix() * 3.0).amax() < 1e-15);
    }

    #[test]
    fn design_info_endpoint_design() {
        let m = ModelSpec::one_factor();
        let xi = Design::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let info = m.design_info(&xi, &beta(&[1.0, 1.0])).unwrap();
        let (l0, l1) = (1.0, 0.25);
        let expected =
            DMatrix::from_row_slice(2, 2, &[(l0 + l1) / 2.0, l1 / 2.0, l1 / 2.0, l1 / 2.0]);
        assert!((info.matrix() - expected).amax() < 1e-15);

        let permuted = Design::new(vec![vec![1.0], vec![0.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.design_info(&permuted, &beta(&[1.0, 1.0])).unwrap(), info);

        let single = Design::one_point(vec![0.3]);
        assert_eq!(
            m.design_info(&single, &beta(&[1.0, 1.0])).unwrap(),
            m.elemental_info(&[0.3], &beta(&[1.0, 1.0])).unwrap()
        );
    }

    #[test]
    fn design_info_reports_offending_index() {
        let m = ModelSpec::one_factor();
        let xi = Design::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let err = m.design_info(&xi, &beta(&[1.0, -1.0])).unwrap_err();
        assert_eq!(
            err,
            DesignError::NonpositiveLinearComponent {
                value: 0.0,
                index: Some(1)
            }
        );
    }

    #[test]
    fn weight_matrix_discrete_endpoints() {
        // c_k = (a^-k + b^-k)/2 with a = 1, b = 2
        let m = ModelSpec::one_factor();
        let nu = WeightingMeasure::discrete_uniform(vec![vec![0.0], vec![1.0]]);
        let v = m.weight_matrix_v(&beta(&[1.0, 1.0]), &nu).unwrap();
        let s = 1.0 / 16.0;
        let expected = DMatrix::from_row_slice(2, 2, &[1.0 + s, s, s, s]) * 0.5;
        assert!((v - expected).amax() < 1e-15);
    }

    #[test]
    fn weight_matrix_midpoint_mass() {
        let (a, b) = (1.0f64, 2.0f64);
        let m = ModelSpec::one_factor();
        let v = m
            .weight_matrix_v(&beta(&[1.0, 1.0]), &WeightingMeasure::point_mass(vec![0.5]))
            .unwrap();
        for (k, (i, j)) in [(0, 0), (0, 1), (1, 1)].iter().enumerate() {
            let vk = 2f64.powi(4 - k as i32) / (a + b).powi(4);
            assert!((v[(*i, *j)] - vk).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_matrix_uniform_closed_form() {
        let (a, b) = (1.0f64, 2.0f64);
        let m = ModelSpec::one_factor();
        let v = m.weight_matrix_v(&beta(&[a, b - a]), &WeightingMeasure::uniform()).unwrap();
        let v0 = (a * a + a * b + b * b) / (3.0 * a.powi(3) * b.powi(3));
        let v1 = (2.0 * a + b) / (6.0 * a * a * b.powi(3));
        let v2 = 1.0 / (3.0 * a * b.powi(3));
        assert!((v[(0, 0)] - v0).abs() < 1e-13);
        assert!((v[(0, 1)] - v1).abs() < 1e-13);
        assert!((v[(1, 1)] - v2).abs() < 1e-13);
    }

    #[test]
    fn weight_matrix_rejects_nonpositive_nodes() {
        let m = ModelSpec::one_factor();
        let err = m
            .weight_matrix_v(&beta(&[1.0, -2.0]), &WeightingMeasure::uniform())
            .unwrap_err();
        assert!(matches!(err, DesignError::NonpositiveLinearComponent { .. }));
    }

    #[test]
    fn parameter_positivity() {
        let m = ModelSpec::two_factor();
        assert!(m.check_parameter(&beta(&[1.0, 2.0, 2.0])).is_ok());
        assert!(m.check_parameter(&beta(&[1.0, -1.0, 0.5])).is_err());
        assert!(m.check_parameter(&beta(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn dependent_basis_rejected() {
        let b = Basis::custom("dup", 3, |x: &[f64]| vec![1.0, x[0], 2.0 * x[0]]);
        let err = ModelSpec::new(1, b, Intensity::gamma(1.0), Region::unit_box(1));
        assert!(matches!(err, Err(DesignError::InvalidModel(_))));
        let short = Basis::custom("short", 3, |x: &[f64]| vec![1.0, x[0]]);
        assert!(ModelSpec::new(1, short, Intensity::gamma(1.0), Region::unit_box(1)).is_err());
        assert!(ModelSpec::new(1, Basis::Linear, Intensity::gamma(0.0), Region::unit_box(1)).is_err());
    }

    #[test]
    fn custom_basis_positivity_uses_grid() {
        // (1, x, x^2): z = 1 - 3x + 2.2x^2 dips below zero inside (0, 1)
        // while staying positive at both endpoints.
        let b = Basis::custom("quadratic", 3, |x: &[f64]| vec![1.0, x[0], x[0] * x[0]]);
        let m = ModelSpec::new(1, b, Intensity::gamma(1.0), Region::unit_box(1)).unwrap();
        let bad = beta(&[1.0, -3.0, 2.2]);
        assert!(m.check_parameter(&bad).is_err());
        assert!(m.check_parameter(&beta(&[1.0, 1.0, 1.0])).is_ok());
    }

    #[test]
    fn model_json_round_trip() {
        let json = r#"{"dim_x":1,"basis":"linear","region":{"lower":[0],"upper":[1]},"kappa":1.0}"#;
        let m: ModelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(m.p(), 2);
        let back: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(back["basis"], "linear");
        assert_eq!(back["region"]["upper"][0], 1.0);
        let bad = r#"{"dim_x":1,"basis":"cubic","region":{"lower":[0],"upper":[1]}}"#;
        assert!(serde_json::from_str::<ModelSpec>(bad).is_err());
    }
}
