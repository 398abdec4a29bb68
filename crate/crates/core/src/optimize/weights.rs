//! Optimal weights on a fixed support and locally optimal designs.
//!
//! Weights are first improved by multiplicative updates, which decrease the
//! criterion monotonically, and then refined by Newton steps restricted to
//! the face of the simplex spanned by the active support points. Every
//! returned design is certified by the equivalence check.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::criteria::{self, Certificate, CriterionSpec};
use crate::design::Design;
use crate::error::{DesignError, Result};
use crate::linalg;
use crate::model::{ModelSpec, ParameterVector};
use crate::region::{max_dist, Point, POINT_TOL};

/// Relative gap at which the multiplicative phase hands over to Newton.
const HANDOVER_GAP: f64 = 1e-3;
const HANDOVER_ITERS: usize = 500;
const MAX_NEWTON_STEPS: usize = 200;
const MAX_AUGMENTATIONS: usize = 50;
const HISTORY_STRIDE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    pub weight_tol: f64,
    pub sensitivity_tol: f64,
    pub prune_threshold: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_iters: 10_000,
            weight_tol: 1e-10,
            sensitivity_tol: 1e-6,
            prune_threshold: 1e-8,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.weight_tol > 0.0
            && self.sensitivity_tol > 0.0
            && self.prune_threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(DesignError::InvalidModel("optimizer options must be positive".into()))
        }
    }
}

/// Certified design with its criterion value (`det(M^-1)` for D,
/// `trace(V M^-1)` for IMSE).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub design: Design,
    pub criterion_value: f64,
    pub certificate: Certificate,
    pub iterations: usize,
    /// Criterion values every 100 multiplicative iterations.
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// Basis vectors, intensities and `V` on a fixed support.
struct FixedSupport {
    f: Vec<DVector<f64>>,
    lambda: Vec<f64>,
    v: Option<DMatrix<f64>>,
    p: usize,
}

/// Criterion value, gradient-related sensitivities and the matrices needed
/// for second derivatives at one weight vector.
struct Eval {
    value: f64,
    sens: Vec<f64>,
    bound: f64,
    minv: DMatrix<f64>,
    a: DMatrix<f64>,
}

impl FixedSupport {
    fn new(model: &ModelSpec, beta: &ParameterVector, crit: &CriterionSpec, support: &[Point]) -> Result<Self> {
        let mut f = Vec::with_capacity(support.len());
        let mut lambda = Vec::with_capacity(support.len());
        for (i, x) in support.iter().enumerate() {
            let (fx, l) = model.basis_and_intensity(x, beta).map_err(|e| match e {
                DesignError::NonpositiveLinearComponent { value, .. } => {
                    DesignError::NonpositiveLinearComponent { value, index: Some(i) }
                }
                other => other,
            })?;
            f.push(fx);
            lambda.push(l);
        }
        let v = match crit {
            CriterionSpec::D => None,
            CriterionSpec::Imse { nu } => Some(model.weight_matrix_v(beta, nu)?),
        };
        Ok(FixedSupport { f, lambda, v, p: model.p() })
    }

    fn info(&self, w: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.p, self.p);
        for ((f, l), wi) in self.f.iter().zip(&self.lambda).zip(w) {
            if *wi > 0.0 {
                m += f * f.transpose() * (wi * l);
            }
        }
        linalg::symmetrize(&m)
    }

    /// Objective minimized by Newton: `-log det M` for D, the IMSE otherwise.
    fn objective(&self, w: &[f64]) -> f64 {
        let m = self.info(w);
        match &self.v {
            None => linalg::pd_determinant(&m).map_or(f64::INFINITY, |d| -d.ln()),
            Some(v) => linalg::pd_inverse(&m).map_or(f64::INFINITY, |inv| (v * inv).trace()),
        }
    }

    fn eval(&self, w: &[f64]) -> Option<Eval> {
        let m = self.info(w);
        let minv = linalg::pd_inverse(&m)?;
        let (value, a, bound) = match &self.v {
            None => (1.0 / linalg::pd_determinant(&m)?, minv.clone(), self.p as f64),
            Some(v) => {
                let t = (v * &minv).trace();
                (t, linalg::symmetrize(&(&minv * v * &minv)), t)
            }
        };
        let sens = self
            .f
            .iter()
            .zip(&self.lambda)
            .map(|(f, l)| l * linalg::quad_form(&a, f))
            .collect();
        Some(Eval { value, sens, bound, minv, a })
    }

    fn multiplicative_step(&self, w: &mut [f64], e: &Eval) {
        match self.v {
            None => {
                for (wi, s) in w.iter_mut().zip(&e.sens) {
                    *wi *= s / e.bound;
                }
            }
            Some(_) => {
                for (wi, s) in w.iter_mut().zip(&e.sens) {
                    *wi *= s.max(0.0).sqrt();
                }
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= total);
    }

    /// Gradient and Hessian of the Newton objective on the index set `idx`.
    fn derivatives(&self, e: &Eval, idx: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
        let k = idx.len();
        let g = DVector::from_iterator(k, idx.iter().map(|&i| -e.sens[i]));
        let mut h = DMatrix::zeros(k, k);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate().skip(r) {
                let fi = &self.f[i];
                let fj = &self.f[j];
                let b = fi.dot(&(&e.minv * fj));
                let ll = self.lambda[i] * self.lambda[j];
                let val = match self.v {
                    None => ll * b * b,
                    Some(_) => 2.0 * ll * b * fi.dot(&(&e.a * fj)),
                };
                h[(r, c)] = val;
                h[(c, r)] = val;
            }
        }
        (g, h)
    }
}

fn relative_gap(e: &Eval, idx: impl Iterator<Item = usize>) -> f64 {
    idx.map(|i| e.sens[i]).fold(f64::NEG_INFINITY, f64::max) / e.bound - 1.0
}

/// Newton direction on the face `sum_{idx} d = 0`.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let k = g.len();
    let ridge = [0.0, 1e-12, 1e-9, 1e-6];
    for r in ridge {
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        kkt.view_mut((0, 0), (k, k)).copy_from(h);
        let scale = h.trace().abs() / k as f64;
        for i in 0..k {
            kkt[(i, i)] += r * scale;
            kkt[(i, k)] = 1.0;
            kkt[(k, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs.rows_mut(0, k).copy_from(&(-g));
        if let Some(sol) = kkt.lu().solve(&rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                return Some(sol.rows(0, k).into_owned());
            }
        }
    }
    None
}

/// Multiplicative updates from uniform weights, returning the weights and
/// the criterion value after every iteration.
pub fn multiplicative_weights(
    model: &ModelSpec,
    beta: &ParameterVector,
    crit: &CriterionSpec,
    support: &[Point],
    iterations: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let fs = FixedSupport::new(model, beta, crit, support)?;
    let mut w = vec![1.0 / support.len() as f64; support.len()];
    let mut values = Vec::with_capacity(iterations + 1);
    for _ in 0..=iterations {
        let e = fs.eval(&w).ok_or(DesignError::SingularInformation)?;
        values.push(e.value);
        fs.multiplicative_step(&mut w, &e);
    }
    Ok((w, values))
}

/// Optimal weights for `crit` at `beta` on the given support, certified by
/// the equivalence check restricted to the support.
pub fn optimal_weights_fixed_support(
    model: &ModelSpec,
    beta: &ParameterVector,
    crit: &CriterionSpec,
    support: &[Point],
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    opts.validate()?;
    if support.is_empty() {
        return Err(DesignError::InvalidDesign("empty support".into()));
    }
    for i in 0..support.len() {
        for j in 0..i {
            if max_dist(&support[i], &support[j]) <= POINT_TOL {
                return Err(DesignError::InvalidDesign("duplicate support points".into()));
            }
        }
    }
    let fs = FixedSupport::new(model, beta, crit, support)?;
    let n = support.len();
    let mut w = vec![1.0 / n as f64; n];
    let mut history = Vec::new();
    let mut iterations: usize = 0;

    // multiplicative phase
    let handover = HANDOVER_ITERS.min(opts.max_iters);
    loop {
        let e = fs.eval(&w).ok_or(DesignError::SingularInformation)?;
        if iterations.is_multiple_of(HISTORY_STRIDE) {
            history.push(e.value);
        }
        if relative_gap(&e, 0..n) <= HANDOVER_GAP || iterations >= handover {
            break;
        }
        fs.multiplicative_step(&mut w, &e);
        iterations += 1;
    }

    // Newton refinement with an active set
    let mut active: Vec<bool> = w.iter().map(|&wi| wi > 0.0).collect();
    let mut steps = 0;
    'outer: while steps < MAX_NEWTON_STEPS {
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
            let Some(e) = fs.eval(&w) else { break 'outer };
            let (g, h) = fs.derivatives(&e, &idx);
            let Some(d) = newton_direction(&g, &h) else { break 'outer };
            steps += 1;
            if d.amax() <= opts.weight_tol * 1e-2 {
                break;
            }
            // largest feasible step
            let mut t_max = 1.0;
            let mut blocking = None;
            for (r, &i) in idx.iter().enumerate() {
                if d[r] < 0.0 {
                    let t = -w[i] / d[r];
                    if t < t_max {
                        t_max = t;
                        blocking = Some(i);
                    }
                }
            }
            let phi0 = fs.objective(&w);
            let slope = g.dot(&d);
            let mut t = t_max;
            let mut accepted = false;
            for _ in 0..60 {
                let mut trial = w.clone();
                for (r, &i) in idx.iter().enumerate() {
                    trial[i] = (trial[i] + t * d[r]).max(0.0);
                }
                if fs.objective(&trial) <= phi0 + 1e-4 * t * slope {
                    if let Some(b) = blocking.filter(|_| t == t_max) {
                        trial[b] = 0.0;
                        active[b] = false;
                    }
                    let s: f64 = trial.iter().sum();
                    w = trial.into_iter().map(|x| x / s).collect();
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted || steps >= MAX_NEWTON_STEPS {
                break;
            }
        }
        // add the most violating inactive point, if any
        let Some(e) = fs.eval(&w) else { break };
        let worst = (0..n)
            .filter(|&i| !active[i])
            .max_by(|&a, &b| e.sens[a].total_cmp(&e.sens[b]));
        match worst {
            Some(i) if e.sens[i] > e.bound * (1.0 + 1e-12) => active[i] = true,
            _ => break,
        }
    }
    iterations += steps;

    finish(model, beta, crit, support, &fs, w, opts, iterations, history)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: &ModelSpec,
    beta: &ParameterVector,
    crit: &CriterionSpec,
    support: &[Point],
    fs: &FixedSupport,
    mut w: Vec<f64>,
    opts: &OptimizeOptions,
    mut iterations: usize,
    mut history: Vec<f64>,
) -> Result<OptimizationResult> {
    let n = support.len();
    let certify = |w: &[f64]| -> Option<(Vec<f64>, f64)> {
        let mut pruned: Vec<f64> = w
            .iter()
            .map(|&x| if x < opts.prune_threshold { 0.0 } else { x })
            .collect();
        let s: f64 = pruned.iter().sum();
        pruned.iter_mut().for_each(|x| *x /= s);
        let e = fs.eval(&pruned)?;
        Some((pruned, relative_gap(&e, 0..n)))
    };
    let mut state = certify(&w);
    // fall back to multiplicative updates if refinement did not certify
    while state.as_ref().is_none_or(|(_, gap)| *gap > opts.sensitivity_tol) {
        if iterations >= opts.max_iters {
            let gap = state.map_or(f64::INFINITY, |(_, g)| g);
            return Err(DesignError::NoConvergence { iterations, gap });
        }
        let e = fs.eval(&w).ok_or(DesignError::SingularInformation)?;
        if iterations.is_multiple_of(HISTORY_STRIDE) {
            history.push(e.value);
        }
        fs.multiplicative_step(&mut w, &e);
        iterations += 1;
        if iterations.is_multiple_of(10) {
            state = certify(&w);
        }
    }
    let (weights, _) = state.expect("checked above");
    let design = Design::from_atoms(support.iter().cloned().zip(weights))?;
    let certificate =
        criteria::equivalence_check_on(model, &design, beta, crit, support, opts.sensitivity_tol)?;
    let criterion_value = criteria::criterion_value(model, &design, beta, crit)?;
    Ok(OptimizationResult {
        design,
        criterion_value,
        certificate,
        iterations,
        history,
    })
}

/// Locally optimal design on the candidates (default: extremal points of
/// the region), certified on the whole region. Candidates are augmented by
/// the worst violator of the equivalence check when needed.
pub fn local_opt_design(
    model: &ModelSpec,
    beta: &ParameterVector,
    crit: &CriterionSpec,
    candidates: Option<&[Point]>,
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    model.check_parameter(beta)?;
    if let Some(nu) = crit.measure() {
        nu.validate(model.region())?;
    }
    let mut cand: Vec<Point> = match candidates {
        Some(c) => c.to_vec(),
        None => model.region().extremal_points(),
    };
    // extremal points alone may not carry a nonsingular design for
    // nonlinear bases; add a coarse grid in that case
    if candidates.is_none() && !model.has_affine_basis() {
        let support = Design::uniform(cand.clone())?;
        if criteria::d_value(&model.design_info(&support, beta)?).is_infinite() {
            cand = model.region().check_points(model.p() + 1, 4_096);
        }
    }
    if let Some(x) = cand.iter().find(|x| !model.region().contains(x)) {
        return Err(DesignError::OutOfRegion { point: x.clone() });
    }
    let check_points = criteria::region_check_points(model);
    for round in 0..=MAX_AUGMENTATIONS {
        let mut res = optimal_weights_fixed_support(model, beta, crit, &cand, opts)?;
        let cert = criteria::equivalence_check_on(
            model,
            &res.design,
            beta,
            crit,
            &check_points,
            opts.sensitivity_tol,
        )?;
        if cert.passed {
            res.certificate = cert;
            return Ok(res);
        }
        let known = cand.iter().any(|c| max_dist(c, &cert.point) <= POINT_TOL);
        if round == MAX_AUGMENTATIONS || known {
            return Err(cert.into_result().unwrap_err());
        }
        cand.push(cert.point);
    }
    unreachable!("loop returns on its last round")
}
