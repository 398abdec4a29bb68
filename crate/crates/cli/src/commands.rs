use std::path::Path;

use optdesign::criteria::{self, equivalence_check_on, DEFAULT_SENSITIVITY_TOL};
use optdesign::optimize::closed_form::classify_region;
use optdesign::optimize::maximin::{equal_slopes_gamma_grid, equal_slopes_maximin};
use optdesign::optimize::{local_opt_design, OptimizeOptions};
use optdesign::transforms::transfer_optimal;
use optdesign::{Design, ModelSpec, ParameterVector, Point, Region, WeightingMeasure};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{self, format_point, print_design, table_weight};

pub fn info(model: &str, beta: Option<&str>, design: Option<&Path>, criterion: Option<&str>) -> CliResult<()> {
    let model = io::load_model(model)?;
    println!("basis       {} (p = {})", model.basis().name(), model.p());
    println!("dim_x       {}", model.dim_x());
    match model.region() {
        Region::Box { lower, upper } => {
            println!("region      box {} to {}", format_point(lower), format_point(upper))
        }
        Region::Finite { points } => println!("region      {} points", points.len()),
    }
    match model.kappa() {
        Some(k) => println!("intensity   gamma, kappa = {k}"),
        None => println!("intensity   {:?}", model.intensity_kind()),
    }
    println!("extremal    {}", model.region().extremal_points().iter().map(|x| format_point(x)).collect::<Vec<_>>().join(" "));
    let Some(beta) = beta else { return Ok(()) };
    let beta = io::parse_beta(beta)?;
    model.check_parameter(&beta)?;
    let reduced = beta.reduced();
    println!("beta        {:?} (reduced {:?})", beta.as_slice(), reduced);
    if model.dim_x() == 2 && model.p() == 3 && model.region().extremal_points().len() == 4 {
        if let Ok(label) = classify_region(reduced[0], reduced[1]) {
            println!("D-region    {label:?}");
        }
    }
    let Some(path) = design else { return Ok(()) };
    let xi = io::load_design(path)?;
    let m = model.design_info(&xi, &beta)?;
    println!("M           {:?}", m.matrix().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>());
    println!("det(M^-1)   {}", criteria::d_value(&m));
    println!("det(M)^-1/p {}", criteria::d_homogeneous(&m, model.p()));
    if let Some(c) = criterion {
        let crit = io::load_criterion(c)?;
        println!("{:<11} {}", crit.name(), criteria::criterion_value(&model, &xi, &beta, &crit)?);
    }
    Ok(())
}

pub fn optimize(
    model: &str,
    beta: &str,
    criterion: &str,
    candidates: Option<&Path>,
    options: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<()> {
    let model = io::load_model(model)?;
    let beta = io::parse_beta(beta)?;
    let crit = io::load_criterion(criterion)?;
    let candidates: Option<Vec<Point>> = candidates.map(io::read_json).transpose()?;
    let opts: OptimizeOptions = match options {
        Some(p) => io::read_json(p)?,
        None => OptimizeOptions::default(),
    };
    let result = local_opt_design(&model, &beta, &crit, candidates.as_deref(), &opts)?;
    println!("{}-optimal design at beta = {:?}", crit.name(), beta.as_slice());
    print_design(&result.design.sorted());
    println!("criterion value   {}", result.criterion_value);
    println!(
        "max sensitivity   {} (bound {})",
        result.certificate.max_sensitivity, result.certificate.bound
    );
    println!("iterations        {}", result.iterations);
    if let Some(path) = out {
        io::write_json(path, &result)?;
    }
    Ok(())
}

pub struct TransferRequest<'a> {
    pub model: &'a str,
    pub beta: &'a str,
    pub design: &'a Path,
    pub transform: &'a str,
    pub criterion: &'a str,
    pub param_mode: Option<&'a str>,
    pub inverse: bool,
    pub assert_optimal: bool,
    pub out: Option<&'a Path>,
}

#[derive(Serialize)]
struct TransferBundle {
    model: ModelSpec,
    design: Design,
    beta: ParameterVector,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<WeightingMeasure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<criteria::Certificate>,
}

pub fn transfer(req: TransferRequest<'_>) -> CliResult<()> {
    let model = io::load_model(req.model)?;
    let beta = io::parse_beta(req.beta)?;
    model.check_parameter(&beta)?;
    let xi = io::load_design(req.design)?;
    xi.check_in_region(model.region())?;
    let crit = io::load_criterion(req.criterion)?;
    let mode = req.param_mode.map(io::parse_mode).transpose()?;
    let mut pair = io::load_transform(req.transform, &model, mode)?;
    if req.inverse {
        pair = pair.inverse();
    }
    let t = transfer_optimal(&model, &xi, &pair, &crit)?;
    let beta_t = t.beta(&beta)?;
    println!("mapped beta  {:?}", beta_t.as_slice());
    print_design(&t.design.sorted());
    let certificate = if req.assert_optimal {
        let cert = criteria::equivalence_check(&t.model, &t.design, &beta_t, &t.criterion, DEFAULT_SENSITIVITY_TOL)?;
        println!(
            "re-certification: max sensitivity {} (bound {}) {}",
            cert.max_sensitivity,
            cert.bound,
            if cert.passed { "passed" } else { "FAILED" }
        );
        Some(cert)
    } else {
        None
    };
    let bundle = TransferBundle {
        model: t.model.clone(),
        design: t.design.sorted(),
        beta: beta_t,
        nu: t.criterion.measure().cloned(),
        certificate: certificate.clone(),
    };
    if let Some(path) = req.out {
        io::write_json(path, &bundle)?;
    }
    match certificate {
        Some(c) if !c.passed => Err(CliError::Numerical(format!(
            "image design is not optimal: sensitivity {} exceeds {} at {}",
            c.max_sensitivity,
            c.bound,
            format_point(&c.point)
        ))),
        _ => Ok(()),
    }
}

pub fn check(
    model: &str,
    beta: &str,
    design: &Path,
    criterion: &str,
    grid: usize,
    out: Option<&Path>,
) -> CliResult<()> {
    let model = io::load_model(model)?;
    let beta = io::parse_beta(beta)?;
    let crit = io::load_criterion(criterion)?;
    let xi = io::load_design(design)?;
    xi.check_in_region(model.region())?;
    if grid < 2 {
        return Err(CliError::Input("--grid needs at least 2 points per axis".into()));
    }
    let cap = grid.saturating_pow(model.dim_x() as u32).clamp(criteria::CHECK_GRID_CAP, 1_000_000);
    let points = model.region().check_points(grid, cap);
    let cert = equivalence_check_on(&model, &xi, &beta, &crit, &points, DEFAULT_SENSITIVITY_TOL)?;
    println!("criterion value   {}", criteria::criterion_value(&model, &xi, &beta, &crit)?);
    println!("max sensitivity   {} at {}", cert.max_sensitivity, format_point(&cert.point));
    println!("bound             {}", cert.bound);
    println!("{}", if cert.passed { "optimal" } else { "not optimal" });
    if let Some(path) = out {
        io::write_json(path, &cert)?;
    }
    if cert.passed {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "equivalence check failed: {} > {}",
            cert.max_sensitivity, cert.bound
        )))
    }
}

fn parse_linear_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Input(format!("grid '{spec}' must look like lo:hi:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else { return Err(bad()) };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n < 2 || hi <= lo {
        return Err(bad());
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

pub fn maximin(
    grid: Option<&str>,
    include_limit: bool,
    w: Option<f64>,
    out: Option<&Path>,
    curve: Option<&Path>,
) -> CliResult<()> {
    let gammas = match grid {
        Some(spec) => parse_linear_grid(spec)?,
        None => equal_slopes_gamma_grid(),
    };
    if let Some(w) = w {
        if !(0.0..=0.5).contains(&w) {
            return Err(CliError::Input(format!("family weight {w} must lie in [0, 1/2]")));
        }
    }
    let result = equal_slopes_maximin(&gammas, include_limit, w)?;
    println!("w                 {:.6}", result.w);
    println!("min efficiency    {:.6}", result.min_efficiency);
    match result.worst_index {
        Some(i) => println!("attained at       gamma = {}", gammas[i]),
        None => println!("attained at       gamma -> infinity"),
    }
    if result.at_grid_edge {
        println!("warning: the minimum sits at the largest grid value; the infimum may lie beyond the grid");
    }
    print_design(&result.design.sorted());
    if let Some(path) = out {
        io::write_json(path, &result)?;
    }
    if let Some(path) = curve {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["param", "value"])?;
        for (g, e) in gammas.iter().zip(&result.efficiencies) {
            wtr.write_record([g.to_string(), e.to_string()])?;
        }
        wtr.flush()?;
    }
    Ok(())
}

/// Weights of `design` in the given point order, formatted for tables.
pub fn table_row(design: &Design, points: &[Point]) -> Vec<String> {
    design.weights_on(points).into_iter().map(table_weight).collect()
}
