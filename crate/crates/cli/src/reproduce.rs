//! One-command recomputation of the tables and figures of the gamma-model
//! design results. Every target writes CSV files and fails with exit code 2
//! and a diff report when a recomputed value misses its tolerance.

use std::path::Path;

use optdesign::criteria::{efficiency, CriterionSpec};
use optdesign::optimize::closed_form::{
    classify_region, equal_slopes_closed_form, prop1_closed_form, w_star_beta1_zero, NuVariant,
    RegionLabel,
};
use optdesign::optimize::maximin::{equal_slopes_gamma_grid, equal_slopes_maximin};
use optdesign::optimize::{local_opt_design, optimal_weights_fixed_support, OptimizeOptions};
use optdesign::{ModelSpec, ParameterVector, Point, WeightingMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::table_row;
use crate::error::{CliError, CliResult};
use crate::io;

const PRINTED_TOL: f64 = 1e-3;
const CLOSED_FORM_TOL: f64 = 1e-6;

fn vertices() -> Vec<Point> {
    vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]
}

fn beta(v: &[f64]) -> ParameterVector {
    ParameterVector::new(v.to_vec())
}

fn finish(target: &str, mismatches: Vec<String>) -> CliResult<()> {
    if mismatches.is_empty() {
        println!("{target}: all values within tolerance");
        return Ok(());
    }
    let mut report = format!("{target}: {} value(s) outside tolerance", mismatches.len());
    for m in &mismatches {
        report.push_str("\n  ");
        report.push_str(m);
    }
    Err(CliError::Numerical(report))
}

/// Minimal-support regions on a grid of reduced parameters, checked against
/// numerically optimal weights on the four vertices.
pub fn table1(out: &Path) -> CliResult<()> {
    let model = ModelSpec::two_factor();
    let opts = OptimizeOptions::default();
    let verts = vertices();
    let mut wtr = csv::Writer::from_path(out.join("table1.csv"))?;
    wtr.write_record(["gamma1", "gamma2", "region", "w00", "w01", "w10", "w11"])?;
    let mut counts = [0usize; 5];
    let mut mismatches = Vec::new();
    let n = 60;
    for i in 1..=n {
        for j in 1..=n {
            let g1 = -1.0 + 6.0 * i as f64 / n as f64;
            let g2 = -1.0 + 6.0 * j as f64 / n as f64;
            if g1 + g2 <= -1.0 {
                continue;
            }
            let label = classify_region(g1, g2)?;
            let r = optimal_weights_fixed_support(&model, &beta(&[1.0, g1, g2]), &CriterionSpec::D, &verts, &opts)?;
            let w = r.design.weights_on(&verts);
            counts[label as usize] += 1;
            match label.minimal_design() {
                Some(minimal) => {
                    let d = r.design.distance(&minimal);
                    if d > CLOSED_FORM_TOL {
                        mismatches.push(format!("({g1:.2}, {g2:.2}) {label:?}: numerical optimum differs by {d:.2e}"));
                    }
                }
                None => {
                    if w.iter().any(|v| *v <= 0.0) {
                        mismatches.push(format!("({g1:.2}, {g2:.2}) interior: weights {w:?}"));
                    }
                }
            }
            let mut row = vec![g1.to_string(), g2.to_string(), format!("{label:?}")];
            row.extend(w.iter().map(|v| v.to_string()));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    println!("region  condition (gamma_j = beta_j / beta_0)        support          points");
    let rows = [
        (RegionLabel::B1, "gamma1 gamma2 >= 1", "x1 x2 x3"),
        (RegionLabel::B2, "(1 + gamma1 + gamma2)^2 <= gamma1 gamma2", "x2 x3 x4"),
        (RegionLabel::B3, "(1 + gamma1)^2 <= -gamma1 gamma2", "x1 x2 x4"),
        (RegionLabel::B4, "(1 + gamma2)^2 <= -gamma1 gamma2", "x1 x3 x4"),
    ];
    for (label, cond, support) in rows {
        println!("{:<7} {cond:<44} {support:<16} {}", format!("{label:?}"), counts[label as usize]);
    }
    println!("interior (four-point support)                                         {}", counts[4]);
    finish("table1", mismatches)
}

/// Locally IMSE-optimal weights for uniform weighting on the unit square.
pub fn table2(out: &Path) -> CliResult<()> {
    let model = ModelSpec::two_factor();
    let crit = CriterionSpec::imse(WeightingMeasure::uniform());
    let opts = OptimizeOptions::default();
    let verts = vertices();
    let rows: [([f64; 3], &str, [f64; 4]); 6] = [
        ([1.0, 0.0, 0.0], "1 0 0", [0.250, 0.250, 0.250, 0.250]),
        ([1.0, 1.0, 1.0], "1 1 1", [0.250, 0.300, 0.300, 0.150]),
        ([1.0, 2.0, 2.0], "1 2 2", [0.242, 0.362, 0.362, 0.034]),
        ([1.0, 3.0, 3.0], "1 3 3", [0.236, 0.382, 0.382, 0.000]),
        ([1.0, 10.0, 10.0], "1 10 10", [0.214, 0.393, 0.393, 0.000]),
        ([1.0, -3.0 / 7.0, -3.0 / 7.0], "1 -3/7 -3/7", [0.000, 0.382, 0.382, 0.236]),
    ];
    let mut wtr = csv::Writer::from_path(out.join("table2.csv"))?;
    wtr.write_record(["beta0", "beta1", "beta2", "w00", "w01", "w10", "w11", "imse"])?;
    let mut mismatches = Vec::new();
    println!("{:<14} {:>7} {:>7} {:>7} {:>7}", "beta", "(0,0)", "(0,1)", "(1,0)", "(1,1)");
    for (b, label, printed) in rows {
        let r = local_opt_design(&model, &beta(&b), &crit, None, &opts)?;
        let w = r.design.weights_on(&verts);
        let cells = table_row(&r.design, &verts);
        println!("{label:<14} {:>7} {:>7} {:>7} {:>7}", cells[0], cells[1], cells[2], cells[3]);
        for (k, (got, want)) in w.iter().zip(&printed).enumerate() {
            if (got - want).abs() > PRINTED_TOL {
                mismatches.push(format!(
                    "beta ({label}) vertex {}: computed {got:.5}, printed {want:.3}, diff {:.2e}",
                    io::format_point(&verts[k]),
                    (got - want).abs()
                ));
            }
        }
        let mut row: Vec<String> = b.iter().map(|v| v.to_string()).collect();
        row.extend(w.iter().map(|v| v.to_string()));
        row.push(r.criterion_value.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    finish("table2", mismatches)
}

/// IMSE-optimal one-factor designs against the three closed forms.
pub fn prop1(out: &Path, seed: u64) -> CliResult<()> {
    let model = ModelSpec::one_factor();
    let opts = OptimizeOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wtr = csv::Writer::from_path(out.join("prop1.csv"))?;
    wtr.write_record(["beta0", "beta1", "nu", "w0_numerical", "w0_closed_form"])?;
    let mut mismatches = Vec::new();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let b0 = rng.gen_range(0.1..5.0);
        let b = beta(&[b0, b0 * rng.gen_range(-0.95..10.0)]);
        for variant in [NuVariant::UniformContinuous, NuVariant::UniformEndpoints, NuVariant::MidpointMass] {
            let closed = prop1_closed_form(&b, variant)?;
            let r = local_opt_design(&model, &b, &CriterionSpec::imse(variant.measure()), None, &opts)?;
            let (got, want) = (r.design.weight_at(&[0.0]), closed.weight_at(&[0.0]));
            let err = r.design.distance(&closed);
            worst = worst.max(err);
            if err > 1e-9 {
                mismatches.push(format!("beta {:?}, {variant:?}: distance {err:.2e}", b.as_slice()));
            }
            wtr.write_record([
                b.as_slice()[0].to_string(),
                b.as_slice()[1].to_string(),
                format!("{variant:?}"),
                got.to_string(),
                want.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    println!("prop1: 600 optima, largest distance to the closed form {worst:.2e}");
    finish("prop1", mismatches)
}

/// `w*` against `gamma_2` for `beta_1 = 0`, with the numerical optimum.
pub fn fig3(out: &Path) -> CliResult<()> {
    let model = ModelSpec::two_factor();
    let opts = OptimizeOptions::default();
    let verts = vertices();
    let mut wtr = csv::Writer::from_path(out.join("fig3.csv"))?;
    wtr.write_record(["param", "value", "value2"])?;
    let mut mismatches = Vec::new();
    let n = 200;
    for k in 0..n {
        let g = -0.45 + 10.45 * k as f64 / (n - 1) as f64;
        let w = w_star_beta1_zero(g)?;
        let r = optimal_weights_fixed_support(&model, &beta(&[1.0, 0.0, g]), &CriterionSpec::D, &verts, &opts)?;
        let numeric = r.design.weight_at(&verts[0]);
        if (numeric - w).abs() > CLOSED_FORM_TOL {
            mismatches.push(format!("gamma2 {g:.4}: closed form {w:.7}, numerical {numeric:.7}"));
        }
        wtr.write_record([g.to_string(), w.to_string(), numeric.to_string()])?;
    }
    wtr.flush()?;
    println!("fig3: w*(0) = {}, w*(1) = {:.7}, w*(10) = {:.7}", w_star_beta1_zero(0.0)?, w_star_beta1_zero(1.0)?, w_star_beta1_zero(10.0)?);
    finish("fig3", mismatches)
}

#[derive(Serialize)]
struct Fig4Summary {
    w_star: f64,
    min_efficiency: f64,
    uniform_min_efficiency: f64,
    efficiency_at_gamma_one: f64,
    thresholds: [f64; 3],
}

/// D-efficiency of the maximin design and of the uniform design in the
/// equal-slopes family.
pub fn fig4(out: &Path) -> CliResult<()> {
    let grid = equal_slopes_gamma_grid();
    let best = equal_slopes_maximin(&grid, true, None)?;
    let uniform = equal_slopes_maximin(&grid, true, Some(0.25))?;
    let model = ModelSpec::two_factor();
    let at_one = efficiency(
        &model,
        &best.design,
        &beta(&[1.0, 1.0, 1.0]),
        &CriterionSpec::D,
        &equal_slopes_closed_form(1.0)?,
    )?
    .value;
    let mut wtr = csv::Writer::from_path(out.join("fig4.csv"))?;
    wtr.write_record(["param", "value", "value2"])?;
    for ((g, a), b) in grid.iter().zip(&best.efficiencies).zip(&uniform.efficiencies) {
        if *g <= 10.0 {
            wtr.write_record([g.to_string(), a.to_string(), b.to_string()])?;
        }
    }
    wtr.flush()?;
    let summary = Fig4Summary {
        w_star: best.w,
        min_efficiency: best.min_efficiency,
        uniform_min_efficiency: uniform.min_efficiency,
        efficiency_at_gamma_one: at_one,
        thresholds: [-0.5, -1.0 / 3.0, 1.0],
    };
    io::write_json(&out.join("fig4.json"), &summary)?;
    println!("maximin w*        {:.6}", best.w);
    println!("min efficiency    {:.6}", best.min_efficiency);
    println!("uniform design    {:.6}", uniform.min_efficiency);
    println!("eff at gamma = 1  {at_one:.6}");
    println!("regime thresholds gamma = -1/2, -1/3, 1");
    let mut mismatches = Vec::new();
    let expected_w = (3.0 - 3f64.sqrt()) / 6.0;
    if (best.w - expected_w).abs() > 1e-4 {
        mismatches.push(format!("w* {:.6} vs {expected_w:.6}", best.w));
    }
    if (best.min_efficiency - 0.8660).abs() > PRINTED_TOL {
        mismatches.push(format!("min efficiency {:.6} vs 0.8660", best.min_efficiency));
    }
    if (uniform.min_efficiency - 0.8585).abs() > PRINTED_TOL {
        mismatches.push(format!("uniform min efficiency {:.6} vs 0.8585", uniform.min_efficiency));
    }
    if at_one < 0.8660 - PRINTED_TOL {
        mismatches.push(format!("efficiency at gamma = 1 is {at_one:.6} < 0.8650"));
    }
    finish("fig4", mismatches)
}
