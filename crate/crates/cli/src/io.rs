//! Loading command inputs. Models, criteria and transforms accept either a
//! JSON file or a short inline form.

use std::fs;
use std::path::Path;

use optdesign::transforms::TransformFile;
use optdesign::{CriterionSpec, Design, ModelSpec, ParamMode, ParameterVector, TransformPair, WeightingMeasure};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// `one-factor`, `two-factor` or a model JSON file.
pub fn load_model(arg: &str) -> CliResult<ModelSpec> {
    match arg {
        "one-factor" => Ok(ModelSpec::one_factor()),
        "two-factor" => Ok(ModelSpec::two_factor()),
        path => read_json(Path::new(path)),
    }
}

/// `D`, `IMSE` (uniform on the region) or a criterion JSON file.
pub fn load_criterion(arg: &str) -> CliResult<CriterionSpec> {
    match arg {
        "D" | "d" => Ok(CriterionSpec::D),
        "IMSE" | "imse" => Ok(CriterionSpec::imse(WeightingMeasure::uniform())),
        path => read_json(Path::new(path)),
    }
}

pub fn load_design(path: &Path) -> CliResult<Design> {
    read_json(path)
}

fn parse_number(token: &str) -> CliResult<f64> {
    let token = token.trim();
    let bad = || CliError::Input(format!("cannot parse '{token}' as a number"));
    match token.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0.0 {
                return Err(bad());
            }
            Ok(n / d)
        }
        None => token.parse().map_err(|_| bad()),
    }
}

/// Comma-separated parameter, fractions allowed: `1,-3/7,-3/7`.
pub fn parse_beta(arg: &str) -> CliResult<ParameterVector> {
    let values = arg.split(',').map(parse_number).collect::<CliResult<Vec<f64>>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Input("parameter values must be finite".into()));
    }
    Ok(ParameterVector::new(values))
}

pub fn parse_mode(arg: &str) -> CliResult<ParamMode> {
    match arg {
        "linear" => Ok(ParamMode::Linear),
        "intercept_rescaled" | "rescaled" => Ok(ParamMode::InterceptRescaled),
        other => Err(CliError::Input(format!(
            "unknown parameter mode '{other}' (expected linear or intercept_rescaled)"
        ))),
    }
}

/// A transform JSON file or an inline name such as `reflect:1,2`; `mode`
/// overrides the parameter mode of the file.
pub fn load_transform(arg: &str, model: &ModelSpec, mode: Option<ParamMode>) -> CliResult<TransformPair> {
    let path = Path::new(arg);
    let file: TransformFile = if path.is_file() {
        read_json(path)?
    } else {
        TransformFile::Shortcut(arg.to_string())
    };
    let pair = file.resolve(model)?;
    match mode {
        Some(m) if m != pair.mode() => Ok(TransformPair::new(model, pair.g().clone(), m)?),
        _ => Ok(pair),
    }
}

/// Weight as printed in tables: three decimals, tiny weights as `0.000`.
pub fn table_weight(w: f64) -> String {
    if w < 5e-4 {
        "0.000".to_string()
    } else {
        format!("{w:.3}")
    }
}

pub fn format_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(", "))
}

pub fn print_design(design: &Design) {
    for (x, w) in design.atoms() {
        println!("  {:<24} {}", format_point(x), table_weight(w));
    }
}
