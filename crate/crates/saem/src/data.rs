//! CSV data files. One observation per row after a header row:
//!
//! - `censored_normal`: `value,censored` with `censored` in {0, 1};
//! - `mixture`, `normal_mean`: `value`;
//! - `bivariate_normal`: `x1,x2`, either (not both) may be `NA`.

use std::io::Write;
use std::path::Path;

use saem_core::refmodels::{BivariateRow, CensoredObservation};

use crate::error::CliError;

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::DataFormat { path: path.to_path_buf(), line: 1, message: e.to_string() })?;
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::DataFormat { path: path.to_path_buf(), line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(CliError::DataFormat {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", header.join(","), found.join(",")),
        });
    }
    Ok(rdr)
}

fn records(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>, CliError> {
    let mut rdr = reader(path, header)?;
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| CliError::DataFormat { path: path.to_path_buf(), line, message: e.to_string() })?;
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(CliError::DataFormat { path: path.to_path_buf(), line: 1, message: "no observations".into() });
    }
    Ok(rows)
}

fn number(path: &Path, line: usize, field: &str) -> Result<f64, CliError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::DataFormat { path: path.to_path_buf(), line, message: format!("not a finite number: `{field}`") }),
    }
}

pub fn read_censored(path: &Path) -> Result<Vec<CensoredObservation>, CliError> {
    records(path, &["value", "censored"])?
        .into_iter()
        .map(|(line, f)| {
            let value = number(path, line, &f[0])?;
            let censored = match f[1].as_str() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(CliError::DataFormat {
                        path: path.to_path_buf(),
                        line,
                        message: format!("censored flag must be 0 or 1, found `{other}`"),
                    })
                }
            };
            Ok(CensoredObservation { value, censored })
        })
        .collect()
}

pub fn read_values(path: &Path) -> Result<Vec<f64>, CliError> {
    records(path, &["value"])?.into_iter().map(|(line, f)| number(path, line, &f[0])).collect()
}

pub fn read_bivariate(path: &Path) -> Result<Vec<BivariateRow>, CliError> {
    records(path, &["x1", "x2"])?
        .into_iter()
        .map(|(line, f)| {
            let cell = |s: &str| if s == "NA" { Ok(None) } else { number(path, line, s).map(Some) };
            let row = BivariateRow { x1: cell(&f[0])?, x2: cell(&f[1])? };
            if row.x1.is_none() && row.x2.is_none() {
                return Err(CliError::DataFormat { path: path.to_path_buf(), line, message: "both coordinates missing".into() });
            }
            Ok(row)
        })
        .collect()
}

pub fn write_censored(path: &Path, obs: &[CensoredObservation]) -> Result<(), CliError> {
    let mut out = String::from("value,censored\n");
    for o in obs {
        out.push_str(&format!("{:?},{}\n", o.value, u8::from(o.censored)));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| CliError::io(path, e))
}
