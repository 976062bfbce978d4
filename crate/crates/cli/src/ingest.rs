//! Reading trial data from JSON and CSV files.
//!
//! Count files list one record per arm:
//!
//! ```json
//! {"arms": [{"z": 0, "survived_y1": 29, "survived_y0": 4,
//!            "survived_y_missing": 4, "died": 363}, ...]}
//! ```
//!
//! and the CSV form has the same columns with a mandatory header row
//! (`survived_y_missing` may be omitted). A JSON file may instead describe a
//! known observed law, either as `{"survival": [...], "means": [...]}` or as
//! stratum proportions `{"strata": [...], "means": [...]}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use strata_bounds_core::{ArmCounts, ObservedDistribution, TrialCounts};

use crate::error::{CliError, Result};

/// Parsed input data.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Counts(TrialCounts),
    Distribution(ObservedDistribution),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArm {
    z: i64,
    survived_y1: i64,
    survived_y0: i64,
    #[serde(default)]
    survived_y_missing: i64,
    died: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountsFile {
    arms: Vec<RawArm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionFile {
    #[serde(default)]
    survival: Option<Vec<f64>>,
    #[serde(default)]
    strata: Option<Vec<f64>>,
    means: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
struct ArmRecord {
    z: usize,
    survived_y1: u64,
    survived_y0: u64,
    survived_y_missing: u64,
    died: u64,
}

/// Reads a counts or distribution file; `.csv` files are parsed as CSV,
/// everything else as JSON.
pub fn read_input(path: &Path) -> Result<(Input, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let input = if is_csv {
        Input::Counts(parse_counts_csv(&bytes)?)
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::input(path.display().to_string(), e.to_string()))?;
        parse_json(text)?
    };
    Ok((input, bytes))
}

/// Reads a counts file, refusing distribution files.
pub fn ingest(path: &Path) -> Result<TrialCounts> {
    match read_input(path)?.0 {
        Input::Counts(c) => Ok(c),
        Input::Distribution(_) => Err(CliError::input(
            path.display().to_string(),
            "expected arm counts, found an observed distribution",
        )),
    }
}

fn json_error(e: serde_json::Error) -> CliError {
    CliError::input(
        format!("line {}, column {}", e.line(), e.column()),
        e.to_string(),
    )
}

/// Parses either JSON schema.
pub fn parse_json(text: &str) -> Result<Input> {
    let value: Value = serde_json::from_str(text).map_err(json_error)?;
    if value.get("arms").is_some() {
        // Parse again from text so that errors carry line numbers.
        let file: CountsFile = serde_json::from_str(text).map_err(json_error)?;
        let rows = file
            .arms
            .into_iter()
            .enumerate()
            .map(|(i, a)| (format!("arms[{i}]"), a))
            .collect();
        return Ok(Input::Counts(validate(rows)?));
    }
    let file: DistributionFile = serde_json::from_str(text).map_err(json_error)?;
    let obs = match (file.survival, file.strata) {
        (Some(surv), None) => ObservedDistribution::new(surv, file.means)?,
        (None, Some(pi)) => {
            let means: Option<Vec<f64>> = file.means.into_iter().collect();
            let means = means.ok_or_else(|| {
                CliError::input("means", "every stratum-based mean must be given")
            })?;
            ObservedDistribution::from_strata(&pi, &means)?
        }
        _ => {
            return Err(CliError::input(
                "top level",
                "expected exactly one of \"arms\", \"survival\" or \"strata\"",
            ))
        }
    };
    Ok(Input::Distribution(obs))
}

/// Parses the CSV counts format.
pub fn parse_counts_csv(bytes: &[u8]) -> Result<TrialCounts> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let csv_error = |e: csv::Error| {
        let location = match e.position() {
            Some(p) => format!("line {}", p.line()),
            None => "csv".to_string(),
        };
        CliError::input(location, e.to_string())
    };
    let headers = reader.headers().map_err(csv_error)?.clone();
    for required in ["z", "survived_y1", "survived_y0", "died"] {
        if !headers.iter().any(|h| h == required) {
            return Err(CliError::input(
                "line 1",
                format!("missing column \"{required}\" in header"),
            ));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let location = format!("line {}", record.position().map_or(0, |p| p.line()));
        let arm: RawArm = record
            .deserialize(Some(&headers))
            .map_err(|e| CliError::input(location.clone(), e.to_string()))?;
        rows.push((location, arm));
    }
    validate(rows)
}

fn validate(rows: Vec<(String, RawArm)>) -> Result<TrialCounts> {
    let mut arms: Vec<(usize, String, ArmCounts)> = Vec::with_capacity(rows.len());
    for (loc, raw) in rows {
        let count = |field: &str, v: i64| -> Result<u64> {
            u64::try_from(v).map_err(|_| {
                CliError::input(
                    format!("{loc}, field {field}"),
                    format!("negative count {v}"),
                )
            })
        };
        let z = usize::try_from(raw.z)
            .map_err(|_| CliError::input(format!("{loc}, field z"), "negative arm index"))?;
        let arm = ArmCounts::new(
            count("survived_y1", raw.survived_y1)?,
            count("survived_y0", raw.survived_y0)?,
            count("died", raw.died)?,
        )
        .with_missing(count("survived_y_missing", raw.survived_y_missing)?);
        if let Some((_, first, _)) = arms.iter().find(|(other, _, _)| *other == z) {
            return Err(CliError::input(
                format!("{loc}, field z"),
                format!("duplicate arm z={z} (first given at {first})"),
            ));
        }
        arms.push((z, loc, arm));
    }
    arms.sort_by_key(|(z, _, _)| *z);
    if let Some(gap) = arms.iter().enumerate().find(|(i, (z, _, _))| i != z) {
        return Err(CliError::input(
            format!("{}, field z", gap.1 .1),
            format!(
                "arms must be numbered 0..m without gaps; z={} is missing",
                gap.0
            ),
        ));
    }
    Ok(TrialCounts::new(
        arms.into_iter().map(|(_, _, a)| a).collect(),
    )?)
}

/// Renders counts in the JSON input schema; parsing the output gives the
/// same counts back.
pub fn counts_to_json(counts: &TrialCounts) -> Value {
    let arms: Vec<ArmRecord> = counts
        .arms()
        .iter()
        .enumerate()
        .map(|(z, a)| ArmRecord {
            z,
            survived_y1: a.survived_y1,
            survived_y0: a.survived_y0,
            survived_y_missing: a.survived_y_missing,
            died: a.died,
        })
        .collect();
    serde_json::json!({ "arms": arms })
}
