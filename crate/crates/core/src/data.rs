//! Observational-data model: rows of (covariates, treatment, outcome),
//! CSV ingestion, and data-level validation of identification preconditions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

/// Treatment arm. `Treated` maps to t = 1, `Control` to t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Treated,
    Control,
}

impl Arm {
    /// The treatment indicator value this arm corresponds to.
    pub fn indicator(self) -> u8 {
        match self {
            Arm::Treated => 1,
            Arm::Control => 0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Arm::Treated => "treated",
            Arm::Control => "control",
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Treated => Arm::Control,
            Arm::Control => Arm::Treated,
        }
    }
}

/// One observed unit: covariate vector, binary treatment, real outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub t: u8,
    pub y: f64,
}

/// An immutable sample of observations with a shared covariate dimension.
///
/// Construction checks nonemptiness, t in {0,1}, finiteness, and
/// consistent covariate length. Arm non-emptiness and n >= 2 are *not*
/// enforced here: ingestion requires n >= 2, [`validate`] reports arm
/// emptiness, and the operations that need both arms error on violation,
/// so that subsample draws (down to single rows) can be represented and
/// redrawn.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    rows: Vec<Observation>,
    dim: usize,
}

impl Sample {
    pub fn new(rows: Vec<Observation>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::TooFewRows {
                min: 1,
                got: rows.len(),
            });
        }
        let dim = rows[0].x.len();
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "covariate dimension must be >= 1".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.x.len(),
                });
            }
            if row.t > 1 {
                return Err(Error::BadTreatment {
                    row: i + 1,
                    value: row.t.to_string(),
                });
            }
            if !row.y.is_finite() {
                return Err(Error::NonFinite {
                    row: i + 1,
                    column: "y".into(),
                });
            }
            if row.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i + 1,
                    column: "x".into(),
                });
            }
        }
        Ok(Sample { rows, dim })
    }

    /// Build a sample from a subset of another sample's rows.
    pub fn from_indices(sample: &Sample, indices: &[usize]) -> Result<Self> {
        let rows = indices.iter().map(|&i| sample.rows[i].clone()).collect();
        Sample::new(rows)
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Covariate dimension shared by all rows.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arm_count(&self, arm: Arm) -> usize {
        let t = arm.indicator();
        self.rows.iter().filter(|r| r.t == t).count()
    }

    pub fn has_both_arms(&self) -> bool {
        self.arm_count(Arm::Treated) > 0 && self.arm_count(Arm::Control) > 0
    }

    pub fn require_arm(&self, arm: Arm) -> Result<()> {
        if self.arm_count(arm) == 0 {
            return Err(Error::EmptyArm(arm.label()));
        }
        Ok(())
    }
}

/// Column mapping for CSV ingestion: which header names hold y, t, and
/// the covariates (in order).
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub y_col: String,
    pub t_col: String,
    pub x_cols: Vec<String>,
}

impl CsvSchema {
    pub fn new(
        y_col: impl Into<String>,
        t_col: impl Into<String>,
        x_cols: Vec<String>,
    ) -> Self {
        CsvSchema {
            y_col: y_col.into(),
            t_col: t_col.into(),
            x_cols,
        }
    }
}

/// Read a sample from a headered CSV file. Rows are kept in file order;
/// any missing or malformed field is an error, never imputed.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Sample> {
    let content = std::fs::read_to_string(path.as_ref())?;
    ingest_csv_str(&content, schema)
}

/// Same as [`ingest_csv`] but from an in-memory string.
pub fn ingest_csv_str(content: &str, schema: &CsvSchema) -> Result<Sample> {
    if content.trim().is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();

    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let y_idx = col_index(&schema.y_col)?;
    let t_idx = col_index(&schema.t_col)?;
    let x_idx: Vec<usize> = schema
        .x_cols
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;

    let parse_f64 = |field: &str, row: usize, column: &str| -> Result<f64> {
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::NonNumeric {
                row,
                column: column.to_string(),
                value: field.to_string(),
            })?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row,
                column: column.to_string(),
            });
        }
        Ok(v)
    };

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1; // 1-based data row, excluding header
        let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        let get = |idx: usize, column: &str| -> Result<&str> {
            record.get(idx).ok_or_else(|| Error::Csv(format!(
                "row {row}: missing field for column '{column}'"
            )))
        };
        let y = parse_f64(get(y_idx, &schema.y_col)?, row, &schema.y_col)?;
        let t_raw = get(t_idx, &schema.t_col)?.trim();
        let t = match t_raw {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::BadTreatment {
                    row,
                    value: other.to_string(),
                })
            }
        };
        let mut x = Vec::with_capacity(x_idx.len());
        for (k, &idx) in x_idx.iter().enumerate() {
            x.push(parse_f64(get(idx, &schema.x_cols[k])?, row, &schema.x_cols[k])?);
        }
        rows.push(Observation { x, t, y });
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    if rows.len() < 2 {
        return Err(Error::TooFewRows {
            min: 2,
            got: rows.len(),
        });
    }
    Sample::new(rows)
}

/// Write a sample as CSV with full-precision values so that
/// `ingest_csv(emit_csv(s)) == s` bit-exactly. Float formatting uses the
/// shortest representation that round-trips.
pub fn emit_csv<W: Write>(sample: &Sample, schema: &CsvSchema, mut writer: W) -> Result<()> {
    let mut header = vec![schema.y_col.clone(), schema.t_col.clone()];
    header.extend(schema.x_cols.iter().cloned());
    writeln!(writer, "{}", header.join(","))?;
    for row in sample.rows() {
        let mut fields = vec![format!("{}", row.y), format!("{}", row.t)];
        fields.extend(row.x.iter().map(|v| format!("{v}")));
        writeln!(writer, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Default schema used by emitters when none is given: y, t, x1..xl.
pub fn default_schema(dim: usize) -> CsvSchema {
    CsvSchema::new(
        "y",
        "t",
        (1..=dim).map(|k| format!("x{k}")).collect(),
    )
}

/// Report-only summary of a sample and of the checkable identification
/// preconditions (arm counts, per-arm outcome ranges, overlap flags for
/// discrete covariates). Never mutates and never fails.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub dim: usize,
    pub n_treated: usize,
    pub n_control: usize,
    /// (min, max) of y within each arm; None when the arm is empty.
    pub y_range_treated: Option<(f64, f64)>,
    pub y_range_control: Option<(f64, f64)>,
    /// Data-level overlap and regime warnings; empty means no flags.
    pub flags: Vec<String>,
}

/// Number of distinct values at or below which a covariate column is
/// treated as discrete for overlap checks and cell-mean regressions.
pub const DISCRETE_COVARIATE_MAX_LEVELS: usize = 10;

const SMALL_SAMPLE_WARN: usize = 30;

pub fn validate(sample: &Sample) -> ValidationReport {
    let n_treated = sample.arm_count(Arm::Treated);
    let n_control = sample.arm_count(Arm::Control);
    let mut flags = Vec::new();

    if n_treated == 0 {
        flags.push("arm empty: treated".to_string());
    }
    if n_control == 0 {
        flags.push("arm empty: control".to_string());
    }
    if sample.len() < SMALL_SAMPLE_WARN {
        flags.push("n below asymptotic regime".to_string());
    }

    // Per-column overlap check for discrete covariates: every observed
    // level should contain both arms.
    for col in 0..sample.dim() {
        let levels: BTreeSet<u64> = sample
            .rows()
            .iter()
            .map(|r| r.x[col].to_bits())
            .collect();
        if levels.len() > DISCRETE_COVARIATE_MAX_LEVELS {
            continue;
        }
        for bits in levels {
            let value = f64::from_bits(bits);
            let mut seen = [false, false];
            for row in sample.rows() {
                if row.x[col].to_bits() == bits {
                    seen[row.t as usize] = true;
                }
            }
            if !(seen[0] && seen[1]) {
                let missing = if seen[1] { "control" } else { "treated" };
                flags.push(format!(
                    "overlap: covariate x{} level {} has no {} rows",
                    col + 1,
                    value,
                    missing
                ));
            }
        }
    }

    let y_range = |arm: Arm| -> Option<(f64, f64)> {
        let t = arm.indicator();
        let mut range: Option<(f64, f64)> = None;
        for row in sample.rows() {
            if row.t == t {
                range = Some(match range {
                    None => (row.y, row.y),
                    Some((lo, hi)) => (lo.min(row.y), hi.max(row.y)),
                });
            }
        }
        range
    };

    ValidationReport {
        n: sample.len(),
        dim: sample.dim(),
        n_treated,
        n_control,
        y_range_treated: y_range(Arm::Treated),
        y_range_control: y_range(Arm::Control),
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema1() -> CsvSchema {
        CsvSchema::new("y", "t", vec!["x1".into()])
    }

    #[test]
    fn ingest_four_rows() {
        let csv = "y,t,x1\n1.5,1,0\n2.5,0,1\n3.5,1,1\n4.5,0,0\n";
        let s = ingest_csv_str(csv, &schema1()).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.dim(), 1);
        assert_eq!(s.rows()[0].y, 1.5);
        assert_eq!(s.rows()[0].t, 1);
        assert_eq!(s.rows()[3].x, vec![0.0]);
    }

    #[test]
    fn ingest_rejects_bad_treatment_with_row() {
        let csv = "y,t,x1\n1,1,0\n2,0,1\n3,2,1\n";
        let err = ingest_csv_str(csv, &schema1()).unwrap_err();
        match err {
            Error::BadTreatment { row, value } => {
                assert_eq!(row, 3);
                assert_eq!(value, "2");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn ingest_rejects_missing_column() {
        let csv = "y,treat,x1\n1,1,0\n";
        let err = ingest_csv_str(csv, &schema1()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "t"));
    }

    #[test]
    fn ingest_rejects_non_numeric_cell() {
        let csv = "y,t,x1\n1,1,0\nfoo,0,1\n";
        let err = ingest_csv_str(csv, &schema1()).unwrap_err();
        match err {
            Error::NonNumeric { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
                assert_eq!(value, "foo");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn ingest_rejects_empty_file() {
        assert!(matches!(
            ingest_csv_str("", &schema1()).unwrap_err(),
            Error::EmptyFile
        ));
        assert!(matches!(
            ingest_csv_str("y,t,x1\n", &schema1()).unwrap_err(),
            Error::EmptyFile
        ));
    }

    #[test]
    fn emit_ingest_roundtrip_bit_exact() {
        let rows = vec![
            Observation { x: vec![0.1, -3.7e-12], t: 1, y: 1.0 / 3.0 },
            Observation { x: vec![2.0_f64.sqrt(), 8.25], t: 0, y: -7.125e100 },
            Observation { x: vec![-0.0, 1.0], t: 1, y: f64::MIN_POSITIVE },
        ];
        let sample = Sample::new(rows).unwrap();
        let schema = default_schema(2);
        let mut buf = Vec::new();
        emit_csv(&sample, &schema, &mut buf).unwrap();
        let back = ingest_csv_str(std::str::from_utf8(&buf).unwrap(), &schema).unwrap();
        assert_eq!(back, sample);
    }

    #[test]
    fn validate_flags_empty_arm() {
        let rows = vec![
            Observation { x: vec![0.0], t: 1, y: 1.0 },
            Observation { x: vec![1.0], t: 1, y: 2.0 },
        ];
        let sample = Sample::new(rows).unwrap();
        let report = validate(&sample);
        assert_eq!(report.n_control, 0);
        assert!(report.flags.iter().any(|f| f.contains("arm empty: control")));
        assert!(report.y_range_control.is_none());
        assert_eq!(report.y_range_treated, Some((1.0, 2.0)));
    }

    #[test]
    fn validate_warns_small_n() {
        let rows = vec![
            Observation { x: vec![0.0], t: 1, y: 1.0 },
            Observation { x: vec![1.0], t: 0, y: 2.0 },
        ];
        let report = validate(&Sample::new(rows).unwrap());
        assert!(report
            .flags
            .iter()
            .any(|f| f.contains("below asymptotic regime")));
    }

    #[test]
    fn validate_flags_cell_without_arm() {
        // x=0 rows are all control: overlap flag for level 0.
        let rows = vec![
            Observation { x: vec![0.0], t: 0, y: 1.0 },
            Observation { x: vec![0.0], t: 0, y: 2.0 },
            Observation { x: vec![1.0], t: 1, y: 3.0 },
            Observation { x: vec![1.0], t: 0, y: 4.0 },
        ];
        let report = validate(&Sample::new(rows).unwrap());
        assert!(report
            .flags
            .iter()
            .any(|f| f.contains("overlap") && f.contains("no treated")));
    }

    #[test]
    fn validate_is_pure() {
        let rows = vec![
            Observation { x: vec![0.0], t: 1, y: 1.0 },
            Observation { x: vec![1.0], t: 0, y: 2.0 },
        ];
        let sample = Sample::new(rows).unwrap();
        let clone = sample.clone();
        let a = validate(&sample);
        let b = validate(&sample);
        assert_eq!(sample, clone);
        assert_eq!(a.flags, b.flags);
        assert_eq!(a.n, b.n);
    }

    #[test]
    fn sample_rejects_nan() {
        let rows = vec![
            Observation { x: vec![0.0], t: 1, y: f64::NAN },
            Observation { x: vec![1.0], t: 0, y: 2.0 },
        ];
        assert!(matches!(
            Sample::new(rows).unwrap_err(),
            Error::NonFinite { .. }
        ));
    }
}
