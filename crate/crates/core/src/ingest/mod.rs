//! Readers and writers for the delimited-text table formats.
//!
//! Every table file is a magic line (`laborflux/<name>/v1`), a header row
//! with the schema's column names, and comma-separated data rows with
//! RFC 4180 quoting. Output is canonical: fixed column order, ten
//! significant digits for floats, `\n` line endings, optional key sort.

mod format;
pub mod schema;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use format::{format_float, parse_float, SIGNIFICANT_DIGITS};
pub use schema::{Column, ColumnType, TableSchema};

use crate::model::{
    ClaimsRow, EmploymentRow, ExposureRow, LaborPanels, ModelError, OccCode, RateRow, RawPanels,
    SkillRow, StateCode, Taxonomy, ValidationContext, ValidationReport,
};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: schema mismatch, expected magic `{expected}` but found `{found}`")]
    Schema {
        path: String,
        expected: &'static str,
        found: String,
    },
    #[error("{path}: header mismatch, expected `{expected}` but found `{found}`")]
    Header {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}` ({msg})")]
    Cell {
        path: String,
        row: usize,
        column: &'static str,
        value: String,
        msg: String,
    },
    #[error("{path}: row {row}: {msg}")]
    Malformed {
        path: String,
        row: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: ModelError,
    },
    #[error("input panels: {0}")]
    Validation(#[from] ModelError),
}

/// A typed row that maps positionally onto a schema's columns.
pub trait Record: Sized {
    type Key: Ord;

    fn from_cells(cells: &Cells<'_>) -> Result<Self, IngestError>;
    fn to_cells(&self) -> Vec<String>;
    fn key(&self) -> Self::Key;
}

/// Positional, typed access to one data row.
pub struct Cells<'a> {
    record: &'a csv::StringRecord,
    row: usize,
    schema: &'a TableSchema,
    path: &'a str,
}

impl<'a> Cells<'a> {
    fn err(&self, i: usize, msg: impl Into<String>) -> IngestError {
        IngestError::Cell {
            path: self.path.to_string(),
            row: self.row,
            column: self.schema.columns[i].name,
            value: self.record.get(i).unwrap_or("").to_string(),
            msg: msg.into(),
        }
    }

    pub fn row(&self) -> usize {
        self.row
    }

    pub fn text(&self, i: usize) -> Result<&'a str, IngestError> {
        let s = self.record.get(i).ok_or_else(|| self.err(i, "missing"))?;
        if s.is_empty() {
            return Err(self.err(i, "empty"));
        }
        Ok(s)
    }

    pub fn int(&self, i: usize) -> Result<i64, IngestError> {
        self.text(i)?
            .parse::<i64>()
            .map_err(|e| self.err(i, e.to_string()))
    }

    pub fn small<T: TryFrom<i64>>(&self, i: usize) -> Result<T, IngestError> {
        T::try_from(self.int(i)?).map_err(|_| self.err(i, "integer out of range"))
    }

    pub fn float(&self, i: usize) -> Result<f64, IngestError> {
        parse_float(self.text(i)?).ok_or_else(|| self.err(i, "not a number"))
    }

    pub fn opt_float(&self, i: usize) -> Result<Option<f64>, IngestError> {
        match self.record.get(i) {
            Some("") | None => Ok(None),
            Some(s) => parse_float(s)
                .map(Some)
                .ok_or_else(|| self.err(i, "not a number")),
        }
    }

    pub fn state(&self, i: usize) -> Result<StateCode, IngestError> {
        self.text(i)?
            .parse()
            .map_err(|e: ModelError| self.err(i, e.to_string()))
    }

    pub fn occ(&self, i: usize) -> Result<OccCode, IngestError> {
        self.text(i)?
            .parse()
            .map_err(|e: ModelError| self.err(i, e.to_string()))
    }
}

/// Parses table text. `path` is only used in error messages.
pub fn read_table_str<T: Record>(
    text: &str,
    schema: &TableSchema,
    path: &str,
) -> Result<Vec<T>, IngestError> {
    let (magic, body) = text.split_once('\n').unwrap_or((text, ""));
    let magic = magic.trim_end_matches('\r');
    if magic != schema.magic {
        return Err(IngestError::Schema {
            path: path.to_string(),
            expected: schema.magic,
            found: magic.to_string(),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(body.as_bytes());
    let expected = schema.column_names();
    let headers = reader.headers().map_err(|e| IngestError::Malformed {
        path: path.to_string(),
        row: 0,
        msg: e.to_string(),
    })?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(IngestError::Header {
            path: path.to_string(),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0;
    loop {
        row += 1;
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                return Err(IngestError::Malformed {
                    path: path.to_string(),
                    row,
                    msg: e.to_string(),
                })
            }
        }
        let cells = Cells {
            record: &record,
            row,
            schema,
            path,
        };
        rows.push(T::from_cells(&cells)?);
    }
    Ok(rows)
}

pub fn read_table<T: Record>(path: &Path, schema: &TableSchema) -> Result<Vec<T>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_table_str(&text, schema, &path.display().to_string())
}

/// Serializes rows canonically. With `sort_by_key`, row order is the key
/// order, so any permutation of the same rows yields the same bytes.
pub fn table_bytes<T: Record>(rows: &[T], schema: &TableSchema, sort_by_key: bool) -> Vec<u8> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    if sort_by_key {
        order.sort_by_key(|&i| rows[i].key());
    }
    let mut out = Vec::with_capacity(64 * rows.len() + 64);
    out.extend_from_slice(schema.magic.as_bytes());
    out.push(b'\n');
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(&mut out);
        w.write_record(schema.column_names())
            .expect("in-memory write");
        for i in order {
            w.write_record(rows[i].to_cells()).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    out
}

pub fn write_table<T: Record>(
    rows: &[T],
    schema: &TableSchema,
    path: &Path,
    sort_by_key: bool,
) -> Result<(), IngestError> {
    let bytes = table_bytes(rows, schema, sort_by_key);
    write_bytes(path, &bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    let io = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io)?;
        }
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

pub fn int_cell(v: i64) -> String {
    v.to_string()
}

impl Record for EmploymentRow {
    type Key = (StateCode, i32, OccCode);

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(EmploymentRow {
            state: c.state(0)?,
            year: c.small(1)?,
            occ: c.occ(2)?,
            employment: c.int(3)?,
            mean_wage: c.float(4)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.state.to_string(),
            self.year.to_string(),
            self.occ.to_string(),
            self.employment.to_string(),
            format_float(self.mean_wage),
        ]
    }

    fn key(&self) -> Self::Key {
        (self.state, self.year, self.occ)
    }
}

impl Record for ClaimsRow {
    type Key = (StateCode, i32, u8, OccCode);

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(ClaimsRow {
            state: c.state(0)?,
            year: c.small(1)?,
            month: c.small(2)?,
            occ: c.occ(3)?,
            recipients: c.int(4)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.state.to_string(),
            self.year.to_string(),
            self.month.to_string(),
            self.occ.to_string(),
            self.recipients.to_string(),
        ]
    }

    fn key(&self) -> Self::Key {
        (self.state, self.year, self.month, self.occ)
    }
}

impl Record for RateRow {
    type Key = (StateCode, i32, u8);

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(RateRow {
            state: c.state(0)?,
            year: c.small(1)?,
            month: c.small(2)?,
            rate: c.float(3)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.state.to_string(),
            self.year.to_string(),
            self.month.to_string(),
            format_float(self.rate),
        ]
    }

    fn key(&self) -> Self::Key {
        (self.state, self.year, self.month)
    }
}

impl Record for SkillRow {
    type Key = (i32, OccCode, String);

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(SkillRow {
            year: c.small(0)?,
            occ: c.occ(1)?,
            skill: c.text(2)?.to_string(),
            value: c.float(3)?,
            scale_min: c.float(4)?,
            scale_max: c.float(5)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.year.to_string(),
            self.occ.to_string(),
            self.skill.clone(),
            format_float(self.value),
            format_float(self.scale_min),
            format_float(self.scale_max),
        ]
    }

    fn key(&self) -> Self::Key {
        (self.year, self.occ, self.skill.clone())
    }
}

impl Record for ExposureRow {
    type Key = (String, OccCode);

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(ExposureRow {
            score: c.text(0)?.to_string(),
            study: c.text(1)?.to_string(),
            wave: c.small(2)?,
            occ: c.occ(3)?,
            value: c.float(4)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.score.clone(),
            self.study.clone(),
            self.wave.to_string(),
            self.occ.to_string(),
            format_float(self.value),
        ]
    }

    fn key(&self) -> Self::Key {
        (self.score.clone(), self.occ)
    }
}

/// Locations of the six input tables plus optional membership lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
    pub employment: PathBuf,
    pub claims: PathBuf,
    pub urate: PathBuf,
    #[serde(default)]
    pub separations: Option<PathBuf>,
    pub skills: PathBuf,
    pub exposure: PathBuf,
    #[serde(default)]
    pub states: Option<Vec<String>>,
}

impl InputPaths {
    /// Standard file names inside one directory, as written by the generator.
    pub fn in_dir(dir: &Path) -> Self {
        InputPaths {
            taxonomy: Some(dir.join("taxonomy.txt")),
            employment: dir.join("employment.csv"),
            claims: dir.join("claims.csv"),
            urate: dir.join("urate.csv"),
            separations: Some(dir.join("separations.csv")),
            skills: dir.join("skills.csv"),
            exposure: dir.join("exposure.csv"),
            states: None,
        }
    }

    /// Resolves relative paths against `base`.
    pub fn resolved(&self, base: &Path) -> Self {
        let r = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        InputPaths {
            taxonomy: self.taxonomy.as_ref().map(r),
            employment: r(&self.employment),
            claims: r(&self.claims),
            urate: r(&self.urate),
            separations: self.separations.as_ref().map(r),
            skills: r(&self.skills),
            exposure: r(&self.exposure),
            states: self.states.clone(),
        }
    }
}

/// Reads every table, validates, and builds keyed panels. Tables are read
/// in parallel; separations are skipped when `with_separations` is false.
pub fn load_all(
    paths: &InputPaths,
    with_separations: bool,
) -> Result<(LaborPanels, ValidationReport), IngestError> {
    let taxonomy = match &paths.taxonomy {
        Some(p) => Some(Taxonomy::load(p).map_err(|source| IngestError::Invalid {
            path: p.display().to_string(),
            source,
        })?),
        None => None,
    };
    let states = match &paths.states {
        Some(list) => Some(
            list.iter()
                .map(|s| s.parse::<StateCode>())
                .collect::<Result<_, _>>()?,
        ),
        None => None,
    };
    let ((employment, claims), ((urate, separations), (skills, exposures))) = rayon::join(
        || {
            rayon::join(
                || read_table::<EmploymentRow>(&paths.employment, &schema::EMPLOYMENT),
                || read_table::<ClaimsRow>(&paths.claims, &schema::CLAIMS),
            )
        },
        || {
            rayon::join(
                || {
                    rayon::join(
                        || read_table::<RateRow>(&paths.urate, &schema::URATE),
                        || match (&paths.separations, with_separations) {
                            (Some(p), true) => {
                                read_table::<RateRow>(p, &schema::SEPARATIONS).map(Some)
                            }
                            _ => Ok(None),
                        },
                    )
                },
                || {
                    rayon::join(
                        || read_table::<SkillRow>(&paths.skills, &schema::SKILLS),
                        || read_table::<ExposureRow>(&paths.exposure, &schema::EXPOSURE),
                    )
                },
            )
        },
    );
    let raw = RawPanels {
        employment: employment?,
        claims: claims?,
        urate: urate?,
        separations: separations?,
        skills: skills?,
        exposures: exposures?,
    };
    let ctx = ValidationContext { taxonomy, states };
    let located = |source: ModelError| {
        let table = match &source {
            ModelError::DuplicateKey { table, .. }
            | ModelError::OutOfRange { table, .. }
            | ModelError::InvalidRow { table, .. } => *table,
            _ => "",
        };
        let path = match table {
            "employment" => paths.employment.display().to_string(),
            "claims" => paths.claims.display().to_string(),
            "urate" => paths.urate.display().to_string(),
            "separations" => paths
                .separations
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            "skills" => paths.skills.display().to_string(),
            "exposure" => paths.exposure.display().to_string(),
            _ => return IngestError::Validation(source),
        };
        IngestError::Invalid { path, source }
    };
    LaborPanels::from_raw(raw, &ctx).map_err(located)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_data_section() {
        let text = "laborflux/claims/v1\nstate,year,month,occ,recipients\n";
        let rows: Vec<ClaimsRow> = read_table_str(text, &schema::CLAIMS, "t").unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn magic_mismatch() {
        let text = "laborflux/claims/v1\nstate,year,month,occ,recipients\n";
        let err = read_table_str::<EmploymentRow>(text, &schema::EMPLOYMENT, "t").unwrap_err();
        assert!(matches!(err, IngestError::Schema { .. }), "{err}");
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        let text = "laborflux/urate/v1\nstate,year,month,rate\nAK,2010,1,0.05\nAK,2010,2,abc\n";
        match read_table_str::<RateRow>(text, &schema::URATE, "t").unwrap_err() {
            IngestError::Cell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "rate");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn quoted_text_roundtrips() {
        let rows = vec![ExposureRow {
            score: "webb, \"ai\"".into(),
            study: "Webb".into(),
            wave: 3,
            occ: "15-1132".parse().unwrap(),
            value: 0.25,
        }];
        let bytes = table_bytes(&rows, &schema::EXPOSURE, false);
        let text = String::from_utf8(bytes).unwrap();
        let back: Vec<ExposureRow> = read_table_str(&text, &schema::EXPOSURE, "t").unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn key_sort_makes_order_irrelevant() {
        let mk = |m: u8, occ: &str| ClaimsRow {
            state: "AK".parse().unwrap(),
            year: 2010,
            month: m,
            occ: occ.parse().unwrap(),
            recipients: m as i64,
        };
        let a = vec![mk(1, "11"), mk(1, "15"), mk(2, "11")];
        let b = vec![mk(2, "11"), mk(1, "15"), mk(1, "11")];
        assert_eq!(
            table_bytes(&a, &schema::CLAIMS, true),
            table_bytes(&b, &schema::CLAIMS, true)
        );
        assert_eq!(
            table_bytes(&a, &schema::CLAIMS, false),
            table_bytes(&a, &schema::CLAIMS, false)
        );
    }
}
