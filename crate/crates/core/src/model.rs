//! Occupation and state identifiers, the validated panel container, and
//! the validation pass that gates every downstream estimator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::skills::normalize_likert;

/// Exposure tables covering less than this share of employed occupations are
/// flagged in the validation report.
pub const COVERAGE_THRESHOLD: f64 = 0.90;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("malformed occupation code `{0}` (expected `XX` or `XX-XXXX`)")]
    MalformedOcc(String),
    #[error("malformed state code `{0}` (expected two uppercase letters)")]
    MalformedState(String),
    #[error("major occupation group `{0}` is not in the taxonomy")]
    UnknownMajor(String),
    #[error("state `{0}` is not in the configured state list")]
    UnknownState(String),
    #[error("duplicate key in {table} table: {key}")]
    DuplicateKey { table: &'static str, key: String },
    #[error("{table} row {row}: {field} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        table: &'static str,
        row: usize,
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("{table} row {row}: {msg}")]
    InvalidRow {
        table: &'static str,
        row: usize,
        msg: String,
    },
    #[error("taxonomy line {line}: {msg}")]
    Taxonomy { line: usize, msg: String },
    #[error("reading taxonomy {path}: {msg}")]
    TaxonomyIo { path: String, msg: String },
}

/// SOC occupation code, either a two-digit major group or a detailed
/// `XX-XXXX` code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccCode {
    major: u8,
    detail: Option<u16>,
}

impl OccCode {
    pub fn major_group(major: u8) -> Self {
        assert!(major < 100, "major group must be two digits");
        OccCode {
            major,
            detail: None,
        }
    }

    pub fn detailed(major: u8, detail: u16) -> Self {
        assert!(major < 100 && detail < 10_000, "code out of range");
        OccCode {
            major,
            detail: Some(detail),
        }
    }

    pub fn major_number(&self) -> u8 {
        self.major
    }

    pub fn detail(&self) -> Option<u16> {
        self.detail
    }

    pub fn is_major(&self) -> bool {
        self.detail.is_none()
    }

    /// Truncates to the major group. Idempotent.
    pub fn major(&self) -> OccCode {
        OccCode::major_group(self.major)
    }
}

/// Parses `code` and returns its major group.
pub fn major_of(code: &str) -> Result<OccCode, ModelError> {
    code.parse::<OccCode>().map(|c| c.major())
}

impl fmt::Display for OccCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.detail {
            Some(d) => write!(f, "{:02}-{:04}", self.major, d),
            None => write!(f, "{:02}", self.major),
        }
    }
}

impl FromStr for OccCode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::MalformedOcc(s.to_string());
        let b = s.as_bytes();
        let digits = |r: &[u8]| r.iter().all(u8::is_ascii_digit);
        match b.len() {
            2 if digits(b) => Ok(OccCode::major_group(s.parse().map_err(|_| bad())?)),
            7 if digits(&b[..2]) && b[2] == b'-' && digits(&b[3..]) => Ok(OccCode::detailed(
                s[..2].parse().map_err(|_| bad())?,
                s[3..].parse().map_err(|_| bad())?,
            )),
            _ => Err(bad()),
        }
    }
}

impl Serialize for OccCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OccCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Two-letter state code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateCode([u8; 2]);

impl StateCode {
    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("state codes are ASCII")
    }
}

impl fmt::Display for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateCode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() == 2 && b.iter().all(u8::is_ascii_uppercase) {
            Ok(StateCode([b[0], b[1]]))
        } else {
            Err(ModelError::MalformedState(s.to_string()))
        }
    }
}

impl Serialize for StateCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for StateCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Key of one risk-panel observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PanelKey {
    pub state: StateCode,
    pub year: i32,
    pub month: u8,
    pub occ: OccCode,
}

/// SOC code list for a single taxonomy vintage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Taxonomy {
    codes: BTreeSet<OccCode>,
    majors: BTreeSet<OccCode>,
}

impl Taxonomy {
    pub fn from_codes<I: IntoIterator<Item = OccCode>>(codes: I) -> Self {
        let codes: BTreeSet<OccCode> = codes.into_iter().collect();
        let majors = codes.iter().map(OccCode::major).collect();
        Taxonomy { codes, majors }
    }

    /// One code per line; `#` starts a comment; blank lines ignored.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut codes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let code = line.parse::<OccCode>().map_err(|e| ModelError::Taxonomy {
                line: i + 1,
                msg: e.to_string(),
            })?;
            codes.push(code);
        }
        Ok(Taxonomy::from_codes(codes))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::TaxonomyIo {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Taxonomy::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# SOC taxonomy\n");
        for c in &self.codes {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn contains_major(&self, code: &OccCode) -> bool {
        self.majors.contains(&code.major())
    }

    pub fn majors(&self) -> impl Iterator<Item = &OccCode> {
        self.majors.iter()
    }

    pub fn codes(&self) -> impl Iterator<Item = &OccCode> {
        self.codes.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmploymentRow {
    pub state: StateCode,
    pub year: i32,
    pub occ: OccCode,
    pub employment: i64,
    pub mean_wage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimsRow {
    pub state: StateCode,
    pub year: i32,
    pub month: u8,
    pub occ: OccCode,
    pub recipients: i64,
}

/// A state-month rate (LAUS unemployment or JOLTS separations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub state: StateCode,
    pub year: i32,
    pub month: u8,
    pub rate: f64,
}

/// One O*NET-style survey item: raw Likert value with its scale bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRow {
    pub year: i32,
    pub occ: OccCode,
    pub skill: String,
    pub value: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureRow {
    pub score: String,
    pub study: String,
    pub wave: u8,
    pub occ: OccCode,
    pub value: f64,
}

/// Rows in file order, as read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawPanels {
    pub employment: Vec<EmploymentRow>,
    pub claims: Vec<ClaimsRow>,
    pub urate: Vec<RateRow>,
    pub separations: Option<Vec<RateRow>>,
    pub skills: Vec<SkillRow>,
    pub exposures: Vec<ExposureRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmploymentCell {
    pub employment: u64,
    pub mean_wage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureScore {
    pub study: String,
    pub wave: u8,
    pub values: BTreeMap<OccCode, f64>,
}

pub type StateYear = (StateCode, i32);
pub type StateMonth = (StateCode, i32, u8);

/// Validated, keyed panels. Row order of the source files does not matter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaborPanels {
    pub employment: BTreeMap<(StateCode, i32, OccCode), EmploymentCell>,
    pub claims: BTreeMap<(StateCode, i32, u8, OccCode), u64>,
    pub urate: BTreeMap<StateMonth, f64>,
    pub separations: Option<BTreeMap<StateMonth, f64>>,
    /// (year, occ6) → skill id → importance in [0,1]
    pub skills: BTreeMap<(i32, OccCode), BTreeMap<String, f64>>,
    pub exposures: BTreeMap<String, ExposureScore>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub row_counts: BTreeMap<String, usize>,
    pub key_collisions: usize,
    /// (state, year, month) cells lacking claims or unemployment-rate rows.
    pub missing_cells: Vec<String>,
    pub exposure_coverage: BTreeMap<String, f64>,
    pub low_coverage_scores: Vec<String>,
    pub usable: bool,
}

/// Optional membership constraints applied during validation.
#[derive(Debug, Clone, Default)]
pub struct ValidationContext {
    pub taxonomy: Option<Taxonomy>,
    pub states: Option<BTreeSet<StateCode>>,
}

impl ValidationContext {
    fn check_occ(&self, occ: &OccCode) -> Result<(), ModelError> {
        match &self.taxonomy {
            Some(t) if !t.contains_major(occ) => {
                Err(ModelError::UnknownMajor(occ.major().to_string()))
            }
            _ => Ok(()),
        }
    }

    fn check_state(&self, s: &StateCode) -> Result<(), ModelError> {
        match &self.states {
            Some(set) if !set.contains(s) => Err(ModelError::UnknownState(s.to_string())),
            _ => Ok(()),
        }
    }
}

fn check_range(
    table: &'static str,
    row: usize,
    field: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
) -> Result<(), ModelError> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            table,
            row,
            field,
            value,
            lo,
            hi,
        })
    }
}

fn check_month(table: &'static str, row: usize, month: u8) -> Result<(), ModelError> {
    if (1..=12).contains(&month) {
        Ok(())
    } else {
        Err(ModelError::InvalidRow {
            table,
            row,
            msg: format!("month {month} outside 1..=12"),
        })
    }
}

fn unique<K: Ord, F: Fn(&K) -> String>(
    table: &'static str,
    keys: impl Iterator<Item = K>,
    show: F,
) -> Result<(), ModelError> {
    let mut seen = BTreeSet::new();
    for k in keys {
        if let Some(dup) = seen.replace(k) {
            return Err(ModelError::DuplicateKey {
                table,
                key: show(&dup),
            });
        }
    }
    Ok(())
}

/// Checks ranges, key uniqueness, taxonomy membership, cell completeness and
/// exposure coverage. Row numbers in errors are 1-based data rows.
pub fn validate_panels(
    raw: &RawPanels,
    ctx: &ValidationContext,
) -> Result<ValidationReport, ModelError> {
    for (i, r) in raw.employment.iter().enumerate() {
        let row = i + 1;
        ctx.check_state(&r.state)?;
        ctx.check_occ(&r.occ)?;
        if r.occ.is_major() {
            return Err(ModelError::InvalidRow {
                table: "employment",
                row,
                msg: format!("expected a detailed occupation code, got `{}`", r.occ),
            });
        }
        check_range(
            "employment",
            row,
            "employment",
            r.employment as f64,
            0.0,
            f64::MAX,
        )?;
        check_range("employment", row, "mean_wage", r.mean_wage, 0.0, f64::MAX)?;
    }
    for (i, r) in raw.claims.iter().enumerate() {
        let row = i + 1;
        ctx.check_state(&r.state)?;
        ctx.check_occ(&r.occ)?;
        check_month("claims", row, r.month)?;
        if !r.occ.is_major() {
            return Err(ModelError::InvalidRow {
                table: "claims",
                row,
                msg: format!("expected a major occupation code, got `{}`", r.occ),
            });
        }
        check_range(
            "claims",
            row,
            "recipients",
            r.recipients as f64,
            0.0,
            f64::MAX,
        )?;
    }
    let rate_tables = [
        ("urate", Some(&raw.urate)),
        ("separations", raw.separations.as_ref()),
    ];
    for (table, rows) in rate_tables {
        for (i, r) in rows.into_iter().flatten().enumerate() {
            ctx.check_state(&r.state)?;
            check_month(table, i + 1, r.month)?;
            check_range(table, i + 1, "rate", r.rate, 0.0, 1.0)?;
        }
    }
    for (i, r) in raw.skills.iter().enumerate() {
        let row = i + 1;
        ctx.check_occ(&r.occ)?;
        if !(r.scale_max > r.scale_min) {
            return Err(ModelError::InvalidRow {
                table: "skills",
                row,
                msg: format!(
                    "scale_max {} must exceed scale_min {}",
                    r.scale_max, r.scale_min
                ),
            });
        }
        check_range("skills", row, "value", r.value, r.scale_min, r.scale_max)?;
    }
    for (i, r) in raw.exposures.iter().enumerate() {
        ctx.check_occ(&r.occ)?;
        if !(1..=3).contains(&r.wave) {
            return Err(ModelError::InvalidRow {
                table: "exposure",
                row: i + 1,
                msg: format!("wave {} outside 1..=3", r.wave),
            });
        }
        if !r.value.is_finite() {
            return Err(ModelError::InvalidRow {
                table: "exposure",
                row: i + 1,
                msg: "non-finite exposure value".into(),
            });
        }
    }

    unique(
        "employment",
        raw.employment.iter().map(|r| (r.state, r.year, r.occ)),
        |k| format!("({}, {}, {})", k.0, k.1, k.2),
    )?;
    unique(
        "claims",
        raw.claims.iter().map(|r| (r.state, r.year, r.month, r.occ)),
        |k| format!("({}, {}, {}, {})", k.0, k.1, k.2, k.3),
    )?;
    let rate_key = |k: &StateMonth| format!("({}, {}, {})", k.0, k.1, k.2);
    unique(
        "urate",
        raw.urate.iter().map(|r| (r.state, r.year, r.month)),
        rate_key,
    )?;
    if let Some(seps) = &raw.separations {
        unique(
            "separations",
            seps.iter().map(|r| (r.state, r.year, r.month)),
            rate_key,
        )?;
    }
    unique(
        "skills",
        raw.skills.iter().map(|r| (r.year, r.occ, r.skill.clone())),
        |k| format!("({}, {}, {})", k.0, k.1, k.2),
    )?;
    unique(
        "exposure",
        raw.exposures.iter().map(|r| (r.score.clone(), r.occ)),
        |k| format!("({}, {})", k.0, k.1),
    )?;
    // A score must carry one study and wave.
    let mut score_meta: BTreeMap<&str, (&str, u8)> = BTreeMap::new();
    for (i, r) in raw.exposures.iter().enumerate() {
        let meta = score_meta.entry(&r.score).or_insert((&r.study, r.wave));
        if *meta != (r.study.as_str(), r.wave) {
            return Err(ModelError::InvalidRow {
                table: "exposure",
                row: i + 1,
                msg: format!("score `{}` has inconsistent study/wave tags", r.score),
            });
        }
    }

    let mut row_counts = BTreeMap::new();
    row_counts.insert("employment".to_string(), raw.employment.len());
    row_counts.insert("claims".to_string(), raw.claims.len());
    row_counts.insert("urate".to_string(), raw.urate.len());
    if let Some(s) = &raw.separations {
        row_counts.insert("separations".to_string(), s.len());
    }
    row_counts.insert("skills".to_string(), raw.skills.len());
    row_counts.insert("exposure".to_string(), raw.exposures.len());

    let states: BTreeSet<StateCode> = raw.employment.iter().map(|r| r.state).collect();
    let periods: BTreeSet<(i32, u8)> = raw
        .urate
        .iter()
        .map(|r| (r.year, r.month))
        .chain(raw.claims.iter().map(|r| (r.year, r.month)))
        .collect();
    let urate_cells: BTreeSet<StateMonth> = raw
        .urate
        .iter()
        .map(|r| (r.state, r.year, r.month))
        .collect();
    let claim_cells: BTreeSet<StateMonth> = raw
        .claims
        .iter()
        .map(|r| (r.state, r.year, r.month))
        .collect();
    let mut missing_cells = Vec::new();
    for s in &states {
        for &(y, m) in &periods {
            let key = (*s, y, m);
            let mut lacks = Vec::new();
            if !urate_cells.contains(&key) {
                lacks.push("urate");
            }
            if !claim_cells.contains(&key) {
                lacks.push("claims");
            }
            if !lacks.is_empty() {
                missing_cells.push(format!("{s} {y}-{m:02} missing {}", lacks.join("+")));
            }
        }
    }

    let employed_occs: BTreeSet<OccCode> = raw.employment.iter().map(|r| r.occ).collect();
    let mut covered: BTreeMap<String, BTreeSet<OccCode>> = BTreeMap::new();
    for r in &raw.exposures {
        covered.entry(r.score.clone()).or_default().insert(r.occ);
    }
    let mut exposure_coverage = BTreeMap::new();
    let mut low_coverage_scores = Vec::new();
    for (score, occs) in &covered {
        let frac = if employed_occs.is_empty() {
            1.0
        } else {
            employed_occs.intersection(occs).count() as f64 / employed_occs.len() as f64
        };
        if frac < COVERAGE_THRESHOLD {
            low_coverage_scores.push(score.clone());
        }
        exposure_coverage.insert(score.clone(), frac);
    }

    Ok(ValidationReport {
        row_counts,
        key_collisions: 0,
        missing_cells,
        exposure_coverage,
        low_coverage_scores,
        usable: true,
    })
}

impl LaborPanels {
    /// Validates `raw` and builds keyed panels.
    pub fn from_raw(
        raw: RawPanels,
        ctx: &ValidationContext,
    ) -> Result<(LaborPanels, ValidationReport), ModelError> {
        let report = validate_panels(&raw, ctx)?;
        let employment = raw
            .employment
            .into_iter()
            .map(|r| {
                (
                    (r.state, r.year, r.occ),
                    EmploymentCell {
                        employment: r.employment as u64,
                        mean_wage: r.mean_wage,
                    },
                )
            })
            .collect();
        let claims = raw
            .claims
            .into_iter()
            .map(|r| ((r.state, r.year, r.month, r.occ), r.recipients as u64))
            .collect();
        let rates = |rows: Vec<RateRow>| -> BTreeMap<StateMonth, f64> {
            rows.into_iter()
                .map(|r| ((r.state, r.year, r.month), r.rate))
                .collect()
        };
        let mut skills: BTreeMap<(i32, OccCode), BTreeMap<String, f64>> = BTreeMap::new();
        for (i, r) in raw.skills.into_iter().enumerate() {
            let v = normalize_likert(r.value, r.scale_min, r.scale_max).map_err(|e| {
                ModelError::InvalidRow {
                    table: "skills",
                    row: i + 1,
                    msg: e.to_string(),
                }
            })?;
            skills
                .entry((r.year, r.occ))
                .or_default()
                .insert(r.skill, v);
        }
        let mut exposures: BTreeMap<String, ExposureScore> = BTreeMap::new();
        for r in raw.exposures {
            exposures
                .entry(r.score)
                .or_insert_with(|| ExposureScore {
                    study: r.study.clone(),
                    wave: r.wave,
                    values: BTreeMap::new(),
                })
                .values
                .insert(r.occ, r.value);
        }
        Ok((
            LaborPanels {
                employment,
                claims,
                urate: rates(raw.urate),
                separations: raw.separations.map(rates),
                skills,
                exposures,
            },
            report,
        ))
    }

    /// Occupation employment for one state-year.
    pub fn employment_in(
        &self,
        state: StateCode,
        year: i32,
    ) -> impl Iterator<Item = (OccCode, &EmploymentCell)> + '_ {
        let lo = (state, year, OccCode::major_group(0));
        let hi = (state, year, OccCode::detailed(99, 9999));
        self.employment.range(lo..=hi).map(|(k, v)| (k.2, v))
    }

    pub fn claims_in(
        &self,
        state: StateCode,
        year: i32,
        month: u8,
    ) -> impl Iterator<Item = (OccCode, u64)> + '_ {
        let lo = (state, year, month, OccCode::major_group(0));
        let hi = (state, year, month, OccCode::detailed(99, 9999));
        self.claims.range(lo..=hi).map(|(k, v)| (k.3, *v))
    }

    pub fn states(&self) -> BTreeSet<StateCode> {
        self.employment.keys().map(|k| k.0).collect()
    }

    pub fn state_years(&self) -> BTreeSet<StateYear> {
        self.employment.keys().map(|k| (k.0, k.1)).collect()
    }

    /// Sums a detailed-code employment table to major groups.
    pub fn major_employment(&self, state: StateCode, year: i32) -> BTreeMap<OccCode, u64> {
        let mut out = BTreeMap::new();
        for (occ, cell) in self.employment_in(state, year) {
            *out.entry(occ.major()).or_insert(0) += cell.employment;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(s: &str) -> StateCode {
        s.parse().unwrap()
    }

    fn occ(s: &str) -> OccCode {
        s.parse().unwrap()
    }

    fn clean_raw() -> RawPanels {
        let mut raw = RawPanels::default();
        for (o, e) in [("11-1011", 100), ("11-2011", 50), ("15-1132", 80)] {
            raw.employment.push(EmploymentRow {
                state: st("AK"),
                year: 2010,
                occ: occ(o),
                employment: e,
                mean_wage: 50_000.0,
            });
        }
        for m in 1..=2u8 {
            raw.urate.push(RateRow {
                state: st("AK"),
                year: 2010,
                month: m,
                rate: 0.05,
            });
            for o in ["11", "15"] {
                raw.claims.push(ClaimsRow {
                    state: st("AK"),
                    year: 2010,
                    month: m,
                    occ: occ(o),
                    recipients: 7,
                });
            }
        }
        for o in ["11-1011", "11-2011", "15-1132"] {
            raw.exposures.push(ExposureRow {
                score: "a".into(),
                study: "s".into(),
                wave: 1,
                occ: occ(o),
                value: 0.5,
            });
        }
        raw
    }

    #[test]
    fn major_truncation() {
        assert_eq!(major_of("15-1132").unwrap().to_string(), "15");
        assert_eq!(major_of("15").unwrap().to_string(), "15");
        assert!(major_of("1-1132").is_err());
        assert!(major_of("15-113").is_err());
        assert!(major_of("ab").is_err());
    }

    #[test]
    fn major_batch_matches_prefix_slice() {
        let codes = [
            "11-1011", "13-2011", "15-1132", "17-2051", "19-1029", "21-1012", "23-1011", "25-2021",
            "27-1024", "29-1141",
        ];
        for c in codes {
            assert_eq!(major_of(c).unwrap().to_string(), &c[..2]);
            let m = major_of(c).unwrap();
            assert_eq!(m.major(), m);
        }
    }

    #[test]
    fn clean_panels_validate() {
        let raw = clean_raw();
        let report = validate_panels(&raw, &ValidationContext::default()).unwrap();
        assert_eq!(report.key_collisions, 0);
        assert!(report.usable);
        assert_eq!(report.exposure_coverage["a"], 1.0);
        assert!(report.missing_cells.is_empty());
    }

    #[test]
    fn duplicate_claims_row_names_key() {
        let mut raw = clean_raw();
        let dup = raw.claims[1].clone();
        raw.claims.push(dup);
        let err = validate_panels(&raw, &ValidationContext::default()).unwrap_err();
        assert_eq!(
            err,
            ModelError::DuplicateKey {
                table: "claims",
                key: "(AK, 2010, 1, 15)".into()
            }
        );
    }

    #[test]
    fn low_coverage_is_reported_not_fatal() {
        let mut raw = RawPanels::default();
        for i in 0..20u16 {
            raw.employment.push(EmploymentRow {
                state: st("AK"),
                year: 2010,
                occ: OccCode::detailed(11, 1000 + i),
                employment: 10,
                mean_wage: 1.0,
            });
            if i < 17 {
                raw.exposures.push(ExposureRow {
                    score: "x".into(),
                    study: "s".into(),
                    wave: 2,
                    occ: OccCode::detailed(11, 1000 + i),
                    value: 1.0,
                });
            }
        }
        let report = validate_panels(&raw, &ValidationContext::default()).unwrap();
        assert!(report.usable);
        assert!((report.exposure_coverage["x"] - 0.85).abs() < 1e-15);
        assert_eq!(report.low_coverage_scores, vec!["x".to_string()]);
    }

    #[test]
    fn out_of_range_rate_cites_row() {
        let mut raw = clean_raw();
        raw.urate[1].rate = 1.5;
        match validate_panels(&raw, &ValidationContext::default()).unwrap_err() {
            ModelError::OutOfRange { table, row, .. } => {
                assert_eq!(table, "urate");
                assert_eq!(row, 2);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_cells_counted() {
        let mut raw = clean_raw();
        raw.urate.pop();
        let report = validate_panels(&raw, &ValidationContext::default()).unwrap();
        assert_eq!(
            report.missing_cells,
            vec!["AK 2010-02 missing urate".to_string()]
        );
    }

    #[test]
    fn taxonomy_membership() {
        let tax = Taxonomy::parse("# majors\n11\n15-1132 # detailed\n\n").unwrap();
        let ctx = ValidationContext {
            taxonomy: Some(tax),
            states: None,
        };
        let mut raw = clean_raw();
        assert!(validate_panels(&raw, &ctx).is_ok());
        raw.claims[0].occ = occ("47");
        assert_eq!(
            validate_panels(&raw, &ctx).unwrap_err(),
            ModelError::UnknownMajor("47".into())
        );
        assert!(matches!(
            Taxonomy::parse("11\nxx\n"),
            Err(ModelError::Taxonomy { line: 2, .. })
        ));
    }

    #[test]
    fn aggregation_preserves_totals() {
        let (panels, _) =
            LaborPanels::from_raw(clean_raw(), &ValidationContext::default()).unwrap();
        let majors = panels.major_employment(st("AK"), 2010);
        assert_eq!(majors.values().sum::<u64>(), 230);
        assert_eq!(majors[&occ("11")], 150);
    }
}
