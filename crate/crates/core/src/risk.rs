//! Occupation unemployment risk via Bayes' rule, employment-weighted
//! exposure aggregation, and wage-bill controls.
//!
//! For a state `s` and month `m`:
//!
//! ```text
//! p(u | soc) = p(soc | u) · p(u) / p(soc)
//! ```
//!
//! `p(soc | u)` is the share of benefit recipients whose last major
//! occupation was `soc`, `p(u)` the state unemployment rate, and `p(soc)` the
//! occupation's share of the labor force: employed workers (annual counts,
//! constant within the year) plus the unemployed stock implied by the rate,
//! `U = E · p(u) / (1 − p(u))`, split across occupations by `p(soc | u)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::ingest::{format_float, Cells, IngestError, Record};
use crate::model::{ExposureScore, LaborPanels, OccCode, PanelKey, StateCode};
use crate::stats;

/// Minimum share of a cell's employment that must carry a score before a
/// weighted exposure is reported.
pub const MIN_EXPOSURE_COVERAGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RiskError {
    #[error("no benefit recipients in cell")]
    NoRecipients,
    #[error("unemployment rate {0} leaves no employed labor force")]
    SingularLaborForce(f64),
    #[error("no employment in cell")]
    NoEmployment,
    #[error("{key}: p(soc) = 0 while p(soc|u) = {share}; input tables disagree")]
    Inconsistent { key: String, share: f64 },
    #[error(
        "scored occupations hold only {covered:.3} of employment (need {MIN_EXPOSURE_COVERAGE})"
    )]
    LowCoverage { covered: f64 },
    #[error("total wage bill is zero")]
    ZeroWageBill,
    #[error("unknown exposure score `{0}`")]
    UnknownScore(String),
}

/// p(soc | u) from recipient counts.
pub fn occ_share_given_unemployed(
    counts: impl IntoIterator<Item = (OccCode, u64)>,
) -> Result<BTreeMap<OccCode, f64>, RiskError> {
    let counts: Vec<(OccCode, u64)> = counts.into_iter().collect();
    let total: u64 = counts.iter().map(|c| c.1).sum();
    if total == 0 {
        return Err(RiskError::NoRecipients);
    }
    Ok(counts
        .into_iter()
        .map(|(o, c)| (o, c as f64 / total as f64))
        .collect())
}

/// p(soc) relative to the labor force. `employment` holds employed counts by
/// the same occupation granularity as `share_unemployed`.
pub fn labor_force_occ_prob(
    employment: &BTreeMap<OccCode, u64>,
    share_unemployed: &BTreeMap<OccCode, f64>,
    p_u: f64,
) -> Result<BTreeMap<OccCode, f64>, RiskError> {
    if p_u >= 1.0 {
        return Err(RiskError::SingularLaborForce(p_u));
    }
    let employed: u64 = employment.values().sum();
    if employed == 0 {
        return Err(RiskError::NoEmployment);
    }
    let e = employed as f64;
    let unemployed = e * p_u / (1.0 - p_u);
    let labor_force = e + unemployed;
    let mut out = BTreeMap::new();
    for occ in employment.keys().chain(share_unemployed.keys()) {
        if out.contains_key(occ) {
            continue;
        }
        let e_soc = employment.get(occ).copied().unwrap_or(0) as f64;
        let u_soc = share_unemployed.get(occ).copied().unwrap_or(0.0) * unemployed;
        out.insert(*occ, (e_soc + u_soc) / labor_force);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub key: PanelKey,
    pub p_soc_given_u: f64,
    pub p_u: f64,
    pub p_soc: f64,
    pub risk: f64,
    /// Absent when risk is zero.
    pub log10_risk: Option<f64>,
}

impl Record for RiskRow {
    type Key = PanelKey;

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(RiskRow {
            key: PanelKey {
                state: c.state(0)?,
                year: c.small(1)?,
                month: c.small(2)?,
                occ: c.occ(3)?,
            },
            p_soc_given_u: c.float(4)?,
            p_u: c.float(5)?,
            p_soc: c.float(6)?,
            risk: c.float(7)?,
            log10_risk: c.opt_float(8)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.key.state.to_string(),
            self.key.year.to_string(),
            self.key.month.to_string(),
            self.key.occ.to_string(),
            format_float(self.p_soc_given_u),
            format_float(self.p_u),
            format_float(self.p_soc),
            format_float(self.risk),
            self.log10_risk.map(format_float).unwrap_or_default(),
        ]
    }

    fn key(&self) -> PanelKey {
        self.key
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RiskDiagnostics {
    pub cells: usize,
    pub skipped_no_recipients: Vec<String>,
    pub skipped_missing_inputs: Vec<String>,
    pub rejected_singular: Vec<String>,
    /// Rows with risk = 0, kept in the panel but unusable on the log scale.
    pub log_exclusions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskPanel {
    pub rows: Vec<RiskRow>,
    pub diagnostics: RiskDiagnostics,
}

enum CellOutcome {
    Rows(Vec<RiskRow>),
    NoRecipients,
    MissingInputs,
    Singular,
}

fn risk_cell(
    panels: &LaborPanels,
    state: StateCode,
    year: i32,
    month: u8,
    p_u: f64,
) -> Result<CellOutcome, RiskError> {
    let employment = panels.major_employment(state, year);
    let claims: Vec<(OccCode, u64)> = panels.claims_in(state, year, month).collect();
    if employment.is_empty() || claims.is_empty() {
        return Ok(CellOutcome::MissingInputs);
    }
    let share_u = match occ_share_given_unemployed(claims) {
        Ok(s) => s,
        Err(_) => return Ok(CellOutcome::NoRecipients),
    };
    let p_soc = match labor_force_occ_prob(&employment, &share_u, p_u) {
        Ok(p) => p,
        Err(RiskError::SingularLaborForce(_)) => return Ok(CellOutcome::Singular),
        Err(RiskError::NoEmployment) => return Ok(CellOutcome::MissingInputs),
        Err(e) => return Err(e),
    };
    let mut rows = Vec::with_capacity(p_soc.len());
    for (occ, &p) in &p_soc {
        let key = PanelKey {
            state,
            year,
            month,
            occ: *occ,
        };
        let share = share_u.get(occ).copied().unwrap_or(0.0);
        if p == 0.0 {
            if share > 0.0 {
                return Err(RiskError::Inconsistent {
                    key: format!("{state} {year}-{month:02} {occ}"),
                    share,
                });
            }
            continue;
        }
        let risk = share * p_u / p;
        rows.push(RiskRow {
            key,
            p_soc_given_u: share,
            p_u,
            p_soc: p,
            risk,
            log10_risk: (risk > 0.0).then(|| risk.log10()),
        });
    }
    Ok(CellOutcome::Rows(rows))
}

/// One row per (state, month, major occupation) with a positive labor-force
/// share. Cells are independent and computed in parallel; output is in key
/// order.
pub fn unemployment_risk(panels: &LaborPanels) -> Result<RiskPanel, RiskError> {
    let cells: Vec<((StateCode, i32, u8), f64)> =
        panels.urate.iter().map(|(k, v)| (*k, *v)).collect();
    let outcomes: Vec<Result<CellOutcome, RiskError>> = cells
        .par_iter()
        .map(|&((s, y, m), p_u)| risk_cell(panels, s, y, m, p_u))
        .collect();
    let mut diagnostics = RiskDiagnostics {
        cells: cells.len(),
        ..Default::default()
    };
    let mut rows = Vec::new();
    for (((s, y, m), _), outcome) in cells.iter().zip(outcomes) {
        let label = format!("{s} {y}-{m:02}");
        match outcome? {
            CellOutcome::Rows(r) => rows.extend(r),
            CellOutcome::NoRecipients => diagnostics.skipped_no_recipients.push(label),
            CellOutcome::MissingInputs => diagnostics.skipped_missing_inputs.push(label),
            CellOutcome::Singular => diagnostics.rejected_singular.push(label),
        }
    }
    diagnostics.log_exclusions = rows.iter().filter(|r| r.log10_risk.is_none()).count();
    Ok(RiskPanel { rows, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualRiskRow {
    pub state: StateCode,
    pub year: i32,
    pub occ: OccCode,
    pub median_risk: f64,
    pub months: usize,
}

impl Record for AnnualRiskRow {
    type Key = (StateCode, i32, OccCode);

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(AnnualRiskRow {
            state: c.state(0)?,
            year: c.small(1)?,
            occ: c.occ(2)?,
            median_risk: c.float(3)?,
            months: c.small(4)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.state.to_string(),
            self.year.to_string(),
            self.occ.to_string(),
            format_float(self.median_risk),
            self.months.to_string(),
        ]
    }

    fn key(&self) -> Self::Key {
        (self.state, self.year, self.occ)
    }
}

/// Median of the monthly risk values within each (state, year, occupation).
pub fn annual_median(panel: &RiskPanel) -> Vec<AnnualRiskRow> {
    let mut groups: BTreeMap<(StateCode, i32, OccCode), Vec<f64>> = BTreeMap::new();
    for r in &panel.rows {
        groups
            .entry((r.key.state, r.key.year, r.key.occ))
            .or_default()
            .push(r.risk);
    }
    groups
        .into_iter()
        .map(|((state, year, occ), v)| AnnualRiskRow {
            state,
            year,
            occ,
            median_risk: stats::median(&v),
            months: v.len(),
        })
        .collect()
}

/// Employment-weighted mean of `score` over the occupations in `weights`,
/// renormalized over occupations that carry a score. Returns the value and
/// the covered employment share.
pub fn weighted_exposure(
    weights: impl IntoIterator<Item = (OccCode, f64)>,
    score: &ExposureScore,
) -> Result<(f64, f64), RiskError> {
    let (mut total, mut covered, mut acc) = (0.0, 0.0, 0.0);
    for (occ, w) in weights {
        total += w;
        if let Some(v) = score.values.get(&occ) {
            covered += w;
            acc += w * v;
        }
    }
    if total <= 0.0 {
        return Err(RiskError::NoEmployment);
    }
    let share = covered / total;
    if share < MIN_EXPOSURE_COVERAGE {
        return Err(RiskError::LowCoverage { covered: share });
    }
    Ok((acc / covered, share))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExposureValue {
    pub exposure: f64,
    pub covered_share: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StateExposure {
    pub values: BTreeMap<(StateCode, i32, String), ExposureValue>,
    /// Cells rejected for low coverage, with the diagnostic.
    pub rejected: Vec<String>,
}

impl StateExposure {
    pub fn get(&self, state: StateCode, year: i32, score: &str) -> Option<f64> {
        self.values
            .get(&(state, year, score.to_string()))
            .map(|v| v.exposure)
    }

    pub fn rows(&self) -> Vec<StateExposureRow> {
        self.values
            .iter()
            .map(|((state, year, score), v)| StateExposureRow {
                state: *state,
                year: *year,
                score: score.clone(),
                exposure: v.exposure,
                covered_share: v.covered_share,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateExposureRow {
    pub state: StateCode,
    pub year: i32,
    pub score: String,
    pub exposure: f64,
    pub covered_share: f64,
}

impl Record for StateExposureRow {
    type Key = (StateCode, i32, String);

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(StateExposureRow {
            state: c.state(0)?,
            year: c.small(1)?,
            score: c.text(2)?.to_string(),
            exposure: c.float(3)?,
            covered_share: c.float(4)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.state.to_string(),
            self.year.to_string(),
            self.score.clone(),
            format_float(self.exposure),
            format_float(self.covered_share),
        ]
    }

    fn key(&self) -> Self::Key {
        (self.state, self.year, self.score.clone())
    }
}

/// Employment-weighted exposure of every state-year for the named scores.
pub fn state_exposure(panels: &LaborPanels, scores: &[String]) -> Result<StateExposure, RiskError> {
    let mut out = StateExposure::default();
    for name in scores {
        let score = panels
            .exposures
            .get(name)
            .ok_or_else(|| RiskError::UnknownScore(name.clone()))?;
        for (state, year) in panels.state_years() {
            let weights = panels
                .employment_in(state, year)
                .map(|(o, c)| (o, c.employment as f64));
            match weighted_exposure(weights, score) {
                Ok((exposure, covered_share)) => {
                    out.values.insert(
                        (state, year, name.clone()),
                        ExposureValue {
                            exposure,
                            covered_share,
                        },
                    );
                }
                Err(e) => out.rejected.push(format!("{state} {year} {name}: {e}")),
            }
        }
    }
    Ok(out)
}

/// Employment-weighted exposure of each major group within one state-year.
/// Majors below the coverage floor are omitted.
pub fn major_exposure(
    panels: &LaborPanels,
    state: StateCode,
    year: i32,
    score: &ExposureScore,
) -> BTreeMap<OccCode, f64> {
    let mut by_major: BTreeMap<OccCode, Vec<(OccCode, f64)>> = BTreeMap::new();
    for (occ, c) in panels.employment_in(state, year) {
        by_major
            .entry(occ.major())
            .or_default()
            .push((occ, c.employment as f64));
    }
    by_major
        .into_iter()
        .filter_map(|(m, w)| weighted_exposure(w, score).ok().map(|(v, _)| (m, v)))
        .collect()
}

fn wage_bill<'a>(cells: impl Iterator<Item = &'a crate::model::EmploymentCell>) -> f64 {
    cells.map(|c| c.employment as f64 * c.mean_wage).sum()
}

/// log10 of Σ employment × mean wage over a state-year.
pub fn log_wage_bill(panels: &LaborPanels, state: StateCode, year: i32) -> Result<f64, RiskError> {
    let bill = wage_bill(panels.employment_in(state, year).map(|(_, c)| c));
    if bill > 0.0 {
        Ok(bill.log10())
    } else {
        Err(RiskError::ZeroWageBill)
    }
}

/// log10 wage bill of each major group in a state-year (six-digit bills
/// summed up to the major group).
pub fn major_log_wage_bill(
    panels: &LaborPanels,
    state: StateCode,
    year: i32,
) -> BTreeMap<OccCode, f64> {
    let mut bills: BTreeMap<OccCode, f64> = BTreeMap::new();
    for (occ, c) in panels.employment_in(state, year) {
        *bills.entry(occ.major()).or_insert(0.0) += c.employment as f64 * c.mean_wage;
    }
    bills
        .into_iter()
        .filter(|(_, b)| *b > 0.0)
        .map(|(m, b)| (m, b.log10()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EmploymentCell;

    fn occ(s: &str) -> OccCode {
        s.parse().unwrap()
    }

    fn st(s: &str) -> StateCode {
        s.parse().unwrap()
    }

    #[test]
    fn share_given_unemployed_cases() {
        let s = occ_share_given_unemployed([(occ("11"), 50), (occ("15"), 50)]).unwrap();
        assert_eq!(s[&occ("11")], 0.5);
        let s = occ_share_given_unemployed([(occ("11"), 100), (occ("15"), 0)]).unwrap();
        assert_eq!((s[&occ("11")], s[&occ("15")]), (1.0, 0.0));
        assert_eq!(
            occ_share_given_unemployed([(occ("11"), 0)]),
            Err(RiskError::NoRecipients)
        );
    }

    #[test]
    fn share_matches_integer_ratio_oracle() {
        let counts = [17u64, 4, 230, 1, 98];
        let codes: Vec<OccCode> = (0..5).map(|i| OccCode::major_group(11 + 2 * i)).collect();
        let s = occ_share_given_unemployed(codes.iter().copied().zip(counts)).unwrap();
        let total: u64 = counts.iter().sum();
        for (c, n) in codes.iter().zip(counts) {
            // n / total reduced exactly, then converted once.
            let g = gcd(n, total);
            let want = (n / g) as f64 / (total / g) as f64;
            assert!((s[c] - want).abs() < 1e-15);
        }
        assert!((s.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn labor_force_prob_cases() {
        let one: BTreeMap<_, _> = [(occ("11"), 40u64)].into();
        let su: BTreeMap<_, _> = [(occ("11"), 1.0)].into();
        for p_u in [0.0, 0.2, 0.9] {
            let p = labor_force_occ_prob(&one, &su, p_u).unwrap();
            assert!((p[&occ("11")] - 1.0).abs() < 1e-15);
        }
        let emp: BTreeMap<_, _> = [(occ("11"), 900u64), (occ("15"), 100)].into();
        let su: BTreeMap<_, _> = [(occ("11"), 0.3), (occ("15"), 0.7)].into();
        let p = labor_force_occ_prob(&emp, &su, 0.0).unwrap();
        assert_eq!((p[&occ("11")], p[&occ("15")]), (0.9, 0.1));
        assert_eq!(
            labor_force_occ_prob(&emp, &su, 1.0),
            Err(RiskError::SingularLaborForce(1.0))
        );
    }

    #[test]
    fn bayes_arithmetic() {
        // p(soc|u) = 0.2, p_u = 0.05, p(soc) = 0.1 → 0.1
        let r: f64 = 0.2 * 0.05 / 0.1;
        assert!((r - 0.1).abs() < 1e-15);
    }

    fn panels_with(emp: &[(&str, u64, f64)], claims: &[(&str, u64)], p_u: f64) -> LaborPanels {
        let mut p = LaborPanels::default();
        for (o, e, w) in emp {
            p.employment.insert(
                (st("AK"), 2010, occ(o)),
                EmploymentCell {
                    employment: *e,
                    mean_wage: *w,
                },
            );
        }
        for (o, c) in claims {
            p.claims.insert((st("AK"), 2010, 1, occ(o)), *c);
        }
        p.urate.insert((st("AK"), 2010, 1), p_u);
        p
    }

    #[test]
    fn exposure_neutral_occupation_has_state_rate() {
        // Claims proportional to employment → p(soc|u) = p(soc) → risk = p_u.
        let p = panels_with(
            &[("11-1011", 600, 1.0), ("15-1132", 400, 1.0)],
            &[("11", 60), ("15", 40)],
            0.07,
        );
        let panel = unemployment_risk(&p).unwrap();
        assert_eq!(panel.rows.len(), 2);
        for r in &panel.rows {
            assert!((r.risk - 0.07).abs() < 1e-15);
            assert!((r.risk * r.p_soc - r.p_soc_given_u * r.p_u).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_claim_rows_kept_but_excluded_from_log() {
        let p = panels_with(
            &[("11-1011", 600, 1.0), ("15-1132", 400, 1.0)],
            &[("11", 60), ("15", 0)],
            0.05,
        );
        let panel = unemployment_risk(&p).unwrap();
        assert_eq!(panel.rows.len(), 2);
        assert_eq!(panel.diagnostics.log_exclusions, 1);
        assert_eq!(panel.rows[1].risk, 0.0);
        assert!(panel.rows[1].log10_risk.is_none());
        let total: f64 = panel.rows.iter().map(|r| r.risk * r.p_soc).sum();
        assert!((total - 0.05).abs() < 1e-12);
    }

    #[test]
    fn claims_without_employment_at_zero_rate_is_inconsistent() {
        let p = panels_with(&[("11-1011", 600, 1.0)], &[("11", 60), ("15", 10)], 0.0);
        assert!(matches!(
            unemployment_risk(&p),
            Err(RiskError::Inconsistent { .. })
        ));
    }

    #[test]
    fn empty_claims_cell_is_skipped() {
        let p = panels_with(&[("11-1011", 600, 1.0)], &[("11", 0)], 0.05);
        let panel = unemployment_risk(&p).unwrap();
        assert!(panel.rows.is_empty());
        assert_eq!(panel.diagnostics.skipped_no_recipients.len(), 1);
    }

    fn score(values: &[(&str, f64)]) -> ExposureScore {
        ExposureScore {
            study: "s".into(),
            wave: 1,
            values: values.iter().map(|(o, v)| (occ(o), *v)).collect(),
        }
    }

    #[test]
    fn weighted_exposure_cases() {
        let s = score(&[("11-1011", 1.0), ("15-1132", 0.0)]);
        let (v, cov) =
            weighted_exposure([(occ("11-1011"), 0.75), (occ("15-1132"), 0.25)], &s).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert_eq!(cov, 1.0);
        // Permutation.
        let (v2, _) =
            weighted_exposure([(occ("15-1132"), 0.25), (occ("11-1011"), 0.75)], &s).unwrap();
        assert_eq!(v, v2);
        // Splitting an occupation into two equal-score halves.
        let split = score(&[("11-1011", 1.0), ("11-1012", 1.0), ("15-1132", 0.0)]);
        let (v3, _) = weighted_exposure(
            [
                (occ("11-1011"), 0.5),
                (occ("11-1012"), 0.25),
                (occ("15-1132"), 0.25),
            ],
            &split,
        )
        .unwrap();
        assert!((v3 - 0.75).abs() < 1e-15);
        // Constant score.
        let c = score(&[("11-1011", 3.5), ("15-1132", 3.5)]);
        let (v4, _) =
            weighted_exposure([(occ("11-1011"), 5.0), (occ("15-1132"), 9.0)], &c).unwrap();
        assert!((v4 - 3.5).abs() < 1e-15);
    }

    #[test]
    fn low_coverage_rejected() {
        let s = score(&[("11-1011", 1.0)]);
        let r = weighted_exposure([(occ("11-1011"), 0.4), (occ("15-1132"), 0.6)], &s);
        assert!(matches!(r, Err(RiskError::LowCoverage { .. })));
        // Renormalized over covered occupations.
        let s = score(&[("11-1011", 2.0), ("13-1011", 4.0)]);
        let (v, cov) = weighted_exposure(
            [
                (occ("11-1011"), 0.4),
                (occ("13-1011"), 0.4),
                (occ("15-1132"), 0.2),
            ],
            &s,
        )
        .unwrap();
        assert!((v - 3.0).abs() < 1e-15);
        assert!((cov - 0.8).abs() < 1e-15);
    }

    #[test]
    fn wage_bill_cases() {
        let p = panels_with(&[("11-1011", 100, 1000.0)], &[], 0.05);
        assert!((log_wage_bill(&p, st("AK"), 2010).unwrap() - 5.0).abs() < 1e-12);
        let p2 = panels_with(&[("11-1011", 200, 1000.0)], &[], 0.05);
        let d = log_wage_bill(&p2, st("AK"), 2010).unwrap() - 5.0;
        assert!((d - 2f64.log10()).abs() < 1e-12);
        assert_eq!(
            log_wage_bill(&p, st("ZZ"), 2010),
            Err(RiskError::ZeroWageBill)
        );
    }

    #[test]
    fn annual_median_groups_months() {
        let mut p = panels_with(&[("11-1011", 100, 1.0)], &[], 0.05);
        for (m, c) in [(1u8, 10u64), (2, 20), (3, 30)] {
            p.claims.insert((st("AK"), 2010, m, occ("11")), c);
        }
        p.urate.insert((st("AK"), 2010, 2), 0.1);
        p.urate.insert((st("AK"), 2010, 3), 0.2);
        let panel = unemployment_risk(&p).unwrap();
        let annual = annual_median(&panel);
        assert_eq!(annual.len(), 1);
        assert_eq!(annual[0].months, 3);
        assert!((annual[0].median_risk - 0.1).abs() < 1e-15);
    }
}
