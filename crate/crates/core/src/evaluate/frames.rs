use std::collections::BTreeMap;

use serde::Serialize;

use super::EvaluateError;
use crate::model::{LaborPanels, OccCode, StateCode};
use crate::regress::Frame;
use crate::risk::{self, RiskPanel, StateExposure};
use crate::skills::{self, PcaModel, PcaOptions, SkillChangeSet, SkillMatrix};

pub const LOG10_RISK: &str = "log10_risk";
pub const LOG10_WAGE_BILL: &str = "log10_wage_bill";
pub const LOG10_URATE: &str = "log10_urate";
pub const LOG10_SEPARATIONS: &str = "log10_separations";
pub const SKILL_CHANGE: &str = "skill_change";

pub fn month_label(m: u8) -> String {
    format!("{m:02}")
}

/// Rows where every named numeric column is finite.
pub fn complete_rows(frame: &Frame, columns: &[&str]) -> Result<Vec<usize>, EvaluateError> {
    let cols: Vec<&Vec<f64>> = columns
        .iter()
        .map(|c| {
            frame
                .numeric
                .get(*c)
                .ok_or_else(|| crate::regress::RegressError::MissingColumn(c.to_string()))
        })
        .collect::<Result<_, _>>()?;
    Ok((0..frame.n)
        .filter(|&r| cols.iter().all(|c| c[r].is_finite()))
        .collect())
}

/// Skill-profile principal components and each (year, occupation)
/// projection onto them.
#[derive(Debug, Clone)]
pub struct SkillPcs {
    pub model: PcaModel,
    pub projections: BTreeMap<(i32, OccCode), Vec<f64>>,
    years_by_occ: BTreeMap<OccCode, Vec<i32>>,
}

impl SkillPcs {
    pub fn names(&self) -> Vec<String> {
        (1..=self.model.k())
            .map(|i| format!("skill_pc{i}"))
            .collect()
    }

    /// Projection from the latest survey year not after `year`, or the
    /// earliest one when every survey is later.
    pub fn nearest(&self, occ: OccCode, year: i32) -> Option<&[f64]> {
        let years = self.years_by_occ.get(&occ)?;
        let y = years
            .iter()
            .rev()
            .find(|&&y| y <= year)
            .or_else(|| years.first())?;
        self.projections.get(&(*y, occ)).map(Vec::as_slice)
    }
}

/// Fits PCA on every (year, occupation) profile and projects each one.
pub fn skill_pcs(
    panels: &LaborPanels,
    k: usize,
    opts: PcaOptions,
) -> Result<SkillPcs, EvaluateError> {
    let matrix = SkillMatrix::from_profiles(&panels.skills)?;
    let model = skills::pca_fit(&matrix, k, opts)?;
    let mut projections = BTreeMap::new();
    let mut years_by_occ: BTreeMap<OccCode, Vec<i32>> = BTreeMap::new();
    for (i, &(year, occ)) in matrix.rows.iter().enumerate() {
        projections.insert(
            (year, occ),
            skills::pca_project(&model, &matrix.profile(i))?,
        );
        years_by_occ.entry(occ).or_default().push(year);
    }
    Ok(SkillPcs {
        model,
        projections,
        years_by_occ,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FrameDiagnostics {
    pub rows: usize,
    /// Rows with zero risk, outside the log scale.
    pub zero_response: usize,
    /// Rows (with a response) lacking each covariate.
    pub missing: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct RiskFrame {
    pub frame: Frame,
    pub scores: Vec<String>,
    pub college: Option<String>,
    pub pcs: Vec<String>,
    pub diagnostics: FrameDiagnostics,
}

fn weighted_mean<'a>(items: impl Iterator<Item = (f64, &'a [f64])>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut total = 0.0;
    for (w, v) in items {
        total += w;
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    if total > 0.0 {
        acc.iter().map(|a| a / total).collect()
    } else {
        vec![f64::NAN; dim]
    }
}

/// One row per risk-panel row. Major-group covariates are employment-weighted
/// means of six-digit values within the state-year; missing values are NaN.
pub fn risk_frame(
    panels: &LaborPanels,
    risk: &RiskPanel,
    scores: &[String],
    college: Option<&str>,
    pcs: Option<&SkillPcs>,
) -> Result<RiskFrame, EvaluateError> {
    let mut exposure_names: Vec<String> = scores.to_vec();
    if let Some(c) = college {
        exposure_names.push(c.to_string());
    }
    let exposures = exposure_names
        .iter()
        .map(|n| {
            panels
                .exposures
                .get(n)
                .ok_or_else(|| EvaluateError::UnknownScore(n.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pc_names = pcs.map(|p| p.names()).unwrap_or_default();
    let k = pc_names.len();

    // (state, year, major) → [exposures..., pcs..., wage bill]
    let mut cov: BTreeMap<(StateCode, i32, OccCode), Vec<f64>> = BTreeMap::new();
    for (state, year) in panels.state_years() {
        let by_score: Vec<BTreeMap<OccCode, f64>> = exposures
            .iter()
            .map(|s| risk::major_exposure(panels, state, year, s))
            .collect();
        let wages = risk::major_log_wage_bill(panels, state, year);
        let mut occs: BTreeMap<OccCode, Vec<(OccCode, f64)>> = BTreeMap::new();
        for (o, c) in panels.employment_in(state, year) {
            occs.entry(o.major())
                .or_default()
                .push((o, c.employment as f64));
        }
        for (major, members) in occs {
            let mut v: Vec<f64> = by_score
                .iter()
                .map(|m| m.get(&major).copied().unwrap_or(f64::NAN))
                .collect();
            if let Some(p) = pcs {
                v.extend(weighted_mean(
                    members
                        .iter()
                        .filter_map(|(o, w)| p.nearest(*o, year).map(|x| (*w, x))),
                    k,
                ));
            }
            v.push(wages.get(&major).copied().unwrap_or(f64::NAN));
            cov.insert((state, year, major), v);
        }
    }

    let mut names = exposure_names.clone();
    names.extend(pc_names.iter().cloned());
    names.push(LOG10_WAGE_BILL.into());

    let n = risk.rows.len();
    let mut keys = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut columns = vec![Vec::with_capacity(n); names.len()];
    let mut cats: [Vec<String>; 4] = Default::default();
    let mut diagnostics = FrameDiagnostics {
        rows: n,
        ..Default::default()
    };
    let nan_row = vec![f64::NAN; names.len()];
    for r in &risk.rows {
        let k = r.key;
        keys.push(format!(
            "{}/{}/{}/{}",
            k.state,
            k.year,
            month_label(k.month),
            k.occ
        ));
        let yv = r.log10_risk.unwrap_or(f64::NAN);
        if r.log10_risk.is_none() {
            diagnostics.zero_response += 1;
        }
        y.push(yv);
        let vals = cov
            .get(&(k.state, k.year, k.occ.major()))
            .unwrap_or(&nan_row);
        for (j, v) in vals.iter().enumerate() {
            columns[j].push(*v);
            if yv.is_finite() && !v.is_finite() {
                *diagnostics.missing.entry(names[j].clone()).or_insert(0) += 1;
            }
        }
        cats[0].push(k.year.to_string());
        cats[1].push(month_label(k.month));
        cats[2].push(k.state.to_string());
        cats[3].push(k.occ.major().to_string());
    }
    let mut frame = Frame::new(keys);
    frame.push_numeric(LOG10_RISK, y)?;
    for (name, col) in names.iter().zip(columns) {
        frame.push_numeric(name, col)?;
    }
    let [years, months, states, occs] = cats;
    frame.push_categorical("year", years)?;
    frame.push_categorical("month", months)?;
    frame.push_categorical("state", states)?;
    frame.push_categorical("occ", occs)?;
    Ok(RiskFrame {
        frame,
        scores: scores.to_vec(),
        college: college.map(str::to_string),
        pcs: pc_names,
        diagnostics,
    })
}

fn log10_or_nan(v: f64) -> f64 {
    if v > 0.0 {
        v.log10()
    } else {
        f64::NAN
    }
}

/// One row per (state, year, month) with an unemployment rate: log10
/// unemployment and separation rates, state exposures, and the state wage
/// bill.
pub fn state_frame(
    panels: &LaborPanels,
    scores: &[String],
    exposure: &StateExposure,
) -> Result<Frame, EvaluateError> {
    let keys: Vec<_> = panels.urate.keys().copied().collect();
    let mut wage: BTreeMap<(StateCode, i32), f64> = BTreeMap::new();
    for &(s, y, _) in &keys {
        wage.entry((s, y))
            .or_insert_with(|| risk::log_wage_bill(panels, s, y).unwrap_or(f64::NAN));
    }
    let mut frame = Frame::new(
        keys.iter()
            .map(|(s, y, m)| format!("{s}/{y}/{}", month_label(*m)))
            .collect(),
    );
    frame.push_numeric(
        LOG10_URATE,
        keys.iter().map(|k| log10_or_nan(panels.urate[k])).collect(),
    )?;
    let seps = keys
        .iter()
        .map(|k| {
            panels
                .separations
                .as_ref()
                .and_then(|s| s.get(k))
                .map_or(f64::NAN, |v| log10_or_nan(*v))
        })
        .collect();
    frame.push_numeric(LOG10_SEPARATIONS, seps)?;
    for name in scores {
        let col = keys
            .iter()
            .map(|&(s, y, _)| exposure.get(s, y, name).unwrap_or(f64::NAN))
            .collect();
        frame.push_numeric(name, col)?;
    }
    frame.push_numeric(
        LOG10_WAGE_BILL,
        keys.iter().map(|&(s, y, _)| wage[&(s, y)]).collect(),
    )?;
    frame.push_categorical("year", keys.iter().map(|k| k.1.to_string()).collect())?;
    frame.push_categorical("month", keys.iter().map(|k| month_label(k.2)).collect())?;
    frame.push_categorical("state", keys.iter().map(|k| k.0.to_string()).collect())?;
    Ok(frame)
}

/// One row per six-digit occupation in the skill-change dataset with its
/// exposure scores, update year, and major group.
pub fn skill_change_frame(
    set: &SkillChangeSet,
    panels: &LaborPanels,
    scores: &[String],
) -> Result<Frame, EvaluateError> {
    let mut frame = Frame::new(set.rows.iter().map(|r| r.occ.to_string()).collect());
    frame.push_numeric(
        SKILL_CHANGE,
        set.rows.iter().map(|r| r.skill_change).collect(),
    )?;
    for name in scores {
        let s = panels
            .exposures
            .get(name)
            .ok_or_else(|| EvaluateError::UnknownScore(name.clone()))?;
        frame.push_numeric(
            name,
            set.rows
                .iter()
                .map(|r| s.values.get(&r.occ).copied().unwrap_or(f64::NAN))
                .collect(),
        )?;
    }
    frame.push_categorical(
        "year",
        set.rows.iter().map(|r| r.year.to_string()).collect(),
    )?;
    frame.push_categorical(
        "major",
        set.rows.iter().map(|r| r.occ.major().to_string()).collect(),
    )?;
    Ok(frame)
}
