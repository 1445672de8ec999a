use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::cv::{cross_validate, CvOptions, CvReport};
use super::figures;
use super::frames::{
    complete_rows, risk_frame, skill_change_frame, skill_pcs, state_frame, RiskFrame, SkillPcs,
    LOG10_RISK,
};
use super::outcomes::{outcome_regressions, Outcome, OutcomeResult};
use super::strata::{stratified_analysis, StrataOptions, StratifiedTable};
use super::suite::{run_model_suite, ModelSuiteResult, NamedFit, SuiteSpec};
use super::{score_correlations, AnalysisConfig, CorrelationMatrix, EvaluateError};
use crate::ingest::{self, schema};
use crate::model::LaborPanels;
use crate::regress::{EstimatorRegistry, RegressError, RegressionTable};
use crate::risk::{self, RiskPanel};
use crate::rng;
use crate::skills::{self, PcaOptions, SkillChangeSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadlineModel {
    pub name: String,
    pub estimator: String,
    pub covariates: Vec<String>,
    pub fixed_effects: Vec<String>,
    pub n: usize,
    pub r2: f64,
    pub adj_r2: f64,
    pub lambda: Option<f64>,
    pub support: usize,
    pub dropped_collinear: Vec<String>,
    pub coefficients: BTreeMap<String, f64>,
}

impl HeadlineModel {
    fn from_fit(f: &NamedFit) -> Self {
        HeadlineModel {
            name: f.name.clone(),
            estimator: f.fit.estimator.clone(),
            covariates: f.spec.covariates.clone(),
            fixed_effects: f.spec.fixed_effects.clone(),
            n: f.fit.n,
            r2: f.fit.r2,
            adj_r2: f.fit.adj_r2,
            lambda: f.fit.lasso.as_ref().map(|l| l.lambda),
            support: f.fit.support_size(),
            dropped_collinear: f.diagnostics.dropped_collinear.clone(),
            coefficients: f
                .fit
                .covariate_names()
                .into_iter()
                .map(|c| (c.to_string(), f.fit.coef(c).expect("listed covariate")))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskSummary {
    pub rows: usize,
    pub log_exclusions: usize,
    pub cells: usize,
    pub skipped_no_recipients: usize,
    pub skipped_missing_inputs: usize,
    pub rejected_singular: usize,
    pub missing_covariates: BTreeMap<String, usize>,
    pub regression_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaSummary {
    pub k: usize,
    pub rank: usize,
    pub explained: Vec<f64>,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvModelSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvSummary {
    pub trials: usize,
    pub folds: usize,
    pub rows: usize,
    pub models: Vec<CvModelSummary>,
    pub comparisons: Vec<super::CvComparison>,
    pub unseen_levels: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrataSummary {
    pub axis: String,
    pub score: String,
    pub fitted: usize,
    pub skipped: usize,
    pub reported: usize,
    pub extreme: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeSummary {
    pub outcome: Outcome,
    pub rows: usize,
    pub simple_r2: BTreeMap<String, f64>,
    pub combined_r2: f64,
    pub dropped_collinear: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillChangeSummary {
    pub baseline_year: i32,
    pub max_year: i32,
    pub rows: usize,
    pub never_updated: usize,
    pub updated_after_window: usize,
    pub missing_baseline: usize,
}

/// Full results kept in memory for callers; not serialized.
#[derive(Debug, Clone, Default)]
pub struct AnalysisDetails {
    pub suite: Option<ModelSuiteResult>,
    pub cv: Option<CvReport>,
    pub correlations: Option<CorrelationMatrix>,
    pub strata: Vec<StratifiedTable>,
    pub outcomes: Vec<OutcomeResult>,
    pub skill_change: Option<SkillChangeSet>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub seed: u64,
    pub config: AnalysisConfig,
    pub scores: Vec<String>,
    pub risk: RiskSummary,
    pub pca: Option<PcaSummary>,
    pub correlations: Option<CorrelationSummary>,
    pub headline: Vec<HeadlineModel>,
    pub simple_r2: BTreeMap<String, f64>,
    pub per_score_r2: BTreeMap<String, f64>,
    pub cv: Option<CvSummary>,
    pub strata: Vec<StrataSummary>,
    pub outcomes: Vec<OutcomeSummary>,
    pub skill_change: Option<SkillChangeSummary>,
    /// Analyses not run, with the reason.
    pub skipped: Vec<String>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    #[serde(skip)]
    pub details: AnalysisDetails,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSummary {
    pub mean_r2: Option<f64>,
    pub median_r2: Option<f64>,
    pub undefined: Vec<(String, String)>,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<(), EvaluateError> {
        ingest::write_bytes(&self.dir.join(rel), bytes)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn table(&mut self, stem: &str, t: &RegressionTable) -> Result<(), EvaluateError> {
        self.put(&format!("tables/{stem}.csv"), t.to_csv().as_bytes())?;
        self.put(&format!("tables/{stem}.txt"), t.to_text().as_bytes())
    }
}

/// Scores analyzed under `cfg`: the configured list, or every score except
/// the college share.
pub fn analysis_scores(
    panels: &LaborPanels,
    cfg: &AnalysisConfig,
) -> Result<Vec<String>, EvaluateError> {
    let scores: Vec<String> = match &cfg.scores {
        Some(s) => s.clone(),
        None => panels
            .exposures
            .keys()
            .filter(|k| **k != cfg.college_score)
            .cloned()
            .collect(),
    };
    if scores.is_empty() {
        return Err(EvaluateError::NoScores);
    }
    for s in &scores {
        if !panels.exposures.contains_key(s) {
            return Err(EvaluateError::UnknownScore(s.clone()));
        }
    }
    Ok(scores)
}

/// Risk panel, skill components, and the risk regression frame.
pub struct Prepared {
    pub scores: Vec<String>,
    pub risk: RiskPanel,
    pub pcs: Option<SkillPcs>,
    pub frame: RiskFrame,
}

pub fn prepare(panels: &LaborPanels, cfg: &AnalysisConfig) -> Result<Prepared, EvaluateError> {
    let scores = analysis_scores(panels, cfg)?;
    let risk = risk::unemployment_risk(panels)?;
    let pcs = if cfg.pca_k > 0 && !panels.skills.is_empty() {
        Some(skill_pcs(
            panels,
            cfg.pca_k,
            PcaOptions {
                scale_columns: cfg.pca_scale_columns,
            },
        )?)
    } else {
        None
    };
    let college = panels
        .exposures
        .contains_key(&cfg.college_score)
        .then_some(cfg.college_score.as_str());
    let frame = risk_frame(panels, &risk, &scores, college, pcs.as_ref())?;
    Ok(Prepared {
        scores,
        risk,
        pcs,
        frame,
    })
}

fn non_fatal<T>(
    r: Result<T, EvaluateError>,
    what: &str,
    skipped: &mut Vec<String>,
) -> Result<Option<T>, EvaluateError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(
            e @ (EvaluateError::TooFewRows { .. }
            | EvaluateError::NoSeparations
            | EvaluateError::Regress(RegressError::TooFewRows { .. })),
        ) => {
            skipped.push(format!("{what}: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Runs every enabled analysis on `panels` and writes tables, figures and
/// `report.json` under `out`. Identical inputs, config and seed give
/// byte-identical files at any thread count.
pub fn analyze(
    panels: &LaborPanels,
    cfg: &AnalysisConfig,
    seed: u64,
    out: &Path,
) -> Result<AnalysisReport, EvaluateError> {
    let registry = EstimatorRegistry::with_builtins();
    let estimator = registry.create(&cfg.estimator, &cfg.lasso)?;
    let prepared = prepare(panels, cfg)?;
    let Prepared {
        scores,
        risk,
        pcs,
        frame: rf,
    } = prepared;
    let suite_spec = SuiteSpec::from_risk_frame(&rf);
    let reg_rows = complete_rows(&rf.frame, &suite_spec.all_columns())?;

    let mut o = Output {
        dir: out.to_path_buf(),
        files: Vec::new(),
    };
    let mut skipped = Vec::new();
    let mut details = AnalysisDetails::default();

    o.put(
        "tables/risk_panel.csv",
        &ingest::table_bytes(&risk.rows, &schema::RISK, true),
    )?;
    let d = &risk.diagnostics;
    let risk_summary = RiskSummary {
        rows: risk.rows.len(),
        log_exclusions: d.log_exclusions,
        cells: d.cells,
        skipped_no_recipients: d.skipped_no_recipients.len(),
        skipped_missing_inputs: d.skipped_missing_inputs.len(),
        rejected_singular: d.rejected_singular.len(),
        missing_covariates: rf.diagnostics.missing.clone(),
        regression_rows: reg_rows.len(),
    };

    let pca = pcs.as_ref().map(|p| {
        let m = &p.model;
        PcaSummary {
            k: m.k(),
            rank: m.rank,
            explained: m
                .explained_variance_ratio
                .iter()
                .take(m.k())
                .copied()
                .collect(),
            cumulative: m.cumulative_explained(m.k()),
        }
    });
    if let Some(p) = &pcs {
        o.put(
            "tables/pca_components.csv",
            &ingest::table_bytes(&p.model.component_rows(), &schema::PCA_COMPONENTS, true),
        )?;
        o.put(
            "tables/pca_variance.csv",
            &ingest::table_bytes(&p.model.variance_rows(), &schema::PCA_VARIANCE, true),
        )?;
    }

    let mut correlations = None;
    if cfg.stages.correlations && scores.len() >= 2 {
        let occs: BTreeSet<_> = panels.employment.keys().map(|k| k.2).collect();
        let m = score_correlations(&panels.exposures, &scores, Some(&occs))?;
        o.put("tables/score_correlations.csv", m.to_csv().as_bytes())?;
        o.put(
            "figures/score_correlations.svg",
            figures::heat_map(
                "Pearson correlation of exposure scores",
                &m.names,
                &m.names,
                &m.values,
            )
            .as_bytes(),
        )?;
        correlations = Some(CorrelationSummary {
            mean_r2: m.mean_r2,
            median_r2: m.median_r2,
            undefined: m.undefined.clone(),
        });
        details.correlations = Some(m);
    }

    let mut headline = Vec::new();
    let mut simple_r2 = BTreeMap::new();
    let mut per_score_r2 = BTreeMap::new();
    if cfg.stages.suite {
        let suite = run_model_suite(
            &rf.frame,
            &suite_spec,
            estimator.as_ref(),
            cfg.models.as_ref(),
            rng::derive_seed(seed, &[1]),
        )?;
        for (stem, t) in suite.tables() {
            o.table(&stem, &t)?;
        }
        headline = suite
            .headline()
            .into_iter()
            .map(HeadlineModel::from_fit)
            .collect();
        simple_r2 = suite
            .simple
            .iter()
            .map(|f| (f.name.clone(), f.fit.r2))
            .collect();
        per_score_r2 = suite
            .per_score
            .iter()
            .map(|f| (f.name.clone(), f.fit.r2))
            .collect();
        let mut bars: Vec<(String, f64)> = suite
            .simple
            .iter()
            .map(|f| (f.name.clone(), f.fit.r2))
            .collect();
        bars.extend(headline.iter().map(|h| (h.name.clone(), h.r2)));
        o.put(
            "figures/risk_r2.svg",
            figures::bar_chart("Variance in unemployment risk explained", "R²", &bars).as_bytes(),
        )?;
        details.suite = Some(suite);
    }

    let mut cv = None;
    if cfg.stages.cv {
        let specs = [suite_spec.model2(), suite_spec.model3()];
        let opts = CvOptions {
            trials: cfg.cv_trials,
            folds: cfg.cv_folds,
            seed: rng::derive_seed(seed, &[2]),
            scope: cfg.standardize,
        };
        let res = cross_validate(
            &rf.frame,
            &specs,
            &reg_rows,
            estimator.as_ref(),
            &opts,
            &[(0, 1)],
        );
        if let Some(rep) = non_fatal(res, "cross-validation", &mut skipped)? {
            o.put("tables/cv_r2.csv", rep.to_csv().as_bytes())?;
            let groups: Vec<(String, Vec<f64>)> = rep
                .models
                .iter()
                .map(|m| (m.name.clone(), m.r2.clone()))
                .collect();
            o.put(
                "figures/cv_r2.svg",
                figures::strip_plot(
                    "Out-of-sample R² over cross-validation folds",
                    "R²",
                    &groups,
                )
                .as_bytes(),
            )?;
            cv = Some(CvSummary {
                trials: rep.trials,
                folds: rep.folds,
                rows: rep.rows,
                models: rep
                    .models
                    .iter()
                    .map(|m| CvModelSummary {
                        name: m.name.clone(),
                        mean: m.mean,
                        sd: m.sd,
                    })
                    .collect(),
                comparisons: rep.comparisons.clone(),
                unseen_levels: rep.unseen_levels.clone(),
            });
            details.cv = Some(rep);
        }
    }

    let mut strata = Vec::new();
    if cfg.stages.strata {
        let opts = StrataOptions {
            min_rows: cfg.min_stratum_rows,
            report_p: cfg.stratum_report_p,
        };
        let mut occ_tables = Vec::new();
        let mut state_tables = Vec::new();
        for score in &scores {
            for axis in ["year", "state", "occ"] {
                let t = stratified_analysis(&rf.frame, axis, score, LOG10_RISK, &opts)?;
                o.put(
                    &format!("tables/strata_{axis}_{score}.csv"),
                    t.to_csv().as_bytes(),
                )?;
                strata.push(StrataSummary {
                    axis: axis.into(),
                    score: score.clone(),
                    fitted: t.fits.len(),
                    skipped: t.skipped.len(),
                    reported: t.fits.iter().filter(|f| f.reported).count(),
                    extreme: t.extreme.clone(),
                });
                match axis {
                    "year" => {
                        let pts: Vec<(String, f64, f64, f64)> = t
                            .fits
                            .iter()
                            .map(|f| (f.level.clone(), f.coef, f.ci_low, f.ci_high))
                            .collect();
                        o.put(
                            &format!("figures/strata_year_{score}.svg"),
                            figures::coefficient_path(
                                &format!("{score}: coefficient by year (95% CI)"),
                                "standardized coefficient",
                                &pts,
                            )
                            .as_bytes(),
                        )?;
                    }
                    "state" => state_tables.push(t.clone()),
                    _ => occ_tables.push(t.clone()),
                }
                details.strata.push(t);
            }
        }
        let grid = |tables: &[StratifiedTable],
                    value: &dyn Fn(&super::StratumFit) -> Option<f64>| {
            let levels: Vec<String> = tables
                .iter()
                .flat_map(|t| t.fits.iter().map(|f| f.level.clone()))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let values: Vec<Vec<Option<f64>>> = levels
                .iter()
                .map(|l| tables.iter().map(|t| t.get(l).and_then(value)).collect())
                .collect();
            (levels, values)
        };
        let (levels, values) = grid(&occ_tables, &|f| f.reported.then_some(f.coef));
        o.put(
            "figures/strata_occ.svg",
            figures::heat_map(
                &format!(
                    "Coefficient by major occupation (p < {})",
                    cfg.stratum_report_p
                ),
                &levels,
                &scores,
                &values,
            )
            .as_bytes(),
        )?;
        let (levels, values) = grid(&state_tables, &|f| Some(f.r2));
        o.put(
            "figures/strata_state_r2.svg",
            figures::heat_map("R² by state", &levels, &scores, &values).as_bytes(),
        )?;
    }

    let mut outcomes = Vec::new();
    if cfg.stages.state_outcomes {
        let exposure = risk::state_exposure(panels, &scores)?;
        o.put(
            "tables/state_exposure.csv",
            &ingest::table_bytes(&exposure.rows(), &schema::STATE_EXPOSURE, true),
        )?;
        let sf = state_frame(panels, &scores, &exposure)?;
        let mut kinds = vec![Outcome::Urate];
        if panels.separations.is_some() {
            kinds.push(Outcome::Separations);
        } else {
            skipped.push("state_separations: no separations panel".into());
        }
        for k in kinds {
            if let Some(res) =
                non_fatal(outcome_regressions(&sf, k, &scores), k.stem(), &mut skipped)?
            {
                o.table(k.stem(), &res.table())?;
                outcomes.push(OutcomeSummary::from(&res));
                details.outcomes.push(res);
            }
        }
    }

    let mut skill_change = None;
    if cfg.stages.skill_change && !panels.skills.is_empty() {
        let set = skills::skill_change_dataset(
            &panels.skills,
            cfg.skill_baseline_year,
            cfg.skill_max_year,
        );
        o.put(
            "tables/skill_change_rows.csv",
            &ingest::table_bytes(&set.rows, &schema::SKILL_CHANGE, true),
        )?;
        skill_change = Some(SkillChangeSummary {
            baseline_year: cfg.skill_baseline_year,
            max_year: cfg.skill_max_year,
            rows: set.rows.len(),
            never_updated: set.never_updated,
            updated_after_window: set.updated_after_window,
            missing_baseline: set.missing_baseline,
        });
        let sf = skill_change_frame(&set, panels, &scores)?;
        let res = outcome_regressions(&sf, Outcome::SkillChange, &scores);
        if let Some(res) = non_fatal(res, "skill_change", &mut skipped)? {
            o.table(Outcome::SkillChange.stem(), &res.table())?;
            outcomes.push(OutcomeSummary::from(&res));
            details.outcomes.push(res);
        }
        details.skill_change = Some(set);
    }

    o.files.push("report.json".into());
    o.files.sort();
    let report = AnalysisReport {
        seed,
        config: cfg.clone(),
        scores,
        risk: risk_summary,
        pca,
        correlations,
        headline,
        simple_r2,
        per_score_r2,
        cv,
        strata,
        outcomes,
        skill_change,
        skipped,
        files: o.files.clone(),
        details,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    ingest::write_bytes(&out.join("report.json"), json.as_bytes())?;
    Ok(report)
}

impl From<&OutcomeResult> for OutcomeSummary {
    fn from(r: &OutcomeResult) -> Self {
        OutcomeSummary {
            outcome: r.outcome,
            rows: r.rows,
            simple_r2: r
                .simple
                .iter()
                .map(|f| (f.name.clone(), f.fit.r2))
                .collect(),
            combined_r2: r.combined.fit.r2,
            dropped_collinear: r.combined.diagnostics.dropped_collinear.clone(),
        }
    }
}
