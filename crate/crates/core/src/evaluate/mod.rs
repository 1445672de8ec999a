//! The analysis program: model suites, score correlations, repeated
//! cross-validation, stratified fits, and state-level and skill-change
//! outcome regressions.

mod analysis;
mod correlations;
mod cv;
pub mod figures;
mod frames;
mod outcomes;
mod strata;
mod suite;

pub use analysis::{
    analysis_scores, analyze, prepare, AnalysisDetails, AnalysisReport, HeadlineModel, Prepared,
};
pub use correlations::{score_correlations, CorrelationMatrix};
pub use cv::{cross_validate, CvComparison, CvModelResult, CvOptions, CvReport, StandardizeScope};
pub use frames::{
    complete_rows, month_label, risk_frame, skill_change_frame, skill_pcs, state_frame,
    FrameDiagnostics, RiskFrame, SkillPcs, LOG10_RISK, LOG10_SEPARATIONS, LOG10_URATE,
    LOG10_WAGE_BILL, SKILL_CHANGE,
};
pub use outcomes::{outcome_regressions, Outcome, OutcomeResult};
pub use strata::{stratified_analysis, StrataOptions, StratifiedTable, StratumFit};
pub use suite::{run_model_suite, ModelSuiteResult, NamedFit, SuiteSpec};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::regress::{EstimatorParams, RegressError};
use crate::risk::RiskError;
use crate::skills::SkillError;
use crate::stats::StatsError;

#[derive(Debug, thiserror::Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] crate::ingest::IngestError),
    #[error("unknown exposure score {0}")]
    UnknownScore(String),
    #[error("{what}: {n} usable rows, need at least {need}")]
    TooFewRows { what: String, n: usize, need: usize },
    #[error("no exposure scores to analyze")]
    NoScores,
    #[error("separations panel is required for this analysis")]
    NoSeparations,
}

/// Which analyses `analyze` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub correlations: bool,
    pub suite: bool,
    pub cv: bool,
    pub strata: bool,
    pub state_outcomes: bool,
    pub skill_change: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages {
            correlations: true,
            suite: true,
            cv: true,
            strata: true,
            state_outcomes: true,
            skill_change: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Exposure scores to analyze; all scores except the college share when
    /// absent.
    pub scores: Option<Vec<String>>,
    /// Score holding each occupation's share of college-educated workers.
    pub college_score: String,
    pub pca_k: usize,
    pub pca_scale_columns: bool,
    /// Registered estimator used for the headline and per-score models.
    pub estimator: String,
    pub lasso: EstimatorParams,
    pub cv_trials: usize,
    pub cv_folds: usize,
    pub standardize: StandardizeScope,
    pub skill_baseline_year: i32,
    pub skill_max_year: i32,
    pub min_stratum_rows: usize,
    /// Significance filter for the occupation heat map.
    pub stratum_report_p: f64,
    /// Restricts the headline models (1, 2, 3) and skips per-score tables.
    pub models: Option<BTreeSet<u8>>,
    pub stages: Stages,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            scores: None,
            college_score: crate::synth::COLLEGE_SCORE.to_string(),
            pca_k: 10,
            pca_scale_columns: false,
            estimator: "lasso-cv".into(),
            lasso: EstimatorParams::default(),
            cv_trials: 10,
            cv_folds: 10,
            standardize: StandardizeScope::Train,
            skill_baseline_year: 2010,
            skill_max_year: 2017,
            min_stratum_rows: 30,
            stratum_report_p: 0.01,
            models: None,
            stages: Stages::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn wants_model(&self, m: u8) -> bool {
        self.models.as_ref().is_none_or(|s| s.contains(&m))
    }
}
