use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::frames::{complete_rows, RiskFrame, LOG10_RISK};
use super::EvaluateError;
use crate::regress::{
    ols_fit, DesignBuilder, DesignDiagnostics, DesignSpec, Estimator, Frame, ModelFit,
    RegressionTable,
};
use crate::rng;

pub const PC_PREFIX: &str = "skill_pc";

/// Covariate groups behind the headline models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteSpec {
    pub response: String,
    pub scores: Vec<String>,
    pub college: Option<String>,
    pub pcs: Vec<String>,
    pub fixed_effects: Vec<String>,
}

impl SuiteSpec {
    pub fn from_risk_frame(rf: &RiskFrame) -> Self {
        SuiteSpec {
            response: LOG10_RISK.into(),
            scores: rf.scores.clone(),
            college: rf.college.clone(),
            pcs: rf.pcs.clone(),
            fixed_effects: vec!["year".into(), "month".into(), "state".into()],
        }
    }

    fn baseline_covariates(&self) -> Vec<String> {
        self.college.iter().chain(&self.pcs).cloned().collect()
    }

    fn spec(&self, name: &str, covariates: &[String], fe: bool) -> DesignSpec {
        DesignSpec {
            name: name.into(),
            response: self.response.clone(),
            covariates: covariates.to_vec(),
            fixed_effects: if fe {
                self.fixed_effects.clone()
            } else {
                Vec::new()
            },
            collinearity: Default::default(),
        }
        .dropping_collinear()
    }

    /// Exposure scores only.
    pub fn model1(&self) -> DesignSpec {
        self.spec("Model 1", &self.scores, false)
    }

    /// Fixed effects, college share and skill components.
    pub fn model2(&self) -> DesignSpec {
        self.spec("Model 2", &self.baseline_covariates(), true)
    }

    pub fn model3(&self) -> DesignSpec {
        let mut c = self.baseline_covariates();
        c.extend(self.scores.iter().cloned());
        self.spec("Model 3", &c, true)
    }

    pub fn simple(&self, score: &str) -> DesignSpec {
        self.spec(score, &[score.to_string()], false)
    }

    /// Baseline plus one score.
    pub fn with_score(&self, score: &str) -> DesignSpec {
        let mut c = self.baseline_covariates();
        c.push(score.to_string());
        self.spec(score, &c, true)
    }

    pub fn all_columns(&self) -> Vec<&str> {
        let mut v = vec![self.response.as_str()];
        v.extend(self.scores.iter().map(String::as_str));
        v.extend(self.college.iter().map(String::as_str));
        v.extend(self.pcs.iter().map(String::as_str));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedFit {
    pub name: String,
    pub spec: DesignSpec,
    pub fit: ModelFit,
    pub diagnostics: DesignDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSuiteResult {
    pub rows: usize,
    pub model1: Option<NamedFit>,
    pub model2: Option<NamedFit>,
    pub model3: Option<NamedFit>,
    /// OLS of the response on each score alone.
    pub simple: Vec<NamedFit>,
    /// The configured estimator on the baseline plus each score.
    pub per_score: Vec<NamedFit>,
}

enum Job {
    Headline(u8, DesignSpec),
    Simple(DesignSpec),
    PerScore(DesignSpec),
}

/// Fits one design on `rows` of `frame`.
pub(crate) fn fit_spec(
    frame: &Frame,
    spec: &DesignSpec,
    rows: &[usize],
    estimator: Option<&dyn Estimator>,
    seed: u64,
) -> Result<NamedFit, EvaluateError> {
    let builder = DesignBuilder::fit(frame, spec, rows)?;
    let design = builder.apply(frame, rows)?;
    let fit = match estimator {
        Some(e) => e.fit(&design, seed)?,
        None => ols_fit(&design)?,
    };
    Ok(NamedFit {
        name: spec.name.clone(),
        spec: spec.clone(),
        fit,
        diagnostics: builder.diagnostics,
    })
}

/// Fits the headline models and, unless `models` restricts the run, the
/// per-score simple and baseline-plus-score models. Every model uses the
/// rows complete for all suite columns, so fits are comparable.
pub fn run_model_suite(
    frame: &Frame,
    spec: &SuiteSpec,
    estimator: &dyn Estimator,
    models: Option<&BTreeSet<u8>>,
    seed: u64,
) -> Result<ModelSuiteResult, EvaluateError> {
    let rows = complete_rows(frame, &spec.all_columns())?;
    if rows.len() < 3 {
        return Err(EvaluateError::TooFewRows {
            what: "model suite".into(),
            n: rows.len(),
            need: 3,
        });
    }
    let wants = |m: u8| models.is_none_or(|s| s.contains(&m));
    let mut jobs = Vec::new();
    if wants(1) {
        jobs.push(Job::Headline(1, spec.model1()));
    }
    if wants(2) {
        jobs.push(Job::Headline(2, spec.model2()));
    }
    if wants(3) {
        jobs.push(Job::Headline(3, spec.model3()));
    }
    if models.is_none() {
        for s in &spec.scores {
            jobs.push(Job::Simple(spec.simple(s)));
        }
        for s in &spec.scores {
            jobs.push(Job::PerScore(spec.with_score(s)));
        }
    }
    let fits: Vec<Result<NamedFit, EvaluateError>> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, job)| {
            let seed = rng::derive_seed(seed, &[10, i as u64]);
            match job {
                Job::Headline(_, s) | Job::PerScore(s) => {
                    fit_spec(frame, s, &rows, Some(estimator), seed)
                }
                Job::Simple(s) => fit_spec(frame, s, &rows, None, seed),
            }
        })
        .collect();
    let mut out = ModelSuiteResult {
        rows: rows.len(),
        model1: None,
        model2: None,
        model3: None,
        simple: Vec::new(),
        per_score: Vec::new(),
    };
    for (job, fit) in jobs.into_iter().zip(fits) {
        let fit = fit?;
        match job {
            Job::Headline(1, _) => out.model1 = Some(fit),
            Job::Headline(2, _) => out.model2 = Some(fit),
            Job::Headline(_, _) => out.model3 = Some(fit),
            Job::Simple(_) => out.simple.push(fit),
            Job::PerScore(_) => out.per_score.push(fit),
        }
    }
    Ok(out)
}

fn table(title: &str, columns: impl IntoIterator<Item = (String, ModelFit)>) -> RegressionTable {
    let mut t = RegressionTable::new(title);
    t.collapse.push((PC_PREFIX.into(), "Skill PCA".into()));
    for (label, fit) in columns {
        t.push(&label, fit);
    }
    t
}

impl ModelSuiteResult {
    pub fn headline(&self) -> Vec<&NamedFit> {
        [&self.model1, &self.model2, &self.model3]
            .into_iter()
            .flatten()
            .collect()
    }

    /// Rendered tables keyed by file stem.
    pub fn tables(&self) -> Vec<(String, RegressionTable)> {
        let mut out = Vec::new();
        let headline = self.headline();
        if !headline.is_empty() {
            let mut t = table(
                "Unemployment risk (log10): headline models",
                headline.iter().map(|f| (f.name.clone(), f.fit.clone())),
            );
            t.notes
                .push("Standardized coefficients; response standardized.".into());
            out.push(("risk_models".into(), t));
        }
        if !self.simple.is_empty() {
            let t = table(
                "Unemployment risk (log10) on each exposure score: linear regression",
                self.simple
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (format!("({})", i + 1), f.fit.clone())),
            );
            out.push(("risk_simple".into(), t));
        }
        if !self.per_score.is_empty() {
            let mut cols: Vec<(String, ModelFit)> = self
                .per_score
                .iter()
                .enumerate()
                .map(|(i, f)| (format!("({})", i + 1), f.fit.clone()))
                .collect();
            if let Some(m3) = &self.model3 {
                cols.push((format!("({})", cols.len() + 1), m3.fit.clone()));
            }
            let estimator = self.per_score[0].fit.estimator.clone();
            let t = table(
                &format!("Unemployment risk (log10) with fixed effects and controls: {estimator}"),
                cols,
            );
            out.push(("risk_per_score".into(), t));
        }
        out
    }
}
