use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frames::{complete_rows, LOG10_SEPARATIONS, LOG10_URATE, LOG10_WAGE_BILL, SKILL_CHANGE};
use super::suite::{fit_spec, NamedFit};
use super::EvaluateError;
use crate::regress::{DesignSpec, Frame, RegressionTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// log10 state unemployment rate; state frame.
    Urate,
    /// log10 state separation rate; state frame.
    Separations,
    /// Skill change since the baseline year; skill-change frame.
    SkillChange,
}

impl Outcome {
    pub fn response(self) -> &'static str {
        match self {
            Outcome::Urate => LOG10_URATE,
            Outcome::Separations => LOG10_SEPARATIONS,
            Outcome::SkillChange => SKILL_CHANGE,
        }
    }

    pub fn stem(self) -> &'static str {
        match self {
            Outcome::Urate => "state_urate",
            Outcome::Separations => "state_separations",
            Outcome::SkillChange => "skill_change",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Outcome::Urate => "State unemployment rate (log10) on state exposure",
            Outcome::Separations => "State separation rate (log10) on state exposure",
            Outcome::SkillChange => "Within-occupation skill change on exposure",
        }
    }

    fn controls(self) -> &'static [&'static str] {
        match self {
            Outcome::Urate | Outcome::Separations => &[LOG10_WAGE_BILL],
            Outcome::SkillChange => &[],
        }
    }

    fn fixed_effects(self) -> &'static [&'static str] {
        match self {
            Outcome::Urate | Outcome::Separations => &["year", "month"],
            Outcome::SkillChange => &["year", "major"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeResult {
    pub outcome: Outcome,
    pub rows: usize,
    /// One score plus controls and fixed effects, per score.
    pub simple: Vec<NamedFit>,
    /// Every score together; collinear columns are dropped and listed in
    /// its diagnostics.
    pub combined: NamedFit,
}

impl OutcomeResult {
    pub fn table(&self) -> RegressionTable {
        let mut t = RegressionTable::new(self.outcome.title());
        for (i, f) in self.simple.iter().enumerate() {
            t.push(&format!("({})", i + 1), f.fit.clone());
        }
        t.push(
            &format!("({})", self.simple.len() + 1),
            self.combined.fit.clone(),
        );
        let dropped = &self.combined.diagnostics.dropped_collinear;
        if !dropped.is_empty() {
            t.notes.push(format!(
                "Dropped as collinear in the combined model: {}",
                dropped.join(", ")
            ));
        }
        t
    }
}

/// OLS regressions of an outcome on each score separately and on all
/// scores together, over the rows complete for every score.
pub fn outcome_regressions(
    frame: &Frame,
    outcome: Outcome,
    scores: &[String],
) -> Result<OutcomeResult, EvaluateError> {
    if scores.is_empty() {
        return Err(EvaluateError::NoScores);
    }
    let response = outcome.response();
    let mut needed: Vec<&str> = vec![response];
    needed.extend(outcome.controls());
    needed.extend(scores.iter().map(String::as_str));
    let rows = complete_rows(frame, &needed)?;
    if rows.len() < 3 {
        return Err(EvaluateError::TooFewRows {
            what: outcome.stem().into(),
            n: rows.len(),
            need: 3,
        });
    }
    let spec = |name: &str, covs: &[&str]| {
        let mut c: Vec<&str> = covs.to_vec();
        c.extend(outcome.controls());
        DesignSpec::new(name, response, &c, outcome.fixed_effects()).dropping_collinear()
    };
    let mut specs: Vec<DesignSpec> = scores.iter().map(|s| spec(s, &[s.as_str()])).collect();
    let all: Vec<&str> = scores.iter().map(String::as_str).collect();
    specs.push(spec("combined", &all));
    let mut fits = specs
        .par_iter()
        .map(|s| fit_spec(frame, s, &rows, None, 0))
        .collect::<Result<Vec<_>, _>>()?;
    let combined = fits.pop().expect("combined spec present");
    Ok(OutcomeResult {
        outcome,
        rows: rows.len(),
        simple: fits,
        combined,
    })
}
