use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvaluateError;
use crate::regress::{oos_r_squared, DesignBuilder, DesignSpec, Estimator, Frame};
use crate::rng;
use crate::stats;

/// Rows whose statistics standardize the covariates in each fold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardizeScope {
    /// Training rows of the fold.
    #[default]
    Train,
    /// All rows. Fixed-effect levels still come from training rows.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvOptions {
    pub trials: usize,
    pub folds: usize,
    pub seed: u64,
    pub scope: StandardizeScope,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            trials: 10,
            folds: 10,
            seed: 0,
            scope: StandardizeScope::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvModelResult {
    pub name: String,
    /// Out-of-sample R², trial-major order.
    pub r2: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvComparison {
    pub base: String,
    pub full: String,
    /// Welch statistic oriented as mean(full) − mean(base).
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// mean(full) / mean(base) − 1.
    pub factor_improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub trials: usize,
    pub folds: usize,
    pub rows: usize,
    pub scope: StandardizeScope,
    pub models: Vec<CvModelResult>,
    pub comparisons: Vec<CvComparison>,
    /// Test rows per fixed-effect block whose level was absent from the
    /// training rows; they are scored at the reference level.
    pub unseen_levels: BTreeMap<String, usize>,
}

impl CvReport {
    pub fn model(&self, name: &str) -> Option<&CvModelResult> {
        self.models.iter().find(|m| m.name == name)
    }

    /// One row per model and fold.
    pub fn to_csv(&self) -> String {
        let mut csv = String::from("model,trial,fold,oos_r2\n");
        for m in &self.models {
            for (i, v) in m.r2.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    m.name,
                    i / self.folds,
                    i % self.folds,
                    crate::ingest::format_float(*v)
                ));
            }
        }
        csv
    }
}

/// Test-fold membership of `rows` for one trial.
pub fn trial_folds(rows: &[usize], folds: usize, seed: u64, trial: usize) -> Vec<usize> {
    rng::fold_assignment(
        rows.len(),
        folds,
        rng::derive_seed(seed, &[20, trial as u64]),
    )
}

/// Repeated k-fold cross-validation of several designs on the same row
/// partitions. `pairs` lists (base, full) model indices to compare.
pub fn cross_validate(
    frame: &Frame,
    specs: &[DesignSpec],
    rows: &[usize],
    estimator: &dyn Estimator,
    opts: &CvOptions,
    pairs: &[(usize, usize)],
) -> Result<CvReport, EvaluateError> {
    if opts.folds < 2 || rows.len() < opts.folds {
        return Err(EvaluateError::TooFewRows {
            what: "cross-validation".into(),
            n: rows.len(),
            need: opts.folds.max(2),
        });
    }
    let partitions: Vec<Vec<usize>> = (0..opts.trials)
        .map(|t| trial_folds(rows, opts.folds, opts.seed, t))
        .collect();
    let units: Vec<(usize, usize, usize)> = (0..opts.trials)
        .flat_map(|t| (0..opts.folds).flat_map(move |f| (0..specs.len()).map(move |m| (t, f, m))))
        .collect();

    type Unit = (f64, BTreeMap<String, usize>);
    let results: Vec<Result<Unit, EvaluateError>> = units
        .par_iter()
        .map(|&(t, f, m)| {
            let assign = &partitions[t];
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (i, &r) in rows.iter().enumerate() {
                if assign[i] == f {
                    test.push(r);
                } else {
                    train.push(r);
                }
            }
            let builder = match opts.scope {
                StandardizeScope::Train => DesignBuilder::fit(frame, &specs[m], &train)?,
                StandardizeScope::Global => {
                    DesignBuilder::fit_with_stats(frame, &specs[m], &train, rows)?
                }
            };
            let train_design = builder.apply(frame, &train)?;
            // Paired: every model in a fold shares the estimator seed.
            let seed = rng::derive_seed(opts.seed, &[21, t as u64, f as u64]);
            let fit = estimator.fit(&train_design, seed)?;
            let test_design = builder.apply(frame, &test)?;
            let pred = fit.predict(&test_design)?;
            Ok((
                oos_r_squared(&test_design.y, &pred),
                test_design.unseen_levels,
            ))
        })
        .collect();

    let mut r2 = vec![Vec::with_capacity(opts.trials * opts.folds); specs.len()];
    let mut unseen_levels = BTreeMap::new();
    for (&(_, _, m), res) in units.iter().zip(results) {
        let (v, unseen) = res?;
        r2[m].push(v);
        for (k, c) in unseen {
            *unseen_levels.entry(k).or_insert(0) += c;
        }
    }
    let models: Vec<CvModelResult> = specs
        .iter()
        .zip(r2)
        .map(|(s, v)| CvModelResult {
            name: s.name.clone(),
            mean: stats::mean(&v),
            sd: stats::sample_variance(&v).sqrt(),
            r2: v,
        })
        .collect();
    let mut comparisons = Vec::new();
    for &(b, f) in pairs {
        let test = stats::welch_ttest(&models[b].r2, &models[f].r2)?;
        comparisons.push(CvComparison {
            base: models[b].name.clone(),
            full: models[f].name.clone(),
            t: test.t,
            df: test.df,
            p: test.p,
            factor_improvement: models[f].mean / models[b].mean - 1.0,
        });
    }
    Ok(CvReport {
        trials: opts.trials,
        folds: opts.folds,
        rows: rows.len(),
        scope: opts.scope,
        models,
        comparisons,
        unseen_levels,
    })
}
