use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::EvaluateError;
use crate::model::{ExposureScore, OccCode};
use crate::stats;

/// Fewest shared occupations for a defined correlation.
pub const MIN_COMMON: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Pearson correlation over occupations covered by both scores; `None`
    /// when undefined.
    pub values: Vec<Vec<Option<f64>>>,
    pub common: Vec<Vec<usize>>,
    /// Off-diagonal pairs without a defined correlation.
    pub undefined: Vec<(String, String)>,
    /// Mean and median of r² over defined off-diagonal pairs.
    pub mean_r2: Option<f64>,
    pub median_r2: Option<f64>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        self.values[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("score");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, n) in self.names.iter().enumerate() {
            out.push_str(n);
            for v in &self.values[i] {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&crate::ingest::format_float(*v));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise Pearson correlations across occupations, optionally restricted
/// to `occs`.
pub fn score_correlations(
    exposures: &BTreeMap<String, ExposureScore>,
    names: &[String],
    occs: Option<&BTreeSet<OccCode>>,
) -> Result<CorrelationMatrix, EvaluateError> {
    if names.len() < 2 {
        return Err(EvaluateError::NoScores);
    }
    let scores: Vec<&ExposureScore> = names
        .iter()
        .map(|n| {
            exposures
                .get(n)
                .ok_or_else(|| EvaluateError::UnknownScore(n.clone()))
        })
        .collect::<Result<_, _>>()?;
    let k = names.len();
    let mut values = vec![vec![None; k]; k];
    let mut common = vec![vec![0; k]; k];
    let mut undefined = Vec::new();
    let mut r2 = Vec::new();
    for i in 0..k {
        for j in i..k {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (o, va) in &scores[i].values {
                if occs.is_some_and(|s| !s.contains(o)) {
                    continue;
                }
                if let Some(vb) = scores[j].values.get(o) {
                    a.push(*va);
                    b.push(*vb);
                }
            }
            let r = if a.len() < MIN_COMMON {
                None
            } else if i == j {
                stats::pearson(&a, &b).map(|_| 1.0)
            } else {
                stats::pearson(&a, &b)
            };
            common[i][j] = a.len();
            common[j][i] = a.len();
            values[i][j] = r;
            values[j][i] = r;
            if i != j {
                match r {
                    Some(r) => r2.push(r * r),
                    None => undefined.push((names[i].clone(), names[j].clone())),
                }
            }
        }
    }
    let (mean_r2, median_r2) = if r2.is_empty() {
        (None, None)
    } else {
        (Some(stats::mean(&r2)), Some(stats::median(&r2)))
    };
    Ok(CorrelationMatrix {
        names: names.to_vec(),
        values,
        common,
        undefined,
        mean_r2,
        median_r2,
    })
}
