use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::frames::complete_rows;
use super::suite::fit_spec;
use super::EvaluateError;
use crate::regress::{DesignSpec, Frame, RegressError};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrataOptions {
    pub min_rows: usize,
    /// Levels with p below this are flagged as reported.
    pub report_p: f64,
}

impl Default for StrataOptions {
    fn default() -> Self {
        StrataOptions {
            min_rows: 30,
            report_p: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumFit {
    pub level: String,
    pub n: usize,
    pub coef: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub se: f64,
    pub p: f64,
    pub r2: f64,
    pub reported: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratifiedTable {
    pub axis: String,
    pub score: String,
    pub outcome: String,
    pub fits: Vec<StratumFit>,
    /// Levels not fitted, with the reason.
    pub skipped: Vec<(String, String)>,
    /// Level whose coefficient lies farthest from the median coefficient.
    pub extreme: Option<String>,
}

impl StratifiedTable {
    pub fn get(&self, level: &str) -> Option<&StratumFit> {
        self.fits.iter().find(|f| f.level == level)
    }

    /// Share of level pairs whose 95% intervals overlap.
    pub fn ci_overlap_rate(&self) -> Option<f64> {
        let mut pairs = 0usize;
        let mut overlap = 0usize;
        for (i, a) in self.fits.iter().enumerate() {
            for b in &self.fits[i + 1..] {
                pairs += 1;
                if a.ci_low <= b.ci_high && b.ci_low <= a.ci_high {
                    overlap += 1;
                }
            }
        }
        (pairs > 0).then(|| overlap as f64 / pairs as f64)
    }

    pub fn to_csv(&self) -> String {
        use crate::ingest::format_float as f;
        let mut out = String::from("level,n,coef,ci_low,ci_high,se,p,r2,reported\n");
        for s in &self.fits {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.level,
                s.n,
                f(s.coef),
                f(s.ci_low),
                f(s.ci_high),
                f(s.se),
                f(s.p),
                f(s.r2),
                s.reported
            ));
        }
        for (level, reason) in &self.skipped {
            out.push_str(&format!("{level},,,,,,,,skipped: {reason}\n"));
        }
        out
    }
}

/// Separate OLS fits of `outcome` on `score` within each level of the
/// categorical column `axis`, each standardized within its level.
pub fn stratified_analysis(
    frame: &Frame,
    axis: &str,
    score: &str,
    outcome: &str,
    opts: &StrataOptions,
) -> Result<StratifiedTable, EvaluateError> {
    let levels_col = frame
        .categorical
        .get(axis)
        .ok_or_else(|| RegressError::MissingColumn(axis.to_string()))?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for r in complete_rows(frame, &[outcome, score])? {
        groups.entry(levels_col[r].as_str()).or_default().push(r);
    }
    let spec = DesignSpec::new(score, outcome, &[score], &[]);
    let groups: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    let results: Vec<Result<StratumFit, String>> = groups
        .par_iter()
        .map(|(level, rows)| {
            if rows.len() < opts.min_rows {
                return Err(format!("{} rows, need {}", rows.len(), opts.min_rows));
            }
            let nf = fit_spec(frame, &spec, rows, None, 0).map_err(|e| e.to_string())?;
            let f = &nf.fit;
            let coef = f
                .coef(score)
                .ok_or_else(|| format!("{score} is constant within the level"))?;
            let (lo, hi) = f.conf_int(score, 0.95).unwrap_or((f64::NAN, f64::NAN));
            let p = f.p_value(score).unwrap_or(f64::NAN);
            Ok(StratumFit {
                level: level.to_string(),
                n: rows.len(),
                coef,
                ci_low: lo,
                ci_high: hi,
                se: f.se(score).unwrap_or(f64::NAN),
                p,
                r2: f.r2,
                reported: p < opts.report_p,
            })
        })
        .collect();
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for ((level, _), r) in groups.iter().zip(results) {
        match r {
            Ok(f) => fits.push(f),
            Err(reason) => skipped.push((level.to_string(), reason)),
        }
    }
    let extreme = if fits.len() >= 2 {
        let coefs: Vec<f64> = fits.iter().map(|f| f.coef).collect();
        let med = stats::median(&coefs);
        fits.iter()
            .max_by(|a, b| (a.coef - med).abs().total_cmp(&(b.coef - med).abs()))
            .map(|f| f.level.clone())
    } else {
        None
    };
    Ok(StratifiedTable {
        axis: axis.to_string(),
        score: score.to_string(),
        outcome: outcome.to_string(),
        fits,
        skipped,
        extreme,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn frame(slopes: &[(&str, usize, f64)], seed: u64) -> Frame {
        let mut r = rng::stream(seed, &[]);
        let (mut x, mut y, mut g) = (Vec::new(), Vec::new(), Vec::new());
        for &(level, n, b) in slopes {
            for _ in 0..n {
                let xi: f64 = r.sample(StandardNormal);
                x.push(xi);
                y.push(b * xi + r.sample::<f64, _>(StandardNormal));
                g.push(level.to_string());
            }
        }
        let mut f = Frame::new((0..x.len()).map(|i| i.to_string()).collect());
        f.push_numeric("x", x).unwrap();
        f.push_numeric("y", y).unwrap();
        f.push_categorical("state", g).unwrap();
        f
    }

    #[test]
    fn small_levels_skipped_and_extreme_flagged() {
        let f = frame(
            &[
                ("AK", 200, 0.3),
                ("AL", 200, 0.3),
                ("AZ", 200, 2.0),
                ("CA", 10, 0.3),
            ],
            1,
        );
        let t = stratified_analysis(&f, "state", "x", "y", &Default::default()).unwrap();
        assert_eq!(t.fits.len(), 3);
        assert_eq!(t.skipped.len(), 1);
        assert_eq!(t.skipped[0].0, "CA");
        assert_eq!(t.extreme.as_deref(), Some("AZ"));
        let ak = t.get("AK").unwrap();
        assert!(ak.ci_low < ak.coef && ak.coef < ak.ci_high);
        assert!(t.get("AZ").unwrap().reported);
    }

    #[test]
    fn homogeneous_effect_overlaps() {
        let levels: Vec<(String, usize, f64)> =
            (0..12).map(|i| (format!("S{i:02}"), 150, 0.5)).collect();
        let refs: Vec<(&str, usize, f64)> = levels
            .iter()
            .map(|(s, n, b)| (s.as_str(), *n, *b))
            .collect();
        let f = frame(&refs, 2);
        let t = stratified_analysis(&f, "state", "x", "y", &Default::default()).unwrap();
        assert!(t.ci_overlap_rate().unwrap() >= 0.9);
    }
}
