//! Skill profiles: Likert normalization, principal components, and the
//! within-occupation skill-change distance (one minus the weighted Jaccard
//! similarity between an updated profile and its baseline).

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ingest::{format_float, Cells, IngestError, Record};
use crate::model::OccCode;

/// Entries closer than this are considered unchanged between survey years.
pub const UPDATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SkillError {
    #[error("raw value {raw} outside Likert scale [{min}, {max}]")]
    OutOfScale { raw: f64, min: f64, max: f64 },
    #[error("Likert scale [{min}, {max}] is empty")]
    EmptyScale { min: f64, max: f64 },
    #[error("profile for {occ} in {year} lacks skill `{skill}`")]
    NotDense {
        year: i32,
        occ: String,
        skill: String,
    },
    #[error("requested {requested} components but the matrix has rank {rank}")]
    RankTooLow { requested: usize, rank: usize },
    #[error("need at least {needed} rows, got {rows}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("profile has {got} entries, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("skill change undefined: both profiles are all zero")]
    ZeroProfiles,
    #[error("column `{0}` has zero variance and cannot be rescaled")]
    ConstantColumn(String),
}

/// Maps a raw Likert value onto [0,1].
pub fn normalize_likert(raw: f64, scale_min: f64, scale_max: f64) -> Result<f64, SkillError> {
    if !(scale_max > scale_min) {
        return Err(SkillError::EmptyScale {
            min: scale_min,
            max: scale_max,
        });
    }
    if !(raw >= scale_min && raw <= scale_max) {
        return Err(SkillError::OutOfScale {
            raw,
            min: scale_min,
            max: scale_max,
        });
    }
    Ok((raw - scale_min) / (scale_max - scale_min))
}

pub type Profiles = BTreeMap<(i32, OccCode), BTreeMap<String, f64>>;

/// Dense matrix of profiles: one row per (year, occupation), one column
/// per skill.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillMatrix {
    pub skills: Vec<String>,
    pub rows: Vec<(i32, OccCode)>,
    pub data: DMatrix<f64>,
}

impl SkillMatrix {
    /// Pools every profile; all profiles must share one skill set.
    pub fn from_profiles(profiles: &Profiles) -> Result<Self, SkillError> {
        let skills: Vec<String> = profiles
            .values()
            .flat_map(|p| p.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let rows: Vec<(i32, OccCode)> = profiles.keys().copied().collect();
        let mut data = DMatrix::zeros(rows.len(), skills.len());
        for (i, (key, profile)) in profiles.iter().enumerate() {
            for (j, s) in skills.iter().enumerate() {
                data[(i, j)] = *profile.get(s).ok_or_else(|| SkillError::NotDense {
                    year: key.0,
                    occ: key.1.to_string(),
                    skill: s.clone(),
                })?;
            }
        }
        Ok(SkillMatrix { skills, rows, data })
    }

    pub fn profile(&self, row: usize) -> Vec<f64> {
        self.data.row(row).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct PcaOptions {
    /// Divide centered columns by their standard deviation before the
    /// decomposition. Off by default: normalized importances share [0,1].
    pub scale_columns: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaModel {
    pub skills: Vec<String>,
    pub means: Vec<f64>,
    pub scales: Option<Vec<f64>>,
    /// `k` orthonormal loading vectors, strongest first.
    pub components: Vec<Vec<f64>>,
    /// Variance share of every singular direction (not only the kept ones).
    pub explained_variance_ratio: Vec<f64>,
    pub rank: usize,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn cumulative_explained(&self, k: usize) -> f64 {
        self.explained_variance_ratio.iter().take(k).sum()
    }
}

fn relative_rank(singular: &[f64]) -> usize {
    let top = singular.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    singular.iter().filter(|&&s| s > top * 1e-10).count()
}

/// Fits the top `k` principal components by singular value decomposition of
/// the column-centered matrix. Each component is signed so that its
/// largest-magnitude loading is positive.
pub fn pca_fit(matrix: &SkillMatrix, k: usize, opts: PcaOptions) -> Result<PcaModel, SkillError> {
    let (n, d) = matrix.data.shape();
    if n < k.max(2) || k == 0 {
        return Err(SkillError::TooFewRows {
            rows: n,
            needed: k.max(2),
        });
    }
    let means: Vec<f64> = (0..d).map(|j| matrix.data.column(j).mean()).collect();
    let mut centered = matrix.data.clone();
    for j in 0..d {
        centered.column_mut(j).add_scalar_mut(-means[j]);
    }
    let scales = if opts.scale_columns {
        let mut s = Vec::with_capacity(d);
        for j in 0..d {
            let sd = (centered.column(j).norm_squared() / (n as f64 - 1.0)).sqrt();
            if sd <= 1e-12 * means[j].abs().max(1.0) {
                return Err(SkillError::ConstantColumn(matrix.skills[j].clone()));
            }
            centered.column_mut(j).scale_mut(1.0 / sd);
            s.push(sd);
        }
        Some(s)
    } else {
        None
    };

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = relative_rank(&singular);
    if k > rank {
        return Err(SkillError::RankTooLow { requested: k, rank });
    }
    let total: f64 = singular.iter().map(|s| s * s).sum();
    let explained_variance_ratio = singular.iter().map(|s| s * s / total).collect();
    let components = order[..k]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = v_t.row(i).iter().copied().collect();
            let pivot =
                v.iter().enumerate().fold(
                    0,
                    |best, (j, x)| if x.abs() > v[best].abs() { j } else { best },
                );
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(PcaModel {
        skills: matrix.skills.clone(),
        means,
        scales,
        components,
        explained_variance_ratio,
        rank,
    })
}

/// Scores of one profile on the model's components.
pub fn pca_project(model: &PcaModel, profile: &[f64]) -> Result<Vec<f64>, SkillError> {
    if profile.len() != model.means.len() {
        return Err(SkillError::DimensionMismatch {
            got: profile.len(),
            expected: model.means.len(),
        });
    }
    let centered: Vec<f64> = profile
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let c = x - model.means[j];
            match &model.scales {
                Some(s) => c / s[j],
                None => c,
            }
        })
        .collect();
    Ok(model
        .components
        .iter()
        .map(|v| v.iter().zip(&centered).map(|(a, b)| a * b).sum())
        .collect())
}

/// Maps component scores back to the (centered, scaled) profile space.
pub fn pca_reconstruct_centered(model: &PcaModel, scores: &[f64]) -> Vec<f64> {
    let d = model.means.len();
    let mut out = vec![0.0; d];
    for (s, v) in scores.iter().zip(&model.components) {
        for j in 0..d {
            out[j] += s * v[j];
        }
    }
    out
}

/// One minus the weighted Jaccard similarity of two aligned profiles.
pub fn skill_change(baseline: &[f64], current: &[f64]) -> Result<f64, SkillError> {
    if baseline.len() != current.len() {
        return Err(SkillError::DimensionMismatch {
            got: current.len(),
            expected: baseline.len(),
        });
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for (a, b) in baseline.iter().zip(current) {
        lo += a.min(*b);
        hi += a.max(*b);
    }
    if hi == 0.0 {
        return Err(SkillError::ZeroProfiles);
    }
    Ok((1.0 - lo / hi).clamp(0.0, 1.0))
}

fn profiles_differ(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> bool {
    if a.len() != b.len() {
        return true;
    }
    a.iter()
        .zip(b)
        .any(|((ka, va), (kb, vb))| ka != kb || (va - vb).abs() > UPDATE_TOLERANCE)
}

/// Years in which each occupation's profile differs from its previous
/// surveyed year. Occupations never updated map to an empty set.
pub fn detect_update_years(profiles: &Profiles) -> BTreeMap<OccCode, BTreeSet<i32>> {
    let mut by_occ: BTreeMap<OccCode, Vec<(i32, &BTreeMap<String, f64>)>> = BTreeMap::new();
    for ((year, occ), p) in profiles {
        by_occ.entry(*occ).or_default().push((*year, p));
    }
    by_occ
        .into_iter()
        .map(|(occ, mut years)| {
            years.sort_by_key(|y| y.0);
            let updates = years
                .windows(2)
                .filter(|w| profiles_differ(w[0].1, w[1].1))
                .map(|w| w[1].0)
                .collect();
            (occ, updates)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillChangeRow {
    pub occ: OccCode,
    pub year: i32,
    pub baseline_year: i32,
    pub skill_change: f64,
}

impl Record for SkillChangeRow {
    type Key = OccCode;

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(SkillChangeRow {
            occ: c.occ(0)?,
            year: c.small(1)?,
            baseline_year: c.small(2)?,
            skill_change: c.float(3)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.occ.to_string(),
            self.year.to_string(),
            self.baseline_year.to_string(),
            format_float(self.skill_change),
        ]
    }

    fn key(&self) -> OccCode {
        self.occ
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SkillChangeSet {
    pub rows: Vec<SkillChangeRow>,
    pub never_updated: usize,
    pub updated_after_window: usize,
    pub missing_baseline: usize,
    pub rejected: Vec<String>,
}

/// One row per occupation: the distance between its profile in its first
/// update year after `baseline_year` and its baseline profile, for update
/// years up to `max_year`.
pub fn skill_change_dataset(
    profiles: &Profiles,
    baseline_year: i32,
    max_year: i32,
) -> SkillChangeSet {
    let mut out = SkillChangeSet::default();
    for (occ, years) in detect_update_years(profiles) {
        let Some(&year) = years.iter().find(|&&y| y > baseline_year) else {
            out.never_updated += 1;
            continue;
        };
        if year > max_year {
            out.updated_after_window += 1;
            continue;
        }
        let (Some(base), Some(cur)) = (
            profiles.get(&(baseline_year, occ)),
            profiles.get(&(year, occ)),
        ) else {
            out.missing_baseline += 1;
            continue;
        };
        let skills: BTreeSet<&String> = base.keys().chain(cur.keys()).collect();
        let a: Vec<f64> = skills
            .iter()
            .map(|s| base.get(*s).copied().unwrap_or(0.0))
            .collect();
        let b: Vec<f64> = skills
            .iter()
            .map(|s| cur.get(*s).copied().unwrap_or(0.0))
            .collect();
        match skill_change(&a, &b) {
            Ok(d) => out.rows.push(SkillChangeRow {
                occ,
                year,
                baseline_year,
                skill_change: d,
            }),
            Err(e) => out.rejected.push(format!("{occ} {year}: {e}")),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaRow {
    pub component: usize,
    pub skill: String,
    pub value: f64,
}

impl Record for PcaRow {
    type Key = (usize, String);

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(PcaRow {
            component: c.small(0)?,
            skill: c.text(1)?.to_string(),
            value: c.float(2)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.component.to_string(),
            self.skill.clone(),
            format_float(self.value),
        ]
    }

    fn key(&self) -> Self::Key {
        (self.component, self.skill.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaVarianceRow {
    pub component: usize,
    pub explained: f64,
    pub cumulative: f64,
}

impl Record for PcaVarianceRow {
    type Key = usize;

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(PcaVarianceRow {
            component: c.small(0)?,
            explained: c.float(1)?,
            cumulative: c.float(2)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.component.to_string(),
            format_float(self.explained),
            format_float(self.cumulative),
        ]
    }

    fn key(&self) -> usize {
        self.component
    }
}

impl PcaModel {
    /// Component 0 carries the column means.
    pub fn component_rows(&self) -> Vec<PcaRow> {
        let mut rows = Vec::new();
        for (j, s) in self.skills.iter().enumerate() {
            rows.push(PcaRow {
                component: 0,
                skill: s.clone(),
                value: self.means[j],
            });
        }
        for (c, v) in self.components.iter().enumerate() {
            for (j, s) in self.skills.iter().enumerate() {
                rows.push(PcaRow {
                    component: c + 1,
                    skill: s.clone(),
                    value: v[j],
                });
            }
        }
        rows
    }

    pub fn variance_rows(&self) -> Vec<PcaVarianceRow> {
        let mut cum = 0.0;
        self.explained_variance_ratio
            .iter()
            .enumerate()
            .map(|(i, e)| {
                cum += e;
                PcaVarianceRow {
                    component: i + 1,
                    explained: *e,
                    cumulative: cum,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn matrix(rows: &[&[f64]]) -> SkillMatrix {
        let d = rows[0].len();
        SkillMatrix {
            skills: (0..d).map(|j| format!("s{j}")).collect(),
            rows: (0..rows.len())
                .map(|i| (2010, OccCode::detailed(11, i as u16)))
                .collect(),
            data: DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]),
        }
    }

    #[test]
    fn single_nonconstant_column() {
        let m = matrix(&[
            &[0.1, 0.5, 0.2],
            &[0.1, 0.9, 0.2],
            &[0.1, 0.3, 0.2],
            &[0.1, 0.6, 0.2],
        ]);
        let pca = pca_fit(&m, 1, PcaOptions::default()).unwrap();
        assert_eq!(pca.rank, 1);
        let v = &pca.components[0];
        assert!((v[1] - 1.0).abs() < 1e-12 && v[0].abs() < 1e-12 && v[2].abs() < 1e-12);
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert_eq!(
            pca_fit(&m, 2, PcaOptions::default()).unwrap_err(),
            SkillError::RankTooLow {
                requested: 2,
                rank: 1
            }
        );
    }

    #[test]
    fn perfectly_correlated_columns() {
        let m = matrix(&[&[0.1, 0.2], &[0.4, 0.5], &[0.7, 0.8], &[0.2, 0.3]]);
        let pca = pca_fit(&m, 1, PcaOptions::default()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pca.components[0][0] - h).abs() < 1e-12);
        assert!((pca.components[0][1] - h).abs() < 1e-12);
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..5).map(|_| rng.random::<f64>()).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix(&refs);
        let pca = pca_fit(&m, 3, PcaOptions::default()).unwrap();
        let zero = pca_project(&pca, &pca.means).unwrap();
        assert!(zero.iter().all(|z| z.abs() < 1e-15));
        let shifted: Vec<f64> = pca
            .means
            .iter()
            .zip(&pca.components[0])
            .map(|(a, b)| a + b)
            .collect();
        let s = pca_project(&pca, &shifted).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1].abs() < 1e-12 && s[2].abs() < 1e-12);
        assert!(pca_project(&pca, &[0.0; 4]).is_err());
        // Batch equals per-row dot products.
        for r in &rows {
            let p = pca_project(&pca, r).unwrap();
            for (c, comp) in pca.components.iter().enumerate() {
                let dot: f64 = r
                    .iter()
                    .zip(&pca.means)
                    .zip(comp)
                    .map(|((x, m), v)| (x - m) * v)
                    .sum();
                assert!((p[c] - dot).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaled_option_rejects_constant_column() {
        let m = matrix(&[&[0.1, 0.5], &[0.1, 0.9], &[0.1, 0.3]]);
        assert!(matches!(
            pca_fit(
                &m,
                1,
                PcaOptions {
                    scale_columns: true
                }
            ),
            Err(SkillError::ConstantColumn(_))
        ));
    }

    #[test]
    fn skill_change_cases() {
        let x = [0.3, 0.0, 0.9];
        assert_eq!(skill_change(&x, &x).unwrap(), 0.0);
        assert_eq!(skill_change(&[0.5, 0.0], &[0.0, 0.2]).unwrap(), 1.0);
        let d = skill_change(&[0.5, 0.2], &[0.4, 0.4]).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            skill_change(&[0.0, 0.0], &[0.0, 0.0]),
            Err(SkillError::ZeroProfiles)
        );
    }

    fn profile(vals: &[f64]) -> BTreeMap<String, f64> {
        vals.iter()
            .enumerate()
            .map(|(i, v)| (format!("s{i}"), *v))
            .collect()
    }

    #[test]
    fn update_detection() {
        let occ = OccCode::detailed(15, 1132);
        let other = OccCode::detailed(11, 1011);
        let mut p = Profiles::new();
        for y in 2010..=2017 {
            p.insert((y, other), profile(&[0.2, 0.4]));
            let v = if y >= 2014 { [0.3, 0.4] } else { [0.2, 0.4] };
            p.insert((y, occ), profile(&v));
        }
        let ups = detect_update_years(&p);
        assert!(ups[&other].is_empty());
        assert_eq!(ups[&occ], BTreeSet::from([2014]));
        let set = skill_change_dataset(&p, 2010, 2017);
        assert_eq!(set.rows.len(), 1);
        assert_eq!(set.rows[0].year, 2014);
        assert_eq!(set.never_updated, 1);
        let d = set.rows[0].skill_change;
        assert!((d - (1.0 - 0.6 / 0.7)).abs() < 1e-12);
    }

    #[test]
    fn updates_after_window_are_excluded() {
        let occ = OccCode::detailed(15, 1132);
        let mut p = Profiles::new();
        for y in 2010..=2019 {
            let v = if y >= 2018 { [0.9, 0.4] } else { [0.2, 0.4] };
            p.insert((y, occ), profile(&v));
        }
        let set = skill_change_dataset(&p, 2010, 2017);
        assert!(set.rows.is_empty());
        assert_eq!(set.updated_after_window, 1);
    }
}
