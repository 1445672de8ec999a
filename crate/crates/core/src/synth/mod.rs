//! Synthetic labor market with planted effects.
//!
//! Every state holds a fixed number of job slots per six-digit occupation
//! within a year. Each month every employed worker is displaced with
//! probability
//!
//! ```text
//! logistic(base + m_s·β·z(occ) + γ_c·college(occ) + γ_k·skill(occ)
//!          + u(occ) + a_s + seasonal(month) + ε(s, month, occ))
//! ```
//!
//! Displaced workers join the unemployed pool under their last occupation
//! and their slot is refilled by an entrant; unemployed workers leave the
//! pool with a fixed monthly probability. Aggregate tables are exact
//! functions of the retained worker-month counts.

mod truth;

pub use truth::{MicroTruth, TruthCell, TruthKey, TruthRow, WorkerMonth};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{self, format_float, parse_float, schema, write_table, IngestError};
use crate::model::{
    ClaimsRow, EmploymentRow, ExposureRow, OccCode, RateRow, RawPanels, SkillRow, StateCode,
    Taxonomy,
};
use crate::regress::{ModelFit, RegressError};
use crate::rng;

/// USPS codes in the order states are assigned.
pub const STATE_CODES: [&str; 51] = [
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "DC", "FL", "GA", "HI", "ID", "IL", "IN", "IA",
    "KS", "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM",
    "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA",
    "WV", "WI", "WY",
];

/// Name of the synthetic education share in the exposure table.
pub const COLLEGE_SCORE: &str = "pct_college";

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("cannot read config {path}: {msg}")]
    ConfigIo { path: String, msg: String },
    #[error("{empty} of {total} cells are empty (limit {limit}); raise workers_per_state or lower the hazard spread")]
    EmptyCells {
        empty: usize,
        total: usize,
        limit: f64,
    },
    #[error(transparent)]
    Io(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub states: usize,
    pub majors: usize,
    pub details_per_major: usize,
    pub workers_per_state: u64,
    pub start_year: i32,
    pub months: usize,
    /// Months simulated before `start_year` so the unemployed pool settles.
    pub burn_in_months: usize,

    /// Logit of the baseline monthly displacement hazard.
    pub base_logit: f64,
    /// Monthly probability that an unemployed worker leaves the pool.
    pub exit_prob: f64,
    /// Effect of each synthetic exposure score on the hazard logit; its
    /// length is the number of scores.
    pub beta: Vec<f64>,
    pub college_beta: f64,
    /// Effect of the first latent skill factor on the hazard logit.
    pub skill_beta: f64,
    /// Multiplier on β·z for individual states, keyed by USPS code.
    pub state_beta_scale: BTreeMap<String, f64>,

    pub state_effect_sd: f64,
    pub seasonal_amplitude: f64,
    /// Persistent occupation-level hazard noise.
    pub occ_noise_sd: f64,
    /// Independent noise per (state, month, occupation).
    pub cell_noise_sd: f64,
    /// Spread of occupation mixes across states (log-normal weights).
    pub mix_sd: f64,
    pub employment_drift_sd: f64,

    /// Make major-group score means mutually orthogonal across majors.
    pub orthogonal_scores: bool,
    /// Within-major spread of six-digit scores around the major value.
    pub within_major_sd: f64,

    pub skill_count: usize,
    pub skill_factors: usize,
    pub skill_first_year: i32,
    pub skill_last_year: i32,
    /// Probability an occupation is ever resurveyed.
    pub update_prob: f64,
    /// Years between repeat surveys after the first update.
    pub update_interval: i32,
    pub skill_drift_sd: f64,
    /// Effect of each score on the log of the drift scale; empty means none.
    pub skill_drift_beta: Vec<f64>,

    /// Generation fails when more than this share of cells is empty.
    pub max_empty_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            states: 5,
            majors: 10,
            details_per_major: 3,
            workers_per_state: 20_000,
            start_year: 2010,
            months: 36,
            burn_in_months: 12,
            base_logit: -4.6,
            exit_prob: 0.2,
            beta: vec![0.3, -0.2, 0.15, 0.0],
            college_beta: -0.3,
            skill_beta: 0.2,
            state_beta_scale: BTreeMap::new(),
            state_effect_sd: 0.15,
            seasonal_amplitude: 0.1,
            occ_noise_sd: 0.2,
            cell_noise_sd: 0.05,
            mix_sd: 0.3,
            employment_drift_sd: 0.05,
            orthogonal_scores: false,
            within_major_sd: 1.0,
            skill_count: 20,
            skill_factors: 3,
            skill_first_year: 2010,
            skill_last_year: 2019,
            update_prob: 0.8,
            update_interval: 3,
            skill_drift_sd: 0.3,
            skill_drift_beta: Vec::new(),
            max_empty_fraction: 0.05,
        }
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let cfg: SynthConfig =
            toml::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::ConfigIo {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn n_scores(&self) -> usize {
        self.beta.len()
    }

    pub fn score_names(&self) -> Vec<String> {
        (1..=self.n_scores())
            .map(|k| format!("score_{k}"))
            .collect()
    }

    pub fn state_codes(&self) -> Vec<StateCode> {
        STATE_CODES[..self.states]
            .iter()
            .map(|s| s.parse().expect("valid code"))
            .collect()
    }

    pub fn years(&self) -> Vec<i32> {
        let last = self.start_year + (self.months.max(1) as i32 - 1) / 12;
        (self.start_year..=last).collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.states == 0 || self.states > STATE_CODES.len() {
            return bad(format!("states must be in 1..={}", STATE_CODES.len()));
        }
        if self.majors == 0 || self.majors > 44 {
            return bad("majors must be in 1..=44".into());
        }
        if self.details_per_major == 0 || self.details_per_major > 9 {
            return bad("details_per_major must be in 1..=9".into());
        }
        if self.months == 0 {
            return bad("months must be positive".into());
        }
        if self.workers_per_state == 0 {
            return bad("workers_per_state must be positive".into());
        }
        if !(self.exit_prob > 0.0 && self.exit_prob <= 1.0) {
            return bad("exit_prob must be in (0, 1]".into());
        }
        if self.beta.is_empty() {
            return bad("beta must name at least one score".into());
        }
        if !self.skill_drift_beta.is_empty() && self.skill_drift_beta.len() != self.beta.len() {
            return bad(format!(
                "skill_drift_beta has {} entries but there are {} scores",
                self.skill_drift_beta.len(),
                self.beta.len()
            ));
        }
        if self.orthogonal_scores && self.n_scores() + 1 > self.majors {
            return bad("orthogonal_scores needs more majors than scores".into());
        }
        if self.skill_count < 2 || self.skill_factors == 0 {
            return bad("need at least two skills and one skill factor".into());
        }
        if self.skill_last_year < self.skill_first_year {
            return bad("skill_last_year precedes skill_first_year".into());
        }
        if self.update_interval < 1 {
            return bad("update_interval must be at least 1".into());
        }
        let codes: Vec<&str> = STATE_CODES[..self.states].to_vec();
        for s in self.state_beta_scale.keys() {
            if !codes.contains(&s.as_str()) {
                return bad(format!("state_beta_scale names unknown state {s}"));
            }
        }
        let sds = [
            self.state_effect_sd,
            self.occ_noise_sd,
            self.cell_noise_sd,
            self.mix_sd,
            self.employment_drift_sd,
            self.within_major_sd,
            self.skill_drift_sd,
        ];
        if sds.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("standard deviations must be finite and nonnegative".into());
        }
        Ok(())
    }
}

/// Ground truth recorded alongside the generated tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Planted {
    pub config: SynthConfig,
    pub scores: Vec<String>,
    pub beta: BTreeMap<String, f64>,
    pub state_effects: BTreeMap<String, f64>,
    /// Survey years in which each occupation's skill profile changed.
    pub update_years: BTreeMap<String, Vec<i32>>,
    /// Occupations whose first update falls in (skill_first_year, max_year].
    pub first_updates_through: BTreeMap<i32, usize>,
}

impl Planted {
    /// Occupations whose first update is on or before `max_year`.
    pub fn scheduled_updates(&self, max_year: i32) -> usize {
        self.update_years
            .values()
            .filter(|ys| ys.first().is_some_and(|&y| y <= max_year))
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub taxonomy: Taxonomy,
    pub raw: RawPanels,
    pub truth: MicroTruth,
    pub planted: Planted,
}

/// Rounds through the table text format so in-memory values equal what a
/// reader gets back from the written files.
fn canon(x: f64) -> f64 {
    parse_float(&format_float(x)).expect("formatted float parses")
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Occupations {
    codes: Vec<OccCode>,
    /// [occ][score]
    scores: Vec<Vec<f64>>,
    college: Vec<f64>,
    factors: Vec<Vec<f64>>,
    noise: Vec<f64>,
    wage: Vec<f64>,
}

fn taxonomy_codes(cfg: &SynthConfig) -> Vec<OccCode> {
    let mut codes = Vec::new();
    for i in 0..cfg.majors {
        let major = 11 + 2 * i as u8;
        for j in 0..cfg.details_per_major {
            codes.push(OccCode::detailed(major, 1000 * (j as u16 + 1) + 11));
        }
    }
    codes
}

/// Centered, mutually orthogonal columns with unit sample variance.
fn orthogonal_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(rows, cols + 1, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.sample(StandardNormal)
        }
    });
    for j in 0..=cols {
        for i in 0..j {
            let qi = m.column(i).clone_owned();
            let d = qi.dot(&m.column(j));
            m.column_mut(j).axpy(-d, &qi, 1.0);
        }
        let norm = m.column(j).norm();
        m.column_mut(j).scale_mut(1.0 / norm);
    }
    let scale = ((rows - 1) as f64).sqrt();
    m.columns(1, cols).clone_owned() * scale
}

fn occupations(cfg: &SynthConfig) -> Occupations {
    let codes = taxonomy_codes(cfg);
    let n = codes.len();
    let k = cfg.n_scores();
    let d = cfg.details_per_major;
    let mut rng = rng::stream(cfg.seed, &[1]);

    let mut scores = vec![vec![0.0; k]; n];
    if cfg.orthogonal_scores {
        let major = orthogonal_columns(&mut rng, cfg.majors, k);
        for m in 0..cfg.majors {
            for s in 0..k {
                let dev: Vec<f64> = (0..d)
                    .map(|_| cfg.within_major_sd * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let mean = dev.iter().sum::<f64>() / d as f64;
                for (j, v) in dev.iter().enumerate() {
                    scores[m * d + j][s] = major[(m, s)] + v - mean;
                }
            }
        }
    } else {
        for row in scores.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
    }
    let factors: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..cfg.skill_factors)
                .map(|_| rng.sample(StandardNormal))
                .collect()
        })
        .collect();
    let college: Vec<f64> = factors
        .iter()
        .map(|f| logistic(0.8 * f[0] + 0.5 * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let noise: Vec<f64> = (0..n)
        .map(|_| cfg.occ_noise_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let wage: Vec<f64> = college
        .iter()
        .map(|c| 30_000.0 * (0.3 * rng.sample::<f64, _>(StandardNormal) + 1.2 * c).exp())
        .collect();
    Occupations {
        codes,
        scores,
        college,
        factors,
        noise,
        wage,
    }
}

struct SkillPanel {
    rows: Vec<SkillRow>,
    update_years: BTreeMap<String, Vec<i32>>,
}

fn skill_panel(cfg: &SynthConfig, occ: &Occupations) -> SkillPanel {
    let mut rng = rng::stream(cfg.seed, &[3]);
    let loadings: Vec<Vec<f64>> = (0..cfg.skill_count)
        .map(|_| {
            (0..cfg.skill_factors)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let skill_ids: Vec<String> = (1..=cfg.skill_count).map(|i| format!("S{i:02}")).collect();
    let quantize = |v: f64| (v.clamp(1.0, 5.0) * 100.0).round() / 100.0;
    let mut rows = Vec::new();
    let mut update_years = BTreeMap::new();
    for (o, code) in occ.codes.iter().enumerate() {
        let mut profile: Vec<f64> = loadings
            .iter()
            .map(|l| {
                let lin: f64 = l.iter().zip(&occ.factors[o]).map(|(a, b)| a * b).sum();
                quantize(
                    1.0 + 4.0 * logistic(0.6 * lin + 0.3 * rng.sample::<f64, _>(StandardNormal)),
                )
            })
            .collect();
        let span = cfg.skill_last_year - cfg.skill_first_year;
        let mut schedule = Vec::new();
        if span > 0 && rng.random_bool(cfg.update_prob) {
            let mut y = cfg.skill_first_year + rng.random_range(1..=span);
            while y <= cfg.skill_last_year {
                schedule.push(y);
                y += cfg.update_interval;
            }
        }
        let drift_scale = cfg.skill_drift_sd
            * cfg
                .skill_drift_beta
                .iter()
                .zip(&occ.scores[o])
                .map(|(b, z)| b * z)
                .sum::<f64>()
                .exp();
        for year in cfg.skill_first_year..=cfg.skill_last_year {
            if schedule.contains(&year) {
                let before = profile.clone();
                for v in profile.iter_mut() {
                    *v = quantize(*v + drift_scale * rng.sample::<f64, _>(StandardNormal));
                }
                if profile == before {
                    // Force a visible change so the schedule stays exact.
                    profile[0] = if profile[0] <= 4.0 {
                        profile[0] + 0.5
                    } else {
                        profile[0] - 0.5
                    };
                }
            }
            for (s, v) in skill_ids.iter().zip(&profile) {
                rows.push(SkillRow {
                    year,
                    occ: *code,
                    skill: s.clone(),
                    value: *v,
                    scale_min: 1.0,
                    scale_max: 5.0,
                });
            }
        }
        update_years.insert(code.to_string(), schedule);
    }
    SkillPanel { rows, update_years }
}

struct StateOutput {
    employment: Vec<EmploymentRow>,
    claims: Vec<ClaimsRow>,
    urate: Vec<RateRow>,
    separations: Vec<RateRow>,
    truth: MicroTruth,
    state_effect: f64,
    empty_cells: usize,
    cells: usize,
}

fn simulate_state(
    cfg: &SynthConfig,
    occ: &Occupations,
    index: usize,
    state: StateCode,
) -> StateOutput {
    let mut rng = rng::stream(cfg.seed, &[2, index as u64]);
    let n = occ.codes.len();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let state_effect = cfg.state_effect_sd * normal.sample(&mut rng);
    let scale = cfg
        .state_beta_scale
        .get(state.as_str())
        .copied()
        .unwrap_or(1.0);
    let wage_factor = (0.1 * normal.sample(&mut rng)).exp();
    let mix: Vec<f64> = (0..n)
        .map(|_| (cfg.mix_sd * normal.sample(&mut rng)).exp())
        .collect();
    let static_logit: Vec<f64> = (0..n)
        .map(|o| {
            let bz: f64 = cfg
                .beta
                .iter()
                .zip(&occ.scores[o])
                .map(|(b, z)| b * z)
                .sum();
            cfg.base_logit
                + scale * bz
                + cfg.college_beta * occ.college[o]
                + cfg.skill_beta * occ.factors[o][0]
                + occ.noise[o]
                + state_effect
        })
        .collect();

    let years = cfg.years();
    let mut slots_by_year: BTreeMap<i32, Vec<u64>> = BTreeMap::new();
    let mut weights = mix.clone();
    for &y in &years {
        for w in weights.iter_mut() {
            *w *= (cfg.employment_drift_sd * normal.sample(&mut rng)).exp();
        }
        let total: f64 = weights.iter().sum();
        let slots = weights
            .iter()
            .map(|w| (cfg.workers_per_state as f64 * w / total).round() as u64)
            .collect();
        slots_by_year.insert(y, slots);
    }

    let mut out = StateOutput {
        employment: Vec::new(),
        claims: Vec::new(),
        urate: Vec::new(),
        separations: Vec::new(),
        truth: MicroTruth::default(),
        state_effect,
        empty_cells: 0,
        cells: 0,
    };
    for &y in &years {
        for (o, &slots) in slots_by_year[&y].iter().enumerate() {
            out.cells += 1;
            if slots == 0 {
                out.empty_cells += 1;
                continue;
            }
            let growth = 1.02f64.powi(y - cfg.start_year);
            out.employment.push(EmploymentRow {
                state,
                year: y,
                occ: occ.codes[o],
                employment: slots as i64,
                mean_wage: canon((occ.wage[o] * wage_factor * growth * 100.0).round() / 100.0),
            });
        }
    }

    let mut unemployed = vec![0u64; n];
    let total_months = cfg.burn_in_months + cfg.months;
    for t in 0..total_months {
        let recorded = t >= cfg.burn_in_months;
        let offset = t as i64 - cfg.burn_in_months as i64;
        let year = cfg.start_year + offset.div_euclid(12) as i32;
        let month = (offset.rem_euclid(12) + 1) as u8;
        // Burn-in months reuse the first year's slots.
        let slots = &slots_by_year[&year.max(cfg.start_year)];
        let seasonal = cfg.seasonal_amplitude
            * (2.0 * std::f64::consts::PI * (month as f64 - 1.0) / 12.0).cos();

        for u in unemployed.iter_mut() {
            let stay = (0..*u).filter(|_| !rng.random_bool(cfg.exit_prob)).count() as u64;
            *u = stay;
        }
        let mut displaced = vec![0u64; n];
        for o in 0..n {
            let noise = if cfg.cell_noise_sd > 0.0 {
                cfg.cell_noise_sd * normal.sample(&mut rng)
            } else {
                0.0
            };
            let h = logistic(static_logit[o] + seasonal + noise);
            let d = (0..slots[o]).filter(|_| rng.random::<f64>() < h).count() as u64;
            displaced[o] = d;
            unemployed[o] += d;
        }
        if !recorded {
            continue;
        }
        let mut major_u: BTreeMap<OccCode, u64> = BTreeMap::new();
        for o in 0..n {
            let c = occ.codes[o];
            *major_u.entry(c.major()).or_insert(0) += unemployed[o];
            if slots[o] > 0 || unemployed[o] > 0 {
                out.truth.record(
                    (state, year, month, c),
                    TruthCell {
                        employed: slots[o],
                        unemployed: unemployed[o],
                        displaced: displaced[o],
                    },
                );
            }
        }
        let e: u64 = slots.iter().sum();
        let u: u64 = unemployed.iter().sum();
        let d: u64 = displaced.iter().sum();
        out.cells += 1;
        if u == 0 {
            out.empty_cells += 1;
        }
        for (m, count) in major_u {
            out.claims.push(ClaimsRow {
                state,
                year,
                month,
                occ: m,
                recipients: count as i64,
            });
        }
        out.urate.push(RateRow {
            state,
            year,
            month,
            rate: canon(u as f64 / (e + u) as f64),
        });
        out.separations.push(RateRow {
            state,
            year,
            month,
            rate: canon(d as f64 / e as f64),
        });
    }
    out
}

/// Runs the simulation. States are simulated in parallel on independent
/// streams; the result does not depend on the thread count.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    cfg.validate()?;
    let occ = occupations(cfg);
    let skills = skill_panel(cfg, &occ);
    let states = cfg.state_codes();
    let outputs: Vec<StateOutput> = states
        .par_iter()
        .enumerate()
        .map(|(i, &s)| simulate_state(cfg, &occ, i, s))
        .collect();

    let empty: usize = outputs.iter().map(|o| o.empty_cells).sum();
    let total: usize = outputs.iter().map(|o| o.cells).sum();
    if empty as f64 > cfg.max_empty_fraction * total as f64 {
        return Err(SynthError::EmptyCells {
            empty,
            total,
            limit: cfg.max_empty_fraction,
        });
    }

    let names = cfg.score_names();
    let mut exposures = Vec::new();
    for (k, name) in names.iter().enumerate() {
        for (o, code) in occ.codes.iter().enumerate() {
            exposures.push(ExposureRow {
                score: name.clone(),
                study: format!("Study {}", k + 1),
                wave: (k % 3) as u8 + 1,
                occ: *code,
                value: canon(occ.scores[o][k]),
            });
        }
    }
    for (o, code) in occ.codes.iter().enumerate() {
        exposures.push(ExposureRow {
            score: COLLEGE_SCORE.into(),
            study: "Education".into(),
            wave: 1,
            occ: *code,
            value: canon(occ.college[o]),
        });
    }

    let mut raw = RawPanels {
        skills: skills.rows,
        exposures,
        separations: Some(Vec::new()),
        ..Default::default()
    };
    let mut truth = MicroTruth::default();
    let mut state_effects = BTreeMap::new();
    for (s, o) in states.iter().zip(outputs) {
        raw.employment.extend(o.employment);
        raw.claims.extend(o.claims);
        raw.urate.extend(o.urate);
        raw.separations
            .as_mut()
            .expect("set above")
            .extend(o.separations);
        truth.cells.extend(o.truth.cells);
        state_effects.insert(s.to_string(), o.state_effect);
    }

    let mut first_updates_through = BTreeMap::new();
    for y in cfg.skill_first_year + 1..=cfg.skill_last_year {
        let c = skills
            .update_years
            .values()
            .filter(|ys| ys.first().is_some_and(|&f| f <= y))
            .count();
        first_updates_through.insert(y, c);
    }
    let planted = Planted {
        config: cfg.clone(),
        scores: names.clone(),
        beta: names
            .iter()
            .cloned()
            .zip(cfg.beta.iter().copied())
            .collect(),
        state_effects,
        update_years: skills.update_years,
        first_updates_through,
    };
    Ok(SynthData {
        taxonomy: Taxonomy::from_codes(occ.codes.iter().copied()),
        raw,
        truth,
        planted,
    })
}

impl SynthData {
    /// Writes the six input tables, the taxonomy, the truth table and the
    /// planted-effects summary into `dir`. Returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
        let p = |f: &str| dir.join(f);
        let raw = &self.raw;
        write_table(
            &raw.employment,
            &schema::EMPLOYMENT,
            &p("employment.csv"),
            true,
        )?;
        write_table(&raw.claims, &schema::CLAIMS, &p("claims.csv"), true)?;
        write_table(&raw.urate, &schema::URATE, &p("urate.csv"), true)?;
        let seps = raw.separations.as_deref().unwrap_or(&[]);
        write_table(seps, &schema::SEPARATIONS, &p("separations.csv"), true)?;
        write_table(&raw.skills, &schema::SKILLS, &p("skills.csv"), true)?;
        write_table(&raw.exposures, &schema::EXPOSURE, &p("exposure.csv"), true)?;
        write_table(
            &self.truth.major_rows(),
            &schema::TRUTH,
            &p("truth.csv"),
            true,
        )?;
        ingest::write_bytes(&p("taxonomy.txt"), self.taxonomy.to_text().as_bytes())?;
        let mut json = serde_json::to_string_pretty(&self.planted).expect("planted serializes");
        json.push('\n');
        ingest::write_bytes(&p("planted.json"), json.as_bytes())?;
        Ok([
            "employment.csv",
            "claims.csv",
            "urate.csv",
            "separations.csv",
            "skills.csv",
            "exposure.csv",
            "taxonomy.txt",
            "truth.csv",
            "planted.json",
        ]
        .iter()
        .map(|f| p(f))
        .collect())
    }
}

/// One planted coefficient compared with its estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub name: String,
    pub expected: f64,
    pub estimate: f64,
    pub se: f64,
    /// (estimate − expected) / se
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub sigmas: f64,
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Checks each expected standardized coefficient against a fit: pass when
/// the estimate lies within `sigmas` standard errors.
pub fn planted_recovery_check(
    expected: &BTreeMap<String, f64>,
    fit: &ModelFit,
    sigmas: f64,
) -> Result<RecoveryReport, RegressError> {
    let mut rows = Vec::new();
    for (name, &exp) in expected {
        let estimate = fit
            .coef(name)
            .ok_or_else(|| RegressError::MissingColumn(name.clone()))?;
        let se = fit.se(name).unwrap_or(f64::NAN);
        let z = (estimate - exp) / se;
        rows.push(RecoveryRow {
            name: name.clone(),
            expected: exp,
            estimate,
            se,
            z,
            pass: z.abs() <= sigmas,
        });
    }
    Ok(RecoveryReport { sigmas, rows })
}
