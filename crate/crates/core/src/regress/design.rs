use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::RegressError;

/// Relative tolerance for declaring a column linearly dependent on the
/// columns before it.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-8;

/// Column-oriented table of regression inputs. Every column has `n` entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    pub n: usize,
    pub numeric: BTreeMap<String, Vec<f64>>,
    pub categorical: BTreeMap<String, Vec<String>>,
    pub row_keys: Vec<String>,
}

impl Frame {
    pub fn new(row_keys: Vec<String>) -> Self {
        Frame {
            n: row_keys.len(),
            row_keys,
            ..Default::default()
        }
    }

    pub fn push_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<(), RegressError> {
        self.check_len(name, values.len())?;
        self.numeric.insert(name.to_string(), values);
        Ok(())
    }

    pub fn push_categorical(
        &mut self,
        name: &str,
        values: Vec<String>,
    ) -> Result<(), RegressError> {
        self.check_len(name, values.len())?;
        self.categorical.insert(name.to_string(), values);
        Ok(())
    }

    fn check_len(&self, name: &str, len: usize) -> Result<(), RegressError> {
        if len != self.n {
            return Err(RegressError::LengthMismatch {
                column: name.to_string(),
                len,
                n: self.n,
            });
        }
        Ok(())
    }

    fn numeric_col(&self, name: &str) -> Result<&[f64], RegressError> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| RegressError::MissingColumn(name.to_string()))
    }

    fn categorical_col(&self, name: &str) -> Result<&[String], RegressError> {
        self.categorical
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| RegressError::MissingColumn(name.to_string()))
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.n).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Collinearity {
    /// Rank deficiency is an error naming the dependent columns.
    #[default]
    Error,
    /// Dependent columns are dropped and reported.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub name: String,
    pub response: String,
    pub covariates: Vec<String>,
    /// Categorical columns expanded to one-hot blocks.
    pub fixed_effects: Vec<String>,
    #[serde(default)]
    pub collinearity: Collinearity,
}

impl DesignSpec {
    pub fn new(name: &str, response: &str, covariates: &[&str], fixed_effects: &[&str]) -> Self {
        DesignSpec {
            name: name.to_string(),
            response: response.to_string(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            fixed_effects: fixed_effects.iter().map(|s| s.to_string()).collect(),
            collinearity: Collinearity::Error,
        }
    }

    pub fn dropping_collinear(mut self) -> Self {
        self.collinearity = Collinearity::Drop;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnRole {
    Intercept,
    FixedEffect { block: String, level: String },
    Covariate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnInfo {
    pub name: String,
    pub role: ColumnRole,
}

impl ColumnInfo {
    pub fn penalized(&self) -> bool {
        self.role == ColumnRole::Covariate
    }
}

/// Mean and sample standard deviation of a column over a set of rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
}

impl ColumnStats {
    pub fn from_rows(values: &[f64], rows: &[usize]) -> Self {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|&r| values[r]).sum::<f64>() / n;
        let ss: f64 = rows.iter().map(|&r| (values[r] - mean).powi(2)).sum();
        ColumnStats {
            mean,
            sd: (ss / (n - 1.0)).sqrt(),
        }
    }

    fn is_degenerate(&self) -> bool {
        !(self.sd > 1e-12 * self.mean.abs().max(1.0))
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }
}

/// Standardizes a column with statistics taken from `stats_rows` only.
pub fn standardize(column: &[f64], stats_rows: &[usize]) -> Result<Vec<f64>, RegressError> {
    let stats = ColumnStats::from_rows(column, stats_rows);
    if stats.is_degenerate() {
        return Err(RegressError::ZeroVariance("column".into()));
    }
    Ok(column.iter().map(|&x| stats.apply(x)).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DesignDiagnostics {
    pub dropped_constant: Vec<String>,
    pub dropped_collinear: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
struct FeBlock {
    name: String,
    /// Non-reference levels, sorted; the reference level is the
    /// lexicographically first level seen in the fitting rows.
    levels: Vec<String>,
    reference: String,
}

/// Frozen recipe for turning frame rows into a design matrix: fixed-effect
/// levels and standardization statistics learned from one set of rows,
/// reusable on any other rows (e.g. a held-out fold).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBuilder {
    pub spec: DesignSpec,
    blocks: Vec<FeBlock>,
    covariates: Vec<(String, ColumnStats)>,
    response: ColumnStats,
    columns: Vec<ColumnInfo>,
    pub diagnostics: DesignDiagnostics,
}

/// Orthonormal basis of the span of selected columns, via modified
/// Gram-Schmidt with one reorthogonalization pass. Columns whose residual
/// norm falls below `tol` times their own norm are reported as dependent.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub kept: Vec<usize>,
    pub dependent: Vec<usize>,
    pub ncols: usize,
}

impl Basis {
    pub fn new(x: &DMatrix<f64>, tol: f64) -> Self {
        let (n, p) = x.shape();
        let mut q: Vec<DVector<f64>> = Vec::new();
        let mut r = DMatrix::zeros(p, p);
        let mut kept = Vec::new();
        let mut dependent = Vec::new();
        for j in 0..p {
            let mut v = x.column(j).clone_owned();
            let norm0 = v.norm();
            let mut coef = vec![0.0; q.len()];
            for _ in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let d = qi.dot(&v);
                    v.axpy(-d, qi, 1.0);
                    coef[i] += d;
                }
            }
            let norm = v.norm();
            if norm0 == 0.0 || norm <= tol * norm0 {
                dependent.push(j);
                continue;
            }
            let k = q.len();
            for (i, c) in coef.into_iter().enumerate() {
                r[(i, k)] = c;
            }
            r[(k, k)] = norm;
            q.push(v / norm);
            kept.push(j);
        }
        let rank = q.len();
        let q = if rank == 0 {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&q)
        };
        let r = r.view((0, 0), (rank, rank)).clone_owned();
        Basis {
            q,
            r,
            kept,
            dependent,
            ncols: p,
        }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// Residual of `v` after projection onto the basis.
    pub fn residualize(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        for _ in 0..2 {
            let c = self.q.tr_mul(&out);
            out -= &self.q * c;
        }
        out
    }

    /// Least-squares coefficients of `v` on the original columns; dependent
    /// columns get zero.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.ncols);
        if self.rank() == 0 {
            return full;
        }
        let qtv = self.q.tr_mul(v);
        let coef = self
            .r
            .solve_upper_triangular(&qtv)
            .expect("basis has a nonzero diagonal");
        for (i, &j) in self.kept.iter().enumerate() {
            full[j] = coef[i];
        }
        full
    }
}

impl DesignBuilder {
    /// Learns levels and standardization statistics from `rows`.
    pub fn fit(frame: &Frame, spec: &DesignSpec, rows: &[usize]) -> Result<Self, RegressError> {
        Self::fit_with_stats(frame, spec, rows, rows)
    }

    /// Learns fixed-effect levels from `level_rows` and standardization
    /// statistics from `stats_rows`.
    pub fn fit_with_stats(
        frame: &Frame,
        spec: &DesignSpec,
        level_rows: &[usize],
        stats_rows: &[usize],
    ) -> Result<Self, RegressError> {
        if level_rows.len() < 2 || stats_rows.len() < 2 {
            return Err(RegressError::TooFewRows {
                n: level_rows.len().min(stats_rows.len()),
                p: 2,
            });
        }
        let y = frame.numeric_col(&spec.response)?;
        check_finite(&spec.response, y, stats_rows)?;
        let response = ColumnStats::from_rows(y, stats_rows);
        if response.is_degenerate() {
            return Err(RegressError::ZeroVariance(spec.response.clone()));
        }

        let mut diagnostics = DesignDiagnostics::default();
        let mut blocks = Vec::new();
        for fe in &spec.fixed_effects {
            let col = frame.categorical_col(fe)?;
            let levels: BTreeSet<&String> = level_rows.iter().map(|&r| &col[r]).collect();
            let mut levels = levels.into_iter().cloned();
            let reference = levels.next().expect("rows are nonempty");
            blocks.push(FeBlock {
                name: fe.clone(),
                levels: levels.collect(),
                reference,
            });
        }
        let mut covariates = Vec::new();
        for name in &spec.covariates {
            let col = frame.numeric_col(name)?;
            check_finite(name, col, stats_rows)?;
            let stats = ColumnStats::from_rows(col, stats_rows);
            if stats.is_degenerate() {
                diagnostics.dropped_constant.push(name.clone());
            } else {
                covariates.push((name.clone(), stats));
            }
        }

        let mut builder = DesignBuilder {
            spec: spec.clone(),
            blocks,
            covariates,
            response,
            columns: Vec::new(),
            diagnostics,
        };
        builder.columns = builder.all_columns();

        let probe = builder.apply(frame, level_rows)?;
        let basis = Basis::new(&probe.x, COLLINEARITY_TOLERANCE);
        if !basis.dependent.is_empty() {
            let names: Vec<String> = basis
                .dependent
                .iter()
                .map(|&j| builder.columns[j].name.clone())
                .collect();
            if spec.collinearity == Collinearity::Error {
                return Err(RegressError::RankDeficient {
                    design: spec.name.clone(),
                    columns: names,
                });
            }
            let drop: BTreeSet<&String> = names.iter().collect();
            for b in &mut builder.blocks {
                let block = b.name.clone();
                b.levels
                    .retain(|l| !drop.contains(&fe_column_name(&block, l)));
            }
            builder.covariates.retain(|(c, _)| !drop.contains(c));
            if drop.contains(&"(Intercept)".to_string()) {
                return Err(RegressError::RankDeficient {
                    design: spec.name.clone(),
                    columns: names,
                });
            }
            builder.diagnostics.dropped_collinear = names;
            builder.columns = builder.all_columns();
        }
        Ok(builder)
    }

    fn all_columns(&self) -> Vec<ColumnInfo> {
        let mut cols = vec![ColumnInfo {
            name: "(Intercept)".into(),
            role: ColumnRole::Intercept,
        }];
        for b in &self.blocks {
            for l in &b.levels {
                cols.push(ColumnInfo {
                    name: fe_column_name(&b.name, l),
                    role: ColumnRole::FixedEffect {
                        block: b.name.clone(),
                        level: l.clone(),
                    },
                });
            }
        }
        for (name, _) in &self.covariates {
            cols.push(ColumnInfo {
                name: name.clone(),
                role: ColumnRole::Covariate,
            });
        }
        cols
    }

    pub fn columns(&self) -> &[ColumnInfo] {
        &self.columns
    }

    pub fn response_stats(&self) -> ColumnStats {
        self.response
    }

    pub fn covariate_stats(&self, name: &str) -> Option<ColumnStats> {
        self.covariates
            .iter()
            .find(|(c, _)| c == name)
            .map(|(_, s)| *s)
    }

    pub fn reference_level(&self, block: &str) -> Option<&str> {
        self.blocks
            .iter()
            .find(|b| b.name == block)
            .map(|b| b.reference.as_str())
    }

    /// Builds the design for `rows`. Levels not seen when fitting get all-zero
    /// dummies, i.e. the reference-level effect, and are counted.
    pub fn apply(&self, frame: &Frame, rows: &[usize]) -> Result<DesignMatrix, RegressError> {
        let n = rows.len();
        let p = self.columns.len();
        let mut x = DMatrix::zeros(n, p);
        let y_raw = frame.numeric_col(&self.spec.response)?;
        check_finite(&self.spec.response, y_raw, rows)?;
        let y = DVector::from_iterator(n, rows.iter().map(|&r| self.response.apply(y_raw[r])));
        let mut unseen_levels = BTreeMap::new();
        for i in 0..n {
            x[(i, 0)] = 1.0;
        }
        let mut j = 1;
        for b in &self.blocks {
            let col = frame.categorical_col(&b.name)?;
            for (i, &r) in rows.iter().enumerate() {
                let level = &col[r];
                match b.levels.binary_search(level) {
                    Ok(k) => x[(i, j + k)] = 1.0,
                    Err(_) if *level == b.reference => {}
                    Err(_) => *unseen_levels.entry(b.name.clone()).or_insert(0) += 1,
                }
            }
            j += b.levels.len();
        }
        for (name, stats) in &self.covariates {
            let col = frame.numeric_col(name)?;
            check_finite(name, col, rows)?;
            for (i, &r) in rows.iter().enumerate() {
                x[(i, j)] = stats.apply(col[r]);
            }
            j += 1;
        }
        Ok(DesignMatrix {
            x,
            y,
            columns: self.columns.clone(),
            row_keys: rows.iter().map(|&r| frame.row_keys[r].clone()).collect(),
            unseen_levels,
        })
    }
}

fn check_finite(name: &str, col: &[f64], rows: &[usize]) -> Result<(), RegressError> {
    match rows.iter().find(|&&r| !col[r].is_finite()) {
        Some(&row) => Err(RegressError::NonFinite {
            column: name.to_string(),
            row,
        }),
        None => Ok(()),
    }
}

pub fn fe_column_name(block: &str, level: &str) -> String {
    format!("{block}[{level}]")
}

/// Response plus intercept, one-hot fixed effects and standardized
/// covariates, in that column order.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub columns: Vec<ColumnInfo>,
    pub row_keys: Vec<String>,
    /// Rows whose fixed-effect level was not seen when fitting, by block.
    pub unseen_levels: BTreeMap<String, usize>,
}

impl DesignMatrix {
    /// Assembles a design from raw parts. The first column must be the
    /// intercept.
    pub fn from_parts(
        x: DMatrix<f64>,
        y: DVector<f64>,
        columns: Vec<ColumnInfo>,
    ) -> Result<Self, RegressError> {
        if x.ncols() != columns.len() || x.nrows() != y.len() {
            return Err(RegressError::LengthMismatch {
                column: "design".into(),
                len: x.ncols(),
                n: columns.len(),
            });
        }
        let n = x.nrows();
        Ok(DesignMatrix {
            x,
            y,
            columns,
            row_keys: (0..n).map(|i| i.to_string()).collect(),
            unseen_levels: BTreeMap::new(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn covariate_names(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.penalized())
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn fe_blocks(&self) -> BTreeSet<&str> {
        self.columns
            .iter()
            .filter_map(|c| match &c.role {
                ColumnRole::FixedEffect { block, .. } => Some(block.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r])),
            columns: self.columns.clone(),
            row_keys: rows.iter().map(|&r| self.row_keys[r].clone()).collect(),
            unseen_levels: BTreeMap::new(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x: self.x.select_columns(cols),
            y: self.y.clone(),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            row_keys: self.row_keys.clone(),
            unseen_levels: self.unseen_levels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> Frame {
        let mut f = Frame::new((0..8).map(|i| format!("r{i}")).collect());
        f.push_numeric("y", vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 8.0, 7.0])
            .unwrap();
        f.push_numeric("x", vec![0.5, 1.5, 1.0, 2.0, 3.0, 2.5, 4.0, 3.5])
            .unwrap();
        f.push_numeric("flat", vec![2.0; 8]).unwrap();
        let yr = [
            "2011", "2010", "2011", "2010", "2011", "2010", "2011", "2010",
        ];
        let st = ["NY", "NY", "CA", "CA", "NY", "NY", "CA", "CA"];
        f.push_categorical("year", yr.iter().map(|s| s.to_string()).collect())
            .unwrap();
        f.push_categorical("state", st.iter().map(|s| s.to_string()).collect())
            .unwrap();
        f
    }

    #[test]
    fn standardize_small_column() {
        let z = standardize(&[1.0, 2.0, 3.0], &[0, 1, 2]).unwrap();
        for (a, b) in z.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let twice = standardize(&z, &[0, 1, 2]).unwrap();
        for (a, b) in z.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            standardize(&[4.0; 5], &[0, 1, 2, 3, 4]),
            Err(RegressError::ZeroVariance(_))
        ));
    }

    #[test]
    fn reference_levels_are_dropped() {
        let f = frame();
        let spec = DesignSpec::new("fe", "y", &[], &["year", "state"]);
        let b = DesignBuilder::fit(&f, &spec, &f.all_rows()).unwrap();
        let names: Vec<&str> = b.columns().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["(Intercept)", "year[2011]", "state[NY]"]);
        assert_eq!(b.reference_level("state"), Some("CA"));
    }

    #[test]
    fn covariates_standardized_on_fit_rows() {
        let f = frame();
        let spec = DesignSpec::new("x", "y", &["x", "flat"], &[]);
        let train = [0, 1, 2, 3, 4];
        let b = DesignBuilder::fit(&f, &spec, &train).unwrap();
        assert_eq!(b.diagnostics.dropped_constant, ["flat"]);
        let d = b.apply(&f, &train).unwrap();
        let x: Vec<f64> = d.x.column(1).iter().copied().collect();
        let all: Vec<usize> = (0..x.len()).collect();
        let s = ColumnStats::from_rows(&x, &all);
        assert!(s.mean.abs() < 1e-10 && (s.sd - 1.0).abs() < 1e-10);
        let yv: Vec<f64> = d.y.iter().copied().collect();
        let s = ColumnStats::from_rows(&yv, &all);
        assert!(s.mean.abs() < 1e-10 && (s.sd - 1.0).abs() < 1e-10);
    }

    #[test]
    fn missing_covariate_is_an_error() {
        let f = frame();
        let spec = DesignSpec::new("m", "y", &["nope"], &[]);
        assert_eq!(
            DesignBuilder::fit(&f, &spec, &f.all_rows()).unwrap_err(),
            RegressError::MissingColumn("nope".into())
        );
    }

    #[test]
    fn collinear_columns_named_or_dropped() {
        let mut f = frame();
        let twice: Vec<f64> = f.numeric["x"].iter().map(|v| 2.0 * v - 1.0).collect();
        f.push_numeric("x2", twice).unwrap();
        let spec = DesignSpec::new("c", "y", &["x", "x2"], &["year"]);
        match DesignBuilder::fit(&f, &spec, &f.all_rows()) {
            Err(RegressError::RankDeficient { columns, .. }) => assert_eq!(columns, ["x2"]),
            other => panic!("expected rank error, got {other:?}"),
        }
        let b = DesignBuilder::fit(&f, &spec.dropping_collinear(), &f.all_rows()).unwrap();
        assert_eq!(b.diagnostics.dropped_collinear, ["x2"]);
        assert_eq!(b.columns().len(), 3);
    }

    #[test]
    fn unseen_levels_get_reference_effect() {
        let f = frame();
        let spec = DesignSpec::new("fe", "y", &["x"], &["state"]);
        let train: Vec<usize> = (0..8)
            .filter(|&r| f.categorical["state"][r] == "NY")
            .collect();
        let mut f2 = f.clone();
        f2.categorical.get_mut("state").unwrap()[2] = "TX".into();
        // Only NY in training: the block has no dummies, NY is the reference.
        let b = DesignBuilder::fit(&f2, &spec, &train).unwrap();
        let d = b.apply(&f2, &[2, 3]).unwrap();
        assert_eq!(d.unseen_levels["state"], 2);
    }

    #[test]
    fn basis_solves_least_squares() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 0.0, 1.0, 1.0, 1.0, 2.0],
        );
        let b = Basis::new(&x, 1e-10);
        assert_eq!(b.kept, [0, 1]);
        assert_eq!(b.dependent, [2]);
        let y = DVector::from_vec(vec![1.0, 3.0, 1.0, 3.0]);
        let coef = b.solve(&y);
        let fitted = &x * &coef;
        assert!((fitted - &y).norm() < 1e-12);
        assert!(b.residualize(&y).norm() < 1e-12);
    }
}
