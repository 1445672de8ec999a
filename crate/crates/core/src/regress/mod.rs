//! Design matrices with fixed effects, ordinary least squares, and
//! L1-penalized least squares by coordinate descent.

mod design;
mod estimator;
mod lasso;
mod ols;
mod table;

pub use design::{
    fe_column_name, standardize, Collinearity, ColumnInfo, ColumnRole, ColumnStats, DesignBuilder,
    DesignDiagnostics, DesignMatrix, DesignSpec, Frame, COLLINEARITY_TOLERANCE,
};
pub use estimator::{Estimator, EstimatorParams, EstimatorRegistry};
pub use lasso::{
    attach_inference, inference_refit, lambda_grid, lambda_max, lasso_fit, lasso_fit_with,
    select_lambda, soft_threshold, LambdaGrid, LambdaSelection, LassoOptions, LassoProblem,
    CONVERGENCE_TOLERANCE, MAX_SWEEPS,
};
pub use ols::ols_fit;
pub use table::{stars, RegressionTable, TableColumn};

use nalgebra::DVector;
use serde::Serialize;

use crate::stats;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegressError {
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("column `{column}` has {len} entries, expected {n}")]
    LengthMismatch {
        column: String,
        len: usize,
        n: usize,
    },
    #[error("column `{column}` is not finite at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("`{0}` has zero variance")]
    ZeroVariance(String),
    #[error("design `{design}` is rank deficient; dependent columns: {}", columns.join(", "))]
    RankDeficient {
        design: String,
        columns: Vec<String>,
    },
    #[error("normal equations are singular")]
    Singular,
    #[error("{n} rows cannot support {p} parameters")]
    TooFewRows { n: usize, p: usize },
    #[error("coordinate descent did not converge in {sweeps} sweeps (KKT gap {gap:.3e})")]
    NotConverged { sweeps: usize, gap: f64 },
    #[error("penalty must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("unknown estimator `{name}` (available: {})", available.join(", "))]
    UnknownEstimator {
        name: String,
        available: Vec<String>,
    },
    #[error("fit and design columns differ")]
    ColumnMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMethod {
    /// Classical OLS standard errors, no clustering.
    Ols,
    /// OLS refit on the LASSO support; approximate, ignores selection.
    PostSelectionRefit,
}

/// Standard errors and tests, one entry per design column. `None` for
/// coefficients that were not estimated (outside the LASSO support).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inference {
    pub method: InferenceMethod,
    pub df: f64,
    pub se: Vec<Option<f64>>,
    pub t: Vec<Option<f64>>,
    pub p: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoInfo {
    pub lambda: f64,
    pub sweeps: usize,
    /// Largest KKT violation at the returned solution.
    pub gap: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFit {
    pub estimator: String,
    pub columns: Vec<ColumnInfo>,
    pub beta: Vec<f64>,
    pub inference: Option<Inference>,
    pub r2: f64,
    pub adj_r2: f64,
    pub sigma2: f64,
    pub n: usize,
    pub lasso: Option<LassoInfo>,
}

impl ModelFit {
    fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn intercept(&self) -> f64 {
        self.beta[0]
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index(name).map(|j| self.beta[j])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        let j = self.index(name)?;
        self.inference.as_ref()?.se[j]
    }

    pub fn p_value(&self, name: &str) -> Option<f64> {
        let j = self.index(name)?;
        self.inference.as_ref()?.p[j]
    }

    /// Two-sided confidence interval from the t distribution.
    pub fn conf_int(&self, name: &str, level: f64) -> Option<(f64, f64)> {
        let b = self.coef(name)?;
        let se = self.se(name)?;
        let df = self.inference.as_ref()?.df;
        let q = stats::student_t_quantile(0.5 + level / 2.0, df);
        Some((b - q * se, b + q * se))
    }

    pub fn covariate_names(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.penalized())
            .map(|c| c.name.as_str())
            .collect()
    }

    /// Number of covariates (not fixed effects) with a nonzero coefficient.
    pub fn support_size(&self) -> usize {
        self.columns
            .iter()
            .zip(&self.beta)
            .filter(|(c, b)| c.penalized() && **b != 0.0)
            .count()
    }

    pub fn predict(&self, design: &DesignMatrix) -> Result<DVector<f64>, RegressError> {
        if design.columns != self.columns {
            return Err(RegressError::ColumnMismatch);
        }
        Ok(&design.x * DVector::from_column_slice(&self.beta))
    }
}

/// R² = 1 − SSR/SST and adjusted R² with `k` non-intercept parameters.
pub(crate) fn r_squared(y: &DVector<f64>, fitted: &DVector<f64>, k: usize) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr = (y - fitted).norm_squared();
    let r2 = 1.0 - ssr / sst;
    let adj = 1.0 - (1.0 - r2) * (n - 1.0) / (n - k as f64 - 1.0);
    (r2, adj, ssr)
}

/// Out-of-sample R² against the test-set mean.
pub fn oos_r_squared(y: &DVector<f64>, predicted: &DVector<f64>) -> f64 {
    r_squared(y, predicted, 0).0
}
