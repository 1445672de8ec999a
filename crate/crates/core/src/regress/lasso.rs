//! Coordinate descent for
//!
//! ```text
//! (1/2n) ‖y − Xβ‖² + λ ‖β_cov‖₁
//! ```
//!
//! where only covariate columns are penalized. The intercept and
//! fixed-effect dummies are partialled out first (Frisch–Waugh–Lovell), so
//! descent runs on the residualized covariates only, using their Gram
//! matrix.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::design::Basis;
use super::{
    ols_fit, r_squared, DesignMatrix, Inference, InferenceMethod, LassoInfo, ModelFit,
    RegressError, COLLINEARITY_TOLERANCE,
};
use crate::rng;

/// Sweeps stop once no coefficient moves by this much.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-7;
pub const MAX_SWEEPS: usize = 100_000;

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Keep the objective value after every sweep (index 0 is the start).
    pub record_trace: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tolerance: CONVERGENCE_TOLERANCE,
            max_sweeps: MAX_SWEEPS,
            record_trace: false,
        }
    }
}

/// A design reduced to its penalized part.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    n: usize,
    ncols: usize,
    penalized: Vec<usize>,
    unpenalized: Vec<usize>,
    gram: DMatrix<f64>,
    c: DVector<f64>,
    yy: f64,
    /// Unpenalized coefficients are `a − B β`.
    a: DVector<f64>,
    b: DMatrix<f64>,
    unpenalized_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solve {
    pub sweeps: usize,
    pub gap: f64,
    pub trace: Vec<f64>,
}

impl LassoProblem {
    /// Prepares the problem on `rows` of the design (all rows if `None`).
    pub fn new(design: &DesignMatrix, rows: Option<&[usize]>) -> Self {
        let (x, y) = match rows {
            Some(r) => (
                design.x.select_rows(r),
                DVector::from_iterator(r.len(), r.iter().map(|&i| design.y[i])),
            ),
            None => (design.x.clone(), design.y.clone()),
        };
        let n = x.nrows();
        let penalized: Vec<usize> = (0..design.ncols())
            .filter(|&j| design.columns[j].penalized())
            .collect();
        let unpenalized: Vec<usize> = (0..design.ncols())
            .filter(|&j| !design.columns[j].penalized())
            .collect();
        let u = x.select_columns(&unpenalized);
        let xp = x.select_columns(&penalized);
        let basis = Basis::new(&u, COLLINEARITY_TOLERANCE);
        let yt = basis.residualize(&y);
        let k = penalized.len();
        let mut xt = DMatrix::zeros(n, k);
        let mut b = DMatrix::zeros(unpenalized.len(), k);
        for j in 0..k {
            let col = xp.column(j).clone_owned();
            xt.set_column(j, &basis.residualize(&col));
            b.set_column(j, &basis.solve(&col));
        }
        let nf = n as f64;
        LassoProblem {
            n,
            ncols: design.ncols(),
            gram: xt.tr_mul(&xt) / nf,
            c: xt.tr_mul(&yt) / nf,
            yy: yt.norm_squared() / nf,
            a: basis.solve(&y),
            b,
            unpenalized_rank: basis.rank(),
            penalized,
            unpenalized,
        }
    }

    pub fn n_penalized(&self) -> usize {
        self.penalized.len()
    }

    /// Smallest λ at which every penalized coefficient is zero.
    pub fn lambda_max(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        let b = DVector::from_column_slice(beta);
        let quad = b.dot(&(&self.gram * &b));
        let l1: f64 = beta.iter().map(|v| v.abs()).sum();
        0.5 * self.yy - self.c.dot(&b) + 0.5 * quad + lambda * l1
    }

    /// Objective given `gb = G·beta`, in O(k).
    fn objective_from(&self, beta: &[f64], gb: &DVector<f64>, lambda: f64) -> f64 {
        let mut lin = 0.0;
        let mut quad = 0.0;
        let mut l1 = 0.0;
        for (j, &bj) in beta.iter().enumerate() {
            lin += self.c[j] * bj;
            quad += bj * gb[j];
            l1 += bj.abs();
        }
        0.5 * self.yy - lin + 0.5 * quad + lambda * l1
    }

    /// Largest violation of the optimality conditions.
    pub fn kkt_gap(&self, beta: &[f64], lambda: f64) -> f64 {
        let b = DVector::from_column_slice(beta);
        let g = &self.c - &self.gram * &b;
        beta.iter()
            .zip(g.iter())
            .map(|(&bj, &gj)| {
                if bj != 0.0 {
                    (gj - lambda * bj.signum()).abs()
                } else {
                    (gj.abs() - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Runs coordinate descent from `beta` (warm start) in column order.
    pub fn solve(
        &self,
        lambda: f64,
        beta: &mut [f64],
        opts: &LassoOptions,
    ) -> Result<Solve, RegressError> {
        if !(lambda >= 0.0) {
            return Err(RegressError::NegativeLambda(lambda));
        }
        let k = self.penalized.len();
        assert_eq!(beta.len(), k);
        let mut trace = Vec::new();
        let mut gb = &self.gram * DVector::from_column_slice(beta);
        let mut prev = self.objective_from(beta, &gb, lambda);
        if opts.record_trace {
            trace.push(prev);
        }
        let mut last_beta = beta.to_vec();
        for sweep in 1..=opts.max_sweeps {
            let mut max_delta: f64 = 0.0;
            for j in 0..k {
                let gjj = self.gram[(j, j)];
                if gjj <= 0.0 {
                    continue;
                }
                let rho = self.c[j] - gb[j] + gjj * beta[j];
                let new = soft_threshold(rho, lambda) / gjj;
                let delta = new - beta[j];
                if delta != 0.0 {
                    gb.axpy(delta, &self.gram.column(j), 1.0);
                    beta[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            let obj = self.objective_from(beta, &gb, lambda);
            // Each exact coordinate step cannot raise the objective, so a rise
            // is round-off at the optimum: keep the better iterate and stop.
            if obj > prev {
                beta.copy_from_slice(&last_beta);
                return Ok(Solve {
                    sweeps: sweep,
                    gap: self.kkt_gap(beta, lambda),
                    trace,
                });
            }
            if opts.record_trace {
                trace.push(obj);
            }
            prev = obj;
            if max_delta < opts.tolerance {
                return Ok(Solve {
                    sweeps: sweep,
                    gap: self.kkt_gap(beta, lambda),
                    trace,
                });
            }
            last_beta.copy_from_slice(beta);
        }
        Err(RegressError::NotConverged {
            sweeps: opts.max_sweeps,
            gap: self.kkt_gap(beta, lambda),
        })
    }

    /// Coefficients for every design column given the penalized ones.
    pub fn full_beta(&self, beta: &[f64]) -> Vec<f64> {
        let gamma = &self.a - &self.b * DVector::from_column_slice(beta);
        let mut full = vec![0.0; self.ncols];
        for (i, &j) in self.unpenalized.iter().enumerate() {
            full[j] = gamma[i];
        }
        for (i, &j) in self.penalized.iter().enumerate() {
            full[j] = beta[i];
        }
        full
    }
}

pub fn lambda_max(design: &DesignMatrix) -> f64 {
    LassoProblem::new(design, None).lambda_max()
}

pub fn lasso_fit(design: &DesignMatrix, lambda: f64) -> Result<ModelFit, RegressError> {
    lasso_fit_with(design, lambda, &LassoOptions::default())
}

pub fn lasso_fit_with(
    design: &DesignMatrix,
    lambda: f64,
    opts: &LassoOptions,
) -> Result<ModelFit, RegressError> {
    let problem = LassoProblem::new(design, None);
    let mut beta = vec![0.0; problem.n_penalized()];
    let solve = problem.solve(lambda, &mut beta, opts)?;
    let full = problem.full_beta(&beta);
    let fitted = &design.x * DVector::from_column_slice(&full);
    let support = beta.iter().filter(|b| **b != 0.0).count();
    let k = support + problem.unpenalized_rank.saturating_sub(1);
    let (r2, adj_r2, ssr) = r_squared(&design.y, &fitted, k);
    Ok(ModelFit {
        estimator: "lasso".into(),
        columns: design.columns.clone(),
        beta: full,
        inference: None,
        r2,
        adj_r2,
        sigma2: ssr / (problem.n as f64 - k as f64 - 1.0),
        n: problem.n,
        lasso: Some(LassoInfo {
            lambda,
            sweeps: solve.sweeps,
            gap: solve.gap,
            objective_trace: solve.trace,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaGrid {
    pub points: usize,
    /// Smallest grid value as a fraction of λ_max.
    pub min_ratio: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            points: 20,
            min_ratio: 1e-4,
        }
    }
}

/// Log-spaced, descending from `lambda_max`.
pub fn lambda_grid(lambda_max: f64, grid: &LambdaGrid) -> Vec<f64> {
    let m = grid.points.max(1);
    if m == 1 {
        return vec![lambda_max];
    }
    (0..m)
        .map(|i| lambda_max * grid.min_ratio.powf(i as f64 / (m - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub index: usize,
    pub grid: Vec<f64>,
    pub cv_mse: Vec<f64>,
}

/// Picks λ by k-fold cross-validation over the grid, minimizing mean
/// held-out MSE. Ties go to the larger λ.
pub fn select_lambda(
    design: &DesignMatrix,
    grid: &LambdaGrid,
    folds: usize,
    seed: u64,
) -> Result<LambdaSelection, RegressError> {
    let n = design.nrows();
    let full = LassoProblem::new(design, None);
    let lmax = full.lambda_max();
    if full.n_penalized() == 0 || lmax == 0.0 {
        return Ok(LambdaSelection {
            lambda: 0.0,
            index: 0,
            grid: vec![0.0],
            cv_mse: vec![f64::NAN],
        });
    }
    let folds = folds.min(n);
    if folds < 2 {
        return Err(RegressError::TooFewRows { n, p: 2 });
    }
    let lambdas = lambda_grid(lmax, grid);
    let assignment = rng::fold_assignment(n, folds, seed);
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            let problem = LassoProblem::new(design, Some(&train));
            let xt = design.x.select_rows(&test);
            let yt = DVector::from_iterator(test.len(), test.iter().map(|&i| design.y[i]));
            let mut beta = vec![0.0; problem.n_penalized()];
            lambdas
                .iter()
                .map(|&l| {
                    problem.solve(l, &mut beta, &LassoOptions::default())?;
                    let pred = &xt * DVector::from_column_slice(&problem.full_beta(&beta));
                    Ok((&yt - pred).norm_squared() / test.len() as f64)
                })
                .collect::<Result<Vec<f64>, RegressError>>()
        })
        .collect::<Result<_, _>>()?;
    let cv_mse: Vec<f64> = (0..lambdas.len())
        .map(|i| per_fold.iter().map(|f| f[i]).sum::<f64>() / folds as f64)
        .collect();
    let mut index = 0;
    for i in 1..cv_mse.len() {
        if cv_mse[i] < cv_mse[index] {
            index = i;
        }
    }
    Ok(LambdaSelection {
        lambda: lambdas[index],
        index,
        grid: lambdas,
        cv_mse,
    })
}

/// OLS on the intercept, fixed effects and the covariates the LASSO kept.
pub fn inference_refit(design: &DesignMatrix, lasso: &ModelFit) -> Result<ModelFit, RegressError> {
    if design.columns != lasso.columns {
        return Err(RegressError::ColumnMismatch);
    }
    let keep: Vec<usize> = (0..design.ncols())
        .filter(|&j| !design.columns[j].penalized() || lasso.beta[j] != 0.0)
        .collect();
    let sub = ols_fit(&design.select_columns(&keep))?;
    let p = design.ncols();
    let mut beta = vec![0.0; p];
    let inf = sub.inference.as_ref().expect("ols reports inference");
    let mut se = vec![None; p];
    let mut t = vec![None; p];
    let mut pv = vec![None; p];
    for (i, &j) in keep.iter().enumerate() {
        beta[j] = sub.beta[i];
        se[j] = inf.se[i];
        t[j] = inf.t[i];
        pv[j] = inf.p[i];
    }
    Ok(ModelFit {
        estimator: "ols-refit".into(),
        columns: design.columns.clone(),
        beta,
        inference: Some(Inference {
            method: InferenceMethod::PostSelectionRefit,
            df: inf.df,
            se,
            t,
            p: pv,
        }),
        ..sub
    })
}

/// LASSO point estimates carrying the refit's standard errors and p-values.
pub fn attach_inference(lasso: &ModelFit, refit: &ModelFit) -> ModelFit {
    let mut out = lasso.clone();
    let mut inf = refit.inference.clone().expect("refit reports inference");
    inf.method = InferenceMethod::PostSelectionRefit;
    for j in 0..out.beta.len() {
        if out.columns[j].penalized() && out.beta[j] == 0.0 {
            inf.se[j] = None;
            inf.t[j] = None;
            inf.p[j] = None;
        }
    }
    out.inference = Some(inf);
    out
}
