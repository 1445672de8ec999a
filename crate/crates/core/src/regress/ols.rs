use nalgebra::DMatrix;

use super::{r_squared, DesignMatrix, Inference, InferenceMethod, ModelFit, RegressError};
use crate::stats;

/// Least squares via Householder QR. Standard errors from σ²(XᵀX)⁻¹ with
/// σ² = SSR/(n − p).
pub fn ols_fit(design: &DesignMatrix) -> Result<ModelFit, RegressError> {
    let (n, p) = design.x.shape();
    if n <= p {
        return Err(RegressError::TooFewRows { n, p });
    }
    let qr = design.x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if scale == 0.0 || r.diagonal().iter().any(|d| d.abs() <= 1e-10 * scale) {
        return Err(RegressError::Singular);
    }
    let mut qty = design.y.clone();
    qr.q_tr_mul(&mut qty);
    let qty = qty.rows(0, p).clone_owned();
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(RegressError::Singular)?;
    let fitted = &design.x * &beta;
    let (r2, adj_r2, ssr) = r_squared(&design.y, &fitted, p - 1);
    let df = (n - p) as f64;
    let sigma2 = ssr / df;

    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(RegressError::Singular)?;
    let mut se = Vec::with_capacity(p);
    let mut t = Vec::with_capacity(p);
    let mut pv = Vec::with_capacity(p);
    for j in 0..p {
        let s = (sigma2 * rinv.row(j).norm_squared()).sqrt();
        let tj = beta[j] / s;
        se.push(Some(s));
        t.push(Some(tj));
        pv.push(Some(if s > 0.0 {
            stats::student_t_two_sided_p(tj, df)
        } else if beta[j] == 0.0 {
            1.0
        } else {
            0.0
        }));
    }
    Ok(ModelFit {
        estimator: "ols".into(),
        columns: design.columns.clone(),
        beta: beta.iter().copied().collect(),
        inference: Some(Inference {
            method: InferenceMethod::Ols,
            df,
            se,
            t,
            p: pv,
        }),
        r2,
        adj_r2,
        sigma2,
        n,
        lasso: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{ColumnInfo, ColumnRole};
    use crate::rng;
    use nalgebra::DVector;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn cols(k: usize) -> Vec<ColumnInfo> {
        let mut c = vec![ColumnInfo {
            name: "(Intercept)".into(),
            role: ColumnRole::Intercept,
        }];
        for j in 0..k {
            c.push(ColumnInfo {
                name: format!("x{j}"),
                role: ColumnRole::Covariate,
            });
        }
        c
    }

    fn simple(xs: &[f64], ys: &[f64]) -> DesignMatrix {
        let n = xs.len();
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        DesignMatrix::from_parts(x, DVector::from_column_slice(ys), cols(1)).unwrap()
    }

    #[test]
    fn three_point_slope_matches_closed_form() {
        let (xs, ys) = ([0.0, 1.0, 2.0], [0.0, 1.0, 2.2]);
        let fit = ols_fit(&simple(&xs, &ys)).unwrap();
        let (mx, my) = (1.0, 3.2 / 3.0);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        assert!((fit.coef("x0").unwrap() - sxy / sxx).abs() < 1e-12);
    }

    #[test]
    fn exact_linear_data() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.37 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 1.5 * x).collect();
        let d = simple(&xs, &ys);
        let fit = ols_fit(&d).unwrap();
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        let resid = &d.y - fit.predict(&d).unwrap();
        assert!(resid.amax() < 1e-10);
    }

    #[test]
    fn noise_regression_is_null() {
        let mut rng = rng::stream(11, &[]);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let xs = crate::regress::standardize(&xs, &(0..n).collect::<Vec<_>>()).unwrap();
        let fit = ols_fit(&simple(&xs, &ys)).unwrap();
        assert!(fit.coef("x0").unwrap().abs() < 0.05);
        assert!(fit.r2 < 0.01);
    }

    #[test]
    fn r2_is_squared_correlation_and_adj_below() {
        let mut rng = rng::stream(5, &[]);
        let n = 60;
        let x = DMatrix::from_fn(n, 4, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.sample(StandardNormal)
            }
        });
        let y = DVector::from_fn(n, |i, _| {
            x[(i, 1)] - 0.5 * x[(i, 3)] + rng.sample::<f64, _>(StandardNormal)
        });
        let d = DesignMatrix::from_parts(x, y, cols(3)).unwrap();
        let fit = ols_fit(&d).unwrap();
        let f: Vec<f64> = fit.predict(&d).unwrap().iter().copied().collect();
        let yv: Vec<f64> = d.y.iter().copied().collect();
        let r = stats::pearson(&f, &yv).unwrap();
        assert!((r * r - fit.r2).abs() < 1e-10);
        assert!(fit.adj_r2 <= fit.r2);
    }

    #[test]
    fn singular_design_rejected() {
        let x = DMatrix::from_fn(5, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64,
        });
        let d = DesignMatrix::from_parts(x, DVector::from_fn(5, |i, _| i as f64), cols(2)).unwrap();
        assert_eq!(ols_fit(&d).unwrap_err(), RegressError::Singular);
    }
}
