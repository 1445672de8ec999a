use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    attach_inference, inference_refit, lasso_fit, ols_fit, select_lambda, DesignMatrix, LambdaGrid,
    ModelFit, RegressError,
};

/// A regression method applied to a finished design.
pub trait Estimator: Send + Sync {
    fn name(&self) -> &str;

    /// `seed` drives any internal resampling (penalty selection); methods
    /// without randomness ignore it.
    fn fit(&self, design: &DesignMatrix, seed: u64) -> Result<ModelFit, RegressError>;

    /// Whether results depend on the seed.
    fn randomized(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorParams {
    /// Penalty for the fixed-λ LASSO.
    pub lambda: f64,
    pub grid_points: usize,
    pub min_ratio: f64,
    pub inner_folds: usize,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        let grid = LambdaGrid::default();
        EstimatorParams {
            lambda: 0.0,
            grid_points: grid.points,
            min_ratio: grid.min_ratio,
            inner_folds: 5,
        }
    }
}

impl EstimatorParams {
    pub fn grid(&self) -> LambdaGrid {
        LambdaGrid {
            points: self.grid_points,
            min_ratio: self.min_ratio,
        }
    }
}

struct Ols;

impl Estimator for Ols {
    fn name(&self) -> &str {
        "ols"
    }

    fn fit(&self, design: &DesignMatrix, _seed: u64) -> Result<ModelFit, RegressError> {
        ols_fit(design)
    }
}

struct FixedLasso {
    lambda: f64,
}

impl Estimator for FixedLasso {
    fn name(&self) -> &str {
        "lasso"
    }

    fn fit(&self, design: &DesignMatrix, _seed: u64) -> Result<ModelFit, RegressError> {
        lasso_fit(design, self.lambda)
    }
}

/// λ chosen by inner cross-validation, then refit for inference.
struct CvLasso {
    grid: LambdaGrid,
    inner_folds: usize,
}

impl Estimator for CvLasso {
    fn name(&self) -> &str {
        "lasso-cv"
    }

    fn fit(&self, design: &DesignMatrix, seed: u64) -> Result<ModelFit, RegressError> {
        let sel = select_lambda(design, &self.grid, self.inner_folds, seed)?;
        let fit = lasso_fit(design, sel.lambda)?;
        let refit = inference_refit(design, &fit)?;
        let mut out = attach_inference(&fit, &refit);
        out.estimator = "lasso-cv".into();
        Ok(out)
    }

    fn randomized(&self) -> bool {
        true
    }
}

type Factory = fn(&EstimatorParams) -> Box<dyn Estimator>;

/// Estimators by name.
pub struct EstimatorRegistry {
    factories: BTreeMap<String, Factory>,
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        EstimatorRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("ols", |_| Box::new(Ols));
        r.register("lasso", |p| Box::new(FixedLasso { lambda: p.lambda }));
        r.register("lasso-cv", |p| {
            Box::new(CvLasso {
                grid: p.grid(),
                inner_folds: p.inner_folds,
            })
        });
        r
    }

    pub fn register(&mut self, name: &str, factory: Factory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn create(
        &self,
        name: &str,
        params: &EstimatorParams,
    ) -> Result<Box<dyn Estimator>, RegressError> {
        self.factories
            .get(name)
            .map(|f| f(params))
            .ok_or_else(|| RegressError::UnknownEstimator {
                name: name.to_string(),
                available: self.names(),
            })
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_registered() {
        let r = EstimatorRegistry::with_builtins();
        assert_eq!(r.names(), ["lasso", "lasso-cv", "ols"]);
        let e = r.create("lasso-cv", &EstimatorParams::default()).unwrap();
        assert_eq!(e.name(), "lasso-cv");
        assert!(matches!(
            r.create("ridge", &EstimatorParams::default()),
            Err(RegressError::UnknownEstimator { .. })
        ));
    }
}
