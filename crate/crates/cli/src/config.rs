use std::path::{Path, PathBuf};

use laborflux::evaluate::AnalysisConfig;
use laborflux::ingest::InputPaths;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Pipeline run settings. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required by any stage that draws random numbers.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub inputs: InputPaths,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.inputs = cfg.inputs.resolved(base);
        cfg.output = cfg
            .output
            .map(|o| if o.is_absolute() { o } else { base.join(o) });
        Ok(cfg)
    }

    /// Inputs under the generator's standard file names.
    pub fn for_data_dir(dir: &Path) -> Self {
        let mut inputs = InputPaths::in_dir(dir);
        if !inputs.separations.as_ref().is_some_and(|p| p.exists()) {
            inputs.separations = None;
        }
        if !inputs.taxonomy.as_ref().is_some_and(|p| p.exists()) {
            inputs.taxonomy = None;
        }
        RunConfig {
            seed: None,
            output: None,
            inputs,
            analysis: AnalysisConfig::default(),
        }
    }

    /// Every referenced input file must exist.
    pub fn check_paths(&self) -> Result<(), CliError> {
        let i = &self.inputs;
        let mut paths = vec![&i.employment, &i.claims, &i.urate, &i.skills, &i.exposure];
        paths.extend(i.taxonomy.as_ref());
        paths.extend(i.separations.as_ref());
        for p in paths {
            if !p.is_file() {
                return Err(CliError::Config(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn require_seed(&self, stage: &str) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config(format!(
                "{stage} is randomized; set `seed` in the config or pass --seed"
            ))
        })
    }

    pub fn output_dir(&self) -> Result<&Path, CliError> {
        self.output.as_deref().ok_or_else(|| {
            CliError::Config("no output directory; set `output` or pass --out".into())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
output = "out"

[inputs]
employment = "d/employment.csv"
claims = "d/claims.csv"
urate = "d/urate.csv"
skills = "d/skills.csv"
exposure = "d/exposure.csv"

[analysis]
pca_k = 4
cv_trials = 2
"#;

    #[test]
    fn parses_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(
            cfg.output.as_deref(),
            Some(dir.path().join("out").as_path())
        );
        assert_eq!(cfg.inputs.claims, dir.path().join("d/claims.csv"));
        assert_eq!(cfg.analysis.pca_k, 4);
        assert_eq!(cfg.analysis.cv_folds, 10);
        assert!(matches!(cfg.check_paths(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_and_missing_files_are_config_errors() {
        let bad = MINIMAL.replace("pca_k", "pca_kk");
        assert!(matches!(
            RunConfig::from_toml(&bad, "t"),
            Err(CliError::Config(_))
        ));
        let err = RunConfig::load(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/run.toml"));
    }

    #[test]
    fn seed_required_when_absent() {
        let mut cfg = RunConfig::from_toml(MINIMAL, "t").unwrap();
        cfg.seed = None;
        assert!(cfg.require_seed("cv").is_err());
    }
}
