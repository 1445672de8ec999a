use std::collections::BTreeSet;
use std::path::Path;

use laborflux::evaluate::{
    self, complete_rows, cross_validate, outcome_regressions, prepare, run_model_suite,
    skill_change_frame, skill_pcs, AnalysisConfig, CvOptions, Outcome, StandardizeScope, SuiteSpec,
};
use laborflux::ingest::{self, schema};
use laborflux::model::LaborPanels;
use laborflux::regress::{Estimator, EstimatorRegistry, RegressionTable};
use laborflux::risk;
use laborflux::rng;
use laborflux::skills::{self, PcaOptions};
use laborflux::synth::{self, SynthConfig};

use crate::{CliError, ModelArgs, RunArgs, RunConfig};

/// Config file, then `--data`, `--out` and `--seed` overrides.
fn resolve(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match (&args.config, &args.data) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(dir)) => RunConfig::for_data_dir(dir),
        (None, None) => {
            return Err(CliError::Config(
                "no inputs; pass --config PATH or --data DIR".into(),
            ))
        }
    };
    if let (Some(_), Some(dir)) = (&args.config, &args.data) {
        cfg.inputs = RunConfig::for_data_dir(dir).inputs;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    cfg.check_paths()?;
    Ok(cfg)
}

fn load(cfg: &RunConfig, with_separations: bool) -> Result<LaborPanels, CliError> {
    let (panels, report) = ingest::load_all(&cfg.inputs, with_separations)?;
    if !report.usable {
        return Err(CliError::Data(format!(
            "inputs are not usable: {} missing cells, low-coverage scores [{}]",
            report.missing_cells.len(),
            report.low_coverage_scores.join(", ")
        )));
    }
    Ok(panels)
}

fn put(out: &Path, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
    ingest::write_bytes(&out.join(rel), bytes)?;
    println!("wrote {}", out.join(rel).display());
    Ok(())
}

fn put_table(out: &Path, stem: &str, t: &RegressionTable) -> Result<(), CliError> {
    put(out, &format!("tables/{stem}.csv"), t.to_csv().as_bytes())?;
    put(out, &format!("tables/{stem}.txt"), t.to_text().as_bytes())
}

fn estimator(
    analysis: &mut AnalysisConfig,
    name: Option<String>,
) -> Result<Box<dyn Estimator>, CliError> {
    if let Some(n) = name {
        analysis.estimator = n;
    }
    Ok(EstimatorRegistry::with_builtins().create(&analysis.estimator, &analysis.lasso)?)
}

fn apply_models(analysis: &mut AnalysisConfig, model: &ModelArgs) {
    if let Some(m) = &model.models {
        analysis.models = Some(m.iter().copied().collect::<BTreeSet<u8>>());
    }
}

pub fn synth(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = SynthConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let data = synth::generate(&cfg)?;
    let files = data.write(out)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

pub fn ingest_check(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let (_, report) = ingest::load_all(&cfg.inputs, true)?;
    for (table, n) in &report.row_counts {
        println!("{table}: {n} rows");
    }
    println!("key collisions: {}", report.key_collisions);
    println!("missing cells: {}", report.missing_cells.len());
    for c in report.missing_cells.iter().take(10) {
        println!("  {c}");
    }
    for (score, cov) in &report.exposure_coverage {
        println!("coverage {score}: {:.3}", cov);
    }
    if !report.low_coverage_scores.is_empty() {
        println!("low coverage: {}", report.low_coverage_scores.join(", "));
    }
    if report.usable {
        println!("usable");
        Ok(())
    } else {
        Err(CliError::Data("inputs are not usable".into()))
    }
}

pub fn risk(args: &RunArgs, annual: bool) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let out = cfg.output_dir()?;
    let panels = load(&cfg, false)?;
    let panel = risk::unemployment_risk(&panels)?;
    let d = &panel.diagnostics;
    println!("risk rows: {} of {} cells", panel.rows.len(), d.cells);
    println!(
        "excluded: {} without recipients, {} missing inputs, {} singular; {} zero-risk rows lack a log value",
        d.skipped_no_recipients.len(),
        d.skipped_missing_inputs.len(),
        d.rejected_singular.len(),
        d.log_exclusions
    );
    if annual {
        let rows = risk::annual_median(&panel);
        println!("annual rows: {}", rows.len());
        put(
            out,
            "tables/annual_risk.csv",
            &ingest::table_bytes(&rows, &schema::ANNUAL_RISK, true),
        )
    } else {
        put(
            out,
            "tables/risk_panel.csv",
            &ingest::table_bytes(&panel.rows, &schema::RISK, true),
        )
    }
}

pub fn exposure(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let out = cfg.output_dir()?;
    let panels = load(&cfg, false)?;
    let scores = evaluate::analysis_scores(&panels, &cfg.analysis)?;
    let ex = risk::state_exposure(&panels, &scores)?;
    println!(
        "state exposure: {} values, {} rejected",
        ex.values.len(),
        ex.rejected.len()
    );
    for r in ex.rejected.iter().take(10) {
        println!("  {r}");
    }
    put(
        out,
        "tables/state_exposure.csv",
        &ingest::table_bytes(&ex.rows(), &schema::STATE_EXPOSURE, true),
    )
}

pub fn pca(args: &RunArgs, k: Option<usize>) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let out = cfg.output_dir()?;
    let panels = load(&cfg, false)?;
    let k = k.unwrap_or(cfg.analysis.pca_k);
    let pcs = skill_pcs(
        &panels,
        k,
        PcaOptions {
            scale_columns: cfg.analysis.pca_scale_columns,
        },
    )?;
    let m = &pcs.model;
    println!(
        "rank {}, {} components explain {:.4} of skill variance",
        m.rank,
        m.k(),
        m.cumulative_explained(m.k())
    );
    put(
        out,
        "tables/pca_components.csv",
        &ingest::table_bytes(&m.component_rows(), &schema::PCA_COMPONENTS, true),
    )?;
    put(
        out,
        "tables/pca_variance.csv",
        &ingest::table_bytes(&m.variance_rows(), &schema::PCA_VARIANCE, true),
    )
}

pub fn skill_change(
    args: &RunArgs,
    baseline: Option<i32>,
    max_year: Option<i32>,
) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let out = cfg.output_dir()?;
    let panels = load(&cfg, false)?;
    let baseline = baseline.unwrap_or(cfg.analysis.skill_baseline_year);
    let max_year = max_year.unwrap_or(cfg.analysis.skill_max_year);
    let set = skills::skill_change_dataset(&panels.skills, baseline, max_year);
    println!(
        "skill change rows: {} (never updated {}, updated after {max_year} {}, missing {baseline} profile {})",
        set.rows.len(),
        set.never_updated,
        set.updated_after_window,
        set.missing_baseline
    );
    put(
        out,
        "tables/skill_change_rows.csv",
        &ingest::table_bytes(&set.rows, &schema::SKILL_CHANGE, true),
    )?;
    let scores = evaluate::analysis_scores(&panels, &cfg.analysis)?;
    let frame = skill_change_frame(&set, &panels, &scores)?;
    let res = outcome_regressions(&frame, Outcome::SkillChange, &scores)?;
    put_table(out, Outcome::SkillChange.stem(), &res.table())
}

pub fn regress(args: &RunArgs, model: &ModelArgs) -> Result<(), CliError> {
    let mut cfg = resolve(args)?;
    let out = cfg.output_dir()?.to_path_buf();
    let est = estimator(&mut cfg.analysis, model.estimator.clone())?;
    let seed = if est.randomized() {
        cfg.require_seed(&format!("estimator {}", est.name()))?
    } else {
        cfg.seed.unwrap_or(0)
    };
    apply_models(&mut cfg.analysis, model);
    let panels = load(&cfg, false)?;
    let prep = prepare(&panels, &cfg.analysis)?;
    let spec = SuiteSpec::from_risk_frame(&prep.frame);
    // Same seed path as the suite inside `analyze`.
    let suite = run_model_suite(
        &prep.frame.frame,
        &spec,
        est.as_ref(),
        cfg.analysis.models.as_ref(),
        rng::derive_seed(seed, &[1]),
    )?;
    println!("regression rows: {}", suite.rows);
    for f in suite.headline() {
        println!("{}: R² = {:.4}", f.name, f.fit.r2);
    }
    for f in &suite.simple {
        println!("{}: R² = {:.4}", f.name, f.fit.r2);
    }
    for (stem, t) in suite.tables() {
        put_table(&out, &stem, &t)?;
    }
    Ok(())
}

pub fn cv(
    args: &RunArgs,
    estimator_name: Option<String>,
    trials: Option<usize>,
    folds: Option<usize>,
    scope: Option<StandardizeScope>,
) -> Result<(), CliError> {
    let mut cfg = resolve(args)?;
    let out = cfg.output_dir()?.to_path_buf();
    let seed = cfg.require_seed("cross-validation")?;
    let est = estimator(&mut cfg.analysis, estimator_name)?;
    let a = &mut cfg.analysis;
    a.cv_trials = trials.unwrap_or(a.cv_trials);
    a.cv_folds = folds.unwrap_or(a.cv_folds);
    a.standardize = scope.unwrap_or(a.standardize);
    let panels = load(&cfg, false)?;
    let prep = prepare(&panels, &cfg.analysis)?;
    let spec = SuiteSpec::from_risk_frame(&prep.frame);
    let rows = complete_rows(&prep.frame.frame, &spec.all_columns())?;
    let opts = CvOptions {
        trials: cfg.analysis.cv_trials,
        folds: cfg.analysis.cv_folds,
        seed: rng::derive_seed(seed, &[2]),
        scope: cfg.analysis.standardize,
    };
    let rep = cross_validate(
        &prep.frame.frame,
        &[spec.model2(), spec.model3()],
        &rows,
        est.as_ref(),
        &opts,
        &[(0, 1)],
    )?;
    for m in &rep.models {
        println!(
            "{}: mean out-of-sample R² {:.4} (sd {:.4}, {} values)",
            m.name,
            m.mean,
            m.sd,
            m.r2.len()
        );
    }
    for c in &rep.comparisons {
        println!(
            "{} vs {}: t = {:.3}, p = {:.3e}, factor improvement {:.4}",
            c.full, c.base, c.t, c.p, c.factor_improvement
        );
    }
    for (block, n) in &rep.unseen_levels {
        println!("unseen {block} levels scored at reference: {n}");
    }
    put(&out, "tables/cv_r2.csv", rep.to_csv().as_bytes())
}

pub fn analyze(args: &RunArgs, model: &ModelArgs) -> Result<(), CliError> {
    let mut cfg = resolve(args)?;
    let out = cfg.output_dir()?.to_path_buf();
    let est = estimator(&mut cfg.analysis, model.estimator.clone())?;
    apply_models(&mut cfg.analysis, model);
    let seed = if cfg.analysis.stages.cv || (cfg.analysis.stages.suite && est.randomized()) {
        cfg.require_seed("analyze")?
    } else {
        cfg.seed.unwrap_or(0)
    };
    let panels = load(&cfg, true)?;
    let report = evaluate::analyze(&panels, &cfg.analysis, seed, &out)?;
    for h in &report.headline {
        println!("{}: R² = {:.4} (n = {})", h.name, h.r2, h.n);
    }
    for s in &report.skipped {
        println!("skipped {s}");
    }
    println!("wrote {} files under {}", report.files.len(), out.display());
    Ok(())
}
