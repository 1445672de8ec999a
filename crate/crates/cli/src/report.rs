use std::fmt::Write;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

pub fn print(path: &Path) -> Result<(), CliError> {
    let file = if path.is_dir() {
        path.join("report.json")
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", file.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?;
    print!("{}", render(&v));
    Ok(())
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) if x.fract() == 0.0 && x.abs() < 1e15 => format!("{x:.0}"),
        Some(x) => format!("{x:.4}"),
        None if v.is_null() => "n/a".into(),
        None => v.to_string(),
    }
}

fn pvalue(v: &Value) -> String {
    v.as_f64()
        .map_or_else(|| "n/a".into(), |p| format!("{p:.3e}"))
}

fn list(v: &Value) -> String {
    v.as_array()
        .map(|a| {
            a.iter()
                .map(|x| x.as_str().map_or_else(|| x.to_string(), str::to_string))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .unwrap_or_default()
}

/// Plain-text digest of `report.json`.
pub fn render(r: &Value) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Analysis report (seed {})", num(&r["seed"]));
    let _ = writeln!(s, "Scores: {}", list(&r["scores"]));

    let risk = &r["risk"];
    let _ = writeln!(
        s,
        "\nRisk panel: {} rows of {} cells; {} rows in regressions",
        num(&risk["rows"]),
        num(&risk["cells"]),
        num(&risk["regression_rows"])
    );
    let _ = writeln!(
        s,
        "  excluded: {} without recipients, {} missing inputs, {} singular, {} zero risk",
        num(&risk["skipped_no_recipients"]),
        num(&risk["skipped_missing_inputs"]),
        num(&risk["rejected_singular"]),
        num(&risk["log_exclusions"])
    );

    if let Some(p) = r.get("pca").filter(|p| !p.is_null()) {
        let _ = writeln!(
            s,
            "Skill PCA: {} components (rank {}) explain {}",
            num(&p["k"]),
            num(&p["rank"]),
            num(&p["cumulative"])
        );
    }
    if let Some(c) = r.get("correlations").filter(|c| !c.is_null()) {
        let _ = writeln!(
            s,
            "Score correlations: mean r² {}, median r² {}",
            num(&c["mean_r2"]),
            num(&c["median_r2"])
        );
    }

    if let Some(h) = r["headline"].as_array().filter(|h| !h.is_empty()) {
        let _ = writeln!(s, "\nHeadline models");
        let _ = writeln!(
            s,
            "  {:<10} {:<10} {:>8} {:>8} {:>8} {:>8}  fixed effects",
            "model", "estimator", "n", "R²", "adj R²", "support"
        );
        for m in h {
            let _ = writeln!(
                s,
                "  {:<10} {:<10} {:>8} {:>8} {:>8} {:>8}  {}",
                m["name"].as_str().unwrap_or(""),
                m["estimator"].as_str().unwrap_or(""),
                num(&m["n"]),
                num(&m["r2"]),
                num(&m["adj_r2"]),
                num(&m["support"]),
                list(&m["fixed_effects"])
            );
        }
    }
    for (key, title) in [
        ("simple_r2", "Single-score models (R²)"),
        ("per_score_r2", "Baseline plus one score (R²)"),
    ] {
        if let Some(m) = r[key].as_object().filter(|m| !m.is_empty()) {
            let _ = writeln!(s, "\n{title}");
            for (name, v) in m {
                let _ = writeln!(s, "  {name:<24} {}", num(v));
            }
        }
    }

    if let Some(cv) = r.get("cv").filter(|c| !c.is_null()) {
        let _ = writeln!(
            s,
            "\nCross-validation: {} trials × {} folds over {} rows",
            num(&cv["trials"]),
            num(&cv["folds"]),
            num(&cv["rows"])
        );
        for m in cv["models"].as_array().into_iter().flatten() {
            let _ = writeln!(
                s,
                "  {:<10} mean R² {} (sd {})",
                m["name"].as_str().unwrap_or(""),
                num(&m["mean"]),
                num(&m["sd"])
            );
        }
        for c in cv["comparisons"].as_array().into_iter().flatten() {
            let _ = writeln!(
                s,
                "  {} vs {}: t = {}, p = {}, factor improvement {}",
                c["full"].as_str().unwrap_or(""),
                c["base"].as_str().unwrap_or(""),
                num(&c["t"]),
                pvalue(&c["p"]),
                num(&c["factor_improvement"])
            );
        }
    }

    if let Some(st) = r["strata"].as_array().filter(|a| !a.is_empty()) {
        let _ = writeln!(s, "\nStratified fits");
        for t in st {
            let _ = writeln!(
                s,
                "  {:<6} {:<20} fitted {}, skipped {}, p-filtered {}, extreme {}",
                t["axis"].as_str().unwrap_or(""),
                t["score"].as_str().unwrap_or(""),
                num(&t["fitted"]),
                num(&t["skipped"]),
                num(&t["reported"]),
                t["extreme"].as_str().unwrap_or("n/a")
            );
        }
    }

    if let Some(out) = r["outcomes"].as_array().filter(|a| !a.is_empty()) {
        let _ = writeln!(s, "\nOutcome regressions");
        for o in out {
            let _ = writeln!(
                s,
                "  {} ({} rows): combined R² {}",
                o["outcome"].as_str().unwrap_or(""),
                num(&o["rows"]),
                num(&o["combined_r2"])
            );
            let dropped = list(&o["dropped_collinear"]);
            if !dropped.is_empty() {
                let _ = writeln!(s, "    dropped as collinear: {dropped}");
            }
        }
    }
    if let Some(sc) = r.get("skill_change").filter(|c| !c.is_null()) {
        let _ = writeln!(
            s,
            "\nSkill change {}..={}: {} rows; never updated {}, updated later {}, missing baseline {}",
            num(&sc["baseline_year"]),
            num(&sc["max_year"]),
            num(&sc["rows"]),
            num(&sc["never_updated"]),
            num(&sc["updated_after_window"]),
            num(&sc["missing_baseline"])
        );
    }
    if let Some(sk) = r["skipped"].as_array().filter(|a| !a.is_empty()) {
        let _ = writeln!(s, "\nSkipped");
        for x in sk {
            let _ = writeln!(s, "  {}", x.as_str().unwrap_or(""));
        }
    }
    s
}
