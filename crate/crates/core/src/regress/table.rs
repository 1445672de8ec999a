use serde::Serialize;

use super::{ColumnRole, InferenceMethod, ModelFit};

/// Significance marks: p<0.1 `*`, p<0.01 `**`, p<0.001 `***`.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableColumn {
    pub label: String,
    pub fit: ModelFit,
}

/// Variables down the side, models across the top.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionTable {
    pub title: String,
    pub columns: Vec<TableColumn>,
    /// Covariates whose name starts with a prefix are summarized as one
    /// "Yes" row under the given label.
    pub collapse: Vec<(String, String)>,
    pub notes: Vec<String>,
}

fn fe_label(block: &str) -> String {
    let mut c = block.chars();
    match c.next() {
        Some(f) => format!("{}{} F.E.", f.to_uppercase(), c.as_str()),
        None => "F.E.".into(),
    }
}

impl RegressionTable {
    pub fn new(title: &str) -> Self {
        RegressionTable {
            title: title.to_string(),
            columns: Vec::new(),
            collapse: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, label: &str, fit: ModelFit) {
        self.columns.push(TableColumn {
            label: label.to_string(),
            fit,
        });
    }

    fn collapsed(&self, name: &str) -> Option<&str> {
        self.collapse
            .iter()
            .find(|(prefix, _)| name.starts_with(prefix.as_str()))
            .map(|(_, label)| label.as_str())
    }

    /// Cell grid including the header row.
    pub fn grid(&self) -> Vec<Vec<String>> {
        let mut header = vec![String::new()];
        header.extend(self.columns.iter().map(|c| c.label.clone()));
        let mut rows = vec![header];

        let mut variables: Vec<String> = Vec::new();
        let mut blocks: Vec<String> = Vec::new();
        let mut collapsed: Vec<String> = Vec::new();
        for c in &self.columns {
            for col in &c.fit.columns {
                match &col.role {
                    ColumnRole::Covariate => match self.collapsed(&col.name) {
                        Some(l) if !collapsed.iter().any(|x| x == l) => collapsed.push(l.into()),
                        Some(_) => {}
                        None if !variables.contains(&col.name) => variables.push(col.name.clone()),
                        None => {}
                    },
                    ColumnRole::FixedEffect { block, .. } if !blocks.contains(block) => {
                        blocks.push(block.clone())
                    }
                    _ => {}
                }
            }
        }

        for v in &variables {
            let mut est = vec![v.clone()];
            let mut se = vec![String::new()];
            for c in &self.columns {
                let f = &c.fit;
                match f.coef(v) {
                    Some(b) => {
                        let mark = f.p_value(v).map(stars).unwrap_or("");
                        est.push(format!("{}{mark}", fmt3(b)));
                        se.push(
                            f.se(v)
                                .map(|s| format!("({})", fmt3(s)))
                                .unwrap_or_default(),
                        );
                    }
                    None => {
                        est.push(String::new());
                        se.push(String::new());
                    }
                }
            }
            rows.push(est);
            rows.push(se);
        }
        for label in &collapsed {
            let mut row = vec![label.clone()];
            for c in &self.columns {
                let has = c
                    .fit
                    .covariate_names()
                    .iter()
                    .any(|n| self.collapsed(n) == Some(label.as_str()));
                row.push(if has { "Yes".into() } else { String::new() });
            }
            rows.push(row);
        }
        for b in &blocks {
            let mut row = vec![fe_label(b)];
            for c in &self.columns {
                let has = c.fit.columns.iter().any(
                    |col| matches!(&col.role, ColumnRole::FixedEffect { block, .. } if block == b),
                );
                row.push(if has { "Yes".into() } else { String::new() });
            }
            rows.push(row);
        }
        let stat = |label: &str, f: &dyn Fn(&ModelFit) -> String| {
            let mut row = vec![label.to_string()];
            row.extend(self.columns.iter().map(|c| f(&c.fit)));
            row
        };
        rows.push(stat("R²", &|f| fmt3(f.r2)));
        rows.push(stat("Adjusted R²", &|f| fmt3(f.adj_r2)));
        rows.push(stat("N", &|f| f.n.to_string()));
        rows
    }

    pub fn footer(&self) -> Vec<String> {
        let mut lines = vec![
            "p<0.1*, p<0.01**, p<0.001***; standard errors in parentheses (OLS, unclustered)"
                .to_string(),
        ];
        let refit = self.columns.iter().any(|c| {
            c.fit
                .inference
                .as_ref()
                .is_some_and(|i| i.method == InferenceMethod::PostSelectionRefit)
        });
        if refit {
            lines.push(
                "LASSO significance from an OLS refit on the selected covariates (approximate)"
                    .into(),
            );
        }
        lines.extend(self.notes.iter().cloned());
        lines
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for row in self.grid() {
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn to_text(&self) -> String {
        let grid = self.grid();
        let ncols = grid[0].len();
        let widths: Vec<usize> = (0..ncols)
            .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let total: usize = widths.iter().sum::<usize>() + 2 * (ncols - 1);
        let rule = "-".repeat(total);
        let mut out = format!("{}\n{rule}\n", self.title);
        for (i, row) in grid.iter().enumerate() {
            let mut line = String::new();
            for (j, cell) in row.iter().enumerate() {
                let pad = widths[j] - cell.chars().count();
                if j == 0 {
                    line.push_str(cell);
                    line.push_str(&" ".repeat(pad));
                } else {
                    line.push_str("  ");
                    line.push_str(&" ".repeat(pad));
                    line.push_str(cell);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&rule);
                out.push('\n');
            }
        }
        out.push_str(&rule);
        out.push('\n');
        for f in self.footer() {
            out.push_str(&f);
            out.push('\n');
        }
        out
    }
}

fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{ols_fit, ColumnInfo, DesignMatrix};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.2), "");
        assert_eq!(stars(0.05), "*");
        assert_eq!(stars(0.005), "**");
        assert_eq!(stars(0.0005), "***");
    }

    #[test]
    fn renders_rows_and_footer() {
        let n = 12;
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => (i % 2) as f64,
            _ => (i as f64 * 0.7).sin(),
        });
        let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 2)] + 0.1 * (i as f64).cos());
        let cols = vec![
            ColumnInfo {
                name: "(Intercept)".into(),
                role: ColumnRole::Intercept,
            },
            ColumnInfo {
                name: "year[2011]".into(),
                role: ColumnRole::FixedEffect {
                    block: "year".into(),
                    level: "2011".into(),
                },
            },
            ColumnInfo {
                name: "score".into(),
                role: ColumnRole::Covariate,
            },
        ];
        let d = DesignMatrix::from_parts(x, y, cols).unwrap();
        let mut t = RegressionTable::new("Test");
        t.push("(1)", ols_fit(&d).unwrap());
        let text = t.to_text();
        assert!(text.contains("score"));
        assert!(text.contains("***"));
        assert!(text.contains("Year F.E."));
        assert!(text.contains("p<0.1*, p<0.01**, p<0.001***"));
        let csv = t.to_csv();
        assert!(csv.starts_with(",(1)\n"));
        assert!(csv.contains("\nN,12\n"));
    }
}
