//! Static SVG charts. Output is a pure function of the inputs, with
//! coordinates rounded to two decimals.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 110.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        esc(title)
    );
    s
}

/// Axis range covering `values` and zero, padded by 5%.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    (lo - if lo < 0.0 { pad } else { 0.0 }, hi + pad)
}

struct Frame {
    lo: f64,
    hi: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        TOP + (H - TOP - BOTTOM) * (1.0 - (v - self.lo) / (self.hi - self.lo))
    }

    fn axes(&self, s: &mut String, ylabel: &str) {
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}" stroke="black"/>"#,
            H - BOTTOM
        );
        let zero = self.y(0.0_f64.clamp(self.lo, self.hi));
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT:.2}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="black"/>"#,
            W - RIGHT
        );
        for i in 0..=4 {
            let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
            let y = self.y(v);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
                LEFT - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            esc(ylabel)
        );
    }
}

fn slot(i: usize, n: usize) -> (f64, f64) {
    let width = (W - LEFT - RIGHT) / n.max(1) as f64;
    (LEFT + width * i as f64, width)
}

fn x_label(s: &mut String, x: f64, label: &str) {
    let y = H - BOTTOM + 14.0;
    let _ = writeln!(
        s,
        r#"<text x="{x:.2}" y="{y:.2}" transform="rotate(45 {x:.2} {y:.2})">{}</text>"#,
        esc(label)
    );
}

/// Vertical bars, one per (label, value).
pub fn bar_chart(title: &str, ylabel: &str, bars: &[(String, f64)]) -> String {
    let f = {
        let (lo, hi) = range(bars.iter().map(|b| b.1));
        Frame { lo, hi }
    };
    let mut s = open(W, H, title);
    f.axes(&mut s, ylabel);
    for (i, (label, v)) in bars.iter().enumerate() {
        let (x0, w) = slot(i, bars.len());
        let (y0, y1) = (f.y(v.max(0.0)), f.y(v.min(0.0)));
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#4477aa"/>"##,
            x0 + 0.15 * w,
            0.7 * w,
            (y1 - y0).max(0.0)
        );
        x_label(&mut s, x0 + 0.5 * w, label);
    }
    s.push_str("</svg>\n");
    s
}

/// Every value of each group as a dot, with the group mean as a bar.
pub fn strip_plot(title: &str, ylabel: &str, groups: &[(String, Vec<f64>)]) -> String {
    let f = {
        let (lo, hi) = range(groups.iter().flat_map(|g| g.1.iter().copied()));
        Frame { lo, hi }
    };
    let mut s = open(W, H, title);
    f.axes(&mut s, ylabel);
    for (i, (label, vals)) in groups.iter().enumerate() {
        let (x0, w) = slot(i, groups.len());
        for (j, v) in vals.iter().enumerate() {
            // Deterministic horizontal jitter.
            let dx = ((j * 37) % 100) as f64 / 100.0 - 0.5;
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#4477aa" fill-opacity="0.5"/>"##,
                x0 + 0.5 * w + 0.4 * w * dx,
                f.y(*v)
            );
        }
        if !vals.is_empty() {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#cc3311" stroke-width="2"/>"##,
                x0 + 0.2 * w,
                f.y(m),
                x0 + 0.8 * w,
                f.y(m)
            );
        }
        x_label(&mut s, x0 + 0.5 * w, label);
    }
    s.push_str("</svg>\n");
    s
}

/// Point estimates with interval whiskers: (label, estimate, low, high).
pub fn coefficient_path(title: &str, ylabel: &str, points: &[(String, f64, f64, f64)]) -> String {
    let f = {
        let (lo, hi) = range(points.iter().flat_map(|p| [p.1, p.2, p.3]));
        Frame { lo, hi }
    };
    let mut s = open(W, H, title);
    f.axes(&mut s, ylabel);
    let mut path = String::new();
    for (i, (label, est, lo, hi)) in points.iter().enumerate() {
        let (x0, w) = slot(i, points.len());
        let x = x0 + 0.5 * w;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            f.y(*lo),
            f.y(*hi)
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="#cc3311"/>"##,
            f.y(*est)
        );
        let _ = write!(
            path,
            "{}{x:.2},{:.2}",
            if i == 0 { "M" } else { " L" },
            f.y(*est)
        );
        x_label(&mut s, x, label);
    }
    if !points.is_empty() {
        let _ = writeln!(
            s,
            r##"<path d="{path}" fill="none" stroke="#cc3311" stroke-opacity="0.5"/>"##
        );
    }
    s.push_str("</svg>\n");
    s
}

fn diverging(v: f64, limit: f64) -> String {
    let t = (v / limit).clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("rgb({:.0},{:.0},{:.0})", r, g, b)
}

/// Grid of cells colored on a blue–white–red scale symmetric around zero;
/// empty cells are grey.
pub fn heat_map(
    title: &str,
    rows: &[String],
    cols: &[String],
    values: &[Vec<Option<f64>>],
) -> String {
    let cell = 28.0;
    let left = 120.0;
    let top = 50.0;
    let width = left + cell * cols.len() as f64 + 40.0;
    let height = top + cell * rows.len() as f64 + 110.0;
    let limit = values
        .iter()
        .flatten()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let mut s = open(width.max(300.0), height, title);
    for (i, r) in rows.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell * 0.65,
            esc(r)
        );
        for (j, v) in values[i].iter().enumerate() {
            let x = left + cell * j as f64;
            let fill = v.map_or_else(|| "#dddddd".to_string(), |v| diverging(v, limit));
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}" stroke="white"/>"#
            );
            if let Some(v) = v {
                let _ = writeln!(
                    s,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="8">{v:.2}</text>"#,
                    x + cell / 2.0,
                    y + cell * 0.62
                );
            }
        }
    }
    let base = top + cell * rows.len() as f64 + 12.0;
    for (j, c) in cols.iter().enumerate() {
        let x = left + cell * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{base:.2}" transform="rotate(45 {x:.2} {base:.2})">{}</text>"#,
            esc(c)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_deterministic_and_escaped() {
        let bars = vec![("a<b".to_string(), 0.3), ("c".to_string(), -0.1)];
        let a = bar_chart("R²", "R²", &bars);
        assert_eq!(a, bar_chart("R²", "R²", &bars));
        assert!(a.contains("a&lt;b"));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        let h = heat_map(
            "corr",
            &["x".into(), "y".into()],
            &["x".into(), "y".into()],
            &[vec![Some(1.0), None], vec![None, Some(-1.0)]],
        );
        assert!(h.contains("#dddddd"));
        assert!(h.contains("rgb(255,0,0)") && h.contains("rgb(0,0,255)"));
        let p = coefficient_path("c", "b", &[("2010".into(), 0.1, 0.0, 0.2)]);
        assert!(p.contains("<path"));
        let st = strip_plot("cv", "r2", &[("m".into(), vec![0.1, 0.2])]);
        assert_eq!(st.matches("<circle").count(), 2);
    }
}
