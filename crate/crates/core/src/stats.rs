//! Summary statistics, the Student t distribution, and Welch's t-test.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n − 1) sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Continued fraction for the regularized incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value P(|T| ≥ |t|).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t)).min(1.0)
}

/// Quantile of Student's t, by bisection on the CDF.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while student_t_cdf(lo, df) > p {
        lo *= 2.0;
    }
    while student_t_cdf(hi, df) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("t-test needs at least two observations per sample (got {0} and {1})")]
    TooFewObservations(usize, usize),
}

/// Welch's unequal-variance two-sample t-test, two-sided. The statistic is
/// oriented as mean(b) − mean(a).
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewObservations(a.len(), b.len()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            TTest {
                t: 0.0,
                df: na + nb - 2.0,
                p: 1.0,
            }
        } else {
            TTest {
                t: if mb > ma {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                df: na + nb - 2.0,
                p: 0.0,
            }
        });
    }
    let t = (mb - ma) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p: student_t_two_sided_p(t, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss–Legendre quadrature (5 nodes per panel).
    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for i in 0..panels {
            let mid = a + (i as f64 + 0.5) * h;
            for k in 0..5 {
                total += W[k] * f(mid + 0.5 * h * X[k]);
            }
        }
        total * 0.5 * h
    }

    /// t CDF from quadrature of the unnormalized density; the normalizer is
    /// itself integrated (x = u/(1-u) maps [0,∞) onto [0,1)).
    fn t_cdf_by_quadrature(t: f64, df: f64) -> f64 {
        let dens = |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        let half_mass = integrate(
            |u| {
                let x = u / (1.0 - u);
                dens(x) / ((1.0 - u) * (1.0 - u))
            },
            0.0,
            1.0,
            20_000,
        );
        let partial = integrate(dens, 0.0, t.abs(), 20_000);
        let v = 0.5 + 0.5 * partial / half_mass;
        if t >= 0.0 {
            v
        } else {
            1.0 - v
        }
    }

    #[test]
    fn t_cdf_matches_quadrature() {
        for &df in &[1.5, 3.0, 7.0, 19.3, 60.0, 250.0] {
            for &t in &[-4.0, -2.1, -0.3, 0.0, 0.7, 1.96, 3.3, 6.0] {
                let got = student_t_cdf(t, df);
                let want = t_cdf_by_quadrature(t, df);
                assert!((got - want).abs() < 1e-8, "df={df} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn t_cdf_known_values() {
        // t_{0.975, 10} = 2.228138851986...
        assert!((student_t_cdf(2.228_138_851_986_273_6, 10.0) - 0.975).abs() < 1e-12);
        // df = 1 is Cauchy.
        let t: f64 = 1.7;
        let cauchy = 0.5 + t.atan() / std::f64::consts::PI;
        assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-13);
    }

    #[test]
    fn large_df_approaches_normal() {
        // Φ(1.96) = 0.9750021048517795
        assert!((student_t_cdf(1.96, 1e7) - 0.975_002_104_851_779_5).abs() < 1e-7);
        assert!(student_t_two_sided_p(40.0, 140_000.0) < 1e-300);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &df in &[2.0, 9.0, 120.0] {
            for &p in &[0.025, 0.5, 0.9, 0.975] {
                let q = student_t_quantile(p, df);
                assert!((student_t_cdf(q, df) - p).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 2.0, 3.5, 4.0];
        let r = welch_ttest(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        let z = [2.0; 5];
        let r = welch_ttest(&z, &z).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }

    #[test]
    fn welch_separated_samples() {
        let a: Vec<f64> = (0..50)
            .map(|i| 1e-3 * ((i * 37 % 11) as f64 - 5.0))
            .collect();
        let b: Vec<f64> = a.iter().map(|x| 1.0 + x * 0.7).collect();
        let r = welch_ttest(&a, &b).unwrap();
        assert!(r.t > 0.0);
        assert!(r.p < 1e-10);
    }

    #[test]
    fn welch_matches_quadrature_reference() {
        let a = [0.31, 0.29, 0.35, 0.33, 0.27, 0.30, 0.34, 0.32];
        let b = [0.36, 0.33, 0.39, 0.31, 0.37, 0.40, 0.35];
        let r = welch_ttest(&a, &b).unwrap();
        let reference = 2.0 * (1.0 - t_cdf_by_quadrature(r.t.abs(), r.df));
        assert!((r.p - reference).abs() < 1e-6, "{} vs {reference}", r.p);
    }

    #[test]
    fn welch_rejects_tiny_samples() {
        assert!(welch_ttest(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&x, &[1.0; 4]).is_none());
    }
}
