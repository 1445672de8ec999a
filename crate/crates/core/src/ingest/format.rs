//! Canonical number formatting for every table the engine writes.

/// Significant digits kept by [`format_float`].
pub const SIGNIFICANT_DIGITS: usize = 10;

/// Formats `v` with exactly ten significant digits. Magnitudes in
/// `[1e-5, 1e15)` are written positionally (`0.3000000000`), others in
/// exponent form (`1.234567890e-7`). Zero is written as `0`.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.is_nan() {
        return "NaN".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    // Rounding happens here, so the exponent below already reflects carries.
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..15).contains(&exp) {
        return sci;
    }
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut out = String::with_capacity(SIGNIFICANT_DIGITS + 8);
    if negative {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            for _ in digits.len()..int_len {
                out.push('0');
            }
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

/// Locale-independent float parsing.
pub fn parse_float(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_forms() {
        assert_eq!(format_float(0.1 + 0.2), "0.3000000000");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(1.0), "1.000000000");
        assert_eq!(format_float(52345.6789), "52345.67890");
        assert_eq!(format_float(9.9999999999), "10.00000000");
        assert_eq!(format_float(-0.00012345), "-0.0001234500000");
        assert_eq!(format_float(1e20), "1.000000000e20");
        assert_eq!(format_float(1.5e-7), "1.500000000e-7");
        assert_eq!(format_float(123456789012.0), "123456789000");
    }

    #[test]
    fn sum_reparses_close() {
        let v = 0.1 + 0.2;
        let back = parse_float(&format_float(v)).unwrap();
        assert!((back - v).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn parse_format_parse_fixpoint(v in -1e18f64..1e18, scale in -12i32..12) {
            let v = v * 10f64.powi(scale);
            let s1 = format_float(v);
            let p1 = parse_float(&s1).unwrap();
            let s2 = format_float(p1);
            prop_assert_eq!(&s1, &s2);
            prop_assert!((p1 - v).abs() <= 1e-9 * v.abs());
        }
    }
}
