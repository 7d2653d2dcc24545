//! Deterministic text output shared by the CSV and SVG writers.

/// Formats `x` with `digits` significant digits, like C's `%.{digits}g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Nine significant digits, the precision of every CSV column.
pub fn csv_number(x: f64) -> String {
    format_sig(x, 9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(csv_number(0.0), "0");
        assert_eq!(csv_number(0.1), "0.1");
        assert_eq!(csv_number(2.0 / 3.0), "0.666666667");
        assert_eq!(csv_number(-1234.5), "-1234.5");
        assert_eq!(csv_number(123456789.4), "123456789");
        assert_eq!(csv_number(1234567890.0), "1.23456789e9");
        assert_eq!(csv_number(1e-7), "1e-7");
        assert_eq!(csv_number(0.00012), "0.00012");
        assert_eq!(csv_number(9.9999999999), "10");
        assert_eq!(format_sig(3.14159, 3), "3.14");
    }

    proptest! {
        #[test]
        fn round_trips_to_nine_digits(x in -1e12f64..1e12) {
            let back: f64 = csv_number(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-9 * x.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn reformatting_is_stable(x in -1e12f64..1e12) {
            let once = csv_number(x);
            let back: f64 = once.parse().unwrap();
            prop_assert_eq!(csv_number(back), once);
        }
    }
}
