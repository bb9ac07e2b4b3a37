//! Shared helpers for CSV report output.

/// Formats `x` rounded to 9 significant digits, using the shortest
/// representation of the rounded value.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333");
        assert_eq!(format_float(123456789.4), "123456789");
        assert_eq!(format_float(-2.0), "-2");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(1e-12 / 3.0), "0.000000000000333333333");
        assert_eq!(format_float(f64::INFINITY), "inf");
    }
}
