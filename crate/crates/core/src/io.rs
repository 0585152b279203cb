//! Text formats shared by the file readers and writers.

/// Splits on commas when present, otherwise on any whitespace.
pub(crate) fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Formats a float with the shortest digits that round-trip, independent of
/// locale: plain decimal for `1e-5 <= |x| < 1e16` and zero, scientific
/// (`1.25e-7`) otherwise. Non-finite values are `NA`.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        "NA".to_string()
    } else if x == 0.0 || (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields() {
        assert_eq!(split_fields("1, 2 ,3"), vec!["1", "2", "3"]);
        assert_eq!(split_fields(" 1\t2  3 "), vec!["1", "2", "3"]);
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 1e-5, 9.99e-6] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.25e-7), "1.25e-7");
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(f64::NAN), "NA");
        assert_eq!(fmt_opt(None), "NA");
    }
}
