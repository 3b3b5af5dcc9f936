//! Text and CSV rendering helpers.

/// Formats a float with nine significant digits, enough for any value in
/// the output to be re-parsed within the tolerance regime of the solver.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.8e}")
}

/// Fixed-point rendering for human-readable tables.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

/// Quotes a CSV field when it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_reparses_close() {
        for x in [0.346181667, 812.440923, 5.08e-4, -0.222, 1600.0] {
            let back: f64 = sig9(x).parse().unwrap();
            assert!((back - x).abs() <= 1e-9 * x.abs().max(1e-12), "{x} -> {back}");
        }
        assert_eq!(sig9(0.0), "0");
    }

    #[test]
    fn csv_field_quotes_delimiters() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
