//! Deterministic CSV and JSON writers with 12 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Significant digits in every emitted float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Text of `x` with exactly 12 significant digits: positional notation for
/// decimal exponents in `-6..=11`, scientific notation otherwise.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    if (-6..=11).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .filter(|x| x.is_finite())
                .and_then(|x| fmt_float(x).parse::<serde_json::Number>().ok())
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded, newline-terminated.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::Failure(e.to_string()))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Failure(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// CSV text from a header and rows of already formatted cells.
pub fn to_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Writes to the path, or to stdout when none is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Failure(format!("cannot write to stdout: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_float(2.0 - 5f64.sqrt()), "-0.236067977500");
        assert_eq!(fmt_float(1.0), "1.00000000000");
        assert_eq!(fmt_float(0.0), "0.00000000000");
        assert_eq!(fmt_float(-0.0), "0.00000000000");
        assert_eq!(fmt_float(3.891698142442254e-10), "3.89169814244e-10");
        assert_eq!(fmt_float(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_float(9.9999999999996), "10.0000000000");
        assert_eq!(fmt_float(-4.5e13), "-4.50000000000e13");
    }

    #[test]
    fn json_rounding_is_recursive() {
        #[derive(Serialize)]
        struct R {
            a: f64,
            b: Vec<f64>,
            n: usize,
        }
        let s = to_json(&R {
            a: 1.0 / 3.0,
            b: vec![2.0f64.sqrt()],
            n: 7,
        })
        .unwrap();
        assert!(s.contains("0.333333333333"));
        assert!(s.contains("1.41421356237"));
        assert!(!s.contains("1.414213562373"));
        assert!(s.contains("\"n\": 7"));
    }

    #[test]
    fn csv_layout() {
        let s = to_csv(&["a".into(), "b".into()], &[vec!["1".into(), "".into()]]);
        assert_eq!(s, "a,b\n1,\n");
    }
}
