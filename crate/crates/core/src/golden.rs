//! Golden reference files: CSV with columns
//! `hurst,t,s_or_a,b_or_blank,kind,value,tolerance`, values written with 17
//! significant digits.

use std::path::Path;

use serde::Deserialize;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GoldenRow {
    pub hurst: Option<f64>,
    pub t: Option<f64>,
    pub s_or_a: Option<f64>,
    pub b_or_blank: Option<f64>,
    pub kind: String,
    pub value: f64,
    pub tolerance: f64,
}

impl GoldenRow {
    /// Agreement test: |x - value| <= tolerance * max(1, |value|).
    pub fn accepts(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.tolerance * self.value.abs().max(1.0)
    }
}

pub fn read_golden(path: impl AsRef<Path>) -> Result<Vec<GoldenRow>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let rows = reader.deserialize().collect::<std::result::Result<Vec<GoldenRow>, _>>()?;
    Ok(rows)
}

/// Scientific notation with 17 significant digits and a signed two-digit exponent,
/// e.g. `2.6741115875799759e-01`. Rust's formatter rounds the exact binary value,
/// so ties resolve to even.
pub fn format_sig17(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.16e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_matches_reference_style() {
        assert_eq!(format_sig17(0.26741115875799759), "2.6741115875799759e-01");
        assert_eq!(format_sig17(1956252.194813957), "1.9562521948139570e+06");
        assert_eq!(format_sig17(-1.0), "-1.0000000000000000e+00");
        assert_eq!(format_sig17(1e-300), "1.0000000000000000e-300");
    }

    #[test]
    fn round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 6.02214076e23, 5e-324] {
            assert_eq!(format_sig17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn relative_acceptance_above_one() {
        let row = GoldenRow {
            hurst: None,
            t: None,
            s_or_a: None,
            b_or_blank: None,
            kind: "x".into(),
            value: 1e6,
            tolerance: 1e-9,
        };
        assert!(row.accepts(1e6 + 1e-4));
        assert!(!row.accepts(1e6 + 1e-2));
    }
}
