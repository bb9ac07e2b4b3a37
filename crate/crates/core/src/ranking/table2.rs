//! Human-evaluation results per distortion configuration: Plackett-Luce
//! worth, FAD and SDR as published for the 21 evaluated conditions.

use serde::Deserialize;

use super::pearson;
use crate::error::Result;

pub const TABLE2_CSV: &str = include_str!("../../data/table2.csv");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Table2Row {
    pub distortion: String,
    pub params: String,
    pub worth: f64,
    pub fad: f64,
    pub sdr: f64,
}

pub fn table2() -> Vec<Table2Row> {
    csv::Reader::from_reader(TABLE2_CSV.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .expect("embedded table is well formed")
}

/// Signed Pearson correlations `(worth vs FAD, worth vs SDR)`.
pub fn table2_correlations() -> Result<(f64, f64)> {
    let rows = table2();
    let worth: Vec<f64> = rows.iter().map(|r| r.worth).collect();
    let fad: Vec<f64> = rows.iter().map(|r| r.fad).collect();
    let sdr: Vec<f64> = rows.iter().map(|r| r.sdr).collect();
    Ok((pearson(&worth, &fad)?, pearson(&worth, &sdr)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape() {
        let rows = table2();
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[0].distortion, "low pass");
        assert_eq!(rows[0].worth, 0.0);
        assert_eq!(rows[20].fad, 3.5);
        assert!(rows.windows(2).all(|w| w[0].worth >= w[1].worth));
    }

    #[test]
    fn fad_correlates_better_than_sdr() {
        let (fad, sdr) = table2_correlations().unwrap();
        assert!(fad < 0.0);
        assert!(fad.abs() > sdr.abs());
    }
}
