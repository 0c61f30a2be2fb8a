//! Thresholds frozen in `expectations/theorem1.toml`, compiled into the binary.

use serde::Deserialize;

const FROZEN: &str = include_str!("../expectations/theorem1.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub u1_ratio_max: f64,
    pub recovery_rel_err_max: f64,
    pub inverse_crime_max: f64,
    pub covariance_exponent_tol: f64,
    pub theorem1: Theorem1Expectation,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Expectation {
    pub tolerance: f64,
    pub q: f64,
    pub seeds: usize,
    /// Spread of the median relative error seen in the ensemble pre-study.
    pub prestudy: Option<Prestudy>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prestudy {
    pub qs: Vec<f64>,
    pub median: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub u1_median: Vec<f64>,
}

impl Expectations {
    pub fn frozen() -> Self {
        toml::from_str(FROZEN).expect("expectations file parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_values() {
        let e = Expectations::frozen();
        assert_eq!(e.theorem1.tolerance, 0.20);
        assert_eq!(e.theorem1.seeds, 20);
        assert_eq!(e.u1_ratio_max, 0.1);
        let p = e.theorem1.prestudy.expect("pre-study recorded");
        assert_eq!(p.qs.len(), p.median.len());
        assert!(p.min.iter().zip(&p.max).all(|(a, b)| a <= b));
    }
}
