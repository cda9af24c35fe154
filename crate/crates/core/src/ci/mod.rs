//! Conditional-independence tests consumed by FCI.

mod chi_square;
mod fisher_z;
mod oracle;

pub use chi_square::ChiSquare;
pub use fisher_z::FisherZ;
pub use oracle::{oracle_ci, OracleCi};

use serde::{Deserialize, Serialize};

use crate::data::BatchDataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiDecision {
    pub independent: bool,
    pub p_value: f64,
    pub statistic: f64,
}

impl CiDecision {
    /// Independent iff `p > alpha`; a tie counts as dependent.
    pub fn from_p(p_value: f64, statistic: f64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        CiDecision { independent: p_value > alpha, p_value, statistic }
    }
}

/// A judge of `x ⊥ y | z` over variables indexed `0..n_vars()`.
pub trait CiTest: Sync {
    fn alpha(&self) -> f64;
    fn n_vars(&self) -> usize;
    fn test(&self, x: usize, y: usize, z: &[usize]) -> Result<CiDecision>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiKind {
    /// Chi-square when every column is categorical, Fisher-Z otherwise.
    #[default]
    Auto,
    FisherZ,
    ChiSquare,
}

/// Build the test selected by `kind` over `data`.
pub fn build_test(data: &BatchDataset, kind: CiKind, alpha: f64) -> Result<Box<dyn CiTest>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let kind = match kind {
        CiKind::Auto if data.all_categorical() => CiKind::ChiSquare,
        CiKind::Auto => CiKind::FisherZ,
        k => k,
    };
    Ok(match kind {
        CiKind::ChiSquare => Box::new(ChiSquare::new(data, alpha)?),
        _ => Box::new(FisherZ::new(data, alpha)?),
    })
}

/// Two-sided standard normal tail `P(|N(0,1)| > z)`.
pub fn normal_two_sided(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tail_values() {
        assert!((normal_two_sided(0.0) - 1.0).abs() < 1e-12);
        assert!((normal_two_sided(1.959963984540054) - 0.05).abs() < 1e-9);
        assert!(normal_two_sided(40.0) < 1e-300 || normal_two_sided(40.0) == 0.0);
    }

    #[test]
    fn tie_is_dependent() {
        assert!(!CiDecision::from_p(0.1, 1.0, 0.1).independent);
        assert!(CiDecision::from_p(0.1000001, 1.0, 0.1).independent);
    }
}
