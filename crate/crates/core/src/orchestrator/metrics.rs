use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::OrchestratorError;

/// Mean corrections per task as an exact fraction.
pub fn amortized(corrections: &[u64]) -> Result<Ratio<u64>, OrchestratorError> {
    if corrections.is_empty() {
        return Err(OrchestratorError::EmptyInput);
    }
    Ok(Ratio::new(corrections.iter().sum(), corrections.len() as u64))
}

/// Exact fraction plus its decimal value, for reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub numer: u64,
    pub denom: u64,
}

impl Fraction {
    pub fn value(&self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

impl From<Ratio<u64>> for Fraction {
    fn from(r: Ratio<u64>) -> Self {
        Fraction { numer: *r.numer(), denom: *r.denom() }
    }
}

impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2}", self.value())
    }
}
