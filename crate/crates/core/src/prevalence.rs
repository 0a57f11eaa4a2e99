use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Probability that a randomly chosen individual is infected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PrevalenceRate(f64);

impl PrevalenceRate {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return invalid(format!("prevalence must lie in [0, 1], got {value}"));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Probability that a pool of `size` samples is entirely negative, `(1 - p)^size`.
    pub fn all_negative(self, size: u32) -> f64 {
        (f64::from(size) * (-self.0).ln_1p()).exp()
    }

    /// Probability that a pool of `size` samples holds at least one positive.
    pub fn any_positive(self, size: u32) -> f64 {
        -(f64::from(size) * (-self.0).ln_1p()).exp_m1()
    }

    pub(crate) fn require_interior(self, what: &str) -> Result<()> {
        if self.0 <= 0.0 || self.0 >= 1.0 {
            return invalid(format!("{what} requires 0 < prevalence < 1, got {}", self.0));
        }
        Ok(())
    }
}

impl TryFrom<f64> for PrevalenceRate {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PrevalenceRate> for f64 {
    fn from(p: PrevalenceRate) -> f64 {
        p.0
    }
}

impl fmt::Display for PrevalenceRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
