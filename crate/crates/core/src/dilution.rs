//! False negatives caused by dilution.
//!
//! A sample of volume `T` holds on average `c T` virus particles. Individual
//! testing draws an aliquot of volume `l`; a pool of `n` samples draws `l/n`
//! from each, so each positive contributes fewer particles to the reaction.
//! A test misses when no particle lands in the tested volume.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::prevalence::PrevalenceRate;

/// Volumes, viral load, pool size and prevalence for one dilution calculation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilutionScenario {
    /// Liquid taken from a sample for an individual test.
    pub aliquot_volume: f64,
    /// Volume of one collected sample, in the same units.
    pub sample_volume: f64,
    /// Virus particles per unit volume in a positive sample.
    pub concentration: f64,
    pub pool_size: u32,
    pub prevalence: PrevalenceRate,
}

impl DilutionScenario {
    pub fn new(
        aliquot_volume: f64,
        sample_volume: f64,
        concentration: f64,
        pool_size: u32,
        prevalence: PrevalenceRate,
    ) -> Result<Self> {
        Self {
            aliquot_volume,
            sample_volume,
            concentration,
            pool_size,
            prevalence,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.aliquot_volume > 0.0 && self.aliquot_volume.is_finite()) {
            return invalid(format!("aliquot volume must be positive, got {}", self.aliquot_volume));
        }
        if !(self.sample_volume > 0.0 && self.sample_volume.is_finite()) {
            return invalid(format!("sample volume must be positive, got {}", self.sample_volume));
        }
        if self.aliquot_volume > self.sample_volume {
            return invalid(format!(
                "aliquot volume {} exceeds sample volume {}",
                self.aliquot_volume, self.sample_volume
            ));
        }
        if !(self.concentration >= 0.0 && self.concentration.is_finite()) {
            return invalid(format!("concentration must be non-negative, got {}", self.concentration));
        }
        if self.pool_size == 0 {
            return invalid("pool size must be at least 1");
        }
        Ok(self)
    }

    pub fn with_pool_size(self, pool_size: u32) -> Result<Self> {
        Self { pool_size, ..self }.validated()
    }

    /// Expected particles in a positive sample, `c T`.
    pub fn particles_per_sample(&self) -> f64 {
        self.concentration * self.sample_volume
    }

    /// Fraction of one sample that goes into an individual test, `l / T`.
    pub fn tested_fraction(&self) -> f64 {
        self.aliquot_volume / self.sample_volume
    }
}

/// `(1 - fraction)^exponent`, exact at the endpoints.
fn miss_probability(fraction: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        return 1.0;
    }
    if fraction >= 1.0 {
        return 0.0;
    }
    (exponent * (-fraction).ln_1p()).exp()
}

/// `(1 - l/T)^(c T)`: chance an individual test of a positive sample sees no particle.
pub fn individual_false_negative_rate(scenario: &DilutionScenario) -> Result<f64> {
    let s = scenario.validated()?;
    Ok(miss_probability(s.tested_fraction(), s.particles_per_sample()))
}

/// Mean number of positives in a pool of `n` given that it holds at least one,
/// `n p / (1 - (1-p)^n)`.
pub fn expected_positives_per_pool(n_pool: u32, p: PrevalenceRate) -> Result<f64> {
    if n_pool == 0 {
        return invalid("pool size must be at least 1");
    }
    if p.value() <= 0.0 {
        return invalid("expected positives per positive pool is undefined at zero prevalence");
    }
    let n = f64::from(n_pool);
    Ok((n * p.value() / p.any_positive(n_pool)).clamp(1.0, n))
}

/// `(1 - l/(n T))^(c T m)` with `m` the expected positives in a positive pool:
/// chance a pooled test of a pool that holds a positive sees no particle.
///
/// At zero prevalence `m` takes its limiting value 1.
pub fn pooled_false_negative_rate(scenario: &DilutionScenario) -> Result<f64> {
    let s = scenario.validated()?;
    let m = if s.prevalence.value() > 0.0 {
        expected_positives_per_pool(s.pool_size, s.prevalence)?
    } else {
        1.0
    };
    let fraction = s.tested_fraction() / f64::from(s.pool_size);
    Ok(miss_probability(fraction, s.particles_per_sample() * m))
}

/// False-negative rate added by pooling, `f_G - f_I`.
pub fn introduced_false_negative_rate(scenario: &DilutionScenario) -> Result<f64> {
    Ok(pooled_false_negative_rate(scenario)? - individual_false_negative_rate(scenario)?)
}

/// Largest pool size in `1..=max_pool_size` whose introduced false-negative
/// rate is at most `threshold`, scanning down from `max_pool_size`.
///
/// Returns 1 when no pooling is acceptable.
pub fn max_pool_size_for_threshold(
    base: &DilutionScenario,
    threshold: f64,
    max_pool_size: u32,
) -> Result<u32> {
    if threshold.is_nan() || threshold < 0.0 {
        return invalid(format!("threshold must be non-negative, got {threshold}"));
    }
    if max_pool_size == 0 {
        return invalid("maximum pool size must be at least 1");
    }
    for n in (2..=max_pool_size).rev() {
        if introduced_false_negative_rate(&base.with_pool_size(n)?)? <= threshold {
            return Ok(n);
        }
    }
    Ok(1)
}

/// Daily monitoring: individually test a fraction of the population alongside
/// pooling and compare the two false-negative rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub individual_test_fraction: f64,
    pub introduced_fn_threshold: f64,
}

impl MonitorConfig {
    pub fn new(individual_test_fraction: f64, introduced_fn_threshold: f64) -> Result<Self> {
        if !(individual_test_fraction > 0.0 && individual_test_fraction < 1.0) {
            return invalid(format!(
                "individual test fraction must lie in (0, 1), got {individual_test_fraction}"
            ));
        }
        if introduced_fn_threshold.is_nan() || introduced_fn_threshold < 0.0 {
            return invalid(format!(
                "introduced false-negative threshold must be non-negative, got {introduced_fn_threshold}"
            ));
        }
        Ok(Self {
            individual_test_fraction,
            introduced_fn_threshold,
        })
    }

    /// People tested individually out of a population of `population`.
    pub fn individual_tests(&self, population: u64) -> u64 {
        (self.individual_test_fraction * population as f64).ceil() as u64
    }

    /// Whether pooling at the scenario's pool size stays within the threshold.
    pub fn pool_size_acceptable(&self, scenario: &DilutionScenario) -> Result<bool> {
        Ok(introduced_false_negative_rate(scenario)? <= self.introduced_fn_threshold)
    }

    /// Largest acceptable pool size, see [`max_pool_size_for_threshold`].
    pub fn recommend_pool_size(&self, base: &DilutionScenario, max_pool_size: u32) -> Result<u32> {
        max_pool_size_for_threshold(base, self.introduced_fn_threshold, max_pool_size)
    }
}
