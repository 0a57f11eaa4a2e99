//! Particle-level check of the dilution miss probabilities.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

use super::replication_rng;

/// A simulated proportion and its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub rate: f64,
    pub se: f64,
    pub trials: u64,
}

/// Fraction of `reps` trials in which none of `particles` particles, each
/// independently landing in the tested volume with probability
/// `tested_fraction`, was picked up.
///
/// For an individual test use `ceil(c T)` particles and fraction `l / T`.
pub fn simulate_particle_misses(
    particles: u64,
    tested_fraction: f64,
    reps: u64,
    seed: u64,
) -> Result<ProportionEstimate> {
    if !(0.0..=1.0).contains(&tested_fraction) {
        return invalid(format!("tested fraction must lie in [0, 1], got {tested_fraction}"));
    }
    if reps == 0 {
        return invalid("at least one replication is required");
    }
    let misses: u64 = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, rep);
            u64::from((0..particles).all(|_| !rng.random_bool(tested_fraction)))
        })
        .sum();
    let rate = misses as f64 / reps as f64;
    Ok(ProportionEstimate {
        rate,
        se: (rate * (1.0 - rate) / reps as f64).sqrt(),
        trials: reps,
    })
}
