//! Prevalence estimation from pooled tests (the Gibbs-Gower estimator).
//!
//! `t` pools of `b` samples are tested once each and only the number of
//! positive pools is used. The estimator is biased upward for `b > 1`; its
//! exact mean and MSE are binomial sums, and a delta-method variance is
//! available for large `t`.

mod moments;
mod planning;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::prevalence::PrevalenceRate;

pub use moments::{
    gg_asymptotic_variance, gg_estimate, gg_expected_estimate, gg_moments,
    gg_moments_by_summation, gg_mse, gg_mse_expanded, EstimatorMoments, MAX_EXACT_POOLS,
};
pub use planning::{
    dorfman_estimation_rmse, estimation_rule_of_thumb, gg_effective_tests, gg_minimize_cost,
    gg_nrmse, gg_optimal_pool, gg_tests_needed, saturation_cap, CostModel, CostOptimum,
    PoolObjective, VarianceModel, TARGET_SLACK,
};

/// Observed result of testing `num_pools` pools of `pool_size` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolTestOutcome {
    pub num_pools: u64,
    pub positive_pools: u64,
    pub pool_size: u32,
}

impl PoolTestOutcome {
    pub fn new(num_pools: u64, positive_pools: u64, pool_size: u32) -> Result<Self> {
        if num_pools == 0 {
            return invalid("number of pools must be at least 1");
        }
        if pool_size == 0 {
            return invalid("pool size must be at least 1");
        }
        if positive_pools > num_pools {
            return invalid(format!(
                "positive pools ({positive_pools}) exceed pools tested ({num_pools})"
            ));
        }
        Ok(Self {
            num_pools,
            positive_pools,
            pool_size,
        })
    }

    /// Observed fraction of positive pools.
    pub fn pool_positive_rate(&self) -> f64 {
        self.positive_pools as f64 / self.num_pools as f64
    }
}

/// Point estimate together with the estimator's sampling properties.
///
/// The moments are evaluated at `evaluated_at`: a reference prevalence when
/// one is supplied, otherwise the estimate itself (plug-in).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub outcome: PoolTestOutcome,
    pub p_hat: f64,
    pub pool_positive_rate_hat: f64,
    pub evaluated_at: f64,
    pub expected_p_hat: f64,
    pub mse: f64,
    /// `None` when the evaluation prevalence is 0 or 1.
    pub asymptotic_variance: Option<f64>,
    /// `sqrt(mse) / p`; `None` at zero prevalence.
    pub nrmse: Option<f64>,
    /// Every pool was positive, so the estimate is pinned at 1 and carries no
    /// information about how high the prevalence really is.
    pub saturated: bool,
}

/// Estimate prevalence from `outcome` and describe the estimator's accuracy.
///
/// Pool counts above [`MAX_EXACT_POOLS`] are rejected when `b > 1`.
pub fn gg_report(
    outcome: &PoolTestOutcome,
    reference: Option<PrevalenceRate>,
) -> Result<EstimationReport> {
    let outcome = PoolTestOutcome::new(outcome.num_pools, outcome.positive_pools, outcome.pool_size)?;
    let p_hat = gg_estimate(&outcome);
    let at = match reference {
        Some(p) => p,
        None => PrevalenceRate::new(p_hat)?,
    };
    let moments = gg_moments(at, outcome.pool_size, outcome.num_pools)?;
    let interior = at.value() > 0.0 && at.value() < 1.0;
    let asymptotic_variance = if interior {
        Some(gg_asymptotic_variance(at, outcome.pool_size, outcome.num_pools)?)
    } else {
        None
    };
    Ok(EstimationReport {
        outcome,
        p_hat,
        pool_positive_rate_hat: outcome.pool_positive_rate(),
        evaluated_at: at.value(),
        expected_p_hat: moments.expected,
        mse: moments.mse,
        asymptotic_variance,
        nrmse: (at.value() > 0.0).then(|| moments.mse.sqrt() / at.value()),
        saturated: outcome.positive_pools == outcome.num_pools,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_validation() {
        assert!(PoolTestOutcome::new(5, 6, 3).is_err());
        assert!(PoolTestOutcome::new(0, 0, 3).is_err());
        assert!(PoolTestOutcome::new(5, 2, 0).is_err());
        assert_eq!(PoolTestOutcome::new(8, 2, 3).unwrap().pool_positive_rate(), 0.25);
    }

    #[test]
    fn report_with_reference() {
        let o = PoolTestOutcome::new(100, 13, 1).unwrap();
        let r = gg_report(&o, Some(PrevalenceRate::new(0.1).unwrap())).unwrap();
        assert!((r.p_hat - 0.13).abs() < 1e-15);
        assert_eq!(r.expected_p_hat, 0.1);
        assert!((r.mse - 0.09 / 100.0).abs() < 1e-18);
        assert!((r.asymptotic_variance.unwrap() - r.mse).abs() < 1e-18);
        assert!(!r.saturated);
    }

    #[test]
    fn plug_in_and_edges() {
        let o = PoolTestOutcome::new(6, 2, 7).unwrap();
        let r = gg_report(&o, None).unwrap();
        assert_eq!(r.evaluated_at, r.p_hat);
        assert!(r.nrmse.unwrap() > 0.0);

        let all = gg_report(&PoolTestOutcome::new(10, 10, 5).unwrap(), None).unwrap();
        assert!(all.saturated);
        assert_eq!(all.p_hat, 1.0);
        assert_eq!(all.asymptotic_variance, None);

        let none = gg_report(&PoolTestOutcome::new(10, 0, 5).unwrap(), None).unwrap();
        assert_eq!(none.p_hat, 0.0);
        assert_eq!(none.mse, 0.0);
        assert_eq!(none.nrmse, None);
    }
}
