//! Sampling moments of the Gibbs-Gower estimator.
//!
//! With `q = (1-p)^b` the chance a pool is negative, the number of negative
//! pools is Binomial(t, q) and the estimate is `1 - (negatives/t)^(1/b)`.
//! Expectations are exact binomial sums (see [`crate::numeric`]).

use crate::error::{invalid, Result};
use crate::numeric::{for_each_binomial_term, CompensatedSum};
use crate::prevalence::PrevalenceRate;

use super::PoolTestOutcome;

/// Largest pool count for which the exact sums are evaluated.
pub const MAX_EXACT_POOLS: u64 = 100_000;

/// Point estimate `1 - (1 - t+/t)^(1/b)`.
pub fn gg_estimate(outcome: &PoolTestOutcome) -> f64 {
    let t = outcome.num_pools as f64;
    let negatives = (outcome.num_pools - outcome.positive_pools) as f64;
    if outcome.positive_pools == 0 {
        return 0.0;
    }
    if negatives == 0.0 {
        return 1.0;
    }
    -((negatives / t).ln() / f64::from(outcome.pool_size)).exp_m1()
}

/// Bias and squared error of the estimator, from one pass over the binomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorMoments {
    /// `E(p_hat)`.
    pub expected: f64,
    /// `E((p_hat - p)^2)`.
    pub mse: f64,
    /// `E((1 - p_hat)^2)`, the second moment of `(negatives/t)^(1/b)`.
    pub second_moment_complement: f64,
}

fn check_sizes(b: u32, t: u64) -> Result<()> {
    if b == 0 {
        return invalid("pool size must be at least 1");
    }
    if t == 0 {
        return invalid("number of pools must be at least 1");
    }
    if t > MAX_EXACT_POOLS && b > 1 {
        return invalid(format!(
            "exact moments are limited to {MAX_EXACT_POOLS} pools, got {t}"
        ));
    }
    Ok(())
}

/// Exact moments by binomial summation, without the closed forms available at `b = 1`.
pub fn gg_moments_by_summation(p: PrevalenceRate, b: u32, t: u64) -> Result<EstimatorMoments> {
    check_sizes(b, t)?;
    if t > MAX_EXACT_POOLS {
        return invalid(format!(
            "exact moments are limited to {MAX_EXACT_POOLS} pools, got {t}"
        ));
    }
    let p = p.value();
    let b_f = f64::from(b);
    let t_f = t as f64;
    let ln_keep = (-p).ln_1p();
    let ln_q = b_f * ln_keep;
    let ln_not_q = if ln_q == f64::NEG_INFINITY {
        0.0
    } else {
        (-ln_q.exp_m1()).ln()
    };

    let mut bias = CompensatedSum::new();
    let mut mse = CompensatedSum::new();
    let mut second = CompensatedSum::new();
    for_each_binomial_term(t, ln_q, ln_not_q, |negatives, w| {
        // err = p_hat - p = (1 - p) - (negatives/t)^(1/b), formed without cancellation.
        let (err, x) = if negatives == 0 {
            (1.0 - p, 0.0)
        } else {
            let ln_x = (negatives as f64 / t_f).ln() / b_f;
            ((1.0 - p) * -(ln_x - ln_keep).exp_m1(), ln_x.exp())
        };
        bias.add(w * err);
        mse.add(w * err * err);
        second.add(w * x * x);
    });
    Ok(EstimatorMoments {
        expected: p + bias.value(),
        mse: mse.value(),
        second_moment_complement: second.value(),
    })
}

/// Exact moments; `b = 1` uses the closed forms `E = p`, `MSE = p(1-p)/t`.
pub fn gg_moments(p: PrevalenceRate, b: u32, t: u64) -> Result<EstimatorMoments> {
    check_sizes(b, t)?;
    if b == 1 {
        let pv = p.value();
        let mse = pv * (1.0 - pv) / t as f64;
        return Ok(EstimatorMoments {
            expected: pv,
            mse,
            second_moment_complement: mse + (1.0 - pv) * (1.0 - pv),
        });
    }
    gg_moments_by_summation(p, b, t)
}

/// `E(p_hat)` for `t` pools of size `b`.
pub fn gg_expected_estimate(p: PrevalenceRate, b: u32, t: u64) -> Result<f64> {
    Ok(gg_moments(p, b, t)?.expected)
}

/// Exact mean squared error `E((p_hat - p)^2)`.
pub fn gg_mse(p: PrevalenceRate, b: u32, t: u64) -> Result<f64> {
    Ok(gg_moments(p, b, t)?.mse)
}

/// MSE through the expanded identity `E(X^2) + (p - 1)(p + 1 - 2 E(p_hat))`.
///
/// Algebraically equal to [`gg_mse`] but loses relative accuracy once the MSE
/// is small next to one; kept as an independent cross-check.
pub fn gg_mse_expanded(p: PrevalenceRate, b: u32, t: u64) -> Result<f64> {
    let m = gg_moments_by_summation(p, b, t)?;
    let pv = p.value();
    Ok(m.second_moment_complement + (pv - 1.0) * (pv + 1.0 - 2.0 * m.expected))
}

/// Large-`t` variance `(1 - (1-p)^b) / (t b^2 (1-p)^(b-2))`.
pub fn gg_asymptotic_variance(p: PrevalenceRate, b: u32, t: u64) -> Result<f64> {
    p.require_interior("the asymptotic variance")?;
    check_sizes(b, 1)?;
    if t == 0 {
        return invalid("number of pools must be at least 1");
    }
    let b_f = f64::from(b);
    let ln_keep = (-p.value()).ln_1p();
    let positive = -(b_f * ln_keep).exp_m1();
    Ok(positive / (t as f64 * b_f * b_f * ((b_f - 2.0) * ln_keep).exp()))
}
