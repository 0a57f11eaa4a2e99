//! Sterrett's sequential retesting of positive pools.
//!
//! A batch is pooled and tested. If positive, members are tested one at a
//! time; after the first positive member the untested remainder is pooled
//! again and the procedure repeats on it. When every member but the last of a
//! positive pool has tested negative, the last is known positive without a test.

use crate::design::{ConstraintSet, SterrettDesign};
use crate::error::{invalid, Result};
use crate::prevalence::PrevalenceRate;

use super::{argmin, default_search_cap};

/// Largest batch for which [`sterrett_expected_tests_per_batch`] enumerates patterns.
pub const STERRETT_ENUMERATION_LIMIT: u32 = 20;

/// Tests the Sterrett procedure spends on one batch whose infected members are
/// the set bits of `pattern` (bit `i` is member `i`).
pub fn sterrett_tests_for_pattern(pattern: u64, batch_size: u32) -> u32 {
    let mut tests = 0;
    let mut start = 0u32;
    while start < batch_size {
        tests += 1;
        let remaining = pattern >> start;
        if remaining == 0 || batch_size - start == 1 {
            break;
        }
        let first = start + remaining.trailing_zeros();
        if first == batch_size - 1 {
            tests += batch_size - 1 - start;
            break;
        }
        tests += first - start + 1;
        start = first + 1;
    }
    tests
}

/// Exact expected tests per batch by enumerating all `2^b` infection patterns.
pub fn sterrett_expected_tests_per_batch(rho: PrevalenceRate, b: u32) -> Result<f64> {
    if b < 2 {
        return invalid(format!("Sterrett batch size must be at least 2, got {b}"));
    }
    if b > STERRETT_ENUMERATION_LIMIT {
        return invalid(format!(
            "enumeration covers batch sizes up to {STERRETT_ENUMERATION_LIMIT}, got {b}; \
             use sterrett_expected_tests_recursive"
        ));
    }
    // Patterns with the same number of positives share a probability.
    let mut tests_by_positives = vec![0u64; b as usize + 1];
    for pattern in 0u64..(1u64 << b) {
        tests_by_positives[pattern.count_ones() as usize] +=
            u64::from(sterrett_tests_for_pattern(pattern, b));
    }
    let p = rho.value();
    let expected = tests_by_positives
        .iter()
        .enumerate()
        .map(|(k, &total)| total as f64 * p.powi(k as i32) * (1.0 - p).powi((b as usize - k) as i32))
        .sum();
    Ok(expected)
}

/// Exact expected tests per batch from the renewal recursion, for any `b >= 1`.
///
/// With `E(m)` the expected cost of a fresh pool of `m` samples,
/// `E(m) = 1 + sum_{i<m} q^(i-1) rho (i + E(m-i)) + q^(m-1) rho (m-1)`,
/// where the first positive member sits at position `i`.
pub fn sterrett_expected_tests_recursive(rho: PrevalenceRate, b: u32) -> Result<f64> {
    if b == 0 {
        return invalid("Sterrett batch size must be at least 1");
    }
    Ok(expected_tests_table(rho, b as usize)[b as usize])
}

/// `E(m)` for every pool size `m` in `0..=n`.
fn expected_tests_table(rho: PrevalenceRate, n: usize) -> Vec<f64> {
    let p = rho.value();
    let q = 1.0 - p;
    // first_hit[i]: probability the first positive is member i.
    let first_hit: Vec<f64> = (0..=n)
        .map(|i| if i == 0 { 0.0 } else { q.powi(i as i32 - 1) * p })
        .collect();
    let mut expected = vec![0.0f64; n + 1];
    if n >= 1 {
        expected[1] = 1.0;
    }
    for m in 2..=n {
        let mut e = 1.0;
        for i in 1..m {
            e += first_hit[i] * (i as f64 + expected[m - i]);
        }
        e += first_hit[m] * (m - 1) as f64;
        expected[m] = e;
    }
    expected
}

/// Batch size in `[2, cap]` minimizing Sterrett tests per person.
pub fn sterrett_optimal_batch(
    rho: PrevalenceRate,
    constraints: &ConstraintSet,
) -> Result<Option<SterrettDesign>> {
    let constraints = constraints.validated()?;
    rho.require_interior("Sterrett batch optimization")?;
    let cap = constraints
        .max_pool_size
        .unwrap_or_else(|| default_search_cap(rho, 0.5));
    let cap = match constraints.max_cluster_size {
        Some(c) => cap.min(u32::try_from(c).unwrap_or(u32::MAX)),
        None => cap,
    };
    if cap < 2 {
        return Ok(None);
    }
    let expected = expected_tests_table(rho, cap as usize);
    let best = argmin((2..=cap).map(|b| (b, expected[b as usize] / f64::from(b))));
    Ok(best.map(|(batch_size, _)| SterrettDesign { batch_size }))
}
