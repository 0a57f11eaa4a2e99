//! Small numerical helpers shared by the analytic modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Relative cutoff below the largest binomial weight at which terms are dropped.
pub const BINOMIAL_TRUNCATION: f64 = 1e-30;

/// Visits the non-negligible terms of Binomial(`trials`, `success`) as `(k, pmf(k))`.
///
/// Weights are built in log space by the ratio recurrence outward from the
/// mode, dropped once below [`BINOMIAL_TRUNCATION`] times the mode weight, and
/// normalized by their compensated total. `ln_success` and `ln_failure` are
/// passed separately so callers can supply both without cancellation
/// (e.g. `ln(1 - q)` via `ln(-expm1(..))`).
pub fn for_each_binomial_term(
    trials: u64,
    ln_success: f64,
    ln_failure: f64,
    mut visit: impl FnMut(u64, f64),
) {
    if ln_success == f64::NEG_INFINITY {
        visit(0, 1.0);
        return;
    }
    if ln_failure == f64::NEG_INFINITY {
        visit(trials, 1.0);
        return;
    }
    let n = trials as f64;
    let mode = ((n + 1.0) * ln_success.exp()).floor().min(n) as u64;
    let ln_odds = ln_success - ln_failure;
    let ln_cut = BINOMIAL_TRUNCATION.ln();

    let mut terms: Vec<(u64, f64)> = Vec::new();
    terms.push((mode, 0.0));
    let mut l = 0.0;
    for k in mode..trials {
        // ln pmf(k+1) - ln pmf(k)
        l += ((n - k as f64) / (k as f64 + 1.0)).ln() + ln_odds;
        if l < ln_cut {
            break;
        }
        terms.push((k + 1, l));
    }
    l = 0.0;
    for k in (1..=mode).rev() {
        // ln pmf(k-1) - ln pmf(k)
        l += (k as f64 / (n - k as f64 + 1.0)).ln() - ln_odds;
        if l < ln_cut {
            break;
        }
        terms.push((k - 1, l));
    }
    let total: CompensatedSum = terms.iter().map(|&(_, l)| l.exp()).collect();
    let total = total.value();
    for (k, l) in terms {
        visit(k, l.exp() / total);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-15).abs() < 1e-30);
    }

    #[test]
    fn binomial_weights_sum_to_one() {
        for &(n, q) in &[(10u64, 0.3f64), (100, 0.97), (100_000, 0.5), (5, 1e-9)] {
            let mut total = CompensatedSum::new();
            let mut mean = CompensatedSum::new();
            for_each_binomial_term(n, q.ln(), (-q).ln_1p(), |k, w| {
                total.add(w);
                mean.add(k as f64 * w);
            });
            assert!((total.value() - 1.0).abs() < 1e-12, "n={n} q={q}");
            assert!((mean.value() - n as f64 * q).abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn degenerate_binomials() {
        let mut seen = vec![];
        for_each_binomial_term(7, f64::NEG_INFINITY, 0.0, |k, w| seen.push((k, w)));
        assert_eq!(seen, vec![(0, 1.0)]);
        seen.clear();
        for_each_binomial_term(7, 0.0, f64::NEG_INFINITY, |k, w| seen.push((k, w)));
        assert_eq!(seen, vec![(7, 1.0)]);
    }
}
