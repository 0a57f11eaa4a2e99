//! Executes each architecture test by test on a concrete population.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::design::{cluster_size, GibbsGowerPlan, PoolingDesign};
use crate::dilution::{individual_false_negative_rate, pooled_false_negative_rate, DilutionScenario};
use crate::error::{invalid, Result};
use crate::prevalence::PrevalenceRate;

/// What one pass of a design over a population cost and concluded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub tests_used: u64,
    /// Population indices called positive, ascending.
    pub classified_positive: Vec<usize>,
    /// Population indices called negative, ascending.
    pub classified_negative: Vec<usize>,
    pub true_positives: u64,
    pub false_negatives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    /// Tests on pools of two or more that held at least one positive.
    pub pooled_positive_tests: u64,
    /// How many of those came back negative (dilution noise only).
    pub pooled_misses: u64,
}

/// Per-pool-size miss probabilities from a dilution scenario.
struct NoiseModel {
    scenario: DilutionScenario,
    miss_by_size: Vec<Option<f64>>,
}

impl NoiseModel {
    fn new(scenario: &DilutionScenario) -> Result<Self> {
        Ok(Self {
            scenario: scenario.validated()?,
            miss_by_size: Vec::new(),
        })
    }

    fn miss_probability(&mut self, size: usize) -> Result<f64> {
        if self.miss_by_size.len() <= size {
            self.miss_by_size.resize(size + 1, None);
        }
        if let Some(m) = self.miss_by_size[size] {
            return Ok(m);
        }
        let k = u32::try_from(size).map_err(|_| crate::Error::InvalidInput("pool too large".into()))?;
        let scenario = self.scenario.with_pool_size(k)?;
        let m = if k == 1 {
            individual_false_negative_rate(&scenario)?
        } else {
            pooled_false_negative_rate(&scenario)?
        };
        self.miss_by_size[size] = Some(m);
        Ok(m)
    }
}

/// Runs tests against ground truth, counting them and applying optional noise.
struct Bench<'a> {
    statuses: &'a [bool],
    noise: Option<NoiseModel>,
    rng: &'a mut ChaCha8Rng,
    tests: u64,
    pooled_positive_tests: u64,
    pooled_misses: u64,
    calls: Vec<Option<bool>>,
}

impl<'a> Bench<'a> {
    fn test(&mut self, members: &[usize]) -> Result<bool> {
        debug_assert!(!members.is_empty());
        self.tests += 1;
        let truth = members.iter().any(|&i| self.statuses[i]);
        if !truth {
            return Ok(false);
        }
        let missed = match self.noise.as_mut() {
            Some(noise) => {
                let m = noise.miss_probability(members.len())?;
                m > 0.0 && self.rng.random_bool(m)
            }
            None => false,
        };
        if members.len() >= 2 {
            self.pooled_positive_tests += 1;
            if missed {
                self.pooled_misses += 1;
            }
        }
        Ok(!missed)
    }

    fn call(&mut self, member: usize, positive: bool) {
        self.calls[member] = Some(positive);
    }

    fn finish(self) -> RunOutcome {
        let mut out = RunOutcome {
            tests_used: self.tests,
            classified_positive: Vec::new(),
            classified_negative: Vec::new(),
            true_positives: 0,
            false_negatives: 0,
            false_positives: 0,
            true_negatives: 0,
            pooled_positive_tests: self.pooled_positive_tests,
            pooled_misses: self.pooled_misses,
        };
        for (i, call) in self.calls.iter().enumerate() {
            let called = call.expect("every member is classified");
            match (self.statuses[i], called) {
                (true, true) => out.true_positives += 1,
                (true, false) => out.false_negatives += 1,
                (false, true) => out.false_positives += 1,
                (false, false) => out.true_negatives += 1,
            }
            if called {
                out.classified_positive.push(i);
            } else {
                out.classified_negative.push(i);
            }
        }
        out
    }
}

fn dorfman(bench: &mut Bench, order: &[usize], b: usize) -> Result<()> {
    for batch in order.chunks(b) {
        if batch.len() > 1 && !bench.test(batch)? {
            for &m in batch {
                bench.call(m, false);
            }
            continue;
        }
        for &m in batch {
            let r = bench.test(&[m])?;
            bench.call(m, r);
        }
    }
    Ok(())
}

fn sterrett(bench: &mut Bench, order: &[usize], b: usize) -> Result<()> {
    for batch in order.chunks(b) {
        let mut start = 0;
        while start < batch.len() {
            let rest = &batch[start..];
            if rest.len() == 1 {
                let r = bench.test(rest)?;
                bench.call(rest[0], r);
                break;
            }
            if !bench.test(rest)? {
                for &m in rest {
                    bench.call(m, false);
                }
                break;
            }
            let mut i = start;
            loop {
                if i == batch.len() - 1 {
                    // Positive pool whose other members all tested negative.
                    bench.call(batch[i], true);
                    start = batch.len();
                    break;
                }
                if bench.test(&[batch[i]])? {
                    bench.call(batch[i], true);
                    start = i + 1;
                    break;
                }
                bench.call(batch[i], false);
                i += 1;
            }
        }
    }
    Ok(())
}

/// Every axis-parallel line of each `side^dim` cluster is tested; cells whose
/// lines are all positive are confirmed individually or presumed positive.
fn slices(bench: &mut Bench, order: &[usize], side: usize, dim: u32, confirm: bool) -> Result<()> {
    let cells = side.pow(dim);
    let mut positive_lines = vec![0u32; cells];
    let mut line = Vec::with_capacity(side);
    for cluster in order.chunks(cells) {
        // Cells past the end of the population are known-negative padding.
        let member = |c: usize| cluster.get(c).copied();
        positive_lines.iter_mut().for_each(|n| *n = 0);
        let mut stride = 1;
        for _axis in 0..dim {
            for base in 0..cells {
                if (base / stride) % side != 0 {
                    continue;
                }
                line.clear();
                line.extend((0..side).filter_map(|j| member(base + j * stride)));
                if line.is_empty() || !bench.test(&line)? {
                    continue;
                }
                for j in 0..side {
                    positive_lines[base + j * stride] += 1;
                }
            }
            stride *= side;
        }
        for (c, &m) in cluster.iter().enumerate() {
            let candidate = positive_lines[c] == dim;
            let call = if candidate && confirm {
                bench.test(&[m])?
            } else {
                candidate
            };
            bench.call(m, call);
        }
    }
    Ok(())
}

/// Runs a classification design over `statuses` with an explicit generator
/// for the pool assignment shuffle and the noise draws.
pub fn run_design_with(
    statuses: &[bool],
    design: &PoolingDesign,
    noise: Option<&DilutionScenario>,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutcome> {
    if statuses.is_empty() {
        return invalid("population must not be empty");
    }
    let mut order: Vec<usize> = (0..statuses.len()).collect();
    order.shuffle(rng);
    let mut bench = Bench {
        statuses,
        noise: noise.map(NoiseModel::new).transpose()?,
        rng,
        tests: 0,
        pooled_positive_tests: 0,
        pooled_misses: 0,
        calls: vec![None; statuses.len()],
    };
    match *design {
        PoolingDesign::Dorfman(d) => {
            if d.batch_size == 0 {
                return invalid("Dorfman batch size must be at least 1");
            }
            dorfman(&mut bench, &order, d.batch_size as usize)?
        }
        PoolingDesign::Sterrett(s) => {
            if s.batch_size < 2 {
                return invalid("Sterrett batch size must be at least 2");
            }
            sterrett(&mut bench, &order, s.batch_size as usize)?
        }
        PoolingDesign::Array(a) => {
            if a.side < 2 {
                return invalid("array side must be at least 2");
            }
            slices(&mut bench, &order, a.side as usize, 2, a.confirm_stage)?
        }
        PoolingDesign::Hypercube(h) => {
            let cells = cluster_size(h.side, h.dimension).filter(|&c| c <= 1 << 24);
            if h.side < 2 || h.dimension < 2 || cells.is_none() {
                return invalid("hypercube needs side >= 2, dimension >= 2 and at most 2^24 cells");
            }
            slices(&mut bench, &order, h.side as usize, h.dimension, h.confirm_stage)?
        }
        PoolingDesign::GibbsGower(_) => {
            return invalid("Gibbs-Gower plans estimate prevalence; use run_gibbs_gower");
        }
    }
    Ok(bench.finish())
}

/// Positive pools among `plan.num_pools` pools of i.i.d. individuals, with
/// each positive pool missed with the dilution probability when `noise` is set.
///
/// Positives are placed by geometric gaps; after a hit the rest of that pool
/// is skipped, which is exact because the gaps are memoryless.
pub(crate) fn gibbs_gower_positive_pools(
    p: PrevalenceRate,
    plan: &GibbsGowerPlan,
    miss_probability: f64,
    rng: &mut ChaCha8Rng,
) -> Result<u64> {
    let plan = GibbsGowerPlan::new(plan.pool_size, plan.num_pools)?;
    if p.value() == 0.0 {
        return Ok(0);
    }
    let b = u64::from(plan.pool_size);
    let n = plan
        .num_pools
        .checked_mul(b)
        .ok_or_else(|| crate::Error::InvalidInput("plan too large".into()))?;
    let gaps = Geometric::new(p.value()).map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
    let mut positive = 0;
    let mut next = 0u64;
    loop {
        let idx = next.saturating_add(gaps.sample(rng));
        if idx >= n {
            break;
        }
        let pool = idx / b;
        if miss_probability <= 0.0 || !rng.random_bool(miss_probability) {
            positive += 1;
        }
        next = (pool + 1) * b;
    }
    Ok(positive)
}
