//! Seeded Monte Carlo execution of the pooling designs.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`). A seed and a replication
//! index select a generator via [`replication_rng`]: the seed keys the cipher
//! and the replication index picks its stream, so every replication draws
//! from its own fixed sequence no matter which thread runs it. Replications
//! are collected in index order and reduced sequentially, which makes every
//! summary bit-identical for a given seed regardless of the thread count.

mod particles;
mod runners;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    ArrayDesign, DorfmanDesign, GibbsGowerPlan, HypercubeDesign, PoolingDesign, SterrettDesign,
};
use crate::dilution::{pooled_false_negative_rate, DilutionScenario};
use crate::error::{invalid, Result};
use crate::estimation::{gg_estimate, PoolTestOutcome};
use crate::numeric::CompensatedSum;
use crate::prevalence::PrevalenceRate;

pub use particles::{simulate_particle_misses, ProportionEstimate};
pub use runners::{run_design_with, RunOutcome};

/// Generator for replication `rep` under `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Stream used for the pool-assignment shuffle of a stored population.
const ASSIGNMENT_STREAM: u64 = u64::MAX;

/// Infection statuses drawn i.i.d. Bernoulli(p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSample {
    pub statuses: Vec<bool>,
    pub prevalence: PrevalenceRate,
    pub seed: u64,
}

impl PopulationSample {
    pub fn len(&self) -> usize {
        self.statuses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statuses.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.statuses.iter().filter(|&&s| s).count()
    }
}

fn draw_statuses(size: usize, p: PrevalenceRate, rng: &mut ChaCha8Rng) -> Vec<bool> {
    (0..size).map(|_| rng.random_bool(p.value())).collect()
}

/// `size` i.i.d. statuses from stream 0 of `seed`; regenerating with the same
/// arguments gives the same population.
pub fn simulate_population(size: usize, p: PrevalenceRate, seed: u64) -> Result<PopulationSample> {
    if size == 0 {
        return invalid("population size must be at least 1");
    }
    let statuses = draw_statuses(size, p, &mut replication_rng(seed, 0));
    Ok(PopulationSample {
        statuses,
        prevalence: p,
        seed,
    })
}

/// Noise-free run of any classification design on a stored population.
///
/// Pools are consecutive blocks after a shuffle seeded from the population's seed.
pub fn run_design(pop: &PopulationSample, design: &PoolingDesign) -> Result<RunOutcome> {
    let mut rng = replication_rng(pop.seed, ASSIGNMENT_STREAM);
    run_design_with(&pop.statuses, design, None, &mut rng)
}

pub fn run_dorfman(pop: &PopulationSample, b: u32) -> Result<RunOutcome> {
    run_design(pop, &PoolingDesign::Dorfman(DorfmanDesign::new(b)?))
}

pub fn run_array(pop: &PopulationSample, b: u32, confirm: bool) -> Result<RunOutcome> {
    run_design(pop, &PoolingDesign::Array(ArrayDesign::new(b, confirm)?))
}

pub fn run_hypercube(pop: &PopulationSample, b: u32, d: u32, confirm: bool) -> Result<RunOutcome> {
    run_design(pop, &PoolingDesign::Hypercube(HypercubeDesign::new(b, d, confirm)?))
}

pub fn run_sterrett(pop: &PopulationSample, b: u32) -> Result<RunOutcome> {
    run_design(pop, &PoolingDesign::Sterrett(SterrettDesign::new(b)?))
}

/// One Gibbs-Gower study: `t` pools of `b` fresh individuals, returning the estimate.
pub fn run_gibbs_gower(p: PrevalenceRate, plan: &GibbsGowerPlan, seed: u64) -> Result<f64> {
    let positives = runners::gibbs_gower_positive_pools(p, plan, 0.0, &mut replication_rng(seed, 0))?;
    Ok(gg_estimate(&PoolTestOutcome::new(plan.num_pools, positives, plan.pool_size)?))
}

/// Sampling distribution of the Gibbs-Gower estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationSummary {
    pub mean_estimate: f64,
    pub se_estimate: f64,
    pub empirical_mse: f64,
    pub se_mse: f64,
    pub empirical_rmse: f64,
    /// Delta-method standard error of `empirical_rmse`.
    pub se_rmse: f64,
}

/// Aggregate of many independent replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub design: PoolingDesign,
    pub prevalence: PrevalenceRate,
    pub reps: u64,
    /// Individuals per replication.
    pub population_size: u64,
    /// Tests per person, averaged over replications.
    pub mean_tests: f64,
    /// Sample standard deviation of the per-replication mean over `sqrt(reps)`.
    pub se_tests: f64,
    /// True positives over all positives (1 when no positive was drawn).
    pub sensitivity: f64,
    /// True negatives over all negatives (1 when no negative was drawn).
    pub specificity: f64,
    pub false_negatives: u64,
    pub false_positives: u64,
    /// Share of positive pooled tests that read negative; `None` without such tests.
    pub pooled_false_negative_rate: Option<f64>,
    pub pooled_false_negative_se: Option<f64>,
    /// Present for Gibbs-Gower plans.
    pub estimation: Option<EstimationSummary>,
}

/// Per-replication record reduced into a [`MonteCarloSummary`].
struct RepRecord {
    tests_per_person: f64,
    true_positives: u64,
    false_negatives: u64,
    false_positives: u64,
    true_negatives: u64,
    pooled_positive_tests: u64,
    pooled_misses: u64,
    estimate: Option<f64>,
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().collect::<CompensatedSum>().value() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.map(|x| (x - mean) * (x - mean)).collect::<CompensatedSum>().value();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Largest population (and design unit) one replication may hold.
pub const MAX_POPULATION: u64 = 1 << 24;

/// Runs `reps` independent replications of `design` and summarizes them.
///
/// Classification designs draw a fresh population of `population_size` per
/// replication. Gibbs-Gower plans draw their own `b * t` individuals and
/// ignore `population_size`. With `noise`, each test of `k` samples holding a
/// positive reads negative with the dilution module's rate for a pool of `k`.
pub fn monte_carlo(
    design: &PoolingDesign,
    p: PrevalenceRate,
    population_size: u64,
    reps: u64,
    seed: u64,
    noise: Option<&DilutionScenario>,
) -> Result<MonteCarloSummary> {
    if reps == 0 {
        return invalid("at least one replication is required");
    }
    let noise = noise.map(|s| s.validated()).transpose()?;
    let (population_size, records) = match *design {
        PoolingDesign::GibbsGower(plan) => {
            let plan = GibbsGowerPlan::new(plan.pool_size, plan.num_pools)?;
            let miss = match noise {
                Some(s) if plan.pool_size >= 2 => pooled_false_negative_rate(&s.with_pool_size(plan.pool_size)?)?,
                Some(s) => crate::dilution::individual_false_negative_rate(&s.with_pool_size(1)?)?,
                None => 0.0,
            };
            let records = (0..reps)
                .into_par_iter()
                .map(|rep| gibbs_gower_rep(p, &plan, miss, &mut replication_rng(seed, rep)))
                .collect::<Result<Vec<_>>>()?;
            (plan.total_samples(), records)
        }
        _ => {
            if population_size == 0 {
                return invalid("population size must be at least 1");
            }
            if population_size > MAX_POPULATION || design.cluster_size() > MAX_POPULATION {
                return invalid(format!(
                    "population and design units are limited to {MAX_POPULATION} people per replication"
                ));
            }
            let size = usize::try_from(population_size)
                .map_err(|_| crate::Error::InvalidInput("population too large".into()))?;
            let records = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = replication_rng(seed, rep);
                    let statuses = draw_statuses(size, p, &mut rng);
                    let o = run_design_with(&statuses, design, noise.as_ref(), &mut rng)?;
                    Ok(RepRecord {
                        tests_per_person: o.tests_used as f64 / size as f64,
                        true_positives: o.true_positives,
                        false_negatives: o.false_negatives,
                        false_positives: o.false_positives,
                        true_negatives: o.true_negatives,
                        pooled_positive_tests: o.pooled_positive_tests,
                        pooled_misses: o.pooled_misses,
                        estimate: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (population_size, records)
        }
    };
    Ok(summarize(design, p, population_size, &records))
}

fn gibbs_gower_rep(
    p: PrevalenceRate,
    plan: &GibbsGowerPlan,
    miss: f64,
    rng: &mut ChaCha8Rng,
) -> Result<RepRecord> {
    let positives = runners::gibbs_gower_positive_pools(p, plan, miss, rng)?;
    let estimate = gg_estimate(&PoolTestOutcome::new(plan.num_pools, positives, plan.pool_size)?);
    Ok(RepRecord {
        tests_per_person: 1.0 / f64::from(plan.pool_size),
        true_positives: 0,
        false_negatives: 0,
        false_positives: 0,
        true_negatives: 0,
        pooled_positive_tests: 0,
        pooled_misses: 0,
        estimate: Some(estimate),
    })
}

fn summarize(
    design: &PoolingDesign,
    p: PrevalenceRate,
    population_size: u64,
    records: &[RepRecord],
) -> MonteCarloSummary {
    let n = records.len();
    let (mean_tests, se_tests) = mean_and_se(records.iter().map(|r| r.tests_per_person), n);
    let total = |f: fn(&RepRecord) -> u64| records.iter().map(f).sum::<u64>();
    let tp = total(|r| r.true_positives);
    let fneg = total(|r| r.false_negatives);
    let fpos = total(|r| r.false_positives);
    let tn = total(|r| r.true_negatives);
    let pooled = total(|r| r.pooled_positive_tests);
    let misses = total(|r| r.pooled_misses);
    let (pooled_false_negative_rate, pooled_false_negative_se) = if pooled > 0 {
        let rate = misses as f64 / pooled as f64;
        (Some(rate), Some((rate * (1.0 - rate) / pooled as f64).sqrt()))
    } else {
        (None, None)
    };

    let estimation = if matches!(design, PoolingDesign::GibbsGower(_)) {
        let estimates = records.iter().filter_map(|r| r.estimate);
        let (mean_estimate, se_estimate) = mean_and_se(estimates.clone(), n);
        let squared = estimates.map(|e| (e - p.value()) * (e - p.value()));
        let (empirical_mse, se_mse) = mean_and_se(squared, n);
        let empirical_rmse = empirical_mse.sqrt();
        let se_rmse = if empirical_rmse > 0.0 {
            se_mse / (2.0 * empirical_rmse)
        } else {
            0.0
        };
        Some(EstimationSummary {
            mean_estimate,
            se_estimate,
            empirical_mse,
            se_mse,
            empirical_rmse,
            se_rmse,
        })
    } else {
        None
    };

    MonteCarloSummary {
        design: *design,
        prevalence: p,
        reps: n as u64,
        population_size,
        mean_tests,
        se_tests,
        sensitivity: ratio_or_one(tp, tp + fneg),
        specificity: ratio_or_one(tn, tn + fpos),
        false_negatives: fneg,
        false_positives: fpos,
        pooled_false_negative_rate,
        pooled_false_negative_se,
        estimation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64) -> PrevalenceRate {
        PrevalenceRate::new(x).unwrap()
    }

    #[test]
    fn population_edges_and_reproducibility() {
        assert!(simulate_population(100, p(0.0), 1).unwrap().statuses.iter().all(|&s| !s));
        assert!(simulate_population(100, p(1.0), 1).unwrap().statuses.iter().all(|&s| s));
        let a = simulate_population(1000, p(0.2), 42).unwrap();
        assert_eq!(a, simulate_population(1000, p(0.2), 42).unwrap());
        assert_ne!(a.statuses, simulate_population(1000, p(0.2), 43).unwrap().statuses);
        assert!(simulate_population(0, p(0.2), 1).is_err());
    }

    #[test]
    fn population_concentration() {
        let pop = simulate_population(1_000_000, p(0.01), 2024).unwrap();
        let k = pop.positives() as f64;
        assert!((k - 1e4).abs() <= 3.0 * (1e6f64 * 0.01 * 0.99).sqrt());
    }

    #[test]
    fn zero_prevalence_single_rep() {
        let d = PoolingDesign::Dorfman(DorfmanDesign { batch_size: 5 });
        let s = monte_carlo(&d, p(0.0), 100, 1, 9, None).unwrap();
        assert_eq!(s.mean_tests, 0.2);
        assert_eq!(s.se_tests, 0.0);
        let a = PoolingDesign::Array(ArrayDesign { side: 8, confirm_stage: true });
        assert_eq!(monte_carlo(&a, p(0.0), 64, 1, 9, None).unwrap().mean_tests, 0.25);
    }

    #[test]
    fn gibbs_gower_at_zero() {
        let plan = GibbsGowerPlan { pool_size: 10, num_pools: 30 };
        assert_eq!(run_gibbs_gower(p(0.0), &plan, 5).unwrap(), 0.0);
        let d = PoolingDesign::GibbsGower(plan);
        let s = monte_carlo(&d, p(0.0), 0, 10, 5, None).unwrap();
        assert_eq!(s.estimation.unwrap().empirical_mse, 0.0);
        assert_eq!(s.population_size, 300);
    }

    #[test]
    fn rejects_bad_arguments() {
        let d = PoolingDesign::Dorfman(DorfmanDesign { batch_size: 5 });
        assert!(monte_carlo(&d, p(0.1), 100, 0, 1, None).is_err());
        assert!(monte_carlo(&d, p(0.1), 0, 10, 1, None).is_err());
    }
}
