//! The simulator against the analytic formulas and against exact oracles
//! written here independently of the library.

use grouptest::analytics::{
    array_expected_tests_per_person, dorfman_expected_tests_per_person,
    hypercube_expected_tests_per_person, sterrett_expected_tests_per_batch,
};
use grouptest::dilution::{individual_false_negative_rate, pooled_false_negative_rate, DilutionScenario};
use grouptest::estimation::{gg_expected_estimate, gg_mse};
use grouptest::simulation::{monte_carlo, run_gibbs_gower, simulate_particle_misses, MonteCarloSummary};
use grouptest::{
    ArrayDesign, DorfmanDesign, GibbsGowerPlan, HypercubeDesign, PoolingDesign, PrevalenceRate,
    SterrettDesign,
};

fn p(x: f64) -> PrevalenceRate {
    PrevalenceRate::new(x).unwrap()
}

fn within_se(value: f64, target: f64, se: f64, k: f64) -> bool {
    (value - target).abs() <= k * se
}

/// Exact tests per person for slice designs with confirmation.
///
/// Lines cost `d/b` per person. A positive cell is always a candidate; a
/// negative one is a candidate when each of its `d` lines, which share only
/// that cell, holds a positive among the other `b - 1` cells.
fn exact_slice_cost(rho: f64, b: u32, d: u32) -> f64 {
    let others_clear = (1.0 - rho).powi(b as i32 - 1);
    let ghost = (1.0 - others_clear).powi(d as i32);
    f64::from(d) / f64::from(b) + rho + (1.0 - rho) * ghost
}

fn run(design: PoolingDesign, rho: f64, population: u64, reps: u64, seed: u64) -> MonteCarloSummary {
    monte_carlo(&design, p(rho), population, reps, seed, None).unwrap()
}

#[test]
fn dorfman_matches_formula() {
    for &(rho, b) in &[(0.05, 5u32), (0.01, 11), (0.2, 3), (0.003, 19)] {
        let s = run(PoolingDesign::Dorfman(DorfmanDesign { batch_size: b }), rho, u64::from(b) * 10, 10_000, 11);
        let formula = dorfman_expected_tests_per_person(p(rho), b).unwrap();
        assert!(within_se(s.mean_tests, formula, s.se_tests, 3.0), "rho={rho} b={b}: {s:?} vs {formula}");
        assert_eq!((s.sensitivity, s.specificity), (1.0, 1.0));
    }
    // 10^5 batches of five at 5%: within 1% of 0.42622.
    let s = run(PoolingDesign::Dorfman(DorfmanDesign { batch_size: 5 }), 0.05, 5, 100_000, 5);
    assert!((s.mean_tests - 0.42622).abs() / 0.42622 < 0.01);
    assert!(within_se(s.mean_tests, 0.426219, s.se_tests, 3.0));
}

#[test]
fn sterrett_matches_enumeration() {
    for &(rho, b) in &[(0.3, 2u32), (0.03, 9), (0.1, 6)] {
        let s = run(PoolingDesign::Sterrett(SterrettDesign { batch_size: b }), rho, u64::from(b), 100_000, 21);
        let exact = sterrett_expected_tests_per_batch(p(rho), b).unwrap() / f64::from(b);
        assert!(within_se(s.mean_tests, exact, s.se_tests, 3.0), "rho={rho} b={b}: {} vs {exact}", s.mean_tests);
        assert_eq!((s.sensitivity, s.specificity), (1.0, 1.0));
    }
    let s = run(PoolingDesign::Sterrett(SterrettDesign { batch_size: 9 }), 0.03, 9, 100_000, 4);
    let gain = 1.0 / s.mean_tests;
    let gain_se = s.se_tests / (s.mean_tests * s.mean_tests);
    assert!((gain - 3.70).abs() <= 3.0 * gain_se + 0.02 * 3.70, "{gain}");
}

#[test]
fn array_matches_exact_oracle_not_formula() {
    for &(rho, b) in &[(0.01, 8u32), (0.03, 12), (0.05, 8)] {
        let design = PoolingDesign::Array(ArrayDesign { side: b, confirm_stage: true });
        let s = run(design, rho, u64::from(b * b), 20_000, 8);
        let exact = exact_slice_cost(rho, b, 2);
        assert!(within_se(s.mean_tests, exact, s.se_tests, 3.0), "rho={rho} b={b}: {} vs {exact}", s.mean_tests);
        assert_eq!((s.sensitivity, s.specificity), (1.0, 1.0));
        let formula = array_expected_tests_per_person(p(rho), b, true).unwrap();
        // The independence approximation undercounts candidates.
        assert!(formula < exact);
        println!(
            "array b={b} rho={rho}: simulated {:.5} exact {exact:.5} formula {formula:.5} gap {:.2}%",
            s.mean_tests,
            100.0 * (exact - formula) / exact
        );
    }
}

#[test]
fn hypercube_matches_exact_oracle() {
    for &(rho, b, d) in &[(0.01, 8u32, 3u32), (0.005, 6, 3), (0.02, 4, 4)] {
        let design = PoolingDesign::Hypercube(HypercubeDesign { side: b, dimension: d, confirm_stage: true });
        let s = run(design, rho, u64::from(b).pow(d), 4_000, 3);
        let exact = exact_slice_cost(rho, b, d);
        assert!(within_se(s.mean_tests, exact, s.se_tests, 3.0), "rho={rho} b={b} d={d}: {} vs {exact}", s.mean_tests);
        assert_eq!((s.sensitivity, s.specificity), (1.0, 1.0));
        let formula = hypercube_expected_tests_per_person(p(rho), b, d).unwrap();
        println!(
            "hypercube b={b} d={d} rho={rho}: simulated {:.5} exact {exact:.5} formula {formula:.5}",
            s.mean_tests
        );
    }
}

#[test]
fn presumptive_array_loses_specificity_only() {
    let rho = 0.05;
    let b = 8u32;
    let design = PoolingDesign::Array(ArrayDesign { side: b, confirm_stage: false });
    let s = run(design, rho, 64, 20_000, 17);
    assert_eq!(s.mean_tests, 0.25);
    assert_eq!(s.sensitivity, 1.0);
    assert!(s.specificity < 1.0);
    // A negative cell is called positive when both its lines hold another positive.
    let ghost = (1.0 - (1.0 - rho).powi(b as i32 - 1)).powi(2);
    let negatives = 64.0 * 20_000.0 * (1.0 - rho);
    let fp_rate = s.false_positives as f64 / negatives;
    // Ghosts within a grid are correlated, so compare loosely.
    assert!((fp_rate - ghost).abs() / ghost < 0.05, "{fp_rate} vs {ghost}");
}

#[test]
fn gibbs_gower_nrmse_at_rule_of_thumb() {
    let plan = GibbsGowerPlan { pool_size: 8, num_pools: 600 };
    let s = run(PoolingDesign::GibbsGower(plan), 0.01, 0, 10_000, 99);
    let e = s.estimation.unwrap();
    let nrmse = e.empirical_rmse / 0.01;
    assert!((0.135..=0.157).contains(&nrmse), "{nrmse}");
    assert_eq!(s.mean_tests, 0.125);
}

#[test]
fn gibbs_gower_moments_match_exact_sums() {
    let rho = 0.05;
    let plan = GibbsGowerPlan { pool_size: 28, num_pools: 100 };
    let s = run(PoolingDesign::GibbsGower(plan), rho, 0, 1_000_000, 2020);
    let e = s.estimation.unwrap();
    let exact_mse = gg_mse(p(rho), 28, 100).unwrap();
    let exact_mean = gg_expected_estimate(p(rho), 28, 100).unwrap();
    assert!(within_se(e.empirical_mse, exact_mse, e.se_mse, 3.0), "{} vs {exact_mse}", e.empirical_mse);
    assert!(within_se(e.mean_estimate, exact_mean, e.se_estimate, 3.0), "{} vs {exact_mean}", e.mean_estimate);
    assert!((e.empirical_rmse - 6.28e-3).abs() / 6.28e-3 < 0.005);

    for &(rho, b, t) in &[(0.1, 13u32, 70u64), (0.003, 30, 200), (0.3, 4, 40)] {
        let s = run(PoolingDesign::GibbsGower(GibbsGowerPlan { pool_size: b, num_pools: t }), rho, 0, 200_000, 5);
        let e = s.estimation.unwrap();
        let exact_mean = gg_expected_estimate(p(rho), b, t).unwrap();
        assert!(within_se(e.mean_estimate, exact_mean, e.se_estimate, 3.0), "{rho} {b} {t}");
        let exact_mse = gg_mse(p(rho), b, t).unwrap();
        assert!(within_se(e.empirical_mse, exact_mse, e.se_mse, 3.0), "{rho} {b} {t}");
    }
}

#[test]
fn single_gibbs_gower_run_is_reproducible() {
    let plan = GibbsGowerPlan { pool_size: 7, num_pools: 6 };
    let a = run_gibbs_gower(p(0.05), &plan, 1).unwrap();
    assert_eq!(a, run_gibbs_gower(p(0.05), &plan, 1).unwrap());
    assert!((0.0..=1.0).contains(&a));
}

fn dilution(pool: u32, rho: f64) -> DilutionScenario {
    DilutionScenario::new(0.05, 1.0, 100.0, pool, p(rho)).unwrap()
}

#[test]
fn dilution_noise_reproduces_pooled_rate() {
    let rho = 0.01;
    let noise = dilution(10, rho);
    let design = PoolingDesign::Dorfman(DorfmanDesign { batch_size: 10 });
    let s = monte_carlo(&design, p(rho), 1000, 2_000, 77, Some(&noise)).unwrap();
    let rate = s.pooled_false_negative_rate.unwrap();
    let se = s.pooled_false_negative_se.unwrap();
    let expected = pooled_false_negative_rate(&noise).unwrap();
    assert!(within_se(rate, expected, se, 3.0), "{rate} ± {se} vs {expected}");
    assert!(s.sensitivity < 1.0);
    assert_eq!(s.specificity, 1.0);
}

#[test]
fn particle_placement_reproduces_individual_rate() {
    let scenario = dilution(1, 0.01);
    let particles = scenario.particles_per_sample().ceil() as u64;
    let sim = simulate_particle_misses(particles, scenario.tested_fraction(), 100_000, 31).unwrap();
    let formula = individual_false_negative_rate(&scenario).unwrap();
    assert!(within_se(sim.rate, formula, sim.se, 3.0), "{sim:?} vs {formula}");

    // A pool of ten draws a tenth as much from each sample.
    let sim = simulate_particle_misses(particles, scenario.tested_fraction() / 10.0, 100_000, 32).unwrap();
    let one_positive = pooled_false_negative_rate(&DilutionScenario {
        prevalence: p(0.0),
        ..dilution(10, 0.01)
    })
    .unwrap();
    assert!(within_se(sim.rate, one_positive, sim.se, 3.0), "{sim:?} vs {one_positive}");
}

#[test]
fn summaries_do_not_depend_on_thread_count() {
    let designs = [
        PoolingDesign::Dorfman(DorfmanDesign { batch_size: 7 }),
        PoolingDesign::Array(ArrayDesign { side: 6, confirm_stage: false }),
        PoolingDesign::GibbsGower(GibbsGowerPlan { pool_size: 9, num_pools: 50 }),
    ];
    let noise = dilution(1, 0.05);
    for design in designs {
        let go = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| monte_carlo(&design, p(0.05), 200, 3_000, 123, Some(&noise)).unwrap())
        };
        let one = go(1);
        let four = go(4);
        assert_eq!(one, four, "{design}");
        assert_eq!(one.mean_tests.to_bits(), four.mean_tests.to_bits());
    }
}
