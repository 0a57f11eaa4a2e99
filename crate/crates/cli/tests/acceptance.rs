//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line per
//! check and a summary line. Tolerances are pinned in the constants below.
//!
//! Run with `cargo test -p grouptest-cli --test acceptance -- --nocapture --test-threads=1`
//! to see every line.

use grouptest::analytics::{
    array_expected_tests_per_person, dorfman_expected_tests_per_person,
    hypercube_expected_tests_per_person, sterrett_expected_tests_per_batch,
};
use grouptest::dilution::{individual_false_negative_rate, pooled_false_negative_rate, DilutionScenario};
use grouptest::estimation::{
    gg_asymptotic_variance, gg_expected_estimate, gg_mse, gg_tests_needed, VarianceModel,
};
use grouptest::lambert::lambert_w0;
use grouptest::simulation::monte_carlo;
use grouptest::{
    ArrayDesign, ConstraintSet, DorfmanDesign, GibbsGowerPlan, HypercubeDesign, PoolingDesign,
    PrevalenceRate, SterrettDesign,
};
use grouptest_cli::tables::{
    architecture_example, cost_row, estimation_gain, generate, guideline_row, rmse_row,
    tests_needed_row, Cell, TableId, EXEC_ESTIMATION_CAP, EXEC_ESTIMATION_PREVALENCES,
    GUIDELINE_CASES,
};

/// Relative tolerance on printed efficiency gains in the architecture comparison.
const GAIN_REL_TOL: f64 = 0.02;
/// Allowed deviation in pool size around the classification chart's rows.
const CHART_POOL_TOL: i64 = 1;
/// Pool-size and relative-gain tolerances for the estimation chart.
const ESTIMATION_POOL_TOL: i64 = 1;
const ESTIMATION_GAIN_REL_TOL: f64 = 0.05;
/// Relative tolerance for the Dorfman and pooled columns of the 100-test table.
const RMSE_REL_TOL: f64 = 0.02;
/// Pool-size tolerance for the 100-test table.
const RMSE_POOL_TOL: i64 = 2;
/// Test-count and pool-size tolerances for the optimal column of the tests-needed table.
const NEEDED_TESTS_TOL: i64 = 1;
const NEEDED_POOL_TOL: i64 = 3;
/// Relative tolerance on the cost-optimized plans.
const COST_REL_TOL: f64 = 0.05;
/// Absolute tolerance, in percentage points, on the rule-of-thumb NRMSE values.
const NRMSE_PP_TOL: f64 = 0.4;
/// Monte Carlo agreement in standard errors.
const SE_MULTIPLIER: f64 = 3.0;
/// Largest accepted relative gap between slice-design formulas and simulation.
const SLICE_GAP_TOL: f64 = 0.05;
/// Back-substitution residual allowed for the Lambert W function.
const LAMBERT_TOL: f64 = 1e-12;

fn p(x: f64) -> PrevalenceRate {
    PrevalenceRate::new(x).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Criterion {
    number: u32,
    name: &'static str,
    failures: usize,
    checks: usize,
}

impl Criterion {
    fn new(number: u32, name: &'static str) -> Self {
        Self { number, name, failures: 0, checks: 0 }
    }

    fn check(&mut self, pass: bool, what: impl AsRef<str>) {
        self.checks += 1;
        if !pass {
            self.failures += 1;
        }
        println!(
            "  [{}] {}: {}",
            if pass { "PASS" } else { "FAIL" },
            self.number,
            what.as_ref()
        );
    }

    fn finish(self) {
        let verdict = if self.failures == 0 { "PASS" } else { "FAIL" };
        println!(
            "criterion {} ({}): {verdict} ({} of {} checks passed)",
            self.number,
            self.name,
            self.checks - self.failures,
            self.checks
        );
        assert_eq!(self.failures, 0, "criterion {} failed {} checks", self.number, self.failures);
    }
}

#[test]
fn criterion_01_architecture_comparison() {
    let mut c = Criterion::new(1, "classification architectures at 30%, 3%, 0.3%");
    let dorfman_b = [(0.3, 3u32), (0.03, 6), (0.003, 19)];
    for (rho, b) in dorfman_b {
        let e = architecture_example(rho).unwrap();
        c.check(e.dorfman_batch == b, format!("Dorfman optimal b at {rho}: {} (expected {b})", e.dorfman_batch));
    }
    for (rho, b) in [(0.03, Some(12u32)), (0.003, Some(52)), (0.3, None)] {
        let e = architecture_example(rho).unwrap();
        c.check(e.array_side == b, format!("array optimal b at {rho}: {:?} (expected {b:?})", e.array_side));
    }
    let printed = [
        (0.03, "Dorfman", 3.03),
        (0.03, "Sterrett", 3.70),
        (0.03, "array", 3.84),
        (0.003, "Dorfman", 9.09),
        (0.003, "Sterrett", 12.50),
        (0.003, "array", 16.84),
        (0.3, "Dorfman", 1.01),
        (0.3, "Sterrett", 1.11),
    ];
    for (rho, arch, value) in printed {
        let e = architecture_example(rho).unwrap();
        let got = match arch {
            "Dorfman" => e.dorfman_gain,
            "Sterrett" => e.sterrett_gain,
            _ => e.array_gain,
        };
        c.check(
            rel(got, value) <= GAIN_REL_TOL,
            format!("{arch} individuals/test at {rho}: {got:.4} vs {value} (±{}%)", GAIN_REL_TOL * 100.0),
        );
    }
    c.finish();
}

#[test]
fn criterion_02_classification_chart() {
    let mut c = Criterion::new(2, "classification chart band midpoints");
    let rows = [
        (0.20, 3u32, 1.0, 1.5),
        (0.09, 4, 1.5, 2.0),
        (0.05, 5, 2.0, 2.5),
        (0.034, 6, 2.5, 3.0),
        (0.024, 7, 3.0, 3.5),
        (0.01, 8, 3.5, 8.0),
    ];
    for (rho, b, lo, hi) in rows {
        let d = grouptest::analytics::dorfman_optimal_batch(p(rho), &ConstraintSet::unconstrained()).unwrap();
        let gain = 1.0 / dorfman_expected_tests_per_person(p(rho), d.batch_size).unwrap();
        c.check(
            (i64::from(d.batch_size) - i64::from(b)).abs() <= CHART_POOL_TOL,
            format!("uncapped optimal b at {rho}: {} (chart {b}, ±{CHART_POOL_TOL})", d.batch_size),
        );
        c.check((lo..=hi).contains(&gain), format!("gain at {rho}: {gain:.3} in [{lo}, {hi}]"));
    }
    c.finish();
}

#[test]
fn criterion_03_estimation_chart() {
    let mut c = Criterion::new(3, "estimation chart, pools of at most 20");
    let printed = [
        (20u32, 20.0),
        (20, 20.0),
        (20, 19.0),
        (20, 18.0),
        (20, 16.0),
        (20, 11.0),
        (13, 5.8),
        (6, 2.9),
        (4, 2.0),
    ];
    for (&rho, &(b, gain)) in EXEC_ESTIMATION_PREVALENCES.iter().zip(printed.iter()) {
        let r = estimation_gain(rho, Some(EXEC_ESTIMATION_CAP)).unwrap();
        c.check(
            (i64::from(r.pool_size) - i64::from(b)).abs() <= ESTIMATION_POOL_TOL,
            format!("pool size at {rho}: {} (expected {b} ±{ESTIMATION_POOL_TOL})", r.pool_size),
        );
        c.check(
            rel(r.gain, gain) <= ESTIMATION_GAIN_REL_TOL,
            format!("gain at {rho}: {:.3} vs {gain} (±{}%)", r.gain, ESTIMATION_GAIN_REL_TOL * 100.0),
        );
    }
    c.finish();
}

/// Rounds to three significant digits, as the printed tables do.
fn three_significant(x: f64) -> f64 {
    let scale = 10f64.powi(2 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

#[test]
fn criterion_04_rmse_with_100_tests() {
    let mut c = Criterion::new(4, "root MSE with 100 tests");
    let printed = [
        (0.05, 2.18e-2, 1.42e-2, 6.28e-3, 28u32),
        (0.01, 9.95e-3, 4.40e-3, 1.28e-3, 143),
        (0.001, 3.16e-3, 7.92e-4, 1.29e-4, 1428),
        (0.0001, 1.00e-3, 1.41e-4, 1.29e-5, 13726),
    ];
    for (rho, individual, dorfman, pooled, b) in printed {
        let r = rmse_row(rho).unwrap();
        let oracle = (rho * (1.0 - rho) / 100.0).sqrt();
        c.check(
            r.individual_rmse == oracle && three_significant(r.individual_rmse) == individual,
            format!("non-group RMSE at {rho}: {:.4e} (printed {individual:.2e})", r.individual_rmse),
        );
        c.check(
            rel(r.dorfman_rmse, dorfman) <= RMSE_REL_TOL,
            format!("Dorfman RMSE at {rho}: {:.4e} vs {dorfman:.2e}", r.dorfman_rmse),
        );
        c.check(
            rel(r.pooled_rmse, pooled) <= RMSE_REL_TOL,
            format!("Gibbs–Gower RMSE at {rho}: {:.4e} vs {pooled:.2e}", r.pooled_rmse),
        );
        c.check(
            (i64::from(r.pool_size) - i64::from(b)).abs() <= RMSE_POOL_TOL,
            format!("Gibbs–Gower optimal b at {rho}: {} vs {b} (±{RMSE_POOL_TOL})", r.pool_size),
        );
    }
    c.finish();
}

#[test]
fn criterion_05_tests_for_target() {
    let mut c = Criterion::new(5, "tests needed for 15% NRMSE");
    let printed = [
        (0.05, 845u64, 189u64, 73u64, 27u32),
        (0.01, 4400, 899, 76, 138),
        (0.001, 44400, 8899, 77, 1320),
        (0.0001, 444400, 88899, 79, 12150),
    ];
    for (rho, individual, five, tests, b) in printed {
        let r = tests_needed_row(rho).unwrap();
        c.check(r.individual == individual, format!("non-group tests at {rho}: {} (expected {individual})", r.individual));
        c.check(r.pools_of_five == five, format!("b=5 tests at {rho}: {} (expected {five})", r.pools_of_five));
        c.check(
            (r.optimal_tests as i64 - tests as i64).abs() <= NEEDED_TESTS_TOL,
            format!("optimal tests at {rho}: {} vs {tests} (±{NEEDED_TESTS_TOL})", r.optimal_tests),
        );
        c.check(
            (i64::from(r.optimal_pool_size) - i64::from(b)).abs() <= NEEDED_POOL_TOL,
            format!("optimal b at {rho}: {} vs {b} (±{NEEDED_POOL_TOL})", r.optimal_pool_size),
        );
    }
    c.finish();
}

#[test]
fn criterion_06_cost_optimized() {
    let mut c = Criterion::new(6, "plans minimizing samples + 10 x tests");
    let printed = [(0.05, 13.0, 93.0, 1209.0), (0.01, 37.0, 145.0, 5365.0), (0.001, 131.0, 363.0, 47553.0)];
    for (rho, b, t, s) in printed {
        let r = cost_row(rho).unwrap();
        for (what, got, want) in [("b", f64::from(r.pool_size), b), ("t", r.tests as f64, t), ("samples", r.samples as f64, s)] {
            c.check(
                rel(got, want) <= COST_REL_TOL,
                format!("{what} at {rho}: {got} vs {want} (±{}%)", COST_REL_TOL * 100.0),
            );
        }
    }
    c.finish();
}

#[test]
fn criterion_07_rule_of_thumb_nrmse() {
    let mut c = Criterion::new(7, "rule-of-thumb NRMSE, asymptotic variance");
    let printed = [14.5, 14.6, 15.5, 17.0, 14.9, 17.3];
    for (&(rho, b), want) in GUIDELINE_CASES.iter().zip(printed) {
        let r = guideline_row(rho, b).unwrap();
        let got = 100.0 * r.asymptotic_nrmse;
        c.check(
            (got - want).abs() <= NRMSE_PP_TOL,
            format!(
                "p={rho} b={b} t={}: {got:.2}% vs {want}% (±{NRMSE_PP_TOL} pp; exact MSE gives {:.2}%)",
                r.tests,
                100.0 * r.nrmse
            ),
        );
    }
    c.finish();
}

#[test]
fn criterion_08_dorfman_array_crossover() {
    let mut c = Criterion::new(8, "Dorfman (b ≤ 8) vs 8x8 array crossovers");
    let roots = grouptest::analytics::dorfman_array_crossovers(8, 8, 0.001, 0.3, 400).unwrap();
    c.check(roots.len() == 2, format!("{} crossings found: {roots:?}", roots.len()));
    for (i, (lo, hi)) in [(0.018, 0.021), (0.109, 0.114)].into_iter().enumerate() {
        let found = roots.get(i).copied().unwrap_or(f64::NAN);
        c.check((lo..=hi).contains(&found), format!("crossing {}: {:.3}% in [{}%, {}%]", i + 1, 100.0 * found, 100.0 * lo, 100.0 * hi));
    }
    // The regenerated table carries the same crossings.
    let table = generate(TableId::EfficiencyCurves).unwrap();
    c.check(table.notes.iter().any(|n| n.contains("1.960%")), format!("table note: {:?}", table.notes));
    c.finish();
}

const REPS: u64 = 100_000;
const SEED: u64 = 20_200_901;

#[test]
fn criterion_09_simulation_oracles() {
    let mut c = Criterion::new(9, "Monte Carlo against analytic oracles");
    let dorfman_grid = [
        (0.001, 32u32), (0.005, 15), (0.01, 11), (0.02, 8), (0.03, 6), (0.05, 5),
        (0.08, 4), (0.1, 4), (0.15, 3), (0.2, 3), (0.25, 3), (0.3, 3),
    ];
    for (i, &(rho, b)) in dorfman_grid.iter().enumerate() {
        let design = PoolingDesign::Dorfman(DorfmanDesign { batch_size: b });
        let s = monte_carlo(&design, p(rho), u64::from(b), REPS, SEED + i as u64, None).unwrap();
        let formula = dorfman_expected_tests_per_person(p(rho), b).unwrap();
        c.check(
            (s.mean_tests - formula).abs() <= SE_MULTIPLIER * s.se_tests,
            format!("Dorfman ρ={rho} b={b}: {:.5} ± {:.1e} vs {formula:.5}", s.mean_tests, s.se_tests),
        );
    }
    let sterrett_grid = [
        (0.001, 20u32), (0.005, 16), (0.01, 12), (0.02, 10), (0.03, 9), (0.05, 7),
        (0.08, 5), (0.1, 5), (0.15, 4), (0.2, 3), (0.25, 3), (0.3, 2),
    ];
    for (i, &(rho, b)) in sterrett_grid.iter().enumerate() {
        let design = PoolingDesign::Sterrett(SterrettDesign { batch_size: b });
        let s = monte_carlo(&design, p(rho), u64::from(b), REPS, SEED + 100 + i as u64, None).unwrap();
        let exact = sterrett_expected_tests_per_batch(p(rho), b).unwrap() / f64::from(b);
        c.check(
            (s.mean_tests - exact).abs() <= SE_MULTIPLIER * s.se_tests,
            format!("Sterrett ρ={rho} b={b}: {:.5} ± {:.1e} vs {exact:.5}", s.mean_tests, s.se_tests),
        );
    }
    let gg_grid = [(0.001, 20u32, 2243u64), (0.01, 8, 600), (0.05, 28, 100), (0.1, 13, 69), (0.2, 6, 61), (0.3, 4, 40)];
    for (i, &(rho, b, t)) in gg_grid.iter().enumerate() {
        let design = PoolingDesign::GibbsGower(GibbsGowerPlan { pool_size: b, num_pools: t });
        let s = monte_carlo(&design, p(rho), 0, REPS, SEED + 200 + i as u64, None).unwrap();
        let e = s.estimation.unwrap();
        let exact = gg_mse(p(rho), b, t).unwrap();
        c.check(
            (e.empirical_mse - exact).abs() <= SE_MULTIPLIER * e.se_mse,
            format!("Gibbs–Gower MSE ρ={rho} b={b} t={t}: {:.4e} ± {:.1e} vs {exact:.4e}", e.empirical_mse, e.se_mse),
        );
    }
    let slice_designs = [
        (0.01, 2u32, REPS),
        (0.02, 2, REPS),
        (0.05, 2, REPS),
        (0.01, 3, REPS / 10),
        (0.02, 3, REPS / 10),
        (0.05, 3, REPS / 10),
    ];
    for (i, &(rho, d, reps)) in slice_designs.iter().enumerate() {
        let (design, formula) = if d == 2 {
            (
                PoolingDesign::Array(ArrayDesign { side: 8, confirm_stage: true }),
                array_expected_tests_per_person(p(rho), 8, true).unwrap(),
            )
        } else {
            (
                PoolingDesign::Hypercube(HypercubeDesign { side: 8, dimension: d, confirm_stage: true }),
                hypercube_expected_tests_per_person(p(rho), 8, d).unwrap(),
            )
        };
        let s = monte_carlo(&design, p(rho), design.cluster_size(), reps, SEED + 300 + i as u64, None).unwrap();
        let gap = rel(formula, s.mean_tests);
        c.check(
            gap < SLICE_GAP_TOL,
            format!(
                "{} ρ={rho}: formula {formula:.5} vs simulated {:.5} ± {:.1e}, gap {:.2}%",
                if d == 2 { "array 8x8" } else { "hypercube 8^3" },
                s.mean_tests,
                s.se_tests,
                100.0 * gap
            ),
        );
    }
    c.finish();
}

#[test]
fn criterion_10_property_suites() {
    let mut c = Criterion::new(10, "property suites");

    // Lambert W on 1000 log-spaced points plus the branch point region.
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let x = if i < 100 {
            -(-1f64).exp() * (1.0 - f64::from(i) / 100.0)
        } else {
            1e-6 * 1e12f64.powf(f64::from(i - 100) / 899.0)
        };
        let w = lambert_w0(x).unwrap();
        worst = worst.max((w * w.exp() - x).abs() / x.abs().max(1e-3));
    }
    c.check(worst <= LAMBERT_TOL, format!("Lambert W worst scaled residual {worst:.2e} over 1000 points"));

    // b = 1: the estimator is the sample proportion.
    let mut exact = true;
    for &(num, den) in &[(1u64, 1000u64), (1, 100), (1, 20), (3, 10)] {
        let rho = num as f64 / den as f64;
        for t in [1u64, 10, 100, 1000] {
            exact &= gg_expected_estimate(p(rho), 1, t).unwrap() == rho;
            let v = rho * (1.0 - rho) / t as f64;
            exact &= rel(gg_mse(p(rho), 1, t).unwrap(), v) < 1e-14;
            exact &= rel(gg_asymptotic_variance(p(rho), 1, t).unwrap(), v) < 1e-14;
        }
        exact &= gg_tests_needed(p(rho), 1, 0.15, VarianceModel::Exact).unwrap() == (400 * (den - num)).div_ceil(9 * num);
    }
    c.check(exact, "b = 1 specializations (mean, MSE, variance, tests needed)");

    let mut same = true;
    for i in 0..=50 {
        let rho = f64::from(i) / 50.0;
        for b in 2..=20 {
            same &= array_expected_tests_per_person(p(rho), b, true).unwrap().to_bits()
                == hypercube_expected_tests_per_person(p(rho), b, 2).unwrap().to_bits();
        }
    }
    c.check(same, "hypercube of dimension 2 equals the array, bit for bit");

    let mut biased_up = true;
    let mut cells = 0;
    for &rho in &[0.0001, 0.001, 0.003, 0.01, 0.03, 0.05, 0.1, 0.2, 0.3, 0.5] {
        for b in [1u32, 2, 5, 8, 13, 20, 28, 50, 143] {
            for t in [10u64, 40, 100, 600, 2000] {
                biased_up &= gg_expected_estimate(p(rho), b, t).unwrap() >= rho;
                cells += 1;
            }
        }
    }
    c.check(biased_up, format!("E(p̂) ≥ p on {cells} grid cells"));

    let mut monotone = true;
    let mut specializes = true;
    for &conc in &[0.0, 10.0, 100.0, 1000.0] {
        for &frac in &[0.01, 0.05, 0.2, 1.0] {
            for &rho in &[0.0, 0.001, 0.05, 0.3] {
                let s = DilutionScenario::new(frac, 1.0, conc, 1, p(rho)).unwrap();
                specializes &= pooled_false_negative_rate(&s).unwrap() == individual_false_negative_rate(&s).unwrap();
                let mut last = 0.0;
                for n in 1..=64 {
                    let f = pooled_false_negative_rate(&s.with_pool_size(n).unwrap()).unwrap();
                    monotone &= f >= last;
                    last = f;
                }
            }
        }
    }
    c.check(monotone, "pooled false-negative rate non-decreasing in pool size");
    c.check(specializes, "pooled rate at pool size 1 equals the individual rate");

    let design = PoolingDesign::Array(ArrayDesign { side: 6, confirm_stage: true });
    let noise = DilutionScenario::new(0.05, 1.0, 100.0, 6, p(0.05)).unwrap();
    let at = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo(&design, p(0.05), 100, 5_000, 42, Some(&noise)).unwrap())
    };
    let one = at(1);
    c.check(one == at(3) && one == at(8), "simulation summaries identical with 1, 3 and 8 threads");

    // Regenerated tables never depend on state: two generations agree cell for cell.
    let first = generate(TableId::ExamplesClassification).unwrap();
    let again = generate(TableId::ExamplesClassification).unwrap();
    c.check(
        first == again && first.rows.iter().flatten().any(|cell| matches!(cell, Cell::Text(t) if t == "N/A")),
        "tables regenerate identically",
    );
    c.finish();
}
