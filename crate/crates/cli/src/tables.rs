//! Regenerates the reference tables from the library on every call.

use std::fmt;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use grouptest::analytics::{
    array_optimal_side, best_classification_design, dorfman_array_crossovers,
    dorfman_optimal_batch, evaluate_design, sterrett_optimal_batch,
};
use grouptest::estimation::{
    dorfman_estimation_rmse, gg_asymptotic_variance, gg_minimize_cost, gg_mse, gg_optimal_pool,
    gg_tests_needed, CostModel, PoolObjective, VarianceModel,
};
use grouptest::{
    ArchitectureKind, ArrayDesign, ConstraintSet, DorfmanDesign, PoolingDesign, PrevalenceRate,
    SterrettDesign,
};

use crate::error::CliResult;
use crate::output::format_real;

/// NRMSE target used by the estimation tables.
pub const TARGET_NRMSE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableId {
    /// Recommended Dorfman pool size by prevalence band.
    ExecClassification,
    /// Best estimation pool size (at most 20) and its gain over individual testing.
    ExecEstimation,
    /// NRMSE of the rule-of-thumb estimation plans.
    GuidelinesNrmse,
    /// Dorfman, Sterrett and array testing at three prevalences.
    ExamplesClassification,
    /// Root MSE of the prevalence estimate with 100 tests.
    #[value(name = "rmse-100")]
    #[serde(rename = "rmse-100")]
    Rmse100,
    /// Tests needed for a root MSE of 15% of the prevalence.
    #[value(name = "tests-for-15pct")]
    #[serde(rename = "tests-for-15pct")]
    TestsFor15pct,
    /// Plans minimizing samples + 10 x tests at 15% NRMSE.
    CostOptimized,
    /// Efficiency gain of capped Dorfman and 8x8 arrays over a prevalence grid.
    EfficiencyCurves,
}

impl TableId {
    pub const ALL: [TableId; 8] = [
        TableId::ExecClassification,
        TableId::ExecEstimation,
        TableId::GuidelinesNrmse,
        TableId::ExamplesClassification,
        TableId::Rmse100,
        TableId::TestsFor15pct,
        TableId::CostOptimized,
        TableId::EfficiencyCurves,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TableId::ExecClassification => "exec-classification",
            TableId::ExecEstimation => "exec-estimation",
            TableId::GuidelinesNrmse => "guidelines-nrmse",
            TableId::ExamplesClassification => "examples-classification",
            TableId::Rmse100 => "rmse-100",
            TableId::TestsFor15pct => "tests-for-15pct",
            TableId::CostOptimized => "cost-optimized",
            TableId::EfficiencyCurves => "efficiency-curves",
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One table cell: counts, reals or text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) => f.write_str(&format_real(*v)),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(u64::from(v))
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub id: TableId,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Table {
    fn new(id: TableId, title: &str, columns: &[&str]) -> Self {
        Self {
            id,
            title: title.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }
}

fn p(x: f64) -> CliResult<PrevalenceRate> {
    Ok(PrevalenceRate::new(x)?)
}

fn percent(x: f64) -> String {
    let v = 100.0 * x;
    let s = format!("{v:.1}");
    s.trim_end_matches('0').trim_end_matches('.').to_string() + "%"
}

pub fn generate(id: TableId) -> CliResult<Table> {
    match id {
        TableId::ExecClassification => exec_classification(),
        TableId::ExecEstimation => exec_estimation(),
        TableId::GuidelinesNrmse => guidelines_nrmse(),
        TableId::ExamplesClassification => examples_classification(),
        TableId::Rmse100 => rmse_100(),
        TableId::TestsFor15pct => tests_for_15pct(),
        TableId::CostOptimized => cost_optimized(),
        TableId::EfficiencyCurves => efficiency_curves(),
    }
}

// ---------------------------------------------------------------------------
// Classification summary bands

/// Largest pool size the summary chart recommends.
pub const CHART_POOL_CAP: u32 = 8;

/// Prevalence range over which one Dorfman pool size is optimal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSizeBand {
    pub pool_size: u32,
    /// Lower edge; 0 for the smallest-prevalence band.
    pub prevalence_from: f64,
    /// Upper edge, where the next smaller pool size (or individual testing) takes over.
    pub prevalence_to: f64,
    /// Efficiency gain at `prevalence_to`.
    pub gain_from: f64,
    /// Efficiency gain at `prevalence_from`.
    pub gain_to: f64,
}

fn capped_dorfman_choice(rho: f64) -> CliResult<u32> {
    let cap = ConstraintSet::with_max_pool_size(CHART_POOL_CAP)?;
    let best = best_classification_design(p(rho)?, &cap, &[ArchitectureKind::Dorfman])?;
    Ok(best.design.pool_size())
}

fn dorfman_gain(rho: f64, b: u32) -> CliResult<f64> {
    let design = PoolingDesign::Dorfman(DorfmanDesign::new(b)?);
    Ok(evaluate_design(p(rho)?, &design)?.individuals_per_test)
}

/// Bands of the capped Dorfman optimum, from high prevalence down.
///
/// Edges are found on a log grid and refined by bisection on the optimizer's choice.
pub fn pool_size_bands() -> CliResult<Vec<PoolSizeBand>> {
    let (lo, hi, n) = (1e-4f64, 0.5f64, 4000);
    let step = (hi / lo).ln() / f64::from(n - 1);
    let mut edges: Vec<(f64, u32)> = Vec::new();
    let mut prev = (lo, capped_dorfman_choice(lo)?);
    for i in 1..n {
        let x = lo * (step * f64::from(i)).exp();
        let choice = capped_dorfman_choice(x)?;
        if choice != prev.1 {
            let (mut a, mut b) = (prev.0, x);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if capped_dorfman_choice(m)? == prev.1 {
                    a = m;
                } else {
                    b = m;
                }
            }
            edges.push((0.5 * (a + b), prev.1));
        }
        prev = (x, choice);
    }
    let mut bands = Vec::new();
    let mut from = 0.0;
    for &(to, b) in &edges {
        if b >= 2 {
            bands.push(PoolSizeBand {
                pool_size: b,
                prevalence_from: from,
                prevalence_to: to,
                gain_from: dorfman_gain(to, b)?,
                gain_to: if from == 0.0 { f64::from(b) } else { dorfman_gain(from, b)? },
            });
        }
        from = to;
    }
    bands.reverse();
    Ok(bands)
}

fn exec_classification() -> CliResult<Table> {
    let mut t = Table::new(
        TableId::ExecClassification,
        "Recommended Dorfman pool size (at most 8) by prevalence",
        &[
            "prevalence",
            "optimum pool size",
            "efficiency gain",
            "prevalence from",
            "prevalence to",
            "gain from",
            "gain to",
        ],
    );
    for band in pool_size_bands()? {
        let range = if band.prevalence_from == 0.0 {
            format!("up to {}", percent(band.prevalence_to))
        } else {
            format!(
                "{}–{}",
                percent(band.prevalence_from).trim_end_matches('%'),
                percent(band.prevalence_to)
            )
        };
        t.rows.push(vec![
            range.into(),
            band.pool_size.into(),
            format!("{:.2}–{:.2}", band.gain_from, band.gain_to).into(),
            band.prevalence_from.into(),
            band.prevalence_to.into(),
            band.gain_from.into(),
            band.gain_to.into(),
        ]);
    }
    t.notes.push("Above the top edge individual testing is cheaper than any pool.".into());
    Ok(t)
}

// ---------------------------------------------------------------------------
// Estimation summary

pub const EXEC_ESTIMATION_PREVALENCES: [f64; 9] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3];
pub const EXEC_ESTIMATION_CAP: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationGainRow {
    pub prevalence: f64,
    pub pool_size: u32,
    pub tests: u64,
    pub individual_tests: u64,
    pub gain: f64,
}

pub fn estimation_gain(prevalence: f64, cap: Option<u32>) -> CliResult<EstimationGainRow> {
    let rho = p(prevalence)?;
    let plan = gg_optimal_pool(rho, PoolObjective::MinTestsAtTarget(TARGET_NRMSE), cap)?;
    let individual = gg_tests_needed(rho, 1, TARGET_NRMSE, VarianceModel::Exact)?;
    Ok(EstimationGainRow {
        prevalence,
        pool_size: plan.pool_size,
        tests: plan.num_pools,
        individual_tests: individual,
        gain: individual as f64 / plan.num_pools as f64,
    })
}

fn exec_estimation() -> CliResult<Table> {
    let mut t = Table::new(
        TableId::ExecEstimation,
        "Optimum estimation pool size (at most 20) for 15% NRMSE",
        &["prevalence", "optimum pool size (≤ 20)", "efficiency gain", "tests", "individual tests"],
    );
    for &prev in &EXEC_ESTIMATION_PREVALENCES {
        let r = estimation_gain(prev, Some(EXEC_ESTIMATION_CAP))?;
        t.rows.push(vec![
            prev.into(),
            r.pool_size.into(),
            r.gain.into(),
            r.tests.into(),
            r.individual_tests.into(),
        ]);
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Rule-of-thumb plans

/// `(prevalence, pool size)` rows: pools of 8 up to 10%, pools of 4 from 10%.
pub const GUIDELINE_CASES: [(f64, u32); 6] = [(0.001, 8), (0.01, 8), (0.05, 8), (0.1, 8), (0.1, 4), (0.3, 4)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidelineRow {
    pub prevalence: f64,
    pub pool_size: u32,
    pub tests: u64,
    pub nrmse: f64,
    pub asymptotic_nrmse: f64,
}

/// `6/p` pools of 8 or `12/p` pools of 4.
pub fn guideline_row(prevalence: f64, pool_size: u32) -> CliResult<GuidelineRow> {
    let rho = p(prevalence)?;
    let per_prevalence = if pool_size == 4 { 12.0 } else { 6.0 };
    let tests = (per_prevalence / prevalence).round() as u64;
    Ok(GuidelineRow {
        prevalence,
        pool_size,
        tests,
        nrmse: gg_mse(rho, pool_size, tests)?.sqrt() / prevalence,
        asymptotic_nrmse: gg_asymptotic_variance(rho, pool_size, tests)?.sqrt() / prevalence,
    })
}

fn guidelines_nrmse() -> CliResult<Table> {
    let mut t = Table::new(
        TableId::GuidelinesNrmse,
        "NRMSE of 6/p pools of 8 and 12/p pools of 4",
        &["Prevalence rate", "Pool size", "Number of tests", "NRMSE", "NRMSE (asymptotic)"],
    );
    for &(prev, b) in &GUIDELINE_CASES {
        let r = guideline_row(prev, b)?;
        t.rows.push(vec![prev.into(), b.into(), r.tests.into(), r.nrmse.into(), r.asymptotic_nrmse.into()]);
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Classification examples

pub const EXAMPLE_PREVALENCES: [f64; 3] = [0.3, 0.03, 0.003];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureExample {
    pub prevalence: f64,
    pub dorfman_batch: u32,
    pub dorfman_gain: f64,
    pub sterrett_batch: u32,
    pub sterrett_gain: f64,
    /// `None` when no array beats individual testing.
    pub array_side: Option<u32>,
    pub array_gain: f64,
}

pub fn architecture_example(prevalence: f64) -> CliResult<ArchitectureExample> {
    let rho = p(prevalence)?;
    let none = ConstraintSet::unconstrained();
    let dorfman = dorfman_optimal_batch(rho, &none)?;
    let dorfman_gain = evaluate_design(rho, &PoolingDesign::Dorfman(dorfman))?.individuals_per_test;
    let sterrett = sterrett_optimal_batch(rho, &none)?.unwrap_or(SterrettDesign { batch_size: 2 });
    let sterrett_gain = evaluate_design(rho, &PoolingDesign::Sterrett(sterrett))?.individuals_per_test;
    let array = array_optimal_side(rho, &none)?.unwrap_or(ArrayDesign { side: 2, confirm_stage: true });
    let array_gain = evaluate_design(rho, &PoolingDesign::Array(array))?.individuals_per_test;
    Ok(ArchitectureExample {
        prevalence,
        dorfman_batch: dorfman.batch_size,
        dorfman_gain,
        sterrett_batch: sterrett.batch_size,
        sterrett_gain,
        array_side: (array_gain > 1.0).then_some(array.side),
        array_gain,
    })
}

fn examples_classification() -> CliResult<Table> {
    let mut t = Table::new(
        TableId::ExamplesClassification,
        "Optimal batch sizes and efficiency of three architectures",
        &["prevalence", "architecture", "optimal batch size", "individuals tested per test"],
    );
    for &prev in &EXAMPLE_PREVALENCES {
        let e = architecture_example(prev)?;
        t.rows.push(vec![prev.into(), "simple Dorfman".into(), e.dorfman_batch.into(), e.dorfman_gain.into()]);
        t.rows.push(vec![prev.into(), "Sterrett testing".into(), e.sterrett_batch.into(), e.sterrett_gain.into()]);
        let (side, gain): (Cell, Cell) = match e.array_side {
            Some(b) => (b.into(), e.array_gain.into()),
            None => ("N/A".into(), "<1".into()),
        };
        t.rows.push(vec![prev.into(), "batched array testing".into(), side, gain]);
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Estimation accuracy and cost

pub const ESTIMATION_PREVALENCES: [f64; 4] = [0.05, 0.01, 0.001, 0.0001];
pub const FIXED_TESTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub prevalence: f64,
    pub individual_rmse: f64,
    pub dorfman_rmse: f64,
    pub pool_size: u32,
    pub pooled_rmse: f64,
}

/// Root MSE with `FIXED_TESTS` tests for the three strategies.
pub fn rmse_row(prevalence: f64) -> CliResult<RmseRow> {
    let rho = p(prevalence)?;
    let t = FIXED_TESTS;
    let plan = gg_optimal_pool(rho, PoolObjective::MinMseAtFixedT(t), None)?;
    Ok(RmseRow {
        prevalence,
        individual_rmse: (prevalence * (1.0 - prevalence) / t as f64).sqrt(),
        dorfman_rmse: dorfman_estimation_rmse(rho, t)?,
        pool_size: plan.pool_size,
        pooled_rmse: gg_mse(rho, plan.pool_size, t)?.sqrt(),
    })
}

fn rmse_100() -> CliResult<Table> {
    let mut t = Table::new(
        TableId::Rmse100,
        "Root MSE of the prevalence estimate with 100 tests",
        &["prevalence", "non-group testing", "Dorfman testing", "Gibbs–Gower testing", "Gibbs–Gower group size"],
    );
    for &prev in &ESTIMATION_PREVALENCES {
        let r = rmse_row(prev)?;
        t.rows.push(vec![
            prev.into(),
            r.individual_rmse.into(),
            r.dorfman_rmse.into(),
            r.pooled_rmse.into(),
            r.pool_size.into(),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestsNeededRow {
    pub prevalence: f64,
    pub individual: u64,
    pub pools_of_five: u64,
    pub optimal_pool_size: u32,
    pub optimal_tests: u64,
}

pub fn tests_needed_row(prevalence: f64) -> CliResult<TestsNeededRow> {
    let rho = p(prevalence)?;
    let plan = gg_optimal_pool(rho, PoolObjective::MinTestsAtTarget(TARGET_NRMSE), None)?;
    Ok(TestsNeededRow {
        prevalence,
        individual: gg_tests_needed(rho, 1, TARGET_NRMSE, VarianceModel::Exact)?,
        pools_of_five: gg_tests_needed(rho, 5, TARGET_NRMSE, VarianceModel::Exact)?,
        optimal_pool_size: plan.pool_size,
        optimal_tests: plan.num_pools,
    })
}

fn tests_for_15pct() -> CliResult<Table> {
    let mut t = Table::new(
        TableId::TestsFor15pct,
        "Tests needed for a root MSE of 15% of the prevalence",
        &[
            "prevalence",
            "non-group testing",
            "Gibbs–Gower testing with group size 5",
            "Gibbs–Gower testing with optimal group size",
            "optimal group size",
        ],
    );
    for &prev in &ESTIMATION_PREVALENCES {
        let r = tests_needed_row(prev)?;
        t.rows.push(vec![
            prev.into(),
            r.individual.into(),
            r.pools_of_five.into(),
            r.optimal_tests.into(),
            r.optimal_pool_size.into(),
        ]);
    }
    Ok(t)
}

pub const COST_PREVALENCES: [f64; 3] = [0.05, 0.01, 0.001];
pub const SAMPLE_COST: f64 = 1.0;
pub const TEST_COST: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub prevalence: f64,
    pub pool_size: u32,
    pub tests: u64,
    pub samples: u64,
}

pub fn cost_row(prevalence: f64) -> CliResult<CostRow> {
    let cost = CostModel::new(SAMPLE_COST, TEST_COST)?;
    let opt = gg_minimize_cost(p(prevalence)?, &cost, TARGET_NRMSE, &ConstraintSet::unconstrained())?;
    Ok(CostRow {
        prevalence,
        pool_size: opt.plan.pool_size,
        tests: opt.plan.num_pools,
        samples: opt.total_samples,
    })
}

fn cost_optimized() -> CliResult<Table> {
    let mut t = Table::new(
        TableId::CostOptimized,
        "Plans minimizing samples + 10 x tests at 15% NRMSE",
        &["prevalence", "optimal group size", "total tests", "total samples"],
    );
    for &prev in &COST_PREVALENCES {
        let r = cost_row(prev)?;
        t.rows.push(vec![prev.into(), r.pool_size.into(), r.tests.into(), r.samples.into()]);
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Efficiency curves

pub const CURVE_ARRAY_SIDE: u32 = 8;

fn efficiency_curves() -> CliResult<Table> {
    let mut t = Table::new(
        TableId::EfficiencyCurves,
        "Efficiency gain of Dorfman (b ≤ 8) and 8x8 array testing",
        &[
            "prevalence",
            "Dorfman (b ≤ 8) efficiency gain",
            "Dorfman batch size",
            "array (b = 8) efficiency gain",
        ],
    );
    let (lo, hi, n) = (0.001f64, 0.3f64, 121);
    let cap = ConstraintSet::with_max_pool_size(CHART_POOL_CAP)?;
    let array = PoolingDesign::Array(ArrayDesign::new(CURVE_ARRAY_SIDE, true)?);
    for i in 0..n {
        let x = lo * (hi / lo).powf(f64::from(i) / f64::from(n - 1));
        let rho = p(x)?;
        let d = dorfman_optimal_batch(rho, &cap)?;
        let dg = evaluate_design(rho, &PoolingDesign::Dorfman(d))?.individuals_per_test;
        let ag = evaluate_design(rho, &array)?.individuals_per_test;
        t.rows.push(vec![x.into(), dg.into(), d.batch_size.into(), ag.into()]);
    }
    let roots = dorfman_array_crossovers(CHART_POOL_CAP, CURVE_ARRAY_SIDE, lo, hi, 400)?;
    let listed: Vec<String> = roots.iter().map(|r| format!("{:.3}%", 100.0 * r)).collect();
    t.notes.push(format!("Curves cross at {}.", listed.join(" and ")));
    Ok(t)
}
