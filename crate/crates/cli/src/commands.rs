//! The five subcommands and the reports they emit.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use grouptest::analytics::{best_classification_design, DILUTION_ADVISORY_POOL_SIZE};
use grouptest::dilution::{
    expected_positives_per_pool, individual_false_negative_rate, max_pool_size_for_threshold,
    pooled_false_negative_rate, DilutionScenario,
};
use grouptest::estimation::{
    estimation_rule_of_thumb, gg_minimize_cost, gg_nrmse, gg_optimal_pool, gg_report,
    gg_tests_needed, CostModel, EstimationReport, PoolObjective, PoolTestOutcome, VarianceModel,
};
use grouptest::simulation::{monte_carlo, MonteCarloSummary};
use grouptest::{
    ArchitectureKind, ArrayDesign, ConstraintSet, DesignEvaluation, DorfmanDesign, GibbsGowerPlan,
    HypercubeDesign, PoolingDesign, PrevalenceRate, SterrettDesign,
};

use crate::error::{validation, CliResult};
use crate::output::Format;

/// Prevalence above which the recommendation notes that pooling rarely pays.
pub const POOLING_PREVALENCE_LIMIT: f64 = 0.30;
/// Default target for the root MSE divided by the prevalence.
pub const DEFAULT_TARGET_NRMSE: f64 = 0.15;
/// Default largest pool size considered by the dilution scan.
pub const DEFAULT_DILUTION_CAP: u32 = 64;
/// Default acceptable introduced false-negative rate.
pub const DEFAULT_FN_THRESHOLD: f64 = 0.05;

/// Reads a prevalence given as a fraction, or as a percent when above 1.
pub fn parse_prevalence(raw: f64, flag: &str) -> CliResult<PrevalenceRate> {
    if !raw.is_finite() || raw < 0.0 {
        return validation(format!("--{flag} must be a non-negative number, got {raw}"));
    }
    let value = if raw > 1.0 {
        if raw > 100.0 {
            return validation(format!("--{flag} {raw} exceeds 100%"));
        }
        eprintln!("note: reading --{flag} {raw} as {raw}% = {}", raw / 100.0);
        raw / 100.0
    } else {
        raw
    };
    Ok(PrevalenceRate::new(value)?)
}

fn required<T: Copy>(value: Option<T>, flag: &str) -> CliResult<T> {
    match value {
        Some(v) => Ok(v),
        None => validation(format!("--{flag} is required")),
    }
}

/// Output flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output format (CSV for tables, JSON for reports by default).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Optional dilution model of the assay.
#[derive(Debug, Clone, Args)]
pub struct DilutionArgs {
    /// Volume of the aliquot that enters the assay.
    #[arg(long)]
    pub aliquot_volume: Option<f64>,
    /// Volume of each collected sample.
    #[arg(long, default_value_t = 1.0)]
    pub sample_volume: f64,
    /// Virus particles per unit volume of a positive sample.
    #[arg(long)]
    pub concentration: Option<f64>,
}

impl DilutionArgs {
    fn configured(&self) -> bool {
        self.aliquot_volume.is_some() || self.concentration.is_some()
    }

    fn scenario(&self, pool_size: u32, prevalence: PrevalenceRate) -> CliResult<Option<DilutionScenario>> {
        if !self.configured() {
            return Ok(None);
        }
        let aliquot = required(self.aliquot_volume, "aliquot-volume")?;
        let concentration = required(self.concentration, "concentration")?;
        Ok(Some(DilutionScenario::new(
            aliquot,
            self.sample_volume,
            concentration,
            pool_size.max(1),
            prevalence,
        )?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Architecture {
    Dorfman,
    Array,
    Hypercube,
    Sterrett,
}

// ---------------------------------------------------------------------------
// design

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    /// Prevalence as a fraction, or a percent when above 1.
    #[arg(long)]
    pub prevalence: Option<f64>,
    /// Candidate architectures, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dorfman")]
    pub architectures: Vec<Architecture>,
    /// Hypercube dimension when hypercubes are candidates.
    #[arg(long, default_value_t = 3)]
    pub dimension: u32,
    /// Largest pool size to consider.
    #[arg(long)]
    pub cap: Option<u32>,
    /// Largest number of samples in one design unit.
    #[arg(long)]
    pub max_cluster: Option<u64>,
    /// Acceptable introduced false-negative rate for the dilution check.
    #[arg(long, default_value_t = DEFAULT_FN_THRESHOLD)]
    pub fn_threshold: f64,
    #[command(flatten)]
    pub dilution: DilutionArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub prevalence: f64,
    pub recommendation: String,
    pub pool_size: u32,
    pub expected_tests_per_person: f64,
    pub efficiency_gain: f64,
    pub evaluation: DesignEvaluation,
    /// Largest pool size within the false-negative threshold, when a dilution model is given.
    pub dilution_safe_pool_size: Option<u32>,
    pub warnings: Vec<String>,
}

pub fn cmd_design(args: &DesignArgs) -> CliResult<DesignReport> {
    let rho = parse_prevalence(required(args.prevalence, "prevalence")?, "prevalence")?;
    let constraints = ConstraintSet {
        max_pool_size: args.cap,
        max_cluster_size: args.max_cluster,
    }
    .validated()?;
    let kinds: Vec<ArchitectureKind> = args
        .architectures
        .iter()
        .map(|a| match a {
            Architecture::Dorfman => ArchitectureKind::Dorfman,
            Architecture::Array => ArchitectureKind::Array,
            Architecture::Hypercube => ArchitectureKind::Hypercube { dimension: args.dimension },
            Architecture::Sterrett => ArchitectureKind::Sterrett,
        })
        .collect();
    let best = best_classification_design(rho, &constraints, &kinds)?;
    let b = best.design.pool_size();
    let mut warnings = Vec::new();
    if rho.value() > POOLING_PREVALENCE_LIMIT {
        warnings.push(format!(
            "prevalence {} is above 30%: pooling brings little or no benefit",
            rho.value()
        ));
    }
    if best.design.is_individual_testing() {
        warnings.push("no pooled design beats testing everyone individually".to_string());
    }
    if b > DILUTION_ADVISORY_POOL_SIZE {
        warnings.push(format!(
            "pool size {b} exceeds {DILUTION_ADVISORY_POOL_SIZE}: check the assay for dilution losses"
        ));
    }
    let mut safe = None;
    if let Some(scenario) = args.dilution.scenario(b, rho)? {
        let cap = args.cap.unwrap_or(DEFAULT_DILUTION_CAP).max(b);
        let limit = max_pool_size_for_threshold(&scenario, args.fn_threshold, cap)?;
        if b > limit {
            warnings.push(format!(
                "pool size {b} exceeds the dilution-safe size {limit} for a {} false-negative threshold",
                args.fn_threshold
            ));
        }
        safe = Some(limit);
    }
    Ok(DesignReport {
        prevalence: rho.value(),
        recommendation: best.design.to_string(),
        pool_size: b,
        expected_tests_per_person: best.expected_tests_per_person,
        efficiency_gain: best.individuals_per_test,
        evaluation: best,
        dilution_safe_pool_size: safe,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// estimate

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Number of pools tested (analysis), or a fixed test budget (with --plan).
    #[arg(long)]
    pub pools: Option<u64>,
    /// Number of positive pools observed.
    #[arg(long)]
    pub positive: Option<u64>,
    /// Samples per pool.
    #[arg(long)]
    pub pool_size: Option<u32>,
    /// Reference prevalence for the accuracy figures (default: the estimate itself).
    #[arg(long)]
    pub prevalence: Option<f64>,
    /// Plan a study instead of analysing results.
    #[arg(long)]
    pub plan: bool,
    /// Use the 6/p pools of 8 (12/p pools of 4 above 10%) rule.
    #[arg(long)]
    pub rule_of_thumb: bool,
    /// Anticipated prevalence for planning.
    #[arg(long)]
    pub prevalence_guess: Option<f64>,
    /// Target root MSE divided by the prevalence.
    #[arg(long, default_value_t = DEFAULT_TARGET_NRMSE)]
    pub target_nrmse: f64,
    /// Largest pool size to consider.
    #[arg(long)]
    pub cap: Option<u32>,
    /// Largest number of samples (pool size x pools) for cost planning.
    #[arg(long)]
    pub max_cluster: Option<u64>,
    /// Cost per sample collected; with --test-cost, minimizes total cost.
    #[arg(long)]
    pub sample_cost: Option<f64>,
    /// Cost per test run.
    #[arg(long)]
    pub test_cost: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    MinTests,
    FixedTests,
    RuleOfThumb,
    MinCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub mode: PlanMode,
    pub prevalence_guess: f64,
    pub pool_size: u32,
    pub num_pools: u64,
    pub total_samples: u64,
    pub target_nrmse: Option<f64>,
    pub predicted_nrmse: f64,
    pub asymptotic_nrmse: f64,
    /// Individual tests reaching the same NRMSE.
    pub individual_tests: u64,
    /// Individual tests divided by pooled tests.
    pub efficiency_gain: f64,
    pub cost: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EstimateOutput {
    Plan(PlanReport),
    Analysis {
        #[serde(flatten)]
        report: EstimationReport,
        warnings: Vec<String>,
    },
}

pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<EstimateOutput> {
    if args.plan || args.rule_of_thumb {
        return plan(args).map(EstimateOutput::Plan);
    }
    let t = required(args.pools, "pools")?;
    let positive = required(args.positive, "positive")?;
    let b = required(args.pool_size, "pool-size")?;
    if positive > t {
        return validation(format!("--positive {positive} exceeds --pools {t}"));
    }
    let outcome = PoolTestOutcome::new(t, positive, b)?;
    let reference = args.prevalence.map(|v| parse_prevalence(v, "prevalence")).transpose()?;
    let report = gg_report(&outcome, reference)?;
    let mut warnings = Vec::new();
    if report.saturated {
        warnings.push(
            "every pool tested positive: the estimate is pinned at 1; use smaller pools".to_string(),
        );
    }
    Ok(EstimateOutput::Analysis { report, warnings })
}

fn plan(args: &EstimateArgs) -> CliResult<PlanReport> {
    let guess = args.prevalence_guess.or(args.prevalence);
    let p = parse_prevalence(required(guess, "prevalence-guess")?, "prevalence-guess")?;
    if !(p.value() > 0.0 && p.value() < 1.0) {
        return validation("planning needs a prevalence guess strictly between 0 and 1");
    }
    let target = args.target_nrmse;
    if !(target > 0.0 && target.is_finite()) {
        return validation(format!("--target-nrmse must be positive, got {target}"));
    }
    let costed = args.sample_cost.is_some() || args.test_cost.is_some();
    let (mode, plan, cost) = if args.rule_of_thumb {
        (PlanMode::RuleOfThumb, estimation_rule_of_thumb(p)?, None)
    } else if costed {
        let model = CostModel::new(args.sample_cost.unwrap_or(0.0), args.test_cost.unwrap_or(0.0))?;
        let constraints = ConstraintSet {
            max_pool_size: args.cap,
            max_cluster_size: args.max_cluster,
        }
        .validated()?;
        let opt = gg_minimize_cost(p, &model, target, &constraints)?;
        (PlanMode::MinCost, opt.plan, Some(opt.objective))
    } else if let Some(t) = args.pools {
        let plan = gg_optimal_pool(p, PoolObjective::MinMseAtFixedT(t), args.cap)?;
        (PlanMode::FixedTests, plan, None)
    } else {
        let plan = gg_optimal_pool(p, PoolObjective::MinTestsAtTarget(target), args.cap)?;
        (PlanMode::MinTests, plan, None)
    };
    let predicted = gg_nrmse(p, plan.pool_size, plan.num_pools, VarianceModel::Exact)?;
    let asymptotic = gg_nrmse(p, plan.pool_size, plan.num_pools, VarianceModel::Asymptotic)?;
    let targeted = matches!(mode, PlanMode::MinTests | PlanMode::MinCost);
    let reference = if targeted { target } else { predicted };
    let individual = gg_tests_needed(p, 1, reference, VarianceModel::Exact)?;
    let mut warnings = Vec::new();
    if predicted > target {
        warnings.push(format!(
            "predicted NRMSE {predicted:.4} misses the {target} target"
        ));
    }
    if plan.pool_size > DILUTION_ADVISORY_POOL_SIZE {
        warnings.push(format!(
            "pool size {} exceeds {DILUTION_ADVISORY_POOL_SIZE}: check the assay for dilution losses",
            plan.pool_size
        ));
    }
    Ok(PlanReport {
        mode,
        prevalence_guess: p.value(),
        pool_size: plan.pool_size,
        num_pools: plan.num_pools,
        total_samples: plan.total_samples(),
        target_nrmse: targeted.then_some(target),
        predicted_nrmse: predicted,
        asymptotic_nrmse: asymptotic,
        individual_tests: individual,
        efficiency_gain: individual as f64 / plan.num_pools as f64,
        cost,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulatedDesign {
    Dorfman,
    Array,
    Hypercube,
    Sterrett,
    GibbsGower,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Design to execute.
    #[arg(long, value_enum, default_value = "dorfman")]
    pub design: SimulatedDesign,
    /// Prevalence as a fraction, or a percent when above 1.
    #[arg(long)]
    pub prevalence: Option<f64>,
    /// Batch size, or array / hypercube side.
    #[arg(long)]
    pub pool_size: Option<u32>,
    /// Hypercube dimension.
    #[arg(long, default_value_t = 3)]
    pub dimension: u32,
    /// Skip the confirmation stage of array and hypercube designs.
    #[arg(long)]
    pub presumptive: bool,
    /// Pools per Gibbs-Gower study.
    #[arg(long)]
    pub pools: Option<u64>,
    /// People per replication (default: one design unit).
    #[arg(long)]
    pub population: Option<u64>,
    /// Number of replications.
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    /// Seed of the random streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub dilution: DilutionArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<MonteCarloSummary> {
    let rho = parse_prevalence(required(args.prevalence, "prevalence")?, "prevalence")?;
    let b = required(args.pool_size, "pool-size")?;
    let confirm = !args.presumptive;
    let design = match args.design {
        SimulatedDesign::Dorfman => PoolingDesign::Dorfman(DorfmanDesign::new(b)?),
        SimulatedDesign::Array => PoolingDesign::Array(ArrayDesign::new(b, confirm)?),
        SimulatedDesign::Hypercube => {
            PoolingDesign::Hypercube(HypercubeDesign::new(b, args.dimension, confirm)?)
        }
        SimulatedDesign::Sterrett => PoolingDesign::Sterrett(SterrettDesign::new(b)?),
        SimulatedDesign::GibbsGower => {
            PoolingDesign::GibbsGower(GibbsGowerPlan::new(b, required(args.pools, "pools")?)?)
        }
    };
    let population = args.population.unwrap_or_else(|| design.cluster_size());
    let noise = args.dilution.scenario(b, rho)?;
    Ok(monte_carlo(&design, rho, population, args.reps, args.seed, noise.as_ref())?)
}

// ---------------------------------------------------------------------------
// dilution

#[derive(Debug, Clone, Args)]
pub struct DilutionCmdArgs {
    /// Volume of the aliquot that enters the assay.
    #[arg(long)]
    pub aliquot_volume: Option<f64>,
    /// Volume of each collected sample.
    #[arg(long, default_value_t = 1.0)]
    pub sample_volume: f64,
    /// Virus particles per unit volume of a positive sample.
    #[arg(long)]
    pub concentration: Option<f64>,
    /// Samples per pool.
    #[arg(long, default_value_t = 1)]
    pub pool_size: u32,
    /// Prevalence as a fraction, or a percent when above 1.
    #[arg(long, default_value_t = 0.0)]
    pub prevalence: f64,
    /// Acceptable introduced false-negative rate.
    #[arg(long, default_value_t = DEFAULT_FN_THRESHOLD)]
    pub fn_threshold: f64,
    /// Largest pool size the scan considers.
    #[arg(long, default_value_t = DEFAULT_DILUTION_CAP)]
    pub cap: u32,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilutionReport {
    pub scenario: DilutionScenario,
    pub individual_false_negative_rate: f64,
    pub pooled_false_negative_rate: f64,
    pub introduced_false_negative_rate: f64,
    /// Mean positives in a pool that holds at least one; `None` at zero prevalence.
    pub expected_positives_per_pool: Option<f64>,
    pub threshold: f64,
    pub max_safe_pool_size: u32,
    pub advice: Option<String>,
}

pub fn cmd_dilution(args: &DilutionCmdArgs) -> CliResult<DilutionReport> {
    let rho = parse_prevalence(args.prevalence, "prevalence")?;
    let scenario = DilutionScenario::new(
        required(args.aliquot_volume, "aliquot-volume")?,
        args.sample_volume,
        required(args.concentration, "concentration")?,
        args.pool_size,
        rho,
    )?;
    let fi = individual_false_negative_rate(&scenario)?;
    let fg = pooled_false_negative_rate(&scenario)?;
    let introduced = fg - fi;
    let safe = max_pool_size_for_threshold(&scenario, args.fn_threshold, args.cap)?;
    let advice = (introduced > args.fn_threshold).then(|| {
        if safe <= 1 {
            format!(
                "introduced false-negative rate {introduced:.3} exceeds {}; no pool size meets it, test individually",
                args.fn_threshold
            )
        } else {
            format!(
                "introduced false-negative rate {introduced:.3} exceeds {}; reduce the pool size to {safe} or less",
                args.fn_threshold
            )
        }
    });
    Ok(DilutionReport {
        scenario,
        individual_false_negative_rate: fi,
        pooled_false_negative_rate: fg,
        introduced_false_negative_rate: introduced,
        expected_positives_per_pool: if rho.value() > 0.0 {
            Some(expected_positives_per_pool(args.pool_size, rho)?)
        } else {
            None
        },
        threshold: args.fn_threshold,
        max_safe_pool_size: safe,
        advice,
    })
}
