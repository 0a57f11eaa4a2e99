//! Closed-form costs and integer optimization for classification designs.
//!
//! Every cost is an expected number of tests per screened person. The array
//! and hypercube formulas assume row/line outcomes are independent, which
//! understates the candidate count; [`crate::simulation`] measures the gap.

mod sterrett;

pub use sterrett::{
    sterrett_expected_tests_per_batch, sterrett_expected_tests_recursive, sterrett_optimal_batch,
    sterrett_tests_for_pattern, STERRETT_ENUMERATION_LIMIT,
};

use crate::design::{
    cluster_size, ArchitectureKind, ArrayDesign, ConstraintSet, DesignEvaluation, DorfmanDesign,
    HypercubeDesign, PoolingDesign, SterrettDesign,
};
use crate::error::{invalid, Result};
use crate::lambert::lambert_w0;
use crate::prevalence::PrevalenceRate;

/// Default upper end of the integer pool-size search.
pub const DEFAULT_POOL_CAP: u32 = 64;

/// Pool size above which dilution losses deserve a warning.
pub const DILUTION_ADVISORY_POOL_SIZE: u32 = 32;

/// Relative difference under which two costs count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Expected Dorfman tests per person: `1/b + 1 - (1 - rho)^b`, and exactly 1 at `b = 1`.
pub fn dorfman_expected_tests_per_person(rho: PrevalenceRate, b: u32) -> Result<f64> {
    if b == 0 {
        return invalid("Dorfman batch size must be at least 1");
    }
    if b == 1 {
        return Ok(1.0);
    }
    Ok(1.0 / f64::from(b) + rho.any_positive(b))
}

/// Real-valued minimizer of the Dorfman cost, via the principal Lambert W branch.
///
/// Defined while `-sqrt(-ln(1 - rho))/2 >= -1/e`, i.e. `rho <~ 0.418`; above
/// that the cost has no interior minimum and pooling never pays.
pub fn dorfman_optimal_batch_continuous(rho: PrevalenceRate) -> Result<f64> {
    rho.require_interior("the continuous Dorfman optimum")?;
    let log_q = (-rho.value()).ln_1p();
    let arg = -0.5 * (-log_q).sqrt();
    if arg < -1.0 / std::f64::consts::E {
        return invalid(format!(
            "Dorfman cost has no interior minimum at prevalence {}",
            rho.value()
        ));
    }
    Ok(2.0 * lambert_w0(arg)? / log_q)
}

/// Search ceiling for a pool-size scan when the caller gave no cap.
///
/// Stays at [`DEFAULT_POOL_CAP`] unless the prevalence is low enough that the
/// optimum (roughly `1/sqrt(rho)` for Dorfman and `rho^(-2/3)` for arrays)
/// could sit beyond it.
fn default_search_cap(rho: PrevalenceRate, exponent: f64) -> u32 {
    let reach = 3.0 * rho.value().powf(-exponent);
    if reach.is_finite() && reach > f64::from(DEFAULT_POOL_CAP) {
        reach.ceil().min(f64::from(u32::MAX / 2)) as u32
    } else {
        DEFAULT_POOL_CAP
    }
}

fn pool_cap(rho: PrevalenceRate, constraints: &ConstraintSet, exponent: f64) -> u32 {
    constraints
        .max_pool_size
        .unwrap_or_else(|| default_search_cap(rho, exponent))
}

/// Scans `candidates` and keeps the cheapest; ties go to the earlier (smaller) one.
fn argmin<I>(candidates: I) -> Option<(u32, f64)>
where
    I: IntoIterator<Item = (u32, f64)>,
{
    let mut best: Option<(u32, f64)> = None;
    for (b, cost) in candidates {
        match best {
            Some((_, c)) if !strictly_less(cost, c) => {}
            _ => best = Some((b, cost)),
        }
    }
    best
}

fn strictly_less(a: f64, b: f64) -> bool {
    a < b - TIE_TOLERANCE * b.abs()
}

/// Integer Dorfman batch size `b >= 2` minimizing expected tests per person.
///
/// Exhaustive over `[2, cap]`; the cap is the caller's `max_pool_size` (and
/// `max_cluster_size`, since a batch is its own cluster). A cap below 2 leaves
/// only individual testing.
pub fn dorfman_optimal_batch(
    rho: PrevalenceRate,
    constraints: &ConstraintSet,
) -> Result<DorfmanDesign> {
    let constraints = constraints.validated()?;
    rho.require_interior("Dorfman batch optimization")?;
    let cap = pool_cap(rho, &constraints, 0.5);
    let best = argmin(
        (2..=cap)
            .filter(|&b| constraints.admits_cluster(u64::from(b)))
            .map(|b| (b, 1.0 / f64::from(b) + rho.any_positive(b))),
    );
    Ok(DorfmanDesign {
        batch_size: best.map_or(1, |(b, _)| b),
    })
}

/// Shared cost of the slice designs: `d/b + (1 - (1-rho)^b)^d * b^(d(d-2))`.
fn slice_design_cost(rho: PrevalenceRate, b: u32, d: u32, confirm_stage: bool) -> f64 {
    let b_f = f64::from(b);
    let slice_tests = f64::from(d) / b_f;
    if !confirm_stage {
        return slice_tests;
    }
    let exponent = i32::try_from(d * (d - 2)).unwrap_or(i32::MAX);
    slice_tests + rho.any_positive(b).powi(d as i32) * b_f.powi(exponent)
}

/// Expected array-testing tests per person under the independence approximation.
///
/// `2/b + (1 - (1-rho)^b)^2` with the confirmation stage, `2/b` for the
/// presumptive variant.
pub fn array_expected_tests_per_person(
    rho: PrevalenceRate,
    b: u32,
    confirm_stage: bool,
) -> Result<f64> {
    if b < 2 {
        return invalid(format!("array side must be at least 2, got {b}"));
    }
    Ok(slice_design_cost(rho, b, 2, confirm_stage))
}

/// Expected hypercube tests per person (confirmation variant), independence approximation.
pub fn hypercube_expected_tests_per_person(rho: PrevalenceRate, b: u32, d: u32) -> Result<f64> {
    hypercube_expected_tests_per_person_variant(rho, b, d, true)
}

/// As [`hypercube_expected_tests_per_person`], selecting the confirmation variant.
pub fn hypercube_expected_tests_per_person_variant(
    rho: PrevalenceRate,
    b: u32,
    d: u32,
    confirm_stage: bool,
) -> Result<f64> {
    if b < 2 {
        return invalid(format!("hypercube side must be at least 2, got {b}"));
    }
    if d < 2 {
        return invalid(format!("hypercube dimension must be at least 2, got {d}"));
    }
    Ok(slice_design_cost(rho, b, d, confirm_stage))
}

/// Side length `b >= 2` minimizing the array cost (confirmation variant).
pub fn array_optimal_side(rho: PrevalenceRate, constraints: &ConstraintSet) -> Result<Option<ArrayDesign>> {
    Ok(hypercube_optimal_side(rho, 2, constraints)?.map(|h| ArrayDesign {
        side: h.side,
        confirm_stage: true,
    }))
}

/// Side length minimizing the `d`-dimensional hypercube cost, honoring `b^d <= max_cluster_size`.
///
/// `None` when the constraints leave no admissible side.
pub fn hypercube_optimal_side(
    rho: PrevalenceRate,
    dimension: u32,
    constraints: &ConstraintSet,
) -> Result<Option<HypercubeDesign>> {
    let constraints = constraints.validated()?;
    if dimension < 2 {
        return invalid(format!("hypercube dimension must be at least 2, got {dimension}"));
    }
    let cap = pool_cap(rho, &constraints, 2.0 / 3.0);
    let best = argmin(
        (2..=cap)
            .take_while(|&b| cluster_size(b, dimension).is_some_and(|n| constraints.admits_cluster(n)))
            .map(|b| (b, slice_design_cost(rho, b, dimension, true))),
    );
    Ok(best.map(|(side, _)| HypercubeDesign {
        side,
        dimension,
        confirm_stage: true,
    }))
}

/// Expected tests per person for any classification design.
pub fn evaluate_design(rho: PrevalenceRate, design: &PoolingDesign) -> Result<DesignEvaluation> {
    let cost = match *design {
        PoolingDesign::Dorfman(d) => dorfman_expected_tests_per_person(rho, d.batch_size)?,
        PoolingDesign::Array(a) => array_expected_tests_per_person(rho, a.side, a.confirm_stage)?,
        PoolingDesign::Hypercube(h) => {
            hypercube_expected_tests_per_person_variant(rho, h.side, h.dimension, h.confirm_stage)?
        }
        PoolingDesign::Sterrett(s) => {
            sterrett_expected_tests_recursive(rho, s.batch_size)? / f64::from(s.batch_size)
        }
        PoolingDesign::GibbsGower(_) => {
            return invalid("Gibbs-Gower plans estimate prevalence and do not classify")
        }
    };
    Ok(DesignEvaluation::new(*design, rho, cost))
}

/// Constrained optimum of one architecture family, if any parameter is admissible.
pub fn optimal_design_for(
    rho: PrevalenceRate,
    kind: ArchitectureKind,
    constraints: &ConstraintSet,
) -> Result<Option<DesignEvaluation>> {
    let design = match kind {
        ArchitectureKind::Dorfman => {
            let d = dorfman_optimal_batch(rho, constraints)?;
            (d.batch_size >= 2).then_some(PoolingDesign::Dorfman(d))
        }
        ArchitectureKind::Array => array_optimal_side(rho, constraints)?.map(PoolingDesign::Array),
        ArchitectureKind::Hypercube { dimension } => {
            hypercube_optimal_side(rho, dimension, constraints)?.map(PoolingDesign::Hypercube)
        }
        ArchitectureKind::Sterrett => sterrett_optimal_batch(rho, constraints)?
            .map(PoolingDesign::Sterrett),
        ArchitectureKind::GibbsGower => {
            return invalid("Gibbs-Gower is an estimation design, not a classification candidate")
        }
    };
    design.map(|d| evaluate_design(rho, &d)).transpose()
}

/// Cheapest classification design among `candidates`, each at its constrained optimum.
///
/// Ties go to the smaller pool size, then to the simpler architecture. When no
/// pooled design beats one test per person, the result is individual testing
/// (`Dorfman` with batch size 1).
pub fn best_classification_design(
    rho: PrevalenceRate,
    constraints: &ConstraintSet,
    candidates: &[ArchitectureKind],
) -> Result<DesignEvaluation> {
    if candidates.is_empty() {
        return invalid("at least one candidate architecture is required");
    }
    let individual = DesignEvaluation::new(
        PoolingDesign::Dorfman(DorfmanDesign { batch_size: 1 }),
        rho,
        1.0,
    );
    if rho.value() >= 1.0 {
        return Ok(individual);
    }
    let mut evaluations = Vec::new();
    for &kind in candidates {
        if rho.value() <= 0.0 {
            // Every cost decreases in b at zero prevalence; use the largest admissible b.
            if let Some(e) = zero_prevalence_design(rho, kind, constraints)? {
                evaluations.push(e);
            }
            continue;
        }
        if let Some(e) = optimal_design_for(rho, kind, constraints)? {
            evaluations.push(e);
        }
    }
    let mut best = individual;
    for e in evaluations {
        let better = strictly_less(e.expected_tests_per_person, best.expected_tests_per_person)
            || (!strictly_less(best.expected_tests_per_person, e.expected_tests_per_person)
                && (e.design.pool_size(), e.design.kind().complexity_rank())
                    < (best.design.pool_size(), best.design.kind().complexity_rank()));
        if better {
            best = e;
        }
    }
    Ok(best)
}

fn zero_prevalence_design(
    rho: PrevalenceRate,
    kind: ArchitectureKind,
    constraints: &ConstraintSet,
) -> Result<Option<DesignEvaluation>> {
    let constraints = constraints.validated()?;
    let cap = constraints.max_pool_size.unwrap_or(DEFAULT_POOL_CAP);
    let dimension = match kind {
        ArchitectureKind::Array => 2,
        ArchitectureKind::Hypercube { dimension } => dimension,
        _ => 1,
    };
    let side = (2..=cap)
        .rev()
        .find(|&b| cluster_size(b, dimension).is_some_and(|n| constraints.admits_cluster(n)));
    let Some(b) = side else { return Ok(None) };
    let design = match kind {
        ArchitectureKind::Dorfman => PoolingDesign::Dorfman(DorfmanDesign { batch_size: b }),
        ArchitectureKind::Array => PoolingDesign::Array(ArrayDesign::new(b, true)?),
        ArchitectureKind::Hypercube { dimension } => {
            PoolingDesign::Hypercube(HypercubeDesign::new(b, dimension, true)?)
        }
        ArchitectureKind::Sterrett => PoolingDesign::Sterrett(SterrettDesign::new(b)?),
        ArchitectureKind::GibbsGower => {
            return invalid("Gibbs-Gower is an estimation design, not a classification candidate")
        }
    };
    evaluate_design(rho, &design).map(Some)
}

/// Cost of Dorfman at `min(cap, optimum)` minus the cost of a fixed-side array.
pub fn dorfman_minus_array_cost(rho: PrevalenceRate, dorfman_cap: u32, array_side: u32) -> Result<f64> {
    let dorfman = dorfman_optimal_batch(rho, &ConstraintSet::with_max_pool_size(dorfman_cap)?)?;
    Ok(dorfman_expected_tests_per_person(rho, dorfman.batch_size)?
        - array_expected_tests_per_person(rho, array_side, true)?)
}

/// Prevalences in `[lo, hi]` where capped Dorfman and a fixed-side array cost the same.
///
/// Sign changes are located on a log-spaced grid of `grid_points` and refined
/// by bisection.
pub fn dorfman_array_crossovers(
    dorfman_cap: u32,
    array_side: u32,
    lo: f64,
    hi: f64,
    grid_points: usize,
) -> Result<Vec<f64>> {
    if !(0.0 < lo && lo < hi && hi < 1.0) || grid_points < 2 {
        return invalid("crossover search needs 0 < lo < hi < 1 and at least 2 grid points");
    }
    let g = |x: f64| -> Result<f64> {
        dorfman_minus_array_cost(PrevalenceRate::new(x)?, dorfman_cap, array_side)
    };
    let ratio = (hi / lo).ln() / (grid_points - 1) as f64;
    let mut roots = Vec::new();
    let mut prev_x = lo;
    let mut prev_g = g(lo)?;
    for i in 1..grid_points {
        let x = lo * (ratio * i as f64).exp();
        let gx = g(x)?;
        if prev_g == 0.0 {
            roots.push(prev_x);
        } else if prev_g.signum() != gx.signum() && gx != 0.0 {
            let (mut a, mut b, mut ga) = (prev_x, x, prev_g);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let gm = g(m)?;
                if gm.signum() == ga.signum() {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
                if b - a <= 1e-14 * b {
                    break;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_x = x;
        prev_g = gx;
    }
    Ok(roots)
}
