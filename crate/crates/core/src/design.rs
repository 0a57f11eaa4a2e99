//! Parameter sets for the pooling architectures and the constraints on them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::prevalence::PrevalenceRate;

/// Two-stage pooling: one test per batch, then every member of a positive batch.
///
/// `batch_size == 1` is plain individual testing at one test per person.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DorfmanDesign {
    pub batch_size: u32,
}

/// `side x side` grid with every row and column pooled.
///
/// With `confirm_stage` the cells at a positive row/column crossing are
/// retested individually; without it they are presumed positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArrayDesign {
    pub side: u32,
    pub confirm_stage: bool,
}

/// `side^dimension` cube with every axis-parallel line pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HypercubeDesign {
    pub side: u32,
    pub dimension: u32,
    pub confirm_stage: bool,
}

/// Dorfman with sequential retesting that re-pools the untested remainder after each hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SterrettDesign {
    pub batch_size: u32,
}

/// `num_pools` pools of `pool_size` samples each, used for prevalence estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GibbsGowerPlan {
    pub pool_size: u32,
    pub num_pools: u64,
}

impl DorfmanDesign {
    pub fn new(batch_size: u32) -> Result<Self> {
        if batch_size == 0 {
            return invalid("Dorfman batch size must be at least 1");
        }
        Ok(Self { batch_size })
    }
}

impl ArrayDesign {
    pub fn new(side: u32, confirm_stage: bool) -> Result<Self> {
        if side < 2 {
            return invalid(format!("array side must be at least 2, got {side}"));
        }
        Ok(Self { side, confirm_stage })
    }
}

impl HypercubeDesign {
    pub fn new(side: u32, dimension: u32, confirm_stage: bool) -> Result<Self> {
        if side < 2 {
            return invalid(format!("hypercube side must be at least 2, got {side}"));
        }
        if dimension < 2 {
            return invalid(format!("hypercube dimension must be at least 2, got {dimension}"));
        }
        if cluster_size(side, dimension).is_none() {
            return invalid(format!("hypercube {side}^{dimension} is too large"));
        }
        Ok(Self {
            side,
            dimension,
            confirm_stage,
        })
    }

    pub fn cluster_size(&self) -> u64 {
        cluster_size(self.side, self.dimension).expect("validated on construction")
    }
}

impl SterrettDesign {
    pub fn new(batch_size: u32) -> Result<Self> {
        if batch_size < 2 {
            return invalid(format!("Sterrett batch size must be at least 2, got {batch_size}"));
        }
        Ok(Self { batch_size })
    }
}

impl GibbsGowerPlan {
    pub fn new(pool_size: u32, num_pools: u64) -> Result<Self> {
        if pool_size == 0 || num_pools == 0 {
            return invalid("Gibbs-Gower plans need pool_size >= 1 and num_pools >= 1");
        }
        Ok(Self {
            pool_size,
            num_pools,
        })
    }

    pub fn total_samples(&self) -> u64 {
        u64::from(self.pool_size) * self.num_pools
    }
}

pub(crate) fn cluster_size(side: u32, dimension: u32) -> Option<u64> {
    u64::from(side).checked_pow(dimension)
}

/// Any of the supported architectures with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "kebab-case")]
pub enum PoolingDesign {
    Dorfman(DorfmanDesign),
    Array(ArrayDesign),
    Hypercube(HypercubeDesign),
    Sterrett(SterrettDesign),
    GibbsGower(GibbsGowerPlan),
}

impl PoolingDesign {
    /// Number of samples that make up one independent unit of the design.
    pub fn cluster_size(&self) -> u64 {
        match *self {
            PoolingDesign::Dorfman(d) => u64::from(d.batch_size),
            PoolingDesign::Array(a) => u64::from(a.side) * u64::from(a.side),
            PoolingDesign::Hypercube(h) => h.cluster_size(),
            PoolingDesign::Sterrett(s) => u64::from(s.batch_size),
            PoolingDesign::GibbsGower(g) => g.total_samples(),
        }
    }

    /// Largest number of samples mixed into a single test.
    pub fn pool_size(&self) -> u32 {
        match *self {
            PoolingDesign::Dorfman(d) => d.batch_size,
            PoolingDesign::Array(a) => a.side,
            PoolingDesign::Hypercube(h) => h.side,
            PoolingDesign::Sterrett(s) => s.batch_size,
            PoolingDesign::GibbsGower(g) => g.pool_size,
        }
    }

    pub fn kind(&self) -> ArchitectureKind {
        match *self {
            PoolingDesign::Dorfman(_) => ArchitectureKind::Dorfman,
            PoolingDesign::Array(_) => ArchitectureKind::Array,
            PoolingDesign::Hypercube(h) => ArchitectureKind::Hypercube {
                dimension: h.dimension,
            },
            PoolingDesign::Sterrett(_) => ArchitectureKind::Sterrett,
            PoolingDesign::GibbsGower(_) => ArchitectureKind::GibbsGower,
        }
    }

    pub fn is_individual_testing(&self) -> bool {
        matches!(self, PoolingDesign::Dorfman(DorfmanDesign { batch_size: 1 }))
    }
}

impl fmt::Display for PoolingDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PoolingDesign::Dorfman(DorfmanDesign { batch_size: 1 }) => write!(f, "individual testing"),
            PoolingDesign::Dorfman(d) => write!(f, "Dorfman (batch size {})", d.batch_size),
            PoolingDesign::Array(a) => write!(
                f,
                "array {}x{} ({})",
                a.side,
                a.side,
                if a.confirm_stage { "confirmed" } else { "presumptive" }
            ),
            PoolingDesign::Hypercube(h) => write!(
                f,
                "hypercube side {} dimension {} ({})",
                h.side,
                h.dimension,
                if h.confirm_stage { "confirmed" } else { "presumptive" }
            ),
            PoolingDesign::Sterrett(s) => write!(f, "Sterrett (batch size {})", s.batch_size),
            PoolingDesign::GibbsGower(g) => {
                write!(f, "Gibbs-Gower ({} pools of {})", g.num_pools, g.pool_size)
            }
        }
    }
}

/// Architecture family without parameters, used to pick optimization candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArchitectureKind {
    Dorfman,
    Array,
    Hypercube { dimension: u32 },
    Sterrett,
    GibbsGower,
}

impl ArchitectureKind {
    /// Simplicity order used to break cost ties (lower is simpler).
    pub fn complexity_rank(&self) -> u8 {
        match self {
            ArchitectureKind::Dorfman => 0,
            ArchitectureKind::Array => 1,
            ArchitectureKind::Hypercube { .. } => 2,
            ArchitectureKind::Sterrett => 3,
            ArchitectureKind::GibbsGower => 4,
        }
    }
}

/// Operational limits on pool and cluster sizes.
///
/// `max_cluster_size` bounds the number of samples one design unit consumes
/// (`b^d` for a hypercube, `b * t` for an estimation plan).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub max_pool_size: Option<u32>,
    pub max_cluster_size: Option<u64>,
}

impl ConstraintSet {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn with_max_pool_size(max_pool_size: u32) -> Result<Self> {
        Self {
            max_pool_size: Some(max_pool_size),
            max_cluster_size: None,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.max_pool_size == Some(0) {
            return invalid("max_pool_size must be at least 1");
        }
        if self.max_cluster_size == Some(0) {
            return invalid("max_cluster_size must be at least 1");
        }
        Ok(self)
    }

    pub(crate) fn admits_cluster(&self, samples: u64) -> bool {
        self.max_cluster_size.is_none_or(|cap| samples <= cap)
    }
}

/// Expected cost of a classification design at a given prevalence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignEvaluation {
    pub design: PoolingDesign,
    pub prevalence: PrevalenceRate,
    pub expected_tests_per_person: f64,
    /// Efficiency gain: people screened per test, the reciprocal of the cost.
    pub individuals_per_test: f64,
}

impl DesignEvaluation {
    pub(crate) fn new(design: PoolingDesign, prevalence: PrevalenceRate, cost: f64) -> Self {
        Self {
            design,
            prevalence,
            expected_tests_per_person: cost,
            individuals_per_test: 1.0 / cost,
        }
    }
}
