//! Group-testing design toolkit.
//!
//! Analytic costs and optimizers for pooled classification (Dorfman, array,
//! hypercube, Sterrett), Gibbs-Gower prevalence estimation with exact bias and
//! MSE, a dilution false-negative model, and a seeded Monte Carlo oracle that
//! executes every design on synthetic populations.

pub mod analytics;
pub mod design;
pub mod dilution;
pub mod error;
pub mod estimation;
pub mod lambert;
pub mod numeric;
pub mod prevalence;
pub mod simulation;

pub use design::{
    ArchitectureKind, ArrayDesign, ConstraintSet, DesignEvaluation, DorfmanDesign,
    GibbsGowerPlan, HypercubeDesign, PoolingDesign, SterrettDesign,
};
pub use error::{Error, Result};
pub use prevalence::PrevalenceRate;
