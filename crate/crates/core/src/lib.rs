//! Multi-strain SEIR epidemics with waning immunity.
//!
//! * [`model`]: dynamics, reproduction number, equilibria and the analytic
//!   spectrum at the infection-free point.
//! * [`integrator`]: fixed-step RK4 with timed seeding of new strains.
//! * [`control`]: adjoint system, optimal control law and the
//!   forward-backward sweep.
//! * [`analysis`]: stability classification, finite-difference Jacobian and
//!   trajectory summaries.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod control;
pub mod error;
pub mod integrator;
pub mod model;

pub use analysis::{
    classify_stability, numeric_jacobian, summarize, PlateauShare, Stability, StabilityReport,
    StrainSummary, TrajectorySummary,
};
pub use control::{
    costate_derivatives, fbsm_solve, objective, optimal_u, running_cost, CostParams, CostateState,
    FbsmConfig, FbsmReport, StrainCostate,
};
pub use error::{Error, Result};
pub use integrator::{rk4_step, simulate, ControlSchedule, SeedEvent, TimeGrid, Trajectory};
pub use model::{
    analytic_eigenvalues, derivatives, min_stabilizing_control, nontrivial_equilibrium,
    reproduction_number, susceptible, susceptible_derivative, Compartments, ControlValue,
    EpidemicState, EquilibriumKind, EquilibriumPoint, ReproductionNumber, StateDerivative,
    StrainParams,
};
pub use nalgebra::Complex;
