//! Finite-difference solver for the prescribed mean curvature equation with
//! zero-order absorption,
//!
//! ```text
//! g(u) - div( grad u / sqrt(1 + |grad u|^2) ) = f,    u = 0 on the boundary,
//! ```
//!
//! approached through p-Laplacian regularization with continuation p -> 1,
//! plus a datum-truncation chain for merely integrable right-hand sides, an
//! implicit resolvent time stepper, a closed-form radial benchmark, and a
//! diagnostics layer (flux saturation, pairing identities, level-set decay,
//! equi-integrability, weak-norm thresholds, boundary detachment).

pub mod diagnostics;
pub mod evolution;
pub mod field;
pub mod grid;
pub mod l1;
pub mod nonlinearity;
pub mod operators;
pub mod quad;
pub mod radial;
pub mod solver;

pub use field::{BoundaryTrace, ScalarField, VectorField};
pub use grid::{unit_ball_volume, unit_sphere_area, Grid, GridError, GridKind, GridSpec};
pub use nonlinearity::{
    g_trunc, saturated_ramp, tail, truncate, AbsorptionSpec, DatumClass, DatumSpec,
};
pub use operators::{
    apply_operator, divergence, energy, gradient, mc_flux, p_flux, pairing_defect,
    pairing_defect_point, residual, OperatorConfig,
};
pub use diagnostics::{
    bv_seminorm, equint_check, lq_norm, thresholds, weak_ln_norm, EquintCheck,
};
pub use evolution::{evolve, resolvent_step, EvolutionConfig};
pub use l1::{solve_l1, L1Diagnostics, L1Row};
pub use radial::{example_fields, solve_radial_bvp, RadialExample};
pub use solver::{
    continue_to_limit, continue_with_boundary, detachment_report, solve_regularized,
    solve_with_boundary, ContinuationSchedule, DetachClass, DetachmentReport, NewtonOptions,
    NewtonStats, SolveReport, SolverError, StepRecord,
};
