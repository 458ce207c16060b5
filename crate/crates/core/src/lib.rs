//! Numerical toolkit for the first eigenpair of the coupled local/nonlocal
//! p-Laplacian system
//!
//! ```text
//! -Δ_p u + (-Δ)^r_p u = λ 2α/(α+β) |u|^{α-2} u |v|^β
//! -Δ_p v + (-Δ)^s_p v = λ 2β/(α+β) |u|^α |v|^{β-2} v
//! ```
//!
//! with zero exterior data, and for its behaviour as `p -> ∞`.
//!
//! * [`geometry`]: grids, boundary distance, inradius, the normalized cone.
//! * [`energy`]: discrete energies, the Rayleigh quotient and its gradients.
//! * [`solver`]: constrained descent for `(u_p, v_p, λ_p)`.
//! * [`asymptotics`]: the limit eigenvalue, the limit functional, p-sweeps.
//! * [`infinity_ops`]: Hölder ∞-Laplacians, Δ_∞ and limit-system residuals.
//! * [`inequalities`]: numerical checks of the auxiliary inequalities.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod inequalities;
pub mod infinity_ops;
mod linalg;
pub mod parallel;
pub mod quadrature;
pub mod scaled;
pub mod solver;

pub use asymptotics::{
    holder_seminorm, infimum_i_abd, j_infinity, lambda_infinity, sweep_p, LimitParams, SweepRecord,
};
pub use energy::{
    constraint_g, gagliardo_energy, grad_g, grad_i, local_p_energy, rayleigh_jp, CoupledEnergy,
    EnergyBreakdown, ProblemParams,
};
pub use error::{Error, Result};
pub use geometry::{
    build_disk, build_interval, build_rectangle, normalized_cone, Domain, GridFunction, Point,
    Shape,
};
pub use infinity_ops::{
    discrete_lp_pm, infinity_laplacian, l_infinity_pm, residuals_limit_system, PointEval,
    ResidualReport,
};
pub use solver::{solve_eigenpair, solve_eigenpair_from, weak_residual, EigenPair, SolverOptions};
