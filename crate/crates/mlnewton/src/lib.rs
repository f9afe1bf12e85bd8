//! Regularized multilevel Newton-type optimization.
//!
//! The solvers in this crate minimize smooth objectives by building a
//! Newton-like model in a lower-dimensional "coarse" space obtained by
//! sampling coordinates, regularizing the (possibly indefinite) reduced
//! Hessian with a gradient-scaled diagonal shift, and prolonging the coarse
//! step back to the full space. When the restricted gradient carries too
//! little of the full gradient the step falls back to the fine level.
//!
//! Modules:
//! - [`problems`]: objective trait, LIBSVM datasets, logistic / nonlinear
//!   least-squares / quadratic test problems with analytic derivatives.
//! - [`transfer`]: coordinate-sampling restriction and prolongation
//!   operators and their per-iteration schedules.
//! - [`hessian`]: positive semidefinite Hessian surrogates (absolute
//!   eigenvalues, randomized low-rank, minimal-eigenvalue shift) and shifted
//!   solves including a Woodbury fast path.
//! - [`solvers`]: the multilevel methods, adaptive doubling line searches,
//!   and gradient-descent / cubic-Newton baselines behind one driver.
//! - [`harness`]: experiment configs, CSV traces, rate and coarse-step
//!   frequency estimators, used by the `mlnewton` binary.
//! - [`verify`]: finite-difference oracles and per-step inequality monitors.

pub mod harness;
pub mod hessian;
pub mod problems;
pub mod solvers;
pub mod transfer;
pub mod verify;
