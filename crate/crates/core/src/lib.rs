//! Suboptimal linear MPC with a fixed budget of over-relaxed ADMM iterations.
//!
//! The crate covers the whole pipeline for constrained linear-quadratic
//! regulation:
//!
//! * [`model`]: plants, polytopic constraint sets, the Riccati terminal
//!   cost and the condensed QP `min ‖u‖²_M` over `u ∈ 𝒲(x)`.
//! * [`qp`]: a dense primal active-set QP solver, Euclidean projection and
//!   the exact OCP solution used as an optimality oracle.
//! * [`admm`]: the over-relaxed ADMM operator, its ℓ-fold composition with
//!   warm starting, and fixed-point solves.
//! * [`analysis`]: the closed-loop stability certificate (LMI-certified
//!   contraction rate, Lipschitz and ISS constants, iteration bound ℓ*).
//! * [`simulator`]: the coupled system–optimizer closed loop, trajectory
//!   logging and pointwise certificate checks.
//! * [`cli`]: JSON configuration and the batch commands behind the
//!   `subopt-mpc` binary.

pub mod admm;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod qp;
pub mod simulator;

pub use error::{Error, Result};
pub use linalg::{Mat, Vector};
