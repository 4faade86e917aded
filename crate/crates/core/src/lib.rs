//! Distance fields from source objects on 3D polyhedral meshes.
//!
//! The distance function is obtained as the vanishing-viscosity limit of the
//! Laplacian-regularized eikonal equation
//!
//! ```text
//! -eps * Lap(u) + |grad u| = 1   in Omega \ Gamma
//!                        u = 0   on Gamma
//!            nu . grad u >= 0    on dOmega \ Gamma   (Soner condition)
//! ```
//!
//! discretized with a cell-centered finite volume method. The nonlinear term
//! is linearized around the previous solution, and a decreasing sequence of
//! regularization parameters `eps_n = h^(n/2)` is walked with a
//! deferred-correction iteration at each stage. Every assembled matrix only
//! couples a cell to its face neighbors.
//!
//! Module map:
//! - [`mesh`]: polyhedral mesh model, geometry, generators, file formats.
//! - [`gamma`]: source sets, seeding of Dirichlet cells, distance oracles.
//! - [`gradient`]: constrained least-squares, face and inflow gradients.
//! - [`assembly`]: normal fluxes and the sparse system of one iteration.
//! - [`linsolve`]: Krylov solvers, preconditioners and the outer residual.
//! - [`driver`]: the staged regularization algorithm.
//! - [`study`]: error norms, convergence orders and experiment presets.

pub mod assembly;
pub mod config;
pub mod driver;
mod error;
pub mod gamma;
pub mod gradient;
pub mod linsolve;
pub mod mesh;
pub mod par;
pub mod study;
pub mod vtk;

pub use error::{Error, Result};

/// Three-component vector used for positions, normals and gradients.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Regularizing constant in `|x|_sigma = sqrt(|x|^2 + sigma^2)`.
pub const SIGMA: f64 = 1e-12;
