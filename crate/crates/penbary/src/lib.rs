//! Penalized Wasserstein barycenters of zero-mean Gaussian, q-Gaussian and
//! φ-exponential measures.
//!
//! On these families the squared 2-Wasserstein distance is an explicit
//! function of means and covariances, so the penalized barycenter problem
//! reduces to a strictly convex minimization over symmetric positive definite
//! matrices whose stationary point solves a nonlinear matrix equation. This
//! crate provides:
//!
//! - [`spd`]: eigendecomposition-backed SPD calculus (powers, geometric mean,
//!   Löwner box projection, Frobenius geometry);
//! - [`measures`]: the measure families, deformed logarithm/exponential
//!   calculus, normalization constants, entropies, distances and transport
//!   maps;
//! - [`objective`]: barycenter objectives, gradients, spectral bounds,
//!   Lipschitz constants and the convexity threshold;
//! - [`solvers`]: the gradient projection method (Armijo and constant
//!   stepsize), Picard iteration of the fixed-point maps, closed-form special
//!   cases, optimality residuals and invariant brackets;
//! - [`experiments`]: seeded random instance generation, parameter sweeps and
//!   perturbation-stability runs with CSV/markdown output;
//! - [`fileio`]: the JSON problem/report file formats used by the CLI and the
//!   C API.

pub mod error;
pub mod experiments;
pub mod fileio;
pub mod measures;
pub mod objective;
pub mod quad;
pub mod solvers;
pub mod spd;

pub use error::{Error, Result};
pub use measures::MeasureFamily;
pub use objective::{ProblemInstance, SpectralBounds};
pub use solvers::{SolveReport, SolverConfig, SolverKind};
pub use spd::{LownerInterval, SpdMatrix, SymMatrix};
