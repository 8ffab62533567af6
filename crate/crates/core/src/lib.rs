//! Construction and certification engine for cusp-closing and doubling
//! surgeries on finite-volume hyperbolic manifolds with torus cusps.
//!
//! The pipeline designs a cutoff profile, builds the warped tube (or
//! doubling channel) metric `dt^2 + s(t)^2 dphi^2 + c(t)^2 dsigma^2`,
//! certifies sectional-curvature pinching on a grid, solves the gluing
//! equation against the cusp lattice, accounts volumes, and evaluates the
//! entropy lower-bound chain.
//!
//! Modules:
//! - [`warp`]: cutoff and warp profiles, closed-form curvatures, pinching certificates.
//! - [`oracle`]: finite-difference Riemann tensor and Jacobi operators (independent check).
//! - [`lattice`]: flat lattices, enumeration, greedy generators, generator swap.
//! - [`assembly`]: cusp cutting, tube/channel regions, gluing, volume ledger.
//! - [`entropy`]: Monte Carlo Liouville integral, rescaling, model volume entropy.

pub mod assembly;
pub mod entropy;
pub mod error;
pub mod lattice;
pub mod numerics;
pub mod oracle;
pub mod warp;

pub use error::{Error, Result};
