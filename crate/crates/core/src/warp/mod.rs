//! Warp functions for the tube, channel and cusp metrics, their closed-form
//! sectional/Ricci curvatures, and grid-based pinching certificates.

mod curvature;
mod cutoff;
mod pinching;
mod profile;

pub use curvature::{sectional_curvatures, SectionalReport};
pub use cutoff::{make_cutoff, make_cutoff_with, smoothstep5, CutoffProfile, CutoffSearch};
pub use pinching::{certify_pinching, CurvatureBounds, PinchingCertificate, Verdict};
pub use profile::{channel_profile, tube_profile, WarpKind, WarpProfile, WarpShape, WarpValues};

/// Tolerance for checks on regions where the curvature is exactly known.
pub const EXACT_TOL: f64 = 1e-9;
/// Tolerance for certified pinching bounds.
pub const PINCHING_TOL: f64 = 1e-6;
/// Default grid step for pinching certification.
pub const DEFAULT_GRID_STEP: f64 = 1e-4;
