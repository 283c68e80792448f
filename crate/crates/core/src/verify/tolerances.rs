//! Tolerances used by the verification harness and the acceptance suite.
//!
//! Second-order stencils composed through first-order operator identities
//! give first-order identity residuals; the defaults below are calibrated
//! for the reference grid of 64 radii x 64 angles x 128 fiber angles and
//! the constant-curvature / rough built-in metrics.

/// Relative floor in `|L - R| / max(|L|, |R|, floor)`.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

/// Energy identity on the flat disk at the reference grid.
pub const PESTOV_REL_TOL_FLAT: f64 = 0.02;
/// Energy identity on curved metrics at the reference grid.
pub const PESTOV_REL_TOL_CURVED: f64 = 0.03;

/// Fiber cancellation for closed-form 1-forms (both sides are exact fiber
/// integrals; only the base quadrature enters).
pub const CANCELLATION_REL_TOL_CLOSED: f64 = 0.005;
/// Fiber cancellation for generic Lipschitz 1-forms on curved metrics.
pub const CANCELLATION_REL_TOL_GENERIC: f64 = 0.01;

/// Weak commutator identity on the flat disk.
pub const COMMUTATOR_REL_TOL_FLAT: f64 = 0.02;
/// Weak commutator identity on smoothed rough metrics.
pub const COMMUTATOR_REL_TOL_ROUGH: f64 = 0.03;

/// Flow/boundary measure consistency for constant integrands.
pub const SANTALO_REL_TOL_CONST: f64 = 0.005;
/// Flow/boundary measure consistency for boundary-concentrated integrands.
pub const SANTALO_REL_TOL_BUMP: f64 = 0.02;

/// Allowed per-step slack in the smoothing convergence study (each norm
/// must not grow by more than this factor when the scale doubles).
pub const MOLLIFY_STEP_SLACK: f64 = 1.05;

/// A passing residual must grow by at least this factor at half
/// resolution (the convergence direction).
pub const TREND_GROWTH_MIN: f64 = 1.5;

/// Relative accuracy demanded of the flat-disk coercivity constant against
/// the 1-D Dirichlet value `(pi/2)^2` on maximal chords.
pub const B1_EPSILON_REL_TOL: f64 = 0.05;
/// Coercivity estimates below this value fail condition B1.
pub const B1_FAIL_THRESHOLD: f64 = 0.05;

/// Max absolute exit-time error against the flat chord root.
pub const EXIT_TIME_ABS_TOL: f64 = 1e-8;

/// Integration-by-parts defect, relative to the product of norms.
pub const DUALITY_REL_TOL: f64 = 1e-3;

/// Relative reconstruction error allowed for the smooth phantom.
pub const RECONSTRUCTION_REL_TOL: f64 = 0.05;

/// Largest principal angle (degrees) between the numerical null space and
/// the discrete gauge space.
pub const GAUGE_ANGLE_TOL_DEG: f64 = 5.0;
/// Per-ray invariance of the transform under gauge shifts.
pub const GAUGE_PER_RAY_TOL: f64 = 1e-6;

/// Dyadic slope of the travel-time ratio divergence demanded of
/// non-convex boundaries: at least the cubic-root law.
pub const TAU_SLOPE_LAW: f64 = 1.0 / 3.0;
/// Slope tolerance for the law and for the bounded (convex) verdict.
pub const TAU_SLOPE_TOL: f64 = 0.1;
/// Probe slopes below this classify as bounded (condition B3 holds).
pub const TAU_SLOPE_BOUNDED: f64 = 0.15;

/// Window for locating the conjugate distance `pi` on the unit-curvature
/// cap.
pub const JACOBI_ZERO_TOL: f64 = 1e-3;

/// Boundary curvature tolerance for the flat disk (`S = 1`).
pub const SFF_FLAT_ABS_TOL: f64 = 1e-6;
/// Boundary curvature tolerance at the totally geodesic transition.
pub const SFF_TRANSITION_ABS_TOL: f64 = 1e-4;
