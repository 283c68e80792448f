//! Identity-level verification harness.
//!
//! Each check evaluates both sides of an integral identity by quadrature
//! on a bundle grid and reports the relative residual together with a
//! refinement trend; residuals of a healthy discretization grow under
//! coarsening and shrink under refinement.

mod b1;
mod simplicity;
pub mod tolerances;

pub use b1::{b1_estimate, B1Estimate};
pub use simplicity::{
    simplicity_report, ConditionReport, ConditionVerdict, SimplicityOptions, SimplicityReport,
};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::bundle::{BundleGrid, DerivativeMethod, ScalarField, SectionN};
use crate::error::{Error, Result};
use crate::metric::{MetricField, MetricNorm, MollifierSpec};
use crate::transform::{xray, InflowSample, Target};
use tolerances::RESIDUAL_FLOOR;

/// Outcome of one two-sided check at one resolution.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrendEntry {
    pub resolution: (usize, usize, usize),
    pub lhs: f64,
    pub rhs: f64,
    pub residual_rel: f64,
}

/// A two-sided identity check with its trend and verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_id: String,
    pub metric_id: String,
    pub grid: (usize, usize, usize),
    pub lhs: f64,
    pub rhs: f64,
    pub residual_abs: f64,
    pub residual_rel: f64,
    /// Residuals at coarser resolutions, ascending in resolution; the last
    /// entry is the reporting grid.
    pub trend: Vec<TrendEntry>,
    pub tolerance: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

pub(crate) fn relative_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(RESIDUAL_FLOOR)
}

impl VerificationReport {
    fn from_entries(
        check_id: &str,
        metric: &MetricField,
        tolerance: f64,
        entries: Vec<TrendEntry>,
    ) -> Self {
        let last = *entries.last().expect("at least one resolution");
        VerificationReport {
            check_id: check_id.to_string(),
            metric_id: metric.id().to_string(),
            grid: last.resolution,
            lhs: last.lhs,
            rhs: last.rhs,
            residual_abs: (last.lhs - last.rhs).abs(),
            residual_rel: last.residual_rel,
            trend: entries,
            tolerance,
            pass: last.residual_rel <= tolerance,
            warnings: Vec::new(),
        }
    }

    /// Ratio of the coarsest trend residual over the finest; healthy
    /// discretizations give values well above one.
    pub fn trend_growth(&self) -> Option<f64> {
        if self.trend.len() < 2 {
            return None;
        }
        let first = self.trend.first().unwrap().residual_rel;
        let last = self.trend.last().unwrap().residual_rel;
        if last <= RESIDUAL_FLOOR {
            return None;
        }
        Some(first / last)
    }

    pub fn one_line(&self) -> String {
        format!(
            "{} [{}] {}x{}x{}: |L-R|/max = {:.3e} (tol {:.1e}) {}",
            self.check_id,
            self.metric_id,
            self.grid.0,
            self.grid.1,
            self.grid.2,
            self.residual_rel,
            self.tolerance,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// The quadratic form `Q(W) = |XW|^2_{L2(N)} - <RW, W>_{L2(N)}`.
pub fn q_form(grid: &BundleGrid, w: &SectionN) -> Result<f64> {
    let (xw, _) = grid.apply_x_section(w)?;
    let rw = grid.curvature_op(w)?;
    Ok(grid.inner_l2_section(&xw, &xw)? - grid.inner_l2_section(&rw, &w.clone())?)
}

/// Three terms of the energy identity
/// `|vgrad Xu|^2 = Q(vgrad u) + (n-1) |Xu|^2` at one grid.
fn pestov_terms(grid: &BundleGrid, u: &ScalarField) -> Result<(f64, f64)> {
    let (xu, _) = grid.apply_x(u, DerivativeMethod::Stencil)?;
    let vxu = grid.v_grad(&xu)?;
    let lhs = grid.inner_l2_section(&vxu, &vxu)?;
    let vu = grid.v_grad(u)?;
    let q = q_form(grid, &vu)?;
    let xnorm = grid.inner_l2_scalar(&xu, &xu)?;
    Ok((lhs, q + xnorm))
}

/// Energy identity residual for a boundary-vanishing scalar field, with a
/// half-resolution trend entry.
///
/// The field is rebuilt per resolution from the supplied sampler.
pub fn pestov_residual(
    metric: &MetricField,
    resolutions: &[(usize, usize, usize)],
    tolerance: f64,
    sampler: impl Fn(&BundleGrid) -> ScalarField,
) -> Result<VerificationReport> {
    let mut entries = Vec::new();
    for &(n_r, n_phi, n_psi) in resolutions {
        let grid = BundleGrid::new(metric, n_r, n_phi, n_psi)?;
        let u = sampler(&grid);
        if !u.vanishes_on_boundary {
            return Err(Error::usage(
                "the energy identity needs a boundary-vanishing field",
            ));
        }
        grid.validate_boundary_vanishing(&u)?;
        let (lhs, rhs) = pestov_terms(&grid, &u)?;
        entries.push(TrendEntry {
            resolution: (n_r, n_phi, n_psi),
            lhs,
            rhs,
            residual_rel: relative_residual(lhs, rhs),
        });
    }
    Ok(VerificationReport::from_entries(
        "pestov", metric, tolerance, entries,
    ))
}

/// Weak commutator identity
/// `<hgrad u, V> = <vgrad u, XV> - <Xu, vdiv V>` for boundary-vanishing `u`.
pub fn commutator_check(
    metric: &MetricField,
    resolutions: &[(usize, usize, usize)],
    tolerance: f64,
    u_sampler: impl Fn(&BundleGrid) -> ScalarField,
    v_sampler: impl Fn(&BundleGrid) -> SectionN,
) -> Result<VerificationReport> {
    let mut entries = Vec::new();
    for &(n_r, n_phi, n_psi) in resolutions {
        let grid = BundleGrid::new(metric, n_r, n_phi, n_psi)?;
        let u = u_sampler(&grid);
        if !u.vanishes_on_boundary {
            return Err(Error::usage(
                "the weak commutator identity needs a boundary-vanishing field",
            ));
        }
        grid.validate_boundary_vanishing(&u)?;
        let v = v_sampler(&grid);
        let (hg, _) = grid.h_grad(&u)?;
        let t1 = grid.inner_l2_section(&hg, &v)?;
        let vg = grid.v_grad(&u)?;
        let (xv, _) = grid.apply_x_section(&v)?;
        let t2 = grid.inner_l2_section(&vg, &xv)?;
        let (xu, _) = grid.apply_x(&u, DerivativeMethod::Stencil)?;
        let dv = grid.v_div(&v)?;
        let t3 = grid.inner_l2_scalar(&xu, &dv)?;
        let lhs = t1;
        let rhs = t2 - t3;
        let denom = t1.abs().max(t2.abs()).max(t3.abs()).max(RESIDUAL_FLOOR);
        entries.push(TrendEntry {
            resolution: (n_r, n_phi, n_psi),
            lhs,
            rhs,
            residual_rel: (lhs - rhs).abs() / denom,
        });
    }
    Ok(VerificationReport::from_entries(
        "commutator",
        metric,
        tolerance,
        entries,
    ))
}

/// Fiber cancellation for 1-forms:
/// `|vgrad h|^2_{L2(N)} = (n-1) |h|^2_{L2(SM)}`.
pub fn oneform_cancellation(
    metric: &MetricField,
    resolutions: &[(usize, usize, usize)],
    tolerance: f64,
    h: impl Fn(Vector2<f64>) -> (f64, f64) + Sync,
) -> Result<VerificationReport> {
    let mut entries = Vec::new();
    for &(n_r, n_phi, n_psi) in resolutions {
        let grid = BundleGrid::new(metric, n_r, n_phi, n_psi)?;
        let field = grid.oneform_field(&h);
        let vg = grid.v_grad(&field)?;
        let lhs = grid.inner_l2_section(&vg, &vg)?;
        let rhs = grid.inner_l2_scalar(&field, &field)?;
        entries.push(TrendEntry {
            resolution: (n_r, n_phi, n_psi),
            lhs,
            rhs,
            residual_rel: relative_residual(lhs, rhs),
        });
    }
    Ok(VerificationReport::from_entries(
        "cancellation",
        metric,
        tolerance,
        entries,
    ))
}

/// Invariant-measure consistency: the bundle integral of `F` against the
/// ray decomposition `sum of weight * flow integral` over the inflow
/// sample.
pub fn santalo_check(
    metric: &MetricField,
    grid: &BundleGrid,
    rays: &[InflowSample],
    field: &ScalarField,
    tolerance: f64,
) -> Result<VerificationReport> {
    let ones = grid.lift_scalar(false, |_| 1.0);
    let lhs = grid.inner_l2_scalar(field, &ones)?;

    // Flow integrals of the interpolated field.
    let values: Vec<f64> = {
        use rayon::prelude::*;
        let opts = crate::geodesic::IntegrationOptions::default();
        rays.par_iter()
            .map(|ray| {
                let mut acc = 0.0;
                let outcome = crate::geodesic::trace(metric, ray.x, ray.v, &opts, |s| {
                    let h = s.t1 - s.t0;
                    let (xm, vm) = s.midpoint();
                    let f0 = grid.interpolate(&field.values, s.x0, s.v0).0;
                    let fm = grid.interpolate(&field.values, xm, vm).0;
                    let f1 = grid.interpolate(&field.values, s.x1, s.v1).0;
                    acc += (h / 6.0) * (f0 + 4.0 * fm + f1);
                })?;
                if outcome.status == crate::geodesic::TerminationStatus::StepLimit {
                    Ok(f64::NAN)
                } else {
                    Ok(acc)
                }
            })
            .collect::<Result<_>>()?
    };
    let dropped = values.iter().filter(|v| v.is_nan()).count();
    let rhs: f64 = rays
        .iter()
        .zip(&values)
        .filter(|(_, v)| !v.is_nan())
        .map(|(r, v)| r.weight * v)
        .sum();

    let entry = TrendEntry {
        resolution: grid.shape(),
        lhs,
        rhs,
        residual_rel: relative_residual(lhs, rhs),
    };
    let mut report = VerificationReport::from_entries("santalo", metric, tolerance, vec![entry]);
    if dropped as f64 > 0.01 * rays.len() as f64 {
        report.warnings.push(format!(
            "{} of {} rays failed to exit and were dropped",
            dropped,
            rays.len()
        ));
    }
    Ok(report)
}

/// Smoothing convergence table: every tracked norm distance between the
/// metric and its smoothing, per scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollifyStudy {
    pub metric_id: String,
    pub alphas: Vec<u32>,
    pub norm_labels: Vec<String>,
    /// `distances[i][j]` = distance at `alphas[i]` in norm `j`.
    pub distances: Vec<Vec<f64>>,
    /// Strict decrease along the scale ladder (with the per-step slack).
    pub monotone: bool,
}

/// Distances between `metric` and its smoothings at each scale, in all six
/// tracked norms; `monotone` records whether each norm decreases along the
/// ladder within the allowed slack.
pub fn mollify_study(metric: &MetricField, alphas: &[u32]) -> Result<MollifyStudy> {
    let mut distances = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let smooth = metric.mollify(&MollifierSpec::new(alpha))?;
        distances.push(metric.sobolev_distances(&smooth, &MetricNorm::ALL)?);
    }
    let mut monotone = true;
    for j in 0..MetricNorm::ALL.len() {
        // A constant metric has identically zero distances; nothing to
        // decrease.
        if distances.iter().all(|row| row[j] < 1e-13) {
            continue;
        }
        for i in 1..alphas.len() {
            if distances[i][j] > distances[i - 1][j] * tolerances::MOLLIFY_STEP_SLACK {
                monotone = false;
            }
        }
        if alphas.len() >= 2 && distances[alphas.len() - 1][j] >= distances[0][j] {
            monotone = false;
        }
    }
    Ok(MollifyStudy {
        metric_id: metric.id().to_string(),
        alphas: alphas.to_vec(),
        norm_labels: MetricNorm::ALL
            .iter()
            .map(|n| n.label().to_string())
            .collect(),
        distances,
        monotone,
    })
}

/// Gauge invariance of the ray transform: `xray(h + dp) = xray(h)` per ray
/// for `p` vanishing on the boundary.
pub fn gauge_invariance_max_deviation(
    metric: &MetricField,
    rays: &[InflowSample],
    h: impl Fn(Vector2<f64>) -> (f64, f64) + Sync,
    dp: impl Fn(Vector2<f64>) -> (f64, f64) + Sync,
) -> Result<f64> {
    let shifted = |x: Vector2<f64>| {
        let (a, b) = h(x);
        let (c, d) = dp(x);
        (a + c, b + d)
    };
    let base = xray(metric, &Target::OneForm(&h), rays)?;
    let moved = xray(metric, &Target::OneForm(&shifted), rays)?;
    Ok(base
        .iter()
        .zip(&moved)
        .map(|(a, b)| (a.value - b.value).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::inflow_samples;
    use approx::assert_relative_eq;

    fn pestov_field(grid: &BundleGrid) -> ScalarField {
        grid.scalar_from_polar(true, |r, _, psi| (1.0 - r * r) * psi.sin())
    }

    #[test]
    fn pestov_zero_field_is_exact() {
        let m = MetricField::euclidean();
        let report = pestov_residual(&m, &[(12, 12, 16)], 0.02, |g| {
            let mut u = ScalarField::zeros(g);
            u.vanishes_on_boundary = true;
            u
        })
        .unwrap();
        assert_eq!(report.lhs, 0.0);
        assert_eq!(report.rhs, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn pestov_on_euclidean_disk() {
        let m = MetricField::euclidean();
        let report = pestov_residual(
            &m,
            &[(32, 32, 64), (64, 64, 128)],
            tolerances::PESTOV_REL_TOL_FLAT,
            pestov_field,
        )
        .unwrap();
        assert!(report.pass, "{}", report.one_line());
        let growth = report.trend_growth().unwrap();
        assert!(
            growth >= tolerances::TREND_GROWTH_MIN,
            "residual did not grow at half resolution: {growth:.2}"
        );
    }

    #[test]
    fn pestov_requires_boundary_vanishing_flag() {
        let m = MetricField::euclidean();
        let err = pestov_residual(&m, &[(12, 12, 16)], 0.02, |g| g.lift_scalar(false, |x| x.x));
        assert!(matches!(err, Err(Error::Usage(_))));
    }

    #[test]
    fn q_form_reduces_to_transport_energy_when_flat() {
        let m = MetricField::euclidean();
        let grid = BundleGrid::new(&m, 16, 16, 32).unwrap();
        let w = grid.section_from_fn(|x, v| (1.0 - x.norm_squared()) * (1.0 + v.x));
        let q = q_form(&grid, &w).unwrap();
        let (xw, _) = grid.apply_x_section(&w).unwrap();
        let expected = grid.inner_l2_section(&xw, &xw).unwrap();
        assert_relative_eq!(q, expected, max_relative = 1e-12);
        assert!(q >= 0.0);
    }

    #[test]
    fn q_form_flat_is_nonnegative_on_random_sections() {
        use rand::{Rng, SeedableRng};
        let m = MetricField::euclidean();
        let grid = BundleGrid::new(&m, 12, 16, 16).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (a, b, c, d) = (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let w = grid.section_from_fn(|x, v| {
                a + b * x.x + c * x.y * v.y + d * (1.0 - x.norm_squared()) * v.x
            });
            let q = q_form(&grid, &w).unwrap();
            assert!(q >= -1e-12, "Q(W) = {q:.3e} < 0 on the flat disk");
        }
    }

    #[test]
    fn q_form_subtracts_l2_on_unit_curvature() {
        let m = MetricField::constant_curvature(0.8);
        let grid = BundleGrid::new(&m, 24, 24, 32).unwrap();
        let w = grid.section_from_fn(|x, v| x.x + 0.5 * v.y);
        let q = q_form(&grid, &w).unwrap();
        let (xw, _) = grid.apply_x_section(&w).unwrap();
        let xe = grid.inner_l2_section(&xw, &xw).unwrap();
        let l2 = grid.inner_l2_section(&w, &w).unwrap();
        assert_relative_eq!(q, xe - l2, max_relative = 2e-3);
    }

    #[test]
    fn commutator_constant_field_vanishes() {
        let m = MetricField::euclidean();
        let report = commutator_check(
            &m,
            &[(12, 12, 16)],
            0.02,
            |g| {
                let mut u = ScalarField::zeros(g);
                u.values.iter_mut().for_each(|v| *v = 0.0);
                u.vanishes_on_boundary = true;
                u
            },
            |g| g.section_from_fn(|x, v| x.x + v.y),
        )
        .unwrap();
        assert_eq!(report.lhs, 0.0);
        assert_eq!(report.rhs, 0.0);
    }

    #[test]
    fn commutator_on_lifted_parabola() {
        // u = pi* (1 - |x|^2): vgrad u = 0 and the identity reduces to
        // <hgrad u, V> = -<Xu, vdiv V>.
        let m = MetricField::euclidean();
        let report = commutator_check(
            &m,
            &[(32, 32, 64), (64, 64, 128)],
            tolerances::COMMUTATOR_REL_TOL_FLAT,
            |g| g.lift_scalar(true, |x| 1.0 - x.norm_squared()),
            |g| g.section_from_fn(|x, v| (1.0 + x.y) * (1.0 + 0.3 * v.x)),
        )
        .unwrap();
        assert!(report.pass, "{}", report.one_line());
    }

    #[test]
    fn cancellation_dx1_closed_form() {
        let m = MetricField::euclidean();
        let report = oneform_cancellation(
            &m,
            &[(48, 48, 64)],
            tolerances::CANCELLATION_REL_TOL_CLOSED,
            |_| (1.0, 0.0),
        )
        .unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(report.pass, "{}", report.one_line());
        assert_relative_eq!(report.lhs, pi2, max_relative = 5e-3);
        assert_relative_eq!(report.rhs, pi2, max_relative = 5e-3);
    }

    #[test]
    fn cancellation_random_polynomial_on_cap() {
        let m = MetricField::constant_curvature(0.8);
        let report = oneform_cancellation(
            &m,
            &[(48, 48, 64)],
            tolerances::CANCELLATION_REL_TOL_GENERIC,
            |x| (0.3 - x.y + 0.2 * x.x * x.x, 0.7 * x.x + 0.1 * x.y * x.y),
        )
        .unwrap();
        assert!(report.pass, "{}", report.one_line());
    }

    #[test]
    fn santalo_constant_function() {
        let m = MetricField::euclidean();
        let grid = BundleGrid::new(&m, 32, 32, 48).unwrap();
        let rays = inflow_samples(&m, 64, 64).unwrap();
        let field = grid.lift_scalar(false, |_| 1.0);
        let report =
            santalo_check(&m, &grid, &rays, &field, tolerances::SANTALO_REL_TOL_CONST).unwrap();
        assert!(report.pass, "{}", report.one_line());
        assert_relative_eq!(
            report.lhs,
            2.0 * std::f64::consts::PI.powi(2),
            max_relative = 1e-3
        );
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn santalo_zero_function() {
        let m = MetricField::euclidean();
        let grid = BundleGrid::new(&m, 16, 16, 16).unwrap();
        let rays = inflow_samples(&m, 16, 16).unwrap();
        let field = ScalarField::zeros(&grid);
        let report = santalo_check(&m, &grid, &rays, &field, 0.01).unwrap();
        assert_eq!(report.lhs, 0.0);
        assert!(report.rhs.abs() < 1e-12);
    }

    #[test]
    fn gauge_invariance_stays_below_tolerance() {
        let m = MetricField::constant_curvature(0.8);
        let rays = inflow_samples(&m, 12, 12).unwrap();
        let dev = gauge_invariance_max_deviation(
            &m,
            &rays,
            |x| (x.y, 0.4 * x.x),
            |x| {
                // dp for p = (1 - |x|^2) x2.
                (-2.0 * x.x * x.y, 1.0 - x.x * x.x - 3.0 * x.y * x.y)
            },
        )
        .unwrap();
        assert!(dev <= tolerances::GAUGE_PER_RAY_TOL, "deviation {dev:.3e}");
    }
}
