//! Composite simplicity verdicts: coercivity of `Q`, uniqueness of
//! connecting geodesics, and Lipschitz regularity of the squared travel
//! time, with curvature cross-checks.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::b1::b1_estimate;
use super::tolerances;
use crate::error::Result;
use crate::geodesic::{
    self, connect_points, jacobi_index, probe_slope, second_fundamental_form,
    tau_squared_lipschitz_probe, IntegrationOptions, TerminationStatus,
};
use crate::metric::MetricField;
use crate::transform::inflow_samples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub verdict: ConditionVerdict,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub metric_id: String,
    pub b1: ConditionReport,
    pub b2: ConditionReport,
    pub b3: ConditionReport,
    /// Smallest Jacobi-zero distance found on the ray scan, if any.
    pub conjugate_distance: Option<f64>,
    /// Range of the boundary curvature over the station scan.
    pub sff_min: f64,
    pub sff_max: f64,
    pub all_pass: bool,
}

#[derive(Debug, Clone)]
pub struct SimplicityOptions {
    /// Inflow sample for the coercivity estimate.
    pub b1_rays: (usize, usize),
    /// Random interior pairs for the uniqueness check.
    pub b2_pairs: usize,
    /// Boundary stations for the travel-time probe and curvature scan.
    pub stations: usize,
    /// Dyadic scales for the travel-time probe.
    pub scales: Vec<f64>,
    /// Rays scanned for interior Jacobi zeros.
    pub conjugate_scan_rays: usize,
    pub seed: u64,
}

impl Default for SimplicityOptions {
    fn default() -> Self {
        SimplicityOptions {
            b1_rays: (32, 32),
            b2_pairs: 200,
            stations: 6,
            scales: (4..=10).map(|k| 2.0f64.powi(-k)).collect(),
            conjugate_scan_rays: 32,
            seed: 0,
        }
    }
}

/// Run all three simplicity conditions plus the curvature cross-checks.
///
/// Sub-probe failures mark a condition inconclusive rather than passing it.
pub fn simplicity_report(
    metric: &MetricField,
    opts: &SimplicityOptions,
) -> Result<SimplicityReport> {
    // Coercivity of Q.
    let b1 = match b1_estimate(metric, opts.b1_rays.0, opts.b1_rays.1, opts.seed) {
        Ok(est) => {
            let verdict = if est.epsilon > tolerances::B1_FAIL_THRESHOLD {
                ConditionVerdict::Pass
            } else {
                ConditionVerdict::Fail
            };
            ConditionReport {
                verdict,
                value: est.epsilon,
                detail: format!(
                    "epsilon = {:.4} on ray {} (tau = {:.3}), {} trapped",
                    est.epsilon, est.worst_ray, est.worst_tau, est.trapped_rays
                ),
            }
        }
        Err(e) => ConditionReport {
            verdict: ConditionVerdict::Inconclusive,
            value: 0.0,
            detail: format!("coercivity probe failed: {e}"),
        },
    };

    // Uniqueness of connecting geodesics.
    let mut rng = ChaCha8Rng::seed_from_u64(crate::subseed(opts.seed, "b2"));
    let mut violations = 0usize;
    let mut failures = 0usize;
    let mut checked = 0usize;
    for _ in 0..opts.b2_pairs {
        let sample = |rng: &mut ChaCha8Rng| {
            let r = (rng.gen_range(0.0f64..1.0)).sqrt() * 0.85;
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            Vector2::new(r * a.cos(), r * a.sin())
        };
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        if (x - y).norm() < 1e-3 {
            continue;
        }
        checked += 1;
        match connect_points(metric, x, y) {
            Ok(out) => {
                if out.multiple {
                    violations += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let b2 = if violations > 0 {
        ConditionReport {
            verdict: ConditionVerdict::Fail,
            value: violations as f64,
            detail: format!("{violations} of {checked} pairs had multiple connections"),
        }
    } else if failures * 10 > checked {
        ConditionReport {
            verdict: ConditionVerdict::Inconclusive,
            value: failures as f64,
            detail: format!("{failures} of {checked} pairs failed to connect"),
        }
    } else {
        ConditionReport {
            verdict: ConditionVerdict::Pass,
            value: 0.0,
            detail: format!("{checked} pairs, unique connections throughout"),
        }
    };

    // Travel-time regularity.
    let b3 = match tau_squared_lipschitz_probe(metric, &opts.scales, opts.stations) {
        Ok(rows) => {
            let trapped: usize = rows.iter().map(|r| r.trapped).sum();
            if trapped > 0 {
                // A trapped probe means tau is not even finite near the
                // tangential directions; tau^2 cannot be Lipschitz.
                ConditionReport {
                    verdict: ConditionVerdict::Fail,
                    value: trapped as f64,
                    detail: format!("{trapped} tangential probes never exited (tau unbounded)"),
                }
            } else {
                let slope = probe_slope(&rows);
                let max_ratio = rows.iter().map(|r| r.ratio_max).fold(0.0f64, f64::max);
                let verdict = if slope.abs() <= tolerances::TAU_SLOPE_BOUNDED {
                    ConditionVerdict::Pass
                } else {
                    ConditionVerdict::Fail
                };
                ConditionReport {
                    verdict,
                    value: slope,
                    detail: format!(
                        "dyadic ratio slope {slope:.3}, max ratio {max_ratio:.3} over {} scales",
                        rows.len()
                    ),
                }
            }
        }
        Err(e) => ConditionReport {
            verdict: ConditionVerdict::Inconclusive,
            value: 0.0,
            detail: format!("travel-time probe failed: {e}"),
        },
    };

    // Conjugate-point scan along inflow rays.
    let mut conjugate_distance: Option<f64> = None;
    let scan_rays = inflow_samples(metric, opts.conjugate_scan_rays, 8)?;
    let integration = IntegrationOptions::default();
    for ray in scan_rays.iter().step_by(3) {
        let path = geodesic::integrate_geodesic(metric, ray.x, ray.v, &integration)?;
        if path.status != TerminationStatus::Exited {
            continue;
        }
        if let Ok(data) = jacobi_index(metric, &path, None) {
            for z in &data.zeros {
                conjugate_distance = Some(match conjugate_distance {
                    Some(d) => d.min(z.t),
                    None => z.t,
                });
            }
        }
    }

    // Boundary curvature scan.
    let mut sff_min = f64::INFINITY;
    let mut sff_max = f64::NEG_INFINITY;
    for k in 0..opts.stations.max(4) {
        let beta = std::f64::consts::TAU * k as f64 / opts.stations.max(4) as f64;
        let x = Vector2::new(beta.cos(), beta.sin());
        let w = Vector2::new(-beta.sin(), beta.cos());
        let s = second_fundamental_form(metric, x, w)?;
        sff_min = sff_min.min(s.value);
        sff_max = sff_max.max(s.value);
    }

    let all_pass = [&b1, &b2, &b3]
        .iter()
        .all(|c| c.verdict == ConditionVerdict::Pass);
    Ok(SimplicityReport {
        metric_id: metric.id().to_string(),
        b1,
        b2,
        b3,
        conjugate_distance,
        sff_min,
        sff_max,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_opts() -> SimplicityOptions {
        SimplicityOptions {
            b1_rays: (16, 16),
            b2_pairs: 40,
            stations: 4,
            scales: (4..=9).map(|k| 2.0f64.powi(-k)).collect(),
            conjugate_scan_rays: 12,
            seed: 2,
        }
    }

    #[test]
    fn euclidean_disk_is_simple() {
        let m = MetricField::euclidean();
        let report = simplicity_report(&m, &quick_opts()).unwrap();
        assert_eq!(report.b1.verdict, ConditionVerdict::Pass, "{:?}", report.b1);
        assert_eq!(report.b2.verdict, ConditionVerdict::Pass, "{:?}", report.b2);
        assert_eq!(report.b3.verdict, ConditionVerdict::Pass, "{:?}", report.b3);
        assert!(report.conjugate_distance.is_none());
        assert!(report.sff_min > 0.9 && report.sff_max < 1.1);
        assert!(report.all_pass);
    }

    #[test]
    fn hemisphere_fails_travel_time_regularity() {
        let m = MetricField::constant_curvature(1.0);
        let report = simplicity_report(&m, &quick_opts()).unwrap();
        assert_eq!(report.b3.verdict, ConditionVerdict::Fail, "{:?}", report.b3);
        // The boundary is totally geodesic.
        assert!(
            report.sff_min.abs() < 1e-3 && report.sff_max.abs() < 1e-3,
            "S in [{:.2e}, {:.2e}]",
            report.sff_min,
            report.sff_max
        );
        // Ratios diverge at least at the cubic-root law rate.
        assert!(
            report.b3.value >= tolerances::TAU_SLOPE_LAW - tolerances::TAU_SLOPE_TOL,
            "slope {:.3}",
            report.b3.value
        );
    }

    #[test]
    fn beyond_hemisphere_fails_coercivity_with_conjugate_points() {
        let m = MetricField::constant_curvature(1.25);
        let report = simplicity_report(&m, &quick_opts()).unwrap();
        assert_eq!(report.b1.verdict, ConditionVerdict::Fail, "{:?}", report.b1);
        let d = report
            .conjugate_distance
            .expect("conjugate points should be detected");
        assert!(
            (d - std::f64::consts::PI).abs() < tolerances::JACOBI_ZERO_TOL,
            "conjugate distance {d:.5}"
        );
    }
}
