//! Two-point connection by angular shooting.

use nalgebra::Vector2;

use super::{integrate_geodesic, GeodesicPath, IntegrationOptions, TerminationStatus};
use crate::error::{Error, Result};
use crate::metric::{orthonormal_frame, MetricField};

/// A converged connecting geodesic.
#[derive(Debug, Clone)]
pub struct ConnectSolution {
    /// Shooting angle in the g-orthonormal frame at the source.
    pub angle: f64,
    /// Arclength from `x` to `y`.
    pub length: f64,
    /// Residual perpendicular miss distance at `y`.
    pub miss: f64,
}

/// Result of multi-start shooting between two interior points.
#[derive(Debug, Clone)]
pub struct ConnectOutcome {
    /// Distinct connecting geodesics found (shortest first).
    pub solutions: Vec<ConnectSolution>,
    /// Path realizing the shortest connection.
    pub path: GeodesicPath,
    /// More than one distinct connecting geodesic was found.
    pub multiple: bool,
}

const MISS_TOL: f64 = 1e-9;
const MAX_SECANT_ITERS: usize = 40;
const N_STARTS: usize = 16;

/// Signed perpendicular miss of the geodesic from `x` at frame angle
/// `theta` relative to the target `y`, together with the arclength of the
/// closest approach. Positive sign means `y` lies to the left of the ray.
fn miss_function(
    metric: &MetricField,
    x: Vector2<f64>,
    y: Vector2<f64>,
    theta: f64,
    opts: &IntegrationOptions,
) -> Result<(f64, f64)> {
    let g = metric.components(x)?;
    let (e1, e2) = orthonormal_frame(&g);
    let v = theta.cos() * e1 + theta.sin() * e2;
    let path = integrate_geodesic(metric, x, v, opts)?;
    let dist: Vec<f64> = path.points.iter().map(|p| (p - y).norm()).collect();
    let n = dist.len();

    // Refine a sample-level local minimum: the radial speed
    // q(t) = <p - y, v> crosses zero at a true closest approach.
    let q = |t: f64| {
        let (p, v) = path.state_at(t);
        (p - y).dot(&v)
    };
    let refine = |i: usize| -> (f64, f64) {
        let t_lo = path.times[i.saturating_sub(1)];
        let t_hi = path.times[(i + 1).min(n - 1)];
        let mut t_best = path.times[i];
        if q(t_lo) < 0.0 && q(t_hi) > 0.0 {
            let (mut lo, mut hi) = (t_lo, t_hi);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if q(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            t_best = 0.5 * (lo + hi);
        }
        let (p, _) = path.state_at(t_best);
        (t_best, (p - y).norm())
    };

    // A trapped ray can pass the target repeatedly; refine every pass and
    // take the earliest one comparable to the closest, so the shooting
    // branch stays consistent as the angle varies.
    let mut passes: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || dist[i] <= dist[i - 1];
        let right_ok = i + 1 >= n || dist[i] <= dist[i + 1];
        if left_ok && right_ok {
            passes.push(refine(i));
        }
    }
    let d_min = passes.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let threshold = 1.25 * d_min + 1e-9;
    let &(t_best, _) = passes
        .iter()
        .find(|p| p.1 <= threshold)
        .unwrap_or(&(*path.times.last().unwrap(), f64::INFINITY));
    let (p, v_t) = path.state_at(t_best);
    let rel = y - p;
    let cross = v_t.x * rel.y - v_t.y * rel.x;
    let signed = cross.signum() * rel.norm();
    Ok((signed, t_best))
}

/// Find geodesics connecting `x` to `y` by secant shooting from
/// sixteen initial angles.
///
/// All converged solutions are deduplicated by angle; more than one
/// distinct solution is reported as a uniqueness violation. Failure of
/// every start to converge yields an error (conjugate points or trapping).
pub fn connect_points(
    metric: &MetricField,
    x: Vector2<f64>,
    y: Vector2<f64>,
) -> Result<ConnectOutcome> {
    if (x - y).norm() < 1e-12 {
        return Err(Error::usage("connect_points requires distinct endpoints"));
    }
    if x.norm() > 1.0 || y.norm() > 1.0 {
        return Err(Error::usage(
            "connect_points endpoints must lie in the disk",
        ));
    }
    let opts = IntegrationOptions::default();
    let mut solutions: Vec<ConnectSolution> = Vec::new();

    for start in 0..N_STARTS {
        let mut th0 = std::f64::consts::TAU * start as f64 / N_STARTS as f64;
        let mut th1 = th0 + 1e-3;
        let Ok((mut m0, _)) = miss_function(metric, x, y, th0, &opts) else {
            continue;
        };
        let Ok((mut m1, mut t1)) = miss_function(metric, x, y, th1, &opts) else {
            continue;
        };
        let mut converged = false;
        for _ in 0..MAX_SECANT_ITERS {
            if (m1 - m0).abs() < 1e-15 {
                break;
            }
            let th2 = th1 - m1 * (th1 - th0) / (m1 - m0);
            if !th2.is_finite() {
                break;
            }
            // Limit the secant jump so a flat miss function cannot fling
            // the iterate across the circle.
            let th2 = th1 + (th2 - th1).clamp(-0.5, 0.5);
            th0 = th1;
            m0 = m1;
            th1 = th2;
            let Ok((m, t)) = miss_function(metric, x, y, th1, &opts) else {
                break;
            };
            m1 = m;
            t1 = t;
            if m1.abs() < MISS_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            continue;
        }
        // The closest approach must be a genuine interior passage.
        if t1 < 1e-9 {
            continue;
        }
        let angle = th1.rem_euclid(std::f64::consts::TAU);
        let duplicate = solutions.iter().any(|s| {
            let d = (s.angle - angle).abs();
            d.min(std::f64::consts::TAU - d) < 1e-4
        });
        if !duplicate {
            solutions.push(ConnectSolution {
                angle,
                length: t1,
                miss: m1.abs(),
            });
        }
    }

    if solutions.is_empty() {
        return Err(Error::numeric(
            "no shooting start converged: endpoints may be conjugate or the ray trapped",
        ));
    }
    solutions.sort_by(|a, b| a.length.partial_cmp(&b.length).unwrap());
    let best = &solutions[0];
    let g = metric.components(x)?;
    let (e1, e2) = orthonormal_frame(&g);
    let v = best.angle.cos() * e1 + best.angle.sin() * e2;
    // The stored path runs from x to y only; on a closed geodesic the full
    // ray would never exit.
    let segment = IntegrationOptions {
        max_length: best.length,
        ..opts
    };
    let mut path = integrate_geodesic(metric, x, v, &segment)?;
    if path.status == TerminationStatus::StepLimit {
        path.status = TerminationStatus::Exited;
        path.tau_plus = best.length;
    }
    let multiple = solutions.len() > 1;
    Ok(ConnectOutcome {
        solutions,
        path,
        multiple,
    })
}
