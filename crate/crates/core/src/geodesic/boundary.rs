//! Boundary curvature and travel-time regularity probes.

use nalgebra::Vector2;

use super::{inward_normal, transport_along, IntegrationOptions, TerminationStatus};
use crate::error::{Error, Result};
use crate::metric::MetricField;

/// Second fundamental form value with the stencil that produced it.
#[derive(Debug, Clone, Copy)]
pub struct SecondFundamentalForm {
    pub value: f64,
    pub stencil: f64,
    /// Set when the stencil had to be widened away from machine noise,
    /// trading order for stability.
    pub widened: bool,
}

/// Signed g-distance from `x` to the boundary circle, positive inside.
///
/// The radial segment from `x` to `x/|x|` is g-measured with two-point
/// Gauss quadrature; for the near-boundary points the probes use, the
/// non-radial correction to the true distance enters at third order.
fn signed_boundary_distance(metric: &MetricField, x: Vector2<f64>) -> Result<f64> {
    let r = x.norm();
    if r < 1e-12 {
        return Err(Error::usage("boundary distance probe at the disk center"));
    }
    let u = x / r;
    let delta = 1.0 - r;
    let gauss = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
    let mut len = 0.0;
    for s in gauss {
        let p = u * (r + s * delta);
        let g = metric.extended_components(p);
        len += 0.5 * ((g * u).dot(&u)).sqrt();
    }
    Ok(delta * len)
}

/// Second fundamental form `S_x(w, w)` of the boundary circle at `x_b`,
/// with respect to the inward normal (positive means locally strictly
/// convex).
///
/// Computed as the g-normal acceleration of the geodesic through
/// `(x_b, w)` relative to the boundary: a centered second difference of the
/// signed g-distance between geodesic and boundary.
pub fn second_fundamental_form(
    metric: &MetricField,
    x_b: Vector2<f64>,
    w: Vector2<f64>,
) -> Result<SecondFundamentalForm> {
    if (x_b.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::usage(
            "second fundamental form needs a boundary point",
        ));
    }
    let x_b = x_b / x_b.norm();
    let nu = inward_normal(metric, x_b)?;
    let mut w = w / metric.norm_g(x_b, w)?;
    let normal_part = metric.inner(x_b, w, nu)?;
    if normal_part.abs() > 1e-8 {
        return Err(Error::usage(format!(
            "direction is not boundary-tangent: <w, nu>_g = {normal_part:.3e}"
        )));
    }
    // Project out the residual normal component so the probe is symmetric.
    w -= normal_part * nu;
    w /= metric.norm_g(x_b, w)?;

    let mut h = 1e-3;
    let mut widened = false;
    loop {
        let fine = h / 8.0;
        let (xp, _, _) = transport_along(metric, x_b, w, w, h, fine)?;
        let (xm, _, _) = transport_along(metric, x_b, -w, w, h, fine)?;
        let zp = signed_boundary_distance(metric, xp)?;
        let zm = signed_boundary_distance(metric, xm)?;
        // z'' = -S along the geodesic in boundary-normal coordinates.
        let value = -(zp + zm) / (h * h);
        if (zp.abs() + zm.abs()) > 1e-12 || h > 0.1 {
            return Ok(SecondFundamentalForm {
                value,
                stencil: h,
                widened,
            });
        }
        // Displacements at machine noise: widen and record the order loss.
        h *= 4.0;
        widened = true;
    }
}

/// One scale of the travel-time regularity probe.
#[derive(Debug, Clone, Copy)]
pub struct TauProbeRow {
    pub h: f64,
    /// Max over probe stations of `|tau^2(z_h) - tau^2(z_0)| / d(z_h, z_0)`.
    pub ratio_max: f64,
    pub trapped: usize,
}

/// Probe whether `tau^2` behaves like a Lipschitz function near the
/// tangential boundary directions.
///
/// For each boundary station the tangential direction is pushed inward a
/// g-distance `h` along the normal geodesic (the direction parallel
/// transported), and the incremental ratio of `tau^2` against the state
/// distance is recorded. Bounded, stable ratios indicate strict convexity;
/// ratios growing as `h` shrinks witness the failure of the Lipschitz
/// property.
pub fn tau_squared_lipschitz_probe(
    metric: &MetricField,
    scales: &[f64],
    n_stations: usize,
) -> Result<Vec<TauProbeRow>> {
    let opts = IntegrationOptions::default();
    let mut rows = Vec::with_capacity(scales.len());
    for &h in scales {
        let mut ratio_max = 0.0f64;
        let mut trapped = 0usize;
        for station in 0..n_stations {
            let beta = std::f64::consts::TAU * station as f64 / n_stations as f64;
            let x_b = Vector2::new(beta.cos(), beta.sin());
            let nu = inward_normal(metric, x_b)?;
            for orientation in [1.0, -1.0] {
                // g-unit boundary tangent.
                let raw = Vector2::new(-beta.sin(), beta.cos()) * orientation;
                let mut w = raw / metric.norm_g(x_b, raw)?;
                let np = metric.inner(x_b, w, nu)?;
                w -= np * nu;
                w /= metric.norm_g(x_b, w)?;

                let (x_h, _, w_h) = transport_along(metric, x_b, nu, w, h, (h / 8.0).min(1e-3))?;
                let w_h = w_h / metric.norm_g(x_h, w_h)?;
                let fwd = super::trace(metric, x_h, w_h, &opts, |_| {})?;
                if fwd.status == TerminationStatus::StepLimit {
                    trapped += 1;
                    continue;
                }
                // tau(z_0) = 0 by the tangential convention.
                let d = ((x_h - x_b).norm_squared() + (w_h - w).norm_squared()).sqrt();
                if d > 0.0 {
                    ratio_max = ratio_max.max(fwd.tau * fwd.tau / d);
                }
            }
        }
        rows.push(TauProbeRow {
            h,
            ratio_max,
            trapped,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log2(ratio)` against the dyadic scale index;
/// `slope ~ 0` means bounded ratios, `slope ~ 1` means `1/h` growth.
pub fn probe_slope(rows: &[TauProbeRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.ratio_max > 0.0)
        .map(|r| ((1.0 / r.h).log2(), r.ratio_max.log2()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
