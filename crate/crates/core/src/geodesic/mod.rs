//! Unit-speed geodesic integration on the closed unit disk.
//!
//! The integrator is classical fixed-step RK4 on `(x', v') = (v, -Gamma(x)[v, v])`
//! with per-step renormalization of `|v|_g` (coefficients are only
//! Lipschitz, so higher-order adaptivity buys nothing guaranteed). Boundary
//! crossings are localized by bisection on `1 - |x|^2`.

mod boundary;
mod connect;
mod jacobi;
mod probe;

pub use boundary::{
    probe_slope, second_fundamental_form, tau_squared_lipschitz_probe, SecondFundamentalForm,
    TauProbeRow,
};
pub use connect::{connect_points, ConnectOutcome};
pub use jacobi::{jacobi_index, JacobiData};
pub use probe::{flow_lipschitz_probe, FlowLipschitzReport};

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::metric::MetricField;

/// Why a traced geodesic stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationStatus {
    /// Reached the boundary; the exit point is localized to the boundary
    /// tolerance.
    Exited,
    /// Path length exceeded the trapping threshold.
    StepLimit,
    /// Started tangentially on the boundary; by convention `tau = 0`.
    TangentialStart,
}

/// Options for the tracer.
#[derive(Debug, Clone, Copy)]
pub struct IntegrationOptions {
    /// Arclength step; `None` picks `min(1/256, grid spacing / 4)`.
    pub step: Option<f64>,
    /// Declare trapping at this path length.
    pub max_length: f64,
    /// Bisection tolerance on `1 - |x|^2` at the exit.
    pub boundary_tol: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            step: None,
            max_length: 20.0,
            boundary_tol: 1e-12,
        }
    }
}

impl IntegrationOptions {
    pub fn resolve_step(&self, metric: &MetricField) -> f64 {
        self.step.unwrap_or_else(|| {
            if metric.is_grid_backed() {
                (1.0f64 / 256.0).min(metric.fd_step_floor() / 4.0)
            } else {
                1.0 / 256.0
            }
        })
    }
}

/// One accepted integrator interval with endpoint states and accelerations.
#[derive(Debug, Clone, Copy)]
pub struct StepSample {
    pub t0: f64,
    pub x0: Vector2<f64>,
    pub v0: Vector2<f64>,
    pub a0: Vector2<f64>,
    pub t1: f64,
    pub x1: Vector2<f64>,
    pub v1: Vector2<f64>,
    pub a1: Vector2<f64>,
}

impl StepSample {
    /// Cubic Hermite midpoint state of the interval.
    pub fn midpoint(&self) -> (Vector2<f64>, Vector2<f64>) {
        let h = self.t1 - self.t0;
        let x = 0.5 * (self.x0 + self.x1) + (h / 8.0) * (self.v0 - self.v1);
        let v = 0.5 * (self.v0 + self.v1) + (h / 8.0) * (self.a0 - self.a1);
        (x, v)
    }
}

/// Result of a forward trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceOutcome {
    pub tau: f64,
    pub end_x: Vector2<f64>,
    pub end_v: Vector2<f64>,
    pub status: TerminationStatus,
    /// Largest `||v|_g - 1|` observed before renormalization.
    pub max_drift: f64,
    pub steps: usize,
}

/// A stored geodesic: time samples, states and accelerations, exit data.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub initial: (Vector2<f64>, Vector2<f64>),
    pub step: f64,
    pub times: Vec<f64>,
    pub points: Vec<Vector2<f64>>,
    pub velocities: Vec<Vector2<f64>>,
    pub accelerations: Vec<Vector2<f64>>,
    pub tau_plus: f64,
    pub tau_minus: Option<f64>,
    pub status: TerminationStatus,
    pub max_drift: f64,
}

impl GeodesicPath {
    pub fn length(&self) -> f64 {
        self.tau_plus
    }

    /// Hermite-interpolated state at time `t` (clamped to the sampled range).
    pub fn state_at(&self, t: f64) -> (Vector2<f64>, Vector2<f64>) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (self.points[0], self.velocities[0]);
        }
        if t >= self.times[n - 1] {
            return (self.points[n - 1], self.velocities[n - 1]);
        }
        let mut i = ((t / self.step) as usize).min(n - 2);
        while self.times[i + 1] < t {
            i += 1;
        }
        while self.times[i] > t {
            i -= 1;
        }
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let hermite = |p0: Vector2<f64>, m0: Vector2<f64>, p1: Vector2<f64>, m1: Vector2<f64>| {
            let s2 = s * s;
            let s3 = s2 * s;
            p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
                + m0 * ((s3 - 2.0 * s2 + s) * h)
                + p1 * (-2.0 * s3 + 3.0 * s2)
                + m1 * ((s3 - s2) * h)
        };
        let x = hermite(
            self.points[i],
            self.velocities[i],
            self.points[i + 1],
            self.velocities[i + 1],
        );
        let v = hermite(
            self.velocities[i],
            self.accelerations[i],
            self.velocities[i + 1],
            self.accelerations[i + 1],
        );
        (x, v)
    }

    /// Composite Simpson quadrature of `f(x, v)` along the path, with
    /// Hermite midpoints inside each interval.
    pub fn integrate_scalar(&self, mut f: impl FnMut(Vector2<f64>, Vector2<f64>) -> f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.times.len().saturating_sub(1) {
            let sample = StepSample {
                t0: self.times[i],
                x0: self.points[i],
                v0: self.velocities[i],
                a0: self.accelerations[i],
                t1: self.times[i + 1],
                x1: self.points[i + 1],
                v1: self.velocities[i + 1],
                a1: self.accelerations[i + 1],
            };
            let h = sample.t1 - sample.t0;
            let (xm, vm) = sample.midpoint();
            total +=
                (h / 6.0) * (f(sample.x0, sample.v0) + 4.0 * f(xm, vm) + f(sample.x1, sample.v1));
        }
        total
    }
}

fn acceleration(metric: &MetricField, x: Vector2<f64>, v: Vector2<f64>) -> Result<Vector2<f64>> {
    let geo = metric.eval_geometry_extended(x)?;
    Ok(-geo.gamma_bilinear(v, v))
}

fn rk4_step(
    metric: &MetricField,
    x: Vector2<f64>,
    v: Vector2<f64>,
    h: f64,
) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let a1 = acceleration(metric, x, v)?;
    let (k1x, k1v) = (v, a1);
    let a2 = acceleration(metric, x + 0.5 * h * k1x, v + 0.5 * h * k1v)?;
    let (k2x, k2v) = (v + 0.5 * h * k1v, a2);
    let a3 = acceleration(metric, x + 0.5 * h * k2x, v + 0.5 * h * k2v)?;
    let (k3x, k3v) = (v + 0.5 * h * k2v, a3);
    let a4 = acceleration(metric, x + h * k3x, v + h * k3v)?;
    let (k4x, k4v) = (v + h * k3v, a4);
    Ok((
        x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    ))
}

/// Classify a boundary state: positive for inward, negative for outward,
/// zero (within 1e-10) for tangential. `None` for interior points.
pub fn boundary_inner_product(
    metric: &MetricField,
    x: Vector2<f64>,
    v: Vector2<f64>,
) -> Result<Option<f64>> {
    if x.norm_squared() < 1.0 - 1e-9 {
        return Ok(None);
    }
    Ok(Some(inward_normal_inner(metric, x, v)?))
}

/// Parts of the bundle boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    Interior,
    Inward,
    Outward,
    Tangential,
}

/// Decompose a state against the boundary by the sign of `<v, nu>_g`;
/// `|<v, nu>_g| < 1e-10` classifies as tangential.
pub fn classify_boundary(
    metric: &MetricField,
    x: Vector2<f64>,
    v: Vector2<f64>,
) -> Result<BoundaryClass> {
    match boundary_inner_product(metric, x, v)? {
        None => Ok(BoundaryClass::Interior),
        Some(ip) if ip.abs() < 1e-10 => Ok(BoundaryClass::Tangential),
        Some(ip) if ip > 0.0 => Ok(BoundaryClass::Inward),
        Some(_) => Ok(BoundaryClass::Outward),
    }
}

/// `<v, nu>_g` where `nu` is the g-unit inward normal at the boundary point
/// nearest to `x`.
pub fn inward_normal_inner(metric: &MetricField, x: Vector2<f64>, v: Vector2<f64>) -> Result<f64> {
    let nu = inward_normal(metric, x)?;
    metric.inner(x / x.norm().max(1e-300), v, nu)
}

/// g-unit inward normal: the g-normalized gradient of `1 - |x|^2`.
pub fn inward_normal(metric: &MetricField, x: Vector2<f64>) -> Result<Vector2<f64>> {
    let xb = x / x.norm().max(1e-300);
    let geo = metric.eval_geometry_extended(xb)?;
    let grad = geo.g_inv * (-2.0 * xb);
    let len = (geo.g * grad).dot(&grad).sqrt();
    Ok(grad / len)
}

/// Trace forward from `(x, v)` until exit, trapping or error, invoking the
/// visitor on every accepted interval (including the bisected last one).
pub fn trace(
    metric: &MetricField,
    x0: Vector2<f64>,
    v0: Vector2<f64>,
    opts: &IntegrationOptions,
    mut visitor: impl FnMut(&StepSample),
) -> Result<TraceOutcome> {
    let mut x = x0;
    let r0 = x.norm();
    if r0 > 1.0 + 1e-9 {
        return Err(Error::OutsideDomain(x0));
    }
    if r0 > 1.0 {
        x /= r0;
    }
    let vn = metric.norm_g(x, v0)?;
    if (vn - 1.0).abs() > 1e-10 {
        return Err(Error::usage(format!(
            "initial velocity is not g-unit: |v|_g = {vn:.12}"
        )));
    }
    let mut v = v0;

    // Boundary starts: tangential and outward directions exit immediately.
    if x.norm_squared() >= 1.0 - 1e-12 {
        let ip = inward_normal_inner(metric, x, v)?;
        if ip.abs() < 1e-10 {
            return Ok(TraceOutcome {
                tau: 0.0,
                end_x: x,
                end_v: v,
                status: TerminationStatus::TangentialStart,
                max_drift: 0.0,
                steps: 0,
            });
        }
        if ip < 0.0 {
            return Ok(TraceOutcome {
                tau: 0.0,
                end_x: x,
                end_v: v,
                status: TerminationStatus::Exited,
                max_drift: 0.0,
                steps: 0,
            });
        }
    }

    let h = opts.resolve_step(metric);
    let mut t = 0.0;
    let mut max_drift = 0.0f64;
    let mut steps = 0usize;
    let mut a = acceleration(metric, x, v)?;

    loop {
        if t >= opts.max_length {
            return Ok(TraceOutcome {
                tau: t,
                end_x: x,
                end_v: v,
                status: TerminationStatus::StepLimit,
                max_drift,
                steps,
            });
        }
        let (x_new, v_new) = rk4_step(metric, x, v, h)?;
        let crossed_end = x_new.norm_squared() > 1.0;
        // A grazing step can leave and re-enter; check the half point too.
        let crossed_mid = if crossed_end {
            false
        } else {
            let (xm, _) = rk4_step(metric, x, v, 0.5 * h)?;
            xm.norm_squared() > 1.0
        };
        if crossed_end || crossed_mid {
            // Bisection on the partial step length.
            let mut lo = 0.0f64;
            let mut hi = if crossed_mid { 0.5 * h } else { h };
            let mut eta = hi;
            let mut x_exit = if crossed_mid {
                rk4_step(metric, x, v, 0.5 * h)?.0
            } else {
                x_new
            };
            let mut v_exit = v_new;
            for _ in 0..100 {
                let defect = 1.0 - x_exit.norm_squared();
                if defect.abs() <= opts.boundary_tol || (hi - lo) < 1e-16 {
                    break;
                }
                if defect > 0.0 {
                    lo = eta;
                } else {
                    hi = eta;
                }
                eta = 0.5 * (lo + hi);
                let s = rk4_step(metric, x, v, eta)?;
                x_exit = s.0;
                v_exit = s.1;
            }
            let drift = (metric.norm_g(x_exit, v_exit)? - 1.0).abs();
            max_drift = max_drift.max(drift);
            let a_exit = acceleration(metric, x_exit, v_exit)?;
            visitor(&StepSample {
                t0: t,
                x0: x,
                v0: v,
                a0: a,
                t1: t + eta,
                x1: x_exit,
                v1: v_exit,
                a1: a_exit,
            });
            return Ok(TraceOutcome {
                tau: t + eta,
                end_x: x_exit,
                end_v: v_exit,
                status: TerminationStatus::Exited,
                max_drift,
                steps: steps + 1,
            });
        }

        let drift = (metric.norm_g(x_new, v_new)? - 1.0).abs();
        max_drift = max_drift.max(drift);
        let v_renorm = v_new / metric.norm_g(x_new, v_new)?;
        let a_new = acceleration(metric, x_new, v_renorm)?;
        visitor(&StepSample {
            t0: t,
            x0: x,
            v0: v,
            a0: a,
            t1: t + h,
            x1: x_new,
            v1: v_renorm,
            a1: a_new,
        });
        x = x_new;
        v = v_renorm;
        a = a_new;
        t += h;
        steps += 1;
    }
}

/// Integrate the forward geodesic from `(x, v)` and store the samples.
pub fn integrate_geodesic(
    metric: &MetricField,
    x: Vector2<f64>,
    v: Vector2<f64>,
    opts: &IntegrationOptions,
) -> Result<GeodesicPath> {
    let mut times = vec![0.0];
    let mut points = vec![x];
    let mut velocities = vec![v];
    let mut accelerations = vec![Vector2::zeros()];
    let mut first = true;
    let outcome = trace(metric, x, v, opts, |s| {
        if first {
            points[0] = s.x0;
            velocities[0] = s.v0;
            accelerations[0] = s.a0;
            first = false;
        }
        times.push(s.t1);
        points.push(s.x1);
        velocities.push(s.v1);
        accelerations.push(s.a1);
    })?;
    if first {
        // No steps taken (tangential or outward start).
        accelerations[0] = acceleration(metric, points[0], velocities[0])?;
    }
    Ok(GeodesicPath {
        initial: (x, v),
        step: opts.resolve_step(metric),
        times,
        points,
        velocities,
        accelerations,
        tau_plus: outcome.tau,
        tau_minus: None,
        status: outcome.status,
        max_drift: outcome.max_drift,
    })
}

/// Forward and backward exit times of `(x, v)`.
///
/// `tau_plus = 0` exactly when the state points outward or tangentially at
/// the boundary.
pub fn exit_time(
    metric: &MetricField,
    x: Vector2<f64>,
    v: Vector2<f64>,
    opts: &IntegrationOptions,
) -> Result<(f64, f64)> {
    let fwd = trace(metric, x, v, opts, |_| {})?;
    let bwd = trace(metric, x, -v, opts, |_| {})?;
    Ok((fwd.tau, -bwd.tau))
}

/// Flow the state for time `t` (clamped at the exit); returns the new state
/// and whether the requested time was reached inside `M`.
pub fn flow(
    metric: &MetricField,
    x0: Vector2<f64>,
    v0: Vector2<f64>,
    t: f64,
    opts: &IntegrationOptions,
) -> Result<(Vector2<f64>, Vector2<f64>, bool)> {
    let sign = if t >= 0.0 { 1.0 } else { -1.0 };
    let span = t.abs();
    if span == 0.0 {
        return Ok((x0, v0, true));
    }
    let base = opts.resolve_step(metric);
    let n = (span / base).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut x = x0;
    let mut v = sign * v0;
    for _ in 0..n {
        let (x_new, v_new) = rk4_step(metric, x, v, h)?;
        if x_new.norm_squared() > 1.0 {
            // Exited before the requested time; localize the crossing.
            let mut lo = 0.0f64;
            let mut hi = h;
            let mut eta = h;
            let mut xe = x_new;
            let mut ve = v_new;
            for _ in 0..100 {
                let defect = 1.0 - xe.norm_squared();
                if defect.abs() <= opts.boundary_tol || (hi - lo) < 1e-16 {
                    break;
                }
                if defect > 0.0 {
                    lo = eta;
                } else {
                    hi = eta;
                }
                eta = 0.5 * (lo + hi);
                let s = rk4_step(metric, x, v, eta)?;
                xe = s.0;
                ve = s.1;
            }
            return Ok((xe, sign * ve, false));
        }
        let vn = metric.norm_g(x_new, v_new)?;
        x = x_new;
        v = v_new / vn;
    }
    Ok((x, sign * v, true))
}

/// Integrate the geodesic and parallel-transport `w` along it; returns
/// `(x(t), v(t), w(t))` after arclength `length` (no boundary clamping, so
/// probes anchored on the rim may leave the disk by a hair).
pub fn transport_along(
    metric: &MetricField,
    x0: Vector2<f64>,
    v0: Vector2<f64>,
    w0: Vector2<f64>,
    length: f64,
    step: f64,
) -> Result<(Vector2<f64>, Vector2<f64>, Vector2<f64>)> {
    let n = (length / step).ceil().max(1.0) as usize;
    let h = length / n as f64;
    let mut x = x0;
    let mut v = v0;
    let mut w = w0;
    for _ in 0..n {
        // RK4 on the combined system (x, v, w).
        let f = |x: Vector2<f64>,
                 v: Vector2<f64>,
                 w: Vector2<f64>|
         -> Result<(Vector2<f64>, Vector2<f64>, Vector2<f64>)> {
            let geo = metric.eval_geometry_extended(x)?;
            Ok((v, -geo.gamma_bilinear(v, v), -geo.gamma_bilinear(v, w)))
        };
        let (k1x, k1v, k1w) = f(x, v, w)?;
        let (k2x, k2v, k2w) = f(x + 0.5 * h * k1x, v + 0.5 * h * k1v, w + 0.5 * h * k1w)?;
        let (k3x, k3v, k3w) = f(x + 0.5 * h * k2x, v + 0.5 * h * k2v, w + 0.5 * h * k2w)?;
        let (k4x, k4v, k4w) = f(x + h * k3x, v + h * k3v, w + h * k3w)?;
        x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        let vn = metric.norm_g(x, v)?;
        v /= vn;
    }
    Ok((x, v, w))
}

/// Closed-form Euclidean exit time: the positive root of the chord
/// quadratic, `tau = -<x, v> + sqrt(1 - |x|^2 + <x, v>^2)`.
pub fn euclidean_exit_time(x: Vector2<f64>, v: Vector2<f64>) -> f64 {
    let xv = x.dot(&v);
    -xv + (1.0 - x.norm_squared() + xv * xv).max(0.0).sqrt()
}
