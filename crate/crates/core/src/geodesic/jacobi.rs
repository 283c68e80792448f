//! Scalar Jacobi fields and the index form along a traced geodesic.

use nalgebra::Vector2;

use super::{GeodesicPath, StepSample, TerminationStatus};
use crate::error::{Error, Result};
use crate::metric::MetricField;

/// A zero of the normal Jacobi field.
#[derive(Debug, Clone, Copy)]
pub struct JacobiZero {
    pub t: f64,
    /// False when `j'` nearly vanishes there too.
    pub simple: bool,
}

/// Normal Jacobi data along a geodesic: the scalar reduction `j'' + K j = 0`
/// with `j(0) = 0`, `j'(0) = 1`, its zeros, and an optional index-form
/// value for a supplied variation profile.
#[derive(Debug, Clone)]
pub struct JacobiData {
    pub times: Vec<f64>,
    pub j: Vec<f64>,
    pub j_prime: Vec<f64>,
    pub curvature: Vec<f64>,
    pub zeros: Vec<JacobiZero>,
    pub index_form: Option<f64>,
    /// Max absolute second-difference residual of `j'' + K j`.
    pub residual_max: f64,
}

/// Solve the Jacobi equation along `path` and evaluate the index form
/// `I(V) = integral(|V'|^2 - K |V|^2)` for the optional endpoint-vanishing
/// scalar profile `variation(t) -> (value, derivative)`.
pub fn jacobi_index(
    metric: &MetricField,
    path: &GeodesicPath,
    variation: Option<&dyn Fn(f64) -> (f64, f64)>,
) -> Result<JacobiData> {
    if path.status != TerminationStatus::Exited {
        return Err(Error::usage(
            "jacobi data requires a geodesic that exited the disk",
        ));
    }
    let n = path.times.len();
    if n < 3 {
        return Err(Error::usage("path too short for Jacobi integration"));
    }
    let curv: Vec<f64> = path
        .points
        .iter()
        .map(|&x| metric.gaussian_curvature(clamp_inside(x)))
        .collect::<Result<_>>()?;

    let mut j = vec![0.0; n];
    let mut jp = vec![0.0; n];
    jp[0] = 1.0;
    for i in 0..n - 1 {
        let sample = StepSample {
            t0: path.times[i],
            x0: path.points[i],
            v0: path.velocities[i],
            a0: path.accelerations[i],
            t1: path.times[i + 1],
            x1: path.points[i + 1],
            v1: path.velocities[i + 1],
            a1: path.accelerations[i + 1],
        };
        let h = sample.t1 - sample.t0;
        let (xm, _) = sample.midpoint();
        let km = metric.gaussian_curvature(clamp_inside(xm))?;
        let (k0, k1) = (curv[i], curv[i + 1]);
        // RK4 on (j, j') with K Hermite-sampled inside the interval.
        let f = |k: f64, state: (f64, f64)| (state.1, -k * state.0);
        let s0 = (j[i], jp[i]);
        let d1 = f(k0, s0);
        let d2 = f(km, (s0.0 + 0.5 * h * d1.0, s0.1 + 0.5 * h * d1.1));
        let d3 = f(km, (s0.0 + 0.5 * h * d2.0, s0.1 + 0.5 * h * d2.1));
        let d4 = f(k1, (s0.0 + h * d3.0, s0.1 + h * d3.1));
        j[i + 1] = s0.0 + (h / 6.0) * (d1.0 + 2.0 * d2.0 + 2.0 * d3.0 + d4.0);
        jp[i + 1] = s0.1 + (h / 6.0) * (d1.1 + 2.0 * d2.1 + 2.0 * d3.1 + d4.1);
    }

    // Zeros of j in (0, tau]: bracket on sign changes, refine with Hermite
    // cubic bisection.
    let mut zeros = Vec::new();
    for i in 1..n - 1 {
        if j[i] == 0.0 && path.times[i] > 0.0 {
            zeros.push(JacobiZero {
                t: path.times[i],
                simple: jp[i].abs() > 1e-8,
            });
        } else if j[i] * j[i + 1] < 0.0 {
            let h = path.times[i + 1] - path.times[i];
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let eval = |s: f64| hermite_1d(j[i], jp[i] * h, j[i + 1], jp[i + 1] * h, s);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if eval(lo) * eval(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let s = 0.5 * (lo + hi);
            let t = path.times[i] + s * h;
            let dj = (jp[i] * (1.0 - s) + jp[i + 1] * s).abs();
            zeros.push(JacobiZero {
                t,
                simple: dj > 1e-8,
            });
        }
    }
    // Endpoint zero (conjugate boundary points).
    let tau = *path.times.last().unwrap();
    if j[n - 1].abs() < 1e-6 && zeros.iter().all(|z| (z.t - tau).abs() > 1e-6) {
        zeros.push(JacobiZero {
            t: tau,
            simple: jp[n - 1].abs() > 1e-8,
        });
    }

    let mut residual_max = 0.0f64;
    for i in 1..n - 1 {
        let h0 = path.times[i] - path.times[i - 1];
        let h1 = path.times[i + 1] - path.times[i];
        if (h0 - h1).abs() > 1e-12 {
            continue;
        }
        let second = (j[i + 1] - 2.0 * j[i] + j[i - 1]) / (h0 * h0);
        residual_max = residual_max.max((second + curv[i] * j[i]).abs());
    }

    let index_form = variation.map(|profile| {
        let mut total = 0.0;
        for i in 0..n - 1 {
            let h = path.times[i + 1] - path.times[i];
            let quad = |t: f64, k: f64| {
                let (v, dv) = profile(t);
                dv * dv - k * v * v
            };
            let tm = 0.5 * (path.times[i] + path.times[i + 1]);
            let km = 0.5 * (curv[i] + curv[i + 1]);
            total += (h / 6.0)
                * (quad(path.times[i], curv[i])
                    + 4.0 * quad(tm, km)
                    + quad(path.times[i + 1], curv[i + 1]));
        }
        total
    });

    Ok(JacobiData {
        times: path.times.clone(),
        j,
        j_prime: jp,
        curvature: curv,
        zeros,
        index_form,
        residual_max,
    })
}

fn hermite_1d(p0: f64, m0: f64, p1: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + m0 * (s3 - 2.0 * s2 + s)
        + p1 * (-2.0 * s3 + 3.0 * s2)
        + m1 * (s3 - s2)
}

/// Pull a point that bisection left a hair outside back onto the disk so
/// curvature stencils stay in contract.
fn clamp_inside(x: Vector2<f64>) -> Vector2<f64> {
    let r = x.norm();
    if r > 1.0 {
        x / r
    } else {
        x
    }
}
