//! The geodesic X-ray transform of scalars and 1-forms.
//!
//! Rays are parametrized from the inflow boundary with the invariant
//! Santalo weight `<nu, v>_g` times the boundary measure, so sums over
//! rays of flow integrals reproduce bundle integrals.

mod basis;
mod matrix;

pub use basis::{PixelBasis, SplineOneFormBasis};
pub use matrix::{
    assemble_forward, nullspace_analysis, reconstruct, ForwardBasis, NullspaceReport,
    TransformKind, TransformMatrix,
};

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::bundle::{BundleGrid, QualityMask, ScalarField, QUALITY_FULL};
use crate::error::{Error, Result};
use crate::geodesic::{self, IntegrationOptions, StepSample, TerminationStatus};
use crate::metric::MetricField;

/// Mask code for bundle nodes whose forward ray failed to exit.
pub const QUALITY_TRAPPED: u8 = 5;

/// One inflow boundary state with its Santalo quadrature weight.
#[derive(Debug, Clone, Copy)]
pub struct InflowSample {
    pub ray_id: usize,
    /// Boundary parameter (Euclidean angle of the base point).
    pub boundary_angle: f64,
    /// Inward angle from the g-normal, in `(-pi/2, pi/2)`.
    pub inward_angle: f64,
    pub x: Vector2<f64>,
    /// Inward g-unit direction.
    pub v: Vector2<f64>,
    /// `cos(theta) |sigma'(beta)|_g dbeta dtheta`.
    pub weight: f64,
}

/// Integrands transported along rays.
pub enum Target<'a> {
    Scalar(&'a (dyn Fn(Vector2<f64>) -> f64 + Sync)),
    OneForm(&'a (dyn Fn(Vector2<f64>) -> (f64, f64) + Sync)),
}

impl Target<'_> {
    #[inline]
    fn eval(&self, x: Vector2<f64>, v: Vector2<f64>) -> f64 {
        match self {
            Target::Scalar(f) => f(x),
            Target::OneForm(h) => {
                let (h1, h2) = h(x);
                h1 * v.x + h2 * v.y
            }
        }
    }
}

/// Product sampling of the inflow boundary: `n_boundary` base points times
/// `n_angles` inward directions, with Santalo weights.
pub fn inflow_samples(
    metric: &MetricField,
    n_boundary: usize,
    n_angles: usize,
) -> Result<Vec<InflowSample>> {
    if n_boundary < 4 || n_angles < 4 {
        return Err(Error::usage("inflow sampling needs at least 4x4 rays"));
    }
    let dbeta = std::f64::consts::TAU / n_boundary as f64;
    let dtheta = std::f64::consts::PI / n_angles as f64;
    let mut out = Vec::with_capacity(n_boundary * n_angles);
    for b in 0..n_boundary {
        let beta = b as f64 * dbeta;
        let x = Vector2::new(beta.cos(), beta.sin());
        let nu = geodesic::inward_normal(metric, x)?;
        let sigma_prime = Vector2::new(-beta.sin(), beta.cos());
        let boundary_speed = metric.norm_g(x, sigma_prime)?;
        // g-unit boundary tangent.
        let mut tangent = sigma_prime / boundary_speed;
        let np = metric.inner(x, tangent, nu)?;
        tangent -= np * nu;
        tangent /= metric.norm_g(x, tangent)?;
        for a in 0..n_angles {
            let theta = -std::f64::consts::FRAC_PI_2 + (a as f64 + 0.5) * dtheta;
            let v = theta.cos() * nu + theta.sin() * tangent;
            out.push(InflowSample {
                ray_id: b * n_angles + a,
                boundary_angle: beta,
                inward_angle: theta,
                x,
                v,
                weight: theta.cos() * boundary_speed * dbeta * dtheta,
            });
        }
    }
    Ok(out)
}

/// Per-ray result of the transform.
#[derive(Debug, Clone, Copy)]
pub struct RayIntegral {
    pub ray_id: usize,
    pub value: f64,
    pub exited: bool,
    pub tau: f64,
}

/// Composite Simpson quadrature of the target along one traced ray.
fn integrate_ray(
    metric: &MetricField,
    x: Vector2<f64>,
    v: Vector2<f64>,
    target: &Target<'_>,
    opts: &IntegrationOptions,
) -> Result<(f64, TerminationStatus, f64)> {
    let mut acc = 0.0;
    let outcome = geodesic::trace(metric, x, v, opts, |s: &StepSample| {
        let h = s.t1 - s.t0;
        let (xm, vm) = s.midpoint();
        acc += (h / 6.0)
            * (target.eval(s.x0, s.v0) + 4.0 * target.eval(xm, vm) + target.eval(s.x1, s.v1));
    })?;
    Ok((acc, outcome.status, outcome.tau))
}

/// X-ray transform of a scalar function or 1-form over a set of rays.
///
/// Rays that fail to exit are reported with `exited = false` and value 0;
/// callers decide whether to drop them.
pub fn xray(
    metric: &MetricField,
    target: &Target<'_>,
    rays: &[InflowSample],
) -> Result<Vec<RayIntegral>> {
    let opts = IntegrationOptions::default();
    rays.par_iter()
        .map(|ray| {
            let (value, status, tau) = integrate_ray(metric, ray.x, ray.v, target, &opts)?;
            Ok(RayIntegral {
                ray_id: ray.ray_id,
                value: if status == TerminationStatus::StepLimit {
                    0.0
                } else {
                    value
                },
                exited: status != TerminationStatus::StepLimit,
                tau,
            })
        })
        .collect()
}

/// The integral function `u(z) = integral of the target along the forward
/// ray from z` sampled on a bundle grid.
///
/// Nodes whose ray fails to exit are masked with [`QUALITY_TRAPPED`].
pub fn integral_function(
    metric: &MetricField,
    grid: &BundleGrid,
    target: &Target<'_>,
) -> Result<(ScalarField, QualityMask)> {
    let opts = IntegrationOptions::default();
    let results: Vec<Result<(f64, u8)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let x = grid.position(idx);
            let v = grid.direction(idx);
            let (value, status, _) = integrate_ray(metric, x, v, target, &opts)?;
            if status == TerminationStatus::StepLimit {
                Ok((0.0, QUALITY_TRAPPED))
            } else {
                Ok((value, QUALITY_FULL))
            }
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut codes = Vec::with_capacity(grid.len());
    for r in results {
        let (v, c) = r?;
        values.push(v);
        codes.push(c);
    }
    let mut field = ScalarField::zeros(grid);
    field.values = values;
    field.vanishes_on_boundary = true;
    Ok((field, QualityMask { codes }))
}

/// Empirical Lipschitz constant of a bundle field over random node pairs.
pub fn field_lipschitz_probe(
    grid: &BundleGrid,
    field: &ScalarField,
    n_pairs: usize,
    seed: u64,
) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    let mut worst = 0.0f64;
    for _ in 0..n_pairs {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let (xa, va) = (grid.position(a), grid.direction(a));
        let (xb, vb) = (grid.position(b), grid.direction(b));
        let d = ((xa - xb).norm_squared() + (va - vb).norm_squared()).sqrt();
        if d < 1e-9 {
            continue;
        }
        worst = worst.max((field.values[a] - field.values[b]).abs() / d);
    }
    worst
}

/// Closed-form chord integral of `f(x) = 1 - |x|^2` along the Euclidean
/// ray entering at `x` with direction `v` (used as a test oracle).
pub fn euclidean_parabola_chord_integral(x: Vector2<f64>, v: Vector2<f64>) -> f64 {
    // Along x(t) = x + t v: 1 - |x + t v|^2 integrated from 0 to tau.
    let tau = geodesic::euclidean_exit_time(x, v);
    let a = 1.0 - x.norm_squared();
    let b = x.dot(&v);
    a * tau - b * tau * tau - tau * tau * tau / 3.0
}

/// `(x, v)` from a boundary angle and inward angle on the Euclidean disk.
pub fn euclidean_inflow_state(beta: f64, theta: f64) -> (Vector2<f64>, Vector2<f64>) {
    let x = Vector2::new(beta.cos(), beta.sin());
    let nu = -x;
    let tangent = Vector2::new(-beta.sin(), beta.cos());
    (x, theta.cos() * nu + theta.sin() * tangent)
}
