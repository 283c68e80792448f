//! Coercivity of the quadratic form `Q` over boundary-vanishing sections.
//!
//! The invariant boundary measure disintegrates bundle integrals into
//! integrals over inflow rays, and `Q` disintegrates with it: on each ray
//! the form is the one-dimensional Dirichlet energy
//! `integral(a'^2 - K(t) a^2)`. The infimum of the Rayleigh quotient over
//! sections vanishing on the boundary is therefore the smallest Dirichlet
//! eigenvalue of `-a'' - K a` over the rays, approached by concentration
//! on the worst ray family.
//!
//! (The grid-stencil quadratic form is not used for the minimization: a
//! centered stencil annihilates the mesh-frequency sawtooth, so its
//! discrete infimum collapses to zero spuriously.)

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{self, IntegrationOptions, TerminationStatus};
use crate::metric::MetricField;
use crate::transform::inflow_samples;

/// Coercivity estimate for condition "Q is bounded below on sections".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct B1Estimate {
    /// Smallest per-ray Rayleigh quotient found.
    pub epsilon: f64,
    /// Ray index attaining it.
    pub worst_ray: usize,
    /// Length of the worst ray.
    pub worst_tau: f64,
    /// Eigenfunction samples `(t, a(t))` of the minimizing profile.
    pub minimizing_profile: Vec<(f64, f64)>,
    /// All random-restart refinements agreed with the bisection value.
    pub restarts_agree: bool,
    /// Rays skipped because they failed to exit.
    pub trapped_rays: usize,
}

/// Count of eigenvalues of the tridiagonal `(-D2 - K)` below `lambda`,
/// by the Sturm sequence of `T - lambda I`.
fn sturm_count(diag: &[f64], off: f64, lambda: f64) -> usize {
    let mut count = 0;
    let mut d = f64::INFINITY;
    for &t in diag {
        let coupling = if d == 0.0 {
            off * off / 1e-300
        } else {
            off * off / d
        };
        d = (t - lambda) - coupling;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of the Dirichlet operator `-a'' - K(t) a` on the
/// interior nodes of a uniform grid with spacing `h`.
fn smallest_eigenvalue(curv: &[f64], h: f64) -> f64 {
    let diag: Vec<f64> = curv.iter().map(|k| 2.0 / (h * h) - k).collect();
    let off = -1.0 / (h * h);
    let kmax = curv.iter().cloned().fold(0.0f64, f64::max);
    let mut lo = -kmax - 1.0;
    let mut hi = 4.0 / (h * h);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(&diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverse-power iteration on the shifted tridiagonal, from a seeded
/// random start; returns the Rayleigh quotient and the eigenvector.
fn inverse_iteration(diag: &[f64], off: f64, shift: f64, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
    let n = diag.len();
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nx = norm(&x);
    x.iter_mut().for_each(|a| *a /= nx);
    let mut rayleigh = shift;
    for _ in 0..24 {
        // Thomas solve of (T - shift I) y = x.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let b0 = diag[0] - shift;
        c[0] = off / b0;
        d[0] = x[0] / b0;
        for i in 1..n {
            let m = (diag[i] - shift) - off * c[i - 1];
            c[i] = off / m;
            d[i] = (x[i] - off * d[i - 1]) / m;
        }
        let mut y = vec![0.0; n];
        y[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            y[i] = d[i] - c[i] * y[i + 1];
        }
        let ny = norm(&y);
        if !ny.is_finite() || ny == 0.0 {
            break;
        }
        y.iter_mut().for_each(|a| *a /= ny);
        // Rayleigh quotient of y.
        let mut ty = vec![0.0; n];
        for i in 0..n {
            ty[i] = diag[i] * y[i]
                + if i > 0 { off * y[i - 1] } else { 0.0 }
                + if i + 1 < n { off * y[i + 1] } else { 0.0 };
        }
        rayleigh = y.iter().zip(&ty).map(|(a, b)| a * b).sum();
        x = y;
    }
    (rayleigh, x)
}

/// Estimate the coercivity constant of `Q` over boundary-vanishing
/// sections by minimizing the per-ray Rayleigh quotient over an inflow ray
/// sample, refining the worst ray with random-restart inverse iteration.
pub fn b1_estimate(
    metric: &MetricField,
    n_boundary: usize,
    n_angles: usize,
    seed: u64,
) -> Result<B1Estimate> {
    let rays = inflow_samples(metric, n_boundary, n_angles)?;
    let opts = IntegrationOptions::default();

    struct RayEig {
        lambda: f64,
        tau: f64,
        curv: Vec<f64>,
        h: f64,
        times: Vec<f64>,
    }

    let per_ray: Vec<Result<Option<RayEig>>> = rays
        .par_iter()
        .map(|ray| {
            let path = geodesic::integrate_geodesic(metric, ray.x, ray.v, &opts)?;
            if path.status == TerminationStatus::StepLimit {
                return Ok(None);
            }
            if path.times.len() < 6 {
                return Ok(None);
            }
            // Curvature at the uniform interior nodes (drop the bisected
            // tail so the spacing stays constant).
            let n = path.times.len() - 2;
            let h = path.step;
            let mut curv = Vec::with_capacity(n);
            let mut times = Vec::with_capacity(n);
            for i in 1..=n {
                let x = path.points[i];
                let x = if x.norm() > 1.0 { x / x.norm() } else { x };
                curv.push(metric.gaussian_curvature(x)?);
                times.push(path.times[i]);
            }
            let lambda = smallest_eigenvalue(&curv, h);
            Ok(Some(RayEig {
                lambda,
                tau: path.tau_plus,
                curv,
                h,
                times,
            }))
        })
        .collect();

    let mut best: Option<(usize, RayEig)> = None;
    let mut trapped = 0usize;
    for (i, item) in per_ray.into_iter().enumerate() {
        match item? {
            None => trapped += 1,
            Some(eig) => {
                if best.as_ref().is_none_or(|(_, b)| eig.lambda < b.lambda) {
                    best = Some((i, eig));
                }
            }
        }
    }
    let (worst_ray, eig) = best.ok_or_else(|| {
        Error::numeric("no inflow ray produced a usable eigenvalue (all trapped?)")
    })?;

    // Random-restart refinement of the worst ray's eigenpair.
    let diag: Vec<f64> = eig.curv.iter().map(|k| 2.0 / (eig.h * eig.h) - k).collect();
    let off = -1.0 / (eig.h * eig.h);
    let shift = eig.lambda - 1e-6 * (1.0 + eig.lambda.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut restarts_agree = true;
    let mut profile = vec![0.0; diag.len()];
    for _ in 0..8 {
        let (rayleigh, vec) = inverse_iteration(&diag, off, shift, &mut rng);
        if (rayleigh - eig.lambda).abs() > 1e-4 * (1.0 + eig.lambda.abs()) {
            restarts_agree = false;
        }
        profile = vec;
    }
    // Sign convention for the reported profile.
    if profile.iter().sum::<f64>() < 0.0 {
        profile.iter_mut().for_each(|a| *a = -*a);
    }

    Ok(B1Estimate {
        epsilon: eig.lambda,
        worst_ray,
        worst_tau: eig.tau,
        minimizing_profile: eig.times.iter().cloned().zip(profile).collect(),
        restarts_agree,
        trapped_rays: trapped,
    })
}
