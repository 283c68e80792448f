//! Smoothing of metric components by convolution with a compactly
//! supported kernel.

use nalgebra::{Matrix2, Vector2};

use super::{min_eigenvalue, Backing, MetricField};
use crate::error::{Error, Result};

/// Kernel profiles for the smoothing convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelProfile {
    /// `exp(-1 / (1 - |y|^2))` on the unit ball, normalized to unit mass.
    StandardBump,
}

/// How component values are produced outside the closed disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionRule {
    /// First-order radial reflection across `|x| = 1`, clamped at 1.25.
    ReflectClamp,
    /// Use the backing formula as-is beyond the disk (analytic families
    /// only).
    Native,
}

/// Parameters of the smoothing convolution at scale `1/alpha`.
#[derive(Debug, Clone, Copy)]
pub struct MollifierSpec {
    /// Inverse length scale; the kernel support has radius `1/alpha`.
    pub alpha: u32,
    pub kernel: KernelProfile,
    pub extension: ExtensionRule,
}

impl MollifierSpec {
    pub fn new(alpha: u32) -> Self {
        MollifierSpec {
            alpha,
            kernel: KernelProfile::StandardBump,
            extension: ExtensionRule::ReflectClamp,
        }
    }
}

/// Quadrature nodes of the scaled kernel. Weights sum to exactly one, so
/// constants pass through the convolution unchanged.
#[derive(Debug, Clone)]
pub(crate) struct MollifiedBacking {
    base: MetricField,
    offsets: Vec<(Vector2<f64>, f64)>,
    extension: ExtensionRule,
}

const KERNEL_RADIAL_NODES: usize = 12;
const KERNEL_ANGULAR_NODES: usize = 24;

impl MollifiedBacking {
    fn base_extended(&self, x: Vector2<f64>) -> Matrix2<f64> {
        match self.extension {
            ExtensionRule::ReflectClamp => self.base.extended_components(x),
            ExtensionRule::Native => self.base.raw_components(x),
        }
    }

    fn base_extended_d(&self, x: Vector2<f64>) -> [Matrix2<f64>; 2] {
        match self.extension {
            ExtensionRule::ReflectClamp => self.base.extended_derivatives(x),
            ExtensionRule::Native => self.base.raw_derivatives(x),
        }
    }

    pub fn components(&self, x: Vector2<f64>) -> Matrix2<f64> {
        let mut acc = Matrix2::zeros();
        for (y, w) in &self.offsets {
            acc += self.base_extended(x - y) * *w;
        }
        acc
    }

    pub fn derivatives(&self, x: Vector2<f64>) -> [Matrix2<f64>; 2] {
        let mut acc = [Matrix2::zeros(), Matrix2::zeros()];
        for (y, w) in &self.offsets {
            let d = self.base_extended_d(x - y);
            acc[0] += d[0] * *w;
            acc[1] += d[1] * *w;
        }
        acc
    }
}

fn kernel_value(kernel: KernelProfile, s: f64) -> f64 {
    match kernel {
        KernelProfile::StandardBump => {
            if s >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - s * s)).exp()
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub(crate) fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    // Newton iteration on Legendre polynomials over [-1, 1], then affine
    // map to [0, 1].
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (mut p0, mut p1) = (1.0f64, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, t);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        out.push((0.5 * (t + 1.0), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

impl MetricField {
    /// Convolve the components with the kernel at scale `1/alpha` and
    /// return the smoothed metric.
    ///
    /// Fails with [`Error::AlphaTooSmall`] if the result loses positive
    /// definiteness on the disk.
    pub fn mollify(&self, spec: &MollifierSpec) -> Result<MetricField> {
        if spec.alpha < 1 {
            return Err(Error::usage("mollification scale alpha must be >= 1"));
        }
        let rho = 1.0 / spec.alpha as f64;
        let mut offsets = Vec::with_capacity(KERNEL_RADIAL_NODES * KERNEL_ANGULAR_NODES);
        let mut total = 0.0;
        for (s, ws) in gauss_legendre_unit(KERNEL_RADIAL_NODES) {
            let phi = kernel_value(spec.kernel, s);
            for a in 0..KERNEL_ANGULAR_NODES {
                let theta = std::f64::consts::TAU * (a as f64 + 0.5) / KERNEL_ANGULAR_NODES as f64;
                let y = Vector2::new(rho * s * theta.cos(), rho * s * theta.sin());
                let w = ws * s * phi;
                offsets.push((y, w));
                total += w;
            }
        }
        for (_, w) in offsets.iter_mut() {
            *w /= total;
        }
        let backing = MollifiedBacking {
            base: self.clone(),
            offsets,
            extension: spec.extension,
        };

        // Positive definiteness is an open condition: verify it survived.
        let mut min_eig = f64::INFINITY;
        for ir in 0..12 {
            let r = (ir as f64 + 0.5) / 12.0;
            for ia in 0..24 {
                let ang = ia as f64 * std::f64::consts::TAU / 24.0;
                let x = Vector2::new(r * ang.cos(), r * ang.sin());
                min_eig = min_eig.min(min_eigenvalue(&backing.components(x)));
            }
        }
        if min_eig <= 0.0 {
            return Err(Error::AlphaTooSmall {
                alpha: spec.alpha,
                min_eigenvalue: min_eig,
            });
        }
        let id = format!("{}_moll{}", self.id(), spec.alpha);
        Ok(MetricField::from_backing(Backing::Mollified(backing), id))
    }
}
