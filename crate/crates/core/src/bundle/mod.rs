//! Discretization of the unit sphere bundle `SM` and the first-order
//! operator calculus on it.
//!
//! Spatial nodes live on a mapped polar layout (radii excluding the
//! center, uniform angles); each node carries a g-orthonormal frame
//! `{e1, e2}` built by Gram-Schmidt on the coordinate fields, and fiber
//! directions are `v(x, psi) = cos(psi) e1 + sin(psi) e2`, exactly g-unit.
//! The fiber parameter `psi` is a g-arclength coordinate on each fiber, so
//! the fiber volume form is just `d psi` and quadrature weights realize
//! `dSigma_g = dS_x ^ dV_g` as `r dr dphi sqrt(det g) dpsi`.
//!
//! Sections of the normal bundle `N` are stored by their single
//! coefficient on `v_perp` (the +90 degree frame rotation of `v`), which
//! makes g-orthogonality to `v` exact at the representation level.

mod interp;
mod norms;
mod ops;
mod transfer;

pub use norms::{FieldNorm, Quantity};
pub use ops::DerivativeMethod;
pub use transfer::{radial_transfer_jacobian, transfer_scalar, transfer_section};

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::{orthonormal_frame, MetricField, PointGeometry};

/// Everything precomputed at one spatial node.
#[derive(Debug, Clone)]
pub(crate) struct SpatialNode {
    pub x: Vector2<f64>,
    pub g: Matrix2<f64>,
    pub sqrt_det: f64,
    pub christoffel: [[[f64; 2]; 2]; 2],
    pub e1: Vector2<f64>,
    pub e2: Vector2<f64>,
    /// Frame contractions of the metric derivative:
    /// `dg_e11[j] = (d_j g)(e1, e1)` and so on.
    pub dg_e11: [f64; 2],
    pub dg_e12: [f64; 2],
    pub dg_e22: [f64; 2],
    /// `d_j log sqrt(det g) = Gamma^i_{ij}`.
    pub dlog_sqrt: Vector2<f64>,
    /// Gaussian curvature.
    pub gauss: f64,
}

/// Discretized unit sphere bundle over the disk.
#[derive(Clone)]
pub struct BundleGrid {
    metric: MetricField,
    pub n_r: usize,
    pub n_phi: usize,
    pub n_psi: usize,
    pub dr: f64,
    pub dphi: f64,
    pub dpsi: f64,
    pub(crate) nodes: Arc<Vec<SpatialNode>>,
    /// Spatial quadrature weight `r dr dphi sqrt(det g)` per spatial node.
    pub(crate) w_spatial: Arc<Vec<f64>>,
    pub(crate) cos_psi: Arc<Vec<f64>>,
    pub(crate) sin_psi: Arc<Vec<f64>>,
}

impl std::fmt::Debug for BundleGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "BundleGrid({} x {} x {} on {})",
            self.n_r,
            self.n_phi,
            self.n_psi,
            self.metric.id()
        )
    }
}

/// Stencil quality codes per node.
pub const QUALITY_FULL: u8 = 0;
pub const QUALITY_REDUCED: u8 = 1;
pub const QUALITY_ONESIDED: u8 = 2;
pub const QUALITY_FLOW_ONESIDED: u8 = 3;
pub const QUALITY_EXTRAPOLATED: u8 = 4;

/// Records where an operator had to fall back to lower-order stencils.
#[derive(Debug, Clone)]
pub struct QualityMask {
    pub codes: Vec<u8>,
}

impl QualityMask {
    pub fn full(n: usize) -> Self {
        QualityMask {
            codes: vec![QUALITY_FULL; n],
        }
    }

    pub fn is_clean(&self, idx: usize) -> bool {
        self.codes[idx] == QUALITY_FULL
    }

    pub fn degraded_fraction(&self) -> f64 {
        let n = self.codes.len().max(1);
        self.codes.iter().filter(|&&c| c != QUALITY_FULL).count() as f64 / n as f64
    }
}

/// Scalar samples on the bundle grid, ordered `(r, phi, psi)` row-major.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub values: Vec<f64>,
    /// Declared boundary behavior; checks that require the Lipschitz-zero
    /// class assert this flag.
    pub vanishes_on_boundary: bool,
    pub(crate) shape: (usize, usize, usize),
}

/// Sections of the normal bundle `N`, stored as the coefficient `a` in
/// `V = a v_perp`.
#[derive(Debug, Clone)]
pub struct SectionN {
    pub coeffs: Vec<f64>,
    pub(crate) shape: (usize, usize, usize),
}

impl BundleGrid {
    /// Build the grid on `metric` with `n_r` radii, `n_phi` spatial angles
    /// and `n_psi` fiber angles.
    pub fn new(metric: &MetricField, n_r: usize, n_phi: usize, n_psi: usize) -> Result<Self> {
        if n_r < 4 || n_phi < 8 || n_psi < 8 {
            return Err(Error::usage(
                "bundle grid needs n_r >= 4, n_phi >= 8, n_psi >= 8",
            ));
        }
        if !n_phi.is_multiple_of(2) {
            return Err(Error::usage(
                "n_phi must be even (the radial stencil continues through the center antipodally)",
            ));
        }
        let dr = 1.0 / n_r as f64;
        let dphi = std::f64::consts::TAU / n_phi as f64;
        let dpsi = std::f64::consts::TAU / n_psi as f64;

        let nodes: Vec<SpatialNode> = (0..n_r * n_phi)
            .into_par_iter()
            .map(|s| {
                let ir = s / n_phi;
                let iphi = s % n_phi;
                let r = (ir as f64 + 0.5) * dr;
                let phi = iphi as f64 * dphi;
                let x = Vector2::new(r * phi.cos(), r * phi.sin());
                let geo: PointGeometry = metric.eval_geometry(x)?;
                let (e1, e2) = orthonormal_frame(&geo.g);
                let dg = metric.derivatives(x)?;
                let contract =
                    |m: &Matrix2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| (m * b).dot(a);
                let mut dg_e11 = [0.0; 2];
                let mut dg_e12 = [0.0; 2];
                let mut dg_e22 = [0.0; 2];
                let mut dlog = Vector2::zeros();
                for j in 0..2 {
                    dg_e11[j] = contract(&dg[j], &e1, &e1);
                    dg_e12[j] = contract(&dg[j], &e1, &e2);
                    dg_e22[j] = contract(&dg[j], &e2, &e2);
                    dlog[j] = 0.5 * (geo.g_inv * dg[j]).trace();
                }
                let gauss = metric.gaussian_curvature(x)?;
                Ok(SpatialNode {
                    x,
                    g: geo.g,
                    sqrt_det: geo.sqrt_det,
                    christoffel: geo.christoffel,
                    e1,
                    e2,
                    dg_e11,
                    dg_e12,
                    dg_e22,
                    dlog_sqrt: dlog,
                    gauss,
                })
            })
            .collect::<Result<_>>()?;

        let w_spatial: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(s, node)| {
                let ir = s / n_phi;
                let r = (ir as f64 + 0.5) * dr;
                r * dr * dphi * node.sqrt_det
            })
            .collect();

        let cos_psi: Vec<f64> = (0..n_psi).map(|k| (k as f64 * dpsi).cos()).collect();
        let sin_psi: Vec<f64> = (0..n_psi).map(|k| (k as f64 * dpsi).sin()).collect();

        Ok(BundleGrid {
            metric: metric.clone(),
            n_r,
            n_phi,
            n_psi,
            dr,
            dphi,
            dpsi,
            nodes: Arc::new(nodes),
            w_spatial: Arc::new(w_spatial),
            cos_psi: Arc::new(cos_psi),
            sin_psi: Arc::new(sin_psi),
        })
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_r, self.n_phi, self.n_psi)
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_phi * self.n_psi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn node_index(&self, ir: usize, iphi: usize, ipsi: usize) -> usize {
        (ir * self.n_phi + iphi) * self.n_psi + ipsi
    }

    #[inline]
    pub(crate) fn split_index(&self, idx: usize) -> (usize, usize, usize) {
        let ipsi = idx % self.n_psi;
        let s = idx / self.n_psi;
        (s / self.n_phi, s % self.n_phi, ipsi)
    }

    /// Base point of a node.
    pub fn position(&self, idx: usize) -> Vector2<f64> {
        self.nodes[idx / self.n_psi].x
    }

    /// Fiber direction of a node (exactly g-unit).
    pub fn direction(&self, idx: usize) -> Vector2<f64> {
        let (_, _, ipsi) = self.split_index(idx);
        let node = &self.nodes[idx / self.n_psi];
        self.cos_psi[ipsi] * node.e1 + self.sin_psi[ipsi] * node.e2
    }

    /// The +90 degree rotation of the fiber direction in the frame.
    pub fn direction_perp(&self, idx: usize) -> Vector2<f64> {
        let (_, _, ipsi) = self.split_index(idx);
        let node = &self.nodes[idx / self.n_psi];
        -self.sin_psi[ipsi] * node.e1 + self.cos_psi[ipsi] * node.e2
    }

    /// Full quadrature weight of a node (realizes `dSigma_g`).
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.w_spatial[idx / self.n_psi] * self.dpsi
    }

    /// Gaussian curvature at the node's base point.
    pub fn gaussian_at(&self, idx: usize) -> f64 {
        self.nodes[idx / self.n_psi].gauss
    }

    /// Total measure of the discretized bundle.
    pub fn volume(&self) -> f64 {
        self.w_spatial.iter().sum::<f64>() * self.dpsi * self.n_psi as f64
    }

    /// Riemannian area of the disk by a separate radial Gauss-Legendre /
    /// angular trapezoid quadrature (used to cross-check the bundle
    /// weights).
    pub fn area_quadrature(metric: &MetricField, n_r: usize, n_phi: usize) -> Result<f64> {
        let radial = crate::metric::gauss_legendre_unit_pub(n_r);
        let dphi = std::f64::consts::TAU / n_phi as f64;
        let mut total = 0.0;
        for (r, wr) in radial {
            for a in 0..n_phi {
                let phi = (a as f64 + 0.5) * dphi;
                let x = Vector2::new(r * phi.cos(), r * phi.sin());
                let geo = metric.eval_geometry(x)?;
                total += wr * r * dphi * geo.sqrt_det;
            }
        }
        Ok(total)
    }

    fn check_shape(&self, shape: (usize, usize, usize)) -> Result<()> {
        if shape != self.shape() {
            return Err(Error::usage(format!(
                "field shape {:?} does not match grid {:?}",
                shape,
                self.shape()
            )));
        }
        Ok(())
    }

    /// Sample a function of the bundle point `(x, v)` into a scalar field.
    pub fn scalar_from_fn(
        &self,
        vanishes_on_boundary: bool,
        f: impl Fn(Vector2<f64>, Vector2<f64>) -> f64 + Sync,
    ) -> ScalarField {
        let values: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|idx| f(self.position(idx), self.direction(idx)))
            .collect();
        ScalarField {
            values,
            vanishes_on_boundary,
            shape: self.shape(),
        }
    }

    /// Check a field's declared boundary behavior against its outermost
    /// ring: a boundary-vanishing field must be small where the grid meets
    /// the rim.
    pub fn validate_boundary_vanishing(&self, u: &ScalarField) -> Result<()> {
        if !u.vanishes_on_boundary {
            return Ok(());
        }
        let global = u.max_abs().max(1e-300);
        let mut rim = 0.0f64;
        for iphi in 0..self.n_phi {
            for ipsi in 0..self.n_psi {
                rim = rim.max(u.values[self.node_index(self.n_r - 1, iphi, ipsi)].abs());
            }
        }
        // The outermost ring sits half a spacing inside the rim, so a
        // Lipschitz boundary-vanishing field is O(dr) there.
        if rim > 0.25 * global {
            return Err(Error::usage(format!(
                "field declared boundary-vanishing has rim magnitude {:.3e} of {:.3e}",
                rim, global
            )));
        }
        Ok(())
    }

    /// Wrap raw values (node order `(r, phi, psi)` row-major) as a field.
    pub fn scalar_from_values(
        &self,
        values: Vec<f64>,
        vanishes_on_boundary: bool,
    ) -> Result<ScalarField> {
        if values.len() != self.len() {
            return Err(Error::usage(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                self.len()
            )));
        }
        Ok(ScalarField {
            values,
            vanishes_on_boundary,
            shape: self.shape(),
        })
    }

    /// Wrap raw coefficients as a section of `N`.
    pub fn section_from_values(&self, coeffs: Vec<f64>) -> Result<SectionN> {
        if coeffs.len() != self.len() {
            return Err(Error::usage(format!(
                "{} coefficients for a grid of {} nodes",
                coeffs.len(),
                self.len()
            )));
        }
        Ok(SectionN {
            coeffs,
            shape: self.shape(),
        })
    }

    /// Sample a function given in grid coordinates `(r, phi, psi)`.
    pub fn scalar_from_polar(
        &self,
        vanishes_on_boundary: bool,
        f: impl Fn(f64, f64, f64) -> f64 + Sync,
    ) -> ScalarField {
        let values: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|idx| {
                let (ir, iphi, ipsi) = self.split_index(idx);
                f(
                    (ir as f64 + 0.5) * self.dr,
                    iphi as f64 * self.dphi,
                    ipsi as f64 * self.dpsi,
                )
            })
            .collect();
        ScalarField {
            values,
            vanishes_on_boundary,
            shape: self.shape(),
        }
    }

    /// Lift of a base function (`pi^* f`): constant on fibers.
    pub fn lift_scalar(
        &self,
        vanishes_on_boundary: bool,
        f: impl Fn(Vector2<f64>) -> f64 + Sync,
    ) -> ScalarField {
        self.scalar_from_fn(vanishes_on_boundary, |x, _| f(x))
    }

    /// The function `(x, v) -> h_x(v)` of a 1-form with components
    /// `h(x) = (h_1, h_2)`.
    pub fn oneform_field(&self, h: impl Fn(Vector2<f64>) -> (f64, f64) + Sync) -> ScalarField {
        self.scalar_from_fn(false, |x, v| {
            let (h1, h2) = h(x);
            h1 * v.x + h2 * v.y
        })
    }

    /// Sample a coefficient function into a section of `N`.
    pub fn section_from_fn(
        &self,
        f: impl Fn(Vector2<f64>, Vector2<f64>) -> f64 + Sync,
    ) -> SectionN {
        let coeffs: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|idx| f(self.position(idx), self.direction(idx)))
            .collect();
        SectionN {
            coeffs,
            shape: self.shape(),
        }
    }

    /// Ambient components of a section at a node.
    pub fn section_vector(&self, section: &SectionN, idx: usize) -> Vector2<f64> {
        section.coeffs[idx] * self.direction_perp(idx)
    }
}

impl ScalarField {
    pub fn zeros(grid: &BundleGrid) -> Self {
        ScalarField {
            values: vec![0.0; grid.len()],
            vanishes_on_boundary: true,
            shape: grid.shape(),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl SectionN {
    pub fn zeros(grid: &BundleGrid) -> Self {
        SectionN {
            coeffs: vec![0.0; grid.len()],
            shape: grid.shape(),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn directions_are_exactly_unit() {
        let m = MetricField::anisotropic(0.3, 0.2);
        let grid = BundleGrid::new(&m, 8, 16, 16).unwrap();
        for idx in (0..grid.len()).step_by(37) {
            let x = grid.position(idx);
            let v = grid.direction(idx);
            let vp = grid.direction_perp(idx);
            assert_relative_eq!(m.norm_g(x, v).unwrap(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(m.norm_g(x, vp).unwrap(), 1.0, epsilon = 1e-12);
            assert!(m.inner(x, v, vp).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn euclidean_bundle_volume_is_two_pi_squared() {
        let m = MetricField::euclidean();
        let grid = BundleGrid::new(&m, 32, 32, 32).unwrap();
        assert_relative_eq!(
            grid.volume(),
            2.0 * std::f64::consts::PI.powi(2),
            max_relative = 1e-12
        );
    }

    #[test]
    fn weights_match_independent_area_quadrature() {
        for metric in [
            MetricField::euclidean(),
            MetricField::constant_curvature(0.8),
            MetricField::c11_test(0.5),
            MetricField::anisotropic(0.3, 0.2),
        ] {
            let grid = BundleGrid::new(&metric, 48, 48, 16).unwrap();
            let area = BundleGrid::area_quadrature(&metric, 64, 128).unwrap();
            let expected = std::f64::consts::TAU * area;
            assert_relative_eq!(grid.volume(), expected, max_relative = 1e-3);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let m = MetricField::euclidean();
        let g1 = BundleGrid::new(&m, 8, 16, 16).unwrap();
        let g2 = BundleGrid::new(&m, 8, 16, 32).unwrap();
        let u = g1.lift_scalar(false, |x| x.x);
        assert!(g2.apply_x(&u, DerivativeMethod::Stencil).is_err());
    }
}
