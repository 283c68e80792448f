//! Riemannian metrics on the closed unit disk with one classical derivative
//! and essentially bounded second derivatives, plus derived geometry.
//!
//! A [`MetricField`] evaluates the components `g_ij(x)` and their first
//! derivatives anywhere on the closed unit disk (and on a thin collar
//! around it, to support finite differences and boundary probes). Second
//! derivatives are never part of the pointwise contract: they exist almost
//! everywhere for this regularity class and are obtained by centered
//! differences of the first-derivative evaluator wherever an integrated
//! quantity needs them.

mod families;
mod mollify;
mod sobolev;

pub use families::{AnisotropicPoly, ConformalProfile, GridSamples};
pub use mollify::{ExtensionRule, KernelProfile, MollifierSpec};
pub use sobolev::MetricNorm;

pub(crate) use mollify::gauss_legendre_unit as gauss_legendre_unit_pub;

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Slack beyond `|x| = 1` that evaluators tolerate, so centered stencils and
/// boundary probes anchored on the rim stay in contract.
pub const DOMAIN_SLACK: f64 = 1.5e-3;

/// Radius at which the radial reflection used for extension is clamped.
pub const EXTENSION_CLAMP_RADIUS: f64 = 1.25;

#[derive(Debug)]
pub(crate) enum Backing {
    Euclidean,
    Conformal(ConformalProfile),
    Anisotropic(AnisotropicPoly),
    Grid(GridSamples),
    Mollified(mollify::MollifiedBacking),
}

/// A `C^{1,1}` Riemannian metric on the closed unit disk.
///
/// Evaluation is pure; the struct is cheap to clone and safe to share
/// across threads.
#[derive(Clone, Debug)]
pub struct MetricField {
    backing: Arc<Backing>,
    id: String,
    lambda_min: f64,
    dg_lipschitz_bound: f64,
}

/// Pointwise derived geometry: `g`, its inverse, the Christoffel symbols and
/// the Riemannian volume density.
#[derive(Debug, Clone, Copy)]
pub struct PointGeometry {
    pub g: Matrix2<f64>,
    pub g_inv: Matrix2<f64>,
    /// `christoffel[i][j][k]` is the symbol with upper index `i`, symmetric
    /// in `(j, k)`.
    pub christoffel: [[[f64; 2]; 2]; 2],
    pub sqrt_det: f64,
}

impl PointGeometry {
    /// Contraction `Gamma(u, v)^i = Gamma^i_{jk} u^j v^k`.
    pub fn gamma_bilinear(&self, u: Vector2<f64>, v: Vector2<f64>) -> Vector2<f64> {
        let mut out = Vector2::zeros();
        for i in 0..2 {
            let mut s = 0.0;
            for j in 0..2 {
                for k in 0..2 {
                    s += self.christoffel[i][j][k] * u[j] * v[k];
                }
            }
            out[i] = s;
        }
        out
    }
}

/// Curvature tensor components at a point, with the Gaussian curvature for
/// the two-dimensional case.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureTensor {
    /// `riemann[i][j][k][l] = R^i_{jkl}`, the curvature of the coordinate
    /// frame with `R(e_k, e_l) e_j = R^i_{jkl} e_i`.
    pub riemann: [[[[f64; 2]; 2]; 2]; 2],
    pub gaussian: f64,
}

impl MetricField {
    fn from_backing(backing: Backing, id: String) -> Self {
        let mut field = MetricField {
            backing: Arc::new(backing),
            id,
            lambda_min: 1.0,
            dg_lipschitz_bound: 1.0,
        };
        let (lmin, lip) = field.calibrate();
        field.lambda_min = lmin;
        field.dg_lipschitz_bound = lip;
        field
    }

    /// The flat metric `g = delta`.
    pub fn euclidean() -> Self {
        Self::from_backing(Backing::Euclidean, "euclidean".into())
    }

    /// `g = factor * delta`.
    pub fn scaled_euclidean(factor: f64) -> Self {
        Self::conformal(ConformalProfile::Constant {
            lambda: 0.5 * factor.ln(),
        })
    }

    /// Conformal metric `g = e^{2 lambda} delta` for a built-in profile.
    pub fn conformal(profile: ConformalProfile) -> Self {
        let id = format!("conformal_{}", profile.describe());
        Self::from_backing(Backing::Conformal(profile), id)
    }

    /// The constant-curvature family `g_c = 4c^2 (1 + c^2 |x|^2)^{-2} delta`
    /// with Gaussian curvature `+1`.
    pub fn constant_curvature(c: f64) -> Self {
        Self::conformal(ConformalProfile::Cap { c })
    }

    /// The rough test metric: conformal with `lambda = c max(0, |x|-1/2)^2`,
    /// one Lipschitz derivative but no second classical derivative across
    /// `|x| = 1/2`.
    pub fn c11_test(c: f64) -> Self {
        Self::conformal(ConformalProfile::Kink { c, r0: 0.5 })
    }

    /// Euclidean metric with a localized smooth conformal bump.
    pub fn bump(a: f64, x0: [f64; 2], w: f64) -> Self {
        Self::conformal(ConformalProfile::Bump { a, x0, w })
    }

    /// Non-conformal polynomial family for exercising generic code paths.
    pub fn anisotropic(beta: f64, gamma: f64) -> Self {
        let id = format!("anisotropic_b{beta}_g{gamma}");
        Self::from_backing(Backing::Anisotropic(AnisotropicPoly { beta, gamma }), id)
    }

    /// Metric backed by grid samples with C1 cubic interpolation.
    pub fn from_grid_samples(samples: GridSamples, id: impl Into<String>) -> Result<Self> {
        samples.validate()?;
        if samples.safe_radius() < 1.0 {
            return Err(Error::data(format!(
                "metric grid covers |x| <= {:.3}; it must cover the closed unit disk plus a two-cell margin",
                samples.safe_radius()
            )));
        }
        Ok(Self::from_backing(Backing::Grid(samples), id.into()))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dimension(&self) -> usize {
        2
    }

    /// Uniform lower bound on the smallest eigenvalue of `g`.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Declared bound on the Lipschitz constant of the first derivatives.
    pub fn dg_lipschitz_bound(&self) -> f64 {
        self.dg_lipschitz_bound
    }

    /// Floor for finite-difference steps on this metric. Grid-backed
    /// metrics cannot resolve scales below their sample spacing.
    pub fn fd_step_floor(&self) -> f64 {
        match &*self.backing {
            Backing::Grid(g) => g.spacing.max(1e-4),
            _ => 1e-4,
        }
    }

    pub fn is_grid_backed(&self) -> bool {
        matches!(&*self.backing, Backing::Grid(_))
    }

    fn calibrate(&self) -> (f64, f64) {
        let mut min_eig = f64::INFINITY;
        let mut lip = 0.0f64;
        let h = self.fd_step_floor();
        for ir in 0..16 {
            let r = (ir as f64 + 0.5) / 16.0;
            for ia in 0..32 {
                let phi = ia as f64 * std::f64::consts::TAU / 32.0;
                let x = Vector2::new(r * phi.cos(), r * phi.sin());
                let g = self.raw_components(x);
                min_eig = min_eig.min(min_eigenvalue(&g));
                let dp = self.raw_derivatives(x + Vector2::new(h, 0.0));
                let dm = self.raw_derivatives(x - Vector2::new(h, 0.0));
                for k in 0..2 {
                    lip = lip.max((dp[k] - dm[k]).abs().max() / (2.0 * h));
                }
            }
        }
        (0.99 * min_eig, 1.25 * lip.max(1e-12))
    }

    fn raw_components(&self, x: Vector2<f64>) -> Matrix2<f64> {
        match &*self.backing {
            Backing::Euclidean => Matrix2::identity(),
            Backing::Conformal(p) => p.components(x),
            Backing::Anisotropic(a) => a.components(x),
            Backing::Grid(g) => g.components(x),
            Backing::Mollified(m) => m.components(x),
        }
    }

    fn raw_derivatives(&self, x: Vector2<f64>) -> [Matrix2<f64>; 2] {
        match &*self.backing {
            Backing::Euclidean => [Matrix2::zeros(), Matrix2::zeros()],
            Backing::Conformal(p) => p.derivatives(x),
            Backing::Anisotropic(a) => a.derivatives(x),
            Backing::Grid(g) => g.derivatives(x),
            Backing::Mollified(m) => m.derivatives(x),
        }
    }

    fn check_domain(&self, x: Vector2<f64>) -> Result<()> {
        if x.norm() > 1.0 + DOMAIN_SLACK {
            return Err(Error::OutsideDomain(x));
        }
        Ok(())
    }

    /// Metric components at `x` (symmetric positive definite).
    pub fn components(&self, x: Vector2<f64>) -> Result<Matrix2<f64>> {
        self.check_domain(x)?;
        let g = self.raw_components(x);
        let min_eig = min_eigenvalue(&g);
        if min_eig <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                point: x,
                min_eigenvalue: min_eig,
            });
        }
        Ok(g)
    }

    /// First derivatives `[d/dx1 g, d/dx2 g]` at `x`.
    pub fn derivatives(&self, x: Vector2<f64>) -> Result<[Matrix2<f64>; 2]> {
        self.check_domain(x)?;
        Ok(self.raw_derivatives(x))
    }

    /// Components extended beyond the disk by first-order radial reflection,
    /// clamped at [`EXTENSION_CLAMP_RADIUS`].
    ///
    /// For `1 < r <= 1.25` the value is `2 g(u) - g((2 - r) u)` with
    /// `u = x/|x|`; the reflected point runs back inward, so values and
    /// first derivatives match across the rim and second derivatives stay
    /// bounded.
    pub fn extended_components(&self, x: Vector2<f64>) -> Matrix2<f64> {
        let r = x.norm();
        if r <= 1.0 {
            return self.raw_components(x);
        }
        let u = x / r;
        let q = (2.0 - r.min(EXTENSION_CLAMP_RADIUS)) * u;
        2.0 * self.raw_components(u) - self.raw_components(q)
    }

    /// Extension-rule derivatives, consistent with [`extended_components`].
    ///
    /// [`extended_components`]: MetricField::extended_components
    pub fn extended_derivatives(&self, x: Vector2<f64>) -> [Matrix2<f64>; 2] {
        let r = x.norm();
        if r <= 1.0 {
            return self.raw_derivatives(x);
        }
        let u = x / r;
        let rc = r.min(EXTENSION_CLAMP_RADIUS);
        let q = (2.0 - rc) * u;
        let du = self.raw_derivatives(u);
        let dq = self.raw_derivatives(q);
        // Jacobians of u(x) and q(x); u u^T both picks out the radial part.
        let uut = u * u.transpose();
        let tang = (Matrix2::identity() - uut) / r;
        let jac_u = tang;
        let jac_q = if r < EXTENSION_CLAMP_RADIUS {
            -uut + (2.0 - r) * tang
        } else {
            (2.0 - rc) * tang
        };
        let mut out = [Matrix2::zeros(), Matrix2::zeros()];
        for k in 0..2 {
            let mut m = Matrix2::zeros();
            for l in 0..2 {
                m += du[l] * (2.0 * jac_u[(l, k)]) - dq[l] * jac_q[(l, k)];
            }
            out[k] = m;
        }
        out
    }

    /// Metric, inverse, Christoffel symbols and volume density at `x`.
    pub fn eval_geometry(&self, x: Vector2<f64>) -> Result<PointGeometry> {
        let g = self.components(x)?;
        let min_eig = min_eigenvalue(&g);
        if min_eig < 0.5 * self.lambda_min {
            return Err(Error::NotPositiveDefinite {
                point: x,
                min_eigenvalue: min_eig,
            });
        }
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let g_inv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
        let dg = self.raw_derivatives(x);
        let mut christoffel = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut s = 0.0;
                    for l in 0..2 {
                        s += g_inv[(i, l)] * (dg[j][(l, k)] + dg[k][(j, l)] - dg[l][(j, k)]);
                    }
                    christoffel[i][j][k] = 0.5 * s;
                }
            }
        }
        Ok(PointGeometry {
            g,
            g_inv,
            christoffel,
            sqrt_det: det.sqrt(),
        })
    }

    /// Riemann tensor `R^i_{jkl}` and Gaussian curvature at `x`.
    ///
    /// Derivatives of the Christoffel symbols are taken by centered
    /// differences at the metric's finite-difference floor.
    pub fn curvature(&self, x: Vector2<f64>) -> Result<CurvatureTensor> {
        let h = self.fd_step_floor();
        if self.is_grid_backed() {
            // Grid stencils need one stencil width of margin inside the
            // sampled box.
            if let Backing::Grid(g) = &*self.backing {
                if x.norm() + 2.0 * h > g.safe_radius() + 2.0 * g.spacing {
                    return Err(Error::OutsideDomain(x));
                }
            }
        } else {
            self.check_domain(x)?;
        }
        let base = self.eval_geometry_extended(x)?;
        let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2]; // dgamma[m][i][j][k] = d_m Gamma^i_{jk}
        for m in 0..2 {
            let mut step = Vector2::zeros();
            step[m] = h;
            let p = self.eval_geometry_extended(x + step)?;
            let q = self.eval_geometry_extended(x - step)?;
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        dgamma[m][i][j][k] =
                            (p.christoffel[i][j][k] - q.christoffel[i][j][k]) / (2.0 * h);
                    }
                }
            }
        }
        let gamma = &base.christoffel;
        let mut riemann = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let mut v = dgamma[k][i][l][j] - dgamma[l][i][k][j];
                        for m in 0..2 {
                            v += gamma[i][k][m] * gamma[m][l][j] - gamma[i][l][m] * gamma[m][k][j];
                        }
                        riemann[i][j][k][l] = v;
                    }
                }
            }
        }
        // Gaussian curvature via a g-orthonormal frame.
        let (e1, e2) = orthonormal_frame(&base.g);
        let mut rv = Vector2::zeros();
        for i in 0..2 {
            let mut s = 0.0;
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        s += riemann[i][j][k][l] * e2[j] * e1[k] * e2[l];
                    }
                }
            }
            rv[i] = s;
        }
        let gaussian = (base.g * rv).dot(&e1);
        Ok(CurvatureTensor { riemann, gaussian })
    }

    /// Gaussian curvature at `x`.
    pub fn gaussian_curvature(&self, x: Vector2<f64>) -> Result<f64> {
        Ok(self.curvature(x)?.gaussian)
    }

    /// Closed-form Gaussian curvature `-e^{-2 lambda} Delta lambda` for
    /// conformal backings; `None` for other backings or at profile kinks.
    pub fn conformal_curvature_oracle(&self, x: Vector2<f64>) -> Option<f64> {
        match &*self.backing {
            Backing::Euclidean => Some(0.0),
            Backing::Conformal(p) => p
                .laplacian_lambda(x)
                .map(|lap| -(-2.0 * p.lambda(x)).exp() * lap),
            _ => None,
        }
    }

    /// Like [`eval_geometry`](MetricField::eval_geometry) but evaluated
    /// through the extension rule, so stencil probes may step outside `M`.
    pub(crate) fn eval_geometry_extended(&self, x: Vector2<f64>) -> Result<PointGeometry> {
        let g = self.extended_components(x);
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        if det <= 0.0 || g[(0, 0)] <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                point: x,
                min_eigenvalue: min_eigenvalue(&g),
            });
        }
        let g_inv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
        let dg = self.extended_derivatives(x);
        let mut christoffel = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut s = 0.0;
                    for l in 0..2 {
                        s += g_inv[(i, l)] * (dg[j][(l, k)] + dg[k][(j, l)] - dg[l][(j, k)]);
                    }
                    christoffel[i][j][k] = 0.5 * s;
                }
            }
        }
        Ok(PointGeometry {
            g,
            g_inv,
            christoffel,
            sqrt_det: det.sqrt(),
        })
    }

    /// `<u, v>_g` at `x`.
    pub fn inner(&self, x: Vector2<f64>, u: Vector2<f64>, v: Vector2<f64>) -> Result<f64> {
        let g = self.components(x)?;
        Ok((g * v).dot(&u))
    }

    /// `|v|_g` at `x`.
    pub fn norm_g(&self, x: Vector2<f64>, v: Vector2<f64>) -> Result<f64> {
        Ok(self.inner(x, v, v)?.sqrt())
    }
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub(crate) fn min_eigenvalue(g: &Matrix2<f64>) -> f64 {
    let tr = g[(0, 0)] + g[(1, 1)];
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    0.5 * (tr - disc)
}

/// Gram-Schmidt frame on the coordinate fields: `e1` is the normalized
/// first coordinate direction, `e2` the g-orthogonal complement. Both are
/// g-unit by construction.
pub(crate) fn orthonormal_frame(g: &Matrix2<f64>) -> (Vector2<f64>, Vector2<f64>) {
    let e1 = Vector2::new(1.0 / g[(0, 0)].sqrt(), 0.0);
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    let scale = (g[(0, 0)] / det).sqrt();
    let e2 = Vector2::new(-g[(0, 1)] / g[(0, 0)] * scale, scale);
    (e1, e2)
}
