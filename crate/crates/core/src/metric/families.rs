//! Built-in metric families and the grid-sample backing.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Conformal factor profiles for metrics of the form `g = e^{2 lambda} delta`.
///
/// Each profile provides the factor, its gradient and (where it exists) its
/// Laplacian in closed form. The Laplacian powers the curvature oracle
/// `K = -e^{-2 lambda} (Delta lambda)` used by tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConformalProfile {
    /// `lambda = c` (a constant); `g = e^{2c} delta`.
    Constant { lambda: f64 },
    /// `lambda = a |x|^2`.
    Quadratic { a: f64 },
    /// `lambda = ln(2c) - ln(1 + c^2 |x|^2)`.
    ///
    /// This is the pullback of the round sphere under a stereographic-type
    /// chart; the Gaussian curvature is identically `+1` for every `c > 0`.
    /// At `c = 1` the disk maps onto a hemisphere and the boundary is
    /// totally geodesic.
    Cap { c: f64 },
    /// `lambda = c * max(0, |x| - r0)^2`.
    ///
    /// One Lipschitz derivative everywhere, second derivatives jump across
    /// `|x| = r0`: the canonical "rough but not too rough" test profile.
    Kink { c: f64, r0: f64 },
    /// `lambda = a * exp(-|x - x0|^2 / w^2)`.
    Bump { a: f64, x0: [f64; 2], w: f64 },
}

impl ConformalProfile {
    pub fn lambda(&self, x: Vector2<f64>) -> f64 {
        match *self {
            ConformalProfile::Constant { lambda } => lambda,
            ConformalProfile::Quadratic { a } => a * x.norm_squared(),
            ConformalProfile::Cap { c } => (2.0 * c).ln() - (1.0 + c * c * x.norm_squared()).ln(),
            ConformalProfile::Kink { c, r0 } => {
                let s = (x.norm() - r0).max(0.0);
                c * s * s
            }
            ConformalProfile::Bump { a, x0, w } => {
                let d = x - Vector2::new(x0[0], x0[1]);
                a * (-d.norm_squared() / (w * w)).exp()
            }
        }
    }

    pub fn grad_lambda(&self, x: Vector2<f64>) -> Vector2<f64> {
        match *self {
            ConformalProfile::Constant { .. } => Vector2::zeros(),
            ConformalProfile::Quadratic { a } => 2.0 * a * x,
            ConformalProfile::Cap { c } => {
                let denom = 1.0 + c * c * x.norm_squared();
                -(2.0 * c * c / denom) * x
            }
            ConformalProfile::Kink { c, r0 } => {
                let r = x.norm();
                if r <= r0 || r == 0.0 {
                    Vector2::zeros()
                } else {
                    (2.0 * c * (r - r0) / r) * x
                }
            }
            ConformalProfile::Bump { a, x0, w } => {
                let d = x - Vector2::new(x0[0], x0[1]);
                let v = a * (-d.norm_squared() / (w * w)).exp();
                (-2.0 * v / (w * w)) * d
            }
        }
    }

    /// Laplacian of the profile; `None` where it does not exist classically.
    pub fn laplacian_lambda(&self, x: Vector2<f64>) -> Option<f64> {
        match *self {
            ConformalProfile::Constant { .. } => Some(0.0),
            ConformalProfile::Quadratic { a } => Some(4.0 * a),
            ConformalProfile::Cap { c } => {
                let denom = 1.0 + c * c * x.norm_squared();
                Some(-4.0 * c * c / (denom * denom))
            }
            ConformalProfile::Kink { c, r0 } => {
                let r = x.norm();
                if (r - r0).abs() < 1e-12 {
                    None
                } else if r < r0 {
                    Some(0.0)
                } else {
                    Some(2.0 * c * (2.0 - r0 / r))
                }
            }
            ConformalProfile::Bump { a, x0, w } => {
                let d = x - Vector2::new(x0[0], x0[1]);
                let s = d.norm_squared();
                let v = a * (-s / (w * w)).exp();
                Some(v * (4.0 * s / (w * w * w * w) - 4.0 / (w * w)))
            }
        }
    }

    pub fn components(&self, x: Vector2<f64>) -> Matrix2<f64> {
        let f = (2.0 * self.lambda(x)).exp();
        Matrix2::new(f, 0.0, 0.0, f)
    }

    pub fn derivatives(&self, x: Vector2<f64>) -> [Matrix2<f64>; 2] {
        let f = (2.0 * self.lambda(x)).exp();
        let grad = self.grad_lambda(x);
        let d = |k: usize| {
            let s = 2.0 * grad[k] * f;
            Matrix2::new(s, 0.0, 0.0, s)
        };
        [d(0), d(1)]
    }

    pub fn describe(&self) -> String {
        match *self {
            ConformalProfile::Constant { lambda } => format!("const_lambda_{lambda}"),
            ConformalProfile::Quadratic { a } => format!("quadratic_a{a}"),
            ConformalProfile::Cap { c } => format!("cap_c{c}"),
            ConformalProfile::Kink { c, r0 } => format!("kink_c{c}_r{r0}"),
            ConformalProfile::Bump { a, x0, w } => format!("bump_a{a}_x{}_{}_w{w}", x0[0], x0[1]),
        }
    }
}

/// Mildly anisotropic polynomial family used to exercise non-conformal code
/// paths: `g11 = 1 + b y^2`, `g22 = 1 + b x^2`, `g12 = c x y`.
#[derive(Debug, Clone, Copy)]
pub struct AnisotropicPoly {
    pub beta: f64,
    pub gamma: f64,
}

impl AnisotropicPoly {
    pub fn components(&self, x: Vector2<f64>) -> Matrix2<f64> {
        let (u, v) = (x.x, x.y);
        Matrix2::new(
            1.0 + self.beta * v * v,
            self.gamma * u * v,
            self.gamma * u * v,
            1.0 + self.beta * u * u,
        )
    }

    pub fn derivatives(&self, x: Vector2<f64>) -> [Matrix2<f64>; 2] {
        let (u, v) = (x.x, x.y);
        let d0 = Matrix2::new(0.0, self.gamma * v, self.gamma * v, 2.0 * self.beta * u);
        let d1 = Matrix2::new(2.0 * self.beta * v, self.gamma * u, self.gamma * u, 0.0);
        [d0, d1]
    }
}

/// Metric components sampled on a uniform Cartesian grid, interpolated with
/// C1 cubic tensor-product splines (Catmull-Rom).
#[derive(Debug, Clone)]
pub struct GridSamples {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major (y outer, x inner) component samples.
    pub g11: Vec<f64>,
    pub g12: Vec<f64>,
    pub g22: Vec<f64>,
    pub lambda_min: f64,
}

impl GridSamples {
    pub fn validate(&self) -> Result<()> {
        let n = self.nx * self.ny;
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::data("metric grid needs at least 4x4 samples"));
        }
        if self.g11.len() != n || self.g12.len() != n || self.g22.len() != n {
            return Err(Error::data(format!(
                "metric grid blocks must hold {} samples (got {}, {}, {})",
                n,
                self.g11.len(),
                self.g12.len(),
                self.g22.len()
            )));
        }
        if self.spacing <= 0.0 || !self.spacing.is_finite() {
            return Err(Error::data("metric grid spacing must be positive"));
        }
        Ok(())
    }

    /// Largest |x| covered with the two-cell margin cubic stencils need.
    pub fn safe_radius(&self) -> f64 {
        let x_max = self.origin[0] + self.spacing * (self.nx - 1) as f64;
        let y_max = self.origin[1] + self.spacing * (self.ny - 1) as f64;
        let m = (-self.origin[0]).min(-self.origin[1]).min(x_max).min(y_max);
        m - 2.0 * self.spacing
    }

    fn fetch(&self, block: &[f64], ix: isize, iy: isize) -> f64 {
        // Linear virtual extension keeps the stencil C1 at the sample edges.
        let read = |i: isize, n: usize| -> (usize, usize, f64) {
            if i < 0 {
                (0, 1, -(i as f64))
            } else if i as usize >= n {
                (n - 1, n - 2, (i - (n as isize - 1)) as f64)
            } else {
                (i as usize, i as usize, 0.0)
            }
        };
        let (ax, bx, tx) = read(ix, self.nx);
        let (ay, by, ty) = read(iy, self.ny);
        let v = |jx: usize, jy: usize| block[jy * self.nx + jx];
        let base = v(ax, ay);
        let ex = v(ax, ay) - v(bx, ay);
        let ey = v(ax, ay) - v(ax, by);
        base + tx * ex + ty * ey
    }

    /// Catmull-Rom value and gradient of one component block.
    fn eval_block(&self, block: &[f64], x: Vector2<f64>) -> (f64, Vector2<f64>) {
        let fx = (x.x - self.origin[0]) / self.spacing;
        let fy = (x.y - self.origin[1]) / self.spacing;
        let ix = fx.floor();
        let iy = fy.floor();
        let tx = fx - ix;
        let ty = fy - iy;
        let (ix, iy) = (ix as isize, iy as isize);

        let mut rows = [0.0f64; 4];
        let mut rows_dx = [0.0f64; 4];
        for (j, row) in (-1..3).enumerate() {
            let p: Vec<f64> = (-1..3)
                .map(|i| self.fetch(block, ix + i, iy + row))
                .collect();
            let (v, d) = catmull_rom(&[p[0], p[1], p[2], p[3]], tx);
            rows[j] = v;
            rows_dx[j] = d / self.spacing;
        }
        let (value, dy) = catmull_rom(&rows, ty);
        let (dx, _) = catmull_rom(&rows_dx, ty);
        (value, Vector2::new(dx, dy / self.spacing))
    }

    pub fn components(&self, x: Vector2<f64>) -> Matrix2<f64> {
        let (a, _) = self.eval_block(&self.g11, x);
        let (b, _) = self.eval_block(&self.g12, x);
        let (c, _) = self.eval_block(&self.g22, x);
        Matrix2::new(a, b, b, c)
    }

    pub fn derivatives(&self, x: Vector2<f64>) -> [Matrix2<f64>; 2] {
        let (_, da) = self.eval_block(&self.g11, x);
        let (_, db) = self.eval_block(&self.g12, x);
        let (_, dc) = self.eval_block(&self.g22, x);
        [
            Matrix2::new(da.x, db.x, db.x, dc.x),
            Matrix2::new(da.y, db.y, db.y, dc.y),
        ]
    }
}

/// Cubic Catmull-Rom value and derivative (w.r.t. the unit parameter) from
/// four consecutive samples at parameter `t` in `[0, 1]` between `p[1]` and
/// `p[2]`.
pub(crate) fn catmull_rom(p: &[f64; 4], t: f64) -> (f64, f64) {
    let c0 = 2.0 * p[1];
    let c1 = p[2] - p[0];
    let c2 = 2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3];
    let c3 = -p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3];
    let v = 0.5 * (c0 + t * (c1 + t * (c2 + t * c3)));
    let d = 0.5 * (c1 + t * (2.0 * c2 + t * 3.0 * c3));
    (v, d)
}
