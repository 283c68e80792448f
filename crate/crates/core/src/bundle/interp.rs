//! Off-grid interpolation of bundle fields.
//!
//! Catmull-Rom in each of the three grid directions: periodic in the two
//! angles, antipodal continuation through the disk center in the radius,
//! one-sided extrapolation (flagged) beyond the outermost ring.

use nalgebra::Vector2;

use super::{BundleGrid, QUALITY_EXTRAPOLATED, QUALITY_FULL};
use crate::metric::orthonormal_frame;

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    let c0 = 2.0 * p[1];
    let c1 = p[2] - p[0];
    let c2 = 2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3];
    let c3 = -p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3];
    0.5 * (c0 + t * (c1 + t * (c2 + t * c3)))
}

/// Interpolate `values` at the bundle point `(x, v)`; `v` need not be
/// exactly unit (it is projected onto the fiber by angle extraction).
pub(crate) fn tricubic(
    grid: &BundleGrid,
    values: &[f64],
    x: Vector2<f64>,
    v: Vector2<f64>,
) -> (f64, u8) {
    let (n_r, n_phi, n_psi) = grid.shape();
    let r = x.norm();
    let phi = x.y.atan2(x.x).rem_euclid(std::f64::consts::TAU);

    // Fiber angle of v in the frame at x.
    let g = grid.metric().extended_components(x);
    let (e1, e2) = orthonormal_frame(&g);
    let c1 = (g * v).dot(&e1);
    let c2 = (g * v).dot(&e2);
    let psi = c2.atan2(c1).rem_euclid(std::f64::consts::TAU);

    // Fractional indices.
    let fr = r / grid.dr - 0.5;
    let fphi = phi / grid.dphi;
    let fpsi = psi / grid.dpsi;

    let ir0 = fr.floor();
    let tr = fr - ir0;
    let ir0 = ir0 as isize;
    let iphi0 = fphi.floor() as usize % n_phi;
    let tphi = fphi - fphi.floor();
    let ipsi0 = fpsi.floor() as usize % n_psi;
    let tpsi = fpsi - fpsi.floor();

    let mut quality = QUALITY_FULL;
    let half = n_phi / 2;

    let mut radial = [0.0f64; 4];
    for (a, row) in (-1..3).enumerate() {
        let mut ir = ir0 + row;
        // Antipodal continuation for virtual negative radii.
        let mut phi_shift = 0usize;
        if ir < 0 {
            ir = -ir - 1;
            phi_shift = half;
        }
        let mut ir = ir as usize;
        if ir >= n_r {
            // Clamp and flag: the stencil extrapolates past the last ring.
            ir = n_r - 1;
            quality = QUALITY_EXTRAPOLATED;
        }
        let mut by_phi = [0.0f64; 4];
        for (b, col) in (-1..3).enumerate() {
            let iphi = (iphi0 + n_phi + phi_shift).wrapping_add_signed(col) % n_phi;
            let base = (ir * n_phi + iphi) * n_psi;
            let mut by_psi = [0.0f64; 4];
            for (c, dep) in (-1..3).enumerate() {
                let ipsi = (ipsi0 + n_psi).wrapping_add_signed(dep) % n_psi;
                by_psi[c] = values[base + ipsi];
            }
            by_phi[b] = catmull_rom(by_psi, tpsi);
        }
        radial[a] = catmull_rom(by_phi, tphi);
    }
    (catmull_rom(radial, tr), quality)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricField;
    use approx::assert_relative_eq;

    #[test]
    fn interpolation_reproduces_smooth_fields() {
        let m = MetricField::euclidean();
        let grid = super::super::BundleGrid::new(&m, 32, 32, 32).unwrap();
        let f = |x: Vector2<f64>, v: Vector2<f64>| (1.0 - x.norm_squared()) * (x.x + v.y) + 0.7;
        let u = grid.scalar_from_fn(false, f);
        for &(rx, ry, ang) in &[
            (0.31f64, 0.12f64, 0.4f64),
            (-0.52, 0.33, 2.1),
            (0.05, -0.07, 4.9),
            (0.62, 0.41, 1.0),
        ] {
            let x = Vector2::new(rx, ry);
            let v = Vector2::new(ang.cos(), ang.sin());
            let (got, q) = tricubic(&grid, &u.values, x, v);
            assert_eq!(q, QUALITY_FULL);
            assert_relative_eq!(got, f(x, v), epsilon = 5e-5);
        }
    }

    #[test]
    fn center_crossing_is_smooth() {
        // Points just across the center exercise the antipodal rows.
        let m = MetricField::euclidean();
        let grid = super::super::BundleGrid::new(&m, 16, 16, 16).unwrap();
        let f = |x: Vector2<f64>, v: Vector2<f64>| x.x * v.x + 2.0 * x.y + 1.0;
        let u = grid.scalar_from_fn(false, f);
        let v = Vector2::new(0.6, 0.8);
        for &t in &[-0.02, -0.005, 0.005, 0.02] {
            let x = Vector2::new(t, 0.3 * t);
            let (got, _) = tricubic(&grid, &u.values, x, v);
            assert_relative_eq!(got, f(x, v), epsilon = 1e-4);
        }
    }

    #[test]
    fn beyond_last_ring_is_flagged() {
        let m = MetricField::euclidean();
        let grid = super::super::BundleGrid::new(&m, 16, 16, 16).unwrap();
        let u = grid.lift_scalar(false, |x| x.x);
        let x = Vector2::new(0.999, 0.0);
        let (_, q) = tricubic(&grid, &u.values, x, Vector2::new(1.0, 0.0));
        assert_eq!(q, QUALITY_EXTRAPOLATED);
    }
}
