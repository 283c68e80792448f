//! Transfer of fields between the sphere bundles of two metrics over the
//! same base, along the radial map `s(x, v) = (x, v / |v|_target)`.

use nalgebra::Vector2;

use super::{BundleGrid, ScalarField, SectionN};
use crate::error::{Error, Result};

fn check_compatible(from: &BundleGrid, to: &BundleGrid) -> Result<()> {
    if from.shape() != to.shape() {
        return Err(Error::usage(format!(
            "bundle grids have different shapes: {:?} vs {:?}",
            from.shape(),
            to.shape()
        )));
    }
    Ok(())
}

/// Fiber angle (in the `from` frame) of the `from`-normalization of `w`.
fn pullback_angle(from: &BundleGrid, s: usize, w: Vector2<f64>) -> f64 {
    let node = &from.nodes[s];
    let n = ((node.g * w).dot(&w)).sqrt();
    let u = w / n;
    let c1 = (node.g * u).dot(&node.e1);
    let c2 = (node.g * u).dot(&node.e2);
    c2.atan2(c1).rem_euclid(std::f64::consts::TAU)
}

/// Periodic Catmull-Rom interpolation of one fiber of samples.
fn fiber_interp(samples: &[f64], psi: f64, dpsi: f64) -> f64 {
    let n = samples.len();
    let f = psi / dpsi;
    let i0 = f.floor() as usize % n;
    let t = f - f.floor();
    let v = |o: isize| samples[(i0 + n).wrapping_add_signed(o) % n];
    let p = [v(-1), v(0), v(1), v(2)];
    let c0 = 2.0 * p[1];
    let c1 = p[2] - p[0];
    let c2 = 2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3];
    let c3 = -p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3];
    0.5 * (c0 + t * (c1 + t * (c2 + t * c3)))
}

/// Pull a scalar field on the `from` bundle back to the `to` bundle:
/// the value at `(x, w)` is the `from`-field at `(x, w / |w|_from)`.
pub fn transfer_scalar(u: &ScalarField, from: &BundleGrid, to: &BundleGrid) -> Result<ScalarField> {
    check_compatible(from, to)?;
    from.check_shape(u.shape)?;
    let (_, _, n_psi) = to.shape();
    let mut values = vec![0.0; to.len()];
    for s in 0..to.nodes.len() {
        let fiber = &u.values[s * n_psi..(s + 1) * n_psi];
        for k in 0..n_psi {
            let idx = s * n_psi + k;
            let w = to.direction(idx);
            let psi_from = pullback_angle(from, s, w);
            values[idx] = fiber_interp(fiber, psi_from, from.dpsi);
        }
    }
    Ok(ScalarField {
        values,
        vanishes_on_boundary: u.vanishes_on_boundary,
        shape: to.shape(),
    })
}

/// Transfer a section of `N_from` to the `to` bundle: the ambient vector
/// is kept and projected onto the new orthogonal complement. Returns the
/// transferred section and the largest projection defect (the part of the
/// vector falling along the new flow direction).
pub fn transfer_section(
    v: &SectionN,
    from: &BundleGrid,
    to: &BundleGrid,
) -> Result<(SectionN, f64)> {
    check_compatible(from, to)?;
    from.check_shape(v.shape)?;
    let (_, _, n_psi) = to.shape();
    let mut coeffs = vec![0.0; to.len()];
    let mut defect = 0.0f64;
    for s in 0..to.nodes.len() {
        let fiber = &v.coeffs[s * n_psi..(s + 1) * n_psi];
        let node_from = &from.nodes[s];
        let node_to = &to.nodes[s];
        for k in 0..n_psi {
            let idx = s * n_psi + k;
            let w = to.direction(idx);
            let psi_from = pullback_angle(from, s, w);
            let a = fiber_interp(fiber, psi_from, from.dpsi);
            // Ambient vector of the from-section at the mapped state.
            let perp_from = -psi_from.sin() * node_from.e1 + psi_from.cos() * node_from.e2;
            let ambient = a * perp_from;
            let w_perp = to.direction_perp(idx);
            coeffs[idx] = (node_to.g * ambient).dot(&w_perp);
            defect = defect.max(((node_to.g * ambient).dot(&w)).abs());
        }
    }
    Ok((
        SectionN {
            coeffs,
            shape: to.shape(),
        },
        defect,
    ))
}

/// Per-node change-of-variables weight `|det(d s^{-1})|` for rewriting
/// integrals over the `from` bundle on the `to` (reference) bundle:
///
/// `integral_{S_from M} F dSigma_from = sum_to F(s^{-1}(node)) jac(node) w_to(node)`.
///
/// The weight splits into the base volume ratio `sqrt(det g_from / det g_to)`
/// and the fiber stretch `d psi_from / d psi_to` of the radial map.
pub fn radial_transfer_jacobian(from: &BundleGrid, to: &BundleGrid) -> Result<Vec<f64>> {
    check_compatible(from, to)?;
    let (_, _, n_psi) = to.shape();
    let mut jac = vec![0.0; to.len()];
    for s in 0..to.nodes.len() {
        let node_from = &from.nodes[s];
        let node_to = &to.nodes[s];
        let vol_ratio = node_from.sqrt_det / node_to.sqrt_det;
        for k in 0..n_psi {
            let idx = s * n_psi + k;
            let w = to.direction(idx);
            let w_perp = to.direction_perp(idx);
            // d/dpsi_to of w / |w|_from, evaluated analytically.
            let gf = &node_from.g;
            let n = ((gf * w).dot(&w)).sqrt();
            let du = w_perp / n - w * ((gf * w).dot(&w_perp)) / (n * n * n);
            let stretch = ((gf * du).dot(&du)).sqrt();
            jac[idx] = vol_ratio * stretch;
        }
    }
    Ok(jac)
}
