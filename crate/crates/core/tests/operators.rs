//! Cross-module operator checks: the integration-by-parts dualities, the
//! cross-bundle norm transfer, exit-time asymptotics and flow stability.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diskray::bundle::{radial_transfer_jacobian, transfer_scalar, BundleGrid, DerivativeMethod};
use diskray::geodesic::{flow_lipschitz_probe, second_fundamental_form, trace, IntegrationOptions};
use diskray::metric::{MetricField, MollifierSpec};
use diskray::transform::{integral_function, Target};
use diskray::verify::tolerances::DUALITY_REL_TOL;

/// Random smooth boundary-vanishing scalar field with low harmonics.
fn random_scalar(grid: &BundleGrid, seed: u64) -> diskray::ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
    grid.scalar_from_fn(true, move |x, v| {
        (1.0 - x.norm_squared())
            * (c[0]
                + c[1] * x.x
                + c[2] * x.y
                + c[3] * x.x * x.y
                + (c[4] + c[5] * x.x) * v.y
                + (c[6] + c[7] * x.y) * v.x)
    })
}

fn random_section(grid: &BundleGrid, seed: u64) -> diskray::SectionN {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
    grid.section_from_fn(move |x, v| {
        (1.0 - x.norm_squared()) * (c[0] + c[1] * x.x + c[2] * v.y + c[3] * x.y * v.x)
            + c[4] * 0.1
            + c[5] * 0.1 * v.x * v.y
    })
}

struct DualityDefects {
    x_scalar: f64,
    x_section: f64,
    vertical: f64,
    horizontal: f64,
}

/// Defects of the four integration-by-parts identities, relative to the
/// products of norms.
fn duality_defects(metric: &MetricField, n: (usize, usize, usize), seed: u64) -> DualityDefects {
    let grid = BundleGrid::new(metric, n.0, n.1, n.2).unwrap();
    let u = random_scalar(&grid, seed);
    let w = random_scalar(&grid, seed + 1);
    let vs = random_section(&grid, seed + 2);
    let ws = random_section(&grid, seed + 3);

    let norm_u = grid.l2_norm_scalar(&u).unwrap();
    let norm_w = grid.l2_norm_scalar(&w).unwrap();
    let norm_vs = grid.l2_norm_section(&vs).unwrap();
    let norm_ws = grid.l2_norm_section(&ws).unwrap();

    // <Xu, w> = -<u, Xw>.
    let (xu, _) = grid.apply_x(&u, DerivativeMethod::Stencil).unwrap();
    let (xw, _) = grid.apply_x(&w, DerivativeMethod::Stencil).unwrap();
    let x_scalar =
        (grid.inner_l2_scalar(&xu, &w).unwrap() + grid.inner_l2_scalar(&u, &xw).unwrap()).abs()
            / (norm_u * norm_w);

    // <XV, W> = -<V, XW>.
    let (xvs, _) = grid.apply_x_section(&vs).unwrap();
    let (xws, _) = grid.apply_x_section(&ws).unwrap();
    let x_section = (grid.inner_l2_section(&xvs, &ws).unwrap()
        + grid.inner_l2_section(&vs, &xws).unwrap())
    .abs()
        / (norm_vs * norm_ws);

    // <vgrad u, W> = -<u, vdiv W>.
    let vg = grid.v_grad(&u).unwrap();
    let dv = grid.v_div(&ws).unwrap();
    let vertical =
        (grid.inner_l2_section(&vg, &ws).unwrap() + grid.inner_l2_scalar(&u, &dv).unwrap()).abs()
            / (norm_u * norm_ws);

    // <hgrad u, W> = -<u, hdiv W>.
    let (hg, _) = grid.h_grad(&u).unwrap();
    let (dh, _) = grid.h_div(&ws).unwrap();
    let horizontal =
        (grid.inner_l2_section(&hg, &ws).unwrap() + grid.inner_l2_scalar(&u, &dh).unwrap()).abs()
            / (norm_u * norm_ws);

    DualityDefects {
        x_scalar,
        x_section,
        vertical,
        horizontal,
    }
}

#[test]
fn dualities_hold_at_reference_resolution() {
    for metric in [
        MetricField::euclidean(),
        MetricField::constant_curvature(0.8),
        MetricField::anisotropic(0.25, 0.15),
    ] {
        let d = duality_defects(&metric, (64, 64, 128), 17);
        for (name, defect) in [
            ("X scalar", d.x_scalar),
            ("X section", d.x_section),
            ("vertical", d.vertical),
            ("horizontal", d.horizontal),
        ] {
            assert!(
                defect <= DUALITY_REL_TOL,
                "{name} duality defect {defect:.3e} on {}",
                metric.id()
            );
        }
    }
}

#[test]
fn duality_defects_shrink_under_refinement() {
    let metric = MetricField::constant_curvature(0.8);
    let coarse = duality_defects(&metric, (32, 32, 64), 23);
    let fine = duality_defects(&metric, (64, 64, 128), 23);
    assert!(
        fine.horizontal < coarse.horizontal,
        "horizontal defect grew: {:.3e} -> {:.3e}",
        coarse.horizontal,
        fine.horizontal
    );
    assert!(
        fine.x_scalar < coarse.x_scalar,
        "X defect grew: {:.3e} -> {:.3e}",
        coarse.x_scalar,
        fine.x_scalar
    );
}

#[test]
fn transport_energy_transfers_across_bundles() {
    // |Xu|^2 on the smoothed rough bundle, natively vs through the
    // reference (flat) bundle with the radial-map weights.
    let rough = MetricField::c11_test(0.5)
        .mollify(&MollifierSpec::new(16))
        .unwrap();
    let flat = MetricField::euclidean();
    let n = (48, 48, 96);
    let grid_rough = BundleGrid::new(&rough, n.0, n.1, n.2).unwrap();
    let grid_flat = BundleGrid::new(&flat, n.0, n.1, n.2).unwrap();

    let u = grid_rough.scalar_from_fn(true, |x, v| (1.0 - x.norm_squared()) * (0.5 + x.x + v.y));
    let (xu, _) = grid_rough.apply_x(&u, DerivativeMethod::Stencil).unwrap();
    let native = grid_rough.inner_l2_scalar(&xu, &xu).unwrap();

    let moved = transfer_scalar(&xu, &grid_rough, &grid_flat).unwrap();
    let jac = radial_transfer_jacobian(&grid_rough, &grid_flat).unwrap();
    let mut weighted = 0.0;
    for (idx, (value, j)) in moved.values.iter().zip(&jac).enumerate() {
        weighted += value * value * j * grid_flat.weight(idx);
    }
    let rel = (native - weighted).abs() / native;
    assert!(
        rel <= 1e-2,
        "native {native:.6} vs reference-weighted {weighted:.6} (rel {rel:.3e})"
    );
}

#[test]
fn exit_time_asymptotics_match_boundary_curvature() {
    // tau(x, v) * S(v_par, v_par) / (2 <v, nu>) -> 1 as the inward
    // component shrinks.
    for metric in [
        MetricField::euclidean(),
        MetricField::constant_curvature(0.8),
    ] {
        let beta = 0.9f64;
        let x = Vector2::new(beta.cos(), beta.sin());
        let nu = diskray::geodesic::inward_normal(&metric, x).unwrap();
        let raw_t = Vector2::new(-beta.sin(), beta.cos());
        let mut tangent = raw_t / metric.norm_g(x, raw_t).unwrap();
        tangent -= metric.inner(x, tangent, nu).unwrap() * nu;
        tangent /= metric.norm_g(x, tangent).unwrap();
        let sff = second_fundamental_form(&metric, x, tangent).unwrap().value;
        let opts = IntegrationOptions::default();
        let mut last_ratio = f64::NAN;
        for k in 4..=10 {
            let eps = 2.0f64.powi(-k);
            let v = (eps * nu + (1.0 - eps * eps).sqrt() * tangent).normalize();
            let v = v / metric.norm_g(x, v).unwrap();
            let inward = metric.inner(x, v, nu).unwrap();
            let out = trace(&metric, x, v, &opts, |_| {}).unwrap();
            last_ratio = out.tau * sff / (2.0 * inward);
        }
        assert!(
            (last_ratio - 1.0).abs() <= 0.10,
            "asymptotic ratio {last_ratio:.4} on {}",
            metric.id()
        );
    }
}

#[test]
fn flow_lipschitz_constants_stable_across_smoothing_scales() {
    let base = MetricField::c11_test(0.5);
    let mut constants = Vec::new();
    for alpha in [16u32, 32] {
        let metric = base.mollify(&MollifierSpec::new(alpha)).unwrap();
        let mut pairs = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let r = rng.gen_range(0.0f64..0.8);
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = Vector2::new(r * a.cos(), r * a.sin());
            let d = rng.gen_range(0.0..std::f64::consts::TAU);
            let dir = Vector2::new(d.cos(), d.sin());
            let v = dir / metric.norm_g(x, dir).unwrap();
            let xh = x + Vector2::new(1e-3, -5e-4);
            let dirh = dir + Vector2::new(0.0, 1e-3);
            let vh = dirh / metric.norm_g(xh, dirh).unwrap();
            pairs.push(((x, v), (xh, vh)));
        }
        let report = flow_lipschitz_probe(&metric, &pairs, &[0.2, 0.5, 0.9, 1.4]).unwrap();
        assert!(report.max_ratio.is_finite() && report.max_ratio > 0.0);
        constants.push(report.max_ratio);
    }
    let rel = (constants[0] - constants[1]).abs() / constants[1];
    assert!(
        rel <= 0.2,
        "probe constants differ across scales: {:.4} vs {:.4}",
        constants[0],
        constants[1]
    );
}

#[test]
fn sigma_min_is_stable_under_ray_doubling() {
    // Injectivity is a property of the operator, not the ray sample: the
    // weighted smallest singular value moves little when rays double.
    use diskray::transform::{
        assemble_forward, inflow_samples, nullspace_analysis, ForwardBasis, PixelBasis,
        TransformKind,
    };
    let metric = MetricField::euclidean();
    let basis = PixelBasis::clipped(12, 0.25).unwrap();
    let sigma_at = |n: usize| -> f64 {
        let rays = inflow_samples(&metric, n, n).unwrap();
        let a = assemble_forward(
            &metric,
            &rays,
            &ForwardBasis::Pixel(&basis),
            TransformKind::Scalar,
        )
        .unwrap();
        nullspace_analysis(&a, None).unwrap().sigma_min
    };
    let s1 = sigma_at(48);
    let s2 = sigma_at(96);
    let rel = (s1 - s2).abs() / s2;
    assert!(
        rel <= 0.2,
        "sigma_min moved {rel:.2} under ray doubling ({s1:.4e} vs {s2:.4e})"
    );
}

#[test]
fn short_chords_determine_boundary_values() {
    // Averages of a function over shrinking chords anchored at a boundary
    // point converge to its boundary value.
    let metric = MetricField::constant_curvature(0.8);
    let f = |x: Vector2<f64>| 0.4 + x.x - 0.3 * x.y * x.y;
    let beta = 1.1f64;
    let x_b = Vector2::new(beta.cos(), beta.sin());
    let nu = diskray::geodesic::inward_normal(&metric, x_b).unwrap();
    let raw_t = Vector2::new(-beta.sin(), beta.cos());
    let mut tangent = raw_t / metric.norm_g(x_b, raw_t).unwrap();
    tangent -= metric.inner(x_b, tangent, nu).unwrap() * nu;
    tangent /= metric.norm_g(x_b, tangent).unwrap();

    let opts = IntegrationOptions::default();
    let mut errors = Vec::new();
    for k in 3..=8 {
        let eps = 2.0f64.powi(-k);
        let v = eps * nu + (1.0 - eps * eps).sqrt() * tangent;
        let v = v / metric.norm_g(x_b, v).unwrap();
        let mut integral = 0.0;
        let out = trace(&metric, x_b, v, &opts, |s| {
            let h = s.t1 - s.t0;
            let (xm, _) = s.midpoint();
            integral += (h / 6.0) * (f(s.x0) + 4.0 * f(xm) + f(s.x1));
        })
        .unwrap();
        errors.push((integral / out.tau - f(x_b)).abs());
    }
    assert!(
        errors.last().unwrap() < errors.first().unwrap(),
        "chord averages do not converge: {errors:?}"
    );
    // Convergence is first order in the chord length.
    assert!(
        errors.last().unwrap() < &5e-2,
        "final error {:.3e}",
        errors.last().unwrap()
    );
}

#[test]
fn vertical_gradient_of_integral_function_has_stable_h1nx_norm() {
    // Discrete diagnostic for the regularity of vgrad u^f: its H1(N, X)
    // norm settles under refinement.
    let metric = MetricField::euclidean();
    let f = |x: Vector2<f64>| 1.0 - x.norm_squared();
    let norm_at = |n: usize| -> f64 {
        let grid = BundleGrid::new(&metric, n, n, 2 * n).unwrap();
        let (u, _) = integral_function(&metric, &grid, &Target::Scalar(&f)).unwrap();
        let vg = grid.v_grad(&u).unwrap();
        grid.norm(
            diskray::bundle::Quantity::Section(&vg),
            diskray::bundle::FieldNorm::H1NX,
        )
        .unwrap()
    };
    let n1 = norm_at(24);
    let n2 = norm_at(48);
    assert!(
        (n1 - n2).abs() / n2 < 0.05,
        "H1(N,X) norm of vgrad u^f unstable: {n1:.5} vs {n2:.5}"
    );
}

#[test]
fn zero_integrand_gives_identically_zero_pipeline() {
    // Everything downstream of a vanishing integrand is exactly zero.
    let metric = MetricField::constant_curvature(0.8);
    let grid = BundleGrid::new(&metric, 16, 16, 32).unwrap();
    let zero = |_: Vector2<f64>| 0.0;
    let (u, _) = integral_function(&metric, &grid, &Target::Scalar(&zero)).unwrap();
    assert_eq!(u.max_abs(), 0.0);
    let (xu, _) = grid.apply_x(&u, DerivativeMethod::Stencil).unwrap();
    assert_eq!(xu.max_abs(), 0.0);
    let vg = grid.v_grad(&u).unwrap();
    assert_eq!(vg.max_abs(), 0.0);
}
