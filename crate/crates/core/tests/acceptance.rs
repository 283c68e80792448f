//! Acceptance suite: one test per acceptance criterion, each printing a
//! pass/fail line with the measured quantities (run with `--nocapture` to
//! see them all).

use std::time::Instant;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diskray::bundle::{BundleGrid, DerivativeMethod};
use diskray::geodesic::{self, IntegrationOptions};
use diskray::metric::MetricField;
use diskray::transform::{
    assemble_forward, inflow_samples, integral_function, nullspace_analysis, reconstruct, xray,
    ForwardBasis, PixelBasis, SplineOneFormBasis, Target, TransformKind,
};
use diskray::verify::{
    self, b1_estimate, simplicity_report, tolerances, ConditionVerdict, SimplicityOptions,
};

fn announce(criterion: usize, pass: bool, detail: &str) {
    println!(
        "criterion {:02}: {} — {}",
        criterion,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
    assert!(pass, "criterion {criterion}: {detail}");
}

#[test]
fn acceptance_01_exit_time_oracle() {
    let start = Instant::now();
    let metric = MetricField::euclidean();
    let opts = IntegrationOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let r = rng.gen_range(0.0f64..1.0).sqrt() * 0.999;
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let x = Vector2::new(r * a.cos(), r * a.sin());
        let d = rng.gen_range(0.0..std::f64::consts::TAU);
        let v = Vector2::new(d.cos(), d.sin());
        let (tau, _) = geodesic::exit_time(&metric, x, v, &opts).unwrap();
        worst = worst.max((tau - geodesic::euclidean_exit_time(x, v)).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    announce(
        1,
        worst <= tolerances::EXIT_TIME_ABS_TOL && elapsed <= 10.0,
        &format!("max |tau - chord root| = {worst:.2e} over 1e4 rays in {elapsed:.1} s"),
    );
}

#[test]
fn acceptance_02_pestov_identity() {
    let start = Instant::now();
    let resolutions = [(32, 32, 64), (64, 64, 128)];
    let field = |g: &BundleGrid| g.scalar_from_polar(true, |r, _, psi| (1.0 - r * r) * psi.sin());

    let flat = verify::pestov_residual(
        &MetricField::euclidean(),
        &resolutions,
        tolerances::PESTOV_REL_TOL_FLAT,
        field,
    )
    .unwrap();
    let curved_field = |g: &BundleGrid| {
        g.scalar_from_polar(true, |r, phi, psi| {
            (1.0 - r * r) * (r * phi.cos() + psi.sin() * psi.cos())
        })
    };
    let curved = verify::pestov_residual(
        &MetricField::constant_curvature(0.8),
        &resolutions,
        tolerances::PESTOV_REL_TOL_CURVED,
        curved_field,
    )
    .unwrap();
    let flat_growth = flat.trend_growth().unwrap_or(f64::INFINITY);
    let curved_growth = curved.trend_growth().unwrap_or(f64::INFINITY);
    let elapsed = start.elapsed().as_secs_f64();
    announce(
        2,
        flat.pass
            && curved.pass
            && flat_growth >= tolerances::TREND_GROWTH_MIN
            && curved_growth >= tolerances::TREND_GROWTH_MIN
            && elapsed <= 120.0,
        &format!(
            "flat residual {:.2e} (x{:.1} at half res), curved residual {:.2e} (x{:.1}), {elapsed:.1} s",
            flat.residual_rel, flat_growth, curved.residual_rel, curved_growth
        ),
    );
}

#[test]
fn acceptance_03_cancellation_lemma() {
    let closed = verify::oneform_cancellation(
        &MetricField::euclidean(),
        &[(64, 64, 128)],
        tolerances::CANCELLATION_REL_TOL_CLOSED,
        |_| (1.0, 0.0),
    )
    .unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    let anchored = (closed.lhs - pi2).abs() / pi2 <= tolerances::CANCELLATION_REL_TOL_CLOSED
        && (closed.rhs - pi2).abs() / pi2 <= tolerances::CANCELLATION_REL_TOL_CLOSED;

    // Random Lipschitz (kinked) 1-form on the curved metric.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let coefs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
    let generic = verify::oneform_cancellation(
        &MetricField::constant_curvature(0.8),
        &[(64, 64, 128)],
        tolerances::CANCELLATION_REL_TOL_GENERIC,
        move |x| {
            (
                coefs[0] + coefs[1] * x.y + coefs[2] * (x.x - 0.2).abs(),
                coefs[3] + coefs[4] * x.x + coefs[5] * (x.y + 0.1).abs(),
            )
        },
    )
    .unwrap();
    announce(
        3,
        closed.pass && anchored && generic.pass,
        &format!(
            "dx1 sides ({:.6}, {:.6}) vs pi^2 = {:.6}; generic residual {:.2e}",
            closed.lhs, closed.rhs, pi2, generic.residual_rel
        ),
    );
}

#[test]
fn acceptance_04_commutator_identity() {
    let resolutions = [(32, 32, 64), (64, 64, 128)];
    // Fiber-dependent u: for a lifted u every term projects the section
    // onto its first fiber harmonic and the check degenerates (it cannot
    // even distinguish conformal metrics).
    let u = |g: &BundleGrid| {
        g.scalar_from_polar(true, |r, phi, psi| {
            (1.0 - r * r) * (0.7 + r * phi.cos() + psi.sin())
        })
    };
    let v = |g: &BundleGrid| {
        g.section_from_fn(|x, w| {
            (1.0 + 0.5 * x.x + 0.3 * x.y) * (0.8 + 0.4 * w.x) + 0.25 * w.x * w.y
        })
    };
    let flat = verify::commutator_check(
        &MetricField::euclidean(),
        &resolutions,
        tolerances::COMMUTATOR_REL_TOL_FLAT,
        u,
        v,
    )
    .unwrap();
    let rough_metric = MetricField::c11_test(0.5)
        .mollify(&diskray::metric::MollifierSpec::new(16))
        .unwrap();
    let rough = verify::commutator_check(
        &rough_metric,
        &resolutions,
        tolerances::COMMUTATOR_REL_TOL_ROUGH,
        u,
        v,
    )
    .unwrap();
    announce(
        4,
        flat.pass && rough.pass,
        &format!(
            "flat residual {:.2e}, smoothed rough-metric residual {:.2e}",
            flat.residual_rel, rough.residual_rel
        ),
    );
}

#[test]
fn acceptance_05_santalo_consistency() {
    let metric = MetricField::euclidean();
    let grid = BundleGrid::new(&metric, 64, 64, 128).unwrap();
    let rays = inflow_samples(&metric, 64, 64).unwrap();
    let ones = grid.lift_scalar(false, |_| 1.0);
    let constant = verify::santalo_check(
        &metric,
        &grid,
        &rays,
        &ones,
        tolerances::SANTALO_REL_TOL_CONST,
    )
    .unwrap();
    let two_pi_sq = 2.0 * std::f64::consts::PI.powi(2);
    let anchored = (constant.lhs - two_pi_sq).abs() / two_pi_sq <= 0.005
        && (constant.rhs - two_pi_sq).abs() / two_pi_sq <= 0.005;

    let bump = grid.lift_scalar(false, |x: Vector2<f64>| {
        let d = (1.0 - x.norm()) / 0.15;
        (-d * d).exp()
    });
    let concentrated = verify::santalo_check(
        &metric,
        &grid,
        &rays,
        &bump,
        tolerances::SANTALO_REL_TOL_BUMP,
    )
    .unwrap();
    announce(
        5,
        constant.pass && anchored && concentrated.pass,
        &format!(
            "F=1 sides ({:.4}, {:.4}) vs 2pi^2 = {:.4}; boundary bump residual {:.2e}",
            constant.lhs, constant.rhs, two_pi_sq, concentrated.residual_rel
        ),
    );
}

#[test]
fn acceptance_06_mollification_convergence() {
    let metric = MetricField::c11_test(0.5);
    let study = verify::mollify_study(&metric, &[4, 8, 16, 32]).unwrap();
    let mut detail = String::new();
    for (j, label) in study.norm_labels.iter().enumerate() {
        detail += &format!(
            "{label}: {:.3e} -> {:.3e}; ",
            study.distances[0][j], study.distances[3][j]
        );
    }
    announce(6, study.monotone, &detail);
}

#[test]
fn acceptance_07_simplicity_taxonomy() {
    let opts = SimplicityOptions::default();

    let euclid = simplicity_report(&MetricField::euclidean(), &opts).unwrap();
    let euclid_ok = euclid.all_pass;

    // Hemisphere boundary: travel-time regularity fails; the dyadic ratio
    // slope must diverge at least at the cubic-root law rate, and the
    // boundary is totally geodesic.
    let hemi = simplicity_report(&MetricField::constant_curvature(1.0), &opts).unwrap();
    let hemi_ok = hemi.b3.verdict == ConditionVerdict::Fail
        && hemi.b3.value >= tolerances::TAU_SLOPE_LAW - tolerances::TAU_SLOPE_TOL
        && hemi.sff_min.abs() <= tolerances::SFF_TRANSITION_ABS_TOL
        && hemi.sff_max.abs() <= tolerances::SFF_TRANSITION_ABS_TOL;

    // Beyond the hemisphere: coercivity fails and conjugate points appear
    // at distance pi.
    let over = simplicity_report(&MetricField::constant_curvature(1.25), &opts).unwrap();
    let conj = over.conjugate_distance.unwrap_or(f64::NAN);
    let over_ok = over.b1.verdict == ConditionVerdict::Fail
        && (conj - std::f64::consts::PI).abs() <= tolerances::JACOBI_ZERO_TOL;

    announce(
        7,
        euclid_ok && hemi_ok && over_ok,
        &format!(
            "euclidean all-pass = {}; c=1: B3 {:?} slope {:.3}, S in [{:.1e}, {:.1e}]; c=1.25: B1 {:?}, conjugate at {:.5}",
            euclid_ok,
            hemi.b3.verdict,
            hemi.b3.value,
            hemi.sff_min,
            hemi.sff_max,
            over.b1.verdict,
            conj
        ),
    );
}

#[test]
fn acceptance_08_b1_constant() {
    let start = Instant::now();
    let est = b1_estimate(&MetricField::euclidean(), 64, 64, 8).unwrap();
    let expected = (std::f64::consts::PI / 2.0).powi(2);
    let rel = (est.epsilon - expected).abs() / expected;
    let elapsed = start.elapsed().as_secs_f64();
    announce(
        8,
        rel <= tolerances::B1_EPSILON_REL_TOL && elapsed <= 300.0,
        &format!(
            "epsilon = {:.4} vs (pi/2)^2 = {:.4} ({:.2}% off) in {elapsed:.1} s; restarts agree: {}",
            est.epsilon,
            expected,
            100.0 * rel,
            est.restarts_agree
        ),
    );
}

#[test]
fn acceptance_09_scalar_injectivity_witness() {
    let metric = MetricField::euclidean();
    let rays = inflow_samples(&metric, 64, 64).unwrap();
    assert_eq!(rays.len(), 4096);
    let basis = PixelBasis::clipped(24, 0.25).unwrap();
    let matrix = assemble_forward(
        &metric,
        &rays,
        &ForwardBasis::Pixel(&basis),
        TransformKind::Scalar,
    )
    .unwrap();
    let report = nullspace_analysis(&matrix, None).unwrap();

    let phantom = |x: Vector2<f64>| 1.0 - x.norm_squared();
    let data: Vec<f64> = xray(&metric, &Target::Scalar(&phantom), &rays)
        .unwrap()
        .iter()
        .map(|v| v.value)
        .collect();
    let coeffs = reconstruct(&matrix, &data, 1e-6).unwrap();
    let truth = basis.project(phantom);
    let err = basis.relative_l2_error(&coeffs, &truth);
    announce(
        9,
        report.null_dimension == 0 && err <= tolerances::RECONSTRUCTION_REL_TOL,
        &format!(
            "null dim {} (sigma_min/sigma_max = {:.2e}); phantom error {:.2}%",
            report.null_dimension,
            report.sigma_min / report.sigma_max,
            100.0 * err
        ),
    );
}

#[test]
fn acceptance_10_oneform_gauge_structure() {
    let metric = MetricField::euclidean();
    let rays = inflow_samples(&metric, 48, 48).unwrap();
    let basis = SplineOneFormBasis::new(12, 0.3).unwrap();
    let matrix = assemble_forward(
        &metric,
        &rays,
        &ForwardBasis::SplineOneForm(&basis),
        TransformKind::OneForm,
    )
    .unwrap();
    let gauge = basis.gauge_vectors();
    let report = nullspace_analysis(&matrix, Some(&gauge)).unwrap();
    let max_angle = report
        .principal_angles_deg
        .as_ref()
        .unwrap()
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);

    // Data-level gauge invariance: shifting by an exact differential moves
    // no ray integral.
    let h = |x: Vector2<f64>| (x.y, 0.3 * x.x * x.x);
    let dp = |x: Vector2<f64>| {
        // p = 0.7 (1 - |x|^2) x2.
        (-1.4 * x.x * x.y, 0.7 * (1.0 - x.x * x.x - 3.0 * x.y * x.y))
    };
    let dev = verify::gauge_invariance_max_deviation(&metric, &rays, h, dp).unwrap();

    announce(
        10,
        report.null_dimension == basis.gauge_dimension()
            && max_angle <= tolerances::GAUGE_ANGLE_TOL_DEG
            && dev <= tolerances::GAUGE_PER_RAY_TOL,
        &format!(
            "null dim {} = gauge dim {}, max principal angle {:.2e} deg, per-ray gauge shift {:.2e}",
            report.null_dimension,
            basis.gauge_dimension(),
            max_angle,
            dev
        ),
    );
}

#[test]
fn acceptance_11_ftc_pipeline() {
    let metric = MetricField::euclidean();
    let f = |x: Vector2<f64>| 1.0 - x.norm_squared();
    let residual_at = |n: usize| -> f64 {
        let grid = BundleGrid::new(&metric, n, n, 2 * n).unwrap();
        let (u, _) = integral_function(&metric, &grid, &Target::Scalar(&f)).unwrap();
        let (xu, _) = grid.apply_x(&u, DerivativeMethod::Stencil).unwrap();
        let defect = grid
            .scalar_from_values(
                xu.values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v + f(grid.position(i)))
                    .collect(),
                false,
            )
            .unwrap();
        grid.l2_norm_scalar(&defect).unwrap()
    };
    let r16 = residual_at(16);
    let r32 = residual_at(32);
    let r64 = residual_at(64);
    announce(
        11,
        r16 / r32 >= 1.5 && r32 / r64 >= 1.5,
        &format!(
            "|X u^f + f| residuals {r16:.3e} -> {r32:.3e} -> {r64:.3e} (ratios {:.2}, {:.2})",
            r16 / r32,
            r32 / r64
        ),
    );
}
