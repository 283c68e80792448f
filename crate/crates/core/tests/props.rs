//! Property tests for structural invariants.

use nalgebra::Vector2;
use proptest::prelude::*;

use diskray::geodesic::{self, IntegrationOptions};
use diskray::metric::{ConformalProfile, MetricField};
use diskray::transform::{inflow_samples, xray, Target};

fn disk_point() -> impl Strategy<Value = Vector2<f64>> {
    (0.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(u, a)| {
        let r = u.sqrt() * 0.98;
        Vector2::new(r * a.cos(), r * a.sin())
    })
}

fn direction() -> impl Strategy<Value = Vector2<f64>> {
    (0.0f64..std::f64::consts::TAU).prop_map(|a| Vector2::new(a.cos(), a.sin()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn euclidean_exit_times_match_the_chord_root(x in disk_point(), v in direction()) {
        let metric = MetricField::euclidean();
        let (tau, tau_minus) = geodesic::exit_time(
            &metric, x, v, &IntegrationOptions::default()).unwrap();
        let expected = geodesic::euclidean_exit_time(x, v);
        prop_assert!((tau - expected).abs() < 1e-8, "tau {tau} vs {expected}");
        let expected_back = -geodesic::euclidean_exit_time(x, -v);
        prop_assert!((tau_minus - expected_back).abs() < 1e-8);
    }

    #[test]
    fn conformal_metrics_stay_symmetric_positive(
        a in -0.4f64..0.7,
        x in disk_point(),
    ) {
        let metric = MetricField::conformal(ConformalProfile::Quadratic { a });
        let geo = metric.eval_geometry(x).unwrap();
        prop_assert_eq!(geo.g[(0, 1)], geo.g[(1, 0)]);
        prop_assert!(geo.sqrt_det > 0.0);
        let prod = geo.g * geo.g_inv;
        prop_assert!((prod[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flow_additivity_on_the_cap(x in disk_point(), v in direction(), frac in 0.1f64..0.9) {
        let metric = MetricField::constant_curvature(0.8);
        let v = v / metric.norm_g(x, v).unwrap();
        let opts = IntegrationOptions::default();
        let (tau, _) = geodesic::exit_time(&metric, x, v, &opts).unwrap();
        let s = frac * tau;
        let (xs, vs, reached) = geodesic::flow(&metric, x, v, s, &opts).unwrap();
        prop_assert!(reached);
        let vs = vs / metric.norm_g(xs, vs).unwrap();
        let (tau_s, _) = geodesic::exit_time(&metric, xs, vs, &opts).unwrap();
        prop_assert!((tau_s - (tau - s)).abs() < 1e-8, "additivity defect {}", (tau_s - (tau - s)).abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn transform_is_linear_and_positive(
        c0 in -1.0f64..1.0,
        c1 in -1.0f64..1.0,
        scale in 0.1f64..2.0,
    ) {
        let metric = MetricField::euclidean();
        let rays = inflow_samples(&metric, 6, 6).unwrap();
        let f = move |x: Vector2<f64>| c0 + c1 * x.x;
        let g = move |x: Vector2<f64>| 0.5 - x.norm_squared() * c1;
        let combined = move |x: Vector2<f64>| f(x) + scale * g(x);
        let vf = xray(&metric, &Target::Scalar(&f), &rays).unwrap();
        let vg = xray(&metric, &Target::Scalar(&g), &rays).unwrap();
        let vc = xray(&metric, &Target::Scalar(&combined), &rays).unwrap();
        for i in 0..rays.len() {
            let expected = vf[i].value + scale * vg[i].value;
            prop_assert!((vc[i].value - expected).abs() < 1e-10);
        }
        // Positivity: nonnegative integrands integrate nonnegatively.
        let pos = move |x: Vector2<f64>| (c0 + c1 * x.x).abs();
        let vp = xray(&metric, &Target::Scalar(&pos), &rays).unwrap();
        for v in &vp {
            prop_assert!(v.value >= 0.0);
        }
    }
}
