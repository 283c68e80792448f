//! Shared fixtures for the benchmark suite.

use diskray::bundle::BundleGrid;
use diskray::metric::MetricField;

pub fn cap_metric() -> MetricField {
    MetricField::constant_curvature(0.8)
}

pub fn small_grid(metric: &MetricField) -> BundleGrid {
    BundleGrid::new(metric, 32, 32, 64).expect("grid builds")
}
