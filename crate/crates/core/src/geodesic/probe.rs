//! Empirical Lipschitz constants of the geodesic flow.

use nalgebra::Vector2;

use super::{integrate_geodesic, IntegrationOptions};
use crate::error::Result;
use crate::metric::MetricField;

/// State pair for the flow probe.
pub type StatePair = ((Vector2<f64>, Vector2<f64>), (Vector2<f64>, Vector2<f64>));

/// Per-time maxima of the flow expansion ratio.
#[derive(Debug, Clone)]
pub struct FlowLipschitzReport {
    pub times: Vec<f64>,
    pub max_ratio_at: Vec<f64>,
    /// Overall max of `d(phi_t z, phi_t zhat) / d(z, zhat)`.
    pub max_ratio: f64,
}

fn sm_distance(a: (Vector2<f64>, Vector2<f64>), b: (Vector2<f64>, Vector2<f64>)) -> f64 {
    ((a.0 - b.0).norm_squared() + (a.1 - b.1).norm_squared()).sqrt()
}

/// Track nearby state pairs along the flow and report the worst expansion
/// ratio at each probe time.
///
/// Pairs compared only on their common interval of existence; a coincident
/// pair contributes nothing.
pub fn flow_lipschitz_probe(
    metric: &MetricField,
    pairs: &[StatePair],
    times: &[f64],
) -> Result<FlowLipschitzReport> {
    let opts = IntegrationOptions::default();
    let mut max_ratio_at = vec![0.0f64; times.len()];
    let mut max_ratio = 0.0f64;
    for &(z, zh) in pairs {
        let d0 = sm_distance(z, zh);
        if d0 == 0.0 {
            continue;
        }
        let pa = integrate_geodesic(metric, z.0, z.1, &opts)?;
        let pb = integrate_geodesic(metric, zh.0, zh.1, &opts)?;
        let common = pa.tau_plus.min(pb.tau_plus);
        for (i, &t) in times.iter().enumerate() {
            if t > common {
                continue;
            }
            let sa = pa.state_at(t);
            let sb = pb.state_at(t);
            let ratio = sm_distance(sa, sb) / d0;
            max_ratio_at[i] = max_ratio_at[i].max(ratio);
            max_ratio = max_ratio.max(ratio);
        }
    }
    Ok(FlowLipschitzReport {
        times: times.to_vec(),
        max_ratio_at,
        max_ratio,
    })
}
