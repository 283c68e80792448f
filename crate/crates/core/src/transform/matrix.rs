//! Dense forward matrices, their null spaces and regularized inversion.

use nalgebra::{DMatrix, DVector, Vector2};
use rayon::prelude::*;

use super::basis::{PixelBasis, SplineOneFormBasis};
use super::InflowSample;
use crate::error::{Error, Result};
use crate::geodesic::{self, IntegrationOptions, StepSample, TerminationStatus};
use crate::metric::MetricField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Scalar,
    OneForm,
}

/// Basis handed to the assembler.
pub enum ForwardBasis<'a> {
    Pixel(&'a PixelBasis),
    SplineOneForm(&'a SplineOneFormBasis),
}

/// The discretized forward operator: inflow-ray rows by basis-coefficient
/// columns, stored with the Santalo ray weights.
#[derive(Debug, Clone)]
pub struct TransformMatrix {
    pub entries: DMatrix<f64>,
    pub ray_weights: DVector<f64>,
    pub kind: TransformKind,
    pub basis_descriptor: String,
    pub metric_id: String,
    /// Rays that failed to exit (rows zeroed).
    pub dropped_rays: Vec<usize>,
    /// `(boundary angle, inward angle)` per row.
    pub ray_keys: Vec<(f64, f64)>,
}

fn clamp_to_disk(x: Vector2<f64>) -> Vector2<f64> {
    let r2 = x.norm_squared();
    if r2 >= 1.0 {
        x * ((1.0 - 1e-12) / r2.sqrt())
    } else {
        x
    }
}

/// Cubic Hermite position along one integrator interval and the exact
/// derivative of that interpolant.
///
/// Using the interpolant's own derivative as the quadrature velocity makes
/// integrals of exact gradients telescope: the per-interval integral of
/// `grad p . velocity` is `p(end) - p(start)` along the interpolated path.
fn hermite_state(s: &StepSample, t: f64) -> (Vector2<f64>, Vector2<f64>) {
    let h = s.t1 - s.t0;
    let t2 = t * t;
    let t3 = t2 * t;
    let x = s.x0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + s.v0 * ((t3 - 2.0 * t2 + t) * h)
        + s.x1 * (-2.0 * t3 + 3.0 * t2)
        + s.v1 * ((t3 - t2) * h);
    let dx = s.x0 * ((6.0 * t2 - 6.0 * t) / h)
        + s.v0 * (3.0 * t2 - 4.0 * t + 1.0)
        + s.x1 * ((-6.0 * t2 + 6.0 * t) / h)
        + s.v1 * (3.0 * t2 - 2.0 * t);
    (x, dx)
}

/// Deposit the Simpson quadrature of one (sub)interval, recursively
/// splitting where the path crosses a basis break line so each piece sees
/// a smooth integrand.
fn deposit_split(
    sample: &StepSample,
    s0: f64,
    s1: f64,
    depth: u32,
    cell: f64,
    deposit: &mut impl FnMut(Vector2<f64>, Vector2<f64>, f64),
) {
    let h = sample.t1 - sample.t0;
    let (x0, _) = hermite_state(sample, s0);
    let (x1, _) = hermite_state(sample, s1);
    let cell_of = |x: Vector2<f64>| {
        (
            ((x.x + 1.0) / cell).floor() as i64,
            ((x.y + 1.0) / cell).floor() as i64,
        )
    };
    if depth < 48 && cell_of(x0) != cell_of(x1) {
        let mid = 0.5 * (s0 + s1);
        deposit_split(sample, s0, mid, depth + 1, cell, deposit);
        deposit_split(sample, mid, s1, depth + 1, cell, deposit);
        return;
    }
    let span = (s1 - s0) * h;
    let (xa, va) = hermite_state(sample, s0);
    let (xm, vm) = hermite_state(sample, 0.5 * (s0 + s1));
    let (xb, vb) = hermite_state(sample, s1);
    deposit(xa, va, span / 6.0);
    deposit(xm, vm, 4.0 * span / 6.0);
    deposit(xb, vb, span / 6.0);
}

/// Assemble the forward matrix over the given rays.
///
/// Entries are composite Simpson quadratures of the basis functions along
/// the traced rays (contracted with the velocity for 1-form columns).
pub fn assemble_forward(
    metric: &MetricField,
    rays: &[InflowSample],
    basis: &ForwardBasis<'_>,
    kind: TransformKind,
) -> Result<TransformMatrix> {
    if rays.is_empty() {
        return Err(Error::usage("assemble_forward needs at least one ray"));
    }
    let (cols, descriptor) = match (basis, kind) {
        (ForwardBasis::Pixel(p), TransformKind::Scalar) => (p.len(), p.descriptor()),
        (ForwardBasis::Pixel(p), TransformKind::OneForm) => {
            (2 * p.len(), format!("{}_oneform", p.descriptor()))
        }
        (ForwardBasis::SplineOneForm(s), TransformKind::OneForm) => (s.columns(), s.descriptor()),
        (ForwardBasis::SplineOneForm(_), TransformKind::Scalar) => {
            return Err(Error::usage(
                "the mixed-degree spline basis only discretizes 1-forms",
            ));
        }
    };
    if cols == 0 {
        return Err(Error::usage("forward basis has no columns"));
    }

    let cell = match basis {
        ForwardBasis::Pixel(p) => 2.0 / p.n as f64,
        ForwardBasis::SplineOneForm(s) => 2.0 / s.n as f64,
    };
    let opts = IntegrationOptions::default();
    let rows: Vec<Result<(Vec<f64>, bool)>> = rays
        .par_iter()
        .map(|ray| {
            let mut row = vec![0.0; cols];
            let mut scratch: Vec<(usize, f64)> = Vec::with_capacity(4);
            {
                let mut deposit = |x: Vector2<f64>, v: Vector2<f64>, qw: f64| {
                    let x = clamp_to_disk(x);
                    match (basis, kind) {
                        (ForwardBasis::Pixel(p), TransformKind::Scalar) => {
                            if let Some(col) = p.locate(x) {
                                row[col] += qw;
                            }
                        }
                        (ForwardBasis::Pixel(p), TransformKind::OneForm) => {
                            if let Some(col) = p.locate(x) {
                                row[col] += qw * v.x;
                                row[p.len() + col] += qw * v.y;
                            }
                        }
                        (ForwardBasis::SplineOneForm(s), TransformKind::OneForm) => {
                            scratch.clear();
                            s.eval_comp1(x, &mut scratch);
                            for &(col, val) in scratch.iter() {
                                row[col] += qw * val * v.x;
                            }
                            scratch.clear();
                            s.eval_comp2(x, &mut scratch);
                            for &(col, val) in scratch.iter() {
                                row[col] += qw * val * v.y;
                            }
                        }
                        _ => unreachable!(),
                    }
                };
                let outcome = geodesic::trace(metric, ray.x, ray.v, &opts, |s: &StepSample| {
                    deposit_split(s, 0.0, 1.0, 0, cell, &mut deposit);
                })?;
                if outcome.status == TerminationStatus::StepLimit {
                    return Ok((vec![0.0; cols], false));
                }
            }
            Ok((row, true))
        })
        .collect();

    let mut entries = DMatrix::zeros(rays.len(), cols);
    let mut dropped = Vec::new();
    for (i, item) in rows.into_iter().enumerate() {
        let (row, exited) = item?;
        if !exited {
            dropped.push(rays[i].ray_id);
        }
        for (j, v) in row.into_iter().enumerate() {
            entries[(i, j)] = v;
        }
    }
    Ok(TransformMatrix {
        entries,
        ray_weights: DVector::from_iterator(rays.len(), rays.iter().map(|r| r.weight)),
        kind,
        basis_descriptor: descriptor,
        metric_id: metric.id().to_string(),
        dropped_rays: dropped,
        ray_keys: rays
            .iter()
            .map(|r| (r.boundary_angle, r.inward_angle))
            .collect(),
    })
}

/// Null-space structure of a forward matrix.
#[derive(Debug, Clone)]
pub struct NullspaceReport {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Number of singular values below `1e-8 * sigma_max`.
    pub null_dimension: usize,
    /// All singular values, ascending.
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of the numerical null space (columns).
    pub null_basis: DMatrix<f64>,
    pub duplicate_rays: usize,
    /// Principal angles (degrees) between the null space and the supplied
    /// gauge space, when one is given.
    pub principal_angles_deg: Option<Vec<f64>>,
    pub gauge_dimension: Option<usize>,
}

const NULL_THRESHOLD_REL: f64 = 1e-8;

/// Singular spectrum and numerical null space of the weighted matrix
/// `sqrt(W) A`, with the optional comparison against a gauge space given
/// by coefficient vectors.
///
/// Duplicate rays are detected (and reported) before the decomposition.
pub fn nullspace_analysis(
    matrix: &TransformMatrix,
    gauge: Option<&[Vec<f64>]>,
) -> Result<NullspaceReport> {
    let rows = matrix.entries.nrows();
    let cols = matrix.entries.ncols();
    if rows < cols {
        return Err(Error::usage(format!(
            "null-space analysis wants rows >= columns (got {rows} x {cols})"
        )));
    }

    // Duplicate detection on quantized ray keys.
    let mut keys: Vec<(i64, i64)> = matrix
        .ray_keys
        .iter()
        .map(|&(b, t)| ((b / 1e-12) as i64, (t / 1e-12) as i64))
        .collect();
    keys.sort_unstable();
    let duplicate_rays = keys.windows(2).filter(|w| w[0] == w[1]).count();

    // Weighted Gram matrix.
    let mut weighted = matrix.entries.clone();
    for i in 0..rows {
        let w = matrix.ray_weights[i].sqrt();
        for j in 0..cols {
            weighted[(i, j)] *= w;
        }
    }
    let gram = weighted.transpose() * &weighted;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let singular_values: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
        .collect();
    let sigma_max = *singular_values.last().unwrap();

    // Validate small Gram eigenvalues directly on the matrix: squares of
    // tiny singular values drown in the Gram round-off, the product
    // |sqrt(W) A q| does not.
    let threshold = NULL_THRESHOLD_REL * sigma_max;
    let mut null_cols = Vec::new();
    let mut sigma_min = f64::INFINITY;
    for (rank, &i) in order.iter().enumerate() {
        let candidate = singular_values[rank] <= threshold * 50.0;
        let q = eig.eigenvectors.column(i);
        let direct = (&weighted * q).norm();
        sigma_min = sigma_min.min(direct);
        if candidate && direct <= threshold {
            null_cols.push(i);
        }
    }
    let mut null_basis = DMatrix::zeros(cols, null_cols.len());
    for (k, &i) in null_cols.iter().enumerate() {
        null_basis.set_column(k, &eig.eigenvectors.column(i));
    }

    let (principal_angles_deg, gauge_dimension) = if let Some(gauge_vecs) = gauge {
        let gdim = gauge_vecs.len();
        if gdim == 0 {
            (Some(Vec::new()), Some(0))
        } else {
            let mut g = DMatrix::zeros(cols, gdim);
            for (j, v) in gauge_vecs.iter().enumerate() {
                if v.len() != cols {
                    return Err(Error::usage(
                        "gauge vector length does not match matrix columns",
                    ));
                }
                for (i, &x) in v.iter().enumerate() {
                    g[(i, j)] = x;
                }
            }
            let qr = g.qr();
            let q_gauge = qr.q();
            let angles = if null_basis.ncols() == 0 {
                vec![90.0; gdim]
            } else {
                let m = null_basis.transpose() * &q_gauge;
                let svd = m.svd(false, false);
                let mut cosines: Vec<f64> = svd
                    .singular_values
                    .iter()
                    .map(|&s| s.clamp(0.0, 1.0))
                    .collect();
                cosines.sort_by(|a, b| b.partial_cmp(a).unwrap());
                // One angle per gauge dimension; missing directions are
                // orthogonal to the null space.
                while cosines.len() < gdim {
                    cosines.push(0.0);
                }
                cosines.into_iter().map(|c| c.acos().to_degrees()).collect()
            };
            (Some(angles), Some(gdim))
        }
    } else {
        (None, None)
    };

    Ok(NullspaceReport {
        sigma_max,
        sigma_min,
        null_dimension: null_basis.ncols(),
        singular_values,
        null_basis,
        duplicate_rays,
        principal_angles_deg,
        gauge_dimension,
    })
}

/// Tikhonov-regularized weighted least squares:
/// `(A^T W A + lambda I) c = A^T W d`.
pub fn reconstruct(matrix: &TransformMatrix, data: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if lambda <= 0.0 {
        return Err(Error::usage("regularization weight must be positive"));
    }
    let rows = matrix.entries.nrows();
    if data.len() != rows {
        return Err(Error::usage(format!(
            "data length {} does not match {} rays",
            data.len(),
            rows
        )));
    }
    let cols = matrix.entries.ncols();
    let mut weighted = matrix.entries.clone();
    let mut wd = DVector::zeros(rows);
    for i in 0..rows {
        let w = matrix.ray_weights[i].sqrt();
        for j in 0..cols {
            weighted[(i, j)] *= w;
        }
        wd[i] = w * data[i];
    }
    let mut normal = weighted.transpose() * &weighted;
    for j in 0..cols {
        normal[(j, j)] += lambda;
    }
    let rhs = weighted.transpose() * wd;
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::numeric("normal equations not positive definite"))?;
    Ok(chol.solve(&rhs).iter().cloned().collect())
}
