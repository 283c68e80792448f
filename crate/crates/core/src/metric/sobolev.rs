//! Sobolev-type distances between two metrics on the disk.
//!
//! The reference metric for all norms is Euclidean, so measures and index
//! contractions are flat. Second derivatives are essential quantities: they
//! are formed by centered differences of the first-derivative evaluators
//! and only ever enter integrated norms.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use super::{MetricField, PointGeometry};
use crate::error::{Error, Result};

/// Convergence modes tracked between a rough metric and its smoothings:
/// the metric in `W^{2,2}` / `W^{1,inf}` / `L^inf`, its inverse in
/// `W^{2,1}`, the Christoffel symbols in `W^{1,1}` and the curvature in
/// `L^1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricNorm {
    W22,
    W1Inf,
    LInf,
    W21Inverse,
    W11Christoffel,
    L1Curvature,
}

impl MetricNorm {
    pub const ALL: [MetricNorm; 6] = [
        MetricNorm::W22,
        MetricNorm::W1Inf,
        MetricNorm::LInf,
        MetricNorm::W21Inverse,
        MetricNorm::W11Christoffel,
        MetricNorm::L1Curvature,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            MetricNorm::W22 => "g_W22",
            MetricNorm::W1Inf => "g_W1inf",
            MetricNorm::LInf => "g_Linf",
            MetricNorm::W21Inverse => "ginv_W21",
            MetricNorm::W11Christoffel => "gamma_W11",
            MetricNorm::L1Curvature => "curv_L1",
        }
    }
}

const QUAD_RADIAL: usize = 96;
const QUAD_ANGULAR: usize = 192;

#[derive(Default, Clone, Copy)]
struct NodeAccumulator {
    sup_g: f64,
    sup_dg: f64,
    sq_w22: f64,
    abs_inv: f64,
    abs_gamma: f64,
    abs_curv: f64,
}

struct MetricProbe<'a> {
    metric: &'a MetricField,
    step: f64,
}

struct ProbeData {
    geo: PointGeometry,
    dg: [Matrix2<f64>; 2],
    /// Geometry and derivatives at `x +- step e_l`, for second-order
    /// ingredients.
    geo_pm: [[PointGeometry; 2]; 2],
    dg_pm: [[[Matrix2<f64>; 2]; 2]; 2],
}

impl<'a> MetricProbe<'a> {
    fn sample(&self, x: Vector2<f64>, second_order: bool) -> Result<ProbeData> {
        let geo = self.metric.eval_geometry_extended(x)?;
        let dg = self.metric.extended_derivatives(x);
        let mut geo_pm = [[geo; 2]; 2];
        let mut dg_pm = [[[Matrix2::zeros(); 2]; 2]; 2];
        if second_order {
            for l in 0..2 {
                let mut stepv = Vector2::zeros();
                stepv[l] = self.step;
                let xp = x + stepv;
                let xm = x - stepv;
                geo_pm[l][0] = self.metric.eval_geometry_extended(xp)?;
                geo_pm[l][1] = self.metric.eval_geometry_extended(xm)?;
                dg_pm[l][0] = self.metric.extended_derivatives(xp);
                dg_pm[l][1] = self.metric.extended_derivatives(xm);
            }
        }
        Ok(ProbeData {
            geo,
            dg,
            geo_pm,
            dg_pm,
        })
    }
}

fn inv_derivative(geo: &PointGeometry, dg: &[Matrix2<f64>; 2], k: usize) -> Matrix2<f64> {
    -(geo.g_inv * dg[k] * geo.g_inv)
}

fn riemann_from(data: &ProbeData, step: f64) -> [[[[f64; 2]; 2]; 2]; 2] {
    let gamma = &data.geo.christoffel;
    let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2];
    for m in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    dgamma[m][i][j][k] = (data.geo_pm[m][0].christoffel[i][j][k]
                        - data.geo_pm[m][1].christoffel[i][j][k])
                        / (2.0 * step);
                }
            }
        }
    }
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
    riemann
}

fn frob2(m: &Matrix2<f64>) -> f64 {
    m[(0, 0)] * m[(0, 0)] + m[(0, 1)] * m[(0, 1)] + m[(1, 0)] * m[(1, 0)] + m[(1, 1)] * m[(1, 1)]
}

fn comp_max(m: &Matrix2<f64>) -> f64 {
    m[(0, 0)]
        .abs()
        .max(m[(0, 1)].abs())
        .max(m[(1, 0)].abs())
        .max(m[(1, 1)].abs())
}

impl MetricField {
    /// Distance between two metrics in one of the tracked norms.
    pub fn sobolev_distance(&self, other: &MetricField, norm: MetricNorm) -> Result<f64> {
        Ok(self.sobolev_distances(other, &[norm])?[0])
    }

    /// Distances in several norms in one quadrature sweep over the disk.
    pub fn sobolev_distances(&self, other: &MetricField, norms: &[MetricNorm]) -> Result<Vec<f64>> {
        if self.dimension() != other.dimension() {
            return Err(Error::usage("metrics have mismatched dimensions"));
        }
        let need_second = norms.iter().any(|n| {
            matches!(
                n,
                MetricNorm::W22
                    | MetricNorm::W21Inverse
                    | MetricNorm::W11Christoffel
                    | MetricNorm::L1Curvature
            )
        });
        let step = self.fd_step_floor().max(other.fd_step_floor());
        let probe_a = MetricProbe { metric: self, step };
        let probe_b = MetricProbe {
            metric: other,
            step,
        };

        let radial = super::mollify::gauss_legendre_unit(QUAD_RADIAL);
        let dphi = std::f64::consts::TAU / QUAD_ANGULAR as f64;
        let nodes: Vec<(Vector2<f64>, f64)> = radial
            .iter()
            .flat_map(|&(r, wr)| {
                (0..QUAD_ANGULAR).map(move |a| {
                    let phi = (a as f64 + 0.5) * dphi;
                    (Vector2::new(r * phi.cos(), r * phi.sin()), wr * r * dphi)
                })
            })
            .collect();

        let accs: Vec<Result<(NodeAccumulator, f64)>> = nodes
            .par_iter()
            .map(|&(x, w)| {
                let da = probe_a.sample(x, need_second)?;
                let db = probe_b.sample(x, need_second)?;
                let mut acc = NodeAccumulator::default();

                let d0 = da.geo.g - db.geo.g;
                acc.sup_g = comp_max(&d0);
                let mut d1sq = 0.0;
                let mut d1sup = 0.0f64;
                for k in 0..2 {
                    let dk = da.dg[k] - db.dg[k];
                    d1sq += frob2(&dk);
                    d1sup = d1sup.max(comp_max(&dk));
                }
                acc.sup_dg = d1sup;

                if need_second {
                    let mut d2sq = 0.0;
                    let mut inv2 = 0.0;
                    let mut gamma1 = 0.0;
                    for l in 0..2 {
                        for k in 0..2 {
                            let dd_a = (da.dg_pm[l][0][k] - da.dg_pm[l][1][k]) / (2.0 * step);
                            let dd_b = (db.dg_pm[l][0][k] - db.dg_pm[l][1][k]) / (2.0 * step);
                            d2sq += frob2(&(dd_a - dd_b));

                            let wi_a = (inv_derivative(&da.geo_pm[l][0], &da.dg_pm[l][0], k)
                                - inv_derivative(&da.geo_pm[l][1], &da.dg_pm[l][1], k))
                                / (2.0 * step);
                            let wi_b = (inv_derivative(&db.geo_pm[l][0], &db.dg_pm[l][0], k)
                                - inv_derivative(&db.geo_pm[l][1], &db.dg_pm[l][1], k))
                                / (2.0 * step);
                            inv2 += frob2(&(wi_a - wi_b)).sqrt();
                        }
                        let mut gsq = 0.0;
                        for i in 0..2 {
                            for j in 0..2 {
                                for k in 0..2 {
                                    let ga = (da.geo_pm[l][0].christoffel[i][j][k]
                                        - da.geo_pm[l][1].christoffel[i][j][k])
                                        / (2.0 * step);
                                    let gb = (db.geo_pm[l][0].christoffel[i][j][k]
                                        - db.geo_pm[l][1].christoffel[i][j][k])
                                        / (2.0 * step);
                                    gsq += (ga - gb) * (ga - gb);
                                }
                            }
                        }
                        gamma1 += gsq.sqrt();
                    }
                    acc.sq_w22 = frob2(&d0) + d1sq + d2sq;

                    let inv0 = frob2(&(da.geo.g_inv - db.geo.g_inv)).sqrt();
                    let mut inv1 = 0.0;
                    for k in 0..2 {
                        inv1 += frob2(
                            &(inv_derivative(&da.geo, &da.dg, k)
                                - inv_derivative(&db.geo, &db.dg, k)),
                        )
                        .sqrt();
                    }
                    acc.abs_inv = inv0 + inv1 + inv2;

                    let mut gamma0 = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            for k in 0..2 {
                                let d = da.geo.christoffel[i][j][k] - db.geo.christoffel[i][j][k];
                                gamma0 += d * d;
                            }
                        }
                    }
                    acc.abs_gamma = gamma0.sqrt() + gamma1;

                    let ra = riemann_from(&da, step);
                    let rb = riemann_from(&db, step);
                    let mut csq = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            for k in 0..2 {
                                for l in 0..2 {
                                    let d = ra[i][j][k][l] - rb[i][j][k][l];
                                    csq += d * d;
                                }
                            }
                        }
                    }
                    acc.abs_curv = csq.sqrt();
                }
                Ok((acc, w))
            })
            .collect();

        let mut sup_g = 0.0f64;
        let mut sup_dg = 0.0f64;
        let mut int_w22 = 0.0;
        let mut int_inv = 0.0;
        let mut int_gamma = 0.0;
        let mut int_curv = 0.0;
        for item in accs {
            let (acc, w) = item?;
            sup_g = sup_g.max(acc.sup_g);
            sup_dg = sup_dg.max(acc.sup_dg);
            int_w22 += w * acc.sq_w22;
            int_inv += w * acc.abs_inv;
            int_gamma += w * acc.abs_gamma;
            int_curv += w * acc.abs_curv;
        }

        Ok(norms
            .iter()
            .map(|n| match n {
                MetricNorm::LInf => sup_g,
                MetricNorm::W1Inf => sup_g.max(sup_dg),
                MetricNorm::W22 => int_w22.sqrt(),
                MetricNorm::W21Inverse => int_inv,
                MetricNorm::W11Christoffel => int_gamma,
                MetricNorm::L1Curvature => int_curv,
            })
            .collect())
    }
}
