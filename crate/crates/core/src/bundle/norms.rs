//! Measures, inner products and Sobolev-type norms on bundle fields.

use super::{BundleGrid, DerivativeMethod, ScalarField, SectionN};
use crate::error::{Error, Result};

/// Norms computable on bundle fields.
///
/// `H1SM^2 = L2^2 + |Xu|^2 + |vgrad u|^2 + |hgrad u|^2`;
/// `H1N^2 = L2N^2 + |XV|^2 + |vdiv V|^2 + |hdiv V|^2`;
/// `H1NX^2 = L2N^2 + |XV|^2`;
/// `K2^2 = H1SM^2 + |Xu|_{H1SM}^2 + |vgrad u|_{H1NX}^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldNorm {
    L2SM,
    L2N,
    H1SM,
    H1N,
    H1NX,
    K2,
}

/// A scalar field or a section, for the norm entry point.
pub enum Quantity<'a> {
    Scalar(&'a ScalarField),
    Section(&'a SectionN),
}

impl BundleGrid {
    /// `L^2(SM)` inner product.
    pub fn inner_l2_scalar(&self, u: &ScalarField, w: &ScalarField) -> Result<f64> {
        self.check_shape(u.shape)?;
        self.check_shape(w.shape)?;
        let mut acc = 0.0;
        for (idx, (a, b)) in u.values.iter().zip(&w.values).enumerate() {
            acc += self.weight(idx) * a * b;
        }
        Ok(acc)
    }

    /// `L^2(N)` inner product; both sections are coefficients on the g-unit
    /// `v_perp`, so the fiber metric is already orthonormal.
    pub fn inner_l2_section(&self, v: &SectionN, w: &SectionN) -> Result<f64> {
        self.check_shape(v.shape)?;
        self.check_shape(w.shape)?;
        let mut acc = 0.0;
        for (idx, (a, b)) in v.coeffs.iter().zip(&w.coeffs).enumerate() {
            acc += self.weight(idx) * a * b;
        }
        Ok(acc)
    }

    pub fn l2_norm_scalar(&self, u: &ScalarField) -> Result<f64> {
        Ok(self.inner_l2_scalar(u, u)?.sqrt())
    }

    pub fn l2_norm_section(&self, v: &SectionN) -> Result<f64> {
        Ok(self.inner_l2_section(v, v)?.sqrt())
    }

    fn h1_scalar_sq(&self, u: &ScalarField) -> Result<f64> {
        let l2 = self.inner_l2_scalar(u, u)?;
        let (xu, _) = self.apply_x(u, DerivativeMethod::Stencil)?;
        let xn = self.inner_l2_scalar(&xu, &xu)?;
        let vg = self.v_grad(u)?;
        let vn = self.inner_l2_section(&vg, &vg)?;
        let (hg, _) = self.h_grad(u)?;
        let hn = self.inner_l2_section(&hg, &hg)?;
        Ok(l2 + xn + vn + hn)
    }

    fn h1nx_section_sq(&self, v: &SectionN) -> Result<f64> {
        let l2 = self.inner_l2_section(v, v)?;
        let (xv, _) = self.apply_x_section(v)?;
        Ok(l2 + self.inner_l2_section(&xv, &xv)?)
    }

    /// Norm dispatch; mismatched
    /// quantity/norm pairs are usage errors.
    pub fn norm(&self, quantity: Quantity<'_>, which: FieldNorm) -> Result<f64> {
        match (quantity, which) {
            (Quantity::Scalar(u), FieldNorm::L2SM) => self.l2_norm_scalar(u),
            (Quantity::Scalar(u), FieldNorm::H1SM) => Ok(self.h1_scalar_sq(u)?.sqrt()),
            (Quantity::Scalar(u), FieldNorm::K2) => {
                let h1 = self.h1_scalar_sq(u)?;
                let (xu, _) = self.apply_x(u, DerivativeMethod::Stencil)?;
                let xh1 = self.h1_scalar_sq(&xu)?;
                let vg = self.v_grad(u)?;
                let vx = self.h1nx_section_sq(&vg)?;
                Ok((h1 + xh1 + vx).sqrt())
            }
            (Quantity::Section(v), FieldNorm::L2N) => self.l2_norm_section(v),
            (Quantity::Section(v), FieldNorm::H1NX) => Ok(self.h1nx_section_sq(v)?.sqrt()),
            (Quantity::Section(v), FieldNorm::H1N) => {
                let l2 = self.inner_l2_section(v, v)?;
                let (xv, _) = self.apply_x_section(v)?;
                let xn = self.inner_l2_section(&xv, &xv)?;
                let dv = self.v_div(v)?;
                let dvn = self.inner_l2_scalar(&dv, &dv)?;
                let (dh, _) = self.h_div(v)?;
                let dhn = self.inner_l2_scalar(&dh, &dh)?;
                Ok((l2 + xn + dvn + dhn).sqrt())
            }
            (Quantity::Scalar(_), which) => Err(Error::usage(format!(
                "norm {which:?} is not defined for scalar fields"
            ))),
            (Quantity::Section(_), which) => Err(Error::usage(format!(
                "norm {which:?} is not defined for sections of N"
            ))),
        }
    }
}
