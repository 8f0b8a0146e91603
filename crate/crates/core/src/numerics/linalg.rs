use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use super::Tolerances;
use crate::error::{ensure, Error, Result};

/// A dense real vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(elements: Vec<f64>) -> Self {
        Self(elements)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &[f64]) {
        for (x, y) in self.0.iter_mut().zip(other) {
            *x += scale * y;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric positive-definite matrix, stored row-major.
///
/// Only ever built as the identity plus rank-one outer products (or as the
/// inverse of such a matrix), which keeps it positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    dim: usize,
    elements: Vec<f64>,
}

impl SpdMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut elements = vec![0.0; dim * dim];
        for i in 0..dim {
            elements[i * dim + i] = 1.0;
        }
        Self { dim, elements }
    }

    /// Builds a matrix from row-major entries, checking shape and symmetry.
    pub fn from_row_major(dim: usize, elements: Vec<f64>) -> Result<Self> {
        ensure!(dim > 0, Contract, "matrix dimension must be positive");
        ensure!(
            elements.len() == dim * dim,
            Contract,
            "expected {} entries for a {dim}x{dim} matrix, got {}",
            dim * dim,
            elements.len()
        );
        let m = Self { dim, elements };
        ensure!(
            m.is_symmetric(Tolerances::DEFAULT.symmetry),
            Contract,
            "matrix is not symmetric"
        );
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.elements[row * self.dim + col]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.elements
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.elements[row * self.dim..(row + 1) * self.dim]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), v)).collect()
    }

    /// `vᵀ M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        (0..self.dim).map(|i| v[i] * dot(self.row(i), v)).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let d = self.dim;
        (0..d).all(|i| {
            (i + 1..d).all(|j| {
                let a = self.elements[i * d + j];
                let b = self.elements[j * d + i];
                (a - b).abs() <= tol * a.abs().max(1.0)
            })
        })
    }

    /// In-place Sherman–Morrison step: `self` is `A⁻¹` and becomes `(A + c cᵀ)⁻¹`.
    pub fn rank_one_inverse_update(&mut self, c: &[f64]) -> Result<()> {
        ensure!(
            c.len() == self.dim,
            Contract,
            "update vector has dimension {}, matrix has {}",
            c.len(),
            self.dim
        );
        let d = self.dim;
        // u = A⁻¹ c; A⁻¹ is symmetric so cᵀA⁻¹ = uᵀ.
        let u = self.mul_vec(c);
        let denom = 1.0 + dot(c, &u);
        if !(denom.is_finite() && denom > 0.0) {
            return Err(Error::Numerical(format!(
                "Sherman-Morrison denominator {denom} is not positive"
            )));
        }
        for i in 0..d {
            let ui = u[i] / denom;
            // Fill the upper triangle and mirror it so the result stays exactly symmetric.
            for j in i..d {
                let v = self.elements[i * d + j] - ui * u[j];
                self.elements[i * d + j] = v;
                self.elements[j * d + i] = v;
            }
        }
        Ok(())
    }
}

/// Returns `(A + c cᵀ)⁻¹` given `A⁻¹`.
pub fn sherman_morrison_update(a_inv: &SpdMatrix, c: &[f64]) -> Result<SpdMatrix> {
    let mut out = a_inv.clone();
    out.rank_one_inverse_update(c)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_plus_unit_outer_product() {
        let out = sherman_morrison_update(&SpdMatrix::identity(2), &[1.0, 0.0]).unwrap();
        assert_eq!(out.as_row_major(), &[0.5, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_update_is_a_no_op() {
        let out = sherman_morrison_update(&SpdMatrix::identity(2), &[0.0, 0.0]).unwrap();
        assert_eq!(out, SpdMatrix::identity(2));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = sherman_morrison_update(&SpdMatrix::identity(3), &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn from_row_major_rejects_asymmetry() {
        assert!(SpdMatrix::from_row_major(2, vec![1.0, 0.5, 0.0, 1.0]).is_err());
        assert!(SpdMatrix::from_row_major(2, vec![1.0, 0.5, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn quadratic_form_of_identity_is_squared_norm() {
        let m = SpdMatrix::identity(3);
        assert_eq!(m.quadratic_form(&[1.0, 2.0, 2.0]), 9.0);
    }
}
