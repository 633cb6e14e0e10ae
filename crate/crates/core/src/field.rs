use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real value per vertex. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VertexField(Vec<f64>);

impl VertexField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        assert!(c.is_finite());
        Self(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.0)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise `self + other`.
    pub fn add(&self, other: &VertexField) -> Result<VertexField> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &VertexField) -> Result<VertexField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn shift(&self, c: f64) -> Result<VertexField> {
        VertexField::new(self.0.iter().map(|a| a + c).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<VertexField> {
        VertexField::new(self.0.iter().map(|&a| f(a)).collect())
    }

    fn zip_with(&self, other: &VertexField, f: impl Fn(f64, f64) -> f64) -> Result<VertexField> {
        if self.len() != other.len() {
            return Err(Error::Misaligned {
                expected: self.len(),
                found: other.len(),
            });
        }
        VertexField::new(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    /// `max_x (self - other)(x)`; positive means `self` exceeds `other` somewhere.
    pub fn max_excess_over(&self, other: &VertexField) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<usize> for VertexField {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for VertexField {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        VertexField::new(values)
    }
}

impl From<VertexField> for Vec<f64> {
    fn from(f: VertexField) -> Vec<f64> {
        f.0
    }
}

impl AsRef<[f64]> for VertexField {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
