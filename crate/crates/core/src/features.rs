//! Sparse and dense feature vectors behind one read interface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;

/// Read access shared by every vector a model can consume.
pub trait FeatureRow<F: Float> {
    fn dim(&self) -> usize;

    /// Calls `f(index, value)` for every stored entry.
    fn for_each_nonzero(&self, f: impl FnMut(usize, F));

    /// Value at `index`, zero when not stored.
    fn value(&self, index: usize) -> F;

    fn dot(&self, weights: &[F]) -> F {
        let mut acc = F::zero();
        self.for_each_nonzero(|i, v| acc = acc + v * weights[i]);
        acc
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_nonzero(|_, v| ok &= v.is_finite());
        ok
    }
}

impl<F: Float, T: FeatureRow<F> + ?Sized> FeatureRow<F> for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn for_each_nonzero(&self, f: impl FnMut(usize, F)) {
        (**self).for_each_nonzero(f)
    }

    fn value(&self, index: usize) -> F {
        (**self).value(index)
    }

    fn dot(&self, weights: &[F]) -> F {
        (**self).dot(weights)
    }
}

/// Sorted index/value pairs; stored values are never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SparseVector<F: Float> {
    dimension: usize,
    indices: Vec<usize>,
    values: Vec<F>,
}

impl<F: Float> SparseVector<F> {
    pub fn zeros(dimension: usize) -> Self {
        SparseVector {
            dimension,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from arbitrary pairs: zeros are dropped, duplicate indices summed.
    pub fn from_pairs(dimension: usize, mut pairs: Vec<(usize, F)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut values: Vec<F> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if i >= dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: i + 1,
                });
            }
            match indices.last() {
                Some(&last) if last == i => {
                    let slot = values.last_mut().expect("parallel vectors");
                    *slot = *slot + v;
                }
                _ => {
                    indices.push(i);
                    values.push(v);
                }
            }
        }
        let mut out = SparseVector {
            dimension,
            indices: Vec::with_capacity(values.len()),
            values: Vec::with_capacity(values.len()),
        };
        for (i, v) in indices.into_iter().zip(values) {
            if v != F::zero() {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        Ok(out)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, F)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> F {
        self.values.iter().map(|&v| v * v).sum::<F>().sqrt()
    }

    /// Multiplies every stored value by `factor`; a zero factor empties the vector.
    pub fn scale(&mut self, factor: F) {
        if factor == F::zero() {
            self.indices.clear();
            self.values.clear();
            return;
        }
        for v in &mut self.values {
            *v = *v * factor;
        }
    }

    pub fn to_dense(&self) -> DenseVector<F> {
        let mut values = vec![F::zero(); self.dimension];
        for (i, v) in self.iter() {
            values[i] = v;
        }
        DenseVector { values }
    }
}

impl<F: Float> FeatureRow<F> for SparseVector<F> {
    fn dim(&self) -> usize {
        self.dimension
    }

    fn for_each_nonzero(&self, mut f: impl FnMut(usize, F)) {
        for (i, v) in self.iter() {
            f(i, v);
        }
    }

    fn value(&self, index: usize) -> F {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => F::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(transparent)]
pub struct DenseVector<F: Float> {
    pub values: Vec<F>,
}

impl<F: Float> DenseVector<F> {
    pub fn new(values: Vec<F>) -> Self {
        DenseVector { values }
    }

    pub fn zeros(dimension: usize) -> Self {
        DenseVector {
            values: vec![F::zero(); dimension],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.values
    }
}

impl<F: Float> FeatureRow<F> for DenseVector<F> {
    fn dim(&self) -> usize {
        self.values.len()
    }

    fn for_each_nonzero(&self, mut f: impl FnMut(usize, F)) {
        for (i, &v) in self.values.iter().enumerate() {
            f(i, v);
        }
    }

    fn value(&self, index: usize) -> F {
        self.values.get(index).copied().unwrap_or_else(F::zero)
    }

    fn dot(&self, weights: &[F]) -> F {
        self.values
            .iter()
            .zip(weights)
            .fold(F::zero(), |acc, (&x, &w)| acc + x * w)
    }
}

/// Either representation, so models handle both through one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(rename_all = "snake_case")]
pub enum FeatureVec<F: Float> {
    Sparse(SparseVector<F>),
    Dense(DenseVector<F>),
}

impl<F: Float> From<SparseVector<F>> for FeatureVec<F> {
    fn from(v: SparseVector<F>) -> Self {
        FeatureVec::Sparse(v)
    }
}

impl<F: Float> From<DenseVector<F>> for FeatureVec<F> {
    fn from(v: DenseVector<F>) -> Self {
        FeatureVec::Dense(v)
    }
}

impl<F: Float> FeatureRow<F> for FeatureVec<F> {
    fn dim(&self) -> usize {
        match self {
            FeatureVec::Sparse(v) => v.dim(),
            FeatureVec::Dense(v) => v.dim(),
        }
    }

    fn for_each_nonzero(&self, f: impl FnMut(usize, F)) {
        match self {
            FeatureVec::Sparse(v) => v.for_each_nonzero(f),
            FeatureVec::Dense(v) => v.for_each_nonzero(f),
        }
    }

    fn value(&self, index: usize) -> F {
        match self {
            FeatureVec::Sparse(v) => v.value(index),
            FeatureVec::Dense(v) => v.value(index),
        }
    }

    fn dot(&self, weights: &[F]) -> F {
        match self {
            FeatureVec::Sparse(v) => v.dot(weights),
            FeatureVec::Dense(v) => v.dot(weights),
        }
    }
}

/// Common dimension of a non-empty batch.
pub(crate) fn batch_dim<F: Float, X: FeatureRow<F>>(rows: &[X]) -> Result<usize> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidData("empty feature batch".into()))?
        .dim();
    for r in rows {
        if r.dim() != first {
            return Err(Error::DimensionMismatch {
                expected: first,
                found: r.dim(),
            });
        }
    }
    Ok(first)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_pairs_sums_and_drops_zeros() {
        let v = SparseVector::<f64>::from_pairs(5, vec![(3, 1.0), (1, 2.0), (3, 2.0), (4, 0.0)])
            .unwrap();
        assert_eq!(v.iter().collect::<Vec<_>>(), vec![(1, 2.0), (3, 3.0)]);
        assert_eq!(v.value(3), 3.0);
        assert_eq!(v.value(0), 0.0);
        assert!(SparseVector::<f64>::from_pairs(2, vec![(2, 1.0)]).is_err());
    }

    #[test]
    fn sparse_and_dense_agree() {
        let s = SparseVector::<f64>::from_pairs(4, vec![(0, 1.5), (2, -2.0)]).unwrap();
        let d = s.to_dense();
        let w = [0.5, 9.0, 1.0, 4.0];
        assert_eq!(s.dot(&w), d.dot(&w));
        assert_eq!(
            FeatureVec::from(s.clone()).dot(&w),
            FeatureVec::from(d).dot(&w)
        );
    }

    #[test]
    fn serde_shape() {
        let v = FeatureVec::Dense(DenseVector::new(vec![1.0f32, 2.0]));
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"dense":[1.0,2.0]}"#);
    }
}
