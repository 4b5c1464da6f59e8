//! Flat row-major batches of equal-dimension sample vectors.

use crate::{Error, Result};

/// A set of equal-dimension vectors stored row-major in one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    data: Vec<f64>,
}

impl SampleBatch {
    /// An empty batch of the given dimension.
    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0, "sample dimension must be positive");
        SampleBatch { dim, data: Vec::new() }
    }

    /// A batch of `count` all-zero rows.
    pub fn zeros(count: usize, dim: usize) -> Self {
        assert!(dim > 0, "sample dimension must be positive");
        SampleBatch {
            dim,
            data: vec![0.0; count * dim],
        }
    }

    /// Wraps flat row-major data.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("sample dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "flat length {} is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        Ok(SampleBatch { dim, data })
    }

    /// Collects rows into a batch. All rows must share one dimension.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::InvalidInput("cannot build a batch from zero rows".into()))?;
        let mut batch = SampleBatch::empty(dim);
        for row in rows {
            batch.push_row(row.as_ref());
        }
        Ok(batch)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.dim, "row dimension {} != batch dimension {}", row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Concatenates two batches column-wise: row i becomes `[left_i; right_i]`.
    pub fn concat_columns(left: &SampleBatch, right: &SampleBatch) -> Result<SampleBatch> {
        if left.count() != right.count() {
            return Err(Error::DimensionMismatch(format!(
                "column concat needs equal counts, got {} and {}",
                left.count(),
                right.count()
            )));
        }
        let mut out = SampleBatch::zeros(left.count(), left.dim + right.dim);
        for i in 0..left.count() {
            let row = out.row_mut(i);
            row[..left.dim].copy_from_slice(left.row(i));
            row[left.dim..].copy_from_slice(right.row(i));
        }
        Ok(out)
    }

    /// Checks that every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
