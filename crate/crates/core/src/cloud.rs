//! Flat row-major point storage for large samples.

use nalgebra::DVector;

use crate::error::{check_dim, MfError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        PointCloud { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        PointCloud { dim, data: Vec::with_capacity(dim * rows) }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(MfError::invalid("flat data length is not a multiple of the dimension"));
        }
        Ok(PointCloud { dim, data })
    }

    pub fn from_vectors(points: &[DVector<f64>]) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| MfError::invalid("empty point list"))?;
        let mut c = PointCloud::with_capacity(dim, points.len());
        for p in points {
            check_dim(dim, p.len())?;
            c.data.extend(p.iter());
        }
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.row(i))
    }

    pub fn to_vectors(&self) -> Vec<DVector<f64>> {
        self.rows().map(DVector::from_column_slice).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Vec<f64> {
        &mut self.data
    }

    /// Inner products of every row with `b`.
    pub fn dot_all(&self, b: &DVector<f64>) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
            .collect()
    }
}
