//! In-memory observation matrix with optional ground-truth labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `N × r` points. Label `0` marks an outlier, `1..=K` a cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    dim: usize,
    points: Vec<f64>,
    labels: Option<Vec<u32>>,
    /// Free-form generation record (seed, preset, epsilon, ...).
    pub meta: BTreeMap<String, String>,
}

impl DataSet {
    pub fn new(dim: usize, points: Vec<f64>, labels: Option<Vec<u32>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be >= 1".into()));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim * (points.len() / dim + 1),
                got: points.len(),
            });
        }
        if let Some(i) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: i / dim,
                col: i % dim,
                msg: "non-finite value".into(),
            });
        }
        let n = points.len() / dim;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: l.len() });
            }
        }
        Ok(Self { dim, points, labels, meta: BTreeMap::new() })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<u32>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        Self::new(dim, rows.concat(), labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, n: usize) -> &[f64] {
        &self.points[n * self.dim..(n + 1) * self.dim]
    }

    pub fn point_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.points[n * self.dim..(n + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn labels_mut(&mut self) -> Option<&mut Vec<u32>> {
        self.labels.as_mut()
    }

    pub fn set_labels(&mut self, labels: Option<Vec<u32>>) -> Result<()> {
        if let Some(l) = &labels {
            if l.len() != self.len() {
                return Err(Error::DimensionMismatch { expected: self.len(), got: l.len() });
            }
        }
        self.labels = labels;
        Ok(())
    }

    /// Points whose label is not `0`. Unlabelled sets are returned whole.
    pub fn inliers(&self) -> DataSet {
        let Some(labels) = &self.labels else { return self.clone() };
        let mut pts = Vec::with_capacity(self.points.len());
        let mut lab = Vec::with_capacity(labels.len());
        for (x, &l) in self.iter().zip(labels) {
            if l != 0 {
                pts.extend_from_slice(x);
                lab.push(l);
            }
        }
        DataSet { dim: self.dim, points: pts, labels: Some(lab), meta: self.meta.clone() }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for x in self.iter() {
            for (a, b) in m.iter_mut().zip(x) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Covariance about `center` with denominator `N`, row-major.
    pub fn covariance_about(&self, center: &[f64]) -> Vec<f64> {
        let r = self.dim;
        let mut c = vec![0.0; r * r];
        for x in self.iter() {
            for i in 0..r {
                let di = x[i] - center[i];
                for j in 0..=i {
                    c[i * r + j] += di * (x[j] - center[j]);
                }
            }
        }
        let n = self.len().max(1) as f64;
        for i in 0..r {
            for j in 0..=i {
                c[i * r + j] /= n;
                c[j * r + i] = c[i * r + j];
            }
        }
        c
    }

    /// Z-standardizes every column in place; returns `(mean, std)` per column.
    pub fn standardize(&mut self) -> Vec<(f64, f64)> {
        let mean = self.mean();
        let cov = self.covariance_about(&mean);
        let r = self.dim;
        let stats: Vec<(f64, f64)> = (0..r)
            .map(|i| {
                let sd = cov[i * r + i].sqrt();
                (mean[i], if sd > 0.0 { sd } else { 1.0 })
            })
            .collect();
        for x in self.points.chunks_exact_mut(r) {
            for (v, (m, s)) in x.iter_mut().zip(&stats) {
                *v = (*v - m) / s;
            }
        }
        stats
    }
}
