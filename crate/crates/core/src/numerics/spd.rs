//! Small dense symmetric positive-definite matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Diagonal repair applied when a Cholesky factorization fails.
///
/// The first attempt adds `epsilon * trace(A) / r` to the diagonal, each
/// further attempt multiplies that amount by 10.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jitter {
    pub epsilon: f64,
    pub escalations: usize,
}

impl Default for Jitter {
    fn default() -> Self {
        Self { epsilon: 1e-8, escalations: 3 }
    }
}

/// Symmetric positive-definite `r × r` matrix stored row-major together with
/// its lower Cholesky factor, computed once at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpdRepr", into = "SpdRepr")]
pub struct SpdMatrix {
    dim: usize,
    data: Vec<f64>,
    chol: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpdRepr {
    dim: usize,
    data: Vec<f64>,
}

impl TryFrom<SpdRepr> for SpdMatrix {
    type Error = Error;
    fn try_from(r: SpdRepr) -> Result<Self> {
        SpdMatrix::new(r.dim, r.data)
    }
}

impl From<SpdMatrix> for SpdRepr {
    fn from(m: SpdMatrix) -> Self {
        SpdRepr { dim: m.dim, data: m.data }
    }
}

impl SpdMatrix {
    /// Validates symmetry and factorizes. Rejects non-PD input.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("matrix dimension must be >= 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let diff = (data[i * dim + j] - data[j * dim + i]).abs();
                if diff > SYMMETRY_TOL * scale {
                    return Err(Error::NotSymmetric { i, j, diff });
                }
            }
        }
        let chol = cholesky(dim, &data)?;
        Ok(Self { dim, data, chol })
    }

    /// Symmetrizes `(A + Aᵀ)/2`, then factorizes with jitter repair.
    pub fn from_symmetrized(dim: usize, mut data: Vec<f64>, jitter: Jitter) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        Self::with_jitter(dim, data, jitter)
    }

    /// Factorizes, adding diagonal jitter on failure (see [`Jitter`]).
    pub fn with_jitter(dim: usize, data: Vec<f64>, jitter: Jitter) -> Result<Self> {
        match Self::new(dim, data.clone()) {
            Ok(m) => Ok(m),
            Err(Error::NotPositiveDefinite { .. }) => {
                let trace: f64 = (0..dim).map(|i| data[i * dim + i]).sum();
                let base = trace / dim as f64;
                // nothing to scale the jitter by
                if !(base >= f64::MIN_POSITIVE) {
                    return Err(Error::NotPositiveDefinite { row: 0, pivot: base });
                }
                let mut amount = jitter.epsilon * base;
                let mut last = None;
                for _ in 0..=jitter.escalations {
                    let mut d = data.clone();
                    for i in 0..dim {
                        d[i * dim + i] += amount;
                    }
                    match Self::new(dim, d) {
                        Ok(m) => return Ok(m),
                        Err(e) => last = Some(e),
                    }
                    amount *= 10.0;
                }
                Err(last.unwrap_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 }))
            }
            Err(e) => Err(e),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim]).expect("identity is PD")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            data[i * dim + i] = *d;
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Row-major lower Cholesky factor `L` with `A = L Lᵀ`.
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: b.len() });
        }
        let mut y = self.forward(b);
        self.backward_in_place(&mut y);
        Ok(y)
    }

    /// `ln |A| = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.chol[i * self.dim + i].ln()).sum::<f64>()
    }

    /// `vᵀ A⁻¹ v` via one triangular solve.
    pub fn inv_quad_form(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        self.forward(v).iter().map(|y| y * y).sum()
    }

    /// Dense row-major inverse.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.dim;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let mut col = self.forward(&e);
            self.backward_in_place(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        // exact symmetry
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (inv[i * n + j] + inv[j * n + i]);
                inv[i * n + j] = avg;
                inv[j * n + i] = avg;
            }
        }
        inv
    }

    /// `L · z`, used to draw correlated normals.
    pub fn chol_mul(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.chol[i * n + k] * z[k];
            }
            out[i] = s;
        }
    }

    /// `A + u uᵀ`.
    pub fn rank_one_update(&self, u: &[f64]) -> Result<Self> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: u.len() });
        }
        let n = self.dim;
        let mut data = self.data.clone();
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] += u[i] * u[j];
            }
        }
        Self::new(n, data)
    }

    /// Lower-triangular column stacking of the entries.
    pub fn vech(&self) -> Vec<f64> {
        vech(self.dim, &self.data)
    }

    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.chol[i * n + k] * y[k];
            }
            y[i] = s / self.chol[i * n + i];
        }
        y
    }

    fn backward_in_place(&self, y: &mut [f64]) {
        let n = self.dim;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.chol[k * n + i] * y[k];
            }
            y[i] = s / self.chol[i * n + i];
        }
    }
}

fn cholesky(n: usize, a: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `A x = b` for SPD `A` given row-major.
pub fn chol_solve(a: &SpdMatrix, b: &[f64]) -> Result<Vec<f64>> {
    a.solve(b)
}

pub fn log_det(a: &SpdMatrix) -> f64 {
    a.log_det()
}

/// `vech` of a row-major symmetric matrix: lower triangle, column by column.
pub fn vech(dim: usize, data: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
    for j in 0..dim {
        for i in j..dim {
            out.push(data[i * dim + j]);
        }
    }
    out
}

/// Inverse of [`vech`].
pub fn unvech(dim: usize, v: &[f64]) -> Vec<f64> {
    let mut data = vec![0.0; dim * dim];
    let mut idx = 0;
    for j in 0..dim {
        for i in j..dim {
            data[i * dim + j] = v[idx];
            data[j * dim + i] = v[idx];
            idx += 1;
        }
    }
    data
}

/// Row-major `r² × r(r+1)/2` duplication matrix with `vec(A) = D vech(A)`.
/// `vec` stacks columns.
pub fn duplication_matrix(dim: usize) -> Vec<f64> {
    let cols = dim * (dim + 1) / 2;
    let mut d = vec![0.0; dim * dim * cols];
    let mut k = 0;
    for j in 0..dim {
        for i in j..dim {
            d[(j * dim + i) * cols + k] = 1.0;
            d[(i * dim + j) * cols + k] = 1.0;
            k += 1;
        }
    }
    d
}
