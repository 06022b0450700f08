//! Gradients of the frozen-`ẽ` surrogate objective
//! `Σ_n v_nm [-½ ln|S| - ½(ẽ₀ x̃ᵀS⁻¹x̃ - 2ẽ₁ λᵀS⁻¹x̃ + ẽ₂ λᵀS⁻¹λ)]`, `x̃ = x - ξ`.

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::numerics::{duplication_matrix, SpdMatrix};

use super::{EStepBuffers, MixtureModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGradient {
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    /// With respect to `vech(S)`.
    pub scatter: Vec<f64>,
}

impl ClusterGradient {
    pub fn max_abs(&self) -> f64 {
        self.xi
            .iter()
            .chain(&self.lambda)
            .chain(&self.scatter)
            .fold(0.0, |a: f64, v| a.max(v.abs()))
    }
}

fn check(data: &DataSet, buf: &EStepBuffers, m: usize, xi: &[f64], lambda: &[f64], s: &SpdMatrix) -> Result<()> {
    let r = data.dim();
    for len in [xi.len(), lambda.len(), s.dim()] {
        if len != r {
            return Err(Error::DimensionMismatch { expected: r, got: len });
        }
    }
    if buf.n != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: buf.n });
    }
    if m >= buf.l {
        return Err(Error::DimensionMismatch { expected: buf.l, got: m + 1 });
    }
    Ok(())
}

fn mat_vec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let r = x.len();
    (0..r).map(|i| (0..r).map(|j| a[i * r + j] * x[j]).sum()).collect()
}

/// Surrogate objective of cluster `m` at `(ξ, λ, S)` with the buffers' `v`, `ẽ`.
pub fn surrogate_objective(
    data: &DataSet,
    buf: &EStepBuffers,
    m: usize,
    xi: &[f64],
    lambda: &[f64],
    scatter: &SpdMatrix,
) -> Result<f64> {
    check(data, buf, m, xi, lambda, scatter)?;
    let log_det = scatter.log_det();
    let s_inv_l = scatter.solve(lambda)?;
    let lsl: f64 = lambda.iter().zip(&s_inv_l).map(|(a, b)| a * b).sum();
    let mut total = 0.0;
    for (i, x) in data.iter().enumerate() {
        let k = i * buf.l + m;
        let d: Vec<f64> = x.iter().zip(xi).map(|(a, b)| a - b).collect();
        let q = scatter.inv_quad_form(&d);
        let cross: f64 = s_inv_l.iter().zip(&d).map(|(a, b)| a * b).sum();
        total += buf.v[k]
            * (-0.5 * log_det - 0.5 * (buf.e0[k] * q - 2.0 * buf.e1[k] * cross + buf.e2[k] * lsl));
    }
    Ok(total)
}

/// Gradients of [`surrogate_objective`] in `ξ`, `λ` and `vech(S)`.
pub fn grad_cluster(
    data: &DataSet,
    buf: &EStepBuffers,
    m: usize,
    xi: &[f64],
    lambda: &[f64],
    scatter: &SpdMatrix,
) -> Result<ClusterGradient> {
    check(data, buf, m, xi, lambda, scatter)?;
    let r = data.dim();
    let s_inv = scatter.inverse();
    let a = mat_vec(&s_inv, lambda);
    let mut g_xi = vec![0.0; r];
    let mut g_lambda = vec![0.0; r];
    // column-stacked vec of the r×r gradient before duplication
    let mut g_vec = vec![0.0; r * r];
    for (i, x) in data.iter().enumerate() {
        let k = i * buf.l + m;
        let (v, e0, e1, e2) = (buf.v[k], buf.e0[k], buf.e1[k], buf.e2[k]);
        let d: Vec<f64> = x.iter().zip(xi).map(|(p, q)| p - q).collect();
        let u = mat_vec(&s_inv, &d);
        for j in 0..r {
            g_xi[j] += v * (e0 * u[j] - e1 * a[j]);
            g_lambda[j] += v * (e1 * u[j] - e2 * a[j]);
        }
        for col in 0..r {
            for row in 0..r {
                g_vec[col * r + row] += v
                    * (-0.5 * s_inv[row * r + col]
                        + 0.5 * e0 * u[row] * u[col]
                        - 0.5 * e1 * (u[row] * a[col] + a[row] * u[col])
                        + 0.5 * e2 * a[row] * a[col]);
            }
        }
    }
    let dup = duplication_matrix(r);
    let h = r * (r + 1) / 2;
    let g_s = (0..h)
        .map(|c| (0..r * r).map(|k| g_vec[k] * dup[k * h + c]).sum())
        .collect();
    Ok(ClusterGradient { xi: g_xi, lambda: g_lambda, scatter: g_s })
}

/// [`grad_cluster`] at every cluster of `model`.
pub fn grad_check_pack(
    data: &DataSet,
    model: &MixtureModel,
    buf: &EStepBuffers,
) -> Result<Vec<ClusterGradient>> {
    if buf.l != model.n_clusters() {
        return Err(Error::DimensionMismatch { expected: model.n_clusters(), got: buf.l });
    }
    model
        .clusters()
        .iter()
        .enumerate()
        .map(|(m, c)| grad_cluster(data, buf, m, c.xi(), c.lambda(), c.scatter()))
        .collect()
}
