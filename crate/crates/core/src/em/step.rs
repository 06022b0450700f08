use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::numerics::{Jitter, SpdMatrix};
use crate::par::Execution;
use crate::resk::{eval_point_with_cap, ClusterParams};

use super::{normalize, MixtureModel};

const CHUNK: usize = 512;

/// Responsibilities and the frozen `ẽ` scalars, all row-major `N × l`.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepBuffers {
    pub n: usize,
    pub l: usize,
    pub v: Vec<f64>,
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    /// `ln Σ_m γ_m f_s(x_n|θ_m)` per point.
    pub point_ll: Vec<f64>,
    /// Incomplete-data log-likelihood of the model the buffers were built from.
    pub ll: f64,
}

impl EStepBuffers {
    pub fn column_mass(&self, m: usize) -> f64 {
        (0..self.n).map(|i| self.v[i * self.l + m]).sum()
    }
}

struct Chunk {
    v: Vec<f64>,
    e0: Vec<f64>,
    e1: Vec<f64>,
    e2: Vec<f64>,
    point_ll: Vec<f64>,
}

/// Responsibilities and `ẽ₀, ẽ₁, ẽ₂` evaluated at `model`.
pub fn e_step(data: &DataSet, model: &MixtureModel, exec: Execution) -> Result<EStepBuffers> {
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: data.dim() });
    }
    let n = data.len();
    let l = model.n_clusters();
    let spec = model.spec();
    let log_dets: Vec<f64> = model.clusters().iter().map(|c| c.omega().log_det()).collect();
    let log_w: Vec<f64> = model.weights().iter().map(|w| w.ln()).collect();
    let n_chunks = n.div_ceil(CHUNK);

    let chunks = exec.map(n_chunks, |ci| {
        let lo = ci * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let len = (hi - lo) * l;
        let mut ch = Chunk {
            v: Vec::with_capacity(len),
            e0: Vec::with_capacity(len),
            e1: Vec::with_capacity(len),
            e2: Vec::with_capacity(len),
            point_ll: Vec::with_capacity(hi - lo),
        };
        for i in lo..hi {
            let x = data.point(i);
            let row = ch.v.len();
            let mut max = f64::NEG_INFINITY;
            for (m, c) in model.clusters().iter().enumerate() {
                let (p, cap) = eval_point_with_cap(spec, c, log_dets[m], x);
                let psi = spec.psi_unchecked(p.t_bar);
                let s = (2.0 * psi).sqrt();
                let el = spec.eta_loss_unchecked(p.t_bar);
                let common = 2.0 * cap * el / s;
                let (eta, tau) = (p.eta, p.tau);
                let q = eta / tau;
                ch.e0.push(2.0 * psi + common * q);
                ch.e1.push(2.0 * psi * eta - cap * tau * s + common * q * eta);
                ch.e2.push(tau * tau + 2.0 * psi * eta * eta - cap * eta * tau * s + common * q * eta * eta);
                let lv = log_w[m] + p.log_pdf;
                max = max.max(lv);
                ch.v.push(lv);
            }
            let mut sum = 0.0;
            for v in &mut ch.v[row..] {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in &mut ch.v[row..] {
                *v /= sum;
            }
            ch.point_ll.push(max + sum.ln());
        }
        ch
    });

    let mut out = EStepBuffers {
        n,
        l,
        v: Vec::with_capacity(n * l),
        e0: Vec::with_capacity(n * l),
        e1: Vec::with_capacity(n * l),
        e2: Vec::with_capacity(n * l),
        point_ll: Vec::with_capacity(n),
        ll: 0.0,
    };
    for ch in chunks {
        out.v.extend(ch.v);
        out.e0.extend(ch.e0);
        out.e1.extend(ch.e1);
        out.e2.extend(ch.e2);
        out.point_ll.extend(ch.point_ll);
    }
    out.ll = out.point_ll.iter().sum();
    if !out.ll.is_finite() {
        return Err(Error::Numerical(format!("log-likelihood is {}", out.ll)));
    }
    Ok(out)
}

/// Closed-form M-step: `ξ` (with the previous `λ`), then `λ`, then `S`, then `γ`.
pub fn m_step(
    data: &DataSet,
    buf: &EStepBuffers,
    prev: &MixtureModel,
    collapse_tol: f64,
) -> Result<MixtureModel> {
    let r = data.dim();
    let n = data.len();
    let l = prev.n_clusters();
    if buf.n != n || buf.l != l {
        return Err(Error::DimensionMismatch { expected: n * l, got: buf.n * buf.l });
    }
    let mut clusters = Vec::with_capacity(l);
    let mut weights = Vec::with_capacity(l);
    for (m, c) in prev.clusters().iter().enumerate() {
        let mass = buf.column_mass(m);
        if !(mass > collapse_tol * n as f64) {
            return Err(Error::ClusterCollapse { cluster: m, mass });
        }
        let idx = |i: usize| i * l + m;

        let lambda_prev = c.lambda();
        let mut w0 = 0.0;
        let mut xi = vec![0.0; r];
        for (i, x) in data.iter().enumerate() {
            let (v, e0, e1) = (buf.v[idx(i)], buf.e0[idx(i)], buf.e1[idx(i)]);
            w0 += v * e0;
            for k in 0..r {
                xi[k] += v * (e0 * x[k] - e1 * lambda_prev[k]);
            }
        }
        if !(w0 > 0.0) {
            return Err(Error::Numerical(format!("cluster {m}: Σ v ẽ₀ = {w0} is not positive")));
        }
        xi.iter_mut().for_each(|v| *v /= w0);

        let lambda = if prev.skewed() {
            let mut w2 = 0.0;
            let mut lam = vec![0.0; r];
            for (i, x) in data.iter().enumerate() {
                let (v, e1, e2) = (buf.v[idx(i)], buf.e1[idx(i)], buf.e2[idx(i)]);
                w2 += v * e2;
                for k in 0..r {
                    lam[k] += v * e1 * (x[k] - xi[k]);
                }
            }
            if !(w2 > 0.0) {
                return Err(Error::Numerical(format!("cluster {m}: Σ v ẽ₂ = {w2} is not positive")));
            }
            lam.iter_mut().for_each(|v| *v /= w2);
            lam
        } else {
            vec![0.0; r]
        };

        let mut s = vec![0.0; r * r];
        let mut d = vec![0.0; r];
        for (i, x) in data.iter().enumerate() {
            let (v, e0, e1, e2) = (buf.v[idx(i)], buf.e0[idx(i)], buf.e1[idx(i)], buf.e2[idx(i)]);
            for k in 0..r {
                d[k] = x[k] - xi[k];
            }
            for a in 0..r {
                for b in 0..=a {
                    s[a * r + b] += v
                        * (e0 * d[a] * d[b] - e1 * (d[a] * lambda[b] + lambda[a] * d[b])
                            + e2 * lambda[a] * lambda[b]);
                }
            }
        }
        for a in 0..r {
            for b in 0..=a {
                s[a * r + b] /= mass;
                s[b * r + a] = s[a * r + b];
            }
        }
        let scatter = SpdMatrix::from_symmetrized(r, s, Jitter::default())?;
        clusters.push(ClusterParams::new(xi, lambda, scatter)?);
        weights.push(mass / n as f64);
    }
    MixtureModel::new(prev.spec().clone(), prev.skewed(), normalize(weights), clusters)
}
