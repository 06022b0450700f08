//! EM estimation of RESK and RES mixtures.

mod grad;
mod init;
mod step;

pub use grad::{grad_check_pack, grad_cluster, surrogate_objective, ClusterGradient};
pub use init::{init, kmeans, KMeans};
pub use step::{e_step, m_step, EStepBuffers};

use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::numerics::{Jitter, SpdMatrix};
use crate::par::Execution;
use crate::resk::{eval_point, ClusterParams};

/// A fitted or candidate mixture: family, weights `γ` and per-cluster parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    spec: FamilySpec,
    skewed: bool,
    weights: Vec<f64>,
    clusters: Vec<ClusterParams>,
}

impl MixtureModel {
    pub fn new(
        spec: FamilySpec,
        skewed: bool,
        weights: Vec<f64>,
        clusters: Vec<ClusterParams>,
    ) -> Result<Self> {
        if weights.len() != clusters.len() || clusters.is_empty() {
            return Err(Error::DimensionMismatch { expected: clusters.len(), got: weights.len() });
        }
        if let Some(c) = clusters.iter().find(|c| c.dim() != spec.dim()) {
            return Err(Error::DimensionMismatch { expected: spec.dim(), got: c.dim() });
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Domain("mixing weights must be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("mixing weights sum to {total}, not 1")));
        }
        if !skewed && clusters.iter().any(|c| !c.is_symmetric()) {
            return Err(Error::Domain("unskewed model with nonzero lambda".into()));
        }
        Ok(Self { spec, skewed, weights, clusters })
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn skewed(&self) -> bool {
        self.skewed
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn clusters(&self) -> &[ClusterParams] {
        &self.clusters
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// `ln Σ_m γ_m f_s(x | θ_m)`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let log_dets: Vec<f64> = self.clusters.iter().map(|c| c.omega().log_det()).collect();
        let terms: Vec<f64> = self
            .clusters
            .iter()
            .zip(&self.weights)
            .zip(&log_dets)
            .map(|((c, &w), &ld)| w.ln() + eval_point(&self.spec, c, ld, x).log_pdf)
            .collect();
        Ok(log_sum_exp(&terms))
    }
}

/// Stopping rule and bookkeeping for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Absolute log-likelihood change that counts as converged.
    pub delta: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// `false` pins `λ = 0` (plain RES mixture).
    pub skewed: bool,
    /// A cluster collapses when its responsibility mass drops to `collapse_tol · N`.
    pub collapse_tol: f64,
    pub max_reseeds: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            delta: 1e-6,
            max_iter: 2000,
            seed: 0,
            skewed: true,
            collapse_tol: 1e-6,
            max_reseeds: 3,
            execution: Execution::Sequential,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EMReport {
    pub model: MixtureModel,
    /// Log-likelihood after each M-step.
    pub ll_trace: Vec<f64>,
    /// Log-likelihood of the initial model.
    pub initial_ll: f64,
    pub iterations: usize,
    pub converged: bool,
    pub init_seed: u64,
    /// Iterations (1-based) whose M-step was replaced by a cluster reseed.
    pub reseeds: Vec<usize>,
    /// Row-major `N × l` responsibilities of the returned model.
    pub responsibilities: Vec<f64>,
}

impl EMReport {
    pub fn final_ll(&self) -> f64 {
        self.ll_trace.last().copied().unwrap_or(self.initial_ll)
    }

    /// Hard assignment `argmax_m v_nm`, ties to the smaller index.
    pub fn hard_labels(&self) -> Vec<usize> {
        hard_assign(&self.responsibilities, self.model.n_clusters())
    }
}

pub fn hard_assign(v: &[f64], l: usize) -> Vec<usize> {
    v.chunks_exact(l)
        .map(|row| {
            let mut best = 0;
            for m in 1..l {
                if row[m] > row[best] {
                    best = m;
                }
            }
            best
        })
        .collect()
}

/// Runs EM from a k-means initialization until `|Δ ln L| < δ` or `max_iter`.
pub fn fit(data: &DataSet, l: usize, spec: &FamilySpec, config: &FitConfig) -> Result<EMReport> {
    config.validate()?;
    let model = init(data, l, spec, config.skewed, config.seed)?;
    fit_from(data, model, config)
}

/// Runs EM from a given starting model.
pub fn fit_from(data: &DataSet, start: MixtureModel, config: &FitConfig) -> Result<EMReport> {
    config.validate()?;
    let mut model = start;
    let mut buf = e_step(data, &model, config.execution)?;
    let initial_ll = buf.ll;
    let mut prev_ll = initial_ll;
    let mut trace = Vec::new();
    let mut reseeds = Vec::new();
    let mut converged = false;
    for it in 1..=config.max_iter {
        model = match m_step(data, &buf, &model, config.collapse_tol) {
            Ok(m) => m,
            Err(Error::ClusterCollapse { cluster, mass }) => {
                if reseeds.len() >= config.max_reseeds {
                    return Err(Error::ClusterCollapse { cluster, mass });
                }
                reseeds.push(it);
                reseed(data, &model, &buf, cluster)?
            }
            Err(e) => return Err(e),
        };
        buf = e_step(data, &model, config.execution)?;
        trace.push(buf.ll);
        if (buf.ll - prev_ll).abs() < config.delta {
            converged = true;
            break;
        }
        prev_ll = buf.ll;
    }
    Ok(EMReport {
        iterations: trace.len(),
        ll_trace: trace,
        initial_ll,
        converged,
        init_seed: config.seed,
        reseeds,
        responsibilities: buf.v,
        model,
    })
}

// Moves a collapsed cluster to the worst-explained point with pooled scatter.
fn reseed(
    data: &DataSet,
    model: &MixtureModel,
    buf: &EStepBuffers,
    cluster: usize,
) -> Result<MixtureModel> {
    let r = model.dim();
    let l = model.n_clusters();
    let worst = buf
        .point_ll
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (n, &v)| if v < acc.1 { (n, v) } else { acc })
        .0;
    let mut pooled = vec![0.0; r * r];
    for (c, &w) in model.clusters.iter().zip(&model.weights) {
        for (p, s) in pooled.iter_mut().zip(c.scatter().as_slice()) {
            *p += w * s;
        }
    }
    let scatter = SpdMatrix::from_symmetrized(r, pooled, Jitter::default())
        .map_err(|_| Error::DegenerateCluster(cluster))?;
    let lambda = if model.skewed { vec![1.0; r] } else { vec![0.0; r] };
    let mut clusters = model.clusters.clone();
    clusters[cluster] = ClusterParams::new(data.point(worst).to_vec(), lambda, scatter)?;
    let share = 1.0 / l as f64;
    let rest: f64 = (0..l).filter(|&m| m != cluster).map(|m| model.weights[m]).sum();
    let weights = (0..l)
        .map(|m| {
            if m == cluster {
                share
            } else if rest > 0.0 {
                model.weights[m] / rest * (1.0 - share)
            } else {
                share
            }
        })
        .collect();
    MixtureModel::new(model.spec.clone(), model.skewed, normalize(weights), clusters)
}

pub(crate) fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    // push any rounding residue onto the largest weight
    let resid = 1.0 - w.iter().sum::<f64>();
    if let Some(i) = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])) {
        w[i] += resid;
    }
    w
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
