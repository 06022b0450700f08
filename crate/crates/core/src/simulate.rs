//! Skew-Gaussian and skew-t samplers, replacement contamination and the
//! two synthetic presets.
//!
//! Every draw comes from a `ChaCha8Rng` seeded with the caller's seed; cluster
//! `k` (0-based) of a preset reads stream `k`, contamination reads
//! [`CONTAMINATION_STREAM`].

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::em::MixtureModel;
use crate::error::{Error, Result};
use crate::family::{FamilyKind, FamilySpec};
use crate::numerics::SpdMatrix;
use crate::resk::ClusterParams;

pub const CONTAMINATION_STREAM: u64 = 0xC0;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_params(xi: &[f64], s: &SpdMatrix, lambda: &[f64]) -> Result<()> {
    for len in [xi.len(), lambda.len()] {
        if len != s.dim() {
            return Err(Error::DimensionMismatch { expected: s.dim(), got: len });
        }
    }
    Ok(())
}

// x = ξ + (λ|z₀| + L z) · scale, with scale drawn per point
fn draw(
    xi: &[f64],
    s: &SpdMatrix,
    lambda: &[f64],
    n: usize,
    rng: &mut ChaCha8Rng,
    mut scale: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Vec<f64> {
    let r = xi.len();
    let mut out = Vec::with_capacity(n * r);
    let mut z = vec![0.0; r];
    let mut lz = vec![0.0; r];
    for _ in 0..n {
        let z0: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        s.chol_mul(&z, &mut lz);
        let k = scale(rng);
        for i in 0..r {
            out.push(xi[i] + (lambda[i] * z0 + lz[i]) * k);
        }
    }
    out
}

fn skew_gaussian_stream(xi: &[f64], s: &SpdMatrix, lambda: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    draw(xi, s, lambda, n, rng, |_| 1.0)
}

fn skew_t_stream(
    xi: &[f64],
    s: &SpdMatrix,
    lambda: &[f64],
    nu: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let chi = ChiSquared::new(nu).map_err(|e| Error::Domain(format!("nu = {nu}: {e}")))?;
    Ok(draw(xi, s, lambda, n, rng, |g| {
        let w: f64 = chi.sample(g);
        (nu / w).sqrt()
    }))
}

/// `n` skew-Gaussian draws `ξ + λ|z₀| + chol(S) z`, row-major.
pub fn sample_skew_gaussian(xi: &[f64], s: &SpdMatrix, lambda: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    check_params(xi, s, lambda)?;
    Ok(skew_gaussian_stream(xi, s, lambda, n, &mut rng_for(seed, 0)))
}

/// `n` skew-t draws `ξ + (λ|z₀| + chol(S) z) / √(w/ν)`, `w ~ χ²_ν`, row-major.
pub fn sample_skew_t(xi: &[f64], s: &SpdMatrix, lambda: &[f64], nu: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_params(xi, s, lambda)?;
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("nu must be > 0, got {nu}")));
    }
    skew_t_stream(xi, s, lambda, nu, n, &mut rng_for(seed, 0))
}

/// Fraction of points to replace and the box the replacements are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub epsilon: f64,
    pub bounds: Vec<(f64, f64)>,
}

impl ContaminationSpec {
    pub fn new(epsilon: f64, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Domain(format!("epsilon must lie in [0, 1), got {epsilon}")));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Domain(format!("empty box side [{lo}, {hi}]")));
        }
        Ok(Self { epsilon, bounds })
    }

    /// `[-15, 45] × [-20, 30]`.
    pub fn paper_box(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, vec![(-15.0, 45.0), (-20.0, 30.0)])
    }

    /// `⌊εN⌋`, robust to `ε·N` landing just below an integer.
    pub fn count(&self, n: usize) -> usize {
        ((self.epsilon * n as f64) + 1e-9).floor() as usize
    }
}

/// Replaces `⌊εN⌋` uniformly chosen points by uniform draws from the box and
/// labels them `0`. Unlabelled data gets label `1` for every kept point.
pub fn contaminate(data: &DataSet, spec: &ContaminationSpec, seed: u64) -> Result<DataSet> {
    if spec.bounds.len() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), got: spec.bounds.len() });
    }
    let n = data.len();
    let k = spec.count(n);
    let mut out = data.clone();
    if out.labels().is_none() {
        out.set_labels(Some(vec![1; n]))?;
    }
    if k == 0 {
        return Ok(out);
    }
    let mut rng = rng_for(seed, CONTAMINATION_STREAM);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    for &i in &idx {
        for (v, &(lo, hi)) in out.point_mut(i).iter_mut().zip(&spec.bounds) {
            *v = rng.random_range(lo..hi);
        }
    }
    let labels = out.labels_mut().expect("labels set above");
    for &i in &idx {
        labels[i] = 0;
    }
    out.meta.insert("epsilon".into(), spec.epsilon.to_string());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Three skew-Gaussian clusters, sizes `(5, 4, 1) × N_K`.
    Dataset1,
    /// Two skew-t (`ν = 3`) clusters, `N_K` points each.
    Dataset2,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dataset1" => Ok(Preset::Dataset1),
            "dataset2" => Ok(Preset::Dataset2),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Dataset1 => "dataset1",
            Preset::Dataset2 => "dataset2",
        })
    }
}

pub const DATASET2_NU: f64 = 3.0;

struct ClusterDef {
    xi: [f64; 2],
    lambda: [f64; 2],
    s: [f64; 4],
    size: usize,
}

impl Preset {
    fn defs(self) -> Vec<ClusterDef> {
        let s1 = [0.2, 0.1, 0.1, 0.75];
        let s2 = [0.5, 0.25, 0.25, 0.5];
        let s3 = [1.0, 0.5, 0.5, 1.0];
        match self {
            Preset::Dataset1 => vec![
                ClusterDef { xi: [2.0, 3.5], lambda: [10.0, 4.0], s: s1, size: 5 },
                ClusterDef { xi: [6.0, 2.0], lambda: [1.0, -2.0], s: s2, size: 4 },
                ClusterDef { xi: [10.0, 3.0], lambda: [2.0, 1.0], s: s3, size: 1 },
            ],
            Preset::Dataset2 => vec![
                ClusterDef { xi: [2.0, 3.5], lambda: [4.0, 3.0], s: s1, size: 1 },
                ClusterDef { xi: [7.0, -2.0], lambda: [1.0, -2.0], s: s2, size: 1 },
            ],
        }
    }

    pub fn n_clusters(self) -> usize {
        self.defs().len()
    }

    /// Generating family (`skew-Gaussian` or `skew-t`, `ν = 3`), `r = 2`.
    pub fn family(self) -> FamilySpec {
        match self {
            Preset::Dataset1 => FamilySpec::gaussian(2),
            Preset::Dataset2 => FamilySpec::new(FamilyKind::StudentT { nu: DATASET2_NU }, 2)
                .expect("valid t family"),
        }
    }

    /// The generating mixture, with weights proportional to the cluster sizes.
    pub fn true_model(self) -> MixtureModel {
        let defs = self.defs();
        let total: usize = defs.iter().map(|d| d.size).sum();
        let clusters = defs
            .iter()
            .map(|d| {
                let s = SpdMatrix::new(2, d.s.to_vec()).expect("preset scatter is PD");
                ClusterParams::new(d.xi.to_vec(), d.lambda.to_vec(), s).expect("valid preset")
            })
            .collect();
        let weights = defs.iter().map(|d| d.size as f64 / total as f64).collect();
        MixtureModel::new(self.family(), true, weights, clusters).expect("valid preset model")
    }

    /// Outlier-free sample with labels `1..=K`.
    pub fn generate(self, nk: usize, seed: u64) -> Result<DataSet> {
        if nk == 0 {
            return Err(Error::Domain("N_K must be >= 1".into()));
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (k, d) in self.defs().iter().enumerate() {
            let s = SpdMatrix::new(2, d.s.to_vec())?;
            let n = d.size * nk;
            let mut rng = rng_for(seed, k as u64);
            let pts = match self {
                Preset::Dataset1 => skew_gaussian_stream(&d.xi, &s, &d.lambda, n, &mut rng),
                Preset::Dataset2 => skew_t_stream(&d.xi, &s, &d.lambda, DATASET2_NU, n, &mut rng)?,
            };
            points.extend(pts);
            labels.extend(std::iter::repeat_n(k as u32 + 1, n));
        }
        let mut data = DataSet::new(2, points, Some(labels))?;
        data.meta.insert("preset".into(), self.to_string());
        data.meta.insert("nk".into(), nk.to_string());
        data.meta.insert("seed".into(), seed.to_string());
        Ok(data)
    }
}

/// Preset sample with `ε` box contamination (`ε = 0` leaves it clean).
pub fn preset(name: &str, nk: usize, epsilon: f64, seed: u64) -> Result<DataSet> {
    let p: Preset = name.parse()?;
    let clean = p.generate(nk, seed)?;
    contaminate(&clean, &ContaminationSpec::paper_box(epsilon)?, seed)
}
