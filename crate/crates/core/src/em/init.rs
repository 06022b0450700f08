use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::numerics::{Jitter, SpdMatrix};
use crate::resk::ClusterParams;

use super::{normalize, MixtureModel};

const LLOYD_ITERS: usize = 10;
const RESTARTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Row-major `l × r`.
    pub centers: Vec<f64>,
    pub labels: Vec<usize>,
    pub sse: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &[f64], r: usize) -> (usize, f64) {
    centers
        .chunks_exact(r)
        .enumerate()
        .map(|(m, c)| (m, sq_dist(x, c)))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
}

fn kmeans_once(data: &DataSet, l: usize, rng: &mut ChaCha8Rng) -> KMeans {
    let r = data.dim();
    let n = data.len();
    let mut centers = Vec::with_capacity(l * r);
    centers.extend_from_slice(data.point(rng.random_range(0..n)));
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[..r])).collect();
    while centers.len() < l * r {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let start = centers.len();
        centers.extend_from_slice(data.point(pick));
        for (d, x) in d2.iter_mut().zip(data.iter()) {
            *d = d.min(sq_dist(x, &centers[start..]));
        }
    }

    let mut labels = vec![0; n];
    for _ in 0..LLOYD_ITERS {
        for (lab, x) in labels.iter_mut().zip(data.iter()) {
            *lab = nearest(x, &centers, r).0;
        }
        let mut sums = vec![0.0; l * r];
        let mut counts = vec![0usize; l];
        for (&lab, x) in labels.iter().zip(data.iter()) {
            counts[lab] += 1;
            for k in 0..r {
                sums[lab * r + k] += x[k];
            }
        }
        for m in 0..l {
            // an emptied cluster keeps its previous center
            if counts[m] > 0 {
                for k in 0..r {
                    centers[m * r + k] = sums[m * r + k] / counts[m] as f64;
                }
            }
        }
    }
    let mut sse = 0.0;
    for (lab, x) in labels.iter_mut().zip(data.iter()) {
        let (m, d) = nearest(x, &centers, r);
        *lab = m;
        sse += d;
    }
    KMeans { centers, labels, sse }
}

/// k-means++ seeding followed by Lloyd iterations; best of several restarts by SSE.
pub fn kmeans(data: &DataSet, l: usize, seed: u64) -> Result<KMeans> {
    if l == 0 || data.len() < l {
        return Err(Error::TooFewPoints { needed: l.max(1), got: data.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..RESTARTS {
        let km = kmeans_once(data, l, &mut rng);
        if best.as_ref().is_none_or(|b| km.sse < b.sse) {
            best = Some(km);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Starting model: k-means centroids, `λ = 1` (or `0` unskewed), per-cluster
/// covariance about the centroid and hard-assignment proportions.
pub fn init(data: &DataSet, l: usize, spec: &FamilySpec, skewed: bool, seed: u64) -> Result<MixtureModel> {
    let r = data.dim();
    if spec.dim() != r {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: r });
    }
    let needed = l.max(1) * (r + 1);
    if data.len() < needed {
        return Err(Error::TooFewPoints { needed, got: data.len() });
    }
    let km = kmeans(data, l, seed)?;
    let n = data.len() as f64;
    let mut clusters = Vec::with_capacity(l);
    let mut weights = Vec::with_capacity(l);
    for m in 0..l {
        let xi = km.centers[m * r..(m + 1) * r].to_vec();
        let mut cov = vec![0.0; r * r];
        let mut count = 0usize;
        for (&lab, x) in km.labels.iter().zip(data.iter()) {
            if lab != m {
                continue;
            }
            count += 1;
            for a in 0..r {
                for b in 0..r {
                    cov[a * r + b] += (x[a] - xi[a]) * (x[b] - xi[b]);
                }
            }
        }
        if count == 0 {
            return Err(Error::DegenerateCluster(m));
        }
        cov.iter_mut().for_each(|c| *c /= count as f64);
        let scatter = SpdMatrix::from_symmetrized(r, cov, Jitter::default())
            .map_err(|_| Error::DegenerateCluster(m))?;
        let lambda = vec![if skewed { 1.0 } else { 0.0 }; r];
        clusters.push(ClusterParams::new(xi, lambda, scatter).map_err(|_| Error::DegenerateCluster(m))?);
        weights.push(count as f64 / n);
    }
    MixtureModel::new(spec.clone(), skewed, normalize(weights), clusters)
}
