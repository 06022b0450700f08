use serde::Serialize;

use crate::data::DataSet;
use crate::em::{hard_assign, MixtureModel};
use crate::error::{Error, Result};

/// Lower clamp for `ln q(x)` in the divergence.
pub const LN_FLOOR: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlMode {
    /// `Σ_i p(x_i) ln(p(x_i)/q(x_i))`.
    #[default]
    Weighted,
    /// `(1/N) Σ_i ln(p(x_i)/q(x_i))`.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEstimate {
    pub value: f64,
    /// Points where `ln q` hit [`LN_FLOOR`].
    pub floored: usize,
}

/// Divergence of `q` from `p` over `points`.
pub fn kl_divergence(p: &MixtureModel, q: &MixtureModel, points: &DataSet, mode: KlMode) -> Result<KlEstimate> {
    let mut total = 0.0;
    let mut floored = 0;
    for x in points.iter() {
        let lp = p.log_density(x)?;
        let mut lq = q.log_density(x)?;
        if lq.is_nan() || lp.is_nan() {
            return Err(Error::UndefinedDensity(format!("log density is NaN at {x:?}")));
        }
        if lq < LN_FLOOR {
            lq = LN_FLOOR;
            floored += 1;
        }
        total += match mode {
            KlMode::Weighted => lp.exp() * (lp - lq),
            KlMode::MonteCarlo => lp - lq,
        };
    }
    if mode == KlMode::MonteCarlo && !points.is_empty() {
        total /= points.len() as f64;
    }
    Ok(KlEstimate { value: total, floored })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    /// Row = true class `1..=K`, column = matched predicted cluster.
    pub counts: Vec<Vec<usize>>,
    pub percents: Vec<Vec<f64>>,
    /// Mean of the diagonal percentages over non-empty classes.
    pub avg: f64,
    /// `perm[k]` is the predicted cluster matched to class `k + 1`.
    pub perm: Vec<usize>,
}

/// Confusion matrix from hard cluster indices, matching clusters to classes by
/// the permutation with the largest diagonal. Label `0` points are skipped
/// when `exclude_outliers` is set.
pub fn confusion_from_labels(
    true_labels: &[u32],
    predicted: &[usize],
    l: usize,
    exclude_outliers: bool,
) -> Result<ConfusionMatrix> {
    if true_labels.len() != predicted.len() {
        return Err(Error::DimensionMismatch { expected: true_labels.len(), got: predicted.len() });
    }
    let k = true_labels.iter().copied().max().unwrap_or(0) as usize;
    if k > 8 {
        return Err(Error::TooManyClasses(k));
    }
    if k != l {
        return Err(Error::DimensionMismatch { expected: k, got: l });
    }
    let mut raw = vec![vec![0usize; l]; k];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        if t == 0 {
            if exclude_outliers {
                continue;
            }
            return Err(Error::Domain("outlier label 0 present; set exclude_outliers".into()));
        }
        if p >= l {
            return Err(Error::DimensionMismatch { expected: l, got: p + 1 });
        }
        raw[t as usize - 1][p] += 1;
    }
    let perm = best_permutation(&raw);
    let counts: Vec<Vec<usize>> = raw.iter().map(|row| perm.iter().map(|&c| row[c]).collect()).collect();
    let mut diag = Vec::new();
    let percents = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                return vec![0.0; row.len()];
            }
            let pr: Vec<f64> = row.iter().map(|&c| 100.0 * c as f64 / total as f64).collect();
            diag.push(pr[i]);
            pr
        })
        .collect();
    let avg = if diag.is_empty() { 0.0 } else { diag.iter().sum::<f64>() / diag.len() as f64 };
    Ok(ConfusionMatrix { counts, percents, avg, perm })
}

/// [`confusion_from_labels`] after hard-assigning row-major responsibilities.
pub fn confusion(true_labels: &[u32], v: &[f64], l: usize, exclude_outliers: bool) -> Result<ConfusionMatrix> {
    if v.len() != true_labels.len() * l {
        return Err(Error::DimensionMismatch { expected: true_labels.len() * l, got: v.len() });
    }
    confusion_from_labels(true_labels, &hard_assign(v, l), l, exclude_outliers)
}

// Exhaustive search on (diagonal count, mean diagonal percent). Both keys only
// depend on the matched entries, so the outcome does not depend on cluster ids.
fn best_permutation(raw: &[Vec<usize>]) -> Vec<usize> {
    let k = raw.len();
    let totals: Vec<usize> = raw.iter().map(|row| row.iter().sum()).collect();
    let key = |perm: &[usize]| {
        let count: usize = (0..k).map(|i| raw[i][perm[i]]).sum();
        let pct: f64 = (0..k)
            .filter(|&i| totals[i] > 0)
            .map(|i| raw[i][perm[i]] as f64 / totals[i] as f64)
            .sum();
        (count, pct)
    };
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_key = key(&perm);
    while next_permutation(&mut perm) {
        let cur = key(&perm);
        if cur.0 > best_key.0 || (cur.0 == best_key.0 && cur.1 > best_key.1) {
            best_key = cur;
            best.clone_from(&perm);
        }
    }
    best
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
