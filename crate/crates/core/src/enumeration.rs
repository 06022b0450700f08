//! Schwarz BIC over a range of candidate cluster counts.

use std::f64::consts::LN_2;

use crate::data::DataSet;
use crate::em::{e_step, fit, hard_assign, EMReport, FitConfig, MixtureModel};
use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::par::Execution;
use crate::resk::eval_point;

/// Which per-cluster likelihood form to score with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BicForm {
    /// Symmetric: `-Σρ(t) + N_m ln(N_m/N) - (N_m/2) ln|S|`, `q = r(r+3)/2`.
    Res,
    /// Skewed: adds `N_m ln 2 + Σ ln F(κ)`, uses `t̲` and `Ω`, `q = r(r+5)/2`.
    Resk,
}

impl BicForm {
    pub fn for_model(model: &MixtureModel) -> Self {
        if model.skewed() {
            BicForm::Resk
        } else {
            BicForm::Res
        }
    }

    /// Free parameters per cluster.
    pub fn q(self, r: usize) -> usize {
        match self {
            BicForm::Res => r * (r + 3) / 2,
            BicForm::Resk => r * (r + 5) / 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicTerms {
    /// `ln L(θ̂_m | X_m)` per cluster.
    pub cluster_ll: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    /// `(q l / 2) ln N`.
    pub penalty: f64,
}

impl BicTerms {
    pub fn score(&self) -> f64 {
        self.cluster_ll.iter().sum::<f64>() - self.penalty
    }
}

/// `(q l / 2) ln N`.
pub fn bic_penalty(form: BicForm, r: usize, l: usize, n: usize) -> f64 {
    (form.q(r) * l) as f64 / 2.0 * (n as f64).ln()
}

/// Per-cluster log-likelihoods on the hard partition `labels` (cluster index per point).
pub fn bic_terms(model: &MixtureModel, data: &DataSet, labels: &[usize], form: BicForm) -> Result<BicTerms> {
    let l = model.n_clusters();
    let n = data.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    let spec = model.spec();
    let mut sizes = vec![0usize; l];
    let mut sums = vec![0.0; l];
    let log_dets: Vec<f64> = model.clusters().iter().map(|c| c.omega().log_det()).collect();
    for (x, &m) in data.iter().zip(labels) {
        if m >= l {
            return Err(Error::DimensionMismatch { expected: l, got: m + 1 });
        }
        sizes[m] += 1;
        let c = &model.clusters()[m];
        sums[m] += match form {
            BicForm::Resk => {
                let p = eval_point(spec, c, log_dets[m], x);
                spec.log_g_unchecked(p.t_bar) + spec.log_cdf_1d(p.kappa)
            }
            BicForm::Res => {
                let d: Vec<f64> = x.iter().zip(c.xi()).map(|(a, b)| a - b).collect();
                spec.log_g_unchecked(c.scatter().inv_quad_form(&d))
            }
        };
    }
    let mut cluster_ll = Vec::with_capacity(l);
    for m in 0..l {
        let nm = sizes[m];
        if nm == 0 {
            return Err(Error::EmptyCluster(m));
        }
        let nmf = nm as f64;
        let c = &model.clusters()[m];
        let base = sums[m] + nmf * (nmf / n as f64).ln();
        cluster_ll.push(match form {
            BicForm::Resk => base + nmf * LN_2 - 0.5 * nmf * log_dets[m],
            BicForm::Res => base - 0.5 * nmf * c.scatter().log_det(),
        });
    }
    Ok(BicTerms {
        cluster_ll,
        cluster_sizes: sizes,
        penalty: bic_penalty(form, data.dim(), l, n),
    })
}

/// Schwarz BIC of a fit, hard-assigning by `argmax_m v_nm`.
pub fn bic_schwarz(report: &EMReport, data: &DataSet) -> Result<f64> {
    let model = &report.model;
    let l = model.n_clusters();
    let labels = if report.responsibilities.len() == data.len() * l {
        report.hard_labels()
    } else {
        hard_assign(&e_step(data, model, Execution::Sequential)?.v, l)
    };
    Ok(bic_terms(model, data, &labels, BicForm::for_model(model))?.score())
}

#[derive(Debug, Clone)]
pub struct BicSweep {
    pub l_min: usize,
    pub l_max: usize,
    /// Score per candidate `l_min..=l_max`; `-∞` where the fit or score failed.
    pub scores: Vec<f64>,
    pub fits: Vec<Result<EMReport>>,
    pub k_hat: usize,
}

impl BicSweep {
    pub fn fit_for(&self, l: usize) -> Option<&EMReport> {
        self.fits.get(l.checked_sub(self.l_min)?)?.as_ref().ok()
    }

    pub fn best(&self) -> &EMReport {
        self.fit_for(self.k_hat).expect("k_hat has a successful fit")
    }
}

/// Fits every `l` in `l_min..=l_max` (init seed `config.seed + l`) and picks the
/// BIC maximizer, ties going to the smaller `l`.
pub fn enumerate(
    data: &DataSet,
    l_min: usize,
    l_max: usize,
    spec: &FamilySpec,
    config: &FitConfig,
    exec: Execution,
) -> Result<BicSweep> {
    if l_min == 0 || l_max < l_min {
        return Err(Error::Config(format!("invalid candidate range {l_min}..={l_max}")));
    }
    let results: Vec<Result<(EMReport, f64)>> = exec.map(l_max - l_min + 1, |i| {
        let l = l_min + i;
        let cfg = FitConfig { seed: config.seed.wrapping_add(l as u64), ..*config };
        let rep = fit(data, l, spec, &cfg)?;
        let score = bic_schwarz(&rep, data)?;
        Ok((rep, score))
    });
    let mut scores = Vec::with_capacity(results.len());
    let mut fits = Vec::with_capacity(results.len());
    let mut first_err = None;
    for r in results {
        match r {
            Ok((rep, s)) if s.is_finite() => {
                scores.push(s);
                fits.push(Ok(rep));
            }
            Ok((_, s)) => {
                scores.push(f64::NEG_INFINITY);
                fits.push(Err(Error::Numerical(format!("non-finite BIC {s}"))));
            }
            Err(e) => {
                first_err.get_or_insert_with(|| e.clone());
                scores.push(f64::NEG_INFINITY);
                fits.push(Err(e));
            }
        }
    }
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    let Some(b) = best else {
        return Err(first_err.unwrap_or_else(|| Error::Numerical("no candidate could be scored".into())));
    };
    Ok(BicSweep { l_min, l_max, scores, fits, k_hat: l_min + b })
}
