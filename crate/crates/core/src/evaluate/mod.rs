//! Metrics and Monte-Carlo experiment drivers.

mod metrics;

pub use metrics::{
    confusion, confusion_from_labels, kl_divergence, ConfusionMatrix, KlEstimate, KlMode, LN_FLOOR,
};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::em::{fit, EMReport, FitConfig, MixtureModel};
use crate::enumeration::enumerate;
use crate::error::{Error, Result};
use crate::family::{FamilyKind, FamilySpec};
use crate::par::Execution;
use crate::simulate::{contaminate, ContaminationSpec, Preset};

/// A family plus whether the skewed (RESK) or symmetric (RES) model is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub family: FamilyKind,
    pub skewed: bool,
}

impl Estimator {
    pub fn new(family: FamilyKind, skewed: bool) -> Self {
        Self { family, skewed }
    }

    /// Parses `gaussian`, `t`, `huber` or their `skew-` variants.
    pub fn parse(name: &str, nu: f64, q_h: f64, huber_dof: Option<usize>) -> Result<Self> {
        let (skewed, base) = match name.strip_prefix("skew-") {
            Some(b) => (true, b),
            None => (false, name),
        };
        let family = match base {
            "gaussian" => FamilyKind::Gaussian,
            "t" => FamilyKind::StudentT { nu },
            "huber" => FamilyKind::Huber { q_h, quantile_dof: huber_dof },
            _ => return Err(Error::Config(format!("unknown estimator `{name}`"))),
        };
        Ok(Self { family, skewed })
    }

    /// The six estimators compared throughout: Gaussian, t, Huber and their
    /// skewed versions. The Huber threshold uses the data dimension as dof.
    pub fn standard_set(nu: f64, q_h: f64) -> Vec<Self> {
        let kinds = [
            FamilyKind::Gaussian,
            FamilyKind::StudentT { nu },
            FamilyKind::Huber { q_h, quantile_dof: None },
        ];
        [false, true]
            .into_iter()
            .flat_map(|s| kinds.into_iter().map(move |k| Self::new(k, s)))
            .collect()
    }

    pub fn spec(&self, dim: usize) -> Result<FamilySpec> {
        FamilySpec::new(self.family, dim)
    }

    pub fn name(&self) -> String {
        let base = match self.family {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::StudentT { .. } => "t",
            FamilyKind::Huber { .. } => "huber",
        };
        if self.skewed {
            format!("skew-{base}")
        } else {
            base.to_string()
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, 3.0, 0.8, None)
    }
}

/// Seed of Monte-Carlo run `run` under base seed `seed`.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed.wrapping_add(run as u64)
}

/// Outcome of fitting one estimator to one contaminated sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutcome {
    pub kl_true_k: Option<f64>,
    pub kl_enum: Option<f64>,
    pub k_hat: Option<usize>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub confusion_avg: Option<f64>,
    pub error: Option<Error>,
}

/// Fits with `K` known (and optionally enumerates) on `data`, scoring against
/// `truth` on the outlier-free `clean` points.
pub fn evaluate_run(
    data: &DataSet,
    clean: &DataSet,
    truth: &MixtureModel,
    est: &Estimator,
    fit_cfg: &FitConfig,
    enum_range: Option<(usize, usize)>,
    kl_mode: KlMode,
) -> RunOutcome {
    let mut out = RunOutcome::default();
    let k = truth.n_clusters();
    let spec = match est.spec(data.dim()) {
        Ok(s) => s,
        Err(e) => {
            out.error = Some(e);
            return out;
        }
    };
    let cfg = FitConfig { skewed: est.skewed, ..*fit_cfg };
    match fit(data, k, &spec, &cfg) {
        Ok(rep) => {
            out.iterations = Some(rep.iterations);
            out.converged = Some(rep.converged);
            out.kl_true_k = kl_divergence(truth, &rep.model, clean, kl_mode).ok().map(|e| e.value);
            if let Some(labels) = data.labels() {
                out.confusion_avg =
                    confusion(labels, &rep.responsibilities, k, true).ok().map(|c| c.avg);
            }
        }
        Err(e) => out.error = Some(e),
    }
    if let Some((lo, hi)) = enum_range {
        match enumerate(data, lo, hi, &spec, &cfg, Execution::Sequential) {
            Ok(sweep) => {
                out.k_hat = Some(sweep.k_hat);
                out.kl_enum =
                    kl_divergence(truth, &sweep.best().model, clean, kl_mode).ok().map(|e| e.value);
            }
            Err(e) => {
                out.error.get_or_insert(e);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct BreakdownConfig {
    pub preset: Preset,
    pub eps_list: Vec<f64>,
    pub estimators: Vec<Estimator>,
    pub nk: usize,
    pub mc: usize,
    pub seed: u64,
    pub fit: FitConfig,
    pub enum_range: Option<(usize, usize)>,
    pub kl_mode: KlMode,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownRow {
    pub epsilon: f64,
    pub estimator: String,
    pub kl_true_k: f64,
    pub kl_enum: f64,
    pub detection: f64,
    pub iter_mean: f64,
    pub iter_std: f64,
    pub confusion_avg: f64,
    pub runs: usize,
    pub failures: usize,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Per-run outcomes of a breakdown sweep, indexed `[eps][estimator][run]`.
pub fn breakdown_runs(cfg: &BreakdownConfig) -> Result<Vec<Vec<Vec<RunOutcome>>>> {
    if cfg.eps_list.iter().any(|e| !(0.0..0.5).contains(e)) {
        return Err(Error::Config("epsilon values must lie in [0, 0.5)".into()));
    }
    let truth = cfg.preset.true_model();
    let (n_eps, n_est, mc) = (cfg.eps_list.len(), cfg.estimators.len(), cfg.mc);
    let flat = cfg.execution.map(n_eps * mc, |cell| {
        let (ei, run) = (cell / mc, cell % mc);
        let seed = run_seed(cfg.seed, run);
        let prepared = cfg.preset.generate(cfg.nk, seed).and_then(|clean| {
            let spec = ContaminationSpec::paper_box(cfg.eps_list[ei])?;
            let data = contaminate(&clean, &spec, seed)?;
            Ok((clean, data))
        });
        cfg.estimators
            .iter()
            .map(|est| match &prepared {
                Ok((clean, data)) => {
                    let fit_cfg = FitConfig { seed, ..cfg.fit };
                    evaluate_run(data, clean, &truth, est, &fit_cfg, cfg.enum_range, cfg.kl_mode)
                }
                Err(e) => RunOutcome { error: Some(e.clone()), ..Default::default() },
            })
            .collect::<Vec<_>>()
    });
    let mut out = vec![vec![Vec::with_capacity(mc); n_est]; n_eps];
    for (cell, per_est) in flat.into_iter().enumerate() {
        for (j, o) in per_est.into_iter().enumerate() {
            out[cell / mc][j].push(o);
        }
    }
    Ok(out)
}

/// Mean KL (known and enumerated `K`), detection rate, iteration statistics and
/// confusion average per `(ε, estimator)`.
pub fn breakdown_sweep(cfg: &BreakdownConfig) -> Result<Vec<BreakdownRow>> {
    let runs = breakdown_runs(cfg)?;
    let k = cfg.preset.n_clusters();
    let mut rows = Vec::new();
    for (ei, per_est) in runs.iter().enumerate() {
        for (j, outcomes) in per_est.iter().enumerate() {
            let pick = |f: fn(&RunOutcome) -> Option<f64>| -> Vec<f64> {
                outcomes.iter().filter_map(f).collect()
            };
            let iters = pick(|o| o.iterations.map(|i| i as f64));
            let hats: Vec<usize> = outcomes.iter().filter_map(|o| o.k_hat).collect();
            let detection = if hats.is_empty() {
                f64::NAN
            } else {
                hats.iter().filter(|&&h| h == k).count() as f64 / hats.len() as f64
            };
            rows.push(BreakdownRow {
                epsilon: cfg.eps_list[ei],
                estimator: cfg.estimators[j].name(),
                kl_true_k: mean(&pick(|o| o.kl_true_k)),
                kl_enum: mean(&pick(|o| o.kl_enum)),
                detection,
                iter_mean: mean(&iters),
                iter_std: std_dev(&iters),
                confusion_avg: mean(&pick(|o| o.confusion_avg)),
                runs: outcomes.len(),
                failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
            });
        }
    }
    Ok(rows)
}

/// Inclusive arithmetic grid `lo, lo + step, ..., ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.hi >= self.lo) {
            return Err(Error::Config(format!("invalid grid axis {self:?}")));
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone)]
pub struct SensitivityConfig {
    pub preset: Preset,
    pub nk: usize,
    pub estimator: Estimator,
    pub x: Axis,
    pub y: Axis,
    pub mc: usize,
    pub seed: u64,
    pub fit: FitConfig,
    /// `None` fits with the true `K`.
    pub enum_range: Option<(usize, usize)>,
    pub kl_mode: KlMode,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over `(y, x)`; `NaN` where every repeat failed.
    pub mean_kl: Vec<f64>,
    pub failures: Vec<usize>,
}

impl SensitivityGrid {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.mean_kl[iy * self.xs.len() + ix]
    }
}

/// Mean KL when one random sample is replaced by an outlier at each grid point.
pub fn sensitivity_grid(cfg: &SensitivityConfig) -> Result<SensitivityGrid> {
    let xs = cfg.x.values()?;
    let ys = cfg.y.values()?;
    if cfg.mc == 0 {
        return Err(Error::Config("mc must be >= 1".into()));
    }
    let truth = cfg.preset.true_model();
    let (nx, mc) = (xs.len(), cfg.mc);
    let flat = cfg.execution.map(xs.len() * ys.len() * mc, |cell| {
        let (pos, rep) = (cell / mc, cell % mc);
        let (ix, iy) = (pos % nx, pos / nx);
        let seed = run_seed(cfg.seed, rep);
        let clean = cfg.preset.generate(cfg.nk, seed)?;
        let mut data = clean.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(crate::simulate::CONTAMINATION_STREAM);
        let victim = rng.random_range(0..data.len());
        data.point_mut(victim).copy_from_slice(&[xs[ix], ys[iy]]);
        data.labels_mut().expect("preset labels")[victim] = 0;
        let out = evaluate_run(
            &data,
            &clean,
            &truth,
            &cfg.estimator,
            &FitConfig { seed, ..cfg.fit },
            cfg.enum_range,
            cfg.kl_mode,
        );
        let kl = if cfg.enum_range.is_some() { out.kl_enum } else { out.kl_true_k };
        kl.ok_or_else(|| out.error.unwrap_or(Error::Numerical("no KL value".into())))
    });
    let cells = xs.len() * ys.len();
    let mut mean_kl = Vec::with_capacity(cells);
    let mut failures = Vec::with_capacity(cells);
    for chunk in flat.chunks(mc) {
        let ok: Vec<f64> = chunk.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        failures.push(mc - ok.len());
        mean_kl.push(mean(&ok));
    }
    Ok(SensitivityGrid { xs, ys, mean_kl, failures })
}

/// Fits a t mixture for each `ν` and returns the one closest to `truth` in KL.
#[allow(clippy::too_many_arguments)]
pub fn nu_oracle(
    data: &DataSet,
    eval_points: &DataSet,
    truth: &MixtureModel,
    nu_set: &[f64],
    skewed: bool,
    l: usize,
    config: &FitConfig,
    kl_mode: KlMode,
) -> Result<(f64, EMReport)> {
    if nu_set.is_empty() {
        return Err(Error::Config("nu set is empty".into()));
    }
    let mut best: Option<(f64, f64, EMReport)> = None;
    for &nu in nu_set {
        let spec = FamilySpec::student_t(nu, data.dim())?;
        let rep = fit(data, l, &spec, &FitConfig { skewed, ..*config })?;
        let kl = kl_divergence(truth, &rep.model, eval_points, kl_mode)?.value;
        if best.as_ref().is_none_or(|b| kl < b.1) {
            best = Some((nu, kl, rep));
        }
    }
    let (nu, _, rep) = best.expect("nonempty nu set");
    Ok((nu, rep))
}
