//! Command-line experiment runner.

pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::em::{fit, FitConfig};
use crate::enumeration::enumerate;
use crate::error::{Error, Result};
use crate::evaluate::{
    breakdown_sweep, confusion, run_seed, sensitivity_grid, Axis, BreakdownConfig, Estimator, KlMode,
    SensitivityConfig,
};
use crate::par::{with_threads, Execution};
use crate::simulate::{contaminate, preset, ContaminationSpec, Preset};

pub use io::{dataset_table, fmt_f64, load_csv, load_csvs, CsvSpec, CsvTable};

const WINE_FEATURES: [&str; 4] = ["volatile acidity", "residual sugar", "chlorides", "total sulfur dioxide"];
const CRABS_FEATURES: [&str; 5] = ["FL", "RW", "CL", "CW", "BD"];
const CRABS_LABELS: [&str; 2] = ["sp", "sex"];

#[derive(Debug, Parser)]
#[command(name = "resk", version, about = "Robust clustering with skewed elliptical mixtures")]
pub struct Cli {
    /// Worker threads for sweeps (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file holding the subcommand's parameters. Other flags must not be given with it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a preset dataset, optionally contaminated.
    Simulate(SimulateArgs),
    /// One EM run: model JSON plus log-likelihood trace.
    Fit(FitArgs),
    /// BIC table over a range of cluster counts.
    Enumerate(EnumerateArgs),
    /// Monte-Carlo sweep over contamination levels.
    Breakdown(BreakdownArgs),
    /// Mean KL over a grid of single-outlier positions.
    Sensitivity(SensitivityArgs),
    /// Confusion matrices on a labelled real dataset.
    Realdata(RealdataArgs),
}

/// EM and family tuning shared by all fitting commands.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmOpts {
    /// Degrees of freedom of the t family.
    #[arg(long, default_value_t = 3.0)]
    pub nu: f64,
    /// Huber tuning quantile.
    #[arg(long, default_value_t = 0.8)]
    pub qh: f64,
    /// Chi-square dof for the Huber threshold (default: data dimension).
    #[arg(long)]
    pub huber_dof: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub collapse_tol: f64,
    #[arg(long, default_value_t = 3)]
    pub max_reseeds: usize,
}

impl Default for EmOpts {
    fn default() -> Self {
        Self {
            nu: 3.0,
            qh: 0.8,
            huber_dof: None,
            delta: 1e-6,
            max_iter: 2000,
            collapse_tol: 1e-6,
            max_reseeds: 3,
        }
    }
}

impl EmOpts {
    fn estimator(&self, name: &str) -> Result<Estimator> {
        Estimator::parse(name, self.nu, self.qh, self.huber_dof)
    }

    fn fit_config(&self, seed: u64, skewed: bool) -> FitConfig {
        FitConfig {
            delta: self.delta,
            max_iter: self.max_iter,
            seed,
            skewed,
            collapse_tol: self.collapse_tol,
            max_reseeds: self.max_reseeds,
            execution: Execution::Sequential,
        }
    }
}

/// Input file selection.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataOpts {
    /// Input CSV; repeat for several files with the same columns.
    #[arg(long = "data")]
    pub data: Vec<PathBuf>,
    /// Feature columns, comma separated (default: all non-label columns).
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    /// Label column; repeat to combine several columns into one class.
    #[arg(long = "label-col")]
    pub label_col: Vec<String>,
    /// Z-standardize every feature.
    #[arg(long)]
    pub standardize: bool,
    /// Field delimiter (default `,`, or `;` for wine).
    #[arg(long)]
    pub delimiter: Option<char>,
}

impl DataOpts {
    fn load(&self, default_delim: char) -> Result<DataSet> {
        if self.data.is_empty() {
            return Err(Error::Config("no input file (--data)".into()));
        }
        let delim = self.delimiter.unwrap_or(default_delim);
        if !delim.is_ascii() {
            return Err(Error::Config(format!("delimiter `{delim}` is not ASCII")));
        }
        let spec = CsvSpec {
            features: self.features.clone(),
            labels: self.label_col.clone(),
            standardize: self.standardize,
            delimiter: delim as u8,
        };
        let paths: Vec<&Path> = self.data.iter().map(PathBuf::as_path).collect();
        load_csvs(&paths, &spec)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateArgs {
    #[arg(long, default_value = "dataset1")]
    pub preset: String,
    /// Points per cluster.
    #[arg(long, default_value_t = 50)]
    pub nk: usize,
    /// Fraction of replacement outliers.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        Self { preset: "dataset1".into(), nk: 50, eps: 0.0, seed: 0, out: None }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataOpts,
    /// Estimator: gaussian, t, huber or a skew- variant.
    #[arg(long, default_value = "skew-huber")]
    pub family: String,
    /// Number of clusters.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmOpts,
    /// Model JSON (default: stdout).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Log-likelihood trace CSV.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub trace: Option<PathBuf>,
}

impl Default for FitArgs {
    fn default() -> Self {
        Self {
            input: DataOpts::default(),
            family: "skew-huber".into(),
            k: 3,
            seed: 0,
            em: EmOpts::default(),
            out: None,
            trace: None,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub input: DataOpts,
    #[arg(long, default_value = "skew-huber")]
    pub family: String,
    #[arg(long, default_value_t = 1)]
    pub l_min: usize,
    #[arg(long, default_value_t = 6)]
    pub l_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmOpts,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for EnumerateArgs {
    fn default() -> Self {
        Self {
            input: DataOpts::default(),
            family: "skew-huber".into(),
            l_min: 1,
            l_max: 6,
            seed: 0,
            em: EmOpts::default(),
            out: None,
        }
    }
}

fn standard_names() -> Vec<String> {
    ["gaussian", "t", "huber", "skew-gaussian", "skew-t", "skew-huber"].map(String::from).to_vec()
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BreakdownArgs {
    #[arg(long, default_value = "dataset1")]
    pub preset: String,
    /// Contamination levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.03,0.04,0.05")]
    pub eps: Vec<f64>,
    /// Estimators, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "gaussian,t,huber,skew-gaussian,skew-t,skew-huber")]
    pub families: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub nk: usize,
    /// Monte-Carlo runs per cell.
    #[arg(long, default_value_t = 100)]
    pub mc: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also select the cluster count by BIC over `l_min..=l_max`.
    #[arg(long)]
    pub enumerate: bool,
    #[arg(long, default_value_t = 1)]
    pub l_min: usize,
    #[arg(long, default_value_t = 6)]
    pub l_max: usize,
    #[arg(long, value_enum, default_value = "weighted")]
    pub kl_mode: KlModeArg,
    #[command(flatten)]
    pub em: EmOpts,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for BreakdownArgs {
    fn default() -> Self {
        Self {
            preset: "dataset1".into(),
            eps: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            families: standard_names(),
            nk: 50,
            mc: 100,
            seed: 0,
            enumerate: false,
            l_min: 1,
            l_max: 6,
            kl_mode: KlModeArg::Weighted,
            em: EmOpts::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlModeArg {
    Weighted,
    MonteCarlo,
}

impl From<KlModeArg> for KlMode {
    fn from(k: KlModeArg) -> Self {
        match k {
            KlModeArg::Weighted => KlMode::Weighted,
            KlModeArg::MonteCarlo => KlMode::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityArgs {
    #[arg(long, default_value = "dataset1")]
    pub preset: String,
    #[arg(long, default_value = "skew-huber")]
    pub family: String,
    #[arg(long, default_value_t = 50)]
    pub nk: usize,
    /// Repeats per grid point.
    #[arg(long, default_value_t = 10)]
    pub mc: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Outlier x-coordinates as `lo:hi:step`.
    #[arg(long, default_value = "-15:45:5")]
    pub x: String,
    /// Outlier y-coordinates as `lo:hi:step`.
    #[arg(long, default_value = "-20:30:5")]
    pub y: String,
    #[arg(long)]
    pub enumerate: bool,
    #[arg(long, default_value_t = 1)]
    pub l_min: usize,
    #[arg(long, default_value_t = 6)]
    pub l_max: usize,
    #[arg(long, value_enum, default_value = "weighted")]
    pub kl_mode: KlModeArg,
    #[command(flatten)]
    pub em: EmOpts,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for SensitivityArgs {
    fn default() -> Self {
        Self {
            preset: "dataset1".into(),
            family: "skew-huber".into(),
            nk: 50,
            mc: 10,
            seed: 0,
            x: "-15:45:5".into(),
            y: "-20:30:5".into(),
            enumerate: false,
            l_min: 1,
            l_max: 6,
            kl_mode: KlModeArg::Weighted,
            em: EmOpts::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RealdataArgs {
    /// `wine`, `crabs` or `generic`; picks default columns and delimiter.
    #[arg(default_value = "generic")]
    pub dataset: String,
    #[command(flatten)]
    pub input: DataOpts,
    #[arg(long, value_delimiter = ',', default_value = "gaussian,skew-t,skew-huber")]
    pub families: Vec<String>,
    /// Single estimator; overrides `--families`.
    #[arg(long)]
    pub family: Option<String>,
    /// Fraction of replacement outliers drawn uniformly over the data range.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Number of clusters (default: number of classes).
    #[arg(long)]
    pub k: Option<usize>,
    /// Seeded contamination draws.
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmOpts,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RealdataArgs {
    fn default() -> Self {
        Self {
            dataset: "generic".into(),
            input: DataOpts::default(),
            families: ["gaussian", "skew-t", "skew-huber"].map(String::from).to_vec(),
            family: None,
            eps: 0.0,
            k: None,
            runs: 20,
            seed: 0,
            em: EmOpts::default(),
            out: None,
        }
    }
}

fn parse_axis(s: &str) -> Result<Axis> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("axis `{s}` is not lo:hi:step")))?;
    match parts[..] {
        [lo, hi, step] => {
            let a = Axis { lo, hi, step };
            a.values()?;
            Ok(a)
        }
        _ => Err(Error::Config(format!("axis `{s}` is not lo:hi:step"))),
    }
}

fn stamp<T: Serialize>(table: &mut CsvTable, command: &str, seed: u64, args: &T) -> Result<()> {
    table.meta.retain(|(k, _)| k != "seed");
    table.meta("command", command);
    table.meta("seed", seed);
    table.meta("version", env!("CARGO_PKG_VERSION"));
    let cfg = serde_json::to_string(args).map_err(|e| Error::Config(e.to_string()))?;
    table.meta("config", cfg);
    Ok(())
}

pub fn run_simulate(a: &SimulateArgs) -> Result<CsvTable> {
    let data = preset(&a.preset, a.nk, a.eps, a.seed)?;
    let mut t = dataset_table(&data);
    t.meta.retain(|(k, _)| k != "epsilon");
    stamp(&mut t, "simulate", a.seed, a)?;
    Ok(t)
}

#[derive(Debug, Serialize)]
struct ClusterDoc<'a> {
    weight: f64,
    xi: &'a [f64],
    lambda: &'a [f64],
    scatter_vech: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ModelDoc<'a> {
    family: crate::family::FamilyKind,
    estimator: String,
    dim: usize,
    seed: u64,
    iterations: usize,
    converged: bool,
    final_ll: f64,
    clusters: Vec<ClusterDoc<'a>>,
    config: &'a FitArgs,
}

/// Model JSON and trace table.
pub fn run_fit(a: &FitArgs) -> Result<(String, CsvTable)> {
    let data = a.input.load(',')?;
    let est = a.em.estimator(&a.family)?;
    let spec = est.spec(data.dim())?;
    let rep = fit(&data, a.k, &spec, &a.em.fit_config(a.seed, est.skewed))?;
    let m = &rep.model;
    let doc = ModelDoc {
        family: est.family,
        estimator: est.name(),
        dim: m.dim(),
        seed: a.seed,
        iterations: rep.iterations,
        converged: rep.converged,
        final_ll: rep.final_ll(),
        clusters: m
            .clusters()
            .iter()
            .zip(m.weights())
            .map(|(c, &w)| ClusterDoc { weight: w, xi: c.xi(), lambda: c.lambda(), scatter_vech: c.scatter().vech() })
            .collect(),
        config: a,
    };
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Numerical(e.to_string()))?;
    json.push('\n');
    let mut trace = CsvTable::new(["iteration", "log_likelihood"]);
    trace.push(vec!["0".into(), fmt_f64(rep.initial_ll)]);
    for (i, ll) in rep.ll_trace.iter().enumerate() {
        trace.push(vec![(i + 1).to_string(), fmt_f64(*ll)]);
    }
    trace.meta("converged", rep.converged);
    stamp(&mut trace, "fit", a.seed, a)?;
    Ok((json, trace))
}

pub fn run_enumerate(a: &EnumerateArgs, exec: Execution) -> Result<CsvTable> {
    let data = a.input.load(',')?;
    let est = a.em.estimator(&a.family)?;
    let spec = est.spec(data.dim())?;
    let sweep = enumerate(&data, a.l_min, a.l_max, &spec, &a.em.fit_config(a.seed, est.skewed), exec)?;
    let mut t = CsvTable::new(["l", "bic", "log_likelihood", "iterations", "converged", "selected", "error"]);
    for (i, (score, f)) in sweep.scores.iter().zip(&sweep.fits).enumerate() {
        let l = sweep.l_min + i;
        let (ll, it, conv, err) = match f {
            Ok(r) => (fmt_f64(r.final_ll()), r.iterations.to_string(), r.converged.to_string(), String::new()),
            Err(e) => (String::new(), String::new(), String::new(), e.to_string()),
        };
        let bic = if score.is_finite() { fmt_f64(*score) } else { String::new() };
        t.push(vec![l.to_string(), bic, ll, it, conv, (l == sweep.k_hat).to_string(), err]);
    }
    t.meta("k_hat", sweep.k_hat);
    stamp(&mut t, "enumerate", a.seed, a)?;
    Ok(t)
}

fn estimators(names: &[String], em: &EmOpts) -> Result<Vec<Estimator>> {
    if names.is_empty() {
        return Err(Error::Config("no estimators given".into()));
    }
    names.iter().map(|n| em.estimator(n.trim())).collect()
}

fn enum_range(on: bool, lo: usize, hi: usize) -> Result<Option<(usize, usize)>> {
    if !on {
        return Ok(None);
    }
    if lo == 0 || hi < lo {
        return Err(Error::Config(format!("invalid candidate range {lo}..={hi}")));
    }
    Ok(Some((lo, hi)))
}

pub fn run_breakdown(a: &BreakdownArgs, exec: Execution) -> Result<CsvTable> {
    if a.mc == 0 {
        return Err(Error::Config("mc must be >= 1".into()));
    }
    let cfg = BreakdownConfig {
        preset: a.preset.parse::<Preset>()?,
        eps_list: a.eps.clone(),
        estimators: estimators(&a.families, &a.em)?,
        nk: a.nk,
        mc: a.mc,
        seed: a.seed,
        fit: a.em.fit_config(a.seed, true),
        enum_range: enum_range(a.enumerate, a.l_min, a.l_max)?,
        kl_mode: a.kl_mode.into(),
        execution: exec,
    };
    for &e in &cfg.eps_list {
        ContaminationSpec::paper_box(e)?;
    }
    let rows = breakdown_sweep(&cfg)?;
    let mut t = CsvTable::new([
        "epsilon",
        "estimator",
        "kl_true_k",
        "kl_enum",
        "detection",
        "iter_mean",
        "iter_std",
        "confusion_avg",
        "runs",
        "failures",
    ]);
    for r in rows {
        t.push(vec![
            fmt_f64(r.epsilon),
            r.estimator,
            fmt_f64(r.kl_true_k),
            fmt_f64(r.kl_enum),
            fmt_f64(r.detection),
            fmt_f64(r.iter_mean),
            fmt_f64(r.iter_std),
            fmt_f64(r.confusion_avg),
            r.runs.to_string(),
            r.failures.to_string(),
        ]);
    }
    stamp(&mut t, "breakdown", a.seed, a)?;
    Ok(t)
}

pub fn run_sensitivity(a: &SensitivityArgs, exec: Execution) -> Result<CsvTable> {
    let cfg = SensitivityConfig {
        preset: a.preset.parse::<Preset>()?,
        nk: a.nk,
        estimator: a.em.estimator(&a.family)?,
        x: parse_axis(&a.x)?,
        y: parse_axis(&a.y)?,
        mc: a.mc,
        seed: a.seed,
        fit: a.em.fit_config(a.seed, true),
        enum_range: enum_range(a.enumerate, a.l_min, a.l_max)?,
        kl_mode: a.kl_mode.into(),
        execution: exec,
    };
    let grid = sensitivity_grid(&cfg)?;
    let mut t = CsvTable::new(["x", "y", "mean_kl", "failures"]);
    for (iy, &y) in grid.ys.iter().enumerate() {
        for (ix, &x) in grid.xs.iter().enumerate() {
            let kl = grid.get(ix, iy);
            let kl = if kl.is_finite() { fmt_f64(kl) } else { String::new() };
            t.push(vec![fmt_f64(x), fmt_f64(y), kl, grid.failures[iy * grid.xs.len() + ix].to_string()]);
        }
    }
    stamp(&mut t, "sensitivity", a.seed, a)?;
    Ok(t)
}

fn realdata_input(a: &RealdataArgs) -> Result<(DataOpts, char)> {
    let mut input = a.input.clone();
    let delim = match a.dataset.as_str() {
        "wine" => {
            if input.features.is_empty() {
                input.features = WINE_FEATURES.map(String::from).to_vec();
            }
            ';'
        }
        "crabs" => {
            if input.features.is_empty() {
                input.features = CRABS_FEATURES.map(String::from).to_vec();
            }
            if input.label_col.is_empty() {
                input.label_col = CRABS_LABELS.map(String::from).to_vec();
            }
            ','
        }
        "generic" => ',',
        other => return Err(Error::Config(format!("unknown real dataset `{other}`"))),
    };
    Ok((input, delim))
}

pub fn run_realdata(a: &RealdataArgs, exec: Execution) -> Result<CsvTable> {
    let (input, delim) = realdata_input(a)?;
    let data = input.load(delim)?;
    let Some(labels) = data.labels() else {
        return Err(Error::Config("real-data runs need class labels (--label-col or several --data files)".into()));
    };
    let n_classes = labels.iter().copied().filter(|&l| l > 0).collect::<std::collections::BTreeSet<_>>().len();
    let k = a.k.unwrap_or(n_classes);
    let names = match &a.family {
        Some(f) => vec![f.clone()],
        None => a.families.clone(),
    };
    let ests = estimators(&names, &a.em)?;
    if a.runs == 0 {
        return Err(Error::Config("runs must be >= 1".into()));
    }
    let bounds: Vec<(f64, f64)> = (0..data.dim())
        .map(|j| {
            data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[j]), hi.max(x[j])))
        })
        .collect();
    let cspec = ContaminationSpec::new(a.eps, bounds)?;

    let mut header = vec!["estimator".to_string(), "run".into(), "true_class".into()];
    header.extend((1..=k).map(|m| format!("cluster_{m}")));
    header.push("avg".into());
    let mut t = CsvTable::new(header);
    let runs = a.runs;
    for est in &ests {
        let spec = est.spec(data.dim())?;
        let mats = exec.map(runs, |run| {
            let seed = run_seed(a.seed, run);
            let d = contaminate(&data, &cspec, seed)?;
            let rep = fit(&d, k, &spec, &a.em.fit_config(seed, est.skewed))?;
            confusion(d.labels().expect("labelled"), &rep.responsibilities, k, true)
        });
        let mut sum = vec![0.0; k * k];
        let mut ok = 0usize;
        for (run, m) in mats.iter().enumerate() {
            match m {
                Ok(c) => {
                    ok += 1;
                    for (s, p) in sum.iter_mut().zip(c.percents.iter().flatten()) {
                        *s += p;
                    }
                    for (i, row) in c.percents.iter().enumerate() {
                        let mut cells = vec![est.name(), run.to_string(), (i + 1).to_string()];
                        cells.extend(row.iter().map(|&p| fmt_f64(p)));
                        cells.push(fmt_f64(c.avg));
                        t.push(cells);
                    }
                }
                Err(e) => t.meta(&format!("failure.{}.{run}", est.name()), e),
            }
        }
        if ok > 0 {
            let avg = (0..k).map(|i| sum[i * k + i]).sum::<f64>() / (k * ok) as f64;
            for i in 0..k {
                let mut cells = vec![est.name(), "mean".into(), (i + 1).to_string()];
                cells.extend((0..k).map(|j| fmt_f64(sum[i * k + j] / ok as f64)));
                cells.push(fmt_f64(avg));
                t.push(cells);
            }
        }
    }
    t.meta("n", data.len());
    t.meta("k", k);
    stamp(&mut t, "realdata", a.seed, a)?;
    Ok(t)
}

// With --config, only --config and --threads may come from the command line.
fn check_exclusive(sub: &ArgMatches) -> Result<()> {
    for id in sub.ids() {
        let name = id.as_str();
        if name == "config" || name == "threads" {
            continue;
        }
        if sub.value_source(name) == Some(ValueSource::CommandLine) {
            return Err(Error::Config(format!("`--{name}` cannot be combined with --config")));
        }
    }
    Ok(())
}

fn resolve<T>(sub: &ArgMatches, config: Option<&Path>) -> Result<T>
where
    T: FromArgMatches + for<'de> Deserialize<'de>,
{
    match config {
        Some(p) => {
            check_exclusive(sub)?;
            let text = std::fs::read_to_string(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::FileNotFound(p.display().to_string()),
                _ => Error::Io(e.to_string()),
            })?;
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
        }
        None => T::from_arg_matches(sub).map_err(|e| Error::Config(e.to_string())),
    }
}

fn dispatch(matches: &ArgMatches) -> Result<()> {
    let threads = matches.get_one::<usize>("threads").copied();
    let config = matches.get_one::<PathBuf>("config").cloned();
    let (name, sub) = matches.subcommand().ok_or_else(|| Error::Config("missing subcommand".into()))?;
    let cfg = config.as_deref();
    let exec = Execution::Parallel;
    with_threads(threads, || match name {
        "simulate" => {
            let a: SimulateArgs = resolve(sub, cfg)?;
            run_simulate(&a)?.write(a.out.as_deref())
        }
        "fit" => {
            let a: FitArgs = resolve(sub, cfg)?;
            let (json, trace) = run_fit(&a)?;
            if let Some(p) = &a.trace {
                trace.write(Some(p))?;
            }
            io::write_bytes(a.out.as_deref(), json.as_bytes())
        }
        "enumerate" => {
            let a: EnumerateArgs = resolve(sub, cfg)?;
            run_enumerate(&a, exec)?.write(a.out.as_deref())
        }
        "breakdown" => {
            let a: BreakdownArgs = resolve(sub, cfg)?;
            run_breakdown(&a, exec)?.write(a.out.as_deref())
        }
        "sensitivity" => {
            let a: SensitivityArgs = resolve(sub, cfg)?;
            run_sensitivity(&a, exec)?.write(a.out.as_deref())
        }
        "realdata" => {
            let a: RealdataArgs = resolve(sub, cfg)?;
            run_realdata(&a, exec)?.write(a.out.as_deref())
        }
        other => Err(Error::Config(format!("unknown subcommand `{other}`"))),
    })
}

/// Parses `args` (including the program name) and runs the chosen subcommand.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
