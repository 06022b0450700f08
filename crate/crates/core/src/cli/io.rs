//! CSV ingestion and plot-friendly CSV output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::data::DataSet;
use crate::error::{Error, Result};

/// What to read from a delimited file.
#[derive(Debug, Clone, Default)]
pub struct CsvSpec {
    /// Feature columns by header name; empty means every non-label column.
    pub features: Vec<String>,
    /// Label columns; several columns are combined into one class per distinct tuple.
    pub labels: Vec<String>,
    pub standardize: bool,
    pub delimiter: u8,
}

impl CsvSpec {
    pub fn new() -> Self {
        Self { delimiter: b',', ..Default::default() }
    }
}

struct Raw {
    rows: Vec<Vec<f64>>,
    label_keys: Vec<Vec<String>>,
    features: Vec<String>,
}

fn read_raw(path: &Path, spec: &CsvSpec) -> Result<Raw> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.display().to_string()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim_matches('"').to_string()).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_idx: Vec<usize> = spec.labels.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let features: Vec<String> = if spec.features.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| !label_idx.contains(i))
            .map(|(_, h)| h.clone())
            .collect()
    } else {
        spec.features.clone()
    };
    let feat_idx: Vec<usize> = features.iter().map(|c| find(c)).collect::<Result<_>>()?;
    if feat_idx.is_empty() {
        return Err(Error::Parse { row: 0, col: 0, msg: "no feature columns".into() });
    }
    let mut rows = Vec::new();
    let mut label_keys = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { row: r + 1, col: 0, msg: e.to_string() })?;
        let mut row = Vec::with_capacity(feat_idx.len());
        for &c in &feat_idx {
            let field = rec.get(c).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: r + 1,
                col: c + 1,
                msg: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row: r + 1, col: c + 1, msg: "non-finite value".into() });
            }
            row.push(v);
        }
        rows.push(row);
        label_keys.push(label_idx.iter().map(|&c| rec.get(c).unwrap_or("").to_string()).collect());
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 0, col: 0, msg: "empty data".into() });
    }
    Ok(Raw { rows, label_keys, features })
}

// A single column of non-negative integers is kept verbatim (0 marks outliers);
// anything else maps sorted distinct keys to 1..=K.
fn encode_labels(keys: &[Vec<String>]) -> Result<Vec<u32>> {
    if keys.first().is_some_and(|k| k.len() == 1) {
        let ints: Option<Vec<u32>> = keys.iter().map(|k| k[0].parse().ok()).collect();
        if let Some(v) = ints {
            return Ok(v);
        }
    }
    let mut map: BTreeMap<&Vec<String>, u32> = keys.iter().map(|k| (k, 0)).collect();
    if map.len() > u32::MAX as usize {
        return Err(Error::TooManyClasses(map.len()));
    }
    for (i, v) in map.values_mut().enumerate() {
        *v = i as u32 + 1;
    }
    Ok(keys.iter().map(|k| map[k]).collect())
}

/// Reads the selected columns of one file.
pub fn load_csv(path: &Path, spec: &CsvSpec) -> Result<DataSet> {
    load_csvs(&[path], spec)
}

/// Reads several files with the same schema. Without label columns and with
/// more than one file, the file index (1-based) becomes the label.
pub fn load_csvs(paths: &[&Path], spec: &CsvSpec) -> Result<DataSet> {
    let mut rows = Vec::new();
    let mut keys = Vec::new();
    let mut features = None;
    for (i, p) in paths.iter().enumerate() {
        let raw = read_raw(p, spec)?;
        if features.get_or_insert_with(|| raw.features.clone()) != &raw.features {
            return Err(Error::MissingColumn(format!("schema of {} differs", p.display())));
        }
        rows.extend(raw.rows);
        if spec.labels.is_empty() {
            keys.extend(std::iter::repeat_n(vec![format!("{:08}", i + 1)], raw.label_keys.len()));
        } else {
            keys.extend(raw.label_keys);
        }
    }
    let labels = if spec.labels.is_empty() && paths.len() < 2 {
        None
    } else {
        Some(encode_labels(&keys)?)
    };
    let mut data = DataSet::from_rows(&rows, labels)?;
    let features = features.unwrap_or_default();
    data.meta.insert("features".into(), features.join(";"));
    data.meta.insert(
        "source".into(),
        paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(";"),
    );
    if spec.standardize {
        let stats = data.standardize();
        let s: Vec<String> = stats.iter().map(|(m, s)| format!("{m}:{s}")).collect();
        data.meta.insert("standardized".into(), s.join(";"));
    }
    Ok(data)
}

/// A table with one header row and trailing `#` metadata lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub meta: Vec<(String, String)>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let mut out = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        for (k, v) in &self.meta {
            // keep metadata single-line
            writeln!(out, "# {k}={}", v.replace('\n', " "))?;
        }
        Ok(out)
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        write_bytes(path, &self.to_bytes()?)
    }
}

pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => File::create(p)?.write_all(bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

/// Shortest round-tripping decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// A dataset as `x1..xr[,label]` rows.
pub fn dataset_table(data: &DataSet) -> CsvTable {
    let mut header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    if data.labels().is_some() {
        header.push("label".into());
    }
    let mut t = CsvTable::new(header);
    for (i, x) in data.iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(|&v| fmt_f64(v)).collect();
        if let Some(l) = data.labels() {
            row.push(l[i].to_string());
        }
        t.push(row);
    }
    for (k, v) in &data.meta {
        t.meta(k, v);
    }
    t
}
