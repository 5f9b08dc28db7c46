//! Binary-classification datasets in CSV or LIBSVM text form.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    #[default]
    Csv,
    Libsvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelColumn {
    First,
    #[default]
    Last,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetOptions {
    pub format: DatasetFormat,
    /// CSV only.
    pub label_column: LabelColumn,
    /// CSV only: skip the first non-empty line.
    pub has_header: bool,
    /// LIBSVM only: feature count; inferred from the largest index when absent.
    pub n_features: Option<usize>,
    /// Rescale every feature column to zero mean and unit variance.
    pub standardize: bool,
    /// Append a constant-one intercept column (after standardization).
    pub add_bias: bool,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            format: DatasetFormat::Csv,
            label_column: LabelColumn::Last,
            has_header: false,
            n_features: None,
            standardize: true,
            add_bias: true,
        }
    }
}

/// Feature rows with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::input("dataset needs equally many (>0) rows and labels"));
        }
        let d = features[0].len();
        if features.iter().any(|r| r.len() != d) {
            return Err(Error::input("ragged feature rows"));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map(Vec::len).unwrap_or(0)
    }

    pub fn flat_features(&self) -> Vec<f64> {
        self.features.concat()
    }

    pub fn standardize(&mut self) {
        let n = self.len() as f64;
        for k in 0..self.n_features() {
            let mean = self.features.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = self.features.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for r in &mut self.features {
                r[k] = (r[k] - mean) / sd;
            }
        }
    }

    pub fn add_bias(&mut self) {
        for r in &mut self.features {
            r.push(1.0);
        }
    }

    /// Seeded shuffle, then the first `round(train_fraction · n)` rows train.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::input(format!("train fraction {train_fraction} not in (0, 1)")));
        }
        if self.len() < 2 {
            return Err(Error::input("need at least two rows to split"));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = ((train_fraction * self.len() as f64).round() as usize).clamp(1, self.len() - 1);
        let pick = |ids: &[usize]| Dataset {
            features: ids.iter().map(|&i| self.features[i].clone()).collect(),
            labels: ids.iter().map(|&i| self.labels[i]).collect(),
        };
        Ok((pick(&idx[..n_train]), pick(&idx[n_train..])))
    }

    pub fn flip_labels(&self) -> Dataset {
        Dataset {
            features: self.features.clone(),
            labels: self.labels.iter().map(|y| -y).collect(),
        }
    }
}

fn parse_label(raw: &str) -> Option<f64> {
    let v: f64 = raw.trim().parse().ok()?;
    if v == 1.0 {
        Some(1.0)
    } else if v == -1.0 || v == 0.0 {
        Some(-1.0)
    } else {
        None
    }
}

pub fn load_dataset(path: &Path, opts: &DatasetOptions) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::Dataset {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();
    if opts.format == DatasetFormat::Csv && opts.has_header {
        lines.next();
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    match opts.format {
        DatasetFormat::Csv => {
            let mut width = None;
            for (lineno, line) in lines {
                let cells: Vec<&str> = line.split(',').map(str::trim).collect();
                if *width.get_or_insert(cells.len()) != cells.len() {
                    return Err(err(lineno, format!("expected {} columns, found {}", width.unwrap(), cells.len())));
                }
                if cells.len() < 2 {
                    return Err(err(lineno, "need at least one feature and a label".into()));
                }
                let li = match opts.label_column {
                    LabelColumn::First => 0,
                    LabelColumn::Last => cells.len() - 1,
                    LabelColumn::Index(i) if i < cells.len() => i,
                    LabelColumn::Index(i) => return Err(err(lineno, format!("label column {i} out of range"))),
                };
                let label = parse_label(cells[li]).ok_or_else(|| err(lineno, format!("bad label {:?}", cells[li])))?;
                let row = cells
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != li)
                    .map(|(_, c)| c.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| err(lineno, format!("unparseable feature in {line:?}")))?;
                features.push(row);
                labels.push(label);
            }
        }
        DatasetFormat::Libsvm => {
            let mut sparse: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
            let mut max_index = 0;
            for (lineno, line) in lines {
                let mut parts = line.split_whitespace();
                let raw_label = parts.next().unwrap_or_default();
                let label = parse_label(raw_label).ok_or_else(|| err(lineno, format!("bad label {raw_label:?}")))?;
                let mut entries = Vec::new();
                for tok in parts {
                    let (i, v) = tok
                        .split_once(':')
                        .and_then(|(i, v)| Some((i.parse::<usize>().ok()?, v.parse::<f64>().ok()?)))
                        .filter(|(i, v)| *i >= 1 && v.is_finite())
                        .ok_or_else(|| err(lineno, format!("bad feature entry {tok:?}")))?;
                    max_index = max_index.max(i);
                    entries.push((i, v));
                }
                sparse.push((lineno, entries));
                labels.push(label);
            }
            let d = opts.n_features.unwrap_or(max_index);
            for (lineno, entries) in sparse {
                let mut row = vec![0.0; d];
                for (i, v) in entries {
                    if i > d {
                        return Err(err(lineno, format!("feature index {i} exceeds dimension {d}")));
                    }
                    row[i - 1] = v;
                }
                features.push(row);
            }
            if d == 0 && !labels.is_empty() {
                return Err(err(1, "no features found".into()));
            }
        }
    }
    if labels.is_empty() {
        return Err(err(0, "dataset is empty".into()));
    }
    let mut ds = Dataset::new(features, labels)?;
    if opts.standardize {
        ds.standardize();
    }
    if opts.add_bias {
        ds.add_bias();
    }
    Ok(ds)
}

/// Two Gaussian blobs in the plane separated by a margin along `x = y`.
pub fn synthetic_separable(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        loop {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let (x0, x1) = (2.0 * y + 0.6 * a, 2.0 * y + 0.6 * b);
            if y * (x0 + x1) > 1.0 {
                features.push(vec![x0, x1]);
                break;
            }
        }
        labels.push(y);
    }
    Dataset { features, labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn raw() -> DatasetOptions {
        DatasetOptions {
            standardize: false,
            add_bias: false,
            ..Default::default()
        }
    }

    #[test]
    fn csv_direct_parse() {
        let f = write("1,2,+1\n3,4,-1\n5,6,+1\n");
        let ds = load_dataset(f.path(), &raw()).unwrap();
        assert_eq!(ds.features, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(ds.labels, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn zero_one_labels_are_remapped() {
        let f = write("0,1.5\n1,2.5\n");
        let opts = DatasetOptions {
            label_column: LabelColumn::First,
            ..raw()
        };
        let ds = load_dataset(f.path(), &opts).unwrap();
        assert_eq!(ds.labels, vec![-1.0, 1.0]);
    }

    #[test]
    fn libsvm_sparse_row() {
        let f = write("-1 1:0.5 3:2.0\n");
        let opts = DatasetOptions {
            format: DatasetFormat::Libsvm,
            n_features: Some(3),
            ..raw()
        };
        let ds = load_dataset(f.path(), &opts).unwrap();
        assert_eq!(ds.features, vec![vec![0.5, 0.0, 2.0]]);
        assert_eq!(ds.labels, vec![-1.0]);
    }

    #[test]
    fn errors_name_lines() {
        let empty = write("");
        assert!(matches!(load_dataset(empty.path(), &raw()), Err(Error::Dataset { .. })));
        let bad = write("1,2,1\n3,x,-1\n");
        match load_dataset(bad.path(), &raw()) {
            Err(Error::Dataset { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let label = write("1,2,3\n");
        assert!(load_dataset(label.path(), &raw()).is_err());
        assert!(load_dataset(Path::new("/definitely/not/here.csv"), &raw()).is_err());
    }

    #[test]
    fn standardize_and_bias() {
        let f = write("1,10,1\n3,10,-1\n5,10,1\n");
        let ds = load_dataset(f.path(), &DatasetOptions::default()).unwrap();
        assert_eq!(ds.n_features(), 3);
        let col0: Vec<f64> = ds.features.iter().map(|r| r[0]).collect();
        assert!(col0.iter().sum::<f64>().abs() < 1e-12);
        assert!((col0.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        assert!(ds.features.iter().all(|r| r[1] == 0.0 && r[2] == 1.0));
    }

    #[test]
    fn load_is_idempotent_and_split_is_seeded() {
        let ds = synthetic_separable(50, 4);
        let (a, b) = ds.split(0.8, 9).unwrap();
        let (c, d) = ds.split(0.8, 9).unwrap();
        assert_eq!((a.len(), b.len()), (40, 10));
        assert_eq!(a, c);
        assert_eq!(b, d);
        let f = write("1,2,1\n2,1,-1\n");
        assert_eq!(load_dataset(f.path(), &raw()).unwrap(), load_dataset(f.path(), &raw()).unwrap());
    }
}
