//! Delimited-text datasets: loading, saving, splitting.
//!
//! Files hold one observation per line, numbers separated by commas or
//! whitespace. Lines starting with `#` are comments, except that
//! `# key: value` lines for `task`, `provenance` and `features` are read
//! back as metadata. Files written by [`Dataset::save`] put the response in
//! the last column and render every value with 17 significant digits, so a
//! save/load round trip is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, shape, Error, Result};
use crate::matrix::Matrix;
use crate::random::{derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    /// Labels are `−1` or `+1`.
    BinaryClassification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::BinaryClassification => "binary_classification",
        }
    }

    fn infer(labels: &[f64]) -> Self {
        if !labels.is_empty() && labels.iter().all(|v| *v == 1.0 || *v == -1.0) {
            Task::BinaryClassification
        } else {
            Task::Regression
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "binary_classification" => Ok(Task::BinaryClassification),
            other => Err(invalid(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub task: Task,
    pub feature_names: Option<Vec<String>>,
    /// Free-form record of where the data came from and what was done to it.
    pub provenance: String,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, task: Task, provenance: impl Into<String>) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(shape("Dataset", format!("{} rows but {} responses", x.rows(), y.len())));
        }
        if task == Task::BinaryClassification {
            if let Some(bad) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
                return Err(invalid(format!("classification label {bad} is not ±1")));
            }
        }
        Ok(Self {
            x,
            y,
            task,
            feature_names: None,
            provenance: provenance.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    fn note(&mut self, what: &str) {
        if !self.provenance.is_empty() {
            self.provenance.push_str("; ");
        }
        self.provenance.push_str(what);
    }

    /// Writes features and response (last column) as comma-separated text.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        let _ = writeln!(out, "# task: {}", self.task.as_str());
        let _ = writeln!(out, "# provenance: {}", self.provenance.replace('\n', " "));
        if let Some(names) = &self.feature_names {
            let _ = writeln!(out, "# features: {}", names.join(","));
        }
        for i in 0..self.n() {
            for v in self.x.row(i) {
                let _ = write!(out, "{v:.16e},");
            }
            let _ = writeln!(out, "{:.16e}", self.y[i]);
        }
        fs::write(path, out).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Centers each column and divides by its standard deviation (columns
    /// with zero spread are only centered). Returns `(means, scales)`.
    pub fn standardize(&mut self) -> (Vec<f64>, Vec<f64>) {
        let (n, p) = self.x.shape();
        let mut means = vec![0.0; p];
        let mut scales = vec![1.0; p];
        for j in 0..p {
            let col = self.x.col(j);
            let m = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
            means[j] = m;
            if var > 0.0 {
                scales[j] = var.sqrt();
            }
        }
        for i in 0..n {
            for (j, v) in self.x.row_mut(i).iter_mut().enumerate() {
                *v = (*v - means[j]) / scales[j];
            }
        }
        self.note("standardized columns");
        (means, scales)
    }

    fn subset(&self, rows: &[usize], what: String) -> Dataset {
        let mut d = Dataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            task: self.task,
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        };
        d.note(&what);
        d
    }
}

struct Parsed {
    rows: Vec<Vec<f64>>,
    /// Source line number of each row.
    lines: Vec<usize>,
    task: Option<Task>,
    provenance: Option<String>,
    features: Option<Vec<String>>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_table(path: &Path) -> Result<Parsed> {
    let text = read(path)?;
    let mut parsed = Parsed {
        rows: Vec::new(),
        lines: Vec::new(),
        task: None,
        provenance: None,
        features: None,
    };
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "task" => parsed.task = Some(value.parse().map_err(|e: Error| parse_error(path, line_no, e.to_string()))?),
                    "provenance" => parsed.provenance = Some(value.to_owned()),
                    "features" => parsed.features = Some(value.split(',').map(|s| s.trim().to_owned()).collect()),
                    _ => {}
                }
            }
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(path, line_no, format!("'{t}' is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_error(path, line_no, format!("expected {w} values, found {}", row.len())));
            }
            _ => {}
        }
        parsed.rows.push(row);
        parsed.lines.push(line_no);
    }
    if parsed.rows.is_empty() {
        return Err(parse_error(path, 0, "no data rows"));
    }
    Ok(parsed)
}

/// Loads a dataset. With `labels_path`, responses come from that
/// single-column file and every column of `features_path` is a feature;
/// otherwise the last column of `features_path` is the response.
///
/// The task is taken from a `# task:` header when present, else inferred:
/// all-`±1` responses mean binary classification.
pub fn load_dataset(features_path: impl AsRef<Path>, labels_path: Option<&Path>) -> Result<Dataset> {
    let fpath = features_path.as_ref();
    let parsed = parse_table(fpath)?;
    let (cols, y) = match labels_path {
        Some(lpath) => {
            let labels = parse_table(lpath)?;
            if labels.rows[0].len() != 1 {
                return Err(parse_error(lpath, labels.lines[0], "label file must have one value per line"));
            }
            if labels.rows.len() != parsed.rows.len() {
                return Err(parse_error(
                    lpath,
                    *labels.lines.last().unwrap(),
                    format!("{} labels for {} feature rows", labels.rows.len(), parsed.rows.len()),
                ));
            }
            (parsed.rows[0].len(), labels.rows.iter().map(|r| r[0]).collect::<Vec<f64>>())
        }
        None => {
            let w = parsed.rows[0].len();
            if w < 2 {
                return Err(parse_error(fpath, parsed.lines[0], "need at least one feature and a response column"));
            }
            (w - 1, parsed.rows.iter().map(|r| r[w - 1]).collect())
        }
    };
    let mut data = Vec::with_capacity(parsed.rows.len() * cols);
    for r in &parsed.rows {
        data.extend_from_slice(&r[..cols]);
    }
    let x = Matrix::from_vec(parsed.rows.len(), cols, data)?;
    let task = parsed.task.unwrap_or_else(|| Task::infer(&y));
    let provenance = parsed.provenance.unwrap_or_else(|| match labels_path {
        Some(l) => format!("loaded from {} with labels {}", fpath.display(), l.display()),
        None => format!("loaded from {}", fpath.display()),
    });
    let mut ds = Dataset::new(x, y, task, provenance)?;
    if let Some(names) = parsed.features {
        if names.len() == cols {
            ds.feature_names = Some(names);
        }
    }
    Ok(ds)
}

/// Seeded uniform split into `n_train` training rows and the rest.
pub fn train_test_split(data: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = data.n();
    if n_train == 0 || n_train >= n {
        return Err(invalid(format!("n_train must lie in 1..{n}, got {n_train}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(derive_seed(seed, 0x5e1)).shuffle(&mut order);
    let (tr, te) = order.split_at(n_train);
    Ok((
        data.subset(tr, format!("train split seed={seed} n={n_train}")),
        data.subset(te, format!("test split seed={seed} n={}", n - n_train)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::gaussian_matrix;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn separate_label_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "x.txt", "1 2 3 4\n5 6 7 8\n9 10 11 12\n");
        let l = write(dir.path(), "y.txt", "1\n-1\n1\n");
        let d = load_dataset(&f, Some(&l)).unwrap();
        assert_eq!(d.x.shape(), (3, 4));
        assert_eq!(d.y, vec![1.0, -1.0, 1.0]);
        assert_eq!(d.task, Task::BinaryClassification);
    }

    #[test]
    fn ragged_row_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "x.csv", "# header\n1,2,3\n4,5\n");
        let err = load_dataset(&f, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn bad_tokens_and_counts_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "x.csv", "1,2\n3,abc\n");
        assert!(matches!(load_dataset(&f, None), Err(Error::Parse { line: 2, .. })));
        let f = write(dir.path(), "x2.txt", "1 2\n3 4\n");
        let l = write(dir.path(), "y2.txt", "1\n");
        assert!(matches!(load_dataset(&f, Some(&l)), Err(Error::Parse { .. })));
        let f = write(dir.path(), "x3.txt", "1 2\n3 NaN\n");
        assert!(load_dataset(&f, None).is_err());
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let x = gaussian_matrix(7, 5, 3);
        let y: Vec<f64> = (0..7).map(|i| (i as f64).sqrt() / 3.0 - 1e-300).collect();
        let mut d = Dataset::new(x, y, Task::Regression, "test fixture").unwrap();
        d.feature_names = Some((0..5).map(|j| format!("f{j}")).collect());
        let path = dir.path().join("d.csv");
        d.save(&path).unwrap();
        let back = load_dataset(&path, None).unwrap();
        assert_eq!(back.x.as_slice(), d.x.as_slice());
        assert_eq!(back.y, d.y);
        assert_eq!(back.task, Task::Regression);
        assert_eq!(back.provenance, "test fixture");
        assert_eq!(back.feature_names, d.feature_names);
    }

    #[test]
    fn split_is_disjoint_exhaustive_and_seeded() {
        let x = Matrix::from_fn(10, 2, |i, j| (i * 2 + j) as f64);
        let d = Dataset::new(x, (0..10).map(|i| i as f64).collect(), Task::Regression, "").unwrap();
        let (a, b) = train_test_split(&d, 7, 4).unwrap();
        assert_eq!((a.n(), b.n()), (7, 3));
        let mut all: Vec<f64> = a.y.iter().chain(&b.y).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.y);
        let (a2, _) = train_test_split(&d, 7, 4).unwrap();
        assert_eq!(a.y, a2.y);
        assert!(train_test_split(&d, 10, 0).is_err());
        assert!(train_test_split(&d, 0, 0).is_err());
    }

    #[test]
    fn standardize_centers_and_scales() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let mut d = Dataset::new(x, vec![0.0, 1.0], Task::Regression, "raw").unwrap();
        let (m, s) = d.standardize();
        assert_eq!(m, vec![2.0, 5.0]);
        assert_eq!(s, vec![1.0, 1.0]);
        assert_eq!(d.x.as_slice(), &[-1.0, 0.0, 1.0, 0.0]);
        assert!(d.provenance.contains("standardized"));
    }

    #[test]
    fn classification_labels_are_checked() {
        let x = Matrix::zeros(2, 1);
        assert!(Dataset::new(x, vec![1.0, 0.0], Task::BinaryClassification, "").is_err());
    }
}
