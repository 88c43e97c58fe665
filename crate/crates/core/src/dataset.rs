//! Regression datasets, CSV I/O, train/test splitting and z-score scaling.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A feature matrix (row-major) with its target vector and column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    targets: Vec<f64>,
    n_features: usize,
    feature_names: Vec<String>,
    target_name: String,
}

impl Dataset {
    /// Build a dataset from a flat row-major feature buffer.
    ///
    /// Rejects empty data, mismatched lengths and non-finite values.
    pub fn new(
        features: Vec<f64>,
        targets: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        if targets.is_empty() {
            return Err(Error::EmptyData);
        }
        if features.len() != targets.len() * n_features {
            return Err(Error::ShapeMismatch {
                expected: targets.len() * n_features,
                found: features.len(),
            });
        }
        let target_name = target_name.into();
        for (i, &t) in targets.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::BadCell {
                    row: i + 1,
                    column: target_name,
                    value: t.to_string(),
                });
            }
        }
        for (k, &v) in features.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BadCell {
                    row: k / n_features.max(1) + 1,
                    column: feature_names[k % n_features].clone(),
                    value: v.to_string(),
                });
            }
        }
        Ok(Self {
            features,
            targets,
            n_features,
            feature_names,
            target_name,
        })
    }

    /// Build a dataset from rows, naming features `x0, x1, ...` and the target `y`.
    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * n_features);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_features {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    found: r.len(),
                    expected: n_features,
                });
            }
            flat.extend_from_slice(r);
        }
        if rows.len() != targets.len() {
            return Err(Error::LengthMismatch(rows.len(), targets.len()));
        }
        let names = (0..n_features).map(|j| format!("x{j}")).collect();
        Self::new(flat, targets, names, "y")
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Column-major copy of the features, one `Vec` per feature.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_features).map(|j| self.column(j)).collect()
    }

    /// New dataset containing the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(idx.len() * self.n_features);
        let mut targets = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            features,
            targets,
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// Same column names, new values.
    pub fn with_values(&self, features: Vec<f64>, targets: Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            features,
            targets,
            self.feature_names.clone(),
            self.target_name.clone(),
        )
    }

    /// Row-major matrix with the target appended as the last column.
    pub fn joint_matrix(&self) -> Vec<f64> {
        let stride = self.n_features + 1;
        let mut out = Vec::with_capacity(self.n_rows() * stride);
        for (r, &t) in self.rows().zip(&self.targets) {
            out.extend_from_slice(r);
            out.push(t);
        }
        out
    }

    /// Read a CSV with a header row; `target_column` becomes the target and
    /// every other column a feature, in header order.
    pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, target_column)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, target_column: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let target_idx = header
            .iter()
            .position(|h| h == target_column)
            .ok_or_else(|| Error::MissingTargetColumn(target_column.to_owned()))?;
        let feature_names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != target_idx)
            .map(|(_, h)| h.clone())
            .collect();

        let mut features = Vec::new();
        let mut targets = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            if rec.len() != header.len() {
                return Err(Error::RaggedRow {
                    row,
                    found: rec.len(),
                    expected: header.len(),
                });
            }
            for (j, cell) in rec.iter().enumerate() {
                let v = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::BadCell {
                        row,
                        column: header[j].clone(),
                        value: cell.to_owned(),
                    })?;
                if j == target_idx {
                    targets.push(v);
                } else {
                    features.push(v);
                }
            }
        }
        if targets.is_empty() {
            return Err(Error::EmptyData);
        }
        Dataset::new(features, targets, feature_names, target_column)
    }

    /// Write features then target, with the original header names.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        w.write_record(&header)?;
        for (r, t) in self.rows().zip(&self.targets) {
            let rec: Vec<String> = r
                .iter()
                .chain(std::iter::once(t))
                .map(|v| v.to_string())
                .collect();
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }

    /// First `n_train` rows (file order) for training, the rest for testing.
    pub fn split(&self, n_train: usize) -> Result<(Dataset, Dataset)> {
        if n_train == 0 || n_train >= self.n_rows() {
            return Err(Error::out_of_range(
                "n_train",
                n_train,
                format!("1..{}", self.n_rows()),
            ));
        }
        let cut = n_train * self.n_features;
        let head = Dataset {
            features: self.features[..cut].to_vec(),
            targets: self.targets[..n_train].to_vec(),
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        };
        let tail = Dataset {
            features: self.features[cut..].to_vec(),
            targets: self.targets[n_train..].to_vec(),
            ..head.clone()
        };
        Ok((head, tail))
    }
}

/// Per-column z-score statistics fitted on training data.
///
/// Columns `0..n_features` are the features; the last entry is the target.
/// Standard deviations are population (divide-by-n) values. A column whose
/// standard deviation is zero is flagged constant and scaled by 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl Normalizer {
    pub fn fit(train: &Dataset) -> Normalizer {
        let n = train.n_rows() as f64;
        let p = train.n_features();
        let mut means = vec![0.0; p + 1];
        for (r, &t) in train.rows().zip(train.targets()) {
            for (m, &v) in means.iter_mut().zip(r) {
                *m += v;
            }
            means[p] += t;
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p + 1];
        for (r, &t) in train.rows().zip(train.targets()) {
            for j in 0..p {
                let d = r[j] - means[j];
                var[j] += d * d;
            }
            let d = t - means[p];
            var[p] += d * d;
        }
        let std_devs = var.into_iter().map(|v| (v / n).sqrt()).collect();
        let mut names = train.feature_names().to_vec();
        names.push(train.target_name().to_owned());
        Normalizer {
            names,
            means,
            std_devs,
        }
    }

    pub fn n_features(&self) -> usize {
        self.means.len() - 1
    }

    pub fn is_constant(&self, col: usize) -> bool {
        self.std_devs[col] <= 0.0
    }

    /// Divisor actually applied to column `col`.
    pub fn scale(&self, col: usize) -> f64 {
        if self.is_constant(col) {
            1.0
        } else {
            self.std_devs[col]
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.check_shape(data)?;
        let p = data.n_features();
        let features = data
            .features()
            .iter()
            .enumerate()
            .map(|(k, &v)| (v - self.means[k % p.max(1)]) / self.scale(k % p.max(1)))
            .collect();
        let targets = data
            .targets()
            .iter()
            .map(|&t| (t - self.means[p]) / self.scale(p))
            .collect();
        data.with_values(features, targets)
    }

    /// Undo [`Normalizer::apply`].
    pub fn invert(&self, data: &Dataset) -> Result<Dataset> {
        self.check_shape(data)?;
        let p = data.n_features();
        let features = data
            .features()
            .iter()
            .enumerate()
            .map(|(k, &v)| v * self.scale(k % p.max(1)) + self.means[k % p.max(1)])
            .collect();
        let targets = data.targets().iter().map(|&t| self.invert_target(t)).collect();
        data.with_values(features, targets)
    }

    pub fn invert_target(&self, t: f64) -> f64 {
        let p = self.n_features();
        t * self.scale(p) + self.means[p]
    }

    fn check_shape(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.n_features() {
            return Err(Error::ShapeMismatch {
                expected: self.n_features(),
                found: data.n_features(),
            });
        }
        Ok(())
    }

    /// Audit table: `column,mean,std`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["column", "mean", "std"])?;
        for ((name, m), s) in self.names.iter().zip(&self.means).zip(&self.std_devs) {
            w.write_record([name.clone(), m.to_string(), s.to_string()])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }
}
