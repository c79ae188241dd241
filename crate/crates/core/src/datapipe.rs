//! Dataset ingestion and preprocessing.
//!
//! Every fitted statistic (medians, ranges, means, PCA basis) comes from the
//! training rows only and is then applied to both train and test.

use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::{SymmetricEigen, SVD};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_rbf, Gamma};
use crate::svm::{accuracy, fit_predict, SvcConfig};
use crate::Matrix;

/// Samples as rows. Missing cells are `NaN` until imputed.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<i64>,
    pub feature_names: Vec<String>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<i64>, provenance: impl Into<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        let feature_names = (0..x.ncols()).map(|j| format!("f{j}")).collect();
        Ok(Self {
            x,
            y,
            feature_names,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// `(row, col)` of every missing cell.
    pub fn missing_mask(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.x.nrows() {
            for j in 0..self.x.ncols() {
                if self.x[(i, j)].is_nan() {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: select_rows(&self.x, idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn classes(&self) -> Vec<i64> {
        let mut c = self.y.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }

    /// Writes `<stem>.bin` (row-major little-endian `f64`) and `<stem>.json`
    /// (shape, labels, names, provenance).
    pub fn save_cache(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut bytes = Vec::with_capacity(self.x.len() * 8);
        for i in 0..self.x.nrows() {
            for j in 0..self.x.ncols() {
                bytes.extend_from_slice(&self.x[(i, j)].to_le_bytes());
            }
        }
        fs::write(dir.join(format!("{stem}.bin")), bytes)?;
        let manifest = CacheManifest {
            rows: self.x.nrows(),
            cols: self.x.ncols(),
            labels: self.y.clone(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        };
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load_cache(dir: &Path, stem: &str) -> Result<Self> {
        let manifest: CacheManifest =
            serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
        if bytes.len() != manifest.rows * manifest.cols * 8 || manifest.labels.len() != manifest.rows {
            return Err(Error::Data(format!("cache {stem} does not match its manifest")));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            x: Matrix::from_row_slice(manifest.rows, manifest.cols, &values),
            y: manifest.labels,
            feature_names: manifest.feature_names,
            provenance: manifest.provenance,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CacheManifest {
    rows: usize,
    cols: usize,
    labels: Vec<i64>,
    feature_names: Vec<String>,
    provenance: String,
}

pub fn select_rows(x: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "?"
    )
}

/// Reads a header-row CSV. All columns other than `label_column` are parsed
/// as numbers; empty, `NA`, `NaN`, `null` and `?` cells become missing.
/// Integer labels are kept; any other label text is mapped to ids in sorted order.
pub fn load_csv(path: &Path, label_column: &str, delimiter: u8) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_pos = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::Data(format!("label column {label_column:?} not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != label_pos)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        for (k, cell) in rec.iter().enumerate() {
            if k == label_pos {
                if is_missing(cell) {
                    return Err(Error::Data(format!("line {line}: missing label")));
                }
                raw_labels.push(cell.trim().to_string());
            } else if is_missing(cell) {
                values.push(f64::NAN);
            } else {
                values.push(cell.trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!("line {line}, column {}: cannot parse {cell:?}", k + 1))
                })?);
            }
        }
    }
    let m = raw_labels.len();
    let d = feature_names.len();
    let y = parse_labels(&raw_labels);
    let x = Matrix::from_row_slice(m, d, &values);
    Ok(Dataset {
        x,
        y,
        feature_names,
        provenance: path.display().to_string(),
    })
}

fn parse_labels(raw: &[String]) -> Vec<i64> {
    let numeric: Option<Vec<i64>> = raw
        .iter()
        .map(|s| {
            s.parse::<i64>().ok().or_else(|| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && v.abs() < 1e15)
                    .map(|v| v as i64)
            })
        })
        .collect();
    if let Some(v) = numeric {
        return v;
    }
    let mut names: Vec<&String> = raw.iter().collect();
    names.sort();
    names.dedup();
    raw.iter()
        .map(|s| names.binary_search(&s).expect("present") as i64)
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fills missing cells of both matrices with the per-feature training median.
pub fn impute_median(train: &Matrix, test: &Matrix) -> Result<(Matrix, Matrix)> {
    let mut medians = Vec::with_capacity(train.ncols());
    for j in 0..train.ncols() {
        let present: Vec<f64> = train.column(j).iter().copied().filter(|v| !v.is_nan()).collect();
        if present.is_empty() {
            return Err(Error::Data(format!("feature {j} is entirely missing in the training set")));
        }
        medians.push(median(present));
    }
    let fill = |x: &Matrix| Matrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let v = x[(i, j)];
        if v.is_nan() {
            medians[j]
        } else {
            v
        }
    });
    Ok((fill(train), fill(test)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaler {
    #[default]
    Minmax,
    Standard,
}

/// Per-feature affine map `(x - offset) / scale`, with a zero `scale`
/// sending the feature to 0.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedScaler {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FittedScaler {
    pub fn fit(kind: Scaler, train: &Matrix) -> Self {
        let m = train.nrows() as f64;
        let mut offset = Vec::new();
        let mut scale = Vec::new();
        for col in train.column_iter() {
            match kind {
                Scaler::Minmax => {
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    offset.push(lo);
                    scale.push(hi - lo);
                }
                Scaler::Standard => {
                    let mean = col.sum() / m;
                    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
                    offset.push(mean);
                    scale.push(var.sqrt());
                }
            }
        }
        Self { offset, scale }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            if self.scale[j] > 0.0 {
                (x[(i, j)] - self.offset[j]) / self.scale[j]
            } else {
                0.0
            }
        })
    }
}

/// Min-max scaling fitted on train: train columns land in `[0, 1]`, test
/// values may fall outside.
pub fn scale_minmax(train: &Matrix, test: &Matrix) -> (Matrix, Matrix) {
    let s = FittedScaler::fit(Scaler::Minmax, train);
    (s.transform(train), s.transform(test))
}

/// Standardization fitted on train using the population standard deviation.
pub fn scale_standard(train: &Matrix, test: &Matrix) -> (Matrix, Matrix) {
    let s = FittedScaler::fit(Scaler::Standard, train);
    (s.transform(train), s.transform(test))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaSelection {
    Components(usize),
    /// Smallest `k` whose cumulative explained-variance ratio reaches the threshold.
    Variance(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k × d`, orthonormal rows, descending eigenvalue.
    pub components: Matrix,
    /// All eigenvalues of the training covariance, descending.
    pub eigenvalues: Vec<f64>,
    pub cumulative_ratio: Vec<f64>,
}

/// Dimension above which PCA switches from covariance eigendecomposition to thin SVD.
pub const PCA_SVD_THRESHOLD: usize = 512;

impl PcaModel {
    /// Fits the full basis; use [`PcaModel::truncate`] to keep `k` components.
    pub fn fit(train: &Matrix) -> Result<Self> {
        let (m, d) = train.shape();
        if m < 2 {
            return Err(Error::Data("PCA needs at least two samples".into()));
        }
        let mean: Vec<f64> = (0..d).map(|j| train.column(j).sum() / m as f64).collect();
        let centered = Matrix::from_fn(m, d, |i, j| train[(i, j)] - mean[j]);
        let (mut eigenvalues, vectors): (Vec<f64>, Matrix) = if d <= PCA_SVD_THRESHOLD {
            let cov = centered.transpose() * &centered / (m as f64 - 1.0);
            let eig = SymmetricEigen::new(cov);
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        } else {
            let svd = SVD::new(centered.clone(), false, true);
            let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
            let vals = svd
                .singular_values
                .iter()
                .map(|s| s * s / (m as f64 - 1.0))
                .collect();
            (vals, v_t.transpose())
        };
        let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]).then(a.cmp(&b)));
        let mut components = Matrix::zeros(order.len(), d);
        for (r, &k) in order.iter().enumerate() {
            let mut v: Vec<f64> = vectors.column(k).iter().copied().collect();
            let pivot = v
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
            for j in 0..d {
                components[(r, j)] = v[j];
            }
        }
        eigenvalues = order.iter().map(|&k| eigenvalues[k].max(0.0)).collect();
        let total: f64 = eigenvalues.iter().sum();
        let mut acc = 0.0;
        let cumulative_ratio = eigenvalues
            .iter()
            .map(|e| {
                acc += e;
                if total > 0.0 {
                    acc / total
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            mean,
            components,
            eigenvalues,
            cumulative_ratio,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn select_k(&self, sel: PcaSelection, n_samples: usize) -> Result<usize> {
        let max_k = self.mean.len().min(n_samples.saturating_sub(1));
        let k = match sel {
            PcaSelection::Components(k) => k,
            PcaSelection::Variance(t) => {
                if !(t > 0.0 && t <= 1.0) {
                    return Err(Error::Config(format!("variance threshold {t} not in (0, 1]")));
                }
                self.cumulative_ratio
                    .iter()
                    .position(|&r| r >= t - 1e-12)
                    .map(|p| p + 1)
                    .unwrap_or(self.cumulative_ratio.len())
                    .min(max_k.max(1))
            }
        };
        if k < 1 || k > max_k {
            return Err(Error::Config(format!(
                "PCA components {k} outside 1..={max_k} (min(m-1, d))"
            )));
        }
        Ok(k)
    }

    pub fn truncate(mut self, k: usize) -> Self {
        self.components = self.components.rows(0, k).into_owned();
        self
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let centered = Matrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - self.mean[j]);
        centered * self.components.transpose()
    }

    pub fn inverse_transform(&self, z: &Matrix) -> Matrix {
        let mut x = z * &self.components;
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                x[(i, j)] += self.mean[j];
            }
        }
        x
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaResult {
    pub train: Matrix,
    pub test: Matrix,
    pub model: PcaModel,
}

/// Fits PCA on train, keeps the selected number of components and projects both sets.
pub fn pca_fit_transform(train: &Matrix, test: &Matrix, sel: PcaSelection) -> Result<PcaResult> {
    let full = PcaModel::fit(train)?;
    let k = full.select_k(sel, train.nrows())?;
    let model = full.truncate(k);
    Ok(PcaResult {
        train: model.transform(train),
        test: model.transform(test),
        model,
    })
}

/// Per-class counts for a stratified draw of `n_take` out of `counts`, by
/// largest remainder (ties to the earlier class).
fn allocate(counts: &[usize], n_take: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let mut alloc: Vec<usize> = counts.iter().map(|&c| c * n_take / total).collect();
    let mut rema: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (k, (c * n_take) % total))
        .collect();
    rema.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut left = n_take - alloc.iter().sum::<usize>();
    for (k, _) in rema {
        if left == 0 {
            break;
        }
        if alloc[k] < counts[k] {
            alloc[k] += 1;
            left -= 1;
        }
    }
    alloc
}

fn class_members(labels: &[i64]) -> Vec<Vec<usize>> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
        .iter()
        .map(|&c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect()
}

/// Stratified train/test positions. Test size is `ceil((1 - f) · m)`; every
/// class keeps at least one member on each side. Both index lists are sorted.
pub fn stratified_split_indices(
    labels: &[i64],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let m = labels.len();
    let members = class_members(labels);
    if let Some(small) = members.iter().find(|c| c.len() < 2) {
        return Err(Error::Data(format!(
            "class {} has a single member and cannot be stratified",
            labels[small[0]]
        )));
    }
    let n_test = (((1.0 - train_fraction) * m as f64) - 1e-9).ceil().max(1.0) as usize;
    let n_train = m - n_test;
    let counts: Vec<usize> = members.iter().map(|c| c.len()).collect();
    let mut alloc = allocate(&counts, n_train);
    // keep each class on both sides, moving surplus from the largest class
    for k in 0..alloc.len() {
        while alloc[k] >= counts[k] {
            alloc[k] -= 1;
            if let Some(j) = (0..alloc.len())
                .filter(|&j| j != k && alloc[j] + 1 < counts[j])
                .max_by_key(|&j| counts[j] - alloc[j])
            {
                alloc[j] += 1;
            }
        }
        while alloc[k] == 0 {
            alloc[k] += 1;
            if let Some(j) = (0..alloc.len()).filter(|&j| j != k && alloc[j] > 1).max_by_key(|&j| alloc[j]) {
                alloc[j] -= 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, mut idx) in members.into_iter().enumerate() {
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..alloc[c]]);
        test.extend_from_slice(&idx[alloc[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified subset of `n` positions (class proportions kept within one sample).
pub fn stratified_sample_indices(labels: &[i64], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Config("sample cap must be >= 1".into()));
    }
    if n >= labels.len() {
        return Ok((0..labels.len()).collect());
    }
    let members = class_members(labels);
    let counts: Vec<usize> = members.iter().map(|c| c.len()).collect();
    let alloc = allocate(&counts, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (c, mut idx) in members.into_iter().enumerate() {
        idx.shuffle(&mut rng);
        out.extend_from_slice(&idx[..alloc[c]]);
    }
    out.sort_unstable();
    Ok(out)
}

pub fn stratified_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (tr, te) = stratified_split_indices(&data.y, train_fraction, seed)?;
    Ok((data.subset(&tr), data.subset(&te)))
}

/// Plain shuffled split used when stratification is off.
pub fn random_split_indices(m: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let n_test = (((1.0 - train_fraction) * m as f64) - 1e-9).ceil().max(1.0) as usize;
    if n_test >= m {
        return Err(Error::Data(format!("{m} samples cannot be split")));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx.split_off(m - n_test);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSpec {
    pub impute: Impute,
    pub scaler: Scaler,
    pub pca: Option<PcaSelection>,
    pub train_fraction: f64,
    pub train_cap: Option<usize>,
    pub test_cap: Option<usize>,
    pub stratify: bool,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impute {
    #[default]
    None,
    Median,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        Self {
            impute: Impute::None,
            scaler: Scaler::Minmax,
            pca: None,
            train_fraction: 0.75,
            train_cap: None,
            test_cap: None,
            stratify: true,
            seed: 42,
        }
    }
}

impl PipelineSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("pipeline.train_fraction must lie in (0, 1)".into()));
        }
        if self.train_cap == Some(0) || self.test_cap == Some(0) {
            return Err(Error::Config("pipeline sample caps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Output of [`run_pipeline`]: processed train and test sets plus the
/// explained-variance curve when PCA ran.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub pca_cumulative: Option<Vec<f64>>,
}

/// Split, cap, impute, reduce and scale.
pub fn run_pipeline(data: &Dataset, spec: &PipelineSpec) -> Result<Prepared> {
    spec.validate()?;
    if data.len() < 4 {
        return Err(Error::Data(format!("dataset has only {} samples", data.len())));
    }
    let (tr, te) = if spec.stratify {
        stratified_split_indices(&data.y, spec.train_fraction, spec.seed)?
    } else {
        random_split_indices(data.len(), spec.train_fraction, spec.seed)?
    };
    let mut train = data.subset(&tr);
    let mut test = data.subset(&te);
    if let Some(cap) = spec.train_cap {
        let idx = stratified_sample_indices(&train.y, cap, spec.seed)?;
        train = train.subset(&idx);
    }
    if let Some(cap) = spec.test_cap {
        let idx = stratified_sample_indices(&test.y, cap, spec.seed)?;
        test = test.subset(&idx);
    }

    let has_missing = !train.is_finite() || !test.is_finite();
    if spec.impute == Impute::Median {
        let (a, b) = impute_median(&train.x, &test.x)?;
        train.x = a;
        test.x = b;
    } else if has_missing {
        return Err(Error::Data("data has missing values and imputation is off".into()));
    }

    let mut pca_cumulative = None;
    if let Some(sel) = spec.pca {
        let r = pca_fit_transform(&train.x, &test.x, sel)?;
        pca_cumulative = Some(r.model.cumulative_ratio.clone());
        train.x = r.train;
        test.x = r.test;
        train.feature_names = (0..train.x.ncols()).map(|k| format!("pc{k}")).collect();
        test.feature_names = train.feature_names.clone();
    }

    let scaler = FittedScaler::fit(spec.scaler, &train.x);
    train.x = scaler.transform(&train.x);
    test.x = scaler.transform(&test.x);
    if !train.is_finite() || !test.is_finite() {
        return Err(Error::Numerical("non-finite values after preprocessing".into()));
    }
    Ok(Prepared {
        train,
        test,
        pca_cumulative,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub accuracy: f64,
    pub c: f64,
    pub gamma: f64,
}

pub fn default_c_grid() -> Vec<f64> {
    vec![0.1, 1.0, 10.0, 100.0, 1000.0]
}

pub fn default_gamma_grid() -> Vec<Gamma> {
    use crate::kernels::NamedGamma;
    vec![
        Gamma::Value(0.01),
        Gamma::Value(0.1),
        Gamma::Value(1.0),
        Gamma::Value(10.0),
        Gamma::Named(NamedGamma::Scale),
        Gamma::Named(NamedGamma::Auto),
    ]
}

/// Learning curve of a grid-searched RBF-SVC on stratified subsamples of the
/// training set, scored on the held-out set.
pub fn learning_curve(
    train: &Dataset,
    test: &Dataset,
    sizes: &[usize],
    c_grid: &[f64],
    gamma_grid: &[Gamma],
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    use crate::search::{grid_search_classical, ClassicalKind};
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        if size > train.len() {
            return Err(Error::Config(format!(
                "curve size {size} exceeds training size {}",
                train.len()
            )));
        }
        let idx = stratified_sample_indices(&train.y, size, seed)?;
        let sub = train.subset(&idx);
        if sub.classes().len() < 2 {
            return Err(Error::Data(format!("subsample of size {size} has a single class")));
        }
        let res = grid_search_classical(ClassicalKind::Rbf, &sub.x, &sub.y, c_grid, gamma_grid, 0.75, seed)?;
        let c = res.best.c;
        let gamma = res.best.gamma.expect("rbf search sets gamma");
        let k_train = gram_rbf(&sub.x, None, gamma)?;
        let k_test = gram_rbf(&test.x, Some(&sub.x), gamma)?;
        let pred = fit_predict(&k_train, &sub.y, c, &k_test, &SvcConfig::default())?;
        out.push(CurvePoint {
            size,
            accuracy: accuracy(&pred, &test.y)?,
            c,
            gamma,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SyntheticKind {
    TwoMoons,
    /// Isotropic Gaussian blobs; `noise` is the cluster standard deviation.
    Blobs { centers: usize },
    /// Two concentric rings (inner radius half the outer).
    XorRings,
}

/// Seeded synthetic datasets. Class sizes differ by at most one.
pub fn make_synthetic(kind: SyntheticKind, m: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if m < 4 {
        return Err(Error::Config("synthetic datasets need m >= 4".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Config(format!("noise must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = Matrix::zeros(m, 2);
    let mut y = Vec::with_capacity(m);
    let name = match kind {
        SyntheticKind::TwoMoons => {
            let outer = m.div_ceil(2);
            let inner = m - outer;
            let lin = |n: usize, k: usize| {
                if n > 1 {
                    std::f64::consts::PI * k as f64 / (n - 1) as f64
                } else {
                    0.0
                }
            };
            for k in 0..outer {
                let t = lin(outer, k);
                x[(k, 0)] = t.cos();
                x[(k, 1)] = t.sin();
                y.push(0);
            }
            for k in 0..inner {
                let t = lin(inner, k);
                x[(outer + k, 0)] = 1.0 - t.cos();
                x[(outer + k, 1)] = 0.5 - t.sin();
                y.push(1);
            }
            for v in x.iter_mut() {
                *v += noise * gauss.sample(&mut rng);
            }
            "two_moons"
        }
        SyntheticKind::Blobs { centers } => {
            if centers < 2 {
                return Err(Error::Config("blobs need at least two centers".into()));
            }
            let mids: Vec<(f64, f64)> = (0..centers)
                .map(|_| (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
                .collect();
            for i in 0..m {
                let c = i * centers / m;
                x[(i, 0)] = mids[c].0 + noise * gauss.sample(&mut rng);
                x[(i, 1)] = mids[c].1 + noise * gauss.sample(&mut rng);
                y.push(c as i64);
            }
            "blobs"
        }
        SyntheticKind::XorRings => {
            let outer = m.div_ceil(2);
            for i in 0..m {
                let (radius, label, k, n) = if i < outer {
                    (1.0, 0, i, outer)
                } else {
                    (0.5, 1, i - outer, m - outer)
                };
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                x[(i, 0)] = radius * t.cos() + noise * gauss.sample(&mut rng);
                x[(i, 1)] = radius * t.sin() + noise * gauss.sample(&mut rng);
                y.push(label);
            }
            "xor_rings"
        }
    };
    if !x.iter().all(|v| v.is_finite()) {
        warn!("synthetic generator produced non-finite values");
    }
    Dataset::new(x, y, format!("synthetic:{name}:m={m}:noise={noise}:seed={seed}"))
}
