//! Gram matrices for the quantum and classical kernels.
//!
//! Quantum entries are exact state fidelities. Feature states are built once
//! per sample and shared read-only by the entry workers; every entry is an
//! independent computation, so the result does not depend on scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::{
    encoding_states, feature_state, run_ansatz, AnsatzParams, EncoderKind, EncoderSpec,
    FeatureState, Scaling,
};
use crate::statevec::StateVector;
use crate::Matrix;

/// Entries may overshoot `[0, 1]` by this much before they count as a bug.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub kind: String,
    pub hyperparameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_hash: Option<String>,
}

/// A Gram matrix together with the sample ids of its rows and columns.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    pub values: Matrix,
    pub row_ids: Vec<usize>,
    pub col_ids: Vec<usize>,
    pub meta: KernelMeta,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    rows: usize,
    cols: usize,
    row_ids: Vec<usize>,
    col_ids: Vec<usize>,
    #[serde(flatten)]
    meta: KernelMeta,
}

impl KernelMatrix {
    pub fn new(values: Matrix, meta: KernelMeta) -> Self {
        let row_ids = (0..values.nrows()).collect();
        let col_ids = (0..values.ncols()).collect();
        Self {
            values,
            row_ids,
            col_ids,
            meta,
        }
    }

    pub fn with_ids(mut self, row_ids: Vec<usize>, col_ids: Vec<usize>) -> Result<Self> {
        if row_ids.len() != self.values.nrows() {
            return Err(Error::Dimension {
                expected: self.values.nrows(),
                got: row_ids.len(),
            });
        }
        if col_ids.len() != self.values.ncols() {
            return Err(Error::Dimension {
                expected: self.values.ncols(),
                got: col_ids.len(),
            });
        }
        self.row_ids = row_ids;
        self.col_ids = col_ids;
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Restriction to the given row and column positions (not ids).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> KernelMatrix {
        let values = Matrix::from_fn(rows.len(), cols.len(), |i, j| self.values[(rows[i], cols[j])]);
        KernelMatrix {
            values,
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
            col_ids: cols.iter().map(|&c| self.col_ids[c]).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Largest `|K_ij - K_ji|`; infinite for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.values - self.values.transpose()).abs().max()
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Writes the values as headerless CSV plus a JSON metadata sidecar next
    /// to it (same stem, `.json` extension).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for i in 0..self.nrows() {
            w.write_record(self.values.row(i).iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        let sidecar = Sidecar {
            rows: self.nrows(),
            cols: self.ncols(),
            row_ids: self.row_ids.clone(),
            col_ids: self.col_ids.clone(),
            meta: self.meta.clone(),
        };
        fs::write(Self::sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(Self::sidecar_path(path))?)?;
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
        let mut data = Vec::with_capacity(sidecar.rows * sidecar.cols);
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != sidecar.cols {
                return Err(Error::Data(format!(
                    "kernel row has {} columns, sidecar says {}",
                    rec.len(),
                    sidecar.cols
                )));
            }
            for cell in rec.iter() {
                data.push(
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Data(format!("bad kernel entry {cell:?}: {e}")))?,
                );
            }
        }
        if data.len() != sidecar.rows * sidecar.cols {
            return Err(Error::Data("kernel file row count disagrees with sidecar".into()));
        }
        let values = Matrix::from_row_slice(sidecar.rows, sidecar.cols, &data);
        KernelMatrix::new(values, sidecar.meta).with_ids(sidecar.row_ids, sidecar.col_ids)
    }
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.overlap(b)?.norm_sqr())
}

fn clamp_unit(v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else if (-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&v) {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::Numerical(format!("kernel entry {v} outside [0, 1]")))
    }
}

/// Fills a Gram matrix from a pairwise entry function. With `y = None` the
/// matrix is square over `x`, only `j >= i` is evaluated and then mirrored.
fn fill<T, F>(x: &[T], y: Option<&[T]>, entry: F) -> Result<Matrix>
where
    T: Sync,
    F: Fn(&T, &T) -> Result<f64> + Sync,
{
    match y {
        None => {
            let m = x.len();
            let rows: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|i| (i..m).map(|j| entry(&x[i], &x[j])).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            let mut out = Matrix::zeros(m, m);
            for (i, row) in rows.into_iter().enumerate() {
                for (k, v) in row.into_iter().enumerate() {
                    out[(i, i + k)] = v;
                    out[(i + k, i)] = v;
                }
            }
            Ok(out)
        }
        Some(y) => {
            let rows: Vec<Vec<f64>> = x
                .par_iter()
                .map(|a| y.iter().map(|b| entry(a, b)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            let mut out = Matrix::zeros(x.len(), y.len());
            for (i, row) in rows.into_iter().enumerate() {
                for (j, v) in row.into_iter().enumerate() {
                    out[(i, j)] = v;
                }
            }
            Ok(out)
        }
    }
}

fn rows_of(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

fn check_same_width(x1: &Matrix, x2: Option<&Matrix>) -> Result<()> {
    if let Some(x2) = x2 {
        if x2.ncols() != x1.ncols() {
            return Err(Error::Dimension {
                expected: x1.ncols(),
                got: x2.ncols(),
            });
        }
    }
    Ok(())
}

/// How quantum entries are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvalMode {
    /// Overlap of the two final feature states.
    #[default]
    Direct,
    /// Applies the second sample's ansatz adjoint to the first feature state
    /// and projects onto the second encoding state. Used to cross-check `Direct`.
    Adjoint,
}

/// A trained (or fixed) quantum kernel: encoder, ansatz angles and scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumKernel {
    pub spec: EncoderSpec,
    pub params: AnsatzParams,
    pub scaling: Scaling,
    pub mode: EvalMode,
    pub checkpoint_hash: Option<String>,
}

impl QuantumKernel {
    pub fn new(spec: EncoderSpec, params: AnsatzParams, scaling: Scaling) -> Result<Self> {
        spec.validate()?;
        if params.n_qubits() != spec.n_qubits {
            return Err(Error::Dimension {
                expected: spec.n_qubits,
                got: params.n_qubits(),
            });
        }
        Ok(Self {
            spec,
            params,
            scaling,
            mode: EvalMode::Direct,
            checkpoint_hash: None,
        })
    }

    pub fn with_mode(mut self, mode: EvalMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn meta(&self) -> KernelMeta {
        let mut hyperparameters = BTreeMap::new();
        hyperparameters.insert("s".to_string(), self.scaling.value());
        hyperparameters.insert("layers".to_string(), self.params.n_layers() as f64);
        hyperparameters.insert("qubits".to_string(), self.spec.n_qubits as f64);
        if let EncoderKind::Qrbf { length_scale } = self.spec.kind {
            hyperparameters.insert("c".to_string(), length_scale);
        }
        KernelMeta {
            kind: self.spec.name().to_string(),
            hyperparameters,
            checkpoint_hash: self.checkpoint_hash.clone(),
        }
    }

    /// Feature states of every row of `x`, computed in parallel.
    pub fn feature_states(&self, x: &Matrix) -> Result<Vec<FeatureState>> {
        rows_of(x)
            .par_iter()
            .enumerate()
            .map(|(i, row)| {
                feature_state(row, &self.spec, &self.params, self.scaling).map_err(|e| e.at_sample(i))
            })
            .collect()
    }

    /// Kernel value between two precomputed feature states: the mean
    /// fidelity over their components (a single term for `QAmp`).
    pub fn entry(a: &FeatureState, b: &FeatureState) -> Result<f64> {
        let (sa, sb) = (a.states(), b.states());
        if sa.len() != sb.len() {
            return Err(Error::Dimension {
                expected: sa.len(),
                got: sb.len(),
            });
        }
        let mut acc = 0.0;
        for (u, v) in sa.iter().zip(sb) {
            acc += fidelity(u, v)?;
        }
        clamp_unit(acc / sa.len() as f64)
    }

    fn entry_adjoint(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        let first = feature_state(x1, &self.spec, &self.params, self.scaling)?;
        let second = encoding_states(x2, &self.spec)?;
        if first.states().len() != second.len() {
            return Err(Error::Dimension {
                expected: first.states().len(),
                got: second.len(),
            });
        }
        let entangler = self.spec.entangler();
        let mut acc = 0.0;
        for (state, (enc, reupload)) in first.states().iter().zip(&second) {
            let mut s = state.clone();
            run_ansatz(&mut s, &self.params, self.scaling, *reupload, entangler, true, None)?;
            acc += fidelity(enc, &s)?;
        }
        clamp_unit(acc / second.len() as f64)
    }

    /// Gram matrix between the rows of `x1` and `x2`, or the symmetric train
    /// matrix of `x1` when `x2` is `None`.
    pub fn gram(&self, x1: &Matrix, x2: Option<&Matrix>) -> Result<KernelMatrix> {
        check_same_width(x1, x2)?;
        let values = match self.mode {
            EvalMode::Direct => {
                let s1 = self.feature_states(x1)?;
                match x2 {
                    None => fill(&s1, None, Self::entry)?,
                    Some(x2) => {
                        let s2 = self.feature_states(x2)?;
                        fill(&s1, Some(&s2), Self::entry)?
                    }
                }
            }
            EvalMode::Adjoint => {
                let r1 = rows_of(x1);
                let r2 = x2.map(rows_of);
                fill(&r1, r2.as_deref(), |a, b| self.entry_adjoint(a, b))?
            }
        };
        Ok(KernelMatrix::new(values, self.meta()))
    }
}

/// Global amplitude-encoded kernel: one fidelity per pair of samples.
pub fn gram_qamp(
    x1: &Matrix,
    x2: Option<&Matrix>,
    spec: &EncoderSpec,
    params: &AnsatzParams,
    scaling: Scaling,
) -> Result<KernelMatrix> {
    if !matches!(spec.kind, EncoderKind::Qamp) {
        return Err(Error::InvalidParameter("gram_qamp needs a QAmp encoder".into()));
    }
    QuantumKernel::new(*spec, params.clone(), scaling)?.gram(x1, x2)
}

/// Feature-wise coherent-state kernel: mean of the `d` per-feature fidelities.
pub fn gram_qrbf(
    x1: &Matrix,
    x2: Option<&Matrix>,
    spec: &EncoderSpec,
    params: &AnsatzParams,
    scaling: Scaling,
) -> Result<KernelMatrix> {
    if !matches!(spec.kind, EncoderKind::Qrbf { .. }) {
        return Err(Error::InvalidParameter("gram_qrbf needs a QRBF encoder".into()));
    }
    QuantumKernel::new(*spec, params.clone(), scaling)?.gram(x1, x2)
}

pub fn gram_linear(x1: &Matrix, x2: Option<&Matrix>) -> Result<KernelMatrix> {
    check_same_width(x1, x2)?;
    let r1 = rows_of(x1);
    let r2 = x2.map(rows_of);
    let values = fill(&r1, r2.as_deref(), |a, b| {
        Ok(a.iter().zip(b).map(|(u, v)| u * v).sum())
    })?;
    Ok(KernelMatrix::new(
        values,
        KernelMeta {
            kind: "linear".into(),
            ..Default::default()
        },
    ))
}

pub fn gram_rbf(x1: &Matrix, x2: Option<&Matrix>, gamma: f64) -> Result<KernelMatrix> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    check_same_width(x1, x2)?;
    let r1 = rows_of(x1);
    let r2 = x2.map(rows_of);
    let values = fill(&r1, r2.as_deref(), |a, b| {
        let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
        Ok((-gamma * d2).exp())
    })?;
    let mut hyperparameters = BTreeMap::new();
    hyperparameters.insert("gamma".to_string(), gamma);
    Ok(KernelMatrix::new(
        values,
        KernelMeta {
            kind: "rbf".into(),
            hyperparameters,
            checkpoint_hash: None,
        },
    ))
}

/// RBF bandwidth, either explicit or one of the data-derived conventions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Value(f64),
    Named(NamedGamma),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedGamma {
    /// `1 / (d · Var(X))`, variance over all entries of the training matrix.
    Scale,
    /// `1 / d`.
    Auto,
}

impl Gamma {
    pub fn resolve(self, x_train: &Matrix) -> Result<f64> {
        let d = x_train.ncols() as f64;
        let g = match self {
            Gamma::Value(g) => g,
            Gamma::Named(NamedGamma::Auto) => 1.0 / d,
            Gamma::Named(NamedGamma::Scale) => {
                let n = (x_train.nrows() * x_train.ncols()) as f64;
                let mean = x_train.sum() / n;
                let var = x_train.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                if var > 0.0 {
                    1.0 / (d * var)
                } else {
                    1.0
                }
            }
        };
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma resolved to {g}")));
        }
        Ok(g)
    }
}

impl std::fmt::Display for Gamma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Gamma::Value(v) => write!(f, "{v}"),
            Gamma::Named(NamedGamma::Scale) => write!(f, "scale"),
            Gamma::Named(NamedGamma::Auto) => write!(f, "auto"),
        }
    }
}
