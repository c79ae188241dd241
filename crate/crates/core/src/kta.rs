//! Kernel-target alignment and its training loop.
//!
//! Alignment is the normalized Frobenius inner product `⟨K, T⟩ / (‖K‖ ‖T‖)`
//! with the label target `T_ij = 1` for equal labels and `-1/(C-1)` otherwise
//! (`±1` in the binary case). Gradients use the parameter-shift rule on every
//! occurrence of an angle: a kernel entry depends on each angle once through
//! each of its two feature states.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datapipe::stratified_split_indices;
use crate::error::{Error, Result};
use crate::featuremap::{encoding_states, run_ansatz, AngleKind, AnsatzParams, EncoderSpec, Scaling};
use crate::kernels::QuantumKernel;
use crate::statevec::StateVector;
use crate::Matrix;

/// Ideal kernel for `labels`.
pub fn target_matrix(labels: &[i64]) -> Matrix {
    let n_classes = distinct(labels).len();
    let off = if n_classes > 1 {
        -1.0 / (n_classes as f64 - 1.0)
    } else {
        1.0
    };
    let m = labels.len();
    Matrix::from_fn(m, m, |i, j| if labels[i] == labels[j] { 1.0 } else { off })
}

fn distinct(labels: &[i64]) -> Vec<i64> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn center(k: &Matrix) -> Matrix {
    let m = k.nrows();
    let h = Matrix::identity(m, m) - Matrix::from_element(m, m, 1.0 / m as f64);
    &h * k * &h
}

fn frobenius_dot(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| u * v).sum()
}

/// Pieces shared by the score and its gradient.
struct Alignment {
    score: f64,
    /// `∂ score / ∂ K_ij`, treating every entry as independent.
    d_score: Matrix,
}

fn alignment(k: &Matrix, labels: &[i64], centered: bool) -> Result<Alignment> {
    let m = k.nrows();
    if m == 0 {
        return Err(Error::InvalidParameter("alignment of an empty kernel".into()));
    }
    if k.ncols() != m {
        return Err(Error::Dimension {
            expected: m,
            got: k.ncols(),
        });
    }
    if labels.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: labels.len(),
        });
    }
    if distinct(labels).len() < 2 {
        warn!("alignment target built from a single class");
    }
    let mut t = target_matrix(labels);
    let mut kk = k.clone();
    if centered {
        t = center(&t);
        kk = center(&kk);
    }
    let kn = frobenius_dot(&kk, &kk).sqrt();
    let tn = frobenius_dot(&t, &t).sqrt();
    if kn == 0.0 || tn == 0.0 {
        return Err(Error::Numerical("alignment undefined for a zero kernel or target".into()));
    }
    let a = frobenius_dot(&kk, &t);
    let score = a / (kn * tn);
    let mut d_score = t / (kn * tn) - kk * (a / (kn.powi(3) * tn));
    if centered {
        // chain rule through K ↦ HKH
        d_score = center(&d_score);
    }
    Ok(Alignment { score, d_score })
}

/// Uncentered alignment of a square Gram matrix with `labels`.
pub fn kta_score(k: &Matrix, labels: &[i64]) -> Result<f64> {
    Ok(alignment(k, labels, false)?.score)
}

/// Alignment after double-centering both `K` and the target.
pub fn kta_score_centered(k: &Matrix, labels: &[i64]) -> Result<f64> {
    Ok(alignment(k, labels, true)?.score)
}

/// Angles i.i.d. uniform on `[0, 2π)` from a seeded ChaCha stream.
pub fn init_params(n_layers: usize, n_qubits: usize, seed: u64) -> Result<AnsatzParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let flat: Vec<f64> = (0..2 * n_layers * n_qubits)
        .map(|_| rng.random_range(0.0..tau))
        .collect();
    AnsatzParams::from_flat(n_layers, n_qubits, &flat)
}

/// Alignment value and its gradient, laid out like [`AnsatzParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct KtaGradient {
    pub kta: f64,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl KtaGradient {
    pub fn flat(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.phi).copied().collect()
    }
}

/// One sample's encodings plus its unshifted feature states.
struct SampleStates {
    encodings: Vec<(StateVector, f64)>,
    states: Vec<StateVector>,
}

/// Exact alignment gradient on a batch via the parameter-shift rule.
pub fn kta_gradient(
    params: &AnsatzParams,
    x: &Matrix,
    labels: &[i64],
    spec: &EncoderSpec,
    scaling: Scaling,
    centered: bool,
) -> Result<KtaGradient> {
    let m = x.nrows();
    if m == 0 {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    if params.n_qubits() != spec.n_qubits {
        return Err(Error::Dimension {
            expected: spec.n_qubits,
            got: params.n_qubits(),
        });
    }
    let entangler = spec.entangler();
    let samples: Vec<SampleStates> = (0..m)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let encodings = encoding_states(&row, spec).map_err(|e| e.at_sample(i))?;
            let states = encodings
                .iter()
                .map(|(enc, r)| {
                    let mut s = enc.clone();
                    run_ansatz(&mut s, params, scaling, *r, entangler, false, None)?;
                    Ok(s)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SampleStates { encodings, states })
        })
        .collect::<Result<_>>()?;
    let d = samples[0].states.len() as f64;

    let mut k = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut acc = 0.0;
            for (a, b) in samples[i].states.iter().zip(&samples[j].states) {
                acc += a.overlap(b)?.norm_sqr();
            }
            k[(i, j)] = acc / d;
            k[(j, i)] = acc / d;
        }
    }
    let Alignment { score, d_score } = alignment(&k, labels, centered)?;

    let refs: Vec<_> = params.refs().collect();
    let half = std::f64::consts::FRAC_PI_2;
    let s = scaling.value();
    let grads: Vec<f64> = refs
        .par_iter()
        .map(|&p| {
            // dK_ij/dp summed against d_score; symmetry of d_score folds the
            // two occurrences into a factor of two.
            let mut total = 0.0;
            for i in 0..m {
                for (comp, (enc, reupload)) in samples[i].encodings.iter().enumerate() {
                    let coeff = match p.kind {
                        AngleKind::Theta => 1.0,
                        AngleKind::Phi => s * reupload,
                    };
                    if coeff == 0.0 {
                        continue;
                    }
                    let mut plus = enc.clone();
                    run_ansatz(&mut plus, params, scaling, *reupload, entangler, false, Some((p, half)))?;
                    let mut minus = enc.clone();
                    run_ansatz(&mut minus, params, scaling, *reupload, entangler, false, Some((p, -half)))?;
                    for j in 0..m {
                        if j == i {
                            continue;
                        }
                        let other = &samples[j].states[comp];
                        let diff = plus.overlap(other)?.norm_sqr() - minus.overlap(other)?.norm_sqr();
                        total += 2.0 * d_score[(i, j)] * coeff * 0.5 * diff / d;
                    }
                }
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;
    let half_len = grads.len() / 2;
    Ok(KtaGradient {
        kta: score,
        theta: grads[..half_len].to_vec(),
        phi: grads[half_len..].to_vec(),
    })
}

/// Alignment of the full Gram matrix of `x` under the given parameters.
pub fn kta_of(
    params: &AnsatzParams,
    x: &Matrix,
    labels: &[i64],
    spec: &EncoderSpec,
    scaling: Scaling,
    centered: bool,
) -> Result<f64> {
    let k = QuantumKernel::new(*spec, params.clone(), scaling)?.gram(x, None)?;
    Ok(alignment(&k.values, labels, centered)?.score)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub eval_every: usize,
    pub init_seed: u64,
    /// Fraction of the training data used as sub-train; the rest validates.
    pub split_fraction: f64,
    pub centered: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            steps: 500,
            batch_size: 4,
            eval_every: 50,
            init_seed: 42,
            split_fraction: 0.75,
            centered: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("train.learning_rate must be positive".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("train.batch_size must be >= 1".into()));
        }
        if self.eval_every < 1 {
            return Err(Error::Config("train.eval_every must be >= 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config("train.split_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    /// Alignment of the most recent mini-batch (before its update); absent at step 0.
    pub train_batch_kta: Option<f64>,
    pub validation_kta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_params: AnsatzParams,
    pub best_params: AnsatzParams,
    pub best_step: usize,
    pub best_validation_kta: f64,
    pub history: Vec<Checkpoint>,
    /// Positions (into the training data) of the sub-train and validation folds.
    pub sub_train_idx: Vec<usize>,
    pub validation_idx: Vec<usize>,
}

impl TrainReport {
    pub fn initial_validation_kta(&self) -> f64 {
        self.history[0].validation_kta
    }
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, n: usize) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Gradient-ascent step.
    fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * grad[k];
            self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * grad[k] * grad[k];
            let mhat = self.m[k] / c1;
            let vhat = self.v[k] / c2;
            params[k] += self.lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch positions into `labels`. Class-stratified when the batch can
/// hold every class, uniform otherwise.
fn sample_batch(labels: &[i64], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let classes = distinct(labels);
    if batch_size < classes.len() || classes.len() < 2 {
        let mut idx = index::sample(rng, labels.len(), batch_size).into_vec();
        idx.sort_unstable();
        return idx;
    }
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.shuffle(rng);
    let mut quota = vec![batch_size / classes.len(); classes.len()];
    for &c in order.iter().take(batch_size % classes.len()) {
        quota[c] += 1;
    }
    let mut chosen = Vec::with_capacity(batch_size);
    for (c, &class) in classes.iter().enumerate() {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let take = quota[c].min(members.len());
        chosen.extend(index::sample(rng, members.len(), take).into_iter().map(|k| members[k]));
    }
    if chosen.len() < batch_size {
        let rest: Vec<usize> = (0..labels.len()).filter(|i| !chosen.contains(i)).collect();
        let need = batch_size - chosen.len();
        chosen.extend(index::sample(rng, rest.len(), need).into_iter().map(|k| rest[k]));
    }
    chosen.sort_unstable();
    chosen
}

fn rows(x: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Trains the ansatz angles by Adam ascent on mini-batch alignment and keeps
/// the checkpoint with the best validation alignment.
pub fn train(
    x: &Matrix,
    labels: &[i64],
    spec: &EncoderSpec,
    scaling: Scaling,
    n_layers: usize,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if x.nrows() != labels.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    let (sub_idx, val_idx) = stratified_split_indices(labels, cfg.split_fraction, cfg.init_seed)?;
    let x_sub = rows(x, &sub_idx);
    let y_sub: Vec<i64> = sub_idx.iter().map(|&i| labels[i]).collect();
    let x_val = rows(x, &val_idx);
    let y_val: Vec<i64> = val_idx.iter().map(|&i| labels[i]).collect();
    if distinct(&y_sub).len() < 2 {
        return Err(Error::Config("sub-train split contains a single class".into()));
    }
    if cfg.batch_size > sub_idx.len() {
        return Err(Error::Config(format!(
            "batch size {} exceeds sub-train size {}",
            cfg.batch_size,
            sub_idx.len()
        )));
    }

    let initial = init_params(n_layers, spec.n_qubits, cfg.init_seed)?;
    let validate = |p: &AnsatzParams| kta_of(p, &x_val, &y_val, spec, scaling, cfg.centered);

    let mut history = vec![Checkpoint {
        step: 0,
        train_batch_kta: None,
        validation_kta: validate(&initial)?,
    }];
    let mut best = (initial.clone(), 0usize, history[0].validation_kta);

    let mut flat = initial.to_flat();
    let mut adam = Adam::new(cfg.learning_rate, flat.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
    rng.set_stream(1);

    for step in 1..=cfg.steps {
        let batch = sample_batch(&y_sub, cfg.batch_size, &mut rng);
        let xb = rows(&x_sub, &batch);
        let yb: Vec<i64> = batch.iter().map(|&i| y_sub[i]).collect();
        let current = AnsatzParams::from_flat(n_layers, spec.n_qubits, &flat)?;
        let g = kta_gradient(&current, &xb, &yb, spec, scaling, cfg.centered)?;
        adam.ascend(&mut flat, &g.flat());
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite parameters at step {step}")));
        }

        if step % cfg.eval_every == 0 || step == cfg.steps {
            let params = AnsatzParams::from_flat(n_layers, spec.n_qubits, &flat)?;
            let v = validate(&params)?;
            history.push(Checkpoint {
                step,
                train_batch_kta: Some(g.kta),
                validation_kta: v,
            });
            if v > best.2 {
                best = (params, step, v);
            }
        }
    }

    Ok(TrainReport {
        initial_params: initial,
        best_params: best.0,
        best_step: best.1,
        best_validation_kta: best.2,
        history,
        sub_train_idx: sub_idx,
        validation_idx: val_idx,
    })
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized trained ansatz. The SHA-256 of its JSON form identifies the
/// parameters in kernel metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzCheckpoint {
    pub version: u32,
    pub encoder: EncoderSpec,
    pub n_layers: usize,
    pub n_qubits: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub s: f64,
    pub seed: u64,
    pub history: Vec<Checkpoint>,
    #[serde(default)]
    pub extra: BTreeMap<String, f64>,
}

impl AnsatzCheckpoint {
    pub fn new(
        encoder: EncoderSpec,
        params: &AnsatzParams,
        scaling: Scaling,
        seed: u64,
        history: Vec<Checkpoint>,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            encoder,
            n_layers: params.n_layers(),
            n_qubits: params.n_qubits(),
            theta: params.thetas().to_vec(),
            phi: params.phis().to_vec(),
            s: scaling.value(),
            seed,
            history,
            extra: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> Result<AnsatzParams> {
        AnsatzParams::new(self.n_layers, self.n_qubits, self.theta.clone(), self.phi.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_json()?.as_bytes());
        Ok(hex::encode(digest.as_slice()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cp: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint version {}",
                cp.version
            )));
        }
        cp.params()?;
        Ok(cp)
    }
}
