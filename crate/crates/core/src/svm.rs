//! Support-vector classification on precomputed kernels.
//!
//! The binary solver is SMO with second-order working-set selection on the
//! dual `min ½αᵀQα − eᵀα`, `0 ≤ α ≤ C`, `yᵀα = 0`, `Q_ij = y_i y_j K_ij`.
//! Multiclass problems use one-vs-one voting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvcConfig {
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Hard iteration cap; `None` means `max(10^7, 100·m)`.
    pub max_iter: Option<usize>,
    /// Curvature floor for pairs with non-positive `K_ii + K_jj − 2K_ij`.
    pub tau: f64,
}

impl Default for SvcConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: None,
            tau: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    /// `α_i · y_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    /// Positions of the support vectors in the training matrix.
    pub support_idx: Vec<usize>,
    pub bias: f64,
    pub c: f64,
    /// Labels mapped to `+1` and `−1`, in that order.
    pub classes: [i64; 2],
    /// Sample ids of the training matrix columns the model expects.
    pub train_ids: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective `Σα − ½αᵀQα` at the solution.
    pub objective: f64,
}

/// Full solver output, including every `α` (used by tests and diagnostics).
#[derive(Clone, Debug)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub model: SvcModel,
    /// Dual objective after every iteration, when tracing was requested.
    pub trace: Vec<f64>,
}

fn check_kernel(k: &KernelMatrix, m: usize) -> Result<()> {
    if !k.is_square() {
        return Err(Error::Dimension {
            expected: k.nrows(),
            got: k.ncols(),
        });
    }
    if k.nrows() != m {
        return Err(Error::Dimension {
            expected: k.nrows(),
            got: m,
        });
    }
    if k.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("kernel matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Binary SVC on a train Gram matrix with labels in `{+1, −1}`.
pub fn fit_binary(k: &KernelMatrix, y: &[f64], c: f64, cfg: &SvcConfig) -> Result<SvcModel> {
    Ok(solve(k, y, c, cfg, false)?.model)
}

/// [`fit_binary`] that also returns every multiplier and, with `trace`,
/// the objective after each iteration.
pub fn solve(k: &KernelMatrix, y: &[f64], c: f64, cfg: &SvcConfig, trace: bool) -> Result<SmoSolution> {
    let m = y.len();
    check_kernel(k, m)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter("binary labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Data("binary SVC needs both classes".into()));
    }
    let kk = |i: usize, j: usize| k.values[(i, j)];
    let max_iter = cfg.max_iter.unwrap_or((100 * m).max(10_000_000));

    let mut alpha = vec![0.0; m];
    let mut grad = vec![-1.0; m];
    let mut objective_trace = Vec::new();
    let is_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let is_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..m {
            if is_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_gain = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..m {
                if !is_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = kk(i, i) + kk(t, t) - 2.0 * kk(i, t);
                    if a <= 0.0 {
                        a = cfg.tau;
                    }
                    let gain = -(b * b) / a;
                    if gain < best_gain {
                        best_gain = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        if gmax - gmin < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = kk(i, i) + kk(j, j) - 2.0 * kk(i, j);
        if quad <= 0.0 {
            quad = cfg.tau;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            grad[t] += y[t] * (y[i] * kk(t, i) * di + y[j] * kk(t, j) * dj);
        }
        if trace {
            objective_trace.push(dual_objective(&alpha, &grad));
        }
    }

    let bias = compute_bias(&alpha, &grad, y, c);
    let support_idx: Vec<usize> = (0..m).filter(|&t| alpha[t] > 0.0).collect();
    let dual_coefs = support_idx.iter().map(|&t| alpha[t] * y[t]).collect();
    let model = SvcModel {
        dual_coefs,
        support_idx,
        bias,
        c,
        classes: [1, -1],
        train_ids: k.row_ids.clone(),
        converged,
        iterations,
        objective: dual_objective(&alpha, &grad),
    };
    Ok(SmoSolution {
        alpha,
        model,
        trace: objective_trace,
    })
}

/// `Σα − ½αᵀQα` from the gradient `Qα − e`: equals `−½ Σ α_t (G_t − 1)`.
fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

/// Mean of `−y_t G_t` over free multipliers, or the midpoint of the interval
/// allowed by the bounded ones when none is free.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    };
    -rho
}

/// `f(x) = Σ_{i∈SV} dual_coefs_i · K(x, x_i) + b` for every row of `k_test`.
pub fn decision_function(model: &SvcModel, k_test: &KernelMatrix) -> Result<Vec<f64>> {
    if k_test.nrows() == 0 {
        return Ok(Vec::new());
    }
    if k_test.col_ids != model.train_ids {
        return Err(Error::Data(format!(
            "test kernel columns ({} ids) do not match the {} training ids of the model",
            k_test.ncols(),
            model.train_ids.len()
        )));
    }
    Ok((0..k_test.nrows())
        .map(|r| {
            model
                .support_idx
                .iter()
                .zip(&model.dual_coefs)
                .map(|(&s, &coef)| coef * k_test.get(r, s))
                .sum::<f64>()
                + model.bias
        })
        .collect())
}

/// One-vs-one ensemble over all class pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvcMulticlass {
    pub classes: Vec<i64>,
    /// Positions (into the training matrix) used by each pairwise model.
    pub members: Vec<Vec<usize>>,
    pub models: Vec<SvcModel>,
}

pub fn fit_multiclass(k: &KernelMatrix, labels: &[i64], c: f64, cfg: &SvcConfig) -> Result<SvcMulticlass> {
    check_kernel(k, labels.len())?;
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Data("classification needs at least two classes".into()));
    }
    let mut members = Vec::new();
    let mut models = Vec::new();
    for a in 0..classes.len() {
        for b in a + 1..classes.len() {
            let idx: Vec<usize> = (0..labels.len())
                .filter(|&i| labels[i] == classes[a] || labels[i] == classes[b])
                .collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if labels[i] == classes[a] { 1.0 } else { -1.0 })
                .collect();
            let mut model = fit_binary(&k.select(&idx, &idx), &y, c, cfg)?;
            model.classes = [classes[a], classes[b]];
            members.push(idx);
            models.push(model);
        }
    }
    Ok(SvcMulticlass {
        classes,
        members,
        models,
    })
}

impl SvcMulticlass {
    /// Majority vote; ties go to the larger summed decision value, then to
    /// the smaller label.
    pub fn predict(&self, k_test: &KernelMatrix) -> Result<Vec<i64>> {
        let n = k_test.nrows();
        let nc = self.classes.len();
        let mut votes = vec![vec![0usize; nc]; n];
        let mut score = vec![vec![0.0f64; nc]; n];
        let rows: Vec<usize> = (0..n).collect();
        for (model, idx) in self.models.iter().zip(&self.members) {
            let sub = k_test.select(&rows, idx);
            let f = decision_function(model, &sub)?;
            let a = self.classes.binary_search(&model.classes[0]).expect("known class");
            let b = self.classes.binary_search(&model.classes[1]).expect("known class");
            for r in 0..n {
                if f[r] > 0.0 {
                    votes[r][a] += 1;
                } else {
                    votes[r][b] += 1;
                }
                score[r][a] += f[r];
                score[r][b] -= f[r];
            }
        }
        Ok((0..n)
            .map(|r| {
                let mut best = 0;
                for c in 1..nc {
                    let better = votes[r][c] > votes[r][best]
                        || (votes[r][c] == votes[r][best] && score[r][c] > score[r][best]);
                    if better {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}

/// Fits on `k_train` and predicts the rows of `k_test` (test × train).
pub fn fit_predict(
    k_train: &KernelMatrix,
    labels: &[i64],
    c: f64,
    k_test: &KernelMatrix,
    cfg: &SvcConfig,
) -> Result<Vec<i64>> {
    fit_multiclass(k_train, labels, c, cfg)?.predict(k_test)
}

pub fn accuracy(pred: &[i64], truth: &[i64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Data("accuracy of an empty prediction set".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}
