//! Hyperparameter search: exhaustive grids for the classical kernels and a
//! two-stage randomized search for the quantum ones.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datapipe::{select_rows, stratified_split_indices};
use crate::error::{Error, Result};
use crate::kernels::{gram_linear, gram_rbf, Gamma};
use crate::svm::{accuracy, fit_predict, SvcConfig};
use crate::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalKind {
    Linear,
    Rbf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumKind {
    Qamp,
    Qrbf,
}

/// One point in hyperparameter space. Fields a kernel does not use stay `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub iteration: usize,
    /// 0 for grid points, 1 or 2 for the randomized stages.
    pub stage: u8,
    pub params: HyperParams,
    /// Validation accuracy; `None` when the trial failed.
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: HyperParams,
    pub best_score: f64,
    pub trials: Vec<Trial>,
    pub early_stopped: bool,
}

fn best_of(trials: &[Trial]) -> Option<(HyperParams, f64)> {
    let mut best: Option<(HyperParams, f64)> = None;
    for t in trials {
        if let Some(s) = t.score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((t.params, s));
            }
        }
    }
    best
}

/// Evaluates every `(C, γ)` combination on one stratified train/validation
/// split and returns the most accurate. Ties go to the smaller `C`, then the
/// smaller `γ`. The linear kernel ignores `gamma_grid`.
pub fn grid_search_classical(
    kind: ClassicalKind,
    x: &Matrix,
    y: &[i64],
    c_grid: &[f64],
    gamma_grid: &[Gamma],
    train_fraction: f64,
    seed: u64,
) -> Result<SearchResult> {
    if c_grid.is_empty() || (kind == ClassicalKind::Rbf && gamma_grid.is_empty()) {
        return Err(Error::Config("search grids must be nonempty".into()));
    }
    if let Some(c) = c_grid.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::Config(format!("C grid value {c} must be positive")));
    }
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let (tr, va) = stratified_split_indices(y, train_fraction, seed)?;
    let (xt, xv) = (select_rows(x, &tr), select_rows(x, &va));
    let yt: Vec<i64> = tr.iter().map(|&i| y[i]).collect();
    let yv: Vec<i64> = va.iter().map(|&i| y[i]).collect();

    let mut cs = c_grid.to_vec();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    let gammas: Vec<Option<f64>> = match kind {
        ClassicalKind::Linear => vec![None],
        ClassicalKind::Rbf => {
            let mut g = gamma_grid
                .iter()
                .map(|g| g.resolve(&xt))
                .collect::<Result<Vec<f64>>>()?;
            g.sort_by(f64::total_cmp);
            g.dedup();
            g.into_iter().map(Some).collect()
        }
    };
    let grams = gammas
        .iter()
        .map(|g| match g {
            None => Ok((gram_linear(&xt, None)?, gram_linear(&xv, Some(&xt))?)),
            Some(g) => Ok((gram_rbf(&xt, None, *g)?, gram_rbf(&xv, Some(&xt), *g)?)),
        })
        .collect::<Result<Vec<_>>>()?;

    let cfg = SvcConfig::default();
    let mut trials = Vec::with_capacity(cs.len() * gammas.len());
    for &c in &cs {
        for (g, (kt, kv)) in gammas.iter().zip(&grams) {
            let pred = fit_predict(kt, &yt, c, kv, &cfg)?;
            trials.push(Trial {
                iteration: trials.len(),
                stage: 0,
                params: HyperParams {
                    c,
                    gamma: *g,
                    ..Default::default()
                },
                score: Some(accuracy(&pred, &yv)?),
                error: None,
            });
        }
    }
    let (best, best_score) = best_of(&trials).expect("grid is nonempty");
    Ok(SearchResult {
        best,
        best_score,
        trials,
        early_stopped: false,
    })
}

pub fn default_s_values() -> Vec<f64> {
    vec![
        1e-4, 5e-4, 1e-3, 5e-3, 7.5e-3, 1e-2, 5e-2, 7.5e-2, 0.1, 0.5, 0.75, 1.0, 2.0,
    ]
}

pub fn default_c_values() -> Vec<f64> {
    vec![0.1, 1.0, 10.0, 100.0, 1000.0]
}

pub fn default_length_scales() -> Vec<f64> {
    vec![0.224, 0.707, 1.0, 2.236, 5.568]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub kind: QuantumKind,
    pub s_values: Vec<f64>,
    pub c_values: Vec<f64>,
    /// Coherent-state length scales; only sampled for QRBF.
    pub length_scales: Vec<f64>,
    pub total_iterations: usize,
    /// The search stops as soon as a trial scores strictly above this.
    pub baseline_accuracy: f64,
    pub seed: u64,
    /// Half-width of the stage-2 sampling window, in decades.
    pub window_decades: f64,
}

impl SearchSpace {
    pub fn new(kind: QuantumKind, baseline_accuracy: f64, seed: u64) -> Self {
        Self {
            kind,
            s_values: default_s_values(),
            c_values: default_c_values(),
            length_scales: default_length_scales(),
            total_iterations: match kind {
                QuantumKind::Qamp => 14,
                QuantumKind::Qrbf => 20,
            },
            baseline_accuracy,
            seed,
            window_decades: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_iterations < 2 {
            return Err(Error::Config("search needs at least 2 iterations".into()));
        }
        let mut sets = vec![("s", &self.s_values), ("C", &self.c_values)];
        if self.kind == QuantumKind::Qrbf {
            sets.push(("length scale", &self.length_scales));
        }
        for (name, set) in sets {
            if set.is_empty() {
                return Err(Error::Config(format!("{name} set is empty")));
            }
            if let Some(v) = set.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::Config(format!("{name} value {v} must be positive")));
            }
        }
        // values above 1 are accepted and simply disable early stopping
        if !(self.baseline_accuracy.is_finite() && self.baseline_accuracy >= 0.0) {
            return Err(Error::Config(format!(
                "baseline accuracy {} must be >= 0",
                self.baseline_accuracy
            )));
        }
        if !(self.window_decades.is_finite() && self.window_decades >= 0.0) {
            return Err(Error::Config("stage-2 window must be >= 0".into()));
        }
        Ok(())
    }

    pub fn stage1_iterations(&self) -> usize {
        self.total_iterations / 2
    }

    fn sample(&self, rng: &mut ChaCha8Rng, center: Option<&HyperParams>) -> HyperParams {
        let pick = |rng: &mut ChaCha8Rng, set: &[f64]| set[rng.random_range(0..set.len())];
        let around = |rng: &mut ChaCha8Rng, v: f64| {
            let w = self.window_decades;
            10f64.powf(v.log10() + rng.random_range(-w..=w))
        };
        let (s, c) = match center {
            Some(b) => {
                let s = around(rng, b.s.expect("quantum trials carry s"));
                (s, around(rng, b.c))
            }
            None => {
                let s = pick(rng, &self.s_values);
                (s, pick(rng, &self.c_values))
            }
        };
        let length_scale = match self.kind {
            QuantumKind::Qamp => None,
            QuantumKind::Qrbf => Some(pick(rng, &self.length_scales)),
        };
        HyperParams {
            c,
            gamma: None,
            s: Some(s),
            length_scale,
        }
    }
}

/// Reads a JSON-lines trial log written by [`two_stage_random_search`].
pub fn read_trial_log(path: &Path) -> Result<Vec<Trial>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Two-stage randomized search. The first half of the iterations draws
/// `(s, C)` (and `c` for QRBF) from the discrete sets; the second half draws
/// `s` and `C` log-uniformly inside a window around the stage-1 best, while
/// `c` keeps coming from its discrete set. `evaluate` trains and scores one
/// configuration; its failures are recorded and the search moves on.
///
/// With `log` set, every trial is appended to that JSON-lines file. Trials
/// already present are reused instead of rerun, so an interrupted search
/// resumes where it stopped.
pub fn two_stage_random_search<F>(space: &SearchSpace, log: Option<&Path>, mut evaluate: F) -> Result<SearchResult>
where
    F: FnMut(&HyperParams) -> Result<f64>,
{
    space.validate()?;
    let previous = match log {
        Some(p) if p.exists() => read_trial_log(p)?,
        _ => Vec::new(),
    };
    let mut writer = match log {
        Some(p) => Some(OpenOptions::new().create(true).append(true).open(p)?),
        None => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
    let n1 = space.stage1_iterations();
    let mut trials: Vec<Trial> = Vec::new();
    let mut early_stopped = false;
    for it in 0..space.total_iterations {
        let stage = if it < n1 { 1 } else { 2 };
        let center = if stage == 2 { best_of(&trials[..n1]) } else { None };
        let params = space.sample(&mut rng, center.as_ref().map(|(p, _)| p));

        let trial = match previous.get(it) {
            Some(t) if t.iteration == it && t.params == params => t.clone(),
            Some(_) => {
                return Err(Error::Config(format!(
                    "trial log disagrees with the search at iteration {it}; was it written with another seed?"
                )))
            }
            None => {
                let (score, error) = match evaluate(&params) {
                    Ok(s) if s.is_finite() => (Some(s), None),
                    Ok(s) => (None, Some(format!("non-finite score {s}"))),
                    Err(e) => {
                        log::warn!("search trial {it} failed: {e}");
                        (None, Some(e.to_string()))
                    }
                };
                let t = Trial {
                    iteration: it,
                    stage,
                    params,
                    score,
                    error,
                };
                if let Some(w) = writer.as_mut() {
                    writeln!(w, "{}", serde_json::to_string(&t)?)?;
                    w.flush()?;
                }
                t
            }
        };
        let hit = trial.score.is_some_and(|s| s > space.baseline_accuracy);
        trials.push(trial);
        if hit {
            early_stopped = true;
            break;
        }
    }

    let (best, best_score) =
        best_of(&trials).ok_or_else(|| Error::Numerical("every search trial failed".into()))?;
    Ok(SearchResult {
        best,
        best_score,
        trials,
        early_stopped,
    })
}
