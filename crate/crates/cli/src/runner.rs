//! Benchmark execution: dataset → preprocessing → kernels → search → SVC.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use qkernel::datapipe::{
    learning_curve, load_csv, make_synthetic, run_pipeline, select_rows, CurvePoint, Dataset, PcaSelection, Prepared,
};
use qkernel::featuremap::{
    extended_variant, qubits_for_dim, resource_count, AnsatzParams, EncoderKind, EncoderSpec, Extension, ResourceCount, Scaling,
};
use qkernel::kernels::QuantumKernel;
use qkernel::kta::{self, AnsatzCheckpoint, Checkpoint, TrainReport};
use qkernel::search::{
    grid_search_classical, two_stage_random_search, ClassicalKind, HyperParams, QuantumKind, SearchSpace, Trial,
};
use qkernel::svm::{accuracy, fit_predict, SvcConfig};
use qkernel::{Error, Matrix, Result};

use crate::config::{DatasetConfig, KernelConfig, QuantumConfig, RunConfig};
use crate::plot::{bar_chart, line_chart, LineSeries, Series};

/// Upper bound used when no early-stop baseline applies; accuracies never exceed 1.
const NO_EARLY_STOP: f64 = 2.0;

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetConfig::Synthetic(s) => make_synthetic(s.kind(), s.m, s.noise, s.seed),
        DatasetConfig::Csv(c) => load_csv(&c.path, &c.label_column, c.delimiter as u8),
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    run_pipeline(&load_dataset(cfg)?, &cfg.pipeline)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub provenance: String,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub classes: Vec<i64>,
}

impl DatasetSummary {
    fn of(p: &Prepared) -> Self {
        Self {
            provenance: p.train.provenance.clone(),
            n_train: p.train.len(),
            n_test: p.test.len(),
            n_features: p.train.n_features(),
            classes: p.train.classes(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KtaSummary {
    pub initial_validation_kta: f64,
    pub best_validation_kta: f64,
    pub best_step: usize,
    pub history: Vec<Checkpoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub budget: usize,
    pub baseline: Option<f64>,
    pub early_stopped: bool,
    pub trials: Vec<Trial>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelResult {
    pub name: String,
    pub kind: String,
    pub test_accuracy: Option<f64>,
    pub validation_accuracy: Option<f64>,
    pub hyperparameters: Option<HyperParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_qubits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<Extension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<ResourceCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kta: Option<KtaSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl KernelResult {
    fn failed(name: String, kind: &str, e: &Error) -> Self {
        Self {
            name,
            kind: kind.into(),
            test_accuracy: None,
            validation_accuracy: None,
            hyperparameters: None,
            n_qubits: None,
            extension: None,
            resources: None,
            kta: None,
            search: None,
            checkpoint_hash: None,
            error: Some(e.to_string()),
        }
    }
}

/// Everything in here is a pure function of the config; wall-clock times
/// live in a separate file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: DatasetSummary,
    pub n_layers: usize,
    pub kernels: Vec<KernelResult>,
    pub environment: Environment,
}

impl RunReport {
    pub fn kernel(&self, name: &str) -> Option<&KernelResult> {
        self.kernels.iter().find(|k| k.name == name)
    }

}

/// Report plus the errors of kernels that failed, in config order.
pub struct RunOutcome {
    pub report: RunReport,
    pub failures: Vec<(String, Error)>,
}

/// Outcome of a kernel evaluation plus artifacts that do not go into the report.
pub struct Evaluated {
    pub result: KernelResult,
    pub checkpoint: Option<AnsatzCheckpoint>,
}

fn kind_label(kc: &KernelConfig) -> &'static str {
    match kc {
        KernelConfig::Linear { .. } => "linear",
        KernelConfig::Rbf { .. } => "rbf",
        KernelConfig::Qamp(_) => "qamp",
        KernelConfig::Qrbf(_) => "qrbf",
    }
}

fn classical_kind(kc: &KernelConfig) -> (ClassicalKind, &'static str) {
    match kc {
        KernelConfig::Linear { .. } => (ClassicalKind::Linear, "linear"),
        _ => (ClassicalKind::Rbf, "rbf"),
    }
}

pub fn evaluate_classical(kc: &KernelConfig, prep: &Prepared, seed: u64) -> Result<Evaluated> {
    let (kind, label) = classical_kind(kc);
    let (c_grid, gamma_grid) = match kc {
        KernelConfig::Linear { c_grid, .. } => (c_grid.clone(), Vec::new()),
        KernelConfig::Rbf {
            c_grid, gamma_grid, ..
        } => (c_grid.clone(), gamma_grid.clone()),
        _ => return Err(Error::Config(format!("{} is not a classical kernel", kc.name()))),
    };
    let (tr, te) = (&prep.train, &prep.test);
    let res = grid_search_classical(kind, &tr.x, &tr.y, &c_grid, &gamma_grid, 0.75, seed)?;
    let (k_train, k_test) = match res.best.gamma {
        None => (
            qkernel::kernels::gram_linear(&tr.x, None)?,
            qkernel::kernels::gram_linear(&te.x, Some(&tr.x))?,
        ),
        Some(g) => (
            qkernel::kernels::gram_rbf(&tr.x, None, g)?,
            qkernel::kernels::gram_rbf(&te.x, Some(&tr.x), g)?,
        ),
    };
    let pred = fit_predict(&k_train, &tr.y, res.best.c, &k_test, &SvcConfig::default())?;
    Ok(Evaluated {
        result: KernelResult {
            name: kc.name(),
            kind: label.into(),
            test_accuracy: Some(accuracy(&pred, &te.y)?),
            validation_accuracy: Some(res.best_score),
            hyperparameters: Some(res.best),
            n_qubits: None,
            extension: None,
            resources: None,
            kta: None,
            search: Some(SearchSummary {
                budget: res.trials.len(),
                baseline: None,
                early_stopped: false,
                trials: res.trials,
            }),
            checkpoint_hash: None,
            error: None,
        },
        checkpoint: None,
    })
}

/// Encoder for a quantum kernel config on `n_features` inputs. The QRBF
/// length scale is a placeholder until the search or config fixes it.
pub fn base_spec(kind: QuantumKind, q: &QuantumConfig, n_features: usize) -> Result<EncoderSpec> {
    let extra = match q.extension {
        Extension::None => 0,
        Extension::ReuploadSpread(k) | Extension::DenseEntangle(k) => k,
    };
    let spec = match kind {
        QuantumKind::Qamp => {
            let n = q.n_qubits.unwrap_or_else(|| qubits_for_dim(n_features));
            if n_features > 1 << n {
                return Err(Error::Config(format!(
                    "n_qubits: {n} qubits hold at most {} amplitudes but the data has {n_features} features",
                    1usize << n
                )));
            }
            EncoderSpec::qamp(n)?
        }
        QuantumKind::Qrbf => EncoderSpec::qrbf(q.length_scale.unwrap_or(1.0), q.n_qubits.unwrap_or(2))?,
    };
    extended_variant(&spec, extra)
}

fn with_length_scale(spec: &EncoderSpec, c: Option<f64>) -> Result<EncoderSpec> {
    let mut out = *spec;
    if let (EncoderKind::Qrbf { .. }, Some(c)) = (spec.kind, c) {
        out.kind = EncoderKind::Qrbf { length_scale: c };
    }
    out.validate()?;
    Ok(out)
}

/// KTA-trains the ansatz for one hyperparameter point and scores the SVC on
/// the validation fold the training held out.
pub struct QuantumTrial {
    pub spec: EncoderSpec,
    pub scaling: Scaling,
    pub report: TrainReport,
    pub validation_accuracy: f64,
}

fn fold(prep: &Prepared, idx: &[usize]) -> (Matrix, Vec<i64>) {
    (select_rows(&prep.train.x, idx), idx.iter().map(|&i| prep.train.y[i]).collect())
}

/// Validation accuracy of `params` at regularization `c` on the KTA folds.
pub fn fold_accuracy(
    prep: &Prepared,
    report: &TrainReport,
    spec: &EncoderSpec,
    params: &AnsatzParams,
    scaling: Scaling,
    c: f64,
) -> Result<f64> {
    let (xs, ys) = fold(prep, &report.sub_train_idx);
    let (xv, yv) = fold(prep, &report.validation_idx);
    let qk = QuantumKernel::new(*spec, params.clone(), scaling)?;
    let pred = fit_predict(&qk.gram(&xs, None)?, &ys, c, &qk.gram(&xv, Some(&xs))?, &SvcConfig::default())?;
    accuracy(&pred, &yv)
}

/// Test accuracy of `params` at `c`, fitting on the full training set.
pub fn test_accuracy(prep: &Prepared, qk: &QuantumKernel, c: f64) -> Result<f64> {
    let (tr, te) = (&prep.train, &prep.test);
    let pred = fit_predict(&qk.gram(&tr.x, None)?, &tr.y, c, &qk.gram(&te.x, Some(&tr.x))?, &SvcConfig::default())?;
    accuracy(&pred, &te.y)
}

pub fn quantum_trial(cfg: &RunConfig, prep: &Prepared, spec: &EncoderSpec, hp: &HyperParams) -> Result<QuantumTrial> {
    let spec = with_length_scale(spec, hp.length_scale)?;
    let scaling = Scaling::new(hp.s.ok_or_else(|| Error::InvalidParameter("trial without s".into()))?)?;
    let report = kta::train(&prep.train.x, &prep.train.y, &spec, scaling, cfg.ansatz.n_layers, &cfg.train)?;
    let validation_accuracy = fold_accuracy(prep, &report, &spec, &report.best_params, scaling, hp.c)?;
    Ok(QuantumTrial {
        spec,
        scaling,
        report,
        validation_accuracy,
    })
}

/// Searches (or takes the fixed) hyperparameters, retrains at the best point
/// and scores on the test set.
pub fn evaluate_quantum(
    cfg: &RunConfig,
    kc: &KernelConfig,
    spec: &EncoderSpec,
    prep: &Prepared,
    baseline: Option<f64>,
    trial_log: Option<&Path>,
) -> Result<Evaluated> {
    let (kind, q) = kc
        .quantum()
        .ok_or_else(|| Error::Config(format!("{} is not a quantum kernel", kc.name())))?;
    let (best, search) = match q.fixed(kind) {
        Some((s, c, length_scale)) => (
            HyperParams {
                c,
                gamma: None,
                s: Some(s),
                length_scale,
            },
            None,
        ),
        None => {
            let mut space = SearchSpace::new(kind, q.search.baseline.or(baseline).unwrap_or(NO_EARLY_STOP), cfg.search_seed());
            space.s_values = q.search.s_values.clone();
            space.c_values = q.search.c_values.clone();
            space.length_scales = q.search.length_scales.clone();
            space.window_decades = q.search.window_decades;
            if let Some(n) = q.search.iterations {
                space.total_iterations = n;
            }
            let res = two_stage_random_search(&space, trial_log, |hp| {
                let t = quantum_trial(cfg, prep, spec, hp)?;
                info!(
                    "{}: s={:.4e} C={:.4e} validation accuracy {:.4}",
                    kc.name(),
                    hp.s.unwrap_or(f64::NAN),
                    hp.c,
                    t.validation_accuracy
                );
                Ok(t.validation_accuracy)
            })?;
            let summary = SearchSummary {
                budget: space.total_iterations,
                baseline: (space.baseline_accuracy <= 1.0).then_some(space.baseline_accuracy),
                early_stopped: res.early_stopped,
                trials: res.trials,
            };
            (res.best, Some(summary))
        }
    };
    // retraining is deterministic, so this reproduces the winning trial exactly
    let trial = quantum_trial(cfg, prep, spec, &best)?;
    let checkpoint = AnsatzCheckpoint::new(
        trial.spec,
        &trial.report.best_params,
        trial.scaling,
        cfg.train.init_seed,
        trial.report.history.clone(),
    );
    let hash = checkpoint.hash()?;
    let mut qk = QuantumKernel::new(trial.spec, trial.report.best_params.clone(), trial.scaling)?;
    qk.checkpoint_hash = Some(hash.clone());
    let test = test_accuracy(prep, &qk, best.c)?;
    let r = &trial.report;
    Ok(Evaluated {
        result: KernelResult {
            name: kc.name(),
            kind: spec.name().into(),
            test_accuracy: Some(test),
            validation_accuracy: Some(trial.validation_accuracy),
            hyperparameters: Some(best),
            n_qubits: Some(trial.spec.n_qubits),
            extension: Some(trial.spec.extension),
            resources: Some(resource_count(&trial.spec, cfg.ansatz.n_layers)?),
            kta: Some(KtaSummary {
                initial_validation_kta: r.initial_validation_kta(),
                best_validation_kta: r.best_validation_kta,
                best_step: r.best_step,
                history: r.history.clone(),
            }),
            search,
            checkpoint_hash: Some(hash),
            error: None,
        },
        checkpoint: Some(checkpoint),
    })
}

/// Options that affect where artifacts go but not what is computed.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Reuse trial logs already in the output directory.
    pub resume: bool,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn csv_line(fields: &[String]) -> String {
    let escaped: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    escaped.join(",") + "\n"
}

pub fn results_csv(report: &RunReport) -> String {
    let mut out = csv_line(
        &[
            "kernel", "kind", "test_accuracy", "validation_accuracy", "C", "gamma", "s", "length_scale", "n_qubits", "cnots",
            "single_qubit_gates", "depth", "error",
        ]
        .map(String::from),
    );
    for k in &report.kernels {
        let hp = k.hyperparameters.unwrap_or_default();
        out += &csv_line(&[
            k.name.clone(),
            k.kind.clone(),
            fmt_opt(k.test_accuracy),
            fmt_opt(k.validation_accuracy),
            if k.hyperparameters.is_some() { format!("{}", hp.c) } else { String::new() },
            fmt_opt(hp.gamma),
            fmt_opt(hp.s),
            fmt_opt(hp.length_scale),
            k.n_qubits.map(|n| n.to_string()).unwrap_or_default(),
            k.resources.map(|r| r.cnots.to_string()).unwrap_or_default(),
            k.resources.map(|r| r.single_qubit_gates.to_string()).unwrap_or_default(),
            k.resources.map(|r| r.depth.to_string()).unwrap_or_default(),
            k.error.clone().unwrap_or_default(),
        ]);
    }
    out
}

fn history_csv(history: &[Checkpoint]) -> String {
    let mut out = "step,train_batch_kta,validation_kta\n".to_string();
    for c in history {
        out += &format!("{},{},{}\n", c.step, fmt_opt(c.train_batch_kta), c.validation_kta);
    }
    out
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Best classical validation accuracy among already evaluated kernels.
fn classical_baseline(results: &[KernelResult], configs: &[KernelConfig]) -> Option<f64> {
    results
        .iter()
        .zip(configs)
        .filter(|(_, c)| c.is_classical())
        .filter_map(|(r, _)| r.validation_accuracy)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

/// Full benchmark. Classical kernels run first so their validation accuracy
/// can serve as the quantum search's early-stop baseline.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let out = &opts.out_dir;
    let prep = prepare(cfg)?;
    prep.train.save_cache(&out.join("data"), "train")?;
    prep.test.save_cache(&out.join("data"), "test")?;

    let mut order: Vec<usize> = (0..cfg.kernels.len()).filter(|&i| cfg.kernels[i].is_classical()).collect();
    order.extend((0..cfg.kernels.len()).filter(|&i| !cfg.kernels[i].is_classical()));

    let mut results: Vec<Option<KernelResult>> = vec![None; cfg.kernels.len()];
    let mut failures = Vec::new();
    let mut timing = BTreeMap::new();
    for i in order {
        let kc = &cfg.kernels[i];
        let name = kc.name();
        let started = Instant::now();
        let evaluated = match kc.quantum() {
            None => evaluate_classical(kc, &prep, cfg.search_seed()),
            Some((kind, q)) => {
                let done: Vec<KernelResult> = results.iter().flatten().cloned().collect();
                let done_cfgs: Vec<KernelConfig> = results
                    .iter()
                    .zip(&cfg.kernels)
                    .filter(|(r, _)| r.is_some())
                    .map(|(_, c)| c.clone())
                    .collect();
                let baseline = classical_baseline(&done, &done_cfgs);
                let log_path = out.join(format!("search_{}.jsonl", file_stem(&name)));
                if !opts.resume && log_path.exists() {
                    fs::remove_file(&log_path)?;
                }
                fs::create_dir_all(out)?;
                base_spec(kind, q, prep.train.n_features())
                    .and_then(|spec| evaluate_quantum(cfg, kc, &spec, &prep, baseline, Some(&log_path)))
            }
        };
        timing.insert(name.clone(), started.elapsed().as_secs_f64());
        results[i] = Some(match evaluated {
            Ok(ev) => {
                if let Some(cp) = &ev.checkpoint {
                    write(
                        &out.join("checkpoints").join(format!("{}.json", file_stem(&name))),
                        cp.to_json()?,
                    )?;
                }
                if let Some(k) = &ev.result.kta {
                    write(&out.join(format!("kta_history_{}.csv", file_stem(&name))), history_csv(&k.history))?;
                }
                ev.result
            }
            Err(e) => {
                warn!("kernel {name} failed: {e}");
                let r = KernelResult::failed(name.clone(), kind_label(kc), &e);
                failures.push((i, name, e));
                r
            }
        });
    }

    let report = RunReport {
        dataset: DatasetSummary::of(&prep),
        n_layers: cfg.ansatz.n_layers,
        kernels: results.into_iter().map(|r| r.expect("every kernel evaluated")).collect(),
        environment: Environment::current(),
    };
    write(&out.join("results.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    write(&out.join("results.csv"), results_csv(&report))?;
    write(&out.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
    let cats: Vec<String> = report.kernels.iter().map(|k| k.name.clone()).collect();
    let series = vec![Series {
        name: "test accuracy".into(),
        values: report.kernels.iter().map(|k| k.test_accuracy.unwrap_or(f64::NAN)).collect(),
    }];
    write(&out.join("results.svg"), bar_chart("Kernel comparison", "test accuracy", &cats, &series))?;
    failures.sort_by_key(|f| f.0);
    Ok(RunOutcome {
        report,
        failures: failures.into_iter().map(|(_, n, e)| (n, e)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    /// `unscaled` (s = 1) or `scaled` (tuned s).
    pub scaling: String,
    /// `initial` (seeded, untrained) or `trained` (best KTA checkpoint).
    pub params: String,
    pub s: f64,
    pub c: f64,
    pub validation_kta: f64,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub tuned_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_scale: Option<f64>,
    pub cells: Vec<AblationCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub dataset: DatasetSummary,
    pub kernels: Vec<AblationRow>,
}

/// `C` with the best fold accuracy for these params (ties to the smaller `C`).
fn tune_c(
    prep: &Prepared,
    report: &TrainReport,
    spec: &EncoderSpec,
    params: &AnsatzParams,
    scaling: Scaling,
    c_values: &[f64],
) -> Result<(f64, f64)> {
    let mut cs = c_values.to_vec();
    cs.sort_by(f64::total_cmp);
    let mut best = (cs[0], f64::NEG_INFINITY);
    for c in cs {
        let a = fold_accuracy(prep, report, spec, params, scaling, c)?;
        if a > best.1 {
            best = (c, a);
        }
    }
    Ok(best)
}

/// Initial vs trained accuracy with and without the scaling parameter.
/// Every cell tunes `C` on the validation fold for its own kernel.
pub fn ablate_scaling(cfg: &RunConfig) -> Result<AblationReport> {
    let prep = prepare(cfg)?;
    let mut rows = Vec::new();
    for kc in &cfg.kernels {
        let Some((kind, q)) = kc.quantum() else { continue };
        let spec = base_spec(kind, q, prep.train.n_features())?;
        let tuned = evaluate_quantum(cfg, kc, &spec, &prep, None, None)?.result;
        let hp = tuned.hyperparameters.expect("successful evaluation has hyperparameters");
        let tuned_s = hp.s.expect("quantum hyperparameters carry s");
        let spec = with_length_scale(&spec, hp.length_scale)?;
        let mut cells = Vec::new();
        for (label, s) in [("unscaled", 1.0), ("scaled", tuned_s)] {
            let scaling = Scaling::new(s)?;
            let report = kta::train(&prep.train.x, &prep.train.y, &spec, scaling, cfg.ansatz.n_layers, &cfg.train)?;
            for (which, params, kta_value) in [
                ("initial", &report.initial_params, report.initial_validation_kta()),
                ("trained", &report.best_params, report.best_validation_kta),
            ] {
                let (c, val) = tune_c(&prep, &report, &spec, params, scaling, &q.search.c_values)?;
                let qk = QuantumKernel::new(spec, params.clone(), scaling)?;
                cells.push(AblationCell {
                    scaling: label.into(),
                    params: which.into(),
                    s,
                    c,
                    validation_kta: kta_value,
                    validation_accuracy: val,
                    test_accuracy: test_accuracy(&prep, &qk, c)?,
                });
            }
        }
        rows.push(AblationRow {
            name: kc.name(),
            tuned_s,
            length_scale: hp.length_scale,
            cells,
        });
    }
    if rows.is_empty() {
        return Err(Error::Config("ablate-scaling needs at least one quantum kernel".into()));
    }
    Ok(AblationReport {
        dataset: DatasetSummary::of(&prep),
        kernels: rows,
    })
}

pub fn write_ablation(report: &AblationReport, out: &Path) -> Result<()> {
    write(&out.join("ablation.json"), serde_json::to_string_pretty(report)? + "\n")?;
    let mut csv = "kernel,scaling,params,s,C,validation_kta,validation_accuracy,test_accuracy\n".to_string();
    for row in &report.kernels {
        for c in &row.cells {
            csv += &csv_line(&[
                row.name.clone(),
                c.scaling.clone(),
                c.params.clone(),
                c.s.to_string(),
                c.c.to_string(),
                c.validation_kta.to_string(),
                c.validation_accuracy.to_string(),
                c.test_accuracy.to_string(),
            ]);
        }
    }
    write(&out.join("ablation.csv"), csv)?;
    let cats: Vec<String> = report
        .kernels
        .iter()
        .flat_map(|r| ["unscaled", "scaled"].map(|s| format!("{} {s}", r.name)))
        .collect();
    let pick = |which: &str| -> Vec<f64> {
        report
            .kernels
            .iter()
            .flat_map(|r| {
                ["unscaled", "scaled"].map(|s| {
                    r.cells
                        .iter()
                        .find(|c| c.scaling == s && c.params == which)
                        .map_or(f64::NAN, |c| c.test_accuracy)
                })
            })
            .collect()
    };
    let series = vec![
        Series {
            name: "initial".into(),
            values: pick("initial"),
        },
        Series {
            name: "trained".into(),
            values: pick("trained"),
        },
    ];
    write(&out.join("ablation.svg"), bar_chart("Scaling ablation", "test accuracy", &cats, &series))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub extra_qubits: usize,
    pub n_qubits: usize,
    pub test_accuracy: f64,
    pub validation_accuracy: f64,
    pub hyperparameters: HyperParams,
    pub resources: ResourceCount,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub name: String,
    pub points: Vec<SweepPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset: DatasetSummary,
    pub kernels: Vec<SweepSeries>,
}

/// Accuracy as qubits are added through each encoder's extension. Each
/// point reruns the kernel's full protocol on the enlarged register.
pub fn qubit_sweep(cfg: &RunConfig, extras: &[usize]) -> Result<SweepReport> {
    if extras.is_empty() {
        return Err(Error::Config("sweep.extras: must not be empty".into()));
    }
    let prep = prepare(cfg)?;
    let mut out = Vec::new();
    for kc in &cfg.kernels {
        let Some((kind, q)) = kc.quantum() else { continue };
        let base = base_spec(kind, q, prep.train.n_features())?;
        let mut points = Vec::new();
        for &extra in extras {
            let spec = extended_variant(&base, extra)?;
            let r = evaluate_quantum(cfg, kc, &spec, &prep, None, None)?.result;
            points.push(SweepPoint {
                extra_qubits: extra,
                n_qubits: spec.n_qubits,
                test_accuracy: r.test_accuracy.expect("evaluated"),
                validation_accuracy: r.validation_accuracy.expect("evaluated"),
                hyperparameters: r.hyperparameters.expect("evaluated"),
                resources: r.resources.expect("quantum result has resources"),
            });
        }
        out.push(SweepSeries {
            name: kc.name(),
            points,
        });
    }
    if out.is_empty() {
        return Err(Error::Config("qubit-sweep needs at least one quantum kernel".into()));
    }
    Ok(SweepReport {
        dataset: DatasetSummary::of(&prep),
        kernels: out,
    })
}

pub fn write_sweep(report: &SweepReport, out: &Path) -> Result<()> {
    write(&out.join("sweep.json"), serde_json::to_string_pretty(report)? + "\n")?;
    let mut csv = "kernel,extra_qubits,n_qubits,test_accuracy,validation_accuracy,cnots,single_qubit_gates,depth\n".to_string();
    for s in &report.kernels {
        for p in &s.points {
            csv += &csv_line(&[
                s.name.clone(),
                p.extra_qubits.to_string(),
                p.n_qubits.to_string(),
                p.test_accuracy.to_string(),
                p.validation_accuracy.to_string(),
                p.resources.cnots.to_string(),
                p.resources.single_qubit_gates.to_string(),
                p.resources.depth.to_string(),
            ]);
        }
    }
    write(&out.join("sweep.csv"), csv)?;
    let series: Vec<LineSeries> = report
        .kernels
        .iter()
        .map(|s| LineSeries {
            name: s.name.clone(),
            points: s.points.iter().map(|p| (p.extra_qubits as f64, p.test_accuracy)).collect(),
        })
        .collect();
    write(
        &out.join("sweep.svg"),
        line_chart("Additional qubits", "extra qubits", "test accuracy", &series),
    )
}

pub fn run_learning_curve(cfg: &RunConfig) -> Result<Vec<CurvePoint>> {
    let curve = cfg
        .learning_curve
        .as_ref()
        .ok_or_else(|| Error::Config("learning_curve: section missing".into()))?;
    let prep = prepare(cfg)?;
    learning_curve(
        &prep.train,
        &prep.test,
        &curve.sizes,
        &curve.c_grid,
        &curve.gamma_grid,
        cfg.pipeline.seed,
    )
}

pub fn write_learning_curve(points: &[CurvePoint], out: &Path) -> Result<()> {
    write(&out.join("learning_curve.json"), serde_json::to_string_pretty(points)? + "\n")?;
    let mut csv = "size,accuracy,C,gamma\n".to_string();
    for p in points {
        csv += &format!("{},{},{},{}\n", p.size, p.accuracy, p.c, p.gamma);
    }
    write(&out.join("learning_curve.csv"), csv)?;
    let series = vec![LineSeries {
        name: "rbf-svc".into(),
        points: points.iter().map(|p| (p.size as f64, p.accuracy)).collect(),
    }];
    write(
        &out.join("learning_curve.svg"),
        line_chart("Learning curve", "training samples", "test accuracy", &series),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaAnalysis {
    pub n_features: usize,
    /// Cumulative explained-variance ratio for k = 1..
    pub cumulative_ratio: Vec<f64>,
    pub components_for_95: usize,
    /// Point of the curve farthest from the chord joining its ends.
    pub elbow: usize,
}

/// Cumulative explained variance of the training split, after imputation
/// and before scaling, as the pipeline sees it.
pub fn pca_analyze(cfg: &RunConfig) -> Result<PcaAnalysis> {
    let mut pipeline = cfg.pipeline.clone();
    pipeline.pca = Some(pipeline.pca.unwrap_or(PcaSelection::Variance(1.0)));
    let data = load_dataset(cfg)?;
    let prep = run_pipeline(&data, &pipeline)?;
    let cum = prep.pca_cumulative.expect("pipeline ran PCA");
    let k95 = cum.iter().position(|&r| r >= 0.95 - 1e-12).map_or(cum.len(), |p| p + 1);
    Ok(PcaAnalysis {
        n_features: data.n_features(),
        elbow: elbow(&cum),
        components_for_95: k95,
        cumulative_ratio: cum,
    })
}

fn elbow(cum: &[f64]) -> usize {
    let n = cum.len();
    if n < 3 {
        return 1;
    }
    let (x0, y0, x1, y1) = (1.0, cum[0], n as f64, cum[n - 1]);
    let norm = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    (0..n)
        .map(|i| {
            let (x, y) = ((i + 1) as f64, cum[i]);
            (i + 1, ((y1 - y0) * x - (x1 - x0) * y + x1 * y0 - y1 * x0).abs() / norm)
        })
        .fold((1, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0
}

pub fn write_pca(a: &PcaAnalysis, out: &Path) -> Result<()> {
    write(&out.join("pca.json"), serde_json::to_string_pretty(a)? + "\n")?;
    let mut csv = "components,cumulative_ratio\n".to_string();
    for (i, r) in a.cumulative_ratio.iter().enumerate() {
        csv += &format!("{},{}\n", i + 1, r);
    }
    write(&out.join("pca.csv"), csv)?;
    let series = vec![LineSeries {
        name: "cumulative".into(),
        points: a.cumulative_ratio.iter().enumerate().map(|(i, &r)| ((i + 1) as f64, r)).collect(),
    }];
    write(
        &out.join("pca.svg"),
        line_chart("Explained variance", "components", "cumulative ratio", &series),
    )
}
