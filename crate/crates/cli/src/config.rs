//! Run configuration, read from TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qkernel::datapipe::{default_c_grid, default_gamma_grid, PipelineSpec, SyntheticKind};
use qkernel::featuremap::Extension;
use qkernel::kernels::Gamma;
use qkernel::kta::TrainConfig;
use qkernel::search::{default_c_values, default_length_scales, default_s_values, QuantumKind};
use qkernel::{Error, Result};

pub const DEFAULT_LAYERS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When set, overrides every section seed (pipeline, training, search,
    /// synthetic generator).
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub pipeline: PipelineSpec,
    #[serde(default)]
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub kernels: Vec<KernelConfig>,
    #[serde(default)]
    pub learning_curve: Option<CurveConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("qkbench-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic(SyntheticConfig),
    Csv(CsvConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    TwoMoons,
    Blobs,
    XorRings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub generator: Generator,
    pub m: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Blob count; only read by the blobs generator.
    #[serde(default = "default_centers")]
    pub centers: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_noise() -> f64 {
    0.1
}

fn default_centers() -> usize {
    2
}

fn default_seed() -> u64 {
    42
}

impl SyntheticConfig {
    pub fn kind(&self) -> SyntheticKind {
        match self.generator {
            Generator::TwoMoons => SyntheticKind::TwoMoons,
            Generator::Blobs => SyntheticKind::Blobs {
                centers: self.centers,
            },
            Generator::XorRings => SyntheticKind::XorRings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvConfig {
    /// Relative paths are resolved against the config file's directory.
    pub path: PathBuf,
    #[serde(default = "default_label")]
    pub label_column: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_label() -> String {
    "label".into()
}

fn default_delimiter() -> char {
    ','
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    #[serde(default = "default_layers")]
    pub n_layers: usize,
}

fn default_layers() -> usize {
    DEFAULT_LAYERS
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        Self {
            n_layers: DEFAULT_LAYERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Linear {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "default_c_grid")]
        c_grid: Vec<f64>,
    },
    Rbf {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "default_c_grid")]
        c_grid: Vec<f64>,
        #[serde(default = "default_gamma_grid")]
        gamma_grid: Vec<Gamma>,
    },
    Qamp(QuantumConfig),
    Qrbf(QuantumConfig),
}

/// Quantum kernel settings. When `s`, `c` (and `length_scale` for QRBF) are
/// all given the search is skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// QAmp default: the fewest qubits whose register holds the features.
    /// QRBF default: 2.
    #[serde(default)]
    pub n_qubits: Option<usize>,
    #[serde(default = "default_extension")]
    pub extension: Extension,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub length_scale: Option<f64>,
    #[serde(default)]
    pub search: SearchConfig,
}

fn default_extension() -> Extension {
    Extension::None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Defaults to 14 for QAmp and 20 for QRBF.
    pub iterations: Option<usize>,
    pub s_values: Vec<f64>,
    pub c_values: Vec<f64>,
    pub length_scales: Vec<f64>,
    pub window_decades: f64,
    /// Early-stop threshold. Defaults to the best classical validation
    /// accuracy of the same run; without classical kernels, no early stop.
    pub baseline: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: None,
            s_values: default_s_values(),
            c_values: default_c_values(),
            length_scales: default_length_scales(),
            window_decades: 0.5,
            baseline: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub sizes: Vec<usize>,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<Gamma>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub extras: Vec<usize>,
}

impl KernelConfig {
    pub fn name(&self) -> String {
        let (given, fallback) = match self {
            KernelConfig::Linear { name, .. } => (name, "linear"),
            KernelConfig::Rbf { name, .. } => (name, "rbf"),
            KernelConfig::Qamp(q) => (&q.name, "qamp"),
            KernelConfig::Qrbf(q) => (&q.name, "qrbf"),
        };
        given.clone().unwrap_or_else(|| fallback.to_string())
    }

    pub fn quantum(&self) -> Option<(QuantumKind, &QuantumConfig)> {
        match self {
            KernelConfig::Qamp(q) => Some((QuantumKind::Qamp, q)),
            KernelConfig::Qrbf(q) => Some((QuantumKind::Qrbf, q)),
            _ => None,
        }
    }

    pub fn is_classical(&self) -> bool {
        self.quantum().is_none()
    }
}

impl QuantumConfig {
    /// Fixed hyperparameters, when the config pins all of them.
    pub fn fixed(&self, kind: QuantumKind) -> Option<(f64, f64, Option<f64>)> {
        let (s, c) = (self.s?, self.c?);
        match kind {
            QuantumKind::Qamp => Some((s, c, None)),
            QuantumKind::Qrbf => Some((s, c, Some(self.length_scale?))),
        }
    }
}

fn field_error(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

fn check_positive(path: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(field_error(path, "must not be empty"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(field_error(path, format!("value {v} must be positive")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, resolves relative CSV paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let DatasetConfig::Csv(csv) = &mut cfg.dataset {
            if csv.path.is_relative() {
                if let Some(dir) = path.parent() {
                    csv.path = dir.join(&csv.path);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pushes the global seed into every section.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.resolve_seeds();
    }

    fn resolve_seeds(&mut self) {
        if let Some(seed) = self.seed {
            self.pipeline.seed = seed;
            self.train.init_seed = seed;
            if let DatasetConfig::Synthetic(s) = &mut self.dataset {
                s.seed = seed;
            }
        }
    }

    /// Seed of the hyperparameter search RNG.
    pub fn search_seed(&self) -> u64 {
        self.seed.unwrap_or(self.pipeline.seed)
    }

    pub fn validate(&mut self) -> Result<()> {
        self.resolve_seeds();
        if self.kernels.is_empty() {
            return Err(field_error("kernels", "at least one kernel is required"));
        }
        self.pipeline.validate().map_err(|e| field_error("pipeline", e))?;
        self.train.validate().map_err(|e| field_error("train", e))?;
        if self.ansatz.n_layers < 1 {
            return Err(field_error("ansatz.n_layers", "must be >= 1"));
        }
        match &self.dataset {
            DatasetConfig::Synthetic(s) => {
                if s.m < 4 {
                    return Err(field_error("dataset.synthetic.m", "must be >= 4"));
                }
                if !(s.noise.is_finite() && s.noise >= 0.0) {
                    return Err(field_error("dataset.synthetic.noise", "must be >= 0"));
                }
                if s.generator == Generator::Blobs && s.centers < 2 {
                    return Err(field_error("dataset.synthetic.centers", "must be >= 2"));
                }
            }
            DatasetConfig::Csv(c) => {
                if !c.delimiter.is_ascii() {
                    return Err(field_error("dataset.csv.delimiter", "must be a single ASCII character"));
                }
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, k) in self.kernels.iter().enumerate() {
            let path = format!("kernels[{i}]");
            if !names.insert(k.name()) {
                return Err(field_error(&path, format!("duplicate kernel name {:?}", k.name())));
            }
            match k {
                KernelConfig::Linear { c_grid, .. } => check_positive(&format!("{path}.c_grid"), c_grid)?,
                KernelConfig::Rbf {
                    c_grid, gamma_grid, ..
                } => {
                    check_positive(&format!("{path}.c_grid"), c_grid)?;
                    if gamma_grid.is_empty() {
                        return Err(field_error(&format!("{path}.gamma_grid"), "must not be empty"));
                    }
                    for g in gamma_grid {
                        if let Gamma::Value(v) = g {
                            check_positive(&format!("{path}.gamma_grid"), &[*v])?;
                        }
                    }
                }
                KernelConfig::Qamp(q) | KernelConfig::Qrbf(q) => {
                    let kind = if matches!(k, KernelConfig::Qamp(_)) {
                        QuantumKind::Qamp
                    } else {
                        QuantumKind::Qrbf
                    };
                    validate_quantum(&path, kind, q)?;
                }
            }
        }
        if let Some(c) = &self.learning_curve {
            if c.sizes.is_empty() || c.sizes.contains(&0) {
                return Err(field_error("learning_curve.sizes", "must be nonempty and positive"));
            }
            check_positive("learning_curve.c_grid", &c.c_grid)?;
        }
        if let Some(s) = &self.sweep {
            if s.extras.is_empty() {
                return Err(field_error("sweep.extras", "must not be empty"));
            }
        }
        Ok(())
    }
}

fn validate_quantum(path: &str, kind: QuantumKind, q: &QuantumConfig) -> Result<()> {
    if let Some(n) = q.n_qubits {
        if !(1..=qkernel::statevec::MAX_QUBITS).contains(&n) {
            return Err(field_error(&format!("{path}.n_qubits"), format!("{n} outside 1..=24")));
        }
    }
    match (kind, q.extension) {
        (_, Extension::None)
        | (QuantumKind::Qamp, Extension::ReuploadSpread(_))
        | (QuantumKind::Qrbf, Extension::DenseEntangle(_)) => {}
        (_, ext) => {
            return Err(field_error(
                &format!("{path}.extension"),
                format!("{ext:?} does not apply to this encoder"),
            ))
        }
    }
    if kind == QuantumKind::Qamp && q.length_scale.is_some() {
        return Err(field_error(&format!("{path}.length_scale"), "only QRBF has a length scale"));
    }
    for (field, v) in [("s", q.s), ("c", q.c), ("length_scale", q.length_scale)] {
        if let Some(v) = v {
            let ok = if field == "s" { v >= 0.0 } else { v > 0.0 };
            if !(v.is_finite() && ok) {
                return Err(field_error(&format!("{path}.{field}"), format!("invalid value {v}")));
            }
        }
    }
    let sp = format!("{path}.search");
    if q.search.iterations.is_some_and(|n| n < 2) {
        return Err(field_error(&format!("{sp}.iterations"), "must be >= 2"));
    }
    check_positive(&format!("{sp}.s_values"), &q.search.s_values)?;
    check_positive(&format!("{sp}.c_values"), &q.search.c_values)?;
    if kind == QuantumKind::Qrbf {
        check_positive(&format!("{sp}.length_scales"), &q.search.length_scales)?;
    }
    if !(q.search.window_decades.is_finite() && q.search.window_decades >= 0.0) {
        return Err(field_error(&format!("{sp}.window_decades"), "must be >= 0"));
    }
    if let Some(b) = q.search.baseline {
        if !(b.is_finite() && b >= 0.0) {
            return Err(field_error(&format!("{sp}.baseline"), "must be >= 0"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset.synthetic]
generator = "two_moons"
m = 40

[[kernels]]
kind = "linear"

[[kernels]]
kind = "rbf"
gamma_grid = [0.1, "scale"]

[[kernels]]
kind = "qamp"
n_qubits = 2
s = 0.5
c = 10.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let mut cfg = RunConfig::from_toml(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.ansatz.n_layers, 5);
        assert_eq!(cfg.train.steps, 500);
        assert_eq!(cfg.train.batch_size, 4);
        assert_eq!(cfg.pipeline.seed, 42);
        assert_eq!(cfg.kernels.len(), 3);
        assert_eq!(cfg.kernels[2].name(), "qamp");
        let (kind, q) = cfg.kernels[2].quantum().unwrap();
        assert_eq!(q.fixed(kind), Some((0.5, 10.0, None)));
        match &cfg.kernels[1] {
            KernelConfig::Rbf { gamma_grid, .. } => assert_eq!(gamma_grid.len(), 2),
            _ => panic!(),
        }
    }

    #[test]
    fn global_seed_reaches_every_section() {
        let mut cfg = RunConfig::from_toml(&format!("seed = 7\n{MINIMAL}")).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.pipeline.seed, 7);
        assert_eq!(cfg.train.init_seed, 7);
        assert_eq!(cfg.search_seed(), 7);
        cfg.apply_seed(9);
        match &cfg.dataset {
            DatasetConfig::Synthetic(s) => assert_eq!(s.seed, 9),
            _ => panic!(),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("m = 40", "m = 40\ncolour = 1");
        let e = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("colour"), "{e}");

        let bad = MINIMAL.replace("n_qubits = 2", "n_qubits = 2\nextension = { dense_entangle = 1 }");
        let e = RunConfig::from_toml(&bad).unwrap().validate().unwrap_err().to_string();
        assert!(e.contains("kernels[2].extension"), "{e}");

        let bad = MINIMAL.replace("kind = \"linear\"", "kind = \"linear\"\nc_grid = [-1.0]");
        let e = RunConfig::from_toml(&bad).unwrap().validate().unwrap_err().to_string();
        assert!(e.contains("kernels[0].c_grid"), "{e}");

        let none = "kernels = []\n[dataset.synthetic]\ngenerator = \"blobs\"\nm = 10\n";
        let e = RunConfig::from_toml(none).unwrap().validate().unwrap_err().to_string();
        assert!(e.contains("kernels"), "{e}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let dup = format!("{MINIMAL}\n[[kernels]]\nkind = \"linear\"\n");
        let e = RunConfig::from_toml(&dup).unwrap().validate().unwrap_err().to_string();
        assert!(e.contains("duplicate"), "{e}");
    }
}
