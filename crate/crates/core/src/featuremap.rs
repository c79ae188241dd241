//! Data encoders and the layered trainable ansatz.
//!
//! Two encoders are provided. `QAmp` pads a feature vector cyclically to
//! `2^n` entries and uses it as the amplitude vector. `QRBF` maps a single
//! scalar feature onto a coherent state truncated to `D = 2^n` Fock levels,
//! whose squared overlaps approximate a Gaussian kernel.
//!
//! Each ansatz layer applies `Ry(θ[l][i])` on every wire, then
//! `Rz(s · φ[l][i] · x)` on every wire, then a circular CNOT entangler with
//! ascending control index.

use std::sync::atomic::{AtomicBool, Ordering};

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevec::StateVector;

/// Substitute added to an all-zero amplitude vector so it can be normalized.
pub const ZERO_VECTOR_EPSILON: f64 = 1e-12;

/// Trainable angles of an `L`-layer ansatz on `N` qubits, stored layer-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    n_layers: usize,
    n_qubits: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
}

/// Which half of the parameter block an angle belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AngleKind {
    /// `Ry` rotation angle.
    Theta,
    /// Data-coupling weight of the `Rz` rotation.
    Phi,
}

/// Address of one trainable angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamRef {
    pub layer: usize,
    pub qubit: usize,
    pub kind: AngleKind,
}

impl AnsatzParams {
    pub fn new(n_layers: usize, n_qubits: usize, theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if n_layers < 1 || n_qubits < 1 {
            return Err(Error::InvalidParameter(format!(
                "ansatz needs L >= 1 and N >= 1, got L={n_layers}, N={n_qubits}"
            )));
        }
        let expected = n_layers * n_qubits;
        for (name, v) in [("theta", &theta), ("phi", &phi)] {
            if v.len() != expected {
                return Err(Error::InvalidParameter(format!(
                    "{name} has {} entries, expected L*N = {expected}",
                    v.len()
                )));
            }
            if v.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} contains non-finite angles")));
            }
        }
        Ok(Self {
            n_layers,
            n_qubits,
            theta,
            phi,
        })
    }

    pub fn zeros(n_layers: usize, n_qubits: usize) -> Result<Self> {
        let n = n_layers * n_qubits;
        Self::new(n_layers, n_qubits, vec![0.0; n], vec![0.0; n])
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Total number of trainable angles, `2·N·L`.
    pub fn len(&self) -> usize {
        2 * self.n_layers * self.n_qubits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn theta(&self, layer: usize, qubit: usize) -> f64 {
        self.theta[layer * self.n_qubits + qubit]
    }

    pub fn phi(&self, layer: usize, qubit: usize) -> f64 {
        self.phi[layer * self.n_qubits + qubit]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn phis(&self) -> &[f64] {
        &self.phi
    }

    pub fn get(&self, p: ParamRef) -> f64 {
        match p.kind {
            AngleKind::Theta => self.theta(p.layer, p.qubit),
            AngleKind::Phi => self.phi(p.layer, p.qubit),
        }
    }

    /// All parameter addresses in flat order: every θ (layer-major), then every φ.
    pub fn refs(&self) -> impl Iterator<Item = ParamRef> + '_ {
        [AngleKind::Theta, AngleKind::Phi].into_iter().flat_map(move |kind| {
            (0..self.n_layers).flat_map(move |layer| {
                (0..self.n_qubits).map(move |qubit| ParamRef { layer, qubit, kind })
            })
        })
    }

    /// Flat vector in the order of [`AnsatzParams::refs`].
    pub fn to_flat(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.phi).copied().collect()
    }

    pub fn from_flat(n_layers: usize, n_qubits: usize, flat: &[f64]) -> Result<Self> {
        let half = n_layers * n_qubits;
        if flat.len() != 2 * half {
            return Err(Error::Dimension {
                expected: 2 * half,
                got: flat.len(),
            });
        }
        Self::new(n_layers, n_qubits, flat[..half].to_vec(), flat[half..].to_vec())
    }
}

/// The global multiplier `s` on every data-dependent `Rz` argument.
///
/// Zero is accepted (it switches off data re-uploading) so that the
/// encoding-only kernel can be expressed; negative or non-finite values are not.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scaling(f64);

impl Scaling {
    pub fn new(s: f64) -> Result<Self> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scaling s must be finite and non-negative, got {s}"
            )));
        }
        Ok(Self(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EncoderKind {
    Qamp,
    Qrbf { length_scale: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    None,
    /// Extra qubits for `QAmp`; the input is padded cyclically to the larger register.
    ReuploadSpread(usize),
    /// Extra qubits for `QRBF` with the two-neighbour circular CNOT pattern.
    DenseEntangle(usize),
}

/// CNOT pattern used inside each ansatz layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entangler {
    /// `i → i+1 (mod N)` for ascending `i`.
    Ring,
    /// `i → i+1` then `i → i+2 (mod N)` for ascending `i`.
    DenseRing,
}

impl Entangler {
    /// CNOT `(control, target)` pairs of one layer. Self-loops that appear
    /// on very small registers are dropped.
    pub fn pairs(self, n_qubits: usize) -> Vec<(usize, usize)> {
        let offsets: &[usize] = match self {
            Entangler::Ring => &[1],
            Entangler::DenseRing => &[1, 2],
        };
        let mut pairs = Vec::new();
        for i in 0..n_qubits {
            for &k in offsets {
                let t = (i + k) % n_qubits;
                if t != i {
                    pairs.push((i, t));
                }
            }
        }
        pairs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub n_qubits: usize,
    pub extension: Extension,
}

impl EncoderSpec {
    pub fn qamp(n_qubits: usize) -> Result<Self> {
        let spec = Self {
            kind: EncoderKind::Qamp,
            n_qubits,
            extension: Extension::None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `QRBF` on `n_qubits` qubits (Hilbert dimension `2^n_qubits`).
    pub fn qrbf(length_scale: f64, n_qubits: usize) -> Result<Self> {
        let spec = Self {
            kind: EncoderKind::Qrbf { length_scale },
            n_qubits,
            extension: Extension::None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default `QRBF`: two qubits, four Fock levels.
    pub fn qrbf_default(length_scale: f64) -> Result<Self> {
        Self::qrbf(length_scale, 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 1 || self.n_qubits > crate::statevec::MAX_QUBITS {
            return Err(Error::InvalidParameter(format!(
                "encoder qubit count {} outside 1..={}",
                self.n_qubits,
                crate::statevec::MAX_QUBITS
            )));
        }
        if let EncoderKind::Qrbf { length_scale } = self.kind {
            if !(length_scale.is_finite() && length_scale > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "length scale c must be positive, got {length_scale}"
                )));
            }
        }
        match (self.kind, self.extension) {
            (EncoderKind::Qamp, Extension::DenseEntangle(_))
            | (EncoderKind::Qrbf { .. }, Extension::ReuploadSpread(_)) => {
                Err(Error::InvalidParameter(format!(
                    "extension {:?} does not apply to {:?}",
                    self.extension, self.kind
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entangler(&self) -> Entangler {
        match self.extension {
            Extension::DenseEntangle(_) => Entangler::DenseRing,
            _ => Entangler::Ring,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            EncoderKind::Qamp => "qamp",
            EncoderKind::Qrbf { .. } => "qrbf",
        }
    }
}

/// Cyclic padding: `out[i] = x[i mod len(x)]`.
pub fn cyclic_pad(x: &[f64], target_len: usize) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Encoding("cannot pad an empty vector".into()));
    }
    if target_len < x.len() {
        return Err(Error::Encoding(format!(
            "target length {target_len} is shorter than the input ({})",
            x.len()
        )));
    }
    Ok((0..target_len).map(|i| x[i % x.len()]).collect())
}

/// Smallest register that holds `d` amplitudes (at least one qubit).
pub fn qubits_for_dim(d: usize) -> usize {
    d.max(2).next_power_of_two().trailing_zeros() as usize
}

/// Amplitude encoding: cyclic pad to `2^n_qubits`, then L2-normalize.
pub fn encode_amplitude(x: &[f64], n_qubits: usize) -> Result<StateVector> {
    let dim = 1usize
        .checked_shl(n_qubits as u32)
        .ok_or_else(|| Error::Size(format!("{n_qubits} qubits")))?;
    let padded = cyclic_pad(x, dim)?;
    if padded.iter().all(|&v| v == 0.0) {
        return Err(Error::Encoding("all-zero feature vector has no amplitude encoding".into()));
    }
    StateVector::prepare_real(&padded)
}

/// Coherent-state amplitude `α = x / (√2 c)`.
pub fn coherent_alpha(x: f64, length_scale: f64) -> f64 {
    x / (std::f64::consts::SQRT_2 * length_scale)
}

static SATURATION_WARNED: AtomicBool = AtomicBool::new(false);

/// Whether the truncation to `dim` Fock levels drops a large part of the
/// coherent state (`|α|² > D`).
pub fn coherent_saturated(x: f64, length_scale: f64, dim: usize) -> bool {
    coherent_alpha(x, length_scale).powi(2) > dim as f64
}

/// Coherent state truncated to the first `dim` Fock levels and renormalized.
///
/// Amplitudes follow `a_{n+1} = a_n · α / √(n+1)` so no factorial is formed.
pub fn encode_coherent(x: f64, length_scale: f64, dim: usize) -> Result<StateVector> {
    if !(length_scale.is_finite() && length_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "length scale c must be positive, got {length_scale}"
        )));
    }
    if !x.is_finite() {
        return Err(Error::Encoding(format!("non-finite feature value {x}")));
    }
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::Size(format!("Hilbert dimension {dim} is not a power of two >= 2")));
    }
    let alpha = coherent_alpha(x, length_scale);
    if alpha * alpha > dim as f64 && !SATURATION_WARNED.swap(true, Ordering::Relaxed) {
        // once per process; a Gram matrix would otherwise log it per sample
        warn!(
            "coherent encoding saturated: |alpha|^2 = {:.3} exceeds D = {dim} (further warnings suppressed)",
            alpha * alpha
        );
    }
    let mut amps = Vec::with_capacity(dim);
    let mut a = 1.0f64;
    for n in 0..dim {
        amps.push(Complex64::new(a, 0.0));
        a *= alpha / ((n + 1) as f64).sqrt();
    }
    StateVector::prepare(amps)
}

/// Applies the ansatz to `state`, returning the new state. With `adjoint`
/// the exact inverse gate sequence is applied instead.
pub fn apply_ansatz(
    state: &StateVector,
    params: &AnsatzParams,
    scaling: Scaling,
    x_reupload: f64,
    entangler: Entangler,
    adjoint: bool,
) -> Result<StateVector> {
    let mut out = state.clone();
    run_ansatz(&mut out, params, scaling, x_reupload, entangler, adjoint, None)?;
    Ok(out)
}

/// Ansatz with one gate angle offset by `shift.1`. Used by the
/// parameter-shift gradient; the offset is added to the full rotation
/// angle (for `Rz` that is `s·φ·x + δ`).
pub(crate) fn run_ansatz(
    state: &mut StateVector,
    params: &AnsatzParams,
    scaling: Scaling,
    x_reupload: f64,
    entangler: Entangler,
    adjoint: bool,
    shift: Option<(ParamRef, f64)>,
) -> Result<()> {
    let n = params.n_qubits();
    if state.n_qubits() != n {
        return Err(Error::Dimension {
            expected: n,
            got: state.n_qubits(),
        });
    }
    let pairs = entangler.pairs(n);
    let s = scaling.value();
    let offset = |layer: usize, qubit: usize, kind: AngleKind| match shift {
        Some((p, d)) if p.layer == layer && p.qubit == qubit && p.kind == kind => d,
        _ => 0.0,
    };
    let ry = |l: usize, i: usize| params.theta(l, i) + offset(l, i, AngleKind::Theta);
    let rz = |l: usize, i: usize| s * params.phi(l, i) * x_reupload + offset(l, i, AngleKind::Phi);

    if !adjoint {
        for l in 0..params.n_layers() {
            for i in 0..n {
                state.ry_in_place(i, ry(l, i))?;
            }
            for i in 0..n {
                state.rz_in_place(i, rz(l, i))?;
            }
            for &(c, t) in &pairs {
                state.cnot_in_place(c, t)?;
            }
        }
    } else {
        for l in (0..params.n_layers()).rev() {
            for &(c, t) in pairs.iter().rev() {
                state.cnot_in_place(c, t)?;
            }
            for i in (0..n).rev() {
                state.rz_in_place(i, -rz(l, i))?;
            }
            for i in (0..n).rev() {
                state.ry_in_place(i, -ry(l, i))?;
            }
        }
    }
    Ok(())
}

/// Encoded feature states of one sample.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureState {
    /// `QAmp`: one state for the whole vector.
    Global(StateVector),
    /// `QRBF`: one state per feature.
    PerFeature(Vec<StateVector>),
}

impl FeatureState {
    pub fn states(&self) -> &[StateVector] {
        match self {
            FeatureState::Global(s) => std::slice::from_ref(s),
            FeatureState::PerFeature(v) => v,
        }
    }
}

/// Scalar fed into the `Rz` gates for `QAmp`: the mean of the input as given
/// to the encoder (before cyclic padding).
pub fn qamp_reupload_value(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pre-ansatz encoding states, paired with the scalar each ansatz re-uploads.
pub fn encoding_states(x: &[f64], spec: &EncoderSpec) -> Result<Vec<(StateVector, f64)>> {
    spec.validate()?;
    if x.is_empty() {
        return Err(Error::Encoding("empty feature vector".into()));
    }
    match spec.kind {
        EncoderKind::Qamp => {
            if x.len() > spec.hilbert_dim() {
                return Err(Error::Encoding(format!(
                    "{} features do not fit into {} qubits",
                    x.len(),
                    spec.n_qubits
                )));
            }
            let state = if x.iter().all(|&v| v == 0.0) {
                warn!("all-zero feature vector under amplitude encoding; filling with epsilon");
                StateVector::prepare_real(&vec![ZERO_VECTOR_EPSILON; spec.hilbert_dim()])?
            } else {
                encode_amplitude(x, spec.n_qubits)?
            };
            Ok(vec![(state, qamp_reupload_value(x))])
        }
        EncoderKind::Qrbf { length_scale } => x
            .iter()
            .map(|&v| Ok((encode_coherent(v, length_scale, spec.hilbert_dim())?, v)))
            .collect(),
    }
}

/// Full feature map: encoder followed by the ansatz.
pub fn feature_state(
    x: &[f64],
    spec: &EncoderSpec,
    params: &AnsatzParams,
    scaling: Scaling,
) -> Result<FeatureState> {
    if params.n_qubits() != spec.n_qubits {
        return Err(Error::Dimension {
            expected: spec.n_qubits,
            got: params.n_qubits(),
        });
    }
    let entangler = spec.entangler();
    let mut states = Vec::new();
    for (mut state, reupload) in encoding_states(x, spec)? {
        run_ansatz(&mut state, params, scaling, reupload, entangler, false, None)?;
        states.push(state);
    }
    Ok(match spec.kind {
        EncoderKind::Qamp => FeatureState::Global(states.pop().expect("one state")),
        EncoderKind::Qrbf { .. } => FeatureState::PerFeature(states),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCount {
    pub cnots: usize,
    pub single_qubit_gates: usize,
    /// Depth of the `L`-layer ansatz alone.
    pub depth: usize,
    /// Depth of the ansatz plus its adjoint, as in the overlap circuit.
    pub full_circuit_depth: usize,
}

/// Gate and depth accounting of the ansatz. Each layer has depth
/// `2 + #CNOTs` because consecutive chain CNOTs share a wire.
pub fn resource_count(spec: &EncoderSpec, n_layers: usize) -> Result<ResourceCount> {
    if n_layers < 1 {
        return Err(Error::InvalidParameter("L must be >= 1".into()));
    }
    spec.validate()?;
    let n = spec.n_qubits;
    let per_layer_cnots = spec.entangler().pairs(n).len();
    let depth = n_layers * (2 + per_layer_cnots);
    Ok(ResourceCount {
        cnots: n_layers * per_layer_cnots,
        single_qubit_gates: 2 * n_layers * n,
        depth,
        full_circuit_depth: 2 * depth,
    })
}

/// Larger-register variant of an encoder. `QAmp` spreads the cyclically
/// padded input over more qubits; `QRBF` gains qubits and switches to the
/// two-neighbour entangler.
pub fn extended_variant(spec: &EncoderSpec, extra_qubits: usize) -> Result<EncoderSpec> {
    spec.validate()?;
    if extra_qubits == 0 {
        return Ok(*spec);
    }
    let extension = match (spec.kind, spec.extension) {
        (EncoderKind::Qamp, Extension::None) => Extension::ReuploadSpread(extra_qubits),
        (EncoderKind::Qamp, Extension::ReuploadSpread(k)) => {
            Extension::ReuploadSpread(k + extra_qubits)
        }
        (EncoderKind::Qrbf { .. }, Extension::None) => Extension::DenseEntangle(extra_qubits),
        (EncoderKind::Qrbf { .. }, Extension::DenseEntangle(k)) => {
            Extension::DenseEntangle(k + extra_qubits)
        }
        (kind, ext) => {
            return Err(Error::InvalidParameter(format!(
                "cannot extend {kind:?} carrying {ext:?}"
            )))
        }
    };
    let out = EncoderSpec {
        kind: spec.kind,
        n_qubits: spec.n_qubits + extra_qubits,
        extension,
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_params(l: usize, n: usize, seed: u64) -> AnsatzParams {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..l * n).map(|_| rng.random_range(0.0..6.3)).collect();
        let phi = (0..l * n).map(|_| rng.random_range(0.0..6.3)).collect();
        AnsatzParams::new(l, n, theta, phi).unwrap()
    }

    fn reals(s: &StateVector) -> Vec<f64> {
        s.amplitudes().iter().map(|a| a.re).collect()
    }

    #[test]
    fn cyclic_pad_examples() {
        assert_eq!(cyclic_pad(&[1., 2., 3.], 4).unwrap(), vec![1., 2., 3., 1.]);
        assert_eq!(cyclic_pad(&[5.], 4).unwrap(), vec![5.; 4]);
        assert_eq!(cyclic_pad(&[1., 2., 3., 4.], 4).unwrap(), vec![1., 2., 3., 4.]);
        assert!(cyclic_pad(&[], 4).is_err());
        assert!(cyclic_pad(&[1., 2., 3.], 2).is_err());
    }

    #[test]
    fn amplitude_encoding_examples() {
        let s = encode_amplitude(&[1., 2., 3.], 2).unwrap();
        let r = 15f64.sqrt();
        for (a, e) in reals(&s).iter().zip([1. / r, 2. / r, 3. / r, 1. / r]) {
            assert!((a - e).abs() < 1e-15);
        }
        assert!(s.amplitudes().iter().all(|a| a.im == 0.0));
        assert_eq!(reals(&encode_amplitude(&[1., 0., 0., 0.], 2).unwrap()), vec![1., 0., 0., 0.]);
        let h = encode_amplitude(&[1., 1.], 1).unwrap();
        for a in reals(&h) {
            assert!((a - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert!(matches!(encode_amplitude(&[0., 0.], 1), Err(Error::Encoding(_))));
    }

    #[test]
    fn coherent_vacuum_and_alpha_one() {
        let vac = encode_coherent(0.0, 0.7, 4).unwrap();
        assert_eq!(reals(&vac), vec![1., 0., 0., 0.]);

        // α = 1: terms 1, 1, 1/√2, 1/√6 evaluated from the series definition.
        let c = 0.9;
        let s = encode_coherent(std::f64::consts::SQRT_2 * c, c, 4).unwrap();
        let raw = [1.0, 1.0, 1.0 / 2f64.sqrt(), 1.0 / 6f64.sqrt()];
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, e) in reals(&s).iter().zip(raw) {
            assert!((a - e / norm).abs() < 1e-15);
        }
    }

    #[test]
    fn coherent_errors_and_saturation() {
        assert!(encode_coherent(0.5, 0.0, 4).is_err());
        assert!(encode_coherent(0.5, -1.0, 4).is_err());
        assert!(encode_coherent(0.5, 1.0, 3).is_err());
        assert!(coherent_saturated(10.0, 1.0, 4));
        assert!(!coherent_saturated(1.0, 1.0, 4));
        // saturated states still come back normalized
        let s = encode_coherent(40.0, 1.0, 4).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_overlap_approaches_gaussian() {
        let c = 1.0;
        for (x, y) in [(0.0, 1.0), (0.3, 0.9), (1.0, 1.0), (0.2, 0.0)] {
            let a = encode_coherent(x, c, 64).unwrap();
            let b = encode_coherent(y, c, 64).unwrap();
            let k = a.overlap(&b).unwrap().norm_sqr();
            let exact = (-(x - y) * (x - y) / (2.0 * c * c)).exp();
            assert!((k - exact).abs() < 1e-6, "{x} {y}: {k} vs {exact}");
        }
    }

    #[test]
    fn zero_params_apply_only_the_cnot_chain() {
        let params = AnsatzParams::zeros(1, 2).unwrap();
        let input = encode_amplitude(&[0.1, 0.2, 0.3, 0.4], 2).unwrap();
        let out =
            apply_ansatz(&input, &params, Scaling::new(3.0).unwrap(), 0.7, Entangler::Ring, false)
                .unwrap();
        let expected = input.apply_cnot(0, 1).unwrap().apply_cnot(1, 0).unwrap();
        for (a, b) in out.amplitudes().iter().zip(expected.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn gate_order_within_a_layer() {
        // Ry(θ) then Rz(s φ x) then CNOT(0→1), CNOT(1→0), checked gate-by-gate.
        let params = AnsatzParams::new(1, 2, vec![0.3, 1.1], vec![0.5, -0.7]).unwrap();
        let s = Scaling::new(0.8).unwrap();
        let x = 1.3;
        let start = StateVector::zero_state(2).unwrap();
        let manual = start
            .apply_ry(0, 0.3)
            .and_then(|v| v.apply_ry(1, 1.1))
            .and_then(|v| v.apply_rz(0, 0.8 * 0.5 * x))
            .and_then(|v| v.apply_rz(1, 0.8 * -0.7 * x))
            .and_then(|v| v.apply_cnot(0, 1))
            .and_then(|v| v.apply_cnot(1, 0))
            .unwrap();
        let out = apply_ansatz(&start, &params, s, x, Entangler::Ring, false).unwrap();
        assert_eq!(out, manual);
    }

    #[test]
    fn ansatz_adjoint_inverts() {
        let params = random_params(3, 3, 7);
        let s = Scaling::new(0.4).unwrap();
        let input = encode_amplitude(&[0.3, 0.1, 0.9, 0.2, 0.5], 3).unwrap();
        for ent in [Entangler::Ring, Entangler::DenseRing] {
            let fwd = apply_ansatz(&input, &params, s, 0.6, ent, false).unwrap();
            let back = apply_ansatz(&fwd, &params, s, 0.6, ent, true).unwrap();
            for (a, b) in back.amplitudes().iter().zip(input.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ansatz_qubit_mismatch() {
        let params = AnsatzParams::zeros(1, 3).unwrap();
        let s = StateVector::zero_state(2).unwrap();
        assert!(matches!(
            apply_ansatz(&s, &params, Scaling::new(1.0).unwrap(), 0.0, Entangler::Ring, false),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn feature_state_shapes() {
        let params = AnsatzParams::zeros(2, 2).unwrap();
        let s = Scaling::new(0.1).unwrap();
        let qrbf = EncoderSpec::qrbf_default(1.0).unwrap();
        match feature_state(&[0.1, 0.2, 0.3], &qrbf, &params, s).unwrap() {
            FeatureState::PerFeature(v) => assert_eq!(v.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(qamp_reupload_value(&[1., 1., 1., 1.]), 1.0);

        let qamp = EncoderSpec::qamp(2).unwrap();
        let fs = feature_state(&[0.1, 0.2, 0.3], &qamp, &params, s).unwrap();
        let expected = {
            let mut e = encode_amplitude(&[0.1, 0.2, 0.3], 2).unwrap();
            for _ in 0..2 {
                e = e.apply_cnot(0, 1).unwrap().apply_cnot(1, 0).unwrap();
            }
            e
        };
        assert_eq!(fs.states()[0], expected);
    }

    #[test]
    fn zero_vector_gets_epsilon_fill() {
        let params = AnsatzParams::zeros(1, 1).unwrap();
        let spec = EncoderSpec::qamp(1).unwrap();
        let fs = feature_state(&[0.0, 0.0], &spec, &params, Scaling::new(1.0).unwrap()).unwrap();
        assert!((fs.states()[0].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qamp_rejects_oversized_input() {
        let params = AnsatzParams::zeros(1, 1).unwrap();
        let spec = EncoderSpec::qamp(1).unwrap();
        assert!(feature_state(&[1., 2., 3.], &spec, &params, Scaling::new(1.0).unwrap()).is_err());
    }

    #[test]
    fn resource_formulas() {
        let qamp5 = EncoderSpec::qamp(5).unwrap();
        let rc = resource_count(&qamp5, 5).unwrap();
        assert_eq!((rc.cnots, rc.single_qubit_gates, rc.depth), (25, 50, 35));
        assert_eq!(rc.full_circuit_depth, 70);

        let rc = resource_count(&EncoderSpec::qamp(2).unwrap(), 1).unwrap();
        assert_eq!((rc.cnots, rc.single_qubit_gates, rc.depth), (2, 4, 4));

        let dense = EncoderSpec {
            kind: EncoderKind::Qrbf { length_scale: 1.0 },
            n_qubits: 4,
            extension: Extension::DenseEntangle(2),
        };
        assert_eq!(resource_count(&dense, 5).unwrap().cnots, 40);
    }

    #[test]
    fn dense_entangler_order() {
        assert_eq!(
            Entangler::DenseRing.pairs(4),
            vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 0), (3, 0), (3, 1)]
        );
        assert_eq!(Entangler::Ring.pairs(1), vec![]);
        assert_eq!(Entangler::Ring.pairs(2), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn extension_examples() {
        let qrbf = EncoderSpec::qrbf_default(1.0).unwrap();
        let ext = extended_variant(&qrbf, 1).unwrap();
        assert_eq!(ext.n_qubits, 3);
        assert_eq!(ext.entangler(), Entangler::DenseRing);

        let qamp = EncoderSpec::qamp(7).unwrap();
        let ext = extended_variant(&qamp, 1).unwrap();
        assert_eq!(ext.n_qubits, 8);
        assert_eq!(ext.hilbert_dim(), 256);
        assert_eq!(ext.entangler(), Entangler::Ring);

        assert_eq!(extended_variant(&qamp, 0).unwrap(), qamp);

        let bad = EncoderSpec {
            kind: EncoderKind::Qamp,
            n_qubits: 2,
            extension: Extension::DenseEntangle(1),
        };
        assert!(extended_variant(&bad, 1).is_err());
    }

    #[test]
    fn params_flat_roundtrip_and_count() {
        let p = random_params(5, 3, 1);
        assert_eq!(p.len(), 30);
        assert_eq!(p.refs().count(), 30);
        let q = AnsatzParams::from_flat(5, 3, &p.to_flat()).unwrap();
        assert_eq!(p, q);
        for (r, v) in p.refs().zip(p.to_flat()) {
            assert_eq!(p.get(r), v);
        }
        assert!(AnsatzParams::new(2, 2, vec![0.0; 3], vec![0.0; 4]).is_err());
    }

    proptest! {
        #[test]
        fn feature_states_are_normalized(
            x in proptest::collection::vec(0.0f64..1.0, 1..6),
            seed in 0u64..1000,
            s in 0.0f64..2.0,
        ) {
            let params = random_params(2, 3, seed);
            let s = Scaling::new(s).unwrap();
            let qamp = EncoderSpec::qamp(3).unwrap();
            for st in feature_state(&x, &qamp, &params, s).unwrap().states() {
                prop_assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
            }
            let qrbf = EncoderSpec::qrbf(0.7, 3).unwrap();
            for st in feature_state(&x, &qrbf, &params, s).unwrap().states() {
                prop_assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }
}
