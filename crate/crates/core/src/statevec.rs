//! Dense statevector simulator.
//!
//! Amplitudes are stored as `2^n` complex doubles. Qubit 0 is the most
//! significant bit of the basis-state label, so on two qubits `|10⟩` is
//! index 2 and means qubit 0 is set.
//!
//! Gate methods take `&self` and return a new state. The `*_in_place`
//! variants are crate-internal and used by the ansatz to avoid copies.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the simulator will allocate (16M amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_size(n_qubits: usize) -> Result<()> {
    if n_qubits < 1 {
        return Err(Error::Size("a state needs at least one qubit".into()));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::Size(format!(
            "{n_qubits} qubits exceeds the memory cap of {MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// The reference state `|0…0⟩`.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Arbitrary state preparation: the input is renormalized to unit norm.
    pub fn prepare(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Size(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_size(n_qubits)?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Encoding("non-finite amplitude".into()));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Encoding("cannot normalize an all-zero vector".into()));
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(Self { n_qubits, amps })
    }

    /// Real-valued convenience wrapper around [`StateVector::prepare`].
    pub fn prepare_real(amps: &[f64]) -> Result<Self> {
        Self::prepare(amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Bit mask of `qubit` within a basis label.
    fn mask(&self, qubit: usize) -> Result<usize> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(1 << (self.n_qubits - 1 - qubit))
    }

    pub fn apply_ry(&self, qubit: usize, theta: f64) -> Result<Self> {
        let mut out = self.clone();
        out.ry_in_place(qubit, theta)?;
        Ok(out)
    }

    pub fn apply_rz(&self, qubit: usize, phi: f64) -> Result<Self> {
        let mut out = self.clone();
        out.rz_in_place(qubit, phi)?;
        Ok(out)
    }

    pub fn apply_cnot(&self, control: usize, target: usize) -> Result<Self> {
        let mut out = self.clone();
        out.cnot_in_place(control, target)?;
        Ok(out)
    }

    pub(crate) fn ry_in_place(&mut self, qubit: usize, theta: f64) -> Result<()> {
        let mask = self.mask(qubit)?;
        let (s, c) = (theta / 2.0).sin_cos();
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let a0 = self.amps[i];
                let a1 = self.amps[j];
                self.amps[i] = a0 * c - a1 * s;
                self.amps[j] = a0 * s + a1 * c;
            }
        }
        Ok(())
    }

    pub(crate) fn rz_in_place(&mut self, qubit: usize, phi: f64) -> Result<()> {
        let mask = self.mask(qubit)?;
        let (s, c) = (phi / 2.0).sin_cos();
        let lower = Complex64::new(c, -s);
        let upper = Complex64::new(c, s);
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & mask == 0 { lower } else { upper };
        }
        Ok(())
    }

    pub(crate) fn cnot_in_place(&mut self, control: usize, target: usize) -> Result<()> {
        let cmask = self.mask(control)?;
        let tmask = self.mask(target)?;
        if control == target {
            return Err(Error::InvalidParameter(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// Inner product `⟨self|other⟩`.
    pub fn overlap(&self, other: &StateVector) -> Result<Complex64> {
        if self.amps.len() != other.amps.len() {
            return Err(Error::Dimension {
                expected: self.amps.len(),
                got: other.amps.len(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}
