use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::state::{check_qubits, StateVector};
use crate::encode::{IsingHamiltonian, PauliTerm};
use crate::error::SimError;
use crate::scalar::Real;

/// A diagonal Hamiltonian with its energy table and term list precomputed.
#[derive(Debug, Clone)]
pub struct PreparedHamiltonian<T: Real> {
    pub num_qubits: usize,
    pub constant: T,
    pub terms: Vec<PauliTerm<T>>,
    pub energies: Vec<T>,
}

impl<T: Real> PreparedHamiltonian<T> {
    pub fn new(h: &IsingHamiltonian<T>) -> Result<Self, SimError> {
        check_qubits(h.num_qubits())?;
        Ok(Self { num_qubits: h.num_qubits(), constant: h.constant, terms: h.terms(), energies: h.energy_table() })
    }

    pub fn from_terms(n: usize, constant: T, terms: Vec<PauliTerm<T>>) -> Result<Self, SimError> {
        let h = IsingHamiltonian::from_terms(n, constant, &terms);
        check_qubits(n)?;
        Ok(Self { num_qubits: n, constant, terms, energies: h.energy_table() })
    }

    /// Same terms with coefficients replaced.
    pub fn with_coefficients(&self, coeffs: &[T]) -> Result<Self, SimError> {
        assert_eq!(coeffs.len(), self.terms.len(), "one coefficient per term");
        let terms = self
            .terms
            .iter()
            .zip(coeffs)
            .map(|(t, &c)| PauliTerm { support: t.support.clone(), coeff: c })
            .collect();
        Self::from_terms(self.num_qubits, self.constant, terms)
    }

    pub fn energy(&self, index: usize) -> T {
        self.energies[index]
    }
}

fn check_dims<T: Real>(state: &StateVector<T>, n: usize) -> Result<(), SimError> {
    if state.num_qubits != n {
        return Err(SimError::Dimension { state: state.num_qubits, operator: n });
    }
    Ok(())
}

/// `<psi|H|psi>` through the energy table.
pub fn expectation<T: Real>(state: &StateVector<T>, h: &PreparedHamiltonian<T>) -> Result<T, SimError> {
    check_dims(state, h.num_qubits)?;
    Ok(state.amplitudes.iter().zip(&h.energies).map(|(a, &e)| a.norm_sqr() * e).sum())
}

/// `<psi|H|psi>` for a Hamiltonian that has not been prepared.
pub fn exact_expectation<T: Real>(state: &StateVector<T>, h: &IsingHamiltonian<T>) -> Result<T, SimError> {
    check_dims(state, h.num_qubits())?;
    expectation(state, &PreparedHamiltonian::new(h)?)
}

/// Measurement counts keyed by basis index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotResult {
    pub num_qubits: usize,
    pub counts: BTreeMap<usize, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl ShotResult {
    /// Outcome label with character `i` holding qubit `i`.
    pub fn label(&self, index: usize) -> String {
        (0..self.num_qubits).map(|i| if (index >> i) & 1 == 1 { '1' } else { '0' }).collect()
    }

    pub fn labelled_counts(&self) -> BTreeMap<String, u64> {
        self.counts.iter().map(|(&i, &c)| (self.label(i), c)).collect()
    }
}

/// `shots` i.i.d. computational-basis measurements.
pub fn sample<T: Real>(state: &StateVector<T>, shots: u64, seed: u64) -> Result<ShotResult, SimError> {
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    let mut cdf = Vec::with_capacity(state.dim());
    let mut acc = 0.0f64;
    for a in &state.amplitudes {
        acc += a.norm_sqr().to_f64_lossy();
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        *counts.entry(idx).or_insert(0) += 1;
    }
    Ok(ShotResult { num_qubits: state.num_qubits, counts, shots, seed })
}

/// Sample statistics of a diagonal Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotEstimate<T: Real> {
    pub mean: T,
    /// Estimator variance of `mean`: sample variance of the energy over `S`.
    pub variance: T,
    pub term_means: Vec<T>,
    /// `(1 - m_i^2) / S` per term.
    pub term_variances: Vec<T>,
}

pub fn estimate_expectation<T: Real>(result: &ShotResult, h: &PreparedHamiltonian<T>) -> ShotEstimate<T> {
    assert_eq!(result.num_qubits, h.num_qubits, "shot register does not match Hamiltonian");
    let s = T::of(result.shots as f64);
    let mut mean = T::zero();
    let mut term_sums = vec![T::zero(); h.terms.len()];
    for (&idx, &count) in &result.counts {
        let c = T::of(count as f64);
        let e = h.energy(idx);
        mean += c * e;
        for (acc, term) in term_sums.iter_mut().zip(&h.terms) {
            *acc += c * term.eigenvalue(idx);
        }
    }
    mean /= s;
    let sample_var = if result.shots > 1 {
        let ss: T = result.counts.iter().map(|(&i, &c)| T::of(c as f64) * (h.energy(i) - mean).powi(2)).sum();
        ss / (s - T::one())
    } else {
        T::zero()
    };
    let term_means: Vec<T> = term_sums.into_iter().map(|m| m / s).collect();
    let term_variances = term_means.iter().map(|&m| ((T::one() - m * m) / s).max(T::zero())).collect();
    ShotEstimate { mean, variance: sample_var / s, term_means, term_variances }
}
