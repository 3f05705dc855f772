use num_complex::Complex;

use super::ansatz::AnsatzSpec;
use crate::error::SimError;
use crate::scalar::Real;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 24;

/// Pure state on `N` qubits; qubit `i` is bit `i` of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    pub num_qubits: usize,
    pub amplitudes: Vec<Complex<T>>,
}

pub fn check_qubits(n: usize) -> Result<(), SimError> {
    if n > MAX_QUBITS {
        Err(SimError::TooManyQubits { requested: n, cap: MAX_QUBITS })
    } else {
        Ok(())
    }
}

impl<T: Real> StateVector<T> {
    pub fn zero_state(n: usize) -> Result<Self, SimError> {
        check_qubits(n)?;
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << n];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Ok(Self { num_qubits: n, amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `exp(-i theta Y / 2)` on qubit `q`.
    pub fn apply_ry(&mut self, q: usize, theta: T) {
        let half = theta * T::of(0.5);
        let (s, c) = half.sin_cos();
        let stride = 1usize << q;
        for block in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a0, *a1);
                *a0 = x * c - y * s;
                *a1 = x * s + y * c;
            }
        }
    }

    /// `exp(-i theta Z_a Z_b / 2)`.
    pub fn apply_rzz(&mut self, a: usize, b: usize, theta: T) {
        let half = theta * T::of(0.5);
        let (s, c) = half.sin_cos();
        let even = Complex::new(c, -s);
        let odd = Complex::new(c, s);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            let parity = ((i >> a) ^ (i >> b)) & 1;
            *amp = *amp * if parity == 0 { even } else { odd };
        }
    }

    /// A full entangling layer as one diagonal pass.
    pub fn apply_rzz_layer(&mut self, edges: &[(usize, usize)], thetas: &[T]) {
        if edges.is_empty() {
            return;
        }
        let halves: Vec<T> = thetas.iter().map(|&t| t * T::of(0.5)).collect();
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            let mut phase = T::zero();
            for (&(a, b), &h) in edges.iter().zip(&halves) {
                if ((i >> a) ^ (i >> b)) & 1 == 0 {
                    phase -= h;
                } else {
                    phase += h;
                }
            }
            let (s, c) = phase.sin_cos();
            *amp = *amp * Complex::new(c, s);
        }
    }

    /// `<self| other>`.
    pub fn inner(&self, other: &StateVector<T>) -> Complex<T> {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

fn check_params<T: Real>(ansatz: &AnsatzSpec, theta: &[T]) -> Result<(), SimError> {
    if theta.len() != ansatz.num_params() {
        return Err(SimError::ParamLength { expected: ansatz.num_params(), found: theta.len() });
    }
    Ok(())
}

/// Prepares `U(theta)|0...0>`.
pub fn build_state<T: Real>(ansatz: &AnsatzSpec, theta: &[T]) -> Result<StateVector<T>, SimError> {
    check_params(ansatz, theta)?;
    let mut psi = StateVector::zero_state(ansatz.num_qubits)?;
    let n = ansatz.num_qubits;
    for layer in theta.chunks_exact(ansatz.layer_size().max(1)).take(ansatz.depth) {
        for (q, &t) in layer[..n].iter().enumerate() {
            psi.apply_ry(q, t);
        }
        psi.apply_rzz_layer(&ansatz.entangler_edges, &layer[n..]);
    }
    Ok(psi)
}

/// One gate of the flattened circuit, in parameter order.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Gate {
    Ry(usize),
    Rzz(usize, usize),
}

pub(crate) fn gate_list(ansatz: &AnsatzSpec) -> Vec<Gate> {
    let mut gates = Vec::with_capacity(ansatz.num_params());
    for _ in 0..ansatz.depth {
        gates.extend((0..ansatz.num_qubits).map(Gate::Ry));
        gates.extend(ansatz.entangler_edges.iter().map(|&(a, b)| Gate::Rzz(a, b)));
    }
    gates
}

pub(crate) fn check_theta<T: Real>(ansatz: &AnsatzSpec, theta: &[T]) -> Result<(), SimError> {
    check_params(ansatz, theta)
}
