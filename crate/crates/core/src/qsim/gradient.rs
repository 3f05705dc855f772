use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ansatz::AnsatzSpec;
use super::measure::{estimate_expectation, expectation, sample, PreparedHamiltonian, ShotEstimate};
use super::state::{build_state, check_theta, gate_list, Gate, StateVector};
use crate::error::SimError;
use crate::scalar::Real;

/// How expectation values inside a gradient are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum GradientMode {
    Exact,
    Shots { shots: u64, seed: u64 },
}

/// Independent stream seed derived from `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate<T: Real> {
    pub gradient: Vec<T>,
    /// Estimator variance per component (shots mode only).
    pub variance: Option<Vec<T>>,
    /// Per component, `Var+[P_i] + Var-[P_i]` for every Hamiltonian term (shots mode only).
    pub term_variance_sums: Option<Vec<Vec<T>>>,
    /// Mean per-term estimator variance over all evaluations (shots mode only).
    pub term_variances: Option<Vec<T>>,
    pub shots_used: u64,
}

fn shifted<T: Real>(theta: &[T], k: usize, delta: T) -> Vec<T> {
    let mut t = theta.to_vec();
    t[k] += delta;
    t
}

fn shot_eval<T: Real>(
    ansatz: &AnsatzSpec,
    theta: &[T],
    h: &PreparedHamiltonian<T>,
    shots: u64,
    seed: u64,
) -> Result<ShotEstimate<T>, SimError> {
    let psi = build_state(ansatz, theta)?;
    Ok(estimate_expectation(&sample(&psi, shots, seed)?, h))
}

/// `dJ/dtheta_k = (J(theta_k + pi/2) - J(theta_k - pi/2)) / 2` for every parameter.
///
/// Shots mode draws the two evaluations of parameter `k` from streams
/// `2k` and `2k + 1` of `seed`, so every evaluation is independent.
pub fn param_shift_gradient<T: Real>(
    ansatz: &AnsatzSpec,
    theta: &[T],
    h: &PreparedHamiltonian<T>,
    mode: GradientMode,
) -> Result<GradientEstimate<T>, SimError> {
    check_theta(ansatz, theta)?;
    let p = ansatz.num_params();
    let shift = T::FRAC_PI_2();
    let half = T::of(0.5);
    match mode {
        GradientMode::Exact => {
            let gradient = (0..p)
                .into_par_iter()
                .map(|k| {
                    let plus = expectation(&build_state(ansatz, &shifted(theta, k, shift))?, h)?;
                    let minus = expectation(&build_state(ansatz, &shifted(theta, k, -shift))?, h)?;
                    Ok(half * (plus - minus))
                })
                .collect::<Result<Vec<T>, SimError>>()?;
            Ok(GradientEstimate { gradient, variance: None, term_variance_sums: None, term_variances: None, shots_used: 0 })
        }
        GradientMode::Shots { shots, seed } => {
            if shots == 0 {
                return Err(SimError::ZeroShots);
            }
            let pairs = (0..p)
                .into_par_iter()
                .map(|k| {
                    let plus = shot_eval(ansatz, &shifted(theta, k, shift), h, shots, derive_seed(seed, 2 * k as u64))?;
                    let minus = shot_eval(ansatz, &shifted(theta, k, -shift), h, shots, derive_seed(seed, 2 * k as u64 + 1))?;
                    Ok((plus, minus))
                })
                .collect::<Result<Vec<_>, SimError>>()?;
            let quarter = T::of(0.25);
            let nterms = h.terms.len();
            let mut mean_term_var = vec![T::zero(); nterms];
            let mut gradient = Vec::with_capacity(p);
            let mut variance = Vec::with_capacity(p);
            let mut sums = Vec::with_capacity(p);
            for (plus, minus) in &pairs {
                gradient.push(half * (plus.mean - minus.mean));
                variance.push(quarter * (plus.variance + minus.variance));
                let s: Vec<T> = plus.term_variances.iter().zip(&minus.term_variances).map(|(a, b)| *a + *b).collect();
                for (acc, v) in mean_term_var.iter_mut().zip(&s) {
                    *acc += *v;
                }
                sums.push(s);
            }
            let evals = T::of((2 * p).max(1) as f64);
            mean_term_var.iter_mut().for_each(|v| *v /= evals);
            Ok(GradientEstimate {
                gradient,
                variance: Some(variance),
                term_variance_sums: Some(sums),
                term_variances: Some(mean_term_var),
                shots_used: 2 * p as u64 * shots,
            })
        }
    }
}

fn apply_gate<T: Real>(psi: &mut StateVector<T>, gate: Gate, theta: T) {
    match gate {
        Gate::Ry(q) => psi.apply_ry(q, theta),
        Gate::Rzz(a, b) => psi.apply_rzz(a, b, theta),
    }
}

/// `Im <lambda| G |phi>` where `G` is the generator (Y or ZZ) of `gate`.
fn generator_overlap<T: Real>(lambda: &StateVector<T>, phi: &StateVector<T>, gate: Gate) -> T {
    match gate {
        Gate::Ry(q) => {
            // Y|0> = i|1>, Y|1> = -i|0>
            let stride = 1usize << q;
            let mut acc = Complex::new(T::zero(), T::zero());
            for (lb, pb) in lambda.amplitudes.chunks_exact(2 * stride).zip(phi.amplitudes.chunks_exact(2 * stride)) {
                for j in 0..stride {
                    let (l0, l1) = (lb[j], lb[j + stride]);
                    let (p0, p1) = (pb[j], pb[j + stride]);
                    acc = acc + (l1.conj() * p0 - l0.conj() * p1);
                }
            }
            // the sum above is <lambda|Y|phi> / i
            acc.re
        }
        Gate::Rzz(a, b) => {
            let mut acc = T::zero();
            for (i, (l, p)) in lambda.amplitudes.iter().zip(&phi.amplitudes).enumerate() {
                let v = (l.conj() * p).im;
                if ((i >> a) ^ (i >> b)) & 1 == 0 {
                    acc += v;
                } else {
                    acc -= v;
                }
            }
            acc
        }
    }
}

/// Exact gradient by reverse-mode (adjoint) differentiation: one forward and
/// one backward sweep. Equal to the exact parameter-shift gradient.
pub fn adjoint_gradient<T: Real>(ansatz: &AnsatzSpec, theta: &[T], h: &PreparedHamiltonian<T>) -> Result<Vec<T>, SimError> {
    check_theta(ansatz, theta)?;
    let mut phi = build_state(ansatz, theta)?;
    if phi.num_qubits != h.num_qubits {
        return Err(SimError::Dimension { state: phi.num_qubits, operator: h.num_qubits });
    }
    let mut lambda = phi.clone();
    for (a, &e) in lambda.amplitudes.iter_mut().zip(&h.energies) {
        *a = *a * e;
    }
    let gates = gate_list(ansatz);
    let mut grad = vec![T::zero(); gates.len()];
    for k in (0..gates.len()).rev() {
        grad[k] = generator_overlap(&lambda, &phi, gates[k]);
        apply_gate(&mut phi, gates[k], -theta[k]);
        apply_gate(&mut lambda, gates[k], -theta[k]);
    }
    Ok(grad)
}

/// Exact gradient via the adjoint sweep, reported in the shared estimate type.
pub fn exact_gradient<T: Real>(ansatz: &AnsatzSpec, theta: &[T], h: &PreparedHamiltonian<T>) -> Result<GradientEstimate<T>, SimError> {
    Ok(GradientEstimate {
        gradient: adjoint_gradient(ansatz, theta, h)?,
        variance: None,
        term_variance_sums: None,
        term_variances: None,
        shots_used: 0,
    })
}

/// Exact derivative with respect to one parameter by the shift rule.
pub fn param_shift_component<T: Real>(ansatz: &AnsatzSpec, theta: &[T], h: &PreparedHamiltonian<T>, k: usize) -> Result<T, SimError> {
    check_theta(ansatz, theta)?;
    let shift = T::FRAC_PI_2();
    let plus = expectation(&build_state(ansatz, &shifted(theta, k, shift))?, h)?;
    let minus = expectation(&build_state(ansatz, &shifted(theta, k, -shift))?, h)?;
    Ok(T::of(0.5) * (plus - minus))
}
