use std::collections::BTreeMap;

use crate::encode::PauliTerm;
use crate::error::SimError;
use crate::qsim::{adjoint_gradient, param_shift_gradient, AnsatzSpec, GradientEstimate, GradientMode, PreparedHamiltonian};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseWeights<T: Real> {
    pub weights: Vec<T>,
    pub beta: T,
}

/// `w_i = 1 / (1 + beta * Var_i)`.
pub fn noise_weights<T: Real>(variances: &[T], beta: T) -> NoiseWeights<T> {
    let weights = variances.iter().map(|&v| T::one() / (T::one() + beta * v.max(T::zero()))).collect();
    NoiseWeights { weights, beta }
}

/// Last measured estimator variance per Pauli support, so weights survive a Hamiltonian rebuild.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermVarianceTracker<T: Real> {
    by_mask: BTreeMap<usize, T>,
}

impl<T: Real> TermVarianceTracker<T> {
    pub fn update(&mut self, terms: &[PauliTerm<T>], variances: &[T]) {
        for (t, &v) in terms.iter().zip(variances) {
            self.by_mask.insert(t.mask(), v);
        }
    }

    /// Variances aligned with `terms`; unseen terms count as noiseless.
    pub fn variances_for(&self, terms: &[PauliTerm<T>]) -> Vec<T> {
        terms.iter().map(|t| self.by_mask.get(&t.mask()).copied().unwrap_or(T::zero())).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.by_mask.is_empty()
    }
}

/// `J_eff = sum_i w_i h_i <P_i> + lambda <R_phys>` as one diagonal operator.
#[derive(Debug, Clone)]
pub struct EffectiveObjective<T: Real> {
    pub hamiltonian: PreparedHamiltonian<T>,
    pub physics: Option<PreparedHamiltonian<T>>,
    pub weights: NoiseWeights<T>,
    pub lambda: T,
    /// Weighted operator; its term list is the cost terms followed by the physics terms.
    pub combined: PreparedHamiltonian<T>,
    /// Unweighted coefficient of every term of `combined`.
    pub base_coeffs: Vec<T>,
}

impl<T: Real> EffectiveObjective<T> {
    pub fn new(
        hamiltonian: PreparedHamiltonian<T>,
        physics: Option<PreparedHamiltonian<T>>,
        weights: NoiseWeights<T>,
        lambda: T,
    ) -> Result<Self, SimError> {
        assert_eq!(weights.weights.len(), hamiltonian.terms.len(), "one weight per Hamiltonian term");
        let mut terms: Vec<PauliTerm<T>> = hamiltonian
            .terms
            .iter()
            .zip(&weights.weights)
            .map(|(t, &w)| PauliTerm { support: t.support.clone(), coeff: w * t.coeff })
            .collect();
        let mut base_coeffs: Vec<T> = hamiltonian.terms.iter().map(|t| t.coeff).collect();
        let mut constant = hamiltonian.constant;
        if let Some(ph) = physics.as_ref().filter(|_| lambda != T::zero()) {
            if ph.num_qubits != hamiltonian.num_qubits {
                return Err(SimError::Dimension { state: hamiltonian.num_qubits, operator: ph.num_qubits });
            }
            constant += lambda * ph.constant;
            for t in &ph.terms {
                terms.push(PauliTerm { support: t.support.clone(), coeff: lambda * t.coeff });
                base_coeffs.push(lambda * t.coeff);
            }
        }
        let combined = PreparedHamiltonian::from_terms(hamiltonian.num_qubits, constant, terms)?;
        Ok(Self { hamiltonian, physics, weights, lambda, combined, base_coeffs })
    }

    /// Unweighted objective with no physics term.
    pub fn plain(hamiltonian: PreparedHamiltonian<T>) -> Result<Self, SimError> {
        let n = hamiltonian.terms.len();
        Self::new(hamiltonian, None, NoiseWeights { weights: vec![T::one(); n], beta: T::zero() }, T::zero())
    }

    pub fn num_qubits(&self) -> usize {
        self.combined.num_qubits
    }

    /// `L_eff = sum_i |w_i h_i| + lambda sum_j |r_j|`.
    pub fn lipschitz_bound(&self) -> T {
        self.combined.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// Certified lower bound on `J_eff`: the table minimum up to `exact_max_qubits`,
    /// else `constant - sum |coeffs|`.
    pub fn lower_bound(&self, exact_max_qubits: usize) -> (T, bool) {
        if self.num_qubits() <= exact_max_qubits {
            (self.combined.energies.iter().cloned().fold(T::infinity(), T::min), true)
        } else {
            (self.combined.constant - self.lipschitz_bound(), false)
        }
    }
}

pub fn lipschitz_bound<T: Real>(terms: &[PauliTerm<T>], weights: &[T], lambda: T, physics: &[PauliTerm<T>]) -> T {
    let main: T = terms.iter().zip(weights).map(|(t, &w)| (w * t.coeff).abs()).sum();
    let phys: T = physics.iter().map(|t| t.coeff.abs()).sum();
    main + lambda * phys
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGradient<T: Real> {
    pub estimate: GradientEstimate<T>,
    /// `sum_k Var[g_k]` of the unweighted objective on the same shots.
    pub sigma2: Option<T>,
    /// `sum_k Var[g_k]` of the weighted objective.
    pub sigma2_eff: Option<T>,
}

impl<T: Real> EffectiveGradient<T> {
    pub fn norm_sq(&self) -> T {
        self.estimate.gradient.iter().map(|g| *g * *g).sum()
    }
}

/// Gradient of `J_eff`. Exact mode uses the adjoint sweep; shots mode uses the
/// parameter-shift rule with per-term variance bookkeeping.
pub fn effective_gradient<T: Real>(
    ansatz: &AnsatzSpec,
    theta: &[T],
    objective: &EffectiveObjective<T>,
    mode: GradientMode,
) -> Result<EffectiveGradient<T>, SimError> {
    match mode {
        GradientMode::Exact => {
            let gradient = adjoint_gradient(ansatz, theta, &objective.combined)?;
            Ok(EffectiveGradient {
                estimate: GradientEstimate { gradient, variance: None, term_variance_sums: None, term_variances: None, shots_used: 0 },
                sigma2: None,
                sigma2_eff: None,
            })
        }
        GradientMode::Shots { .. } => {
            let estimate = param_shift_gradient(ansatz, theta, &objective.combined, mode)?;
            let sums = estimate.term_variance_sums.as_ref().expect("shots mode reports term variances");
            let quarter = T::of(0.25);
            let base_sq: Vec<T> = objective.base_coeffs.iter().map(|&c| c * c).collect();
            let eff_sq: Vec<T> = objective.combined.terms.iter().map(|t| t.coeff * t.coeff).collect();
            let (mut s, mut s_eff) = (T::zero(), T::zero());
            for per_term in sums {
                for ((v, b), e) in per_term.iter().zip(&base_sq).zip(&eff_sq) {
                    s += quarter * *b * *v;
                    s_eff += quarter * *e * *v;
                }
            }
            Ok(EffectiveGradient { estimate, sigma2: Some(s), sigma2_eff: Some(s_eff) })
        }
    }
}

/// `eta = min(1/L, sqrt((J0 - J*) / (L sigma^2 K)))`.
pub fn auto_stepsize<T: Real>(lipschitz: T, j0: T, j_star: T, sigma2: T, k: usize) -> T {
    assert!(lipschitz > T::zero(), "Lipschitz bound must be positive");
    let first = T::one() / lipschitz;
    if sigma2 <= T::zero() {
        return first;
    }
    let gap = (j0 - j_star).max(T::zero());
    let second = (gap / (lipschitz * sigma2 * T::of_usize(k.max(1)))).sqrt();
    first.min(second)
}

/// `theta' = clamp(theta - eta g, lo, hi)`.
pub fn psgd_step<T: Real>(theta: &[T], gradient: &[T], eta: T, bounds: (T, T)) -> Vec<T> {
    theta.iter().zip(gradient).map(|(&t, &g)| (t - eta * g).max(bounds.0).min(bounds.1)).collect()
}

/// `lambda_risk * sum_s p_s (c_s - c_bar)^2` with probabilities renormalized.
pub fn scenario_risk(costs: &[f64], probabilities: &[f64], lambda_risk: f64) -> f64 {
    assert_eq!(costs.len(), probabilities.len(), "one probability per scenario cost");
    assert!(!costs.is_empty(), "at least one scenario");
    let total: f64 = probabilities.iter().sum();
    let mean: f64 = costs.iter().zip(probabilities).map(|(c, p)| c * p).sum::<f64>() / total;
    lambda_risk * costs.iter().zip(probabilities).map(|(c, p)| p * (c - mean).powi(2)).sum::<f64>() / total
}
