use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::feasible::{ConstraintResiduals, FeasibleSet, ProjectionConfig};
use super::objective::{auto_stepsize, effective_gradient, noise_weights, psgd_step, scenario_risk, EffectiveObjective, TermVarianceTracker};
use crate::encode::{
    assemble_hamiltonian, assemble_physics_hamiltonian, build_encoding, index_to_bits, Encoding, IsingHamiltonian, PenaltyConfig,
};
use crate::error::OptError;
use crate::grid_model::{
    dispatch_cost, expected_renewable_by_bus, scenario_renewable_by_bus, DispatchVector, GridCase, RenewableScenario, VarKind,
};
use crate::linearize::{build_ptdf, refresh_sensitivities, SensitivityModel};
use crate::qsim::{ansatz_for, build_state, check_qubits, derive_seed, expectation, sample, AnsatzFamily, GradientMode, PreparedHamiltonian};
use crate::scalar::Real;

const STREAM_INIT: u64 = 0;
const STREAM_SAMPLE: u64 = 1 << 20;
const STREAM_TRAJECTORY: u64 = 1 << 30;
const STREAM_GRADIENT: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "eta")]
pub enum StepRule {
    /// `min(1/L, sqrt((J0 - J*) / (L sigma^2 K)))` per outer iteration.
    Auto,
    Fixed(f64),
}

/// Where the candidate bitstrings of an outer iteration are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidatePool {
    /// `candidates` samples of the final state.
    Final,
    /// `candidates` samples of the state at every inner step, plus the final state.
    Trajectory,
}

/// Shots per gradient evaluation as a function of the global inner iteration `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ShotSchedule {
    Exact,
    Constant { shots: u64 },
    /// `min(max, initial * growth^k)`.
    Geometric { initial: u64, growth: f64, max: u64 },
}

impl ShotSchedule {
    pub fn shots_at(&self, k: usize) -> Option<u64> {
        match *self {
            ShotSchedule::Exact => None,
            ShotSchedule::Constant { shots } => Some(shots),
            ShotSchedule::Geometric { initial, growth, max } => {
                let s = (initial as f64 * growth.powi(k as i32)).round();
                Some((s.min(max as f64) as u64).max(1))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub bits: usize,
    pub ansatz: AnsatzFamily,
    pub depth: usize,
    pub step: StepRule,
    /// Noise-adaptive weighting strength.
    pub beta: f64,
    /// Weight of the physics-residual Hamiltonian in the effective objective.
    pub lambda: f64,
    pub penalty: PenaltyConfig,
    pub shots: ShotSchedule,
    pub inner_iterations: usize,
    pub max_outer: usize,
    /// Stop when the relative improvement of the best feasible cost falls below this.
    pub epsilon: f64,
    /// Parameter box `[-theta_bound, theta_bound]`.
    pub theta_bound: f64,
    pub penalty_growth: f64,
    /// Cap on penalty weights as a multiple of their initial values.
    pub penalty_cap: f64,
    pub candidates: u64,
    pub pool: CandidatePool,
    /// Initial angles are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Largest register for which `J*` is taken from the full energy table.
    pub exact_max_qubits: usize,
    pub projection: ProjectionConfig,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            bits: 2,
            ansatz: AnsatzFamily::Topology,
            depth: 2,
            step: StepRule::Auto,
            beta: 100.0,
            lambda: 0.0,
            penalty: PenaltyConfig::default(),
            shots: ShotSchedule::Exact,
            inner_iterations: 30,
            max_outer: 8,
            epsilon: 1e-3,
            theta_bound: std::f64::consts::PI,
            penalty_growth: 0.5,
            penalty_cap: 1e4,
            candidates: 64,
            pool: CandidatePool::Final,
            init_scale: 0.1,
            exact_max_qubits: 20,
            projection: ProjectionConfig::default(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        let bad = |m: String| Err(OptError::Config(m));
        if self.bits == 0 {
            return bad("bits must be at least 1".into());
        }
        if self.depth == 0 || self.inner_iterations == 0 || self.max_outer == 0 || self.candidates == 0 {
            return bad("depth, inner_iterations, max_outer and candidates must be positive".into());
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        if let StepRule::Fixed(eta) = self.step {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("step size {eta} must be positive"));
            }
        }
        if !(self.beta >= 0.0 && self.lambda >= 0.0 && self.penalty_growth >= 0.0 && self.penalty_cap >= 1.0) {
            return bad("beta, lambda and penalty_growth must be non-negative and penalty_cap at least 1".into());
        }
        if !(self.theta_bound > 0.0) {
            return bad("theta_bound must be positive".into());
        }
        if let ShotSchedule::Constant { shots: 0 } | ShotSchedule::Geometric { initial: 0, .. } = self.shots {
            return bad("shot counts must be positive".into());
        }
        self.penalty.validate().map_err(OptError::Config)
    }

    /// SHA-256 over the configuration and the case it runs on.
    pub fn hash_with(&self, case: &GridCase) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        h.update(case.to_json_pretty().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One inner P-SGD step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub outer: usize,
    pub inner: usize,
    pub iteration: usize,
    pub shots: u64,
    pub shots_total: u64,
    /// `J_eff(theta)` before the step, from the simulator.
    pub j_eff: f64,
    /// `J(theta)` of the unweighted Hamiltonian.
    pub j_exact: f64,
    pub grad_norm_sq: f64,
    pub sigma2: Option<f64>,
    pub sigma2_eff: Option<f64>,
    pub eta: f64,
    pub lipschitz: f64,
}

/// End-of-outer-iteration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRow {
    pub outer: usize,
    pub iterations: usize,
    pub candidates: usize,
    pub candidate_score: f64,
    pub candidate_cost: f64,
    pub feasible_cost: f64,
    pub best_cost: f64,
    pub max_residual: f64,
    pub j_star: f64,
    pub j_star_exact: bool,
    pub alpha: f64,
    pub gamma: f64,
    pub mu: f64,
    pub rho_ramp: f64,
}

/// Append-only optimizer trace. Equality ignores wall-clock times.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IterationLog {
    pub rows: Vec<IterationRow>,
    pub outers: Vec<OuterRow>,
    /// Seconds since start, one per entry of `rows`.
    pub row_wall_time_s: Vec<f64>,
    /// Seconds since start, one per entry of `outers`.
    pub outer_wall_time_s: Vec<f64>,
}

impl PartialEq for IterationLog {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.outers == other.outers
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution<T: Real> {
    pub dispatch: DispatchVector<T>,
    pub cost: T,
    /// Renewable energy used over renewable energy available, expected over scenarios.
    pub utilization: f64,
    pub residuals: ConstraintResiduals,
    /// Decoded sample the solution was projected from.
    pub bitstring: String,
    pub theta: Vec<T>,
    pub seed: u64,
    pub config_hash: String,
    pub outer_iterations: usize,
    pub iterations: usize,
    pub shots_used: u64,
}

/// Sums of squared violations of a continuous dispatch under one scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Violations {
    pub balance: f64,
    pub flow: f64,
    pub soc: f64,
    pub ramp: f64,
}

impl Violations {
    pub fn weighted(&self, w: &PenaltyConfig) -> f64 {
        w.mu * self.balance + w.alpha * self.flow + w.gamma * self.soc + w.rho_ramp * self.ramp
    }
}

pub fn violations<T: Real>(case: &GridCase, model: &SensitivityModel<T>, x: &DispatchVector<f64>, scenario: &RenewableScenario) -> Violations {
    let mut v = Violations::default();
    for t in 0..case.horizon {
        let w = scenario_renewable_by_bus(case, scenario, t);
        let inj = x.injections(case, t, &w);
        v.balance += inj.iter().sum::<f64>().powi(2);
        for (l, br) in case.branches.iter().enumerate() {
            let f: f64 = inj.iter().enumerate().map(|(b, p)| model.factor(l, b).to_f64_lossy() * p).sum();
            v.flow += (f.abs() - br.flow_limit).max(0.0).powi(2);
        }
        for (g, gen) in case.generators.iter().enumerate().filter(|_| t > 0) {
            let d = x.get(VarKind::Gen, g, t) - x.get(VarKind::Gen, g, t - 1);
            v.ramp += (d.abs() - gen.ramp_limit).max(0.0).powi(2);
        }
    }
    for (u, st) in case.storage_units.iter().enumerate() {
        let mut soc = st.soc_init;
        for t in 0..case.horizon {
            soc += st.charge_eff * x.get(VarKind::Charge, u, t) - x.get(VarKind::Discharge, u, t) / st.discharge_eff;
            v.soc += ((soc - st.capacity).max(0.0) + (-soc).max(0.0)).powi(2);
        }
    }
    v
}

/// Ranking score of a decoded candidate and its per-scenario violations.
pub fn candidate_score<T: Real>(
    case: &GridCase,
    model: &SensitivityModel<T>,
    scenarios: &[RenewableScenario],
    x: &DispatchVector<f64>,
    weights: &PenaltyConfig,
) -> (f64, Vec<Violations>) {
    let base = dispatch_cost(case, x);
    let viol: Vec<Violations> = scenarios.iter().map(|s| violations(case, model, x, s)).collect();
    let costs: Vec<f64> = viol.iter().map(|v| base + v.weighted(weights)).collect();
    let probs: Vec<f64> = scenarios.iter().map(|s| s.probability).collect();
    let total: f64 = probs.iter().sum();
    let expected = costs.iter().zip(&probs).map(|(c, p)| c * p).sum::<f64>() / total;
    (expected + scenario_risk(&costs, &probs, weights.lambda_risk), viol)
}

/// Renewable energy used over available, expected over scenarios.
pub fn renewable_utilization<T: Real>(case: &GridCase, x: &DispatchVector<T>) -> f64 {
    let available: f64 = (0..case.horizon).map(|t| expected_renewable_by_bus(case, t).iter().sum::<f64>()).sum();
    if available <= 0.0 {
        return 1.0;
    }
    let curtailed: f64 = (0..case.horizon)
        .flat_map(|t| (0..x.layout.curtail_buses.len()).map(move |c| (c, t)))
        .map(|(c, t)| x.get(VarKind::Curtail, c, t).to_f64_lossy())
        .sum();
    ((available - curtailed) / available).clamp(0.0, 1.0)
}

fn scales(case: &GridCase) -> [f64; 4] {
    let load = (0..case.horizon).map(|t| case.fixed_load(t)).fold(1.0, f64::max);
    let flow = case.branches.iter().map(|b| b.flow_limit).fold(1.0, f64::max);
    let cap = case.storage_units.iter().map(|s| s.capacity).fold(1.0, f64::max);
    let ramp = case.generators.iter().map(|g| g.ramp_limit).fold(1.0, f64::max);
    [load, flow, cap, ramp]
}

/// `weight <- weight * (1 + rho * normalized residual)`, capped at `cap` times the initial weight.
pub fn grow_penalties(weights: &mut PenaltyConfig, initial: &PenaltyConfig, case: &GridCase, viol: &Violations, rho: f64, cap: f64) {
    let [load, flow, soc, ramp] = scales(case);
    let grow = |w: &mut f64, w0: f64, sumsq: f64, scale: f64| {
        let r = sumsq.sqrt() / scale;
        if r > 1e-12 {
            *w = (*w * (1.0 + rho * r)).min(cap * w0);
        }
    };
    grow(&mut weights.mu, initial.mu, viol.balance, load);
    grow(&mut weights.alpha, initial.alpha, viol.flow, flow);
    grow(&mut weights.gamma, initial.gamma, viol.soc, soc);
    grow(&mut weights.rho_ramp, initial.rho_ramp, viol.ramp, ramp);
}

fn scenarios_of(case: &GridCase) -> Vec<RenewableScenario> {
    if case.scenarios.is_empty() {
        vec![RenewableScenario { bus: 0, available_power: vec![0.0; case.horizon], probability: 1.0, curtailable: false }]
    } else {
        case.scenarios.clone()
    }
}

/// Hamiltonian for the current penalty weights, on the register with its slack bits.
pub fn build_hamiltonian<T: Real>(
    case: &GridCase,
    model: &SensitivityModel<T>,
    bits: usize,
    weights: &PenaltyConfig,
) -> Result<(IsingHamiltonian<T>, Encoding), OptError> {
    let enc = build_encoding(case, bits)?;
    let h = assemble_hamiltonian(case, &enc, model, &scenarios_of(case), weights)?;
    let full = h.encoding.clone().expect("assembled Hamiltonian carries its encoding");
    Ok((h, full))
}

struct Candidate {
    index: usize,
    score: f64,
    x: DispatchVector<f64>,
    viol: Violations,
}

fn best_candidate<T: Real>(
    case: &GridCase,
    model: &SensitivityModel<T>,
    scenarios: &[RenewableScenario],
    enc: &Encoding,
    indices: impl IntoIterator<Item = usize>,
    weights: &PenaltyConfig,
) -> Result<(Candidate, usize), OptError> {
    let mut best: Option<Candidate> = None;
    let mut count = 0;
    let probs: Vec<f64> = scenarios.iter().map(|s| s.probability).collect();
    let total: f64 = probs.iter().sum();
    for index in indices {
        count += 1;
        let x: DispatchVector<f64> = enc.decode(&index_to_bits(index, enc.num_qubits()))?;
        let (score, viol) = candidate_score(case, model, scenarios, &x, weights);
        if best.as_ref().is_none_or(|b| score < b.score) {
            let mut mean = Violations::default();
            for (v, p) in viol.iter().zip(&probs) {
                mean.balance += p * v.balance / total;
                mean.flow += p * v.flow / total;
                mean.soc += p * v.soc / total;
                mean.ramp += p * v.ramp / total;
            }
            best = Some(Candidate { index, score, x, viol: mean });
        }
    }
    Ok((best.expect("at least one candidate"), count))
}

/// The hierarchical loop: P-SGD on `J_eff`, sample and rank candidates, project
/// the best onto the feasible set, grow persistent penalties, rebuild and warm-start.
pub fn hybrid_dispatch<T: Real>(case: &GridCase, config: &OptimizerConfig) -> Result<(DispatchSolution<T>, IterationLog), OptError> {
    config.validate()?;
    let start = Instant::now();
    let scenarios = scenarios_of(case);
    let mut model = build_ptdf::<T>(case)?;
    let set = FeasibleSet::from_case(case, &model, &scenarios);
    set.feasible_point(&config.projection)?;

    let mut weights = config.penalty.clone();
    let mut tracker = TermVarianceTracker::<T>::default();
    let mut log = IterationLog::default();
    let mut theta: Option<Vec<T>> = None;
    let mut best: Option<DispatchSolution<T>> = None;
    let mut iteration = 0usize;
    let mut shots_total = 0u64;
    let bounds = (T::of(-config.theta_bound), T::of(config.theta_bound));
    let beta = T::of(config.beta);
    let lambda = T::of(config.lambda);

    for outer in 0..config.max_outer {
        let (h, enc) = build_hamiltonian(case, &model, config.bits, &weights)?;
        check_qubits(enc.num_qubits())?;
        let prepared = PreparedHamiltonian::new(&h)?;
        let physics = if config.lambda > 0.0 {
            Some(PreparedHamiltonian::new(&assemble_physics_hamiltonian(case, &enc, &model, &scenarios, &weights)?)?)
        } else {
            None
        };
        let ansatz = ansatz_for(config.ansatz, case, &enc, config.depth);
        let mut th = match theta.take() {
            Some(t) if t.len() == ansatz.num_params() => t,
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_INIT));
                let s = config.init_scale;
                (0..ansatz.num_params()).map(|_| T::of(if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 })).collect()
            }
        };
        let objective_at = |tracker: &TermVarianceTracker<T>| {
            let w = noise_weights(&tracker.variances_for(&prepared.terms), beta);
            EffectiveObjective::new(prepared.clone(), physics.clone(), w, lambda)
        };

        let first = objective_at(&tracker)?;
        let (j_star, j_star_exact) = first.lower_bound(config.exact_max_qubits);
        let j0 = expectation(&build_state(&ansatz, &th)?, &first.combined)?;
        let mut eta: Option<T> = match config.step {
            StepRule::Fixed(e) => Some(T::of(e)),
            StepRule::Auto => None,
        };
        let mut objective = first;
        let mut pool = BTreeSet::new();
        for inner in 0..config.inner_iterations {
            if inner > 0 && config.beta > 0.0 && !tracker.is_empty() {
                objective = objective_at(&tracker)?;
            }
            let shots = config.shots.shots_at(iteration);
            let mode = match shots {
                None => GradientMode::Exact,
                Some(s) => GradientMode::Shots { shots: s, seed: derive_seed(config.seed, STREAM_GRADIENT + iteration as u64) },
            };
            let psi = build_state(&ansatz, &th)?;
            if config.pool == CandidatePool::Trajectory {
                let seed = derive_seed(config.seed, STREAM_TRAJECTORY + iteration as u64);
                pool.extend(sample(&psi, config.candidates, seed)?.counts.keys());
            }
            let j_eff = expectation(&psi, &objective.combined)?;
            let j_exact = expectation(&psi, &prepared)?;
            let g = effective_gradient(&ansatz, &th, &objective, mode)?;
            if let Some(tv) = &g.estimate.term_variances {
                tracker.update(&prepared.terms, &tv[..prepared.terms.len()]);
            }
            let lip = objective.lipschitz_bound();
            let step = match eta {
                Some(e) => e,
                None => {
                    let sigma2 = g.sigma2_eff.unwrap_or(T::zero());
                    let e = if lip > T::zero() {
                        auto_stepsize(lip, j0, j_star, sigma2, config.inner_iterations)
                    } else {
                        T::zero()
                    };
                    // exact mode fixes the step once per outer iteration
                    if shots.is_none() {
                        eta = Some(e);
                    }
                    e
                }
            };
            shots_total += g.estimate.shots_used;
            log.rows.push(IterationRow {
                outer,
                inner,
                iteration,
                shots: g.estimate.shots_used,
                shots_total,
                j_eff: j_eff.to_f64_lossy(),
                j_exact: j_exact.to_f64_lossy(),
                grad_norm_sq: g.norm_sq().to_f64_lossy(),
                sigma2: g.sigma2.map(|v| v.to_f64_lossy()),
                sigma2_eff: g.sigma2_eff.map(|v| v.to_f64_lossy()),
                eta: step.to_f64_lossy(),
                lipschitz: lip.to_f64_lossy(),
            });
            log.row_wall_time_s.push(start.elapsed().as_secs_f64());
            th = psgd_step(&th, &g.estimate.gradient, step, bounds);
            iteration += 1;
        }

        let psi = build_state(&ansatz, &th)?;
        let shots = sample(&psi, config.candidates, derive_seed(config.seed, STREAM_SAMPLE + outer as u64))?;
        pool.extend(shots.counts.keys());
        let (cand, count) = best_candidate(case, &model, &scenarios, &enc, pool, &weights)?;
        let projected = set.project(&cand.x, &config.projection)?;
        let feasible_cost = dispatch_cost(case, &projected);
        let residuals = set.residuals_of(&projected);
        let improved = best.as_ref().is_none_or(|b| feasible_cost < b.cost.to_f64_lossy());
        let previous = best.as_ref().map(|b| b.cost.to_f64_lossy());
        if improved {
            best = Some(DispatchSolution {
                dispatch: DispatchVector::from_values(projected.layout.clone(), projected.values.iter().map(|&v| T::of(v)).collect()),
                cost: T::of(feasible_cost),
                utilization: renewable_utilization(case, &projected),
                residuals,
                bitstring: shots.label(cand.index),
                theta: th.clone(),
                seed: config.seed,
                config_hash: String::new(),
                outer_iterations: 0,
                iterations: 0,
                shots_used: 0,
            });
        }
        let best_cost = best.as_ref().map(|b| b.cost.to_f64_lossy()).unwrap_or(f64::INFINITY);
        log.outers.push(OuterRow {
            outer,
            iterations: iteration,
            candidates: count,
            candidate_score: cand.score,
            candidate_cost: dispatch_cost(case, &cand.x),
            feasible_cost,
            best_cost,
            max_residual: residuals.max(),
            j_star: j_star.to_f64_lossy(),
            j_star_exact,
            alpha: weights.alpha,
            gamma: weights.gamma,
            mu: weights.mu,
            rho_ramp: weights.rho_ramp,
        });
        log.outer_wall_time_s.push(start.elapsed().as_secs_f64());

        let rel = match previous {
            Some(p) => (p - best_cost) / p.abs().max(1e-12),
            None => 1.0,
        };
        theta = Some(th);
        if rel < config.epsilon {
            break;
        }
        grow_penalties(&mut weights, &config.penalty, case, &cand.viol, config.penalty_growth, config.penalty_cap);
        model = refresh_sensitivities(&model, &DispatchVector::from_values(projected.layout.clone(), projected.values.iter().map(|&v| T::of(v)).collect()));
    }

    let mut sol = best.expect("at least one outer iteration");
    sol.config_hash = config.hash_with(case);
    sol.outer_iterations = log.outers.len();
    sol.iterations = iteration;
    sol.shots_used = shots_total;
    Ok((sol, log))
}
