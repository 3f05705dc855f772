//! Classical reference solvers: exhaustive and annealing oracles for the Ising
//! problem, and a continuous projected-gradient dispatch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{index_to_bits, Bitstring, IsingHamiltonian, InequalityMode};
use crate::error::{OptError, SimError};
use crate::grid_model::{dispatch_cost, DispatchVector, GridCase, RenewableScenario, VarKind};
use crate::hybrid_opt::{renewable_utilization, DispatchSolution, FeasibleSet, OptimizerConfig, ProjectionConfig};
use crate::linearize::SensitivityModel;
use crate::qsim::{check_qubits, AnsatzFamily};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    BruteForce,
    SimulatedAnnealing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Exhaustive,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub bitstring: Bitstring,
    pub index: usize,
    pub energy: f64,
    pub method: OracleMethod,
    pub certificate: Certificate,
}

/// Exact minimum over all `2^N` bitstrings; ties go to the lowest basis index.
pub fn brute_force<T: Real>(h: &IsingHamiltonian<T>) -> Result<OracleResult, SimError> {
    let n = h.num_qubits();
    check_qubits(n)?;
    let table = h.energy_table();
    let mut best = 0usize;
    for (i, e) in table.iter().enumerate().skip(1) {
        if *e < table[best] {
            best = i;
        }
    }
    Ok(OracleResult {
        bitstring: index_to_bits(best, n),
        index: best,
        energy: table[best].to_f64_lossy(),
        method: OracleMethod::BruteForce,
        certificate: Certificate::Exhaustive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    /// Defaults to twice the energy-range estimate.
    pub t_start: Option<f64>,
    /// Defaults to `1e-3` times the energy-range estimate.
    pub t_end: Option<f64>,
}

impl AnnealSchedule {
    pub fn new(sweeps: usize) -> Self {
        Self { sweeps, t_start: None, t_end: None }
    }
}

/// Single-spin-flip Metropolis with a geometric temperature schedule.
pub fn simulated_annealing<T: Real>(h: &IsingHamiltonian<T>, schedule: AnnealSchedule, seed: u64) -> OracleResult {
    simulated_annealing_trace(h, schedule, seed).0
}

/// As [`simulated_annealing`], also returning the best energy before the first
/// sweep and after every sweep.
pub fn simulated_annealing_trace<T: Real>(h: &IsingHamiltonian<T>, schedule: AnnealSchedule, seed: u64) -> (OracleResult, Vec<f64>) {
    assert!(schedule.sweeps >= 1, "at least one sweep");
    let n = h.num_qubits();
    let fields: Vec<f64> = h.fields.iter().map(|v| v.to_f64_lossy()).collect();
    let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(i, j), &c) in &h.couplings {
        let c = c.to_f64_lossy();
        nbrs[i].push((j, c));
        nbrs[j].push((i, c));
    }
    // range estimate: max - min energy is at most twice the coefficient sum
    let range = 2.0 * h.coefficient_l1().to_f64_lossy();
    let t0 = schedule.t_start.unwrap_or(2.0 * range);
    let t1 = schedule.t_end.unwrap_or(1e-3 * range);
    let ratio = if schedule.sweeps > 1 && t0 > 0.0 && t1 > 0.0 { (t1 / t0).powf(1.0 / (schedule.sweeps - 1) as f64) } else { 1.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![1.0f64; n];
    let energy_of = |z: &[f64]| -> f64 {
        let mut e = h.constant.to_f64_lossy();
        e += fields.iter().zip(z).map(|(h, s)| h * s).sum::<f64>();
        e += h.couplings.iter().map(|(&(i, j), c)| c.to_f64_lossy() * z[i] * z[j]).sum::<f64>();
        e
    };
    let mut e = energy_of(&z);
    let mut best_z = z.clone();
    let mut best_e = e;
    let mut temp = t0;
    let mut trace = Vec::with_capacity(schedule.sweeps + 1);
    trace.push(best_e);
    for sweep in 0..schedule.sweeps {
        if sweep > 0 {
            temp = if t0 > 0.0 && t1 > 0.0 { temp * ratio } else { t1 };
        }
        for i in 0..n {
            let local = fields[i] + nbrs[i].iter().map(|&(j, c)| c * z[j]).sum::<f64>();
            let delta = -2.0 * z[i] * local;
            let accept = delta <= 0.0 || (temp > 0.0 && rng.random::<f64>() < (-delta / temp).exp());
            if accept && delta != 0.0 {
                z[i] = -z[i];
                e += delta;
                if e < best_e - 1e-12 {
                    best_e = e;
                    best_z.copy_from_slice(&z);
                }
            }
        }
        trace.push(best_e);
    }
    let bitstring: Bitstring = best_z.iter().map(|&s| s < 0.0).collect();
    let index = bitstring.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| 1usize << i).sum();
    let result = OracleResult {
        index,
        energy: energy_of(&best_z),
        bitstring,
        method: OracleMethod::SimulatedAnnealing,
        certificate: Certificate::Heuristic,
    };
    (result, trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub max_iterations: usize,
    /// Stop when an iteration moves the point by at most this (max norm).
    pub tol: f64,
    pub projection: ProjectionConfig,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            tol: 1e-9,
            projection: ProjectionConfig { tol: 1e-12, max_sweeps: 200_000, feasibility_tol: 1e-6 },
        }
    }
}

fn cost_gradient(case: &GridCase, x: &DispatchVector<f64>) -> Vec<f64> {
    let mut g = vec![0.0; x.values.len()];
    for t in 0..case.horizon {
        for (k, gen) in case.generators.iter().enumerate() {
            let i = x.layout.index(VarKind::Gen, k, t);
            g[i] = 2.0 * gen.cost_quad * x.values[i] + gen.cost_lin;
        }
        for (s, st) in case.storage_units.iter().enumerate() {
            g[x.layout.index(VarKind::Charge, s, t)] = st.throughput_cost;
            g[x.layout.index(VarKind::Discharge, s, t)] = st.throughput_cost;
        }
    }
    g
}

/// Step `1/L` of the quadratic cost, falling back to 1 for a linear cost.
fn cost_step(case: &GridCase) -> f64 {
    let l = case.generators.iter().map(|g| 2.0 * g.cost_quad).fold(0.0, f64::max);
    if l > 0.0 {
        1.0 / l
    } else {
        1.0
    }
}

/// Norm of the projected-gradient map `(x - P(x - s grad)) / s`, zero exactly at KKT points.
pub fn kkt_residual(case: &GridCase, set: &FeasibleSet, x: &DispatchVector<f64>, projection: &ProjectionConfig) -> Result<f64, OptError> {
    let s = cost_step(case);
    let g = cost_gradient(case, x);
    let trial: Vec<f64> = x.values.iter().zip(&g).map(|(v, d)| v - s * d).collect();
    let p = set.project_values(&trial, projection)?;
    Ok(x.values.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / s)
}

/// Continuous deterministic dispatch by projected gradient descent on the operating cost.
pub fn classical_dispatch<T: Real>(
    case: &GridCase,
    model: &SensitivityModel<T>,
    scenarios: &[RenewableScenario],
    config: &ClassicalConfig,
) -> Result<DispatchSolution<T>, OptError> {
    classical_dispatch_trace(case, model, scenarios, config).map(|r| r.0)
}

/// As [`classical_dispatch`], also returning the cost at the starting point and after every iteration.
pub fn classical_dispatch_trace<T: Real>(
    case: &GridCase,
    model: &SensitivityModel<T>,
    scenarios: &[RenewableScenario],
    config: &ClassicalConfig,
) -> Result<(DispatchSolution<T>, Vec<f64>), OptError> {
    let set = FeasibleSet::from_case(case, model, scenarios);
    let layout = set.layout.clone();
    let mut x = DispatchVector::from_values(layout.clone(), set.feasible_point(&config.projection)?);
    let s = cost_step(case);
    let mut iterations = 0;
    let mut trace = vec![dispatch_cost(case, &x)];
    for _ in 0..config.max_iterations {
        iterations += 1;
        let g = cost_gradient(case, &x);
        let trial: Vec<f64> = x.values.iter().zip(&g).map(|(v, d)| v - s * d).collect();
        let next = set.project_values(&trial, &config.projection)?;
        let change = next.iter().zip(&x.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x.values = next;
        trace.push(dispatch_cost(case, &x));
        if change <= config.tol {
            break;
        }
    }
    let solution = DispatchSolution {
        cost: T::of(dispatch_cost(case, &x)),
        utilization: renewable_utilization(case, &x),
        residuals: set.residuals(&x.values),
        dispatch: DispatchVector::from_values(layout, x.values.iter().map(|&v| T::of(v)).collect()),
        bitstring: String::new(),
        theta: Vec::new(),
        seed: 0,
        config_hash: String::new(),
        outer_iterations: 1,
        iterations,
        shots_used: 0,
    };
    Ok((solution, trace))
}

/// Cost in units of the classical anchor.
pub fn per_unit(cost: f64, anchor: f64) -> f64 {
    cost / anchor
}

/// Unweighted generic VQA: complete-graph entanglers, no noise weighting, no
/// physics term and literal penalties.
pub fn generic_vqa_config(base: &OptimizerConfig) -> (AnsatzFamily, OptimizerConfig) {
    let mut c = base.clone();
    c.ansatz = AnsatzFamily::AllToAll;
    c.beta = 0.0;
    c.lambda = 0.0;
    c.penalty.inequality_mode = InequalityMode::Literal;
    (c.ansatz, c)
}

#[cfg(test)]
mod tests;
