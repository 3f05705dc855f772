use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ansatz::{topology_ansatz, AnsatzFamily, AnsatzSpec};
use super::gradient::{derive_seed, param_shift_component};
use super::measure::PreparedHamiltonian;
use crate::encode::{assemble_hamiltonian, build_encoding, IsingHamiltonian, PenaltyConfig};
use crate::error::SimError;
use crate::grid_model::{Branch, Bus, DemandProfile, Generator, GridCase, RenewableScenario};
use crate::linearize::build_ptdf;
use crate::scalar::Real;

/// Circuit depth as a function of the qubit count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum DepthRule {
    Fixed(usize),
    /// `depth = ceil(factor * N)`.
    PerQubit(f64),
}

impl DepthRule {
    pub fn depth(self, n: usize) -> usize {
        match self {
            DepthRule::Fixed(l) => l,
            DepthRule::PerQubit(f) => ((f * n as f64).ceil() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub family: AnsatzFamily,
    pub n: usize,
    pub depth: usize,
    pub variance: f64,
    pub trials: usize,
    pub seed: u64,
}

/// One probe instance: an ansatz and the Hamiltonian it is differentiated against.
pub struct ProbeInstance<T: Real> {
    pub ansatz: AnsatzSpec,
    pub hamiltonian: PreparedHamiltonian<T>,
}

/// Path of `n` buses with one generator each, one timestep, single-bit encoding,
/// so the register has exactly `n` qubits.
pub fn path_grid_case(n: usize) -> GridCase {
    GridCase {
        name: format!("path{n}"),
        horizon: 1,
        buses: (0..n).map(|id| Bus { id, is_slack: id == 0 }).collect(),
        branches: (1..n)
            .map(|b| Branch { from_bus: b - 1, to_bus: b, reactance: 0.1, flow_limit: 1e3 })
            .collect(),
        generators: (0..n)
            .map(|b| Generator {
                bus: b,
                p_min: 0.0,
                p_max: 1.0,
                cost_quad: 0.5 + 0.1 * (b % 3) as f64,
                cost_lin: 1.0 + 0.25 * b as f64,
                ramp_limit: 1.0,
            })
            .collect(),
        storage_units: vec![],
        demand_profiles: vec![DemandProfile { bus: n - 1, fixed_load: vec![n as f64 / 2.0], flexible_band: vec![[0.0, 0.0]] }],
        scenarios: vec![RenewableScenario { bus: 0, available_power: vec![0.0], probability: 1.0, curtailable: false }],
    }
}

/// Assembled path-grid Hamiltonian scaled to unit coefficient 2-norm.
pub fn path_grid_hamiltonian<T: Real>(n: usize) -> IsingHamiltonian<T> {
    let case = path_grid_case(n);
    let enc = build_encoding(&case, 1).expect("one bit per variable");
    let model = build_ptdf::<T>(&case).expect("path grid is connected");
    let mut h = assemble_hamiltonian(&case, &enc, &model, &case.scenarios, &PenaltyConfig::default())
        .expect("path grid has a scenario");
    let norm = (h.fields.iter().map(|&x| x * x).sum::<T>() + h.couplings.values().map(|&x| x * x).sum::<T>()).sqrt();
    h.fields.iter_mut().for_each(|x| *x /= norm);
    h.couplings.values_mut().for_each(|x| *x /= norm);
    h.constant = T::zero();
    h
}

/// Path-grid probe instance for `family` at `n` qubits.
pub fn path_grid_instance<T: Real>(family: AnsatzFamily, n: usize, depth: DepthRule) -> Result<ProbeInstance<T>, SimError> {
    let case = path_grid_case(n);
    let enc = build_encoding(&case, 1).expect("one bit per variable");
    let l = depth.depth(n);
    let ansatz = match family {
        AnsatzFamily::Topology => topology_ansatz(&case, &enc, l),
        AnsatzFamily::LinearChain => AnsatzSpec::linear_chain(n, l),
        AnsatzFamily::AllToAll => AnsatzSpec::all_to_all(n, l),
    };
    Ok(ProbeInstance { ansatz, hamiltonian: PreparedHamiltonian::new(&path_grid_hamiltonian(n))? })
}

/// Parameter whose derivative is sampled: the first rotation of the middle layer.
pub fn probe_parameter(ansatz: &AnsatzSpec) -> usize {
    ansatz.rotation_index(ansatz.depth / 2, 0)
}

/// Sample variance of `dJ/dtheta_k` over `trials` draws of `theta ~ U[-pi, pi]`.
pub fn probe_variance<T: Real>(inst: &ProbeInstance<T>, trials: usize, seed: u64) -> Result<f64, SimError> {
    let k = probe_parameter(&inst.ansatz);
    let p = inst.ansatz.num_params();
    let n = inst.ansatz.num_qubits as u64;
    let samples = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, (n << 32) | trial as u64));
            let theta: Vec<T> = (0..p).map(|_| T::of(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))).collect();
            param_shift_component(&inst.ansatz, &theta, &inst.hamiltonian, k).map(|g| g.to_f64_lossy())
        })
        .collect::<Result<Vec<f64>, SimError>>()?;
    let mean = samples.iter().sum::<f64>() / trials as f64;
    Ok(samples.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (trials.max(2) - 1) as f64)
}

/// Gradient variance per qubit count on path-grid instances.
pub fn gradient_variance_probe<T: Real>(
    family: AnsatzFamily,
    n_list: &[usize],
    depth: DepthRule,
    trials: usize,
    seed: u64,
) -> Result<Vec<VarianceRow>, SimError> {
    n_list
        .iter()
        .map(|&n| {
            let inst = path_grid_instance::<T>(family, n, depth)?;
            Ok(VarianceRow {
                family,
                n,
                depth: inst.ansatz.depth,
                variance: probe_variance(&inst, trials, seed)?,
                trials,
                seed,
            })
        })
        .collect()
}

/// Least-squares slope of `log variance` against `log N`.
pub fn log_log_slope(rows: &[VarianceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.n as f64).ln(), r.variance.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
