use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EncodeError;
use crate::grid_model::{DispatchLayout, GridCase, RenewableScenario, VarKind};
use crate::linearize::SensitivityModel;
use crate::scalar::Real;

use super::encoding::{Encoding, SlackKey};
use super::ising::IsingHamiltonian;
use super::qubo::{LinearExpr, QuboProblem};

const FEAS_EPS: f64 = 1e-12;

/// How inequality constraints enter the QUBO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InequalityMode {
    /// `weight * (a x - b)^2`, penalizing interior points too.
    Literal,
    /// `weight * (a x - b + s)^2` with a binary slack register `s >= 0`.
    #[default]
    Slack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    /// Line-flow weight.
    pub alpha: f64,
    /// State-of-charge box weight.
    pub gamma: f64,
    /// Power-balance weight.
    pub mu: f64,
    pub rho_ramp: f64,
    /// Weight on the cross-scenario variance of candidate costs.
    pub lambda_risk: f64,
    pub inequality_mode: InequalityMode,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { alpha: 50.0, gamma: 50.0, mu: 50.0, rho_ramp: 50.0, lambda_risk: 0.0, inequality_mode: InequalityMode::Slack }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("rho_ramp", self.rho_ramp),
            ("lambda_risk", self.lambda_risk),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(format!("penalty weight {name} = {w} must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Net injection at `bus`, `t` as an affine form in the bits.
pub fn injection_expr(case: &GridCase, enc: &Encoding, renewable: &[f64], bus: usize, t: usize) -> LinearExpr {
    let layout = &enc.layout;
    let mut e = LinearExpr::constant(renewable[bus] - case.fixed_load_at(bus, t));
    let n = layout.per_step();
    for i in t * n..(t + 1) * n {
        let slot = layout.slot(i);
        if layout.bus_of(case, slot) == bus {
            e.add_scaled(&enc.slot_expr(i), DispatchLayout::injection_sign(slot.kind));
        }
    }
    e
}

fn renewable_of(case: &GridCase, scenario: &RenewableScenario, t: usize) -> Vec<f64> {
    crate::grid_model::scenario_renewable_by_bus(case, scenario, t)
}

/// Flow on line `l` at `t` under `scenario`.
pub fn flow_expr<T: Real>(
    case: &GridCase,
    enc: &Encoding,
    model: &SensitivityModel<T>,
    scenario: &RenewableScenario,
    l: usize,
    t: usize,
) -> LinearExpr {
    let renewable = renewable_of(case, scenario, t);
    let mut e = LinearExpr::default();
    for b in 0..case.num_buses() {
        let f = model.factor(l, b).to_f64_lossy();
        if f != 0.0 {
            e.add_scaled(&injection_expr(case, enc, &renewable, b, t), f);
        }
    }
    e
}

/// System-wide balance residual at `t` under `scenario`.
pub fn balance_expr(case: &GridCase, enc: &Encoding, scenario: &RenewableScenario, t: usize) -> LinearExpr {
    let renewable = renewable_of(case, scenario, t);
    let mut e = LinearExpr::default();
    for b in 0..case.num_buses() {
        e.add_scaled(&injection_expr(case, enc, &renewable, b, t), 1.0);
    }
    e
}

/// State of charge of `unit` after `t` steps (`t = 1..=T`), substituted forward from `soc_init`.
pub fn soc_expr(case: &GridCase, enc: &Encoding, unit: usize, t: usize) -> LinearExpr {
    let st = &case.storage_units[unit];
    let mut e = LinearExpr::constant(st.soc_init);
    for tau in 0..t {
        e.add_scaled(&enc.kind_expr(VarKind::Charge, unit, tau), st.charge_eff);
        e.add_scaled(&enc.kind_expr(VarKind::Discharge, unit, tau), -1.0 / st.discharge_eff);
    }
    e
}

fn ramp_expr(enc: &Encoding, g: usize, t: usize) -> LinearExpr {
    let mut e = enc.kind_expr(VarKind::Gen, g, t);
    e.add_scaled(&enc.kind_expr(VarKind::Gen, g, t - 1), -1.0);
    e
}

fn sided(e: &LinearExpr, upper: bool, limit: f64) -> LinearExpr {
    let mut g = e.scaled(if upper { 1.0 } else { -1.0 });
    g.constant -= limit;
    g
}

fn scenario_set<'a>(case: &'a GridCase, fallback: &'a RenewableScenario) -> Vec<&'a RenewableScenario> {
    if case.scenarios.is_empty() {
        vec![fallback]
    } else {
        case.scenarios.iter().collect()
    }
}

/// Range and width of a slack register shared by `peers` (one `g` per scenario).
///
/// The default is `bits` bits spanning the largest feasibility margin `-min g`.
/// When every coefficient and every `min g` is an integer multiple of the
/// smallest coefficient `d`, the register is aligned to step `d` instead, with
/// as many bits as needed (at most `2 * bits`), so every margin is represented exactly.
pub fn slack_range(peers: &[LinearExpr], bits: usize) -> (f64, usize) {
    let max_margin = -peers.iter().map(|g| g.range().0).fold(f64::INFINITY, f64::min);
    let step = peers
        .iter()
        .flat_map(|g| g.terms.values())
        .map(|a| a.abs())
        .filter(|a| *a > FEAS_EPS)
        .fold(f64::INFINITY, f64::min);
    if !step.is_finite() {
        return (max_margin, bits);
    }
    let on_lattice = |v: f64| ((v / step) - (v / step).round()).abs() <= 1e-9 * (1.0 + (v / step).abs());
    let commensurate = peers
        .iter()
        .all(|g| g.terms.values().all(|&a| on_lattice(a)) && on_lattice(g.range().0));
    if !commensurate {
        return (max_margin, bits);
    }
    let levels = (max_margin / step).round() as u64;
    let needed = (64 - levels.leading_zeros() as usize).max(bits);
    if needed > 2 * bits {
        return (max_margin, bits);
    }
    (step * ((1u64 << needed) - 1) as f64, needed)
}

/// Adds the one-sided penalty for `g(x) <= 0`. `peers` holds `g` under every
/// scenario sharing the slack register and fixes its range.
fn add_one_sided<T: Real>(qubo: &mut QuboProblem<T>, key: SlackKey, weight: f64, g: &LinearExpr, peers: &[LinearExpr]) {
    if weight == 0.0 {
        return;
    }
    let (_, hi) = g.range();
    if hi <= FEAS_EPS {
        return;
    }
    let global_min = peers.iter().map(|p| p.range().0).fold(f64::INFINITY, f64::min);
    if global_min >= -FEAS_EPS {
        qubo.add_squared(weight, g);
        return;
    }
    let (range, bits) = slack_range(peers, qubo.encoding.bits_per_variable);
    let v = qubo.encoding.add_slack_register(key, range, bits);
    qubo.sync_qubits();
    let mut e = g.clone();
    e.add_scaled(&qubo.encoding.variable_expr(v), 1.0);
    qubo.add_squared(weight, &e);
}

/// Expected-value cost block: quadratic generation cost plus storage throughput cost.
pub fn build_cost_block<T: Real>(case: &GridCase, encoding: &Encoding) -> QuboProblem<T> {
    let mut qubo = QuboProblem::new(encoding.clone());
    for t in 0..case.horizon {
        for (g, gen) in case.generators.iter().enumerate() {
            let p = encoding.kind_expr(VarKind::Gen, g, t);
            qubo.add_squared(gen.cost_quad, &p);
            qubo.add_expr(gen.cost_lin, &p);
        }
        for (s, st) in case.storage_units.iter().enumerate() {
            let mut through = encoding.kind_expr(VarKind::Charge, s, t);
            through.add_scaled(&encoding.kind_expr(VarKind::Discharge, s, t), 1.0);
            qubo.add_expr(st.throughput_cost, &through);
        }
    }
    qubo
}

/// Line-flow penalty for one scenario.
pub fn add_flow_penalty<T: Real>(
    qubo: &mut QuboProblem<T>,
    model: &SensitivityModel<T>,
    case: &GridCase,
    scenario: &RenewableScenario,
    config: &PenaltyConfig,
) {
    if config.alpha == 0.0 {
        return;
    }
    for (l, br) in case.branches.iter().enumerate() {
        for t in 0..case.horizon {
            let f = flow_expr(case, &qubo.encoding, model, scenario, l, t);
            match config.inequality_mode {
                InequalityMode::Literal => qubo.add_squared(config.alpha, &sided(&f, true, br.flow_limit)),
                InequalityMode::Slack => {
                    for upper in [true, false] {
                        let peers: Vec<LinearExpr> = scenario_set(case, scenario)
                            .into_iter()
                            .map(|s| sided(&flow_expr(case, &qubo.encoding, model, s, l, t), upper, br.flow_limit))
                            .collect();
                        let g = sided(&f, upper, br.flow_limit);
                        add_one_sided(qubo, SlackKey::Flow { line: l, t, upper }, config.alpha, &g, &peers);
                    }
                }
            }
        }
    }
}

/// State-of-charge box penalty. The dynamics are substituted exactly, so only
/// `0 <= SOC_t <= capacity` remains; it uses slack registers in both modes.
pub fn add_soc_penalty<T: Real>(qubo: &mut QuboProblem<T>, case: &GridCase, config: &PenaltyConfig) {
    if config.gamma == 0.0 {
        return;
    }
    for (unit, st) in case.storage_units.iter().enumerate() {
        for t in 1..=case.horizon {
            let soc = soc_expr(case, &qubo.encoding, unit, t);
            for upper in [true, false] {
                let g = sided(&soc, upper, if upper { st.capacity } else { 0.0 });
                add_one_sided(qubo, SlackKey::Soc { unit, t, upper }, config.gamma, &g, std::slice::from_ref(&g));
            }
        }
    }
}

/// Power-balance penalty for one scenario: `mu * (sum of injections)^2` per timestep.
pub fn add_balance_penalty<T: Real>(
    qubo: &mut QuboProblem<T>,
    case: &GridCase,
    scenario: &RenewableScenario,
    config: &PenaltyConfig,
) {
    for t in 0..case.horizon {
        let e = balance_expr(case, &qubo.encoding, scenario, t);
        qubo.add_squared(config.mu, &e);
    }
}

/// Ramp penalty between consecutive timesteps.
///
/// Literal mode adds `rho * ((g_t - g_{t-1}) / R_g)^2`; slack mode penalizes
/// only `|g_t - g_{t-1}| > R_g`.
pub fn add_ramp_penalty<T: Real>(qubo: &mut QuboProblem<T>, case: &GridCase, config: &PenaltyConfig) {
    if config.rho_ramp == 0.0 {
        return;
    }
    for (g, gen) in case.generators.iter().enumerate() {
        for t in 1..case.horizon {
            let d = ramp_expr(&qubo.encoding, g, t);
            match config.inequality_mode {
                InequalityMode::Literal => {
                    qubo.add_squared(config.rho_ramp, &d.scaled(1.0 / gen.ramp_limit));
                }
                InequalityMode::Slack => {
                    for upper in [true, false] {
                        let g_expr = sided(&d, upper, gen.ramp_limit);
                        let key = SlackKey::Ramp { generator: g, t, upper };
                        add_one_sided(qubo, key, config.rho_ramp, &g_expr, std::slice::from_ref(&g_expr));
                    }
                }
            }
        }
    }
}

/// Appends every slack register the penalties will need so per-scenario blocks share one register layout.
pub fn plan_slack_registers<T: Real>(
    case: &GridCase,
    encoding: &Encoding,
    model: &SensitivityModel<T>,
    scenarios: &[RenewableScenario],
    config: &PenaltyConfig,
) -> Encoding {
    let mut probe: QuboProblem<T> = QuboProblem::new(encoding.clone());
    if config.inequality_mode == InequalityMode::Slack {
        for s in scenarios {
            add_flow_penalty(&mut probe, model, case, s, config);
        }
    }
    add_ramp_penalty(&mut probe, case, config);
    add_soc_penalty(&mut probe, case, config);
    probe.encoding
}

fn normalized_probabilities(scenarios: &[RenewableScenario]) -> Vec<f64> {
    let total: f64 = scenarios.iter().map(|s| s.probability).sum();
    scenarios.iter().map(|s| s.probability / total).collect()
}

fn scenario_blocks<T: Real>(
    case: &GridCase,
    encoding: &Encoding,
    model: &SensitivityModel<T>,
    scenarios: &[RenewableScenario],
    config: &PenaltyConfig,
    include_flow: bool,
) -> QuboProblem<T> {
    let blocks: Vec<QuboProblem<T>> = scenarios
        .par_iter()
        .map(|s| {
            let mut q = QuboProblem::new(encoding.clone());
            if include_flow {
                add_flow_penalty(&mut q, model, case, s, config);
            }
            add_balance_penalty(&mut q, case, s, config);
            debug_assert_eq!(q.encoding.total_qubits, encoding.total_qubits);
            q
        })
        .collect();
    let mut acc = QuboProblem::new(encoding.clone());
    for (block, p) in blocks.iter().zip(normalized_probabilities(scenarios)) {
        acc.add_scaled(block, T::of(p));
    }
    acc
}

/// Full QUBO: cost + probability-weighted per-scenario physics blocks + SOC and ramp penalties.
pub fn assemble_qubo<T: Real>(
    case: &GridCase,
    encoding: &Encoding,
    model: &SensitivityModel<T>,
    scenarios: &[RenewableScenario],
    config: &PenaltyConfig,
) -> Result<QuboProblem<T>, EncodeError> {
    if scenarios.is_empty() {
        return Err(EncodeError::NoScenarios);
    }
    let enc = plan_slack_registers(case, encoding, model, scenarios, config);
    let mut qubo = build_cost_block(case, &enc);
    qubo.add_scaled(&scenario_blocks(case, &enc, model, scenarios, config, true), T::one());
    add_soc_penalty(&mut qubo, case, config);
    add_ramp_penalty(&mut qubo, case, config);
    Ok(qubo)
}

pub fn assemble_hamiltonian<T: Real>(
    case: &GridCase,
    encoding: &Encoding,
    model: &SensitivityModel<T>,
    scenarios: &[RenewableScenario],
    config: &PenaltyConfig,
) -> Result<IsingHamiltonian<T>, EncodeError> {
    Ok(IsingHamiltonian::from_qubo(&assemble_qubo(case, encoding, model, scenarios, config)?))
}

/// Physics residual Hamiltonian on the register of `encoding` (which must already
/// carry its slack registers): balance plus, when `alpha > 0`, line-flow penalties.
pub fn assemble_physics_hamiltonian<T: Real>(
    case: &GridCase,
    encoding: &Encoding,
    model: &SensitivityModel<T>,
    scenarios: &[RenewableScenario],
    config: &PenaltyConfig,
) -> Result<IsingHamiltonian<T>, EncodeError> {
    if scenarios.is_empty() {
        return Err(EncodeError::NoScenarios);
    }
    let q = scenario_blocks(case, encoding, model, scenarios, config, config.alpha > 0.0);
    Ok(IsingHamiltonian::from_qubo(&q))
}

/// Cost of one scenario's block evaluated on `bits`: expected cost plus that
/// scenario's physics penalties. Used for scenario-risk ranking.
pub fn scenario_block_qubo<T: Real>(
    case: &GridCase,
    encoding: &Encoding,
    model: &SensitivityModel<T>,
    scenario: &RenewableScenario,
    config: &PenaltyConfig,
) -> QuboProblem<T> {
    let mut q = build_cost_block(case, encoding);
    add_flow_penalty(&mut q, model, case, scenario, config);
    add_balance_penalty(&mut q, case, scenario, config);
    add_soc_penalty(&mut q, case, config);
    add_ramp_penalty(&mut q, case, config);
    q
}

#[cfg(test)]
pub(crate) fn add_one_sided_for_tests<T: Real>(qubo: &mut QuboProblem<T>, weight: f64, g: &LinearExpr) {
    let key = SlackKey::Flow { line: 0, t: 0, upper: true };
    add_one_sided(qubo, key, weight, g, std::slice::from_ref(g));
}
