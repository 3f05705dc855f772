use std::path::Path;
use std::time::Instant;

use pihqcd::baselines::{
    brute_force, classical_dispatch, classical_dispatch_trace, generic_vqa_config, per_unit, simulated_annealing, simulated_annealing_trace,
    AnnealSchedule, ClassicalConfig,
};
use pihqcd::grid_model::{DispatchVector, GridCase};
use pihqcd::hybrid_opt::{build_hamiltonian, hybrid_dispatch, FeasibleSet, IterationLog, OptimizerConfig};
use pihqcd::linearize::{build_ptdf, SensitivityModel};
use pihqcd::qsim::{gradient_variance_probe, log_log_slope, AnsatzFamily, DepthRule, VarianceRow, MAX_QUBITS};
use pihqcd::{DispatchSolution64, IsingHamiltonian64, SensitivityModel64};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::output::{ensure_dir, mean, median, num, opt_num, spearman, std_dev, write_csv, write_json, write_manifest, write_timing};

pub const PI_HQCD: &str = "pi_hqcd";
pub const GENERIC_VQA: &str = "generic_vqa";
pub const ANNEALING: &str = "simulated_annealing";
pub const CLASSICAL: &str = "classical_dispatch";

/// Runs the configured command and returns the text printed to stdout.
pub fn run(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    match cfg.command.as_str() {
        "solve" => solve(cfg),
        "variance-study" => variance_study(cfg),
        "noise-sweep" => noise_sweep(cfg),
        "convergence-compare" => convergence_compare(cfg),
        "report" => crate::report::report(cfg),
        other => Err(BenchError::Usage(format!("unknown command {other:?}"))),
    }
}

fn anchor(case: &GridCase, model: &SensitivityModel64) -> Result<DispatchSolution64> {
    Ok(classical_dispatch(case, model, &case.scenarios, &ClassicalConfig::default())?)
}

/// The ablation settings paired with `base`.
pub fn generic_settings(base: &OptimizerConfig) -> OptimizerConfig {
    generic_vqa_config(base).1
}

/// Share of feasible-set rows the sampled bitstring violates before projection.
fn raw_violation_rate(set: &FeasibleSet, enc: &pihqcd::encode::Encoding, bitstring: &str) -> Option<f64> {
    let bits: Vec<bool> = bitstring.chars().map(|c| c == '1').collect();
    let x: DispatchVector<f64> = enc.decode(&bits).ok()?;
    let rows = set.equalities.len() + set.inequalities.len();
    if rows == 0 {
        return Some(0.0);
    }
    let bad = set.equalities.iter().filter(|r| (r.dot(&x.values) - r.rhs).abs() > 1e-6).count()
        + set.inequalities.iter().filter(|r| r.dot(&x.values) - r.rhs > 1e-6).count();
    Some(bad as f64 / rows as f64)
}

#[derive(Serialize)]
struct DispatchEntry {
    kind: &'static str,
    device: usize,
    t: usize,
    value: f64,
}

#[derive(Serialize)]
struct SolutionRecord<'a> {
    seed: u64,
    cost: f64,
    cost_pu: f64,
    utilization: f64,
    residuals: &'a pihqcd::hybrid_opt::ConstraintResiduals,
    bitstring: &'a str,
    theta: &'a [f64],
    dispatch: Vec<DispatchEntry>,
    config_hash: &'a str,
    iterations: usize,
    outer_iterations: usize,
    shots_used: u64,
}

fn dispatch_entries(x: &DispatchVector<f64>) -> Vec<DispatchEntry> {
    x.layout
        .slots()
        .zip(&x.values)
        .map(|(s, &value)| DispatchEntry { kind: s.kind.as_str(), device: s.device, t: s.t, value })
        .collect()
}

const ITER_HEADER: [&str; 13] =
    ["seed", "outer", "inner", "iteration", "shots", "shots_total", "j_eff", "j_exact", "grad_norm_sq", "sigma2", "sigma2_eff", "eta", "lipschitz"];
const OUTER_HEADER: [&str; 15] = [
    "seed",
    "outer",
    "iterations",
    "candidates",
    "candidate_score",
    "candidate_cost",
    "feasible_cost",
    "best_cost",
    "max_residual",
    "j_star",
    "j_star_exact",
    "alpha",
    "gamma",
    "mu",
    "rho_ramp",
];
pub const METRICS_HEADER: [&str; 10] =
    ["method", "seed", "cost", "cost_pu", "utilization", "violation_rate", "max_residual", "iterations", "outer_iterations", "shots_used"];

fn iteration_rows(seed: u64, log: &IterationLog) -> Vec<Vec<String>> {
    log.rows
        .iter()
        .map(|r| {
            vec![
                seed.to_string(),
                r.outer.to_string(),
                r.inner.to_string(),
                r.iteration.to_string(),
                r.shots.to_string(),
                r.shots_total.to_string(),
                num(r.j_eff),
                num(r.j_exact),
                num(r.grad_norm_sq),
                opt_num(r.sigma2),
                opt_num(r.sigma2_eff),
                num(r.eta),
                num(r.lipschitz),
            ]
        })
        .collect()
}

fn outer_rows(seed: u64, log: &IterationLog) -> Vec<Vec<String>> {
    log.outers
        .iter()
        .map(|o| {
            vec![
                seed.to_string(),
                o.outer.to_string(),
                o.iterations.to_string(),
                o.candidates.to_string(),
                num(o.candidate_score),
                num(o.candidate_cost),
                num(o.feasible_cost),
                num(o.best_cost),
                num(o.max_residual),
                num(o.j_star),
                o.j_star_exact.to_string(),
                num(o.alpha),
                num(o.gamma),
                num(o.mu),
                num(o.rho_ramp),
            ]
        })
        .collect()
}

pub fn write_ptdf(path: &Path, case: &GridCase, model: &SensitivityModel<f64>) -> Result<()> {
    let rows: Vec<Vec<String>> = case
        .branches
        .iter()
        .enumerate()
        .flat_map(|(l, br)| {
            (0..case.num_buses()).map(move |b| {
                vec![l.to_string(), br.from_bus.to_string(), br.to_bus.to_string(), b.to_string(), num(model.factor(l, b))]
            })
        })
        .collect();
    write_csv(path, &["branch", "from_bus", "to_bus", "bus", "factor"], &rows)
}

fn hybrid_runs(case: &GridCase, configs: &[OptimizerConfig]) -> Result<Vec<(DispatchSolution64, IterationLog)>> {
    configs.par_iter().map(|c| hybrid_dispatch::<f64>(case, c).map_err(BenchError::from)).collect()
}

pub fn solve(cfg: &ExperimentConfig) -> Result<String> {
    let start = Instant::now();
    let case = cfg.load_case()?;
    let model = build_ptdf::<f64>(&case)?;
    let classical = anchor(&case, &model)?;
    let anchor_cost = classical.cost;
    let shots = cfg.solve_shots();
    let configs: Vec<OptimizerConfig> = cfg.seeds.iter().map(|&s| cfg.optimizer_for(s, shots)).collect();
    let runs = hybrid_runs(&case, &configs)?;
    let solve_time = start.elapsed().as_secs_f64();

    let set = FeasibleSet::from_case(&case, &model, &case.scenarios);
    let (_, enc) = build_hamiltonian(&case, &model, cfg.bits, &cfg.optimizer.penalty)?;
    let out = &cfg.out;
    ensure_dir(out)?;

    let mut metrics = vec![vec![
        CLASSICAL.to_string(),
        String::new(),
        num(anchor_cost),
        num(per_unit(anchor_cost, anchor_cost)),
        num(classical.utilization),
        num(0.0),
        num(classical.residuals.max()),
        classical.iterations.to_string(),
        "1".into(),
        "0".into(),
    ]];
    let (mut iters, mut outers, mut records) = (Vec::new(), Vec::new(), Vec::new());
    for ((sol, log), &seed) in runs.iter().zip(&cfg.seeds) {
        let dispatch = sol.dispatch.to_f64();
        metrics.push(vec![
            PI_HQCD.to_string(),
            seed.to_string(),
            num(sol.cost),
            num(per_unit(sol.cost, anchor_cost)),
            num(sol.utilization),
            opt_num(raw_violation_rate(&set, &enc, &sol.bitstring)),
            num(sol.residuals.max()),
            sol.iterations.to_string(),
            sol.outer_iterations.to_string(),
            sol.shots_used.to_string(),
        ]);
        iters.extend(iteration_rows(seed, log));
        outers.extend(outer_rows(seed, log));
        records.push(SolutionRecord {
            seed,
            cost: sol.cost,
            cost_pu: per_unit(sol.cost, anchor_cost),
            utilization: sol.utilization,
            residuals: &sol.residuals,
            bitstring: &sol.bitstring,
            theta: &sol.theta,
            dispatch: dispatch_entries(&dispatch),
            config_hash: &sol.config_hash,
            iterations: sol.iterations,
            outer_iterations: sol.outer_iterations,
            shots_used: sol.shots_used,
        });
    }
    write_csv(&out.join("metrics.csv"), &METRICS_HEADER, &metrics)?;
    write_csv(&out.join("iterations.csv"), &ITER_HEADER, &iters)?;
    write_csv(&out.join("outer.csv"), &OUTER_HEADER, &outers)?;
    write_json(&out.join("solution.json"), &records)?;
    write_ptdf(&out.join("ptdf.csv"), &case, &model)?;
    write_manifest(out, cfg, Some(configs[0].hash_with(&case)))?;
    write_timing(out, &[("solve_s", solve_time), ("total_s", start.elapsed().as_secs_f64())])?;

    let costs: Vec<f64> = runs.iter().map(|r| r.0.cost).collect();
    let util: Vec<f64> = runs.iter().map(|r| r.0.utilization).collect();
    let worst = runs.iter().map(|r| r.0.residuals.max()).fold(0.0, f64::max);
    Ok(format!(
        "case {} | {} seeds | N = {} qubits\nclassical anchor cost {:.6}\ncost {:.6} +- {:.6} ({:.4} p.u.)\nrenewable utilization {:.4}\nmax residual {:.3e}\nwrote {}\n",
        case.name,
        cfg.seeds.len(),
        enc.num_qubits(),
        anchor_cost,
        mean(&costs),
        std_dev(&costs),
        mean(&costs) / anchor_cost,
        mean(&util),
        worst,
        out.display()
    ))
}

pub fn variance_rows(cfg: &ExperimentConfig) -> Result<(Vec<VarianceRow>, Vec<VarianceRow>)> {
    let v = &cfg.variance;
    let n_list = v.n_list();
    if let Some(&n) = n_list.iter().find(|&&n| n > MAX_QUBITS) {
        return Err(pihqcd::error::SimError::TooManyQubits { requested: n, cap: MAX_QUBITS }.into());
    }
    let topo = gradient_variance_probe::<f64>(AnsatzFamily::Topology, &n_list, DepthRule::Fixed(v.depth), v.trials, v.seed)?;
    let generic = gradient_variance_probe::<f64>(AnsatzFamily::AllToAll, &n_list, DepthRule::PerQubit(1.0), v.trials, v.seed)?;
    Ok((topo, generic))
}

pub fn variance_study(cfg: &ExperimentConfig) -> Result<String> {
    let start = Instant::now();
    let (topo, generic) = variance_rows(cfg)?;
    let out = &cfg.out;
    ensure_dir(out)?;
    let rows: Vec<Vec<String>> = topo
        .iter()
        .chain(&generic)
        .map(|r| vec![r.family.as_str().into(), r.n.to_string(), r.depth.to_string(), num(r.variance), r.trials.to_string(), r.seed.to_string()])
        .collect();
    write_csv(&out.join("variance.csv"), &["family", "n", "depth", "variance", "trials", "seed"], &rows)?;
    let (st, sg) = (log_log_slope(&topo), log_log_slope(&generic));
    let v = &cfg.variance;
    let slope_rows: Vec<Vec<String>> = [(AnsatzFamily::Topology, st), (AnsatzFamily::AllToAll, sg)]
        .iter()
        .map(|(f, s)| vec![f.as_str().into(), num(*s), v.n_min.to_string(), v.n_max.to_string(), v.trials.to_string()])
        .collect();
    write_csv(&out.join("slopes.csv"), &["family", "slope", "n_min", "n_max", "trials"], &slope_rows)?;
    write_manifest(out, cfg, None)?;
    write_timing(out, &[("total_s", start.elapsed().as_secs_f64())])?;
    Ok(format!(
        "log-log slope of gradient variance over N = {}..{}\n  topology   {st:.4}\n  all_to_all {sg:.4}\nwrote {}\n",
        v.n_min,
        v.n_max,
        out.display()
    ))
}

/// Terminal feasible cost per method, shot level and seed; `None` shots is the exact anchor.
pub struct SweepPoint {
    pub method: &'static str,
    pub shots: Option<u64>,
    pub seed: u64,
    pub cost: f64,
    pub degradation: f64,
}

pub fn sweep_points(cfg: &ExperimentConfig, case: &GridCase) -> Result<Vec<SweepPoint>> {
    let levels: Vec<Option<u64>> = std::iter::once(None).chain(cfg.noise_grid.iter().map(|&s| Some(s))).collect();
    let mut jobs = Vec::new();
    for method in [PI_HQCD, GENERIC_VQA] {
        for &shots in &levels {
            for &seed in &cfg.seeds {
                let base = cfg.optimizer_for(seed, shots);
                let c = if method == PI_HQCD { base } else { generic_settings(&base) };
                jobs.push((method, shots, seed, c));
            }
        }
    }
    let costs: Vec<f64> =
        jobs.par_iter().map(|(_, _, _, c)| hybrid_dispatch::<f64>(case, c).map(|r| r.0.cost).map_err(BenchError::from)).collect::<Result<_>>()?;
    let exact = |method: &str, seed: u64| -> f64 {
        jobs.iter().zip(&costs).find(|((m, s, sd, _), _)| *m == method && s.is_none() && *sd == seed).map(|(_, &c)| c).expect("exact run present")
    };
    Ok(jobs
        .iter()
        .zip(&costs)
        .map(|(&(method, shots, seed, _), &cost)| {
            let e = exact(method, seed);
            SweepPoint { method, shots, seed, cost, degradation: (cost - e) / e }
        })
        .collect())
}

fn shots_label(s: Option<u64>) -> String {
    s.map_or("exact".into(), |s| s.to_string())
}

pub fn noise_sweep(cfg: &ExperimentConfig) -> Result<String> {
    let start = Instant::now();
    let case = cfg.load_case()?;
    let points = sweep_points(cfg, &case)?;
    let out = &cfg.out;
    ensure_dir(out)?;
    let rows: Vec<Vec<String>> =
        points.iter().map(|p| vec![p.method.into(), shots_label(p.shots), p.seed.to_string(), num(p.cost), num(p.degradation)]).collect();
    write_csv(&out.join("noise_sweep.csv"), &["method", "shots", "seed", "cost", "degradation"], &rows)?;

    let levels: Vec<Option<u64>> = std::iter::once(None).chain(cfg.noise_grid.iter().map(|&s| Some(s))).collect();
    let noisiest = cfg.noise_grid.iter().copied().min();
    let (mut summary, mut trend, mut text) = (Vec::new(), Vec::new(), String::new());
    for method in [PI_HQCD, GENERIC_VQA] {
        let (mut inv_shots, mut mean_deg) = (Vec::new(), Vec::new());
        for &level in &levels {
            let sel: Vec<&SweepPoint> = points.iter().filter(|p| p.method == method && p.shots == level).collect();
            let deg: Vec<f64> = sel.iter().map(|p| p.degradation).collect();
            let cost: Vec<f64> = sel.iter().map(|p| p.cost).collect();
            summary.push(vec![
                method.into(),
                shots_label(level),
                num(mean(&cost)),
                num(mean(&deg)),
                num(median(&deg)),
                num(std_dev(&deg)),
                deg.len().to_string(),
            ]);
            inv_shots.push(level.map_or(0.0, |s| 1.0 / s as f64));
            mean_deg.push(mean(&deg));
        }
        let at_noisiest: Vec<f64> = points.iter().filter(|p| p.method == method && p.shots == noisiest).map(|p| p.degradation).collect();
        let rho = spearman(&inv_shots, &mean_deg);
        trend.push(vec![method.into(), num(rho), shots_label(noisiest), num(median(&at_noisiest))]);
        text.push_str(&format!(
            "  {method:<12} median degradation at S = {}: {:.4}, Spearman(1/S, mean degradation) = {rho:.3}\n",
            shots_label(noisiest),
            median(&at_noisiest)
        ));
    }
    write_csv(
        &out.join("noise_summary.csv"),
        &["method", "shots", "mean_cost", "mean_degradation", "median_degradation", "std_degradation", "seeds"],
        &summary,
    )?;
    write_csv(&out.join("noise_trend.csv"), &["method", "spearman", "noisiest_shots", "median_degradation_noisiest"], &trend)?;
    write_manifest(out, cfg, Some(cfg.optimizer_for(0, None).hash_with(&case)))?;
    write_timing(out, &[("total_s", start.elapsed().as_secs_f64())])?;
    Ok(format!("noise sweep on {} over S = {:?}\n{text}wrote {}\n", case.name, cfg.noise_grid, out.display()))
}

/// Per-iteration values of one method and seed against a reference level.
pub struct Trace {
    pub method: &'static str,
    pub seed: u64,
    /// `energy` for the Ising methods, `cost` for the continuous dispatch.
    pub metric: &'static str,
    pub values: Vec<f64>,
    pub reference: f64,
}

impl Trace {
    /// First iteration within 2% of the reference.
    pub fn iterations_to_2pct(&self) -> Option<usize> {
        self.values.iter().position(|v| v - self.reference <= 0.02 * self.reference.abs())
    }
}

/// Ground energy of the initial Hamiltonian: exhaustive when it fits, else the best of the annealing seeds.
pub fn oracle_energy(h: &IsingHamiltonian64, cfg: &ExperimentConfig) -> f64 {
    if h.num_qubits() <= MAX_QUBITS {
        brute_force(h).map(|r| r.energy).unwrap_or(f64::NAN)
    } else {
        cfg.seeds
            .iter()
            .map(|&s| simulated_annealing(h, AnnealSchedule::new(cfg.anneal_sweeps.max(1) * 10), s).energy)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn convergence_traces(cfg: &ExperimentConfig, case: &GridCase) -> Result<Vec<Trace>> {
    let model = build_ptdf::<f64>(case)?;
    let (h, _) = build_hamiltonian(case, &model, cfg.bits, &cfg.optimizer.penalty)?;
    let oracle = oracle_energy(&h, cfg);
    let shots = cfg.solve_shots();
    let mut configs = Vec::new();
    for &seed in &cfg.seeds {
        let base = cfg.optimizer_for(seed, shots);
        configs.push((PI_HQCD, seed, base.clone()));
        configs.push((GENERIC_VQA, seed, generic_settings(&base)));
    }
    let runs: Vec<Vec<f64>> = configs
        .par_iter()
        .map(|(_, _, c)| hybrid_dispatch::<f64>(case, c).map(|(_, log)| log.rows.iter().map(|r| r.j_exact).collect()).map_err(BenchError::from))
        .collect::<Result<_>>()?;
    let mut traces: Vec<Trace> = configs
        .iter()
        .zip(runs)
        .map(|((method, seed, _), values)| Trace { method, seed: *seed, metric: "energy", values, reference: oracle })
        .collect();
    let schedule = AnnealSchedule::new(cfg.anneal_sweeps.max(1));
    for &seed in &cfg.seeds {
        let (_, values) = simulated_annealing_trace(&h, schedule, seed);
        traces.push(Trace { method: ANNEALING, seed, metric: "energy", values, reference: oracle });
    }
    let (classical, costs) = classical_dispatch_trace(case, &model, &case.scenarios, &ClassicalConfig::default())?;
    for &seed in &cfg.seeds {
        traces.push(Trace { method: CLASSICAL, seed, metric: "cost", values: costs.clone(), reference: classical.cost });
    }
    traces.sort_by_key(|t| (method_rank(t.method), t.seed));
    Ok(traces)
}

fn method_rank(m: &str) -> usize {
    [PI_HQCD, GENERIC_VQA, ANNEALING, CLASSICAL].iter().position(|x| *x == m).unwrap_or(usize::MAX)
}

pub fn convergence_compare(cfg: &ExperimentConfig) -> Result<String> {
    let start = Instant::now();
    let case = cfg.load_case()?;
    let traces = convergence_traces(cfg, &case)?;
    let out = &cfg.out;
    ensure_dir(out)?;
    let rows: Vec<Vec<String>> = traces
        .iter()
        .flat_map(|t| {
            t.values.iter().enumerate().map(move |(i, v)| {
                vec![t.method.into(), t.seed.to_string(), i.to_string(), t.metric.into(), num(*v), num(t.reference)]
            })
        })
        .collect();
    write_csv(&out.join("traces.csv"), &["method", "seed", "iteration", "metric", "value", "reference"], &rows)?;
    let summary: Vec<Vec<String>> = traces
        .iter()
        .map(|t| {
            vec![
                t.method.into(),
                t.seed.to_string(),
                t.values.len().saturating_sub(1).to_string(),
                t.iterations_to_2pct().map(|i| i.to_string()).unwrap_or_default(),
                num(*t.values.last().unwrap_or(&f64::NAN)),
                num(t.values.iter().cloned().fold(f64::INFINITY, f64::min)),
                num(t.reference),
            ]
        })
        .collect();
    write_csv(
        &out.join("convergence_summary.csv"),
        &["method", "seed", "iterations", "iterations_to_2pct", "final_value", "best_value", "reference"],
        &summary,
    )?;
    write_manifest(out, cfg, Some(cfg.optimizer_for(0, cfg.solve_shots()).hash_with(&case)))?;
    write_timing(out, &[("total_s", start.elapsed().as_secs_f64())])?;

    let mut text = format!("convergence on {} (oracle energy {})\n", case.name, num(traces[0].reference));
    for m in [PI_HQCD, GENERIC_VQA, ANNEALING, CLASSICAL] {
        let hits: Vec<f64> = traces.iter().filter(|t| t.method == m).filter_map(|t| t.iterations_to_2pct()).map(|i| i as f64).collect();
        let total = traces.iter().filter(|t| t.method == m).count();
        text.push_str(&format!(
            "  {m:<20} reached 2% on {}/{total} seeds, median iterations {}\n",
            hits.len(),
            if hits.is_empty() { "-".into() } else { num(median(&hits)) }
        ));
    }
    text.push_str(&format!("wrote {}\n", out.display()));
    Ok(text)
}
