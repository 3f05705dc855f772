use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::encode::test_cases::{bus, gen, load, must_take};
use crate::encode::{IsingHamiltonian, PenaltyConfig};
use crate::grid_model::*;
use crate::hybrid_opt::build_hamiltonian;
use crate::linearize::build_ptdf;

fn random_ising(n: usize, rng: &mut ChaCha8Rng) -> IsingHamiltonian<f64> {
    let mut h = IsingHamiltonian::zero(n);
    for f in h.fields.iter_mut() {
        *f = rng.random_range(-1.0..1.0);
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.4) {
                h.couplings.insert((i, j), rng.random_range(-1.0..1.0));
            }
        }
    }
    h
}

/// Two generators on one bus serving `demand`, pure quadratic costs.
fn two_gen_case(a1: f64, a2: f64, demand: f64) -> GridCase {
    GridCase {
        name: "two_gen".into(),
        horizon: 1,
        buses: vec![bus(0, true)],
        branches: vec![],
        generators: vec![gen(0, 0.0, 10.0, a1, 0.0), gen(0, 0.0, 10.0, a2, 0.0)],
        storage_units: vec![],
        demand_profiles: vec![load(0, vec![demand])],
        scenarios: vec![must_take(0, vec![0.0])],
    }
}

fn case3() -> GridCase {
    load_case(fixture_path("case3.json")).unwrap()
}

#[test]
fn brute_force_single_field() {
    let mut h = IsingHamiltonian::zero(1);
    h.fields[0] = 1.0;
    let r = brute_force(&h).unwrap();
    // z = -1 is bit 1
    assert_eq!((r.index, r.energy, r.bitstring.clone()), (1, -1.0, vec![true]));
    assert_eq!(r.certificate, Certificate::Exhaustive);
}

#[test]
fn brute_force_ties_go_to_lowest_index() {
    let mut h = IsingHamiltonian::zero(3);
    h.constant = 2.5;
    let r = brute_force(&h).unwrap();
    assert_eq!((r.index, r.energy), (0, 2.5));
}

#[test]
fn brute_force_matches_table_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=10 {
        let h = random_ising(n, &mut rng);
        let r = brute_force(&h).unwrap();
        let min = (0..1usize << n).map(|i| h.energy_index(i)).fold(f64::INFINITY, f64::min);
        assert!((r.energy - min).abs() < 1e-12);
        assert!((h.energy(&r.bitstring).unwrap() - r.energy).abs() < 1e-12);
    }
}

#[test]
fn annealing_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = random_ising(10, &mut rng);
    let a = simulated_annealing(&h, AnnealSchedule::new(200), 9);
    let b = simulated_annealing(&h, AnnealSchedule::new(200), 9);
    assert_eq!(a, b);
    assert_eq!(a.certificate, Certificate::Heuristic);
    assert!((h.energy(&a.bitstring).unwrap() - a.energy).abs() < 1e-12);
    assert_eq!(index_to_bits(a.index, 10), a.bitstring);
}

#[test]
fn zero_temperature_is_greedy_descent() {
    // independent fields: greedy flips reach the exact ground state
    let mut h = IsingHamiltonian::zero(6);
    h.fields = vec![1.0, -2.0, 0.5, -0.1, 3.0, -1.0];
    let r = simulated_annealing(&h, AnnealSchedule { sweeps: 3, t_start: Some(0.0), t_end: Some(0.0) }, 0);
    assert_eq!(r.energy, brute_force(&h).unwrap().energy);
}

#[test]
fn zero_temperature_never_goes_uphill() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_ising(8, &mut rng);
    let start = h.energy(&[false; 8]).unwrap();
    let r = simulated_annealing(&h, AnnealSchedule { sweeps: 1, t_start: Some(0.0), t_end: Some(0.0) }, 0);
    assert!(r.energy <= start);
}

#[test]
fn annealing_gap_small_at_twelve_spins() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut gaps: Vec<f64> = (0..15)
        .map(|s| {
            let h = random_ising(12, &mut rng);
            let exact = brute_force(&h).unwrap().energy;
            let sa = simulated_annealing(&h, AnnealSchedule::new(500), s).energy;
            (sa - exact) / exact.abs()
        })
        .collect();
    gaps.sort_by(f64::total_cmp);
    assert!(gaps[gaps.len() / 2] <= 0.05, "{gaps:?}");
}

#[test]
fn annealing_finds_case3_ground_state() {
    let c = case3();
    let model = build_ptdf::<f64>(&c).unwrap();
    let (h, _) = build_hamiltonian(&c, &model, 2, &PenaltyConfig::default()).unwrap();
    let exact = brute_force(&h).unwrap().energy;
    let hits = (0..20).filter(|&s| (simulated_annealing(&h, AnnealSchedule::new(2000), s).energy - exact).abs() < 1e-9).count();
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn classical_two_generator_closed_form() {
    // minimize a1 g1^2 + a2 g2^2 s.t. g1 + g2 = L: g1 = a2 L / (a1 + a2)
    let (a1, a2, l) = (1.0, 3.0, 4.0);
    let c = two_gen_case(a1, a2, l);
    let model = build_ptdf::<f64>(&c).unwrap();
    let sol = classical_dispatch(&c, &model, &c.scenarios, &ClassicalConfig::default()).unwrap();
    let g1 = sol.dispatch.get(VarKind::Gen, 0, 0);
    let g2 = sol.dispatch.get(VarKind::Gen, 1, 0);
    assert!((g1 - a2 * l / (a1 + a2)).abs() < 1e-6, "{g1}");
    assert!((g2 - a1 * l / (a1 + a2)).abs() < 1e-6, "{g2}");
    assert!((sol.cost - a1 * a2 * l * l / (a1 + a2)).abs() < 1e-5);
}

#[test]
fn classical_dispatch_is_kkt_on_fixtures() {
    for name in ["case2.json", "case3.json", "case5.json"] {
        let c = load_case(fixture_path(name)).unwrap();
        let model = build_ptdf::<f64>(&c).unwrap();
        let cfg = ClassicalConfig::default();
        let sol = classical_dispatch(&c, &model, &c.scenarios, &cfg).unwrap();
        let set = FeasibleSet::from_case(&c, &model, &c.scenarios);
        assert!(sol.residuals.max() <= 1e-6, "{name}");
        assert!(kkt_residual(&c, &set, &sol.dispatch, &cfg.projection).unwrap() <= 1e-6, "{name}");
        assert_eq!(per_unit(sol.cost, sol.cost), 1.0);
    }
}

#[test]
fn classical_f32_close_to_f64() {
    let c = case3();
    let m64 = build_ptdf::<f64>(&c).unwrap();
    let m32 = build_ptdf::<f32>(&c).unwrap();
    let a = classical_dispatch(&c, &m64, &c.scenarios, &ClassicalConfig::default()).unwrap();
    let b = classical_dispatch(&c, &m32, &c.scenarios, &ClassicalConfig::default()).unwrap();
    assert!((a.cost - b.cost as f64).abs() <= 1e-3 * a.cost.abs());
}

#[test]
fn generic_config_flags() {
    let base = OptimizerConfig { beta: 50.0, lambda: 2.0, depth: 3, ..OptimizerConfig::default() };
    let (family, c) = generic_vqa_config(&base);
    assert_eq!(family, AnsatzFamily::AllToAll);
    assert_eq!((c.ansatz, c.beta, c.lambda, c.depth), (AnsatzFamily::AllToAll, 0.0, 0.0, 3));
    assert_eq!(c.penalty.inequality_mode, InequalityMode::Literal);
}

#[test]
fn traces_start_at_initial_value_and_end_at_result() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_ising(8, &mut rng);
    let (r, trace) = simulated_annealing_trace(&h, AnnealSchedule::new(50), 1);
    assert_eq!(trace.len(), 51);
    assert!((trace[0] - h.energy(&[false; 8]).unwrap()).abs() < 1e-12);
    assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    assert!((trace[50] - r.energy).abs() < 1e-9);

    let c = case3();
    let model = build_ptdf::<f64>(&c).unwrap();
    let (sol, costs) = classical_dispatch_trace(&c, &model, &c.scenarios, &ClassicalConfig::default()).unwrap();
    assert_eq!(costs.len(), sol.iterations + 1);
    assert_eq!(*costs.last().unwrap(), sol.cost);
}
