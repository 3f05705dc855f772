use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::state::gate_list;
use super::*;
use crate::encode::test_cases::{bus, gen, load, must_take};
use crate::encode::{build_encoding, IsingHamiltonian, PauliTerm};
use crate::error::SimError;
use crate::grid_model::*;

fn random_ising(n: usize, rng: &mut ChaCha8Rng) -> IsingHamiltonian<f64> {
    let mut h = IsingHamiltonian::zero(n);
    h.constant = rng.random_range(-1.0..1.0);
    for f in h.fields.iter_mut() {
        *f = rng.random_range(-1.0..1.0);
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.6) {
                h.couplings.insert((i, j), rng.random_range(-1.0..1.0));
            }
        }
    }
    h
}

fn random_theta(ansatz: &AnsatzSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..ansatz.num_params()).map(|_| rng.random_range(-3.0..3.0)).collect()
}

fn random_ansatz(n: usize, depth: usize, rng: &mut ChaCha8Rng) -> AnsatzSpec {
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|_| rng.random_bool(0.5)).collect();
    AnsatzSpec::new(n, depth, edges, AnsatzFamily::Topology).unwrap()
}

fn z_field(n: usize, q: usize) -> PreparedHamiltonian<f64> {
    PreparedHamiltonian::from_terms(n, 0.0, vec![PauliTerm { support: vec![q], coeff: 1.0 }]).unwrap()
}

fn case3() -> GridCase {
    load_case(fixture_path("case3.json")).unwrap()
}

/// Plain dense-matrix product of every gate, used as an independent oracle.
fn dense_state(ansatz: &AnsatzSpec, theta: &[f64]) -> Vec<num_complex::Complex64> {
    use num_complex::Complex64 as C;
    let n = ansatz.num_qubits;
    let mut psi = vec![C::new(0.0, 0.0); 1 << n];
    psi[0] = C::new(1.0, 0.0);
    for (g, &t) in gate_list(ansatz).iter().zip(theta) {
        let mut out = vec![C::new(0.0, 0.0); 1 << n];
        match *g {
            super::state::Gate::Ry(q) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                for (i, &a) in psi.iter().enumerate() {
                    let j = i ^ (1 << q);
                    if (i >> q) & 1 == 0 {
                        out[i] += a * c;
                        out[j] += a * s;
                    } else {
                        out[i] += a * c;
                        out[j] -= a * s;
                    }
                }
            }
            super::state::Gate::Rzz(a, b) => {
                for (i, &amp) in psi.iter().enumerate() {
                    let z = if ((i >> a) ^ (i >> b)) & 1 == 0 { 1.0 } else { -1.0 };
                    out[i] = amp * C::from_polar(1.0, -z * t / 2.0);
                }
            }
        }
        psi = out;
    }
    psi
}

#[test]
fn zero_angles_give_all_zero_state() {
    let a = AnsatzSpec::all_to_all(4, 3);
    let psi = build_state(&a, &vec![0.0; a.num_params()]).unwrap();
    assert!((psi.amplitudes[0].re - 1.0f64).abs() < 1e-15);
    assert!(psi.amplitudes[1..].iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn half_turn_flips_single_qubit() {
    let a = AnsatzSpec::linear_chain(1, 1);
    let psi = build_state(&a, &[std::f64::consts::PI]).unwrap();
    assert!((psi.probabilities()[1] - 1.0).abs() < 1e-15);
}

#[test]
fn state_matches_dense_gate_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=5 {
        let a = random_ansatz(n, 2, &mut rng);
        let theta = random_theta(&a, &mut rng);
        let fast = build_state(&a, &theta).unwrap();
        let slow = dense_state(&a, &theta);
        for (x, y) in fast.amplitudes.iter().zip(&slow) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}

#[test]
fn norm_preserved_on_fixture_circuits() {
    let case = case3();
    let enc = build_encoding(&case, 2).unwrap();
    let a = topology_ansatz(&case, &enc, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let psi = build_state(&a, &random_theta(&a, &mut rng)).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }
    let small = AnsatzSpec::all_to_all(2, 2);
    for _ in 0..100 {
        let psi = build_state(&small, &random_theta(&small, &mut rng)).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn f32_state_is_normalised() {
    let a = AnsatzSpec::all_to_all(5, 2);
    let theta: Vec<f32> = (0..a.num_params()).map(|k| 0.37 * k as f32).collect();
    let psi = build_state(&a, &theta).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-5);
}

#[test]
fn parameter_count_and_layout() {
    let a = AnsatzSpec::new(3, 2, [(0, 1), (1, 2), (1, 0)], AnsatzFamily::Topology).unwrap();
    assert_eq!(a.entangler_edges, vec![(0, 1), (1, 2)]);
    assert_eq!(a.num_params(), 2 * (3 + 2));
    assert_eq!(a.rotation_index(1, 2), 7);
    assert!(matches!(AnsatzSpec::new(2, 1, [(0, 2)], AnsatzFamily::Topology), Err(SimError::BadEdge(0, 2))));
    assert!(matches!(AnsatzSpec::new(2, 1, [(1, 1)], AnsatzFamily::Topology), Err(SimError::BadEdge(1, 1))));
}

#[test]
fn wrong_parameter_length_rejected() {
    let a = AnsatzSpec::linear_chain(2, 1);
    assert!(matches!(build_state(&a, &[0.0; 2]), Err(SimError::ParamLength { expected: 3, found: 2 })));
}

#[test]
fn qubit_cap_enforced() {
    assert!(matches!(
        StateVector::<f64>::zero_state(MAX_QUBITS + 1),
        Err(SimError::TooManyQubits { requested: 25, cap: 24 })
    ));
    assert!(check_qubits(MAX_QUBITS).is_ok());
}

#[test]
fn family_names_round_trip() {
    for f in [AnsatzFamily::Topology, AnsatzFamily::LinearChain, AnsatzFamily::AllToAll] {
        assert_eq!(f.as_str().parse::<AnsatzFamily>().unwrap(), f);
    }
    assert!("ring".parse::<AnsatzFamily>().is_err());
}

#[test]
fn two_bus_minimal_topology_has_one_edge() {
    let case = GridCase {
        name: "pair".into(),
        horizon: 1,
        buses: vec![bus(0, true), bus(1, false)],
        branches: vec![Branch { from_bus: 0, to_bus: 1, reactance: 0.1, flow_limit: 10.0 }],
        generators: vec![gen(0, 0.0, 1.0, 0.0, 1.0), gen(1, 0.0, 1.0, 0.0, 2.0)],
        storage_units: vec![],
        demand_profiles: vec![load(1, vec![1.0])],
        scenarios: vec![must_take(0, vec![0.0])],
    };
    let enc = build_encoding(&case, 1).unwrap();
    let a = topology_ansatz(&case, &enc, 1);
    assert_eq!(a.num_qubits, 2);
    assert_eq!(a.entangler_edges, vec![(0, 1)]);
}

#[test]
fn isolated_variables_only_chain_inside_groups() {
    let case = GridCase {
        name: "single".into(),
        horizon: 1,
        buses: vec![bus(0, true)],
        branches: vec![],
        generators: vec![gen(0, 0.0, 7.0, 0.0, 1.0), gen(0, 0.0, 7.0, 0.0, 2.0)],
        storage_units: vec![],
        demand_profiles: vec![load(0, vec![3.0])],
        scenarios: vec![must_take(0, vec![0.0])],
    };
    let enc = build_encoding(&case, 3).unwrap();
    let a = topology_ansatz(&case, &enc, 1);
    assert_eq!(a.entangler_edges, vec![(0, 1), (1, 2), (3, 4), (4, 5)]);
}

#[test]
fn case3_topology_is_sparser_than_complete_graph() {
    let case = case3();
    let enc = build_encoding(&case, 2).unwrap();
    let a = topology_ansatz(&case, &enc, 1);
    let n = a.num_qubits;
    assert!(a.entangler_edges.len() < n * (n - 1) / 2);
    assert!(a.max_degree() < n - 1);
    // storage charge bits link across timesteps
    let storage: Vec<_> = enc.variables.iter().filter(|v| v.owner.kind == crate::encode::BitKind::Charge).collect();
    assert_eq!(storage.len(), 2);
    assert!(a.entangler_edges.contains(&(storage[0].first_qubit, storage[1].first_qubit)));
}

#[test]
fn basis_expectation_is_table_entry() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_ising(4, &mut rng);
    let psi = StateVector::<f64>::zero_state(4).unwrap();
    let e = exact_expectation(&psi, &h).unwrap();
    assert!((e - h.energy(&[false; 4]).unwrap()).abs() < 1e-12);
    assert!(matches!(
        exact_expectation(&StateVector::<f64>::zero_state(3).unwrap(), &h),
        Err(SimError::Dimension { state: 3, operator: 4 })
    ));
}

#[test]
fn uniform_state_averages_out_single_field() {
    let a = AnsatzSpec::linear_chain(3, 1);
    let mut theta = vec![std::f64::consts::FRAC_PI_2; 3];
    theta.extend([0.0, 0.0]);
    let psi = build_state(&a, &theta).unwrap();
    let mut h = IsingHamiltonian::zero(3);
    h.fields[1] = 2.5;
    h.constant = 0.75;
    assert!((exact_expectation(&psi, &h).unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn cos_theta_landscape_and_gradient() {
    let a = AnsatzSpec::linear_chain(1, 1);
    let h = z_field(1, 0);
    for &t in &[0.0, 0.4, 1.3, 2.9] {
        let j = expectation(&build_state(&a, &[t]).unwrap(), &h).unwrap();
        assert!((j - f64::cos(t)).abs() < 1e-14);
    }
    let half = std::f64::consts::FRAC_PI_2;
    let ps = param_shift_gradient(&a, &[half], &h, GradientMode::Exact).unwrap();
    assert!((ps.gradient[0] + 1.0).abs() < 1e-14);
    assert!((adjoint_gradient(&a, &[half], &h).unwrap()[0] + 1.0).abs() < 1e-14);
}

#[test]
fn exact_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in 1..=8 {
        let a = random_ansatz(n, 2, &mut rng);
        let h = PreparedHamiltonian::new(&random_ising(n, &mut rng)).unwrap();
        let theta = random_theta(&a, &mut rng);
        let g = param_shift_gradient(&a, &theta, &h, GradientMode::Exact).unwrap().gradient;
        let step = 1e-5;
        let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for k in 0..theta.len() {
            let mut tp = theta.clone();
            tp[k] += step;
            let mut tm = theta.clone();
            tm[k] -= step;
            let fd = (expectation(&build_state(&a, &tp).unwrap(), &h).unwrap()
                - expectation(&build_state(&a, &tm).unwrap(), &h).unwrap())
                / (2.0 * step);
            let rel = (g[k] - fd).abs() / fd.abs().max(1e-2 * scale).max(1e-8);
            assert!(rel <= 1e-4, "n={n} k={k} shift={} fd={fd}", g[k]);
        }
    }
}

#[test]
fn adjoint_equals_parameter_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [2, 4, 6] {
        let a = random_ansatz(n, 3, &mut rng);
        let h = PreparedHamiltonian::new(&random_ising(n, &mut rng)).unwrap();
        let theta = random_theta(&a, &mut rng);
        let ps = param_shift_gradient(&a, &theta, &h, GradientMode::Exact).unwrap().gradient;
        let adj = exact_gradient(&a, &theta, &h).unwrap().gradient;
        for (x, y) in ps.iter().zip(&adj) {
            assert!((x - y).abs() < 1e-11, "{x} vs {y}");
        }
        assert_eq!(param_shift_component(&a, &theta, &h, 1).unwrap(), ps[1]);
    }
}

#[test]
fn sampling_a_basis_state_is_deterministic() {
    let a = AnsatzSpec::linear_chain(2, 1);
    let psi = build_state(&a, &[0.0, std::f64::consts::PI, 0.0]).unwrap();
    let r = sample(&psi, 500, 1).unwrap();
    assert_eq!(r.labelled_counts(), BTreeMap::from([("01".to_string(), 500)]));
    assert!(matches!(sample(&psi, 0, 1), Err(SimError::ZeroShots)));
}

#[test]
fn uniform_sampling_frequencies() {
    let a = AnsatzSpec::linear_chain(2, 1);
    let h = std::f64::consts::FRAC_PI_2;
    let psi = build_state(&a, &[h, h, 0.0]).unwrap();
    let r = sample(&psi, 100_000, 17).unwrap();
    assert_eq!(r.counts.values().sum::<u64>(), 100_000);
    for i in 0..4 {
        let f = r.counts[&i] as f64 / 1e5;
        assert!((f - 0.25).abs() < 0.01, "outcome {i}: {f}");
    }
    assert_eq!(sample(&psi, 1000, 4).unwrap(), sample(&psi, 1000, 4).unwrap());
    assert_ne!(sample(&psi, 1000, 4).unwrap().counts, sample(&psi, 1000, 5).unwrap().counts);
}

#[test]
fn exact_expectation_agrees_with_large_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let a = random_ansatz(10, 2, &mut rng);
    let psi = build_state(&a, &random_theta(&a, &mut rng)).unwrap();
    let h = PreparedHamiltonian::new(&random_ising(10, &mut rng)).unwrap();
    let exact = expectation(&psi, &h).unwrap();
    let est = estimate_expectation(&sample(&psi, 1_000_000, 3).unwrap(), &h);
    assert!((est.mean - exact).abs() <= 3.0 * est.variance.sqrt(), "{} vs {exact}", est.mean);
}

#[test]
fn degenerate_and_maximal_term_variances() {
    let psi = StateVector::<f64>::zero_state(2).unwrap();
    let h = PreparedHamiltonian::new(&{
        let mut h = IsingHamiltonian::zero(2);
        h.fields = vec![1.0, -2.0];
        h.couplings.insert((0, 1), 0.5);
        h
    })
    .unwrap();
    let est = estimate_expectation(&sample(&psi, 64, 0).unwrap(), &h);
    assert!(est.term_variances.iter().all(|&v| v == 0.0));
    assert_eq!(est.variance, 0.0);

    let a = AnsatzSpec::linear_chain(1, 1);
    let plus = build_state(&a, &[std::f64::consts::FRAC_PI_2]).unwrap();
    let z = z_field(1, 0);
    // exactly balanced counts give term mean 0
    let r = ShotResult { num_qubits: 1, counts: BTreeMap::from([(0, 50), (1, 50)]), shots: 100, seed: 0 };
    let est = estimate_expectation(&r, &z);
    assert_eq!(est.term_means, vec![0.0]);
    assert!((est.term_variances[0] - 0.01).abs() < 1e-15);
    assert!(sample(&plus, 10, 0).is_ok());
}

fn exact_energy_variance(psi: &StateVector<f64>, h: &PreparedHamiltonian<f64>) -> f64 {
    let m = expectation(psi, h).unwrap();
    psi.probabilities().iter().zip(&h.energies).map(|(p, e)| p * (e - m).powi(2)).sum()
}

#[test]
fn shot_estimates_concentrate() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let a = random_ansatz(8, 2, &mut rng);
    let psi = build_state(&a, &random_theta(&a, &mut rng)).unwrap();
    let h = PreparedHamiltonian::new(&random_ising(8, &mut rng)).unwrap();
    let exact = expectation(&psi, &h).unwrap();
    let shots = 256;
    let sd = (exact_energy_variance(&psi, &h) / shots as f64).sqrt();
    let inside = (0..100)
        .filter(|&s| (estimate_expectation(&sample(&psi, shots, s).unwrap(), &h).mean - exact).abs() <= 4.0 * sd)
        .count();
    assert!(inside >= 99, "{inside}/100");
}

#[test]
fn shot_gradient_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_ansatz(3, 2, &mut rng);
    let h = PreparedHamiltonian::new(&random_ising(3, &mut rng)).unwrap();
    let theta = random_theta(&a, &mut rng);
    let exact = adjoint_gradient(&a, &theta, &h).unwrap();
    let p = exact.len();
    let reps = 200;
    let draws: Vec<Vec<f64>> = (0..reps)
        .map(|s| param_shift_gradient(&a, &theta, &h, GradientMode::Shots { shots: 128, seed: s }).unwrap().gradient)
        .collect();
    for k in 0..p {
        let mean = draws.iter().map(|g| g[k]).sum::<f64>() / reps as f64;
        let var = draws.iter().map(|g| (g[k] - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - exact[k]).abs() <= 4.0 * (var / reps as f64).sqrt() + 1e-12, "k={k}");
    }
}

#[test]
fn shot_gradient_is_reproducible_and_reports_usage() {
    let a = AnsatzSpec::linear_chain(3, 1);
    let h = z_field(3, 1);
    let theta = vec![0.3, 0.8, -0.4, 0.2, 0.1];
    let mode = GradientMode::Shots { shots: 100, seed: 9 };
    let g1 = param_shift_gradient(&a, &theta, &h, mode).unwrap();
    let g2 = param_shift_gradient(&a, &theta, &h, mode).unwrap();
    assert_eq!(g1, g2);
    assert_eq!(g1.shots_used, 2 * 5 * 100);
    assert_eq!(g1.variance.as_ref().unwrap().len(), 5);
    assert_eq!(g1.term_variances.as_ref().unwrap().len(), 1);
    assert!(matches!(
        param_shift_gradient(&a, &theta, &h, GradientMode::Shots { shots: 0, seed: 0 }),
        Err(SimError::ZeroShots)
    ));
}

#[test]
fn estimator_variance_scales_inversely_with_shots() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let a = random_ansatz(4, 2, &mut rng);
    let psi = build_state(&a, &random_theta(&a, &mut rng)).unwrap();
    let h = PreparedHamiltonian::new(&random_ising(4, &mut rng)).unwrap();
    let reps = 400u64;
    let scaled: Vec<f64> = [64u64, 256, 1024, 4096]
        .iter()
        .map(|&s| {
            let means: Vec<f64> =
                (0..reps).map(|r| estimate_expectation(&sample(&psi, s, derive_seed(s, r)).unwrap(), &h).mean).collect();
            let m = means.iter().sum::<f64>() / reps as f64;
            s as f64 * means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64
        })
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    assert!(hi / lo <= 2.0, "{scaled:?}");
}

#[test]
fn derived_seeds_differ_per_stream() {
    let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|s| derive_seed(42, s)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
}

#[test]
fn variance_probe_shape_and_determinism() {
    let rows = gradient_variance_probe::<f64>(AnsatzFamily::Topology, &[2, 3, 4], DepthRule::Fixed(2), 30, 5).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.variance > 0.0 && r.trials == 30 && r.depth == 2));
    assert_eq!(rows, gradient_variance_probe::<f64>(AnsatzFamily::Topology, &[2, 3, 4], DepthRule::Fixed(2), 30, 5).unwrap());
    let deep = gradient_variance_probe::<f64>(AnsatzFamily::AllToAll, &[3], DepthRule::PerQubit(1.0), 30, 5).unwrap();
    assert_eq!(deep[0].depth, 3);
}

#[test]
fn path_grid_register_matches_bus_count() {
    for n in [2, 5, 9] {
        let case = path_grid_case(n);
        case.validate().unwrap();
        let h = path_grid_hamiltonian::<f64>(n);
        assert_eq!(h.num_qubits(), n);
        let norm: f64 = h.fields.iter().map(|x| x * x).sum::<f64>() + h.couplings.values().map(|x| x * x).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-12);
        let a = path_grid_instance::<f64>(AnsatzFamily::Topology, n, DepthRule::Fixed(1)).unwrap().ansatz;
        assert_eq!(a.entangler_edges.len(), n - 1);
    }
}

#[test]
fn log_log_slope_recovers_power_law() {
    let rows: Vec<VarianceRow> = [4usize, 8, 16]
        .iter()
        .map(|&n| VarianceRow { family: AnsatzFamily::Topology, n, depth: 1, variance: 3.0 / n as f64, trials: 30, seed: 0 })
        .collect();
    assert!((log_log_slope(&rows) + 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unitarity_for_random_angles(seed in any::<u64>(), n in 1usize..7, depth in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_ansatz(n, depth, &mut rng);
        let psi = build_state(&a, &random_theta(&a, &mut rng)).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sample_counts_sum_to_shots(seed in any::<u64>(), shots in 1u64..2000) {
        let a = AnsatzSpec::all_to_all(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = build_state(&a, &random_theta(&a, &mut rng)).unwrap();
        let r = sample(&psi, shots, seed).unwrap();
        prop_assert_eq!(r.counts.values().sum::<u64>(), shots);
    }
}
