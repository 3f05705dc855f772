//! Binary encoding of the dispatch problem and its QUBO / Ising forms.

mod encoding;
mod ising;
mod penalty;
mod qubo;

pub use encoding::*;
pub use ising::*;
pub use penalty::*;
pub use qubo::*;


#[cfg(test)]
mod tests {
    use super::test_cases::*;
    use super::*;
    use crate::grid_model::*;
    use crate::linearize::build_ptdf;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn case3() -> GridCase {
        load_case(fixture_path("case3.json")).unwrap()
    }

    fn all_bits(n: usize) -> impl Iterator<Item = Bitstring> {
        (0..1usize << n).map(move |i| index_to_bits(i, n))
    }

    /// Bitstring with dispatch levels given and all slack bits free; returns the
    /// minimum energy over slack assignments.
    fn min_over_slack(q: &QuboProblem<f64>, fixed: &[(usize, bool)]) -> f64 {
        let slack_qubits: Vec<usize> =
            q.encoding.variables.iter().filter(|v| v.slack.is_some()).flat_map(|v| v.qubits()).collect();
        let mut best = f64::INFINITY;
        for s in 0..1usize << slack_qubits.len() {
            let mut bits = vec![false; q.num_qubits()];
            for &(i, b) in fixed {
                bits[i] = b;
            }
            for (k, &qb) in slack_qubits.iter().enumerate() {
                bits[qb] = (s >> k) & 1 == 1;
            }
            best = best.min(q.energy(&bits).unwrap());
        }
        best
    }

    fn levels_for(enc: &Encoding, levels: &[(usize, u64)]) -> Vec<(usize, bool)> {
        levels
            .iter()
            .flat_map(|&(v, level)| {
                let var = &enc.variables[v];
                (0..var.bits).map(move |k| (var.first_qubit + k, (level >> k) & 1 == 1))
            })
            .collect()
    }

    #[test]
    fn delta_is_range_over_levels() {
        let c = two_bus(3.0, 1.0, 10.0, 1);
        let e = build_encoding(&c, 2).unwrap();
        assert_eq!(e.variables.len(), 1);
        assert_eq!(e.variables[0].delta, 1.0);
        assert_eq!(e.bit_variables().iter().map(|b| b.weight).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn case3_qubit_count() {
        let c = case3();
        let e = build_encoding(&c, 2).unwrap();
        // 5 decisions per step; the zero-width demand band is a constant
        assert_eq!(e.layout.len() * 2, 20);
        assert_eq!(e.constants.len(), 2);
        assert_eq!(e.core_qubits(), 4 * 2 * 2);
        assert_eq!(e.num_qubits(), 16);
    }

    #[test]
    fn qubits_grouped_by_bus_then_timestep() {
        let e = build_encoding(&case3(), 2).unwrap();
        let keys: Vec<(usize, usize)> = e.variables.iter().map(|v| (v.bus.unwrap(), v.owner.t)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for (i, v) in e.variables.iter().enumerate() {
            assert_eq!(v.first_qubit, 2 * i);
        }
    }

    #[test]
    fn single_bit_endpoints() {
        let c = two_bus(1.0, 1.0, 10.0, 1);
        let e = build_encoding(&c, 1).unwrap();
        let lo: DispatchVector<f64> = e.decode(&[false]).unwrap();
        let hi: DispatchVector<f64> = e.decode(&[true]).unwrap();
        assert_eq!(lo.get(VarKind::Gen, 0, 0), 0.0);
        assert_eq!(hi.get(VarKind::Gen, 0, 0), 1.0);
    }

    #[test]
    fn decode_extremes_and_mismatch() {
        let c = case3();
        let e = build_encoding(&c, 2).unwrap();
        let n = e.num_qubits();
        let lo: DispatchVector<f64> = e.decode(&vec![false; n]).unwrap();
        let hi: DispatchVector<f64> = e.decode(&vec![true; n]).unwrap();
        for v in &e.variables {
            let i = v.dispatch_index.unwrap();
            assert_eq!(lo.values[i], v.offset);
            assert!((hi.values[i] - v.max).abs() < 1e-12);
        }
        assert_eq!(
            e.decode::<f64>(&[true; 3]).unwrap_err(),
            crate::error::EncodeError::LengthMismatch { expected: 16, found: 3 }
        );
        let e3 = build_encoding(&two_bus(3.0, 1.0, 10.0, 1), 2).unwrap();
        assert_eq!(e3.decode::<f64>(&[true, true]).unwrap().values[0], 3.0);
    }

    #[test]
    fn zero_bits_rejected() {
        assert!(build_encoding(&case3(), 0).is_err());
    }

    #[test]
    fn nearest_lattice_point() {
        let c = two_bus(3.0, 1.0, 10.0, 1);
        let e = build_encoding(&c, 2).unwrap();
        let mut x = DispatchVector::zeros(e.layout.clone());
        x.values[0] = 2.0;
        assert_eq!(e.encode_nearest(&x), vec![false, true]);
        x.values[0] = 0.49;
        assert_eq!(e.encode_nearest(&x), vec![false, false]);
        x.values[0] = 7.0;
        assert_eq!(e.encode_nearest(&x), vec![true, true]);
    }

    #[test]
    fn nearest_roundtrip_error_within_half_step() {
        let c = case3();
        let e = build_encoding(&c, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let mut x = DispatchVector::zeros(e.layout.clone());
            for v in &e.variables {
                x.values[v.dispatch_index.unwrap()] = rng.random_range(v.offset..=v.max);
            }
            let back: DispatchVector<f64> = e.decode(&e.encode_nearest(&x)).unwrap();
            for v in &e.variables {
                let i = v.dispatch_index.unwrap();
                assert!((back.values[i] - x.values[i]).abs() <= v.delta / 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn linear_cost_has_no_quadratics() {
        let mut c = two_bus(1.0, 1.0, 10.0, 1);
        c.generators[0].cost_lin = 2.0;
        let e = build_encoding(&c, 1).unwrap();
        let q: QuboProblem<f64> = build_cost_block(&c, &e);
        assert_eq!(q.linear, vec![2.0]);
        assert!(q.quadratic.values().all(|v| *v == 0.0));
        assert_eq!(q.constant, 0.0);
    }

    #[test]
    fn quadratic_cost_expands_exactly() {
        let mut c = two_bus(3.0, 1.0, 10.0, 1);
        c.generators[0].cost_quad = 1.0;
        c.generators[0].cost_lin = 0.0;
        let e = build_encoding(&c, 2).unwrap();
        let q: QuboProblem<f64> = build_cost_block(&c, &e);
        // (q0 + 2 q1)^2 = q0 + 4 q1 + 4 q0 q1
        assert_eq!(q.linear, vec![1.0, 4.0]);
        assert_eq!(q.quadratic[&(0, 1)], 4.0);
        assert_eq!(q.energy(&[true, true]).unwrap(), 9.0);
    }

    #[test]
    fn zero_cost_is_constant() {
        let mut c = case3();
        for g in &mut c.generators {
            g.cost_quad = 0.0;
            g.cost_lin = 0.0;
        }
        c.storage_units[0].throughput_cost = 0.0;
        let e = build_encoding(&c, 2).unwrap();
        assert!(build_cost_block::<f64>(&c, &e).is_constant());
    }

    #[test]
    fn cost_block_matches_dispatch_cost() {
        let c = case3();
        let e = build_encoding(&c, 2).unwrap();
        let q: QuboProblem<f64> = build_cost_block(&c, &e);
        for bits in all_bits(e.num_qubits()).step_by(97) {
            let x: DispatchVector<f64> = e.decode(&bits).unwrap();
            assert!((q.energy(&bits).unwrap() - dispatch_cost(&c, &x)).abs() < 1e-9);
        }
    }

    fn penalty_only(alpha: f64, mode: InequalityMode) -> PenaltyConfig {
        PenaltyConfig { alpha, gamma: 0.0, mu: 0.0, rho_ramp: 0.0, lambda_risk: 0.0, inequality_mode: mode }
    }

    #[test]
    fn zero_alpha_leaves_qubo() {
        let c = case3();
        let e = build_encoding(&c, 2).unwrap();
        let m = build_ptdf::<f64>(&c).unwrap();
        let mut q: QuboProblem<f64> = build_cost_block(&c, &e);
        let before = q.clone();
        add_flow_penalty(&mut q, &m, &c, &c.scenarios[0], &penalty_only(0.0, InequalityMode::Slack));
        assert_eq!(q, before);
    }

    #[test]
    fn literal_flow_on_limit_is_free() {
        let c = two_bus(3.0, 0.0, 1.0, 1);
        let e = build_encoding(&c, 2).unwrap();
        let m = build_ptdf::<f64>(&c).unwrap();
        let mut q = QuboProblem::new(e);
        add_flow_penalty(&mut q, &m, &c, &c.scenarios[0], &penalty_only(3.0, InequalityMode::Literal));
        assert_eq!(q.energy(&[true, false]).unwrap(), 0.0);
        assert_eq!(q.energy(&[false, true]).unwrap(), 3.0);
    }

    #[test]
    fn slack_and_literal_diverge_in_interior() {
        // g in {0, 0.5, 1, 1.5}, flow = g
        let c = two_bus(1.5, 0.0, 1.0, 1);
        let m = build_ptdf::<f64>(&c).unwrap();
        let alpha = 4.0;
        let e = build_encoding(&c, 2).unwrap();
        let mut slack = QuboProblem::new(e.clone());
        add_flow_penalty(&mut slack, &m, &c, &c.scenarios[0], &penalty_only(alpha, InequalityMode::Slack));
        let at_half = levels_for(&slack.encoding, &[(0, 1)]);
        assert!(min_over_slack(&slack, &at_half).abs() < 1e-12);
        let mut literal = QuboProblem::new(e);
        add_flow_penalty(&mut literal, &m, &c, &c.scenarios[0], &penalty_only(alpha, InequalityMode::Literal));
        assert!((literal.energy(&[true, false]).unwrap() - alpha * 0.25).abs() < 1e-12);
        // violation 0.5 at g = 1.5
        let over = levels_for(&slack.encoding, &[(0, 3)]);
        assert!((min_over_slack(&slack, &over) - alpha * 0.25).abs() < 1e-12);
    }

    fn soc_config(gamma: f64) -> PenaltyConfig {
        PenaltyConfig { alpha: 0.0, gamma, mu: 0.0, rho_ramp: 0.0, lambda_risk: 0.0, inequality_mode: InequalityMode::Slack }
    }

    #[test]
    fn idle_storage_has_no_soc_penalty() {
        let c = storage_only(1, 1.0, 1.0, 1.0);
        let mut q = QuboProblem::new(build_encoding(&c, 1).unwrap());
        add_soc_penalty(&mut q, &c, &soc_config(5.0));
        assert_eq!(min_over_slack(&q, &[(0, false), (1, false)]), 0.0);
    }

    #[test]
    fn overcharge_by_one_costs_gamma() {
        // capacity 1 from full: charging 1 MW for one step overfills by 1 MWh
        let c = storage_only(1, 1.0, 1.0, 1.0);
        let mut q = QuboProblem::new(build_encoding(&c, 1).unwrap());
        add_soc_penalty(&mut q, &c, &soc_config(5.0));
        let enc = &q.encoding;
        let ch = enc.variables.iter().position(|v| v.owner.kind == BitKind::Charge).unwrap();
        let dis = enc.variables.iter().position(|v| v.owner.kind == BitKind::Discharge).unwrap();
        let fixed = levels_for(enc, &[(ch, 1), (dis, 0)]);
        assert!((min_over_slack(&q, &fixed) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn lossless_roundtrip_restores_soc() {
        let c = storage_only(2, 3.0, 1.0, 1.0);
        let mut q = QuboProblem::new(build_encoding(&c, 1).unwrap());
        add_soc_penalty(&mut q, &c, &soc_config(5.0));
        let enc = q.encoding.clone();
        let find = |kind: BitKind, t: usize| enc.variables.iter().position(|v| v.owner.kind == kind && v.owner.t == t).unwrap();
        let fixed = levels_for(
            &enc,
            &[(find(BitKind::Charge, 0), 1), (find(BitKind::Discharge, 0), 0), (find(BitKind::Charge, 1), 0), (find(BitKind::Discharge, 1), 1)],
        );
        let mut bits = vec![false; enc.num_qubits()];
        for &(i, b) in &fixed {
            bits[i] = b;
        }
        let soc2 = soc_expr(&c, &enc, 0, 2).eval(&bits);
        assert_eq!(soc2, 1.0);
        assert!(min_over_slack(&q, &fixed).abs() < 1e-12);
    }

    fn balance_config(mu: f64) -> PenaltyConfig {
        PenaltyConfig { alpha: 0.0, gamma: 0.0, mu, rho_ramp: 0.0, lambda_risk: 0.0, inequality_mode: InequalityMode::Slack }
    }

    #[test]
    fn balanced_case3_dispatch_is_free() {
        let c = case3();
        let e = build_encoding(&c, 2).unwrap();
        let mut q = QuboProblem::<f64>::new(e.clone());
        add_balance_penalty(&mut q, &c, &c.scenarios[0], &balance_config(7.0));
        // t0 net load 1.5: gen0 = 2, charge 0.5; t1 net load 5.5: gen0 3, gen1 2, discharge 0.5
        let mut x = DispatchVector::zeros(e.layout.clone());
        x.set(VarKind::Gen, 0, 0, 2.0);
        x.set(VarKind::Charge, 0, 0, 0.5);
        x.set(VarKind::Gen, 0, 1, 3.0);
        x.set(VarKind::Gen, 1, 1, 2.0);
        x.set(VarKind::Discharge, 0, 1, 0.5);
        let bits = e.encode_nearest(&x);
        let back: DispatchVector<f64> = e.decode(&bits).unwrap();
        assert_eq!(back, x);
        assert!(q.energy(&bits).unwrap().abs() < 1e-12);
    }

    #[test]
    fn unit_surplus_costs_mu() {
        let c = two_bus(3.0, 1.0, 10.0, 1);
        let mut q = QuboProblem::<f64>::new(build_encoding(&c, 2).unwrap());
        add_balance_penalty(&mut q, &c, &c.scenarios[0], &balance_config(7.0));
        assert!((q.energy(&[false, true]).unwrap() - 7.0).abs() < 1e-12);
        let mut untouched = QuboProblem::<f64>::new(build_encoding(&c, 2).unwrap());
        add_balance_penalty(&mut untouched, &c, &c.scenarios[0], &balance_config(0.0));
        assert!(untouched.is_constant() && untouched.constant == 0.0);
    }

    fn ramp_case(ramp: f64) -> GridCase {
        let mut c = two_bus(3.0, 1.0, 10.0, 2);
        c.generators[0].ramp_limit = ramp;
        c
    }

    fn ramp_config(rho: f64, mode: InequalityMode) -> PenaltyConfig {
        PenaltyConfig { alpha: 0.0, gamma: 0.0, mu: 0.0, rho_ramp: rho, lambda_risk: 0.0, inequality_mode: mode }
    }

    fn gen_levels(q: &QuboProblem<f64>, g0: u64, g1: u64) -> Vec<(usize, bool)> {
        let enc = &q.encoding;
        let v0 = enc.variables.iter().position(|v| v.owner.kind == BitKind::Gen && v.owner.t == 0).unwrap();
        let v1 = enc.variables.iter().position(|v| v.owner.kind == BitKind::Gen && v.owner.t == 1).unwrap();
        levels_for(enc, &[(v0, g0), (v1, g1)])
    }

    #[test]
    fn constant_generation_has_no_ramp_cost() {
        for mode in [InequalityMode::Literal, InequalityMode::Slack] {
            let c = ramp_case(1.0);
            let mut q = QuboProblem::new(build_encoding(&c, 2).unwrap());
            add_ramp_penalty(&mut q, &c, &ramp_config(3.0, mode));
            for level in 0..4 {
                assert!(min_over_slack(&q, &gen_levels(&q, level, level)).abs() < 1e-12, "{mode:?}");
            }
        }
    }

    #[test]
    fn slack_ramp_penalizes_only_excess() {
        let c = ramp_case(1.0);
        let mut q = QuboProblem::new(build_encoding(&c, 2).unwrap());
        add_ramp_penalty(&mut q, &c, &ramp_config(3.0, InequalityMode::Slack));
        assert!(min_over_slack(&q, &gen_levels(&q, 1, 2)).abs() < 1e-12);
        assert!(min_over_slack(&q, &gen_levels(&q, 2, 1)).abs() < 1e-12);
        // step of 3 = R + 2
        assert!((min_over_slack(&q, &gen_levels(&q, 0, 3)) - 3.0 * 4.0).abs() < 1e-12);
        assert!((min_over_slack(&q, &gen_levels(&q, 3, 1)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn literal_ramp_is_scaled_quadratic() {
        let c = ramp_case(2.0);
        let mut q = QuboProblem::new(build_encoding(&c, 2).unwrap());
        add_ramp_penalty(&mut q, &c, &ramp_config(3.0, InequalityMode::Literal));
        let bits: Vec<bool> = {
            let mut b = vec![false; q.num_qubits()];
            for (i, v) in gen_levels(&q, 0, 3) {
                b[i] = v;
            }
            b
        };
        assert!((q.energy(&bits).unwrap() - 3.0 * (3.0f64 / 2.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn linear_term_substitution_identity() {
        let e = build_encoding(&two_bus(1.0, 1.0, 10.0, 1), 1).unwrap();
        let mut q = QuboProblem::<f64>::new(e);
        q.add_linear(0, 2.0);
        let h = IsingHamiltonian::from_qubo(&q);
        assert_eq!(h.constant, 1.0);
        assert_eq!(h.fields, vec![-1.0]);
    }

    #[test]
    fn two_qubit_energy_direct_sum() {
        let mut e = build_encoding(&two_bus(3.0, 1.0, 10.0, 1), 2).unwrap();
        e.total_qubits = 2;
        let mut q = QuboProblem::<f64>::new(e);
        q.constant = 0.5;
        q.add_quadratic(0, 1, 4.0);
        q.add_linear(0, 1.0);
        assert_eq!(q.energy(&[true, true]).unwrap(), 5.5);
        assert_eq!(IsingHamiltonian::from_qubo(&q).energy(&[true, true]).unwrap(), 5.5);
    }

    #[test]
    fn empty_hamiltonian_is_constant() {
        let mut h = IsingHamiltonian::<f64>::zero(3);
        h.constant = -2.5;
        assert!(h.energy_table().iter().all(|&e| e == -2.5));
        assert!(h.terms().is_empty());
    }

    fn random_qubo(rng: &mut ChaCha8Rng, n: usize) -> QuboProblem<f64> {
        let mut e = build_encoding(&two_bus(1.0, 1.0, 10.0, 1), 1).unwrap();
        e.total_qubits = n;
        let mut q = QuboProblem::new(e);
        q.constant = rng.random_range(-3.0..3.0);
        for i in 0..n {
            q.add_linear(i, rng.random_range(-5.0..5.0));
            for j in i..n {
                if rng.random_bool(0.4) {
                    q.add_quadratic(i, j, rng.random_range(-5.0..5.0));
                }
            }
        }
        q
    }

    #[test]
    fn random_ten_qubit_exhaustive_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_qubo(&mut rng, 10);
        let h = IsingHamiltonian::from_qubo(&q);
        let table = h.energy_table();
        for (i, bits) in all_bits(10).enumerate() {
            let eq = q.energy(&bits).unwrap();
            assert!((eq - h.energy(&bits).unwrap()).abs() <= 1e-9);
            assert!((eq - table[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn exhaustive_equivalence_on_small_fixtures() {
        let config = PenaltyConfig::default();
        for name in ["case2.json", "case3.json"] {
            let c = load_case(fixture_path(name)).unwrap();
            for b in [1, 2] {
                let e = build_encoding(&c, b).unwrap();
                let m = build_ptdf::<f64>(&c).unwrap();
                let q = assemble_qubo(&c, &e, &m, &c.scenarios, &config).unwrap();
                if q.num_qubits() > 12 {
                    continue;
                }
                let h = IsingHamiltonian::from_qubo(&q);
                let table = h.energy_table();
                for (i, bits) in all_bits(q.num_qubits()).enumerate() {
                    assert!((q.energy(&bits).unwrap() - table[i]).abs() <= 1e-9, "{name} b={b}");
                }
            }
        }
    }

    #[test]
    fn cost_only_single_scenario_equivalence() {
        let c = case3();
        let e = build_encoding(&c, 1).unwrap();
        let m = build_ptdf::<f64>(&c).unwrap();
        let cfg = PenaltyConfig { alpha: 0.0, gamma: 0.0, mu: 0.0, rho_ramp: 0.0, ..Default::default() };
        let q = assemble_qubo(&c, &e, &m, &c.scenarios, &cfg).unwrap();
        assert_eq!(q.num_qubits(), 8);
        let h = assemble_hamiltonian(&c, &e, &m, &c.scenarios, &cfg).unwrap();
        for bits in all_bits(8) {
            assert!((q.energy(&bits).unwrap() - h.energy(&bits).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn duplicated_equiprobable_scenarios_match_single() {
        let c = case3();
        let e = build_encoding(&c, 2).unwrap();
        let m = build_ptdf::<f64>(&c).unwrap();
        let cfg = PenaltyConfig::default();
        let single = assemble_hamiltonian(&c, &e, &m, &c.scenarios, &cfg).unwrap();
        let mut half = c.scenarios[0].clone();
        half.probability = 0.5;
        let double = assemble_hamiltonian(&c, &e, &m, &[half.clone(), half], &cfg).unwrap();
        assert_eq!(single.num_qubits(), double.num_qubits());
        for (a, b) in single.fields.iter().zip(&double.fields) {
            assert!((a - b).abs() < 1e-9);
        }
        for (k, v) in &single.couplings {
            assert!((v - double.couplings.get(k).copied().unwrap_or(0.0)).abs() < 1e-9);
        }
        assert!((single.constant - double.constant).abs() < 1e-9);
    }

    #[test]
    fn no_scenarios_is_an_error() {
        let c = case3();
        let e = build_encoding(&c, 1).unwrap();
        let m = build_ptdf::<f64>(&c).unwrap();
        assert_eq!(
            assemble_qubo(&c, &e, &m, &[], &PenaltyConfig::default()).unwrap_err(),
            crate::error::EncodeError::NoScenarios
        );
    }

    #[test]
    fn case2_flow_register_is_exact() {
        let c = load_case(fixture_path("case2.json")).unwrap();
        let e = build_encoding(&c, 2).unwrap();
        let m = build_ptdf::<f64>(&c).unwrap();
        let q = assemble_qubo(&c, &e, &m, &c.scenarios, &PenaltyConfig::default()).unwrap();
        let regs: Vec<_> = q.encoding.variables.iter().filter(|v| v.slack.is_some()).collect();
        // slack at bus 0: flow(0->1) = net load at bus 1 - g1, violable only at t=1
        assert_eq!(regs.len(), 1);
        assert_eq!(regs[0].slack, Some(SlackKey::Flow { line: 0, t: 1, upper: true }));
        assert_eq!(regs[0].delta, 1.0);
    }

    #[test]
    fn text_export_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = IsingHamiltonian::from_qubo(&random_qubo(&mut rng, 6));
        let text = h.to_text();
        assert_eq!(text.lines().count(), 2 + h.terms().len());
        let back = IsingHamiltonian::<f64>::from_text(&text).unwrap();
        assert_eq!(back.fields, h.fields);
        assert_eq!(back.couplings, h.couplings);
        assert_eq!(back.constant, h.constant);
        assert!(random_qubo(&mut rng, 3).to_text().starts_with("# qubo 3 qubits"));
    }

    #[test]
    fn f32_hamiltonian_tracks_f64() {
        let c = case3();
        let e = build_encoding(&c, 1).unwrap();
        let h64 = assemble_hamiltonian(&c, &e, &build_ptdf::<f64>(&c).unwrap(), &c.scenarios, &PenaltyConfig::default()).unwrap();
        let h32 = assemble_hamiltonian(&c, &e, &build_ptdf::<f32>(&c).unwrap(), &c.scenarios, &PenaltyConfig::default()).unwrap();
        let (t64, t32) = (h64.energy_table(), h32.energy_table());
        for (a, b) in t64.iter().zip(&t32) {
            assert!((a - *b as f64).abs() <= 1e-3 * (1.0 + a.abs()));
        }
    }

    fn violation_free_and_weight_scaled(weight_lo: f64, weight_hi: f64) {
        // flow-only penalties on case2 for two weights: difference must be
        // (hi - lo) * P(bits) with P >= 0
        let c = load_case(fixture_path("case2.json")).unwrap();
        let e = build_encoding(&c, 1).unwrap();
        let m = build_ptdf::<f64>(&c).unwrap();
        let build = |alpha: f64| {
            let cfg = PenaltyConfig { alpha, ..penalty_only(alpha, InequalityMode::Slack) };
            let enc = plan_slack_registers(&c, &e, &m, &c.scenarios, &penalty_only(1.0, InequalityMode::Slack));
            let mut q = QuboProblem::new(enc);
            add_flow_penalty(&mut q, &m, &c, &c.scenarios[0], &cfg);
            q
        };
        let lo = build(weight_lo);
        let hi = build(weight_hi);
        let unit = build(1.0);
        for bits in all_bits(lo.num_qubits()) {
            let p = unit.energy(&bits).unwrap();
            let d = hi.energy(&bits).unwrap() - lo.energy(&bits).unwrap();
            assert!(p >= -1e-12);
            assert!(d >= -1e-9);
            if p.abs() < 1e-12 {
                assert!(d.abs() < 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn penalty_weights_are_monotone(lo in 0.0f64..10.0, extra in 0.0f64..10.0) {
            violation_free_and_weight_scaled(lo, lo + extra);
        }

        #[test]
        fn decoded_values_stay_in_bounds(b in 1usize..4, raw in any::<u64>()) {
            let c = load_case(fixture_path("case5.json")).unwrap();
            let e = build_encoding(&c, b).unwrap();
            let bits = index_to_bits(raw as usize, e.num_qubits());
            let x: DispatchVector<f64> = e.decode(&bits).unwrap();
            for i in 0..e.layout.len() {
                let (lo, hi) = e.layout.bounds(&c, e.layout.slot(i));
                prop_assert!(x.values[i] >= lo - 1e-12 && x.values[i] <= hi + 1e-12);
            }
        }

        #[test]
        fn slack_penalty_is_weighted_squared_violation(
            unit in 1u32..4,
            multiples in prop::collection::vec(prop::sample::select(vec![1u32, 2, 4]), 0..3),
            limit in 0u32..9,
            weight in 0.5f64..5.0,
        ) {
            // g(x) = unit * (sum_v k_v x_v - limit) over b=2 integer registers, k_0 = 1
            let coeffs: Vec<u32> = std::iter::once(1).chain(multiples).map(|k| k * unit).collect();
            let mut e = build_encoding(&two_bus(3.0, 1.0, 10.0, 1), 2).unwrap();
            e.variables.clear();
            e.total_qubits = 0;
            let mut g = LinearExpr::constant(-((limit * unit) as f64));
            for (v, &cv) in coeffs.iter().enumerate() {
                let key = SlackKey::Ramp { generator: 100 + v, t: 0, upper: true };
                let idx = e.add_slack_register(key, 3.0, 2);
                e.variables[idx].slack = None;
                g.add_scaled(&e.variable_expr(idx), cv as f64);
            }
            let n_main = e.total_qubits;
            let mut q = QuboProblem::<f64>::new(e);
            super::penalty::add_one_sided_for_tests(&mut q, weight, &g);
            for main in 0..1usize << n_main {
                let fixed: Vec<(usize, bool)> = (0..n_main).map(|i| (i, (main >> i) & 1 == 1)).collect();
                let bits: Vec<bool> = (0..q.num_qubits()).map(|i| i < n_main && (main >> i) & 1 == 1).collect();
                let viol = g.eval(&bits).max(0.0);
                let best = min_over_slack(&q, &fixed);
                prop_assert!((best - weight * viol * viol).abs() < 1e-9, "viol {} best {}", viol, best);
            }
        }
    }
}
