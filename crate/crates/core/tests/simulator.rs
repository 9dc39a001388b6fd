mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use qkge::ansatz::{entangling_layers, entity_prep, inverse};
use qkge::sim::{
    adjoint_gradient, basis_probability, gradient_exact, parameter_shift_gradient, run_circuit, Circuit, Condition,
    DiagonalObservable, Gate, Pattern, Statevector,
};
use qkge::AnsatzShape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(circuit: &Circuit, params: &[f64]) -> Statevector {
    let mut s = Statevector::zero(circuit.n_qubits()).unwrap();
    run_circuit(&mut s, circuit, params).unwrap();
    s
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Statevector {
    let v: Vec<C> = (0..1 << n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Statevector::from_amplitudes(v.into_iter().map(|a| a / norm).collect()).unwrap()
}

#[test]
fn entity_prep_matches_matrix_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (n, layers) in [(1, 1), (2, 2), (3, 3), (4, 2), (4, 4)] {
        let shape = AnsatzShape::new(n, layers);
        let angles: Vec<f64> = (0..shape.param_count()).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

        // H on every qubit, then per layer a Rot on each qubit and the CNOT ring.
        let mut u = identity(1 << n);
        for q in 0..n {
            u = matmul(&embed(&hadamard(), q, n), &u);
        }
        for l in 0..layers {
            for q in 0..n {
                let k = (l * n + q) * 3;
                u = matmul(&embed(&rot(angles[k], angles[k + 1], angles[k + 2]), q, n), &u);
            }
            if n > 1 {
                let r = l % (n - 1) + 1;
                for q in 0..n {
                    u = matmul(&cnot(q, (q + r) % n, n), &u);
                }
            }
        }
        let expected = apply(&u, &zero_vector(n));
        let got = run(&entity_prep(shape, &angles, None).unwrap(), &[]);
        assert!(max_diff(got.amplitudes(), &expected) < 1e-12, "n={n} L={layers}");
    }
}

#[test]
fn conditioned_rot_on_three_qubits() {
    // Rot on qubit 2, active only when qubit 0 is |1> and qubit 1 is |0>.
    let (phi, theta, omega) = (0.3, 1.1, -0.7);
    let cond = Condition::new(vec![(0, true), (1, false)]).unwrap();
    let mut circuit = Circuit::new(3).unwrap();
    circuit.push(Gate::rot(2, phi, theta, omega).when(Some(cond))).unwrap();

    let r = rot(phi, theta, omega);
    let mut expected = identity(8);
    // Basis |10x> is indices 4 and 5.
    for i in 0..2 {
        for j in 0..2 {
            expected[4 + i][4 + j] = r[i][j];
        }
    }
    let got = circuit_unitary(&circuit, &[]);
    for i in 0..8 {
        for j in 0..8 {
            assert!((got[i][j] - expected[i][j]).norm() < 1e-14);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let input = random_state(&mut rng, 3);
    let mut s = input.clone();
    run_circuit(&mut s, &circuit, &[]).unwrap();
    assert!(max_diff(s.amplitudes(), &apply(&expected, input.amplitudes())) < 1e-14);
}

#[test]
fn random_circuits_match_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let n = rng.random_range(1..=5);
        let n_params = rng.random_range(0..=12);
        let gates = rng.random_range(1..=25);
        let circuit = random_circuit(&mut rng, n, n_params, gates, true);
        let params: Vec<f64> = (0..n_params).map(|_| rng.random_range(-PI..PI)).collect();
        let expected = apply(&circuit_unitary(&circuit, &params), &zero_vector(n));
        assert!(max_diff(run(&circuit, &params).amplitudes(), &expected) < 1e-12);
    }
}

#[test]
fn single_qubit_gradient_example() {
    let mut circuit = Circuit::new(1).unwrap();
    circuit.bind(qkge::Owner::Entity(0), 3).unwrap();
    circuit
        .push(Gate::rot_bound(
            0,
            [qkge::sim::ParamSlot::new(0), qkge::sim::ParamSlot::new(1), qkge::sim::ParamSlot::new(2)],
        ))
        .unwrap();
    let g = gradient_exact(&circuit, &[0.0, PI / 2.0, 0.0], &Pattern::from("0")).unwrap();
    assert!((g[1] + 0.5).abs() < 1e-12);
    assert!(g[0].abs() < 1e-12 && g[2].abs() < 1e-12);
}

fn probability(circuit: &Circuit, params: &[f64], obs: &DiagonalObservable) -> f64 {
    obs.expectation(&run(circuit, params)).unwrap()
}

#[test]
fn adjoint_matches_finite_differences_with_weighted_observable() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..20 {
        let n = rng.random_range(2..=5);
        let n_params = rng.random_range(1..=20);
        let circuit = random_circuit(&mut rng, n, n_params, 30, true);
        let params: Vec<f64> = (0..n_params).map(|_| rng.random_range(-PI..PI)).collect();
        let weights: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let obs = DiagonalObservable::from_weights(weights).unwrap();
        let state = run(&circuit, &params);
        let g = adjoint_gradient(&circuit, &params, &state, &obs).unwrap();
        let h = 1e-5;
        for k in 0..n_params {
            let mut p = params.clone();
            p[k] += h;
            let plus = probability(&circuit, &p, &obs);
            p[k] -= 2.0 * h;
            let minus = probability(&circuit, &p, &obs);
            assert!((g[k] - (plus - minus) / (2.0 * h)).abs() < 1e-6);
        }
    }
}

#[test]
fn parameter_shift_agrees_with_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..20 {
        let n = rng.random_range(1..=4);
        let n_params = rng.random_range(1..=15);
        let circuit = random_circuit(&mut rng, n, n_params, 20, false);
        let params: Vec<f64> = (0..n_params).map(|_| rng.random_range(-PI..PI)).collect();
        let obs = DiagonalObservable::projector(&Pattern::all_zero(n));
        let state = run(&circuit, &params);
        let a = adjoint_gradient(&circuit, &params, &state, &obs).unwrap();
        let s = parameter_shift_gradient(&circuit, &params, &obs).unwrap();
        for (x, y) in a.iter().zip(&s) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn parameter_shift_rejects_conditioned_circuits() {
    let mut circuit = Circuit::new(2).unwrap();
    circuit.push(Gate::h(0).when(Condition::address(1, 1, 1))).unwrap();
    let obs = DiagonalObservable::projector(&Pattern::all_zero(2));
    assert!(parameter_shift_gradient(&circuit, &[], &obs).is_err());
}

fn angles_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_preserved(seed in any::<u64>(), n in 1usize..=6, gates in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_params = 8;
        let circuit = random_circuit(&mut rng, n, n_params, gates, true);
        let params: Vec<f64> = (0..n_params).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut s = random_state(&mut rng, n);
        run_circuit(&mut s, &circuit, &params).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn circuit_then_inverse_is_identity(seed in any::<u64>(), n in 1usize..=6, gates in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_params = 8;
        let circuit = random_circuit(&mut rng, n, n_params, gates, true);
        let params: Vec<f64> = (0..n_params).map(|_| rng.random_range(-10.0..10.0)).collect();
        let input = random_state(&mut rng, n);
        let mut s = input.clone();
        run_circuit(&mut s, &circuit, &params).unwrap();
        run_circuit(&mut s, &circuit.inverse(), &params).unwrap();
        prop_assert!(max_diff(s.amplitudes(), input.amplitudes()) <= 1e-9);
    }

    #[test]
    fn ansatz_inverse_round_trip(n in 1usize..=5, layers in 0usize..=4, angles in angles_strategy(60)) {
        let shape = AnsatzShape::new(n, layers);
        let circuit = entangling_layers(shape, &angles[..shape.param_count()], None).unwrap();
        let mut s = run(&entity_prep(AnsatzShape::new(n, 1), &angles[..3 * n], None).unwrap(), &[]);
        let before = s.clone();
        run_circuit(&mut s, &circuit, &[]).unwrap();
        run_circuit(&mut s, &inverse(&circuit), &[]).unwrap();
        prop_assert!(max_diff(s.amplitudes(), before.amplitudes()) <= 1e-9);
    }

    /// A gate conditioned on address value `v` leaves every other address
    /// block untouched.
    #[test]
    fn conditioned_gates_only_touch_their_branch(seed in any::<u64>(), value in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_data, width) = (3, 2);
        let cond = Condition::address(n_data, width, value);
        let body = random_circuit(&mut rng, n_data, 6, 15, false);
        let params: Vec<f64> = (0..6).map(|_| rng.random_range(-PI..PI)).collect();
        let mut circuit = Circuit::new(n_data + width).unwrap();
        circuit.bind(qkge::Owner::Entity(0), 6).unwrap();
        for g in body.gates() {
            circuit.push(g.clone().when(cond.clone())).unwrap();
        }
        let input = random_state(&mut rng, n_data + width);
        let mut s = input.clone();
        run_circuit(&mut s, &circuit, &params).unwrap();
        for (k, (a, b)) in s.amplitudes().iter().zip(input.amplitudes()).enumerate() {
            if k & 0b11 != value {
                prop_assert!((a - b).norm() == 0.0);
            }
        }
        let branch = Pattern((0..n_data + width).map(|q| {
            if q < n_data { qkge::sim::QubitConstraint::Any }
            else if (value >> (n_data + width - 1 - q)) & 1 == 1 { qkge::sim::QubitConstraint::One }
            else { qkge::sim::QubitConstraint::Zero }
        }).collect());
        let p_out = basis_probability(&s, &branch).unwrap();
        let p_in = basis_probability(&input, &branch).unwrap();
        prop_assert!((p_out - p_in).abs() < 1e-12);
    }

    #[test]
    fn probabilities_partition(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, n);
        let q = rng.random_range(0..n);
        let mut zero = Pattern::any(n);
        zero.0[q] = qkge::sim::QubitConstraint::Zero;
        let mut one = Pattern::any(n);
        one.0[q] = qkge::sim::QubitConstraint::One;
        let total = basis_probability(&s, &zero).unwrap() + basis_probability(&s, &one).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!((basis_probability(&s, &Pattern::any(n)).unwrap() - 1.0).abs() < 1e-10);
    }
}
