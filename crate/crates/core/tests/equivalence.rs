//! Cross-representation checks over every desk-scale instance: boolean
//! polynomial, Pauli-Z sum and the direct eigenvalue oracle must agree
//! exactly on every basis state, label codecs must be bijections, and the
//! three cost shapes must share their argmin.

use qfactor::hamiltonian::{
    cost_value, eigenvalue, pauli_eval_all, to_pauli_terms, BooleanPolynomial, CostFunction,
    Dyadic,
};
use qfactor::instance::enumerate_instances_with;

#[test]
fn triple_equivalence_and_codec_bijection_up_to_ten_qubits() {
    let mut checked = 0;
    for qubits in 3..=10 {
        for instance in enumerate_instances_with(qubits, true).unwrap() {
            let size = 1u64 << instance.qubits();
            let poly = BooleanPolynomial::build(&instance).unwrap();
            assert!(poly.degree() <= 4);
            let poly_values = poly.evaluate_all();
            let pauli = to_pauli_terms(&poly);
            let pauli_values = pauli_eval_all(&pauli, instance.qubits());

            let solutions = instance.solution_labels().unwrap();
            for index in 0..size {
                let oracle = eigenvalue(&instance, index);
                assert!(oracle >= 0);
                assert_eq!(poly_values[index as usize], oracle, "n={}", instance.n());
                assert_eq!(pauli_values[index as usize], Dyadic::new(oracle, 0));

                // Zero eigenvalue exactly on the solution labels.
                assert_eq!(oracle == 0, solutions.contains(&index));

                // decode then encode is the identity on every label.
                let (p, q) = instance.decode_index(index);
                assert_eq!(instance.encode_index(p, q).unwrap(), index);
            }
            checked += 1;
        }
    }
    assert!(checked > 50, "only {checked} instances enumerated");
}

#[test]
fn spot_equivalence_at_twelve_qubits() {
    // The full N <= 12 sweep runs in the acceptance suite; spot-check the
    // largest desk instances here.
    for instance in enumerate_instances_with(12, true).unwrap().into_iter().rev().take(3) {
        let poly = BooleanPolynomial::build(&instance).unwrap();
        let values = poly.evaluate_all();
        let pauli_values = pauli_eval_all(&to_pauli_terms(&poly), instance.qubits());
        for index in 0..(1u64 << instance.qubits()) {
            let oracle = eigenvalue(&instance, index);
            assert_eq!(values[index as usize], oracle);
            assert_eq!(pauli_values[index as usize], Dyadic::new(oracle, 0));
        }
    }
}

#[test]
fn codec_bijection_is_exhaustive_through_twelve_qubits() {
    for qubits in 11..=12 {
        for instance in enumerate_instances_with(qubits, true).unwrap() {
            for index in 0..(1u64 << instance.qubits()) {
                let (p, q) = instance.decode_index(index);
                assert!(p % 2 == 1 && q % 2 == 1);
                assert_eq!(instance.encode_index(p, q).unwrap(), index);
            }
        }
    }
}

#[test]
fn cost_shapes_share_argmin_on_benchmark_instances() {
    let kinds = [
        CostFunction::Hamiltonian,
        CostFunction::logarithm(),
        CostFunction::inverse(),
    ];
    for qubits in 3..=9 {
        for instance in enumerate_instances_with(qubits, true).unwrap() {
            let size = 1u64 << instance.qubits();
            let argmin = |kind: CostFunction| -> Vec<u64> {
                let costs: Vec<f64> = (0..size).map(|i| cost_value(&instance, i, kind)).collect();
                let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
                (0..size).filter(|&i| costs[i as usize] == min).collect()
            };
            let reference = argmin(kinds[0]);
            assert_eq!(reference, instance.solution_labels().unwrap());
            for kind in &kinds[1..] {
                assert_eq!(argmin(*kind), reference, "n={}", instance.n());
            }
        }
    }
}
