mod common;

use common::PROPERTIES;

fn run(name: &str) {
    let (_, check, cases) = PROPERTIES.iter().find(|p| p.0 == name).expect("registered");
    if let Err(e) = check(*cases) {
        panic!("{name}: {e}");
    }
}

#[test]
fn gates_are_unitary() {
    run("gates_are_unitary");
}

#[test]
fn gates_preserve_norm() {
    run("gates_preserve_norm");
}

#[test]
fn circuits_and_encoding_preserve_norm() {
    run("circuits_and_encoding_preserve_norm");
}

#[test]
fn appended_zero_layer_is_identity() {
    run("appended_zero_layer_is_identity");
}

#[test]
fn counting_probabilities_normalized() {
    run("counting_probabilities_normalized");
}

#[test]
fn partial_trace_order_independent() {
    run("partial_trace_order_independent");
}

#[test]
fn homodyne_probabilities_normalized() {
    run("homodyne_probabilities_normalized");
}

#[test]
fn cramer_rao_hierarchy() {
    run("cramer_rao_hierarchy");
}

#[test]
fn wigner_normalization_and_purity() {
    run("wigner_normalization_and_purity");
}

#[test]
fn warm_start_monotone_and_deterministic() {
    run("warm_start_monotone_and_deterministic");
}

#[test]
fn initial_states_are_normalized() {
    common::initial_states_are_normalized().unwrap();
}
