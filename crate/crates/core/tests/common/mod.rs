use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use qmetro::circuits::{layer_width, run_circuit, AnsatzParams};
use qmetro::dynamics::{apply, detune_gate, jc_gate, kerr_gate, tunnel_gate_on, LocalGate};
use qmetro::encoding::{beam_splitter_gate_on, encode_with_derivative, phase_diff_gate_on};
use qmetro::hilbert::{initial_state, reduce, ReducedDensity};
use qmetro::metrology::{
    cfi, counting_probabilities, homodyne_probabilities, qfi_variance_oracle, HomodyneGrid,
    MeasurementModel,
};
use qmetro::optimize::{optimize_preparation, OptimizerConfig};
use qmetro::wigner::{symmetric_axis, wigner};
use qmetro::{CompositeState, Nonlinearity, Protocol, ProtocolSettings, SubsystemLayout, C64};

const CUTOFF: usize = 6;
/// Photonic factors of the JC layout, which the random gates act on.
const MODES: [usize; 2] = [2, 3];

pub fn kind_strategy() -> impl Strategy<Value = Nonlinearity> {
    prop_oneof![Just(Nonlinearity::Jc), Just(Nonlinearity::Kerr)]
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn normalized(mut v: Vec<C64>) -> Vec<C64> {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1e-3);
    v.iter_mut().for_each(|c| *c /= norm);
    v
}

fn layout(kind: Nonlinearity) -> SubsystemLayout {
    kind.layout(CUTOFF).unwrap()
}

fn random_state(kind: Nonlinearity) -> impl Strategy<Value = CompositeState> {
    let dim = layout(kind).total_dim();
    complex_vec(dim)
        .prop_filter("non-zero", |v| {
            v.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-2
        })
        .prop_map(move |v| CompositeState::from_amplitudes(layout(kind), normalized(v)).unwrap())
}

fn state_with_params(depth: usize) -> impl Strategy<Value = (CompositeState, AnsatzParams)> {
    kind_strategy().prop_flat_map(move |kind| {
        let width = layer_width(kind) * depth;
        (
            random_state(kind),
            prop::collection::vec(-3.0..3.0f64, width),
        )
            .prop_map(move |(s, p)| (s, AnsatzParams::from_flat(kind, p).unwrap()))
    })
}

fn random_gate() -> impl Strategy<Value = (LocalGate, usize)> {
    (0usize..6, -4.0..4.0f64).prop_map(|(which, t)| match which {
        0 => (jc_gate(t, CUTOFF, (0, 2)).unwrap(), 2 * CUTOFF),
        1 => (kerr_gate(t, CUTOFF, MODES[0]).unwrap(), CUTOFF),
        2 => (tunnel_gate_on(t, CUTOFF, MODES).unwrap(), CUTOFF * CUTOFF),
        3 => (detune_gate(t, 1).unwrap(), 2),
        4 => (
            beam_splitter_gate_on(CUTOFF, MODES).unwrap(),
            CUTOFF * CUTOFF,
        ),
        _ => (
            phase_diff_gate_on(t, CUTOFF, MODES).unwrap(),
            CUTOFF * CUTOFF,
        ),
    })
}

fn norm_error(s: &CompositeState) -> f64 {
    (s.norm_sqr() - 1.0).abs()
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

/// Runs `cases` random inputs through `test`; the error names the first failing input.
fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

pub fn gates_are_unitary(cases: u32) -> Result<(), String> {
    check(cases, random_gate(), |(gate, dim)| {
        prop_assert_eq!(gate.local_dim(), dim);
        prop_assert!(gate.unitarity_error() < 1e-10);
        let u = gate.to_dense();
        let inv = gate.adjoint().to_dense();
        prop_assert!((&inv * &u - DMatrix::<C64>::identity(dim, dim)).norm() < 1e-10);
        Ok(())
    })
}

pub fn gates_preserve_norm(cases: u32) -> Result<(), String> {
    check(
        cases,
        (random_gate(), random_state(Nonlinearity::Jc)),
        |((gate, _), state)| {
            let out = apply(&gate, &state).unwrap();
            prop_assert!(norm_error(&out) < 1e-10);
            let back = apply(&gate.adjoint(), &out).unwrap();
            let diff = back
                .amplitudes()
                .iter()
                .zip(state.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            prop_assert!(diff < 1e-10);
            Ok(())
        },
    )
}

pub fn circuits_and_encoding_preserve_norm(cases: u32) -> Result<(), String> {
    check(
        cases,
        (state_with_params(2), -PI..PI),
        |((state, params), phi)| {
            let out = run_circuit(&params, &state).unwrap();
            prop_assert!(norm_error(&out) < 1e-10);
            let (encoded, derivative) = encode_with_derivative(&out, phi).unwrap();
            prop_assert!(norm_error(&encoded) < 1e-10);
            // d/dphi <psi|psi> = 2 Re <psi|dpsi> = 0
            let overlap: C64 = encoded
                .amplitudes()
                .iter()
                .zip(derivative.amplitudes())
                .map(|(a, b)| a.conj() * b)
                .sum();
            prop_assert!(overlap.re.abs() < 1e-10);
            Ok(())
        },
    )
}

pub fn appended_zero_layer_is_identity(cases: u32) -> Result<(), String> {
    check(cases, state_with_params(2), |(state, params)| {
        let a = run_circuit(&params, &state).unwrap();
        let b = run_circuit(&params.clone().with_zero_layer(), &state).unwrap();
        let diff = a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        prop_assert!(diff <= 1e-12);
        Ok(())
    })
}

pub fn counting_probabilities_normalized(cases: u32) -> Result<(), String> {
    check(
        cases,
        (kind_strategy().prop_flat_map(random_state), any::<bool>()),
        |(state, emitters)| {
            let table = counting_probabilities(&state, emitters).unwrap();
            prop_assert!((table.total() - 1.0).abs() < 1e-10);
            Ok(())
        },
    )
}

pub fn partial_trace_order_independent(cases: u32) -> Result<(), String> {
    check(cases, random_state(Nonlinearity::Jc), |state| {
        let direct = reduce(&state, &[1, 3]).unwrap();
        let full = ReducedDensity::from_pure(&state);
        let stepwise = full.trace_out(2).unwrap().trace_out(0).unwrap();
        let other_order = full.trace_out(0).unwrap().trace_out(1).unwrap();
        prop_assert!((direct.matrix() - stepwise.matrix()).norm() < 1e-12);
        prop_assert!((direct.matrix() - other_order.matrix()).norm() < 1e-12);
        prop_assert!((direct.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(direct.hermiticity_error() < 1e-12);
        prop_assert!(direct.min_eigenvalue() > -1e-10);
        let swapped = reduce(&state, &[3, 1]).unwrap();
        prop_assert!((swapped.trace().re - 1.0).abs() < 1e-10);
        prop_assert!((swapped.purity() - direct.purity()).abs() < 1e-10);
        Ok(())
    })
}

pub fn homodyne_probabilities_normalized(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            kind_strategy().prop_flat_map(random_state),
            -PI..PI,
            any::<bool>(),
        ),
        |(state, theta, emitters)| {
            let grid = HomodyneGrid::with_points(CUTOFF, 201);
            let table = homodyne_probabilities(&state, theta, &grid, emitters).unwrap();
            prop_assert!((table.integral() - 1.0).abs() < 1e-6);
            Ok(())
        },
    )
}

pub fn cramer_rao_hierarchy(cases: u32) -> Result<(), String> {
    check(
        cases,
        (state_with_params(1), 0.0..PI, 0.1..3.0f64),
        |((state, params), theta, phi)| {
            let kind = params.kind();
            let (encoded, derivative) = encode_with_derivative(&state, phi).unwrap();
            let fq = qfi_variance_oracle(&state, phi).unwrap().value;
            let emitters = kind == Nonlinearity::Jc;
            let measured = run_circuit(&params, &encoded).unwrap();
            let measured_derivative = run_circuit(&params, &derivative).unwrap();
            for model in [
                MeasurementModel::counting(emitters),
                MeasurementModel::homodyne(theta, HomodyneGrid::with_points(CUTOFF, 201), emitters),
            ] {
                let fc = cfi(&encoded, &derivative, &model, phi).unwrap().value;
                prop_assert!(fc <= fq * (1.0 + 1e-6) + 1e-12, "bare {fc} > {fq}");
                let fc = cfi(&measured, &measured_derivative, &model, phi)
                    .unwrap()
                    .value;
                prop_assert!(fc <= fq * (1.0 + 1e-6) + 1e-12, "circuit {fc} > {fq}");
            }
            Ok(())
        },
    )
}

pub fn wigner_normalization_and_purity(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            complex_vec(5),
            prop::collection::vec(0.01..1.0f64, 2),
            any::<bool>(),
            complex_vec(5),
        ),
        |(amps, weights, mixed, other)| {
            let a = DVector::from_vec(normalized(amps));
            let mut rho = &a * a.adjoint();
            if mixed {
                let b = DVector::from_vec(normalized(other));
                let (wa, wb) = (
                    weights[0] / (weights[0] + weights[1]),
                    weights[1] / (weights[0] + weights[1]),
                );
                rho = rho * C64::new(wa, 0.0) + &b * b.adjoint() * C64::new(wb, 0.0);
            }
            let rho = ReducedDensity::from_matrix(vec![5], rho).unwrap();
            let axis = symmetric_axis(6.5, 131).unwrap();
            let w = wigner(&rho, &axis, &axis).unwrap();
            prop_assert!((w.integral() - 1.0).abs() < 1e-3);
            prop_assert!((w.purity() - rho.purity()).abs() < 1e-2);
            prop_assert!(w.min() >= -1.0 / PI - 1e-6);
            prop_assert!(w.max() <= 1.0 / PI + 1e-6);
            Ok(())
        },
    )
}

pub fn warm_start_monotone_and_deterministic(cases: u32) -> Result<(), String> {
    check(
        cases,
        (kind_strategy(), any::<u64>(), 0.5..2.0f64),
        |(kind, master_seed, n)| {
            let protocol = Protocol::new(ProtocolSettings::new(kind, n)).unwrap();
            let config = OptimizerConfig {
                seeds: 2,
                d_max: 3,
                max_iters: 40,
                master_seed,
                ..Default::default()
            };
            let a = optimize_preparation(&protocol, &config).unwrap();
            prop_assert!(a.failures.is_empty());
            for seed in 0..2 {
                let records = a.seed_records(seed);
                prop_assert_eq!(records.len(), 3);
                for w in records.windows(2) {
                    prop_assert!(w[1].best_objective <= w[0].best_objective + 1e-12);
                }
            }
            let b = optimize_preparation(&protocol, &config).unwrap();
            for (x, y) in a.records.iter().zip(&b.records) {
                prop_assert_eq!(&x.best_params, &y.best_params);
                prop_assert_eq!(x.best_objective.to_bits(), y.best_objective.to_bits());
            }
            Ok(())
        },
    )
}

pub fn initial_states_are_normalized() -> Result<(), String> {
    for kind in [Nonlinearity::Jc, Nonlinearity::Kerr] {
        for n in [0.5, 4.0, 20.0] {
            let s = initial_state(kind, n, qmetro::hilbert::default_cutoff(n)).unwrap();
            if norm_error(&s) >= 1e-10 {
                return Err(format!("{kind} N={n} norm error {}", norm_error(&s)));
            }
        }
    }
    Ok(())
}

pub type Check = fn(u32) -> Result<(), String>;

/// Every randomized invariant with its case count.
pub const PROPERTIES: &[(&str, Check, u32)] = &[
    ("gates_are_unitary", gates_are_unitary, 128),
    ("gates_preserve_norm", gates_preserve_norm, 128),
    (
        "circuits_and_encoding_preserve_norm",
        circuits_and_encoding_preserve_norm,
        128,
    ),
    (
        "appended_zero_layer_is_identity",
        appended_zero_layer_is_identity,
        128,
    ),
    (
        "counting_probabilities_normalized",
        counting_probabilities_normalized,
        128,
    ),
    (
        "partial_trace_order_independent",
        partial_trace_order_independent,
        128,
    ),
    (
        "homodyne_probabilities_normalized",
        homodyne_probabilities_normalized,
        100,
    ),
    ("cramer_rao_hierarchy", cramer_rao_hierarchy, 100),
    (
        "wigner_normalization_and_purity",
        wigner_normalization_and_purity,
        100,
    ),
    (
        "warm_start_monotone_and_deterministic",
        warm_start_monotone_and_deterministic,
        100,
    ),
];
