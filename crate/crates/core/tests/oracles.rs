mod common;

use icm::circuit::{
    compute_stats, Circuit, GateOp, IcmCircuit, InitBasis, MagicKind, Pauli, QubitId,
};
use icm::db::Database;
use icm::sim::distill::{target_state, DistillTable};
use icm::sim::{simulate, OutcomeAssignment, SimOptions, StateVector};
use icm::transform::{expand_nicm, inline_distillation, ConversionOptions};
use icm::unitary::{recognize_unitary, sequence_matrix, Generator, UnitarySpec};

/// Longest path through the gate DAG, counting T/T† nodes.
fn t_depth_by_dag(c: &Circuit) -> usize {
    let mut preds: Vec<Vec<usize>> = Vec::new();
    let mut last: Vec<Option<usize>> = vec![None; c.qubit_count()];
    for g in &c.gates {
        let mut p = Vec::new();
        for q in g.qubits() {
            if let Some(i) = last[q.index()] {
                p.push(i);
            }
        }
        for q in g.qubits() {
            last[q.index()] = Some(preds.len());
        }
        preds.push(p);
    }
    let mut longest = vec![0usize; c.gates.len()];
    for (i, g) in c.gates.iter().enumerate() {
        let own = usize::from(g.primitive().is_some_and(|(p, _)| p.is_t()));
        longest[i] = own + preds[i].iter().map(|j| longest[*j]).max().unwrap_or(0);
    }
    longest.into_iter().max().unwrap_or(0)
}

#[test]
fn toffoli_t_depth_matches_dag_oracle() {
    let db = Database::seed();
    let c = Circuit::from_gates(3, vec![GateOp::named("toffoli", &[1, 2, 3])]);
    let e = expand_nicm(&c, &db).unwrap();
    let stats = compute_stats(&e);
    assert_eq!(stats.t_count, 7);
    assert_eq!(stats.t_depth, t_depth_by_dag(&e));
}

#[test]
fn random_t_depths_match_dag_oracle() {
    for seed in 0..300 {
        let c = common::random_circuit(seed, 5, 30);
        assert_eq!(compute_stats(&c).t_depth, t_depth_by_dag(&c), "seed {seed}");
    }
}

/// All generator sequences of length `len` in lexicographic order.
fn sequences(len: usize) -> Vec<Vec<Generator>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                Generator::ALL.iter().map(move |g| {
                    let mut t = s.clone();
                    t.push(*g);
                    t
                })
            })
            .collect();
    }
    out
}

#[test]
fn recognition_returns_the_lexicographically_first_shortest_product() {
    let by_len: Vec<Vec<Vec<Generator>>> = (0..=3).map(sequences).collect();
    for target in &by_len[3] {
        let m = sequence_matrix(target);
        let spec = UnitarySpec::new("g", m.clone()).unwrap();
        let got = recognize_unitary(&spec, 6, 1e-9).unwrap().sequence;
        let want = by_len
            .iter()
            .flatten()
            .find(|s| sequence_matrix(s).phase_fidelity(&m) > 1.0 - 1e-9)
            .unwrap();
        assert_eq!(&got, want, "target {target:?}");
    }
}

fn y_distiller_circuit() -> IcmCircuit {
    let mut c = Circuit::new(1);
    c.inits[0] = InitBasis::Y;
    let icm = IcmCircuit::new(c).unwrap();
    let opts = ConversionOptions {
        rounds: 1,
        ..Default::default()
    };
    inline_distillation(&icm, &Database::seed(), &opts).unwrap()
}

fn syndrome(icm: &IcmCircuit, outcomes: &std::collections::BTreeMap<QubitId, u8>) -> usize {
    icm.distillers[0]
        .syndrome
        .iter()
        .fold(0, |acc, q| acc << 1 | outcomes[q] as usize)
}

fn corrected_output(state: StateVector, p: Pauli) -> StateVector {
    let mut s = state;
    s.apply_pauli(0, p);
    s
}

#[test]
fn inlined_y_distiller_agrees_with_outcome_table() {
    let icm = y_distiller_circuit();
    assert!(icm.qubit_count() <= 16);
    let table = DistillTable::for_kind(MagicKind::Y, &Database::seed()).unwrap();
    let empty = StateVector::zero(0);
    let target = target_state(MagicKind::Y);
    for seed in 0..40 {
        let r = simulate(
            &icm,
            &empty,
            &OutcomeAssignment::sampled(seed),
            &SimOptions::default(),
        )
        .unwrap();
        let s = syndrome(&icm, &r.outcomes);
        assert!(
            table.supported(s),
            "seed {seed}: pattern {s:07b} outside the ideal support"
        );
        let out = corrected_output(r.output_state(), table.correction(s));
        assert!((out.fidelity(&target) - 1.0).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn single_injection_errors_are_always_detected() {
    let icm = y_distiller_circuit();
    let table = DistillTable::for_kind(MagicKind::Y, &Database::seed()).unwrap();
    let resources: Vec<QubitId> = icm.blocks.iter().filter_map(|b| b.resource).collect();
    assert_eq!(resources.len(), 7);
    for (k, q) in resources.iter().enumerate() {
        let opts = SimOptions {
            z_errors: vec![*q],
            ..Default::default()
        };
        for seed in 0..8 {
            let r = simulate(
                &icm,
                &StateVector::zero(0),
                &OutcomeAssignment::sampled(seed),
                &opts,
            )
            .unwrap();
            let s = syndrome(&icm, &r.outcomes);
            assert!(
                !table.supported(s),
                "error on code qubit {k} slipped through (seed {seed})"
            );
        }
    }
}
