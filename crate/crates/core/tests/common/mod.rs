#![allow(dead_code)]

use icm::circuit::{Circuit, GateOp, Primitive, QubitId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random primitive-only circuit with `1..=max_q` qubits and up to `max_n` gates.
pub fn random_circuit(seed: u64, max_q: usize, max_n: usize) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = rng.gen_range(1..=max_q);
    let n = rng.gen_range(0..=max_n);
    let mut gates = Vec::with_capacity(n);
    for _ in 0..n {
        if q >= 2 && rng.gen_bool(0.3) {
            let c = rng.gen_range(1..=q as u32);
            let mut t = rng.gen_range(1..=q as u32 - 1);
            if t >= c {
                t += 1;
            }
            gates.push(GateOp::cnot(c, t));
        } else {
            let p = Primitive::ALL[rng.gen_range(0..Primitive::ALL.len())];
            gates.push(GateOp::single(p, QubitId(rng.gen_range(1..=q as u32))));
        }
    }
    Circuit::from_gates(q, gates)
}

/// Proptest strategy over primitive-only circuits.
pub fn circuit_strategy(max_q: usize, max_n: usize) -> impl Strategy<Value = Circuit> {
    (1..=max_q).prop_flat_map(move |q| {
        let gate = if q >= 2 {
            prop_oneof![
                (0..Primitive::ALL.len(), 1..=q as u32)
                    .prop_map(|(p, t)| GateOp::single(Primitive::ALL[p], QubitId(t))),
                (1..=q as u32, 1..q as u32).prop_map(|(c, t)| {
                    let t = if t >= c { t + 1 } else { t };
                    GateOp::cnot(c, t)
                }),
            ]
            .boxed()
        } else {
            (0..Primitive::ALL.len())
                .prop_map(|p| GateOp::single(Primitive::ALL[p], QubitId(1)))
                .boxed()
        };
        prop::collection::vec(gate, 0..=max_n).prop_map(move |g| Circuit::from_gates(q, g))
    })
}

pub fn count(c: &Circuit, pred: impl Fn(Primitive) -> bool) -> usize {
    c.gates
        .iter()
        .filter_map(|g| g.primitive())
        .filter(|(p, _)| pred(*p))
        .count()
}
