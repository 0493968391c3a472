//! Statevector verification oracle.
//!
//! [`simulate`] runs a circuit (pre-ICM or ICM) on a dense state. Each qubit
//! is measured as soon as its last gate has been applied and every
//! measurement it depends on is known, so classically tracked Pauli
//! corrections can be applied physically right after the measurements that
//! trigger them, before the corrected qubit takes part in further gates.

pub mod distill;
mod state;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use state::{single, StateVector};

use crate::circuit::{
    Basis, Circuit, GateOp, Guard, InitBasis, MeasBasis, Pauli, Primitive, QubitId,
};
use crate::matrix::{c, Matrix, C};
use crate::par::{map_indexed, ExecPolicy};

/// Largest circuit the oracle accepts.
pub const MAX_QUBITS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("circuit has {0} qubits, the simulator is limited to {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("post-selected outcome on qubit {0} has zero probability")]
    ZeroProbability(QubitId),
    #[error("qubit {0} is assigned an outcome but is never measured")]
    NotMeasured(QubitId),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("input state has {found} qubits, circuit has {expected} inputs")]
    Dimension { expected: usize, found: usize },
    #[error("result is not unitary (error {0:.3e})")]
    NonUnitary(f64),
    #[error("no trial was accepted")]
    ZeroAccepted,
    #[error("malformed circuit: {0}")]
    Circuit(#[from] crate::circuit::CircuitError),
}

/// What to do with measurements not listed in `fixed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Unassigned {
    /// Post-select outcome 0.
    #[default]
    Zero,
    /// Sample from the Born rule with this seed.
    Sample(u64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutcomeAssignment {
    pub fixed: BTreeMap<QubitId, u8>,
    pub rest: Unassigned,
}

impl OutcomeAssignment {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn sampled(seed: u64) -> Self {
        OutcomeAssignment {
            fixed: BTreeMap::new(),
            rest: Unassigned::Sample(seed),
        }
    }

    pub fn with(mut self, q: QubitId, bit: u8) -> Self {
        self.fixed.insert(q, bit);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Apply Pauli frame rules physically.
    pub frame: bool,
    /// Apply pending Clifford corrections of probabilistic T blocks.
    pub pending: bool,
    /// Qubits receiving a Z error right after initialisation.
    pub z_errors: Vec<QubitId>,
    pub policy: ExecPolicy,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            frame: true,
            pending: true,
            z_errors: Vec::new(),
            policy: ExecPolicy::default(),
        }
    }
}

impl SimOptions {
    pub fn frame_off() -> Self {
        SimOptions {
            frame: false,
            pending: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    /// Full register after all measurements, normalised.
    pub state: StateVector,
    /// Product of the probabilities of post-selected outcomes.
    pub acceptance: f64,
    pub outcomes: BTreeMap<QubitId, u8>,
    pub bases: BTreeMap<QubitId, Basis>,
    /// Corrections that were due but not applied (frame off).
    pub frame: BTreeMap<QubitId, Pauli>,
    /// Unmeasured qubits in logical order, see [`output_order`].
    pub outputs: Vec<QubitId>,
}

impl SimResult {
    /// State of the unmeasured qubits in `outputs` order.
    pub fn output_state(&self) -> StateVector {
        let mut s = self.state.clone();
        let mut fixed = Vec::new();
        for (q, b) in &self.bases {
            if *b == Basis::X {
                s.apply_primitive(q.index(), Primitive::H);
            }
            fixed.push((q.index(), self.outcomes[q]));
        }
        let keep: Vec<usize> = self.outputs.iter().map(|q| q.index()).collect();
        s.slice(&keep, &fixed)
    }
}

/// Unmeasured qubits ordered so that the k-th follows the k-th input
/// through its chain of teleportation blocks; qubits not reached that way
/// (fresh outputs) come last in ascending id.
pub fn output_order(circuit: &Circuit) -> Vec<QubitId> {
    let next: BTreeMap<QubitId, QubitId> =
        circuit.blocks.iter().map(|b| (b.input, b.output)).collect();
    let unmeasured: BTreeSet<QubitId> = circuit.outputs().into_iter().collect();
    let mut order = Vec::with_capacity(unmeasured.len());
    let mut used = BTreeSet::new();
    for q in circuit.inputs() {
        let mut w = q;
        while let Some(o) = next.get(&w) {
            w = *o;
        }
        if unmeasured.contains(&w) && used.insert(w) {
            order.push(w);
        }
    }
    order.extend(unmeasured.difference(&used).copied());
    order
}

pub fn init_state(b: InitBasis) -> StateVector {
    let h = FRAC_1_SQRT_2;
    match b {
        InitBasis::Zero | InitBasis::Empty => single(c(1.0, 0.0), c(0.0, 0.0)),
        InitBasis::Plus => single(c(h, 0.0), c(h, 0.0)),
        InitBasis::A => single(c(h, 0.0), C::from_polar(h, FRAC_PI_4)),
        InitBasis::Y => single(c(h, 0.0), c(0.0, h)),
    }
}

fn prepare(circuit: &Circuit, input: &StateVector, policy: ExecPolicy) -> StateVector {
    let n = circuit.qubit_count();
    let inputs = circuit.inputs();
    let single: Vec<StateVector> = circuit
        .qubits()
        .map(|q| init_state(circuit.init(q)))
        .collect();
    let m = inputs.len();
    let mut amps = vec![c(0.0, 0.0); 1 << n];
    for (idx, slot) in amps.iter_mut().enumerate() {
        let mut v = c(1.0, 0.0);
        let mut k = 0usize;
        let mut j = 0usize;
        for q in 0..n {
            let bit = (idx >> (n - 1 - q)) & 1;
            if j < m && inputs[j].index() == q {
                k |= bit << (m - 1 - j);
                j += 1;
            } else {
                v *= single[q].amplitudes()[bit];
            }
            if v.norm_sqr() == 0.0 {
                break;
            }
        }
        if v.norm_sqr() != 0.0 {
            *slot = v * input.amplitudes()[k];
        }
    }
    StateVector::from_amplitudes(amps).with_policy(policy)
}

struct Run<'a> {
    circuit: &'a Circuit,
    opts: &'a SimOptions,
    outcomes: &'a OutcomeAssignment,
    state: StateVector,
    rng: Option<ChaCha8Rng>,
    last_gate: Vec<Option<usize>>,
    preds: Vec<Vec<QubitId>>,
    waiting: BTreeSet<QubitId>,
    result_outcomes: BTreeMap<QubitId, u8>,
    bases: BTreeMap<QubitId, Basis>,
    fired: Vec<bool>,
    frame: BTreeMap<QubitId, Pauli>,
    acceptance: f64,
}

impl Run<'_> {
    fn correct(&mut self, target: QubitId, pauli: Pauli) {
        if !self.opts.frame {
            let e = self.frame.entry(target).or_insert(Pauli::I);
            *e = e.compose(pauli);
            return;
        }
        match self.bases.get(&target) {
            None => self.state.apply_pauli(target.index(), pauli),
            Some(b) => {
                if pauli.flips(*b) {
                    *self.result_outcomes.get_mut(&target).unwrap() ^= 1;
                }
            }
        }
    }

    fn fire_rules(&mut self) {
        let circuit = self.circuit;
        for (i, rule) in circuit.frame.iter().enumerate() {
            if self.fired[i]
                || !rule
                    .referenced()
                    .iter()
                    .all(|q| self.result_outcomes.contains_key(q))
            {
                continue;
            }
            self.fired[i] = true;
            let guard_ok = match &rule.guard {
                None => true,
                Some(Guard::Outcome(q, b)) => self.result_outcomes[q] == *b,
                Some(Guard::Basis(q, b)) => self.bases[q] == *b,
            };
            let parity = rule
                .parity
                .iter()
                .fold(rule.negate, |acc, q| acc ^ (self.result_outcomes[q] == 1));
            if guard_ok && parity {
                self.correct(rule.target, rule.pauli);
            }
        }
    }

    fn measure(&mut self, q: QubitId) -> Result<(), SimError> {
        let circuit = self.circuit;
        let m = circuit.measurement(q);
        let parity = m
            .deps()
            .iter()
            .fold(false, |acc, d| acc ^ (self.result_outcomes[d] == 1));
        let basis = match m {
            MeasBasis::A => {
                self.state.apply_primitive(q.index(), Primitive::T);
                Basis::X
            }
            MeasBasis::Y => {
                self.state.apply_primitive(q.index(), Primitive::P);
                Basis::X
            }
            other => other.resolve(parity).expect("measured qubits have a basis"),
        };
        let (bit, post_selected) = match (self.outcomes.fixed.get(&q), self.rng.as_mut()) {
            (Some(b), _) => (*b, true),
            (None, Some(rng)) => {
                let p0 = self.state.probability(q.index(), basis, 0);
                (u8::from(rng.gen::<f64>() >= p0), false)
            }
            (None, None) => (0, true),
        };
        let p = self.state.project(q.index(), basis, bit);
        if p <= 1e-14 {
            return Err(SimError::ZeroProbability(q));
        }
        if post_selected {
            self.acceptance *= p;
        }
        self.result_outcomes.insert(q, bit);
        self.bases.insert(q, basis);
        // Pauli corrections first: the Clifford fix-up assumes a clean frame.
        self.fire_rules();
        if self.opts.pending {
            for b in &circuit.blocks {
                if let Some(pc) = &b.pending {
                    if pc.trigger == q && pc.outcome == bit {
                        if self.bases.contains_key(&b.output) {
                            return Err(SimError::Unsupported(format!(
                                "pending correction on measured qubit {}",
                                b.output
                            )));
                        }
                        self.state.apply_primitive(b.output.index(), pc.gate);
                    }
                }
            }
        }
        Ok(())
    }

    /// Measures everything that is ready once `done` gates have been applied.
    fn settle(&mut self, done: usize) -> Result<(), SimError> {
        loop {
            let ready = self.waiting.iter().copied().find(|q| {
                self.last_gate[q.index()].is_none_or(|g| g < done)
                    && self.preds[q.index()]
                        .iter()
                        .all(|p| self.result_outcomes.contains_key(p))
            });
            let Some(q) = ready else { return Ok(()) };
            self.waiting.remove(&q);
            self.measure(q)?;
        }
    }
}

/// Runs `circuit` on `input`, a state over the circuit's configurable
/// inputs (ascending id).
pub fn simulate(
    circuit: &Circuit,
    input: &StateVector,
    outcomes: &OutcomeAssignment,
    opts: &SimOptions,
) -> Result<SimResult, SimError> {
    let n = circuit.qubit_count();
    if n > MAX_QUBITS {
        return Err(SimError::TooManyQubits(n));
    }
    circuit.check()?;
    if !circuit.selections.is_empty() {
        return Err(SimError::Unsupported("selective-source joins".into()));
    }
    let inputs = circuit.inputs();
    if input.qubits() != inputs.len() {
        return Err(SimError::Dimension {
            expected: inputs.len(),
            found: input.qubits(),
        });
    }
    for q in outcomes.fixed.keys() {
        if !circuit.contains(*q) || *circuit.measurement(*q) == MeasBasis::Empty {
            return Err(SimError::NotMeasured(*q));
        }
    }
    let mut state = prepare(circuit, input, opts.policy);
    for q in &opts.z_errors {
        state.apply_pauli(q.index(), Pauli::Z);
    }
    let mut last_gate = vec![None; n];
    for (i, g) in circuit.gates.iter().enumerate() {
        for q in g.qubits() {
            last_gate[q.index()] = Some(i);
        }
    }
    let measured = |q: QubitId| *circuit.measurement(q) != MeasBasis::Empty;
    let mut preds = vec![Vec::new(); n];
    for (a, b) in circuit.dependency_edges() {
        if measured(a) && measured(b) {
            preds[b.index()].push(a);
        }
    }
    let waiting: BTreeSet<QubitId> = circuit.qubits().filter(|q| measured(*q)).collect();
    let rng = match outcomes.rest {
        Unassigned::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Unassigned::Zero => None,
    };
    let mut run = Run {
        circuit,
        opts,
        outcomes,
        state,
        rng,
        last_gate,
        preds,
        waiting,
        result_outcomes: BTreeMap::new(),
        bases: BTreeMap::new(),
        fired: vec![false; circuit.frame.len()],
        frame: BTreeMap::new(),
        acceptance: 1.0,
    };
    run.settle(0)?;
    for (i, g) in circuit.gates.iter().enumerate() {
        match g {
            GateOp::Cnot { control, target } => run.state.cnot(control.index(), target.index()),
            GateOp::Named { .. } => match g.primitive() {
                Some((p, q)) => run.state.apply_primitive(q.index(), p),
                None => {
                    return Err(SimError::Unsupported(format!(
                        "gate {g:?} is not a primitive"
                    )))
                }
            },
        }
        run.settle(i + 1)?;
    }
    if let Some(q) = run.waiting.first() {
        return Err(SimError::Unsupported(format!(
            "measurement of qubit {q} never became ready (dependency cycle)"
        )));
    }
    Ok(SimResult {
        state: run.state,
        acceptance: run.acceptance,
        outcomes: run.result_outcomes,
        bases: run.bases,
        frame: run.frame,
        outputs: output_order(circuit),
    })
}

/// Matrix mapping the configurable inputs (ascending id) to the unmeasured
/// outputs (in [`output_order`]) for fixed measurement outcomes.
pub fn circuit_unitary(
    circuit: &Circuit,
    outcomes: &OutcomeAssignment,
    opts: &SimOptions,
) -> Result<Matrix, SimError> {
    if matches!(outcomes.rest, Unassigned::Sample(_)) {
        return Err(SimError::Unsupported(
            "circuit_unitary needs post-selected outcomes".into(),
        ));
    }
    let m = circuit.inputs().len();
    let outs = circuit.outputs().len();
    if m != outs {
        return Err(SimError::Dimension {
            expected: m,
            found: outs,
        });
    }
    let dim = 1usize << m;
    let inner = SimOptions {
        policy: ExecPolicy::Sequential,
        ..opts.clone()
    };
    let cols = map_indexed(opts.policy, dim, |k| {
        let r = simulate(circuit, &StateVector::basis(m, k), outcomes, &inner)?;
        let scale = r.acceptance.sqrt();
        Ok(r.output_state()
            .amplitudes()
            .iter()
            .map(|a| a * scale)
            .collect::<Vec<C>>())
    });
    let cols = cols.into_iter().collect::<Result<Vec<_>, SimError>>()?;
    let raw = Matrix::from_columns(dim, &cols);
    let mass: f64 = raw.data().iter().map(|v| v.norm_sqr()).sum::<f64>() / dim as f64;
    if mass <= 0.0 {
        return Err(SimError::NonUnitary(f64::INFINITY));
    }
    let u = raw.scale(c(1.0 / mass.sqrt(), 0.0));
    let err = u.unitarity_error();
    if err > 1e-9 {
        return Err(SimError::NonUnitary(err));
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{cnot_matrix, gate1, to_matrix};

    #[test]
    fn cnot_oracle_matches_permutation() {
        let c = Circuit::from_gates(2, vec![GateOp::cnot(1, 2)]);
        let u = circuit_unitary(&c, &OutcomeAssignment::zeros(), &SimOptions::default()).unwrap();
        assert!(u.max_abs_diff(&cnot_matrix()) < 1e-15);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(0);
        let u = circuit_unitary(&c, &OutcomeAssignment::zeros(), &SimOptions::default()).unwrap();
        assert_eq!(u.dim(), 1);
    }

    #[test]
    fn simple_t_block() {
        let circ: Circuit = "init 2 A\ncnot 2 1\nmeasure 1 Z\n".parse().unwrap();
        let opts = SimOptions::frame_off();
        let psi = single(c(0.6, 0.0), c(0.0, 0.8));
        let r = simulate(&circ, &psi, &OutcomeAssignment::zeros(), &opts).unwrap();
        assert!((r.acceptance - 0.5).abs() < 1e-12);
        let mut want = psi.clone();
        want.apply_primitive(0, Primitive::T);
        assert!((r.output_state().fidelity(&want) - 1.0).abs() < 1e-12);

        let r = simulate(
            &circ,
            &psi,
            &OutcomeAssignment::zeros().with(QubitId(1), 1),
            &opts,
        )
        .unwrap();
        let mut want = psi.clone();
        want.apply_primitive(0, Primitive::Tdag);
        want.apply_pauli(0, Pauli::X);
        assert!((r.output_state().fidelity(&want) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn teleported_p_on_plus_gives_y() {
        let c: Circuit = "init 2 Y\ncnot 2 1\nmeasure 1 Z\n".parse().unwrap();
        let plus = init_state(InitBasis::Plus);
        let r = simulate(
            &c,
            &plus,
            &OutcomeAssignment::zeros(),
            &SimOptions::frame_off(),
        )
        .unwrap();
        assert!((r.output_state().fidelity(&init_state(InitBasis::Y)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pre_icm_gates() {
        let c = Circuit::from_gates(1, vec![GateOp::named("HGATE", &[1])]);
        let u = circuit_unitary(&c, &OutcomeAssignment::zeros(), &SimOptions::default()).unwrap();
        assert!(u.phase_fidelity(&to_matrix(&gate1(Primitive::H))) > 1.0 - 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let c = Circuit::new(17);
        let r = simulate(
            &c,
            &StateVector::zero(17),
            &OutcomeAssignment::zeros(),
            &SimOptions::default(),
        );
        assert_eq!(r.unwrap_err(), SimError::TooManyQubits(17));
    }

    #[test]
    fn zero_probability_post_selection_errors() {
        let c: Circuit = "init 1 0\nmeasure 1 Z\n".parse().unwrap();
        let r = simulate(
            &c,
            &StateVector::zero(0),
            &OutcomeAssignment::zeros().with(QubitId(1), 1),
            &SimOptions::default(),
        );
        assert_eq!(r.unwrap_err(), SimError::ZeroProbability(QubitId(1)));
    }

    #[test]
    fn unmeasured_assignment_rejected() {
        let c = Circuit::new(1);
        let r = simulate(
            &c,
            &StateVector::zero(1),
            &OutcomeAssignment::zeros().with(QubitId(1), 0),
            &SimOptions::default(),
        );
        assert_eq!(r.unwrap_err(), SimError::NotMeasured(QubitId(1)));
    }
}
