//! Rewrite engine: nicm expansion (`processraw`), conversion to ICM form
//! (`convertft`) and inlining of distillation circuits.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::circuit::{
    validate_icm, Basis, BlockKind, Circuit, CircuitError, DistillerRecord, FrameRule, GateOp,
    Guard, IcmCircuit, InitBasis, MagicKind, MeasBasis, Pauli, PendingCorrection, Primitive,
    QubitId, SourceSelection, TeleportBlock, ValidationReport,
};
use crate::db::{Database, DecompEntry, DecompKind, EntryBody, GridToken, MeasToken};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("no database entry for gate '{0}'")]
    MissingEntry(String),
    #[error("gate '{name}' takes {expected} qubits, got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("substitution cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("gate '{0}' cannot be converted to ICM form")]
    Unconvertible(String),
    #[error("entry '{name}' is unusable here: {msg}")]
    BadEntry { name: String, msg: String },
    #[error("distillation requested but entry '{0}' is missing")]
    MissingDistiller(String),
    #[error("qubit {0} is measured twice")]
    DoubleMeasurement(QubitId),
    #[error("result violates the ICM form: {0}")]
    NotIcm(ValidationReport),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TeleportMode {
    /// One |A⟩ ancilla; outcome 1 owes a P correction.
    #[default]
    Simple,
    /// Selective source/destination teleportation, corrections are Pauli only.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConversionOptions {
    pub mode: TeleportMode,
    pub rounds: usize,
    /// Copies of each distiller, joined by selective-source teleportation.
    pub duplicates: usize,
}

impl Default for ConversionOptions {
    fn default() -> Self {
        ConversionOptions {
            mode: TeleportMode::Simple,
            rounds: 0,
            duplicates: 1,
        }
    }
}

/// Hands out fresh qubit ids after the highest one in use.
#[derive(Debug, Clone)]
pub struct AncillaAllocator {
    next: u32,
}

impl AncillaAllocator {
    pub fn new(circuit: &Circuit) -> Self {
        AncillaAllocator {
            next: circuit.qubit_count() as u32 + 1,
        }
    }

    pub fn fresh(&mut self, circuit: &mut Circuit, init: InitBasis) -> QubitId {
        let q = circuit.add_qubit();
        assert_eq!(q.0, self.next, "allocator out of sync with circuit");
        self.next += 1;
        circuit.inits[q.index()] = init;
        q
    }
}

// ---------------------------------------------------------------------------
// nicm expansion
// ---------------------------------------------------------------------------

/// Replaces every non-primitive gate by its nicm entry until only CNOTs and
/// single-qubit primitives remain.
pub fn expand_nicm(circuit: &Circuit, db: &Database) -> Result<Circuit, TransformError> {
    circuit.check()?;
    let mut out = circuit.clone();
    out.gates.clear();
    let mut alloc = AncillaAllocator::new(circuit);
    let mut stack = Vec::new();
    for g in &circuit.gates {
        expand_gate(g, db, &mut out, &mut alloc, &mut stack)?;
    }
    Ok(out)
}

fn expand_gate(
    g: &GateOp,
    db: &Database,
    out: &mut Circuit,
    alloc: &mut AncillaAllocator,
    stack: &mut Vec<String>,
) -> Result<(), TransformError> {
    let GateOp::Named { name, qubits } = g else {
        out.gates.push(g.clone());
        return Ok(());
    };
    if let Some(p) = Primitive::from_token(name) {
        if qubits.len() != 1 {
            return Err(TransformError::Arity {
                name: name.clone(),
                expected: 1,
                found: qubits.len(),
            });
        }
        out.gates.push(GateOp::single(p, qubits[0]));
        return Ok(());
    }
    if stack.contains(name) {
        let mut cyc = stack.clone();
        cyc.push(name.clone());
        return Err(TransformError::Cycle(cyc));
    }
    let entry = db
        .get(name)
        .ok_or_else(|| TransformError::MissingEntry(name.clone()))?;
    let EntryBody::Nicm { rows } = &entry.body else {
        return Err(TransformError::BadEntry {
            name: name.clone(),
            msg: "not an nicm decomposition".into(),
        });
    };
    if qubits.len() != entry.arity() {
        return Err(TransformError::Arity {
            name: name.clone(),
            expected: entry.arity(),
            found: qubits.len(),
        });
    }
    let mut operands = qubits.clone();
    for _ in 0..entry.ancillas {
        operands.push(alloc.fresh(out, InitBasis::Zero));
    }
    stack.push(name.clone());
    let width = rows.first().map_or(0, |r| r.len());
    for t in 0..width {
        let mut ctrl = Vec::new();
        let mut tgt = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            let q = operands[r];
            match &row[t] {
                GridToken::Wire => {}
                GridToken::Ctrl => ctrl.push(q),
                GridToken::Tgt => tgt.push(q),
                GridToken::Gate(p) => out.gates.push(GateOp::single(*p, q)),
                GridToken::Entry(sub) => expand_gate(
                    &GateOp::Named {
                        name: sub.clone(),
                        qubits: vec![q],
                    },
                    db,
                    out,
                    alloc,
                    stack,
                )?,
                GridToken::MeasX | GridToken::MeasZ => {
                    if *out.measurement(q) != MeasBasis::Empty {
                        return Err(TransformError::DoubleMeasurement(q));
                    }
                    out.measurements[q.index()] = if row[t] == GridToken::MeasX {
                        MeasBasis::X
                    } else {
                        MeasBasis::Z
                    };
                }
            }
        }
        match (ctrl.as_slice(), tgt.as_slice()) {
            ([], []) => {}
            ([c], [x]) => out.gates.push(GateOp::Cnot {
                control: *c,
                target: *x,
            }),
            _ => {
                return Err(TransformError::BadEntry {
                    name: name.clone(),
                    msg: format!("column {} is not a single CNOT", t + 1),
                })
            }
        }
    }
    stack.pop();
    Ok(())
}

// ---------------------------------------------------------------------------
// Teleportation blocks
// ---------------------------------------------------------------------------

/// Pauli-frame rule over entry positions (1-based).
struct RuleT {
    target: u32,
    pauli: Pauli,
    parity: &'static [u32],
    negate: bool,
    guard: Option<(u32, u8)>,
}

const fn rule(target: u32, pauli: Pauli, parity: &'static [u32], negate: bool) -> RuleT {
    RuleT {
        target,
        pauli,
        parity,
        negate,
        guard: None,
    }
}

const fn guarded(
    guard: (u32, u8),
    target: u32,
    pauli: Pauli,
    parity: &'static [u32],
    negate: bool,
) -> RuleT {
    RuleT {
        target,
        pauli,
        parity,
        negate,
        guard: Some(guard),
    }
}

struct BlockTemplate {
    entry: &'static str,
    kind: BlockKind,
    rules: &'static [RuleT],
    /// `(outcome of position 1, correction)` owed on the output.
    pending: Option<(u8, Primitive)>,
}

// Outcome tables. Position 1 is the data input and trigger; the output is
// the entry's unmeasured position. In the deterministic blocks a
// conditional measurement `MAB` realises A when the trigger reads 1 and B
// when it reads 0.
static T_RULES: [RuleT; 1] = [rule(2, Pauli::X, &[1], false)];
static P_RULES: [RuleT; 1] = [rule(2, Pauli::Y, &[1], false)];
static PDAG_RULES: [RuleT; 2] = [
    rule(2, Pauli::X, &[1], false),
    rule(2, Pauli::Z, &[1], true),
];
static H_RULES: [RuleT; 3] = [
    rule(2, Pauli::Y, &[1], false),
    rule(3, Pauli::Y, &[2], false),
    rule(4, Pauli::Y, &[3], true),
];
static T_DET_RULES: [RuleT; 4] = [
    guarded((1, 0), 6, Pauli::X, &[3, 4], false),
    guarded((1, 0), 6, Pauli::Z, &[2, 5], false),
    guarded((1, 1), 6, Pauli::X, &[2, 5], true),
    guarded((1, 1), 6, Pauli::Z, &[2, 3, 4], true),
];
static TDAG_DET_RULES: [RuleT; 4] = [
    guarded((1, 0), 6, Pauli::X, &[2, 5], false),
    guarded((1, 0), 6, Pauli::Z, &[2, 3, 4], true),
    guarded((1, 1), 6, Pauli::X, &[3, 4], true),
    guarded((1, 1), 6, Pauli::Z, &[2, 5], false),
];

fn template(p: Primitive, mode: TeleportMode) -> BlockTemplate {
    use TeleportMode::*;
    let (entry, rules, pending): (&'static str, &'static [RuleT], _) = match (p, mode) {
        (Primitive::T, Simple) => ("TGATE", &T_RULES, Some((1, Primitive::P))),
        (Primitive::Tdag, Simple) => ("TDAG", &T_RULES, Some((0, Primitive::Pdag))),
        (Primitive::T, Deterministic) => ("TGATE_DET", &T_DET_RULES, None),
        (Primitive::Tdag, Deterministic) => ("TDAG_DET", &TDAG_DET_RULES, None),
        (Primitive::P, _) => ("PGATE", &P_RULES, None),
        (Primitive::Pdag, _) => ("PDAG", &PDAG_RULES, None),
        (Primitive::H, _) => ("HGATE", &H_RULES, None),
    };
    BlockTemplate {
        entry,
        kind: BlockKind::from_primitive(p),
        rules,
        pending,
    }
}

/// Name of the icm entry used for a primitive in the given mode.
pub fn block_entry(p: Primitive, mode: TeleportMode) -> &'static str {
    template(p, mode).entry
}

fn icm_parts(entry: &DecompEntry) -> Result<(&[InitBasis], &[MeasToken]), TransformError> {
    match &entry.body {
        EntryBody::Icm { inits, meas, .. } if entry.kind != DecompKind::Nicm => Ok((inits, meas)),
        _ => Err(TransformError::BadEntry {
            name: entry.name.clone(),
            msg: "not an icm decomposition".into(),
        }),
    }
}

/// Appends the teleportation block for `p` acting on `input` to `gates`
/// (whose first element sits at `offset` in the final gate list) and
/// returns the block's output qubit.
fn apply_block(
    p: Primitive,
    input: QubitId,
    db: &Database,
    mode: TeleportMode,
    out: &mut Circuit,
    gates: &mut Vec<GateOp>,
    alloc: &mut AncillaAllocator,
) -> Result<QubitId, TransformError> {
    let tpl = template(p, mode);
    let entry = db
        .get(tpl.entry)
        .ok_or_else(|| TransformError::MissingEntry(tpl.entry.to_string()))?;
    let (inits, meas) = icm_parts(entry)?;
    let bad = |msg: &str| TransformError::BadEntry {
        name: entry.name.clone(),
        msg: msg.to_string(),
    };
    if entry.arity() != 1 || inits[0] != InitBasis::Empty {
        return Err(bad(
            "teleportation entries take one EMPTY input in position 1",
        ));
    }
    let outputs: Vec<usize> = (0..meas.len())
        .filter(|i| meas[*i] == MeasToken::Empty)
        .collect();
    if outputs.len() != 1 || outputs[0] == 0 {
        return Err(bad(
            "teleportation entries need exactly one unmeasured ancilla",
        ));
    }
    if *out.measurement(input) != MeasBasis::Empty {
        return Err(TransformError::DoubleMeasurement(input));
    }
    let mut map = vec![input];
    for b in &inits[1..] {
        map.push(alloc.fresh(out, *b));
    }
    let at = |pos: u32| map[pos as usize - 1];
    let start = gates.len();
    for (a, b) in entry.cnots() {
        gates.push(GateOp::Cnot {
            control: at(a),
            target: at(b),
        });
    }
    let fixed: Vec<QubitId> = meas
        .iter()
        .enumerate()
        .filter(|(_, m)| matches!(m, MeasToken::Z | MeasToken::X))
        .map(|(i, _)| map[i])
        .collect();
    for (i, m) in meas.iter().enumerate() {
        if *m != MeasToken::Empty {
            out.measurements[map[i].index()] = m.to_basis(fixed.clone());
        }
    }
    for r in tpl.rules {
        out.frame.push(FrameRule {
            target: at(r.target),
            pauli: r.pauli,
            parity: r.parity.iter().map(|p| at(*p)).collect(),
            negate: r.negate,
            guard: r.guard.map(|(q, b)| Guard::Outcome(at(q), b)),
        });
    }
    let output = map[outputs[0]];
    let resource_basis = if tpl.kind.is_t() {
        InitBasis::A
    } else {
        InitBasis::Y
    };
    let resource = inits
        .iter()
        .position(|b| *b == resource_basis)
        .map(|i| map[i]);
    out.blocks.push(TeleportBlock {
        kind: tpl.kind,
        entry: entry.name.clone(),
        input,
        output,
        resource,
        measured: (0..meas.len())
            .filter(|i| meas[*i] != MeasToken::Empty)
            .map(|i| map[i])
            .collect(),
        qubits: map.clone(),
        gates: start..gates.len(),
        pending: tpl.pending.map(|(outcome, gate)| PendingCorrection {
            trigger: input,
            outcome,
            gate,
        }),
    });
    Ok(output)
}

/// Adds ordering edges so every measured frame-rule target is read only
/// after the outcomes its correction depends on.
fn add_frame_edges(c: &mut Circuit) {
    let mut edges: BTreeSet<(QubitId, QubitId)> = c.schedule.iter().copied().collect();
    let implied: BTreeSet<(QubitId, QubitId)> = c
        .qubits()
        .flat_map(|q| c.measurement(q).deps().iter().map(move |d| (*d, q)))
        .collect();
    for r in &c.frame {
        if *c.measurement(r.target) == MeasBasis::Empty {
            continue;
        }
        for q in r.referenced() {
            if q != r.target && !implied.contains(&(q, r.target)) {
                edges.insert((q, r.target));
            }
        }
    }
    c.schedule = edges.into_iter().collect();
}

fn finish(c: Circuit) -> Result<IcmCircuit, TransformError> {
    IcmCircuit::new(c).map_err(TransformError::NotIcm)
}

/// Converts a primitive-only circuit to ICM form by replacing every
/// single-qubit primitive with its teleportation block and rethreading the
/// data wire onto the block output.
pub fn convert_to_icm(
    circuit: &Circuit,
    db: &Database,
    opts: &ConversionOptions,
) -> Result<IcmCircuit, TransformError> {
    circuit.check()?;
    let mut out = circuit.clone();
    out.gates.clear();
    out.measurements = vec![MeasBasis::Empty; circuit.qubit_count()];
    let mut alloc = AncillaAllocator::new(circuit);
    let mut wire: Vec<QubitId> = circuit.qubits().collect();
    let mut gates = Vec::new();
    for g in &circuit.gates {
        match g {
            GateOp::Cnot { control, target } => gates.push(GateOp::Cnot {
                control: wire[control.index()],
                target: wire[target.index()],
            }),
            GateOp::Named { name, .. } => {
                let (p, q) = g
                    .primitive()
                    .ok_or_else(|| TransformError::Unconvertible(name.clone()))?;
                let w = wire[q.index()];
                wire[q.index()] =
                    apply_block(p, w, db, opts.mode, &mut out, &mut gates, &mut alloc)?;
            }
        }
    }
    out.gates = gates;
    let remap = |d: &[QubitId]| d.iter().map(|q| wire[q.index()]).collect::<Vec<_>>();
    for q in circuit.qubits() {
        let m = match circuit.measurement(q) {
            MeasBasis::CondZX(d) => MeasBasis::CondZX(remap(d)),
            MeasBasis::CondXZ(d) => MeasBasis::CondXZ(remap(d)),
            m => m.clone(),
        };
        out.measurements[wire[q.index()].index()] = m;
    }
    out.schedule = circuit
        .schedule
        .iter()
        .map(|(a, b)| (wire[a.index()], wire[b.index()]))
        .collect();
    add_frame_edges(&mut out);
    finish(out)
}

// ---------------------------------------------------------------------------
// Distillation
// ---------------------------------------------------------------------------

struct Fragment<'a> {
    db: &'a Database,
    opts: &'a ConversionOptions,
    round: usize,
}

impl Fragment<'_> {
    /// Lays down one distiller whose output is `output` and returns its
    /// index in `out.distillers`.
    fn distiller(
        &self,
        kind: MagicKind,
        output: QubitId,
        out: &mut Circuit,
        gates: &mut Vec<GateOp>,
        alloc: &mut AncillaAllocator,
    ) -> Result<usize, TransformError> {
        let name = crate::sim::distill::entry_name(kind);
        let entry = self
            .db
            .get(name)
            .ok_or_else(|| TransformError::MissingDistiller(name.to_string()))?;
        let (inits, meas) = icm_parts(entry)?;
        let outputs: Vec<usize> = (0..meas.len())
            .filter(|i| meas[*i] == MeasToken::Empty)
            .collect();
        if outputs.len() != 1 {
            return Err(TransformError::BadEntry {
                name: name.to_string(),
                msg: "a distiller has exactly one output".into(),
            });
        }
        let mut map = Vec::with_capacity(inits.len());
        for (i, b) in inits.iter().enumerate() {
            if i == outputs[0] {
                out.inits[output.index()] = *b;
                map.push(output);
            } else {
                map.push(alloc.fresh(out, *b));
            }
        }
        for (a, b) in entry.cnots() {
            gates.push(GateOp::Cnot {
                control: map[a as usize - 1],
                target: map[b as usize - 1],
            });
        }
        let mut code = Vec::new();
        let mut syndrome = Vec::new();
        for (i, m) in meas.iter().enumerate() {
            let q = map[i];
            match m {
                MeasToken::Empty => {}
                MeasToken::A | MeasToken::Y => {
                    code.push(q);
                    syndrome.push(self.magic_measurement(*m, q, out, gates, alloc)?);
                }
                other => {
                    out.measurements[q.index()] = other.to_basis(Vec::new());
                }
            }
        }
        out.distillers.push(DistillerRecord {
            kind,
            output,
            code_qubits: code,
            syndrome,
            round: self.round,
        });
        Ok(out.distillers.len() - 1)
    }

    /// Rewrites an `MA`/`MY` measurement through its nicm entry, converting
    /// the gates it introduces. Returns the qubit finally measured.
    fn magic_measurement(
        &self,
        m: MeasToken,
        q: QubitId,
        out: &mut Circuit,
        gates: &mut Vec<GateOp>,
        alloc: &mut AncillaAllocator,
    ) -> Result<QubitId, TransformError> {
        let name = if m == MeasToken::A { "MA" } else { "MY" };
        let entry = self
            .db
            .get(name)
            .ok_or_else(|| TransformError::MissingEntry(name.to_string()))?;
        let row = match &entry.body {
            EntryBody::Nicm { rows } if rows.len() == 1 => &rows[0],
            _ => {
                return Err(TransformError::BadEntry {
                    name: name.to_string(),
                    msg: "expected a single-qubit nicm row".into(),
                })
            }
        };
        let mut w = q;
        for tok in row {
            match tok {
                GridToken::Wire => {}
                GridToken::Gate(p) => {
                    w = apply_block(*p, w, self.db, self.opts.mode, out, gates, alloc)?;
                }
                GridToken::MeasX => out.measurements[w.index()] = MeasBasis::X,
                GridToken::MeasZ => out.measurements[w.index()] = MeasBasis::Z,
                other => {
                    return Err(TransformError::BadEntry {
                        name: name.to_string(),
                        msg: format!(
                            "token {} cannot follow a magic-state measurement",
                            other.token()
                        ),
                    })
                }
            }
        }
        if *out.measurement(w) == MeasBasis::Empty {
            return Err(TransformError::BadEntry {
                name: name.to_string(),
                msg: "row does not end in a measurement".into(),
            });
        }
        Ok(w)
    }

    /// Replaces the magic-state initialisation of `target` by `k` distillers
    /// joined by selective-source teleportation.
    fn replace(
        &self,
        kind: MagicKind,
        target: QubitId,
        out: &mut Circuit,
        gates: &mut Vec<GateOp>,
        alloc: &mut AncillaAllocator,
    ) -> Result<(), TransformError> {
        let k = self.opts.duplicates.max(1);
        if k == 1 {
            self.distiller(kind, target, out, gates, alloc)?;
            return Ok(());
        }
        out.inits[target.index()] = InitBasis::Zero;
        let mut sources = Vec::with_capacity(k);
        let mut records = Vec::with_capacity(k);
        for _ in 0..k {
            let o = alloc.fresh(out, InitBasis::Empty);
            records.push(self.distiller(kind, o, out, gates, alloc)?);
            sources.push(o);
        }
        for o in &sources {
            gates.push(GateOp::Cnot {
                control: *o,
                target,
            });
        }
        let syndromes: Vec<QubitId> = records
            .iter()
            .flat_map(|r| out.distillers[*r].syndrome.clone())
            .collect();
        for o in &sources {
            // Basis chosen by the selection rule once all syndromes are known.
            out.measurements[o.index()] = MeasBasis::CondXZ(syndromes.clone());
            out.frame.push(FrameRule {
                target,
                pauli: Pauli::X,
                parity: vec![*o],
                negate: false,
                guard: Some(Guard::Basis(*o, Basis::Z)),
            });
            out.frame.push(FrameRule {
                target,
                pauli: Pauli::Z,
                parity: vec![*o],
                negate: false,
                guard: Some(Guard::Basis(*o, Basis::X)),
            });
        }
        out.selections.push(SourceSelection {
            output: target,
            sources,
            distillers: records,
        });
        Ok(())
    }
}

/// Replaces magic-state initialisations by distillation circuits, `rounds`
/// levels deep. Each distiller is placed at the front of the gate list.
pub fn inline_distillation(
    icm: &IcmCircuit,
    db: &Database,
    opts: &ConversionOptions,
) -> Result<IcmCircuit, TransformError> {
    let mut out = icm.circuit().clone();
    if opts.rounds == 0 {
        return Ok(icm.clone());
    }
    for name in ["AA", "YY"] {
        if !db.contains(name) {
            return Err(TransformError::MissingDistiller(name.to_string()));
        }
    }
    for round in 1..=opts.rounds {
        let targets: Vec<(QubitId, MagicKind)> = out
            .qubits()
            .filter_map(|q| match out.init(q) {
                InitBasis::A => Some((q, MagicKind::A)),
                InitBasis::Y => Some((q, MagicKind::Y)),
                _ => None,
            })
            .collect();
        if targets.is_empty() {
            break;
        }
        let frag = Fragment { db, opts, round };
        let mut alloc = AncillaAllocator::new(&out);
        let mut gates = Vec::new();
        let old_blocks = out.blocks.len();
        for (q, kind) in targets {
            frag.replace(kind, q, &mut out, &mut gates, &mut alloc)?;
        }
        let shift = gates.len();
        for b in &mut out.blocks[..old_blocks] {
            b.gates = b.gates.start + shift..b.gates.end + shift;
        }
        gates.append(&mut out.gates);
        out.gates = gates;
    }
    add_frame_edges(&mut out);
    finish(out)
}

// ---------------------------------------------------------------------------
// Controlled unitaries
// ---------------------------------------------------------------------------

/// Single-qubit sequences with `U = e^{iα} A·X·B·X·C` and `A·B·C = I`.
/// Sequences are in application order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abc {
    pub a: Vec<Primitive>,
    pub b: Vec<Primitive>,
    pub c: Vec<Primitive>,
    /// Gate realising `diag(1, e^{iα})` on the control.
    pub phase: Option<String>,
}

impl Abc {
    /// Controlled-Z.
    pub fn cz() -> Self {
        Abc {
            a: vec![Primitive::P],
            b: vec![Primitive::Pdag],
            c: vec![],
            phase: Some("PGATE".into()),
        }
    }

    /// Controlled-V with V = √X.
    pub fn cv() -> Self {
        Abc {
            a: vec![Primitive::T, Primitive::H],
            b: vec![Primitive::Tdag],
            c: vec![Primitive::H],
            phase: Some("TGATE".into()),
        }
    }

    pub fn identity() -> Self {
        Abc {
            a: vec![],
            b: vec![],
            c: vec![],
            phase: None,
        }
    }
}

/// Emits `C, CNOT, B, CNOT, A` on the target followed by the phase gate on
/// the control.
pub fn expand_controlled_u(control: QubitId, target: QubitId, abc: &Abc) -> Vec<GateOp> {
    let mut out = Vec::new();
    let cx = GateOp::Cnot { control, target };
    out.extend(abc.c.iter().map(|p| GateOp::single(*p, target)));
    out.push(cx.clone());
    out.extend(abc.b.iter().map(|p| GateOp::single(*p, target)));
    out.push(cx);
    out.extend(abc.a.iter().map(|p| GateOp::single(*p, target)));
    if let Some(name) = &abc.phase {
        out.push(GateOp::Named {
            name: name.clone(),
            qubits: vec![control],
        });
    }
    out
}

/// `expand_nicm` followed by `convert_to_icm` and `inline_distillation`.
pub fn compile(
    circuit: &Circuit,
    db: &Database,
    opts: &ConversionOptions,
) -> Result<IcmCircuit, TransformError> {
    let prim = expand_nicm(circuit, db)?;
    let icm = convert_to_icm(&prim, db, opts)?;
    inline_distillation(&icm, db, opts)
}

/// Sanity check used by callers that construct circuits by hand.
pub fn is_icm(c: &Circuit) -> bool {
    validate_icm(c).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::compute_stats;

    fn db() -> Database {
        Database::seed()
    }

    fn single_t() -> Circuit {
        Circuit::from_gates(1, vec![GateOp::named("TGATE", &[1])])
    }

    #[test]
    fn simple_t_listing() {
        let icm = convert_to_icm(&single_t(), &db(), &ConversionOptions::default()).unwrap();
        assert_eq!(icm.to_text(), "init 2 A\ncnot 2 1\nmeasure 1 Z\n");
    }

    #[test]
    fn deterministic_t_block_shape() {
        let opts = ConversionOptions {
            mode: TeleportMode::Deterministic,
            ..Default::default()
        };
        let icm = convert_to_icm(&single_t(), &db(), &opts).unwrap();
        assert_eq!(icm.qubit_count(), 6);
        assert_eq!(icm.gates.len(), 6);
        let measured: Vec<_> = icm
            .qubits()
            .filter(|q| *icm.measurement(*q) != MeasBasis::Empty)
            .collect();
        assert_eq!(measured.len(), 5);
        let cond = measured
            .iter()
            .filter(|q| icm.measurement(**q).is_conditional())
            .count();
        assert_eq!(cond, 4);
        let order = crate::circuit::order_measurements(&icm).unwrap();
        assert_eq!(order[0].0, QubitId(1));
    }

    #[test]
    fn primitives_only_unchanged_by_expansion() {
        let c = Circuit::from_gates(2, vec![GateOp::cnot(1, 2), GateOp::named("HGATE", &[2])]);
        assert_eq!(expand_nicm(&c, &db()).unwrap(), c);
    }

    #[test]
    fn toffoli_expands_to_primitives() {
        let c = Circuit::from_gates(3, vec![GateOp::named("toffoli", &[1, 2, 3])]);
        let e = expand_nicm(&c, &db()).unwrap();
        assert_eq!(e.gates.len(), 16);
        assert_eq!(e.gates.iter().filter(|g| g.is_cnot()).count(), 6);
        assert_eq!(compute_stats(&e).t_count, 7);
    }

    #[test]
    fn expansion_errors() {
        let c = Circuit::from_gates(1, vec![GateOp::named("frobgate", &[1])]);
        assert_eq!(
            expand_nicm(&c, &db()),
            Err(TransformError::MissingEntry("frobgate".into()))
        );
        let c = Circuit::from_gates(2, vec![GateOp::named("toffoli", &[1, 2])]);
        assert!(matches!(
            expand_nicm(&c, &db()),
            Err(TransformError::Arity { .. })
        ));
        let cyc = crate::db::parse_database("=A\nnicm\n0\nB\n=B\nnicm\n0\nA\n").unwrap();
        let c = Circuit::from_gates(1, vec![GateOp::named("A", &[1])]);
        assert!(matches!(
            expand_nicm(&c, &cyc),
            Err(TransformError::Cycle(_))
        ));
    }

    #[test]
    fn rounds_zero_is_identity() {
        let icm = convert_to_icm(&single_t(), &db(), &ConversionOptions::default()).unwrap();
        let same = inline_distillation(&icm, &db(), &ConversionOptions::default()).unwrap();
        assert_eq!(same, icm);
    }

    #[test]
    fn one_round_of_a_distillation() {
        let opts = ConversionOptions {
            rounds: 1,
            ..Default::default()
        };
        let icm = compile(&single_t(), &db(), &opts).unwrap();
        assert_eq!(icm.distillers.len(), 1);
        let d = &icm.distillers[0];
        assert_eq!(d.output, QubitId(2));
        assert_eq!(d.code_qubits.len(), 15);
        // one block for the data T gate plus one per MA
        let t_blocks = icm.blocks.iter().filter(|b| b.kind.is_t()).count();
        assert_eq!(t_blocks, 16);
        assert!(icm.qubit_count() >= 16);
        assert!(validate_icm(&icm).is_ok());
        let a_inits = icm
            .qubits()
            .filter(|q| icm.init(*q) == InitBasis::A)
            .count();
        assert_eq!(a_inits, 15);
    }

    #[test]
    fn duplicated_y_distillers() {
        let mut c = Circuit::new(1);
        c.inits[0] = InitBasis::Y;
        let icm = IcmCircuit::new(c).unwrap();
        let opts = ConversionOptions {
            rounds: 1,
            duplicates: 2,
            ..Default::default()
        };
        let out = inline_distillation(&icm, &db(), &opts).unwrap();
        assert_eq!(out.distillers.len(), 2);
        assert_eq!(out.selections.len(), 1);
        let sel = &out.selections[0];
        assert_eq!(sel.sources.len(), 2);
        for s in &sel.sources {
            assert_eq!(out.measurement(*s).deps().len(), 14);
        }
        assert_eq!(out.init(QubitId(1)), InitBasis::Zero);
    }

    #[test]
    fn missing_distiller_entry() {
        let db = crate::db::parse_database("=TGATE\nicm\n1\nEMPTY AA\nc 2 1\nMZ EMPTY\n").unwrap();
        let icm = convert_to_icm(&single_t(), &db, &ConversionOptions::default()).unwrap();
        let opts = ConversionOptions {
            rounds: 1,
            ..Default::default()
        };
        assert_eq!(
            inline_distillation(&icm, &db, &opts),
            Err(TransformError::MissingDistiller("AA".into()))
        );
    }

    fn every_outcome_implements(c: &Circuit, want: &crate::matrix::Matrix) {
        use crate::sim::{circuit_unitary, OutcomeAssignment, SimError, SimOptions};
        let measured: Vec<_> = c
            .qubits()
            .filter(|q| *c.measurement(*q) != MeasBasis::Empty)
            .collect();
        let mut hits = 0;
        for bits in 0..1u32 << measured.len() {
            let mut a = OutcomeAssignment::zeros();
            for (i, q) in measured.iter().enumerate() {
                a = a.with(*q, (bits >> i & 1) as u8);
            }
            match circuit_unitary(c, &a, &SimOptions::default()) {
                Ok(u) => {
                    hits += 1;
                    assert!(
                        u.phase_fidelity(want) > 1.0 - 1e-9,
                        "outcomes {bits:b}: {u:?}"
                    );
                }
                Err(SimError::ZeroProbability(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn blocks_implement_their_gate_for_every_outcome() {
        use crate::matrix::{gate1, to_matrix};
        for mode in [TeleportMode::Simple, TeleportMode::Deterministic] {
            for p in Primitive::ALL {
                let c = Circuit::from_gates(1, vec![GateOp::single(p, QubitId(1))]);
                let opts = ConversionOptions {
                    mode,
                    ..Default::default()
                };
                let icm = convert_to_icm(&c, &db(), &opts).unwrap();
                every_outcome_implements(&icm, &to_matrix(&gate1(p)));
            }
        }
    }

    #[test]
    fn controlled_v_and_z_patterns() {
        use crate::matrix::{c as cx, Matrix};
        use crate::sim::{circuit_unitary, OutcomeAssignment, SimOptions};
        let h = 0.5;
        let z = cx(0.0, 0.0);
        let one = cx(1.0, 0.0);
        let (a, b) = (cx(h, h), cx(h, -h));
        let cv = Matrix::from_rows(&[
            &[one, z, z, z],
            &[z, one, z, z],
            &[z, z, a, b],
            &[z, z, b, a],
        ]);
        let cz = Matrix::from_rows(&[
            &[one, z, z, z],
            &[z, one, z, z],
            &[z, z, one, z],
            &[z, z, z, -one],
        ]);
        for (abc, want) in [(Abc::cv(), cv), (Abc::cz(), cz)] {
            let c = Circuit::from_gates(2, expand_controlled_u(QubitId(1), QubitId(2), &abc));
            let u =
                circuit_unitary(&c, &OutcomeAssignment::zeros(), &SimOptions::default()).unwrap();
            assert!(u.phase_fidelity(&want) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn controlled_identity_is_two_cnots() {
        let g = expand_controlled_u(QubitId(1), QubitId(2), &Abc::identity());
        assert_eq!(g, vec![GateOp::cnot(1, 2), GateOp::cnot(1, 2)]);
    }
}
