//! Circuit data model shared by every pipeline stage.
//!
//! A [`Circuit`] holds per-qubit initialisations, an ordered gate list and
//! per-qubit measurements. The same type carries both the pre-ICM stage
//! (named Clifford+T gates) and the ICM stage (CNOT-only interior, plus the
//! classical bookkeeping produced by teleportation: frame rules, block
//! metadata and measurement dependencies).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("qubit {0} is outside the circuit")]
    UnknownQubit(QubitId),
    #[error("CNOT on qubit {0} uses it as both control and target")]
    SelfCnot(QubitId),
    #[error("measurement schedule has a cycle through qubits {0:?}")]
    ScheduleCycle(Vec<QubitId>),
    #[error("{0}")]
    Malformed(String),
}

/// 1-based qubit index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QubitId(pub u32);

impl QubitId {
    /// Zero-based position, for indexing per-qubit vectors.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_index(i: usize) -> Self {
        QubitId(i as u32 + 1)
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitBasis {
    Zero,
    Plus,
    A,
    Y,
    /// Configurable circuit input.
    Empty,
}

impl InitBasis {
    pub fn is_magic(self) -> bool {
        matches!(self, InitBasis::A | InitBasis::Y)
    }

    fn circ_token(self) -> Option<&'static str> {
        match self {
            InitBasis::Zero => Some("0"),
            InitBasis::Plus => Some("+"),
            InitBasis::A => Some("A"),
            InitBasis::Y => Some("Y"),
            InitBasis::Empty => None,
        }
    }
}

/// A realised single-qubit Pauli measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Z,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MeasBasis {
    X,
    Z,
    /// Z when the parity of the dependency outcomes is odd, X when even.
    CondZX(Vec<QubitId>),
    /// X when the parity of the dependency outcomes is odd, Z when even.
    CondXZ(Vec<QubitId>),
    /// Intermediate: T applied before an X measurement. Removed by distillation inlining.
    A,
    /// Intermediate: P applied before an X measurement. Removed by distillation inlining.
    Y,
    /// Configurable circuit output.
    Empty,
}

impl MeasBasis {
    pub fn deps(&self) -> &[QubitId] {
        match self {
            MeasBasis::CondZX(d) | MeasBasis::CondXZ(d) => d,
            _ => &[],
        }
    }

    pub fn is_conditional(&self) -> bool {
        matches!(self, MeasBasis::CondZX(_) | MeasBasis::CondXZ(_))
    }

    /// Basis realised for a given dependency parity. `None` for Empty and
    /// intermediate bases.
    pub fn resolve(&self, odd_parity: bool) -> Option<Basis> {
        match self {
            MeasBasis::X => Some(Basis::X),
            MeasBasis::Z => Some(Basis::Z),
            MeasBasis::CondZX(_) => Some(if odd_parity { Basis::Z } else { Basis::X }),
            MeasBasis::CondXZ(_) => Some(if odd_parity { Basis::X } else { Basis::Z }),
            MeasBasis::A | MeasBasis::Y | MeasBasis::Empty => None,
        }
    }

    fn circ_token(&self) -> Option<String> {
        let list = |d: &[QubitId]| {
            d.iter()
                .map(|q| q.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            MeasBasis::X => Some("X".into()),
            MeasBasis::Z => Some("Z".into()),
            MeasBasis::CondZX(d) => Some(format!("ZX({})", list(d))),
            MeasBasis::CondXZ(d) => Some(format!("XZ({})", list(d))),
            MeasBasis::A => Some("A".into()),
            MeasBasis::Y => Some("Y".into()),
            MeasBasis::Empty => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Compose two Paulis, ignoring phase.
    pub fn compose(self, other: Pauli) -> Pauli {
        let (ax, az) = self.bits();
        let (bx, bz) = other.bits();
        Pauli::from_bits(ax ^ bx, az ^ bz)
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// Whether this Pauli flips the outcome of a measurement in `basis`.
    pub fn flips(self, basis: Basis) -> bool {
        let (x, z) = self.bits();
        match basis {
            Basis::Z => x,
            Basis::X => z,
        }
    }
}

/// Single-qubit Clifford+T primitives understood by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    T,
    Tdag,
    H,
    P,
    Pdag,
}

impl Primitive {
    pub const ALL: [Primitive; 5] = [
        Primitive::T,
        Primitive::Tdag,
        Primitive::H,
        Primitive::P,
        Primitive::Pdag,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Primitive::T => "TGATE",
            Primitive::Tdag => "TDAG",
            Primitive::H => "HGATE",
            Primitive::P => "PGATE",
            Primitive::Pdag => "PDAG",
        }
    }

    pub fn from_token(s: &str) -> Option<Primitive> {
        Some(match s {
            "TGATE" => Primitive::T,
            "TDAG" => Primitive::Tdag,
            "HGATE" => Primitive::H,
            "PGATE" => Primitive::P,
            "PDAG" => Primitive::Pdag,
            _ => return None,
        })
    }

    pub fn is_t(self) -> bool {
        matches!(self, Primitive::T | Primitive::Tdag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GateOp {
    Cnot { control: QubitId, target: QubitId },
    Named { name: String, qubits: Vec<QubitId> },
}

impl GateOp {
    pub fn cnot(control: u32, target: u32) -> Self {
        GateOp::Cnot {
            control: QubitId(control),
            target: QubitId(target),
        }
    }

    pub fn named(name: &str, qubits: &[u32]) -> Self {
        GateOp::Named {
            name: name.to_string(),
            qubits: qubits.iter().copied().map(QubitId).collect(),
        }
    }

    pub fn single(p: Primitive, q: QubitId) -> Self {
        GateOp::Named {
            name: p.token().to_string(),
            qubits: vec![q],
        }
    }

    pub fn qubits(&self) -> Vec<QubitId> {
        match self {
            GateOp::Cnot { control, target } => vec![*control, *target],
            GateOp::Named { qubits, .. } => qubits.clone(),
        }
    }

    /// The single-qubit primitive this gate denotes, if any.
    pub fn primitive(&self) -> Option<(Primitive, QubitId)> {
        match self {
            GateOp::Named { name, qubits } if qubits.len() == 1 => {
                Primitive::from_token(name).map(|p| (p, qubits[0]))
            }
            _ => None,
        }
    }

    pub fn is_cnot(&self) -> bool {
        matches!(self, GateOp::Cnot { .. })
    }
}

/// Extra condition on a frame rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    /// Rule applies only when this qubit's outcome equals the bit.
    Outcome(QubitId, u8),
    /// Rule applies only when this qubit was measured in the given basis.
    Basis(QubitId, Basis),
}

/// Classically tracked Pauli correction: apply `pauli` to `target` when the
/// parity of the outcomes in `parity` (xor `negate`) is odd and the guard holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRule {
    pub target: QubitId,
    pub pauli: Pauli,
    pub parity: Vec<QubitId>,
    pub negate: bool,
    pub guard: Option<Guard>,
}

impl FrameRule {
    pub fn referenced(&self) -> Vec<QubitId> {
        let mut v = self.parity.clone();
        match self.guard {
            Some(Guard::Outcome(q, _)) | Some(Guard::Basis(q, _)) => v.push(q),
            None => {}
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    T,
    Tdag,
    P,
    Pdag,
    H,
}

impl BlockKind {
    pub fn from_primitive(p: Primitive) -> Self {
        match p {
            Primitive::T => BlockKind::T,
            Primitive::Tdag => BlockKind::Tdag,
            Primitive::H => BlockKind::H,
            Primitive::P => BlockKind::P,
            Primitive::Pdag => BlockKind::Pdag,
        }
    }

    pub fn is_t(self) -> bool {
        matches!(self, BlockKind::T | BlockKind::Tdag)
    }
}

/// A Clifford correction that cannot be tracked classically (Simple-mode
/// T teleportation): `gate` is owed on the block output when `trigger`
/// reports `outcome`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingCorrection {
    pub trigger: QubitId,
    pub outcome: u8,
    pub gate: Primitive,
}

/// The ancilla group introduced for one teleported gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeleportBlock {
    pub kind: BlockKind,
    pub entry: String,
    pub input: QubitId,
    pub output: QubitId,
    /// Magic-state ancilla consumed by the block.
    pub resource: Option<QubitId>,
    pub qubits: Vec<QubitId>,
    pub measured: Vec<QubitId>,
    pub gates: Range<usize>,
    pub pending: Option<PendingCorrection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MagicKind {
    A,
    Y,
}

/// An inlined distillation subcircuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistillerRecord {
    pub kind: MagicKind,
    pub output: QubitId,
    pub code_qubits: Vec<QubitId>,
    /// X measurements whose outcomes form the syndrome.
    pub syndrome: Vec<QubitId>,
    pub round: usize,
}

/// Selective-source join of duplicated distillers into `output`. The first
/// source whose distiller accepted is measured in X, all others in Z.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSelection {
    pub output: QubitId,
    pub sources: Vec<QubitId>,
    /// Indices into `Circuit::distillers`, parallel to `sources`.
    pub distillers: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circuit {
    pub inits: Vec<InitBasis>,
    pub gates: Vec<GateOp>,
    pub measurements: Vec<MeasBasis>,
    /// Extra measurement ordering edges `(before, after)`.
    pub schedule: Vec<(QubitId, QubitId)>,
    pub frame: Vec<FrameRule>,
    pub blocks: Vec<TeleportBlock>,
    pub distillers: Vec<DistillerRecord>,
    pub selections: Vec<SourceSelection>,
}

impl Circuit {
    /// A circuit over `n` configurable qubits with no gates.
    pub fn new(n: usize) -> Self {
        Circuit {
            inits: vec![InitBasis::Empty; n],
            measurements: vec![MeasBasis::Empty; n],
            ..Default::default()
        }
    }

    pub fn from_gates(n: usize, gates: Vec<GateOp>) -> Self {
        Circuit {
            gates,
            ..Circuit::new(n)
        }
    }

    pub fn qubit_count(&self) -> usize {
        self.inits.len()
    }

    pub fn qubits(&self) -> impl Iterator<Item = QubitId> {
        (0..self.qubit_count()).map(QubitId::from_index)
    }

    pub fn init(&self, q: QubitId) -> InitBasis {
        self.inits[q.index()]
    }

    pub fn measurement(&self, q: QubitId) -> &MeasBasis {
        &self.measurements[q.index()]
    }

    /// Append a fresh configurable qubit and return its id.
    pub fn add_qubit(&mut self) -> QubitId {
        self.inits.push(InitBasis::Empty);
        self.measurements.push(MeasBasis::Empty);
        QubitId(self.inits.len() as u32)
    }

    pub fn contains(&self, q: QubitId) -> bool {
        q.0 >= 1 && q.index() < self.qubit_count()
    }

    /// Configurable inputs, ascending.
    pub fn inputs(&self) -> Vec<QubitId> {
        self.qubits()
            .filter(|q| self.init(*q) == InitBasis::Empty)
            .collect()
    }

    /// Unmeasured (configurable output) qubits, ascending.
    pub fn outputs(&self) -> Vec<QubitId> {
        self.qubits()
            .filter(|q| *self.measurement(*q) == MeasBasis::Empty)
            .collect()
    }

    /// Checks the structural invariants every stage relies on.
    pub fn check(&self) -> Result<(), CircuitError> {
        if self.measurements.len() != self.inits.len() {
            return Err(CircuitError::Malformed(
                "init and measurement tables differ in length".into(),
            ));
        }
        let known = |q: QubitId| {
            if self.contains(q) {
                Ok(())
            } else {
                Err(CircuitError::UnknownQubit(q))
            }
        };
        for g in &self.gates {
            match g {
                GateOp::Cnot { control, target } => {
                    known(*control)?;
                    known(*target)?;
                    if control == target {
                        return Err(CircuitError::SelfCnot(*control));
                    }
                }
                GateOp::Named { qubits, .. } => {
                    for q in qubits {
                        known(*q)?;
                    }
                    let uniq: BTreeSet<_> = qubits.iter().collect();
                    if uniq.len() != qubits.len() {
                        return Err(CircuitError::Malformed(format!(
                            "gate {g:?} repeats a qubit"
                        )));
                    }
                }
            }
        }
        for m in &self.measurements {
            for d in m.deps() {
                known(*d)?;
            }
        }
        for (a, b) in &self.schedule {
            known(*a)?;
            known(*b)?;
        }
        for r in &self.frame {
            known(r.target)?;
            for q in r.referenced() {
                known(q)?;
            }
        }
        Ok(())
    }

    /// Every dependency edge `(before, after)` between measurements.
    pub fn dependency_edges(&self) -> Vec<(QubitId, QubitId)> {
        let mut edges: Vec<(QubitId, QubitId)> = Vec::new();
        for q in self.qubits() {
            for d in self.measurement(q).deps() {
                edges.push((*d, q));
            }
        }
        edges.extend(self.schedule.iter().copied());
        edges.sort();
        edges.dedup();
        edges
    }

    /// Renames qubits by `perm` (old zero-based index -> new zero-based index).
    pub fn relabel(&self, perm: &[usize]) -> Circuit {
        let map = |q: QubitId| QubitId::from_index(perm[q.index()]);
        let n = self.qubit_count();
        let mut out = Circuit::new(n);
        for q in self.qubits() {
            out.inits[perm[q.index()]] = self.init(q);
            out.measurements[perm[q.index()]] = match self.measurement(q) {
                MeasBasis::CondZX(d) => MeasBasis::CondZX(d.iter().map(|q| map(*q)).collect()),
                MeasBasis::CondXZ(d) => MeasBasis::CondXZ(d.iter().map(|q| map(*q)).collect()),
                m => m.clone(),
            };
        }
        out.gates = self
            .gates
            .iter()
            .map(|g| match g {
                GateOp::Cnot { control, target } => GateOp::Cnot {
                    control: map(*control),
                    target: map(*target),
                },
                GateOp::Named { name, qubits } => GateOp::Named {
                    name: name.clone(),
                    qubits: qubits.iter().map(|q| map(*q)).collect(),
                },
            })
            .collect();
        out.schedule = self
            .schedule
            .iter()
            .map(|(a, b)| (map(*a), map(*b)))
            .collect();
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        write!(f, "{}", self.violations.join("; "))
    }
}

/// Checks the ICM contract: CNOT-only interior, X/Z (possibly conditional)
/// measurements and an acyclic measurement schedule.
pub fn validate_icm(circuit: &Circuit) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, g) in circuit.gates.iter().enumerate() {
        if !g.is_cnot() {
            violations.push(format!("non-CNOT interior gate at index {i}"));
        }
    }
    for q in circuit.qubits() {
        match circuit.measurement(q) {
            MeasBasis::A | MeasBasis::Y => {
                violations.push(format!("intermediate measurement basis on qubit {q}"))
            }
            m => {
                for d in m.deps() {
                    if !circuit.contains(*d) || *circuit.measurement(*d) == MeasBasis::Empty {
                        violations.push(format!("qubit {q} depends on unmeasured qubit {d}"));
                    }
                }
            }
        }
    }
    if let Err(CircuitError::ScheduleCycle(cyc)) = order_measurements(circuit) {
        violations.push(format!(
            "measurement schedule contains a cycle through qubits {cyc:?}"
        ));
    }
    ValidationReport { violations }
}

/// Resource counts for a circuit at any stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CircuitStats {
    pub t_count: usize,
    pub t_depth: usize,
    pub qubits: usize,
    pub gates: usize,
}

impl fmt::Display for CircuitStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t_count {} t_depth {} qubits {} gates {}",
            self.t_count, self.t_depth, self.qubits, self.gates
        )
    }
}

/// T-count and T-depth over named T/T† gates and teleported T blocks.
///
/// Depth is a per-qubit scan: every gate joins the depths of its operands,
/// a T gate adds one, and a T block adds one to its output once its last
/// CNOT has been applied.
pub fn compute_stats(circuit: &Circuit) -> CircuitStats {
    let n = circuit.qubit_count();
    let mut depth = vec![0usize; n];
    let mut t_count = 0;
    let mut block_ends: BTreeMap<usize, Vec<&TeleportBlock>> = BTreeMap::new();
    for b in circuit.blocks.iter().filter(|b| b.kind.is_t()) {
        t_count += 1;
        if b.gates.is_empty() {
            continue;
        }
        block_ends.entry(b.gates.end - 1).or_default().push(b);
    }
    for (i, g) in circuit.gates.iter().enumerate() {
        if let Some((p, q)) = g.primitive() {
            if p.is_t() {
                t_count += 1;
                depth[q.index()] += 1;
            }
        } else {
            let qs = g.qubits();
            let m = qs.iter().map(|q| depth[q.index()]).max().unwrap_or(0);
            for q in qs {
                depth[q.index()] = m;
            }
        }
        if let Some(blocks) = block_ends.get(&i) {
            for b in blocks {
                let m = b.qubits.iter().map(|q| depth[q.index()]).max().unwrap_or(0);
                depth[b.output.index()] = m + 1;
            }
        }
    }
    CircuitStats {
        t_count,
        t_depth: depth.into_iter().max().unwrap_or(0),
        qubits: n,
        gates: circuit.gates.len(),
    }
}

/// Total order of the measured qubits extending the dependency order.
/// Ready qubits are emitted in ascending id order.
pub fn order_measurements(circuit: &Circuit) -> Result<Vec<(QubitId, MeasBasis)>, CircuitError> {
    let measured: BTreeSet<QubitId> = circuit
        .qubits()
        .filter(|q| *circuit.measurement(*q) != MeasBasis::Empty)
        .collect();
    let mut indeg: BTreeMap<QubitId, usize> = measured.iter().map(|q| (*q, 0)).collect();
    let mut succ: BTreeMap<QubitId, Vec<QubitId>> = BTreeMap::new();
    for (a, b) in circuit.dependency_edges() {
        if measured.contains(&a) && measured.contains(&b) {
            *indeg.get_mut(&b).unwrap() += 1;
            succ.entry(a).or_default().push(b);
        }
    }
    let mut ready: BTreeSet<QubitId> = indeg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(q, _)| *q)
        .collect();
    let mut out = Vec::with_capacity(measured.len());
    while let Some(q) = ready.pop_first() {
        out.push((q, circuit.measurement(q).clone()));
        for s in succ.get(&q).into_iter().flatten() {
            let d = indeg.get_mut(s).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(*s);
            }
        }
    }
    if out.len() < measured.len() {
        let cyc = indeg
            .into_iter()
            .filter(|(q, d)| *d > 0 && !out.iter().any(|(o, _)| o == q))
            .map(|(q, _)| q)
            .collect();
        return Err(CircuitError::ScheduleCycle(cyc));
    }
    Ok(out)
}

/// Verifies that an ICM circuit passed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct IcmCircuit(Circuit);

impl IcmCircuit {
    pub fn new(circuit: Circuit) -> Result<Self, ValidationReport> {
        let report = validate_icm(&circuit);
        if report.is_ok() {
            Ok(IcmCircuit(circuit))
        } else {
            Err(report)
        }
    }

    pub fn circuit(&self) -> &Circuit {
        &self.0
    }

    pub fn into_inner(self) -> Circuit {
        self.0
    }
}

impl std::ops::Deref for IcmCircuit {
    type Target = Circuit;

    fn deref(&self) -> &Circuit {
        &self.0
    }
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

impl Circuit {
    /// Renders the `.circ` text: initialisations (ascending qubit), gates in
    /// order, measurements in schedule order, then explicit ordering edges.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let referenced = self.max_referenced();
        if self.qubit_count() > referenced {
            out.push_str(&format!("qubits {}\n", self.qubit_count()));
        }
        for q in self.qubits() {
            if let Some(t) = self.init(q).circ_token() {
                out.push_str(&format!("init {q} {t}\n"));
            }
        }
        for g in &self.gates {
            match g {
                GateOp::Cnot { control, target } => {
                    out.push_str(&format!("cnot {control} {target}\n"))
                }
                GateOp::Named { name, qubits } => {
                    out.push_str(name);
                    for q in qubits {
                        out.push_str(&format!(" {q}"));
                    }
                    out.push('\n');
                }
            }
        }
        let order = order_measurements(self).unwrap_or_else(|_| {
            self.qubits()
                .map(|q| (q, self.measurement(q).clone()))
                .collect()
        });
        for (q, m) in order {
            if let Some(t) = m.circ_token() {
                out.push_str(&format!("measure {q} {t}\n"));
            }
        }
        let mut after: BTreeMap<QubitId, Vec<QubitId>> = BTreeMap::new();
        for (a, b) in &self.schedule {
            after.entry(*b).or_default().push(*a);
        }
        for (q, mut before) in after {
            before.sort();
            before.dedup();
            let list: Vec<String> = before.iter().map(|q| q.to_string()).collect();
            out.push_str(&format!("after {q} {}\n", list.join(" ")));
        }
        out
    }

    fn max_referenced(&self) -> usize {
        let mut m = 0u32;
        for q in self.qubits() {
            if self.init(q) != InitBasis::Empty || *self.measurement(q) != MeasBasis::Empty {
                m = m.max(q.0);
            }
            for d in self.measurement(q).deps() {
                m = m.max(d.0);
            }
        }
        for g in &self.gates {
            for q in g.qubits() {
                m = m.max(q.0);
            }
        }
        for (a, b) in &self.schedule {
            m = m.max(a.0).max(b.0);
        }
        m as usize
    }
}

fn parse_qubit(tok: &str, line: usize) -> Result<QubitId, CircuitError> {
    match tok.parse::<u32>() {
        Ok(n) if n >= 1 => Ok(QubitId(n)),
        _ => Err(CircuitError::Parse {
            line,
            msg: format!("invalid qubit index '{tok}'"),
        }),
    }
}

fn parse_meas(tok: &str, line: usize) -> Result<MeasBasis, CircuitError> {
    let err = || CircuitError::Parse {
        line,
        msg: format!("unknown measurement basis '{tok}'"),
    };
    Ok(match tok {
        "X" => MeasBasis::X,
        "Z" => MeasBasis::Z,
        "A" => MeasBasis::A,
        "Y" => MeasBasis::Y,
        _ => {
            let (kind, rest) = tok.split_at(tok.find('(').ok_or_else(err)?);
            let inner = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(err)?;
            let deps = inner
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| parse_qubit(s.trim(), line))
                .collect::<Result<Vec<_>, _>>()?;
            match kind {
                "ZX" => MeasBasis::CondZX(deps),
                "XZ" => MeasBasis::CondXZ(deps),
                _ => return Err(err()),
            }
        }
    })
}

/// Lowercase aliases accepted in hand-written circuit files.
fn gate_alias(name: &str) -> &str {
    match name {
        "h" => "HGATE",
        "t" => "TGATE",
        "tdag" => "TDAG",
        "p" | "s" => "PGATE",
        "pdag" | "sdag" => "PDAG",
        other => other,
    }
}

impl FromStr for Circuit {
    type Err = CircuitError;

    /// Parses `.circ` files and gate-list input files. Lines are `init q b`,
    /// `cnot c t`, `measure q b`, `after q p...`, `qubits n`, or `NAME q...`.
    /// `#` starts a comment.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut inits: BTreeMap<QubitId, InitBasis> = BTreeMap::new();
        let mut meas: BTreeMap<QubitId, MeasBasis> = BTreeMap::new();
        let mut gates = Vec::new();
        let mut schedule = Vec::new();
        let mut max_q = 0u32;
        let mut declared = 0usize;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            let perr = |msg: String| CircuitError::Parse { line, msg };
            let mut bump = |q: QubitId| max_q = max_q.max(q.0);
            match toks[0] {
                "qubits" => {
                    if toks.len() != 2 {
                        return Err(perr("expected 'qubits <n>'".into()));
                    }
                    declared = toks[1]
                        .parse()
                        .map_err(|_| perr(format!("invalid qubit count '{}'", toks[1])))?;
                }
                "init" => {
                    if toks.len() != 3 {
                        return Err(perr("expected 'init <qubit> <basis>'".into()));
                    }
                    let q = parse_qubit(toks[1], line)?;
                    let b = match toks[2] {
                        "0" => InitBasis::Zero,
                        "+" => InitBasis::Plus,
                        "A" => InitBasis::A,
                        "Y" => InitBasis::Y,
                        other => return Err(perr(format!("unknown init basis '{other}'"))),
                    };
                    bump(q);
                    if inits.insert(q, b).is_some() {
                        return Err(perr(format!("qubit {q} initialised twice")));
                    }
                }
                "measure" => {
                    if toks.len() != 3 {
                        return Err(perr("expected 'measure <qubit> <basis>'".into()));
                    }
                    let q = parse_qubit(toks[1], line)?;
                    let m = parse_meas(toks[2], line)?;
                    bump(q);
                    for d in m.deps() {
                        bump(*d);
                    }
                    if meas.insert(q, m).is_some() {
                        return Err(perr(format!("qubit {q} measured twice")));
                    }
                }
                "after" => {
                    if toks.len() < 3 {
                        return Err(perr("expected 'after <qubit> <qubit>...'".into()));
                    }
                    let q = parse_qubit(toks[1], line)?;
                    bump(q);
                    for t in &toks[2..] {
                        let p = parse_qubit(t, line)?;
                        bump(p);
                        schedule.push((p, q));
                    }
                }
                "cnot" | "cx" | "CNOT" => {
                    if toks.len() != 3 {
                        return Err(perr("expected 'cnot <control> <target>'".into()));
                    }
                    let c = parse_qubit(toks[1], line)?;
                    let t = parse_qubit(toks[2], line)?;
                    if c == t {
                        return Err(perr(format!("CNOT control equals target ({c})")));
                    }
                    bump(c);
                    bump(t);
                    gates.push(GateOp::Cnot {
                        control: c,
                        target: t,
                    });
                }
                name => {
                    if toks.len() < 2 {
                        return Err(perr(format!("gate '{name}' has no operands")));
                    }
                    let qubits = toks[1..]
                        .iter()
                        .map(|t| parse_qubit(t, line))
                        .collect::<Result<Vec<_>, _>>()?;
                    for q in &qubits {
                        bump(*q);
                    }
                    gates.push(GateOp::Named {
                        name: gate_alias(name).to_string(),
                        qubits,
                    });
                }
            }
        }
        let n = declared.max(max_q as usize);
        let mut c = Circuit::new(n);
        for (q, b) in inits {
            c.inits[q.index()] = b;
        }
        for (q, m) in meas {
            c.measurements[q.index()] = m;
        }
        c.gates = gates;
        c.schedule = schedule;
        c.check()?;
        Ok(c)
    }
}
