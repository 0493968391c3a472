//! Three-dimensional defect geometry of an ICM circuit.
//!
//! Every qubit is a pair of primal strands (z = 0 and z = 2) on its own row
//! (y = 12·row). Each CNOT is an instance of the canonical primal-primal
//! cell: two U-shaped input defects, one output defect pair spanning both
//! rows and a dual loop braiding all three. Time runs along +x, one cell
//! per 6 lattice units.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::circuit::ValidationReport;
use crate::circuit::{validate_icm, Circuit, GateOp, InitBasis, MagicKind, MeasBasis, QubitId};
use crate::par::{map_indexed, ExecPolicy};

pub const ROW_PITCH: i64 = 12;
pub const CNOT_PITCH: i64 = 6;
/// Separation of the two strands of a qubit (along z).
pub const PAIR_GAP: i64 = 2;

pub type Coord = [i64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IoType {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateType {
    Configurable,
    InjectA,
    InjectY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigPoint {
    pub point: u32,
    pub io: IoType,
    pub state: StateType,
}

/// Circuit element a piece of geometry stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    Init(QubitId),
    Meas(QubitId),
    /// Index among the circuit's CNOTs.
    Cnot(usize),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Init(q) => write!(f, "init {q}"),
            Element::Meas(q) => write!(f, "meas {q}"),
            Element::Cnot(k) => write!(f, "cnot {}", k + 1),
        }
    }
}

/// Points owned by a circuit element. For `Init`/`Meas` the first two
/// points are the strand pair of the port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossRef {
    pub element: Element,
    pub points: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeometryDesc {
    /// Point `i + 1` sits at `points[i]`.
    pub points: Vec<Coord>,
    pub segments: Vec<(u32, u32)>,
    /// Sorted by point id.
    pub config: Vec<ConfigPoint>,
    pub cross_refs: Vec<CrossRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrandClass {
    Primal,
    Dual,
}

/// Which parity lattice primal endpoints live on. Duals take the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParityConvention {
    pub primal_odd: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IoChoice {
    MeasureX,
    MeasureZ,
    InitX,
    InitZ,
    KeepInjection(MagicKind),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("no point {0}")]
    UnknownPoint(u32),
    #[error("point {0} is not a configurable point")]
    NotConfigurable(u32),
    #[error("point {0} is an output and cannot hold an injection")]
    OutputInjection(u32),
    #[error("choice {choice:?} does not apply to {io:?} point {point}")]
    DirectionMismatch {
        point: u32,
        io: IoType,
        choice: IoChoice,
    },
    #[error("point {0} does not have exactly two incident segments")]
    Incidence(u32),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: reference to missing point {id}")]
    Dangling { line: usize, id: u32 },
    #[error("circuit is not in ICM form: {0}")]
    NotIcm(ValidationReport),
}

impl GeometryDesc {
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn coord(&self, id: u32) -> Option<Coord> {
        self.points.get((id as usize).checked_sub(1)?).copied()
    }

    pub fn config_point(&self, id: u32) -> Option<&ConfigPoint> {
        self.config.iter().find(|c| c.point == id)
    }

    pub fn injection_count(&self) -> usize {
        self.config
            .iter()
            .filter(|c| c.state != StateType::Configurable)
            .count()
    }

    /// Number of CNOT cells recorded in the cross-reference table.
    pub fn cell_count(&self) -> usize {
        self.cross_refs
            .iter()
            .filter(|r| matches!(r.element, Element::Cnot(_)))
            .count()
    }

    /// Adds `v` to every coordinate.
    pub fn translate(&self, v: Coord) -> GeometryDesc {
        let mut g = self.clone();
        for p in &mut g.points {
            for k in 0..3 {
                p[k] += v[k];
            }
        }
        g
    }

    /// Strand class of a non-configuration point under `conv`.
    pub fn class_of(&self, id: u32, conv: ParityConvention) -> Option<StrandClass> {
        if self.config_point(id).is_some() {
            return Some(StrandClass::Primal);
        }
        point_class(self.coord(id)?, conv)
    }

    /// Class of every segment, `None` where the endpoints disagree.
    pub fn segment_classes(&self, conv: ParityConvention) -> Vec<Option<StrandClass>> {
        self.segments
            .iter()
            .map(|(a, b)| {
                let ca = self.class_of(*a, conv)?;
                let cb = self.class_of(*b, conv)?;
                (ca == cb).then_some(ca)
            })
            .collect()
    }
}

fn point_class(p: Coord, conv: ParityConvention) -> Option<StrandClass> {
    let odd = p.map(|v| v.rem_euclid(2) == 1);
    if odd == [conv.primal_odd; 3] {
        Some(StrandClass::Primal)
    } else if odd == [!conv.primal_odd; 3] {
        Some(StrandClass::Dual)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Deco {
    /// Disjoint strand ends (X basis, or a port joined to a connector).
    Open,
    /// Strands joined (Z basis).
    Join,
    Point(IoType, StateType),
}

fn init_deco(b: InitBasis) -> Deco {
    match b {
        InitBasis::Plus => Deco::Open,
        InitBasis::Zero => Deco::Join,
        InitBasis::Empty => Deco::Point(IoType::Input, StateType::Configurable),
        InitBasis::A => Deco::Point(IoType::Input, StateType::InjectA),
        InitBasis::Y => Deco::Point(IoType::Input, StateType::InjectY),
    }
}

fn meas_deco(m: &MeasBasis) -> Deco {
    match m {
        MeasBasis::X => Deco::Open,
        MeasBasis::Z => Deco::Join,
        // Empty and run-time selected bases stay configurable.
        _ => Deco::Point(IoType::Output, StateType::Configurable),
    }
}

/// Geometry under construction with local ids starting at 1.
#[derive(Default)]
struct Builder {
    points: Vec<Coord>,
    segments: Vec<(u32, u32)>,
    config: Vec<ConfigPoint>,
}

impl Builder {
    fn point(&mut self, c: Coord) -> u32 {
        self.points.push(c);
        self.points.len() as u32
    }

    fn seg(&mut self, a: u32, b: u32) {
        self.segments.push((a, b));
    }

    fn pair(&mut self, x: i64, y: i64) -> (u32, u32) {
        (self.point([x, y, 0]), self.point([x, y, PAIR_GAP]))
    }

    /// Adds the decoration point (if any) and returns it.
    fn deco_point(&mut self, x: i64, y: i64, d: Deco) -> Option<u32> {
        match d {
            Deco::Point(io, state) => {
                let c = self.point([x, y, PAIR_GAP / 2]);
                self.config.push(ConfigPoint {
                    point: c,
                    io,
                    state,
                });
                Some(c)
            }
            _ => None,
        }
    }

    fn deco_segments(&mut self, (a, b): (u32, u32), d: Deco, c: Option<u32>) {
        match (d, c) {
            (Deco::Join, _) => self.seg(a, b),
            (Deco::Point(..), Some(c)) => {
                self.seg(a, c);
                self.seg(b, c);
            }
            _ => {}
        }
    }
}

/// A port: strand pair plus its decoration point.
#[derive(Debug, Clone, Copy)]
struct Port {
    pair: (u32, u32),
    deco: Option<u32>,
}

struct Cell {
    b: Builder,
    ports: [Port; 4],
    interior: Vec<u32>,
}

const CTRL_IN: usize = 0;
const TGT_IN: usize = 1;
const CTRL_OUT: usize = 2;
const TGT_OUT: usize = 3;

/// The primal-primal CNOT cell at x = `x0` between rows `yc` (control) and
/// `yt` (target). Point and segment order follow the canonical listing.
fn cnot_cell(x0: i64, yc: i64, yt: i64, decos: [Deco; 4]) -> Cell {
    let s = if yt >= yc { 1 } else { -1 };
    let cy = |d: i64| yc + s * d;
    let ty = |d: i64| yt - s * d;
    let mut b = Builder::default();
    let ci = b.pair(x0, cy(0));
    let ci_d = b.deco_point(x0, cy(0), decos[CTRL_IN]);
    let u1 = b.pair(x0, cy(6));
    let u2 = b.pair(x0, ty(4));
    let ti = b.pair(x0, ty(0));
    let ti_d = b.deco_point(x0, ty(0), decos[TGT_IN]);
    let co = b.pair(x0 + 2, cy(0));
    let co_d = b.deco_point(x0 + 2, cy(0), decos[CTRL_OUT]);
    let to = b.pair(x0 + 2, ty(0));
    let to_d = b.deco_point(x0 + 2, ty(0), decos[TGT_OUT]);
    let loop_pts = [
        [x0 - 1, ty(3), 1],
        [x0 - 1, cy(5), 1],
        [x0 + 1, cy(5), 1],
        [x0 + 1, cy(5), -1],
        [x0 + 3, cy(5), -1],
        [x0 + 3, cy(5), 1],
        [x0 + 3, ty(3), 1],
    ]
    .map(|c| b.point(c));

    b.deco_segments(ci, decos[CTRL_IN], ci_d);
    b.seg(u1.0, u1.1);
    b.seg(ci.0, u1.0);
    b.seg(ci.1, u1.1);
    b.seg(u2.0, u2.1);
    b.deco_segments(ti, decos[TGT_IN], ti_d);
    b.seg(u2.0, ti.0);
    b.seg(u2.1, ti.1);
    b.deco_segments(co, decos[CTRL_OUT], co_d);
    b.deco_segments(to, decos[TGT_OUT], to_d);
    b.seg(co.0, to.0);
    b.seg(co.1, to.1);
    for w in loop_pts.windows(2) {
        b.seg(w[0], w[1]);
    }
    b.seg(loop_pts[0], loop_pts[6]);

    let mut interior = vec![u1.0, u1.1, u2.0, u2.1];
    interior.extend(loop_pts);
    Cell {
        b,
        ports: [
            Port {
                pair: ci,
                deco: ci_d,
            },
            Port {
                pair: ti,
                deco: ti_d,
            },
            Port {
                pair: co,
                deco: co_d,
            },
            Port {
                pair: to,
                deco: to_d,
            },
        ],
        interior,
    }
}

/// Builds the canonical geometry of an ICM circuit.
pub fn generate_geometry(circuit: &Circuit) -> Result<GeometryDesc, GeometryError> {
    generate_geometry_with(circuit, ExecPolicy::default())
}

pub fn generate_geometry_with(
    circuit: &Circuit,
    policy: ExecPolicy,
) -> Result<GeometryDesc, GeometryError> {
    let report = validate_icm(circuit);
    if !report.is_ok() {
        return Err(GeometryError::NotIcm(report));
    }
    let cnots: Vec<(QubitId, QubitId)> = circuit
        .gates
        .iter()
        .filter_map(|g| match g {
            GateOp::Cnot { control, target } => Some((*control, *target)),
            _ => None,
        })
        .collect();
    let n = circuit.qubit_count();
    let row_y = |q: QubitId| ROW_PITCH * q.index() as i64;
    let mut first: Vec<Option<usize>> = vec![None; n];
    let mut last: Vec<Option<usize>> = vec![None; n];
    for (k, (c, t)) in cnots.iter().enumerate() {
        for q in [c, t] {
            first[q.index()].get_or_insert(k);
            last[q.index()] = Some(k);
        }
    }
    // A cell port is a circuit boundary only when the qubit's first (last)
    // cell is the very first (last) slot; otherwise a standalone port at the
    // cuboid face is connected to it.
    let m = cnots.len();
    let end_x = CNOT_PITCH * m.saturating_sub(1) as i64 + 2;
    let in_at_cell = |q: QubitId, k: usize| first[q.index()] == Some(k) && k == 0;
    let out_at_cell = |q: QubitId, k: usize| last[q.index()] == Some(k) && k + 1 == m;

    let cells = map_indexed(policy, m, |k| {
        let (c, t) = cnots[k];
        let decos = [
            if in_at_cell(c, k) {
                init_deco(circuit.init(c))
            } else {
                Deco::Open
            },
            if in_at_cell(t, k) {
                init_deco(circuit.init(t))
            } else {
                Deco::Open
            },
            if out_at_cell(c, k) {
                meas_deco(circuit.measurement(c))
            } else {
                Deco::Open
            },
            if out_at_cell(t, k) {
                meas_deco(circuit.measurement(t))
            } else {
                Deco::Open
            },
        ];
        cnot_cell(CNOT_PITCH * k as i64, row_y(c), row_y(t), decos)
    });

    let mut g = GeometryDesc::default();
    let mut refs: BTreeMap<Element, Vec<u32>> = BTreeMap::new();
    // (qubit, k) -> global in/out port of that cell
    let mut cell_in: BTreeMap<(QubitId, usize), Port> = BTreeMap::new();
    let mut cell_out: BTreeMap<(QubitId, usize), Port> = BTreeMap::new();
    for (k, cell) in cells.into_iter().enumerate() {
        let off = g.points.len() as u32;
        let shift = |p: Port| Port {
            pair: (p.pair.0 + off, p.pair.1 + off),
            deco: p.deco.map(|d| d + off),
        };
        g.points.extend(cell.b.points);
        g.segments
            .extend(cell.b.segments.iter().map(|(a, b)| (a + off, b + off)));
        g.config.extend(cell.b.config.iter().map(|c| ConfigPoint {
            point: c.point + off,
            ..*c
        }));
        let (c, t) = cnots[k];
        let ports = cell.ports.map(shift);
        let mut own: Vec<u32> = cell.interior.iter().map(|p| p + off).collect();
        let roles = [
            (CTRL_IN, c, in_at_cell(c, k), true),
            (TGT_IN, t, in_at_cell(t, k), true),
            (CTRL_OUT, c, out_at_cell(c, k), false),
            (TGT_OUT, t, out_at_cell(t, k), false),
        ];
        for (slot, q, boundary, is_in) in roles {
            let p = ports[slot];
            if boundary {
                let el = if is_in {
                    Element::Init(q)
                } else {
                    Element::Meas(q)
                };
                refs.insert(el, port_points(p));
            } else {
                own.extend(port_points(p));
            }
            if is_in {
                cell_in.insert((q, k), p);
            } else {
                cell_out.insert((q, k), p);
            }
        }
        own.sort_unstable();
        refs.insert(Element::Cnot(k), own);
    }

    let mut b = Builder {
        points: std::mem::take(&mut g.points),
        segments: std::mem::take(&mut g.segments),
        config: std::mem::take(&mut g.config),
    };
    let mut connectors = Vec::new();
    for q in circuit.qubits() {
        let y = row_y(q);
        if first[q.index()] != Some(0) {
            let pair = b.pair(0, y);
            let d = init_deco(circuit.init(q));
            let c = b.deco_point(0, y, d);
            b.deco_segments(pair, d, c);
            let port = Port { pair, deco: c };
            refs.insert(Element::Init(q), port_points(port));
            let next = first[q.index()].map(|k| cell_in[&(q, k)]);
            connectors.push((port, next));
        }
        if last[q.index()].is_none_or(|k| k + 1 != m) {
            let pair = b.pair(end_x, y);
            let d = meas_deco(circuit.measurement(q));
            let c = b.deco_point(end_x, y, d);
            b.deco_segments(pair, d, c);
            let port = Port { pair, deco: c };
            refs.insert(Element::Meas(q), port_points(port));
            let prev = last[q.index()].map(|k| cell_out[&(q, k)]);
            match prev {
                Some(p) => connectors.push((p, Some(port))),
                None => {
                    // idle qubit: join its own input and output ports
                    let start = connectors
                        .iter()
                        .rposition(|(_, to)| to.is_none())
                        .expect("input port pushed above");
                    connectors[start].1 = Some(port);
                }
            }
        }
    }
    // Wires between consecutive cells of the same qubit.
    for q in circuit.qubits() {
        let ks: Vec<usize> = cnots
            .iter()
            .enumerate()
            .filter(|(_, (c, t))| *c == q || *t == q)
            .map(|(k, _)| k)
            .collect();
        for w in ks.windows(2) {
            connectors.push((cell_out[&(q, w[0])], Some(cell_in[&(q, w[1])])));
        }
    }
    connectors.sort_by_key(|(a, _)| a.pair);
    for (from, to) in connectors {
        if let Some(to) = to {
            b.seg(from.pair.0, to.pair.0);
            b.seg(from.pair.1, to.pair.1);
        }
    }
    g.points = b.points;
    g.segments = b.segments;
    g.config = b.config;
    g.config.sort_by_key(|c| c.point);
    g.cross_refs = refs
        .into_iter()
        .map(|(element, points)| CrossRef { element, points })
        .collect();
    Ok(g)
}

fn port_points(p: Port) -> Vec<u32> {
    let mut v = vec![p.pair.0, p.pair.1];
    v.extend(p.deco);
    v
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

pub fn validate_geometry(g: &GeometryDesc) -> ValidationReport {
    validate_geometry_with(g, ParityConvention::default())
}

pub fn validate_geometry_with(g: &GeometryDesc, conv: ParityConvention) -> ValidationReport {
    let mut v = Vec::new();
    let n = g.points.len() as u32;
    let known = |id: u32| id >= 1 && id <= n;
    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); n as usize + 1];
    for (i, (a, b)) in g.segments.iter().enumerate() {
        if !known(*a) || !known(*b) {
            v.push(format!("segment {} references a missing point", i + 1));
            continue;
        }
        incident[*a as usize].push(*b);
        incident[*b as usize].push(*a);
        let (pa, pb) = (g.points[*a as usize - 1], g.points[*b as usize - 1]);
        let differing = (0..3).filter(|k| pa[*k] != pb[*k]).count();
        if differing != 1 {
            v.push(format!("segment {a},{b} is not axis-aligned"));
        }
    }
    let mut config_ids = BTreeSet::new();
    for c in &g.config {
        if !known(c.point) {
            v.push(format!("configuration point {} does not exist", c.point));
            continue;
        }
        if !config_ids.insert(c.point) {
            v.push(format!("configuration point {} listed twice", c.point));
        }
        if c.io == IoType::Output && c.state != StateType::Configurable {
            v.push(format!("output point {} carries an injection", c.point));
        }
        let nb = &incident[c.point as usize];
        let mid_ok = nb.len() == 2 && {
            let (pa, pb) = (g.points[nb[0] as usize - 1], g.points[nb[1] as usize - 1]);
            let pc = g.points[c.point as usize - 1];
            (0..3).all(|k| pa[k] + pb[k] == 2 * pc[k])
        };
        if !mid_ok {
            v.push(format!(
                "configuration point {} is not the midpoint of its strand pair",
                c.point
            ));
        }
    }
    for id in 1..=n {
        if config_ids.contains(&id) {
            continue;
        }
        if point_class(g.points[id as usize - 1], conv).is_none() {
            v.push(format!("point {id} lies on neither parity lattice"));
        }
    }
    for (i, cls) in g.segment_classes(conv).iter().enumerate() {
        let (a, b) = g.segments[i];
        if cls.is_none() && known(a) && known(b) {
            let mixed = g.class_of(a, conv).is_some() && g.class_of(b, conv).is_some();
            if mixed {
                v.push(format!("segment {a},{b} joins primal and dual endpoints"));
            }
        }
    }
    if !g.cross_refs.is_empty() {
        let mut seen_el = BTreeSet::new();
        let mut owner: BTreeMap<u32, Element> = BTreeMap::new();
        for r in &g.cross_refs {
            if !seen_el.insert(r.element) {
                v.push(format!("element {} mapped twice", r.element));
            }
            for p in &r.points {
                if let Some(prev) = owner.insert(*p, r.element) {
                    v.push(format!("point {p} shared by {prev} and {}", r.element));
                }
            }
            if matches!(r.element, Element::Init(_) | Element::Meas(_)) {
                let pair_ok = r.points.len() >= 2 && known(r.points[0]) && known(r.points[1]) && {
                    let (pa, pb) = (
                        g.points[r.points[0] as usize - 1],
                        g.points[r.points[1] as usize - 1],
                    );
                    let d: Vec<i64> = (0..3).map(|k| (pa[k] - pb[k]).abs()).collect();
                    d.iter().filter(|x| **x != 0).count() == 1 && d.iter().sum::<i64>() == PAIR_GAP
                };
                if !pair_ok {
                    v.push(format!("{} is not a strand pair", r.element));
                }
            }
        }
        for id in 1..=n {
            if !owner.contains_key(&id) {
                v.push(format!("point {id} belongs to no circuit element"));
            }
        }
        for c in &g.config {
            match owner.get(&c.point) {
                Some(Element::Init(_)) if c.io == IoType::Input => {}
                Some(Element::Meas(_)) if c.io == IoType::Output => {}
                _ => v.push(format!(
                    "configuration point {} is not owned by a matching port",
                    c.point
                )),
            }
        }
    }
    ValidationReport { violations: v }
}

// ---------------------------------------------------------------------------
// Reconfiguration
// ---------------------------------------------------------------------------

/// Fixes the role of a configurable input/output point.
pub fn configure_io(
    g: &GeometryDesc,
    point: u32,
    choice: IoChoice,
) -> Result<GeometryDesc, GeometryError> {
    g.coord(point).ok_or(GeometryError::UnknownPoint(point))?;
    let cp = *g
        .config_point(point)
        .filter(|c| c.state == StateType::Configurable)
        .ok_or(GeometryError::NotConfigurable(point))?;
    let mismatch = GeometryError::DirectionMismatch {
        point,
        io: cp.io,
        choice,
    };
    match (choice, cp.io) {
        (IoChoice::KeepInjection(_), IoType::Output) => {
            return Err(GeometryError::OutputInjection(point))
        }
        (IoChoice::MeasureX | IoChoice::MeasureZ, IoType::Input) => return Err(mismatch),
        (IoChoice::InitX | IoChoice::InitZ, IoType::Output) => return Err(mismatch),
        _ => {}
    }
    let mut out = g.clone();
    if let IoChoice::KeepInjection(kind) = choice {
        let c = out
            .config
            .iter_mut()
            .find(|c| c.point == point)
            .expect("checked above");
        c.state = match kind {
            MagicKind::A => StateType::InjectA,
            MagicKind::Y => StateType::InjectY,
        };
        return Ok(out);
    }
    let inc: Vec<usize> = (0..g.segments.len())
        .filter(|i| g.segments[*i].0 == point || g.segments[*i].1 == point)
        .collect();
    if inc.len() != 2 {
        return Err(GeometryError::Incidence(point));
    }
    let other = |i: usize| {
        let (a, b) = g.segments[i];
        if a == point {
            b
        } else {
            a
        }
    };
    let (a, b) = (other(inc[0]), other(inc[1]));
    let join = matches!(choice, IoChoice::MeasureZ | IoChoice::InitZ);
    let mut segments = Vec::with_capacity(g.segments.len());
    for (i, s) in g.segments.iter().enumerate() {
        if i == inc[0] {
            if join {
                segments.push((a, b));
            }
        } else if i != inc[1] {
            segments.push(*s);
        }
    }
    out.segments = segments;
    out.config.retain(|c| c.point != point);
    for r in &mut out.cross_refs {
        r.points.retain(|p| *p != point);
    }
    Ok(remove_point(out, point))
}

/// Deletes an unreferenced point and renumbers the ones after it.
fn remove_point(mut g: GeometryDesc, point: u32) -> GeometryDesc {
    let re = |id: u32| if id > point { id - 1 } else { id };
    g.points.remove(point as usize - 1);
    for s in &mut g.segments {
        *s = (re(s.0), re(s.1));
    }
    for c in &mut g.config {
        c.point = re(c.point);
    }
    for r in &mut g.cross_refs {
        for p in &mut r.points {
            *p = re(*p);
        }
    }
    g
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

pub fn serialize_geometry(g: &GeometryDesc) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{}\n{}\n{}",
        g.config.len(),
        g.points.len(),
        g.segments.len()
    );
    if !g.config.is_empty() {
        let ids: Vec<String> = g.config.iter().map(|c| c.point.to_string()).collect();
        let _ = writeln!(s, "{}", ids.join(","));
    }
    for (a, b) in &g.segments {
        let _ = writeln!(s, "{a},{b}");
    }
    for (i, p) in g.points.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, p[0], p[1], p[2]);
    }
    for c in &g.config {
        let io = match c.io {
            IoType::Input => "i",
            IoType::Output => "o",
        };
        let state = match c.state {
            StateType::Configurable => "",
            StateType::InjectA => ",A",
            StateType::InjectY => ",Y",
        };
        let _ = writeln!(s, "{},{io}{state}", c.point);
    }
    for r in &g.cross_refs {
        let pts: Vec<String> = r.points.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "# {}: {}", r.element, pts.join(" "));
    }
    s
}

fn parse_err(line: usize, msg: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        line,
        msg: msg.into(),
    }
}

fn ints<T: std::str::FromStr>(line: usize, s: &str, n: usize) -> Result<Vec<T>, GeometryError> {
    let v: Vec<T> = s
        .split(',')
        .map(|t| t.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            parse_err(
                line,
                format!("expected {n} comma-separated integers, found '{s}'"),
            )
        })?;
    if v.len() != n {
        return Err(parse_err(
            line,
            format!("expected {n} fields, found {}", v.len()),
        ));
    }
    Ok(v)
}

fn parse_element(line: usize, s: &str) -> Result<Element, GeometryError> {
    let mut it = s.split_whitespace();
    let (Some(kind), Some(num), None) = (it.next(), it.next(), it.next()) else {
        return Err(parse_err(line, format!("bad element '{s}'")));
    };
    let num: u32 = num
        .parse()
        .map_err(|_| parse_err(line, format!("bad element index '{num}'")))?;
    match kind {
        "init" => Ok(Element::Init(QubitId(num))),
        "meas" => Ok(Element::Meas(QubitId(num))),
        "cnot" if num >= 1 => Ok(Element::Cnot(num as usize - 1)),
        _ => Err(parse_err(line, format!("bad element '{s}'"))),
    }
}

pub fn parse_geometry(text: &str) -> Result<GeometryDesc, GeometryError> {
    let mut body = Vec::new();
    let mut sidecar = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if let Some(rest) = t.strip_prefix('#') {
            sidecar.push((i + 1, rest.trim()));
        } else if !t.is_empty() {
            body.push((i + 1, t));
        }
    }
    let mut it = body.into_iter();
    let mut next = |what: &str| {
        it.next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of input, expected {what}")))
    };
    let mut count = |what: &str| -> Result<usize, GeometryError> {
        let (l, s) = next(what)?;
        s.parse()
            .map_err(|_| parse_err(l, format!("expected {what}, found '{s}'")))
    };
    let nc = count("configuration point count")?;
    let np = count("point count")?;
    let ns = count("segment count")?;
    let mut g = GeometryDesc::default();
    let known = |id: u32| id >= 1 && id as usize <= np;
    let mut listed = Vec::new();
    if nc > 0 {
        let (l, s) = next("configuration id list")?;
        listed = ints::<u32>(l, s, nc)?;
        for id in &listed {
            if !known(*id) {
                return Err(GeometryError::Dangling { line: l, id: *id });
            }
        }
    }
    for _ in 0..ns {
        let (l, s) = next("segment")?;
        let v = ints::<u32>(l, s, 2)?;
        for id in &v {
            if !known(*id) {
                return Err(GeometryError::Dangling { line: l, id: *id });
            }
        }
        g.segments.push((v[0], v[1]));
    }
    for k in 0..np {
        let (l, s) = next("coordinate")?;
        let v = ints::<i64>(l, s, 4)?;
        if v[0] != k as i64 + 1 {
            return Err(parse_err(
                l,
                format!("point ids must be dense, expected {}", k + 1),
            ));
        }
        g.points.push([v[1], v[2], v[3]]);
    }
    for _ in 0..nc {
        let (l, s) = next("io line")?;
        let f: Vec<&str> = s.split(',').map(str::trim).collect();
        let id: u32 = f[0]
            .parse()
            .map_err(|_| parse_err(l, format!("bad point id '{}'", f[0])))?;
        if !listed.contains(&id) {
            return Err(parse_err(
                l,
                format!("point {id} is not in the configuration list"),
            ));
        }
        let io = match f.get(1) {
            Some(&"i") => IoType::Input,
            Some(&"o") => IoType::Output,
            _ => return Err(parse_err(l, format!("bad io line '{s}'"))),
        };
        let state = match (f.get(2), f.len()) {
            (None, 2) => StateType::Configurable,
            (Some(&"A"), 3) => StateType::InjectA,
            (Some(&"Y"), 3) => StateType::InjectY,
            _ => return Err(parse_err(l, format!("bad io line '{s}'"))),
        };
        g.config.push(ConfigPoint {
            point: id,
            io,
            state,
        });
    }
    if let Ok((l, s)) = next("end of input") {
        return Err(parse_err(l, format!("trailing line '{s}'")));
    }
    g.config.sort_by_key(|c| c.point);
    for (l, s) in sidecar {
        let Some((el, pts)) = s.split_once(':') else {
            // free-form comment
            continue;
        };
        let element = parse_element(l, el.trim())?;
        let points = pts
            .split_whitespace()
            .map(|t| {
                let id: u32 = t
                    .parse()
                    .map_err(|_| parse_err(l, format!("bad point id '{t}'")))?;
                if known(id) {
                    Ok(id)
                } else {
                    Err(GeometryError::Dangling { line: l, id })
                }
            })
            .collect::<Result<_, _>>()?;
        g.cross_refs.push(CrossRef { element, points });
    }
    Ok(g)
}
