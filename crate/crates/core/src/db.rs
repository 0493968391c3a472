//! Text decomposition database.
//!
//! Each entry starts with `=NAME`, followed by a kind line (`icm`, `nicm` or
//! `icmdist`), an ancilla-count line and a body. `icm`/`icmdist` bodies are an
//! initialisation row, CNOT fanout rows starting with `c`, and a measurement
//! row. `nicm` bodies are a grid with one text row per qubit and one column per
//! time step. A trailing `\` joins a line with the next one; lines starting
//! with `#` are comments.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::circuit::{Circuit, GateOp, InitBasis, MeasBasis, Primitive, QubitId};

/// Seed database shipped with the compiler.
pub const SEED_DB: &str = include_str!("../data/seed.db");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbError {
    #[error("line {line}: unknown token '{token}'")]
    UnknownToken { line: usize, token: String },
    #[error("line {line}: duplicate entry name '{name}'")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: row width {found} differs from {expected}")]
    RowWidth {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {msg}")]
    AncillaMismatch { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Fanout { line: usize, source: FanoutError },
    #[error("entry '{0}' already exists")]
    Exists(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FanoutError {
    #[error("fanout row needs a control and at least one target")]
    TooShort,
    #[error("CNOT control equals target ({0})")]
    ControlIsTarget(u32),
    #[error("duplicate target {0} in fanout row")]
    DuplicateTarget(u32),
}

/// Expands `c ctrl t1 t2 ...` into one CNOT per target, keeping the listed order.
pub fn expand_fanout(row: &[u32]) -> Result<Vec<(u32, u32)>, FanoutError> {
    let (&control, targets) = row.split_first().ok_or(FanoutError::TooShort)?;
    if targets.is_empty() {
        return Err(FanoutError::TooShort);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(targets.len());
    for &t in targets {
        if t == control {
            return Err(FanoutError::ControlIsTarget(t));
        }
        if !seen.insert(t) {
            return Err(FanoutError::DuplicateTarget(t));
        }
        out.push((control, t));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecompKind {
    Icm,
    Nicm,
    IcmDist,
}

impl DecompKind {
    fn token(self) -> &'static str {
        match self {
            DecompKind::Icm => "icm",
            DecompKind::Nicm => "nicm",
            DecompKind::IcmDist => "icmdist",
        }
    }
}

/// Measurement tokens of an icm row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasToken {
    Z,
    X,
    A,
    Y,
    /// `MZX`
    ZX,
    /// `MXZ`
    XZ,
    Empty,
}

impl MeasToken {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "MZ" => MeasToken::Z,
            "MX" => MeasToken::X,
            "MA" => MeasToken::A,
            "MY" => MeasToken::Y,
            "MZX" => MeasToken::ZX,
            "MXZ" => MeasToken::XZ,
            "EMPTY" => MeasToken::Empty,
            _ => return None,
        })
    }

    fn token(self) -> &'static str {
        match self {
            MeasToken::Z => "MZ",
            MeasToken::X => "MX",
            MeasToken::A => "MA",
            MeasToken::Y => "MY",
            MeasToken::ZX => "MZX",
            MeasToken::XZ => "MXZ",
            MeasToken::Empty => "EMPTY",
        }
    }

    pub fn is_conditional(self) -> bool {
        matches!(self, MeasToken::ZX | MeasToken::XZ)
    }

    /// Circuit basis, with conditional tokens depending on `deps`.
    pub fn to_basis(self, deps: Vec<QubitId>) -> MeasBasis {
        match self {
            MeasToken::Z => MeasBasis::Z,
            MeasToken::X => MeasBasis::X,
            MeasToken::A => MeasBasis::A,
            MeasToken::Y => MeasBasis::Y,
            MeasToken::ZX => MeasBasis::CondZX(deps),
            MeasToken::XZ => MeasBasis::CondXZ(deps),
            MeasToken::Empty => MeasBasis::Empty,
        }
    }
}

fn parse_init(s: &str) -> Option<InitBasis> {
    Some(match s {
        "EMPTY" => InitBasis::Empty,
        "ZERO" => InitBasis::Zero,
        "PLUS" => InitBasis::Plus,
        "AA" => InitBasis::A,
        "YY" => InitBasis::Y,
        _ => return None,
    })
}

fn init_token(b: InitBasis) -> &'static str {
    match b {
        InitBasis::Empty => "EMPTY",
        InitBasis::Zero => "ZERO",
        InitBasis::Plus => "PLUS",
        InitBasis::A => "AA",
        InitBasis::Y => "YY",
    }
}

/// One cell of an nicm grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GridToken {
    Wire,
    Ctrl,
    Tgt,
    Gate(Primitive),
    MeasX,
    MeasZ,
    /// Another database entry applied to this single qubit.
    Entry(String),
}

impl GridToken {
    fn parse(s: &str) -> Self {
        match s {
            "WIRE" => GridToken::Wire,
            "CTRL" => GridToken::Ctrl,
            "TGT" => GridToken::Tgt,
            "MX" => GridToken::MeasX,
            "MZ" => GridToken::MeasZ,
            other => match Primitive::from_token(other) {
                Some(p) => GridToken::Gate(p),
                None => GridToken::Entry(other.to_string()),
            },
        }
    }

    pub fn token(&self) -> &str {
        match self {
            GridToken::Wire => "WIRE",
            GridToken::Ctrl => "CTRL",
            GridToken::Tgt => "TGT",
            GridToken::MeasX => "MX",
            GridToken::MeasZ => "MZ",
            GridToken::Gate(p) => p.token(),
            GridToken::Entry(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntryBody {
    Icm {
        inits: Vec<InitBasis>,
        fanouts: Vec<Vec<u32>>,
        meas: Vec<MeasToken>,
    },
    /// `rows[q][t]`: qubit q at time step t.
    Nicm { rows: Vec<Vec<GridToken>> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompEntry {
    pub name: String,
    pub kind: DecompKind,
    pub ancillas: usize,
    pub body: EntryBody,
}

impl DecompEntry {
    pub fn nicm(name: &str, rows: Vec<Vec<GridToken>>) -> Self {
        DecompEntry {
            name: name.to_string(),
            kind: DecompKind::Nicm,
            ancillas: 0,
            body: EntryBody::Nicm { rows },
        }
    }

    /// Qubit positions covered by the entry (operands plus ancillas).
    pub fn positions(&self) -> usize {
        match &self.body {
            EntryBody::Icm { inits, .. } => inits.len(),
            EntryBody::Nicm { rows } => rows.len(),
        }
    }

    /// Number of operands a gate using this entry takes.
    pub fn arity(&self) -> usize {
        self.positions() - self.ancillas
    }

    /// CNOTs in listed order, as 1-based position pairs.
    pub fn cnots(&self) -> Vec<(u32, u32)> {
        match &self.body {
            EntryBody::Icm { fanouts, .. } => fanouts
                .iter()
                .flat_map(|r| expand_fanout(r).expect("validated at parse time"))
                .collect(),
            EntryBody::Nicm { .. } => Vec::new(),
        }
    }

    /// The icm body as a standalone circuit. Conditional measurements
    /// depend on the entry's fixed-basis measurements.
    pub fn to_circuit(&self) -> Option<Circuit> {
        let EntryBody::Icm { inits, meas, .. } = &self.body else {
            return None;
        };
        let mut c = Circuit::new(inits.len());
        c.inits = inits.clone();
        let fixed: Vec<QubitId> = meas
            .iter()
            .enumerate()
            .filter(|(_, m)| matches!(m, MeasToken::Z | MeasToken::X))
            .map(|(i, _)| QubitId::from_index(i))
            .collect();
        c.measurements = meas.iter().map(|m| m.to_basis(fixed.clone())).collect();
        c.gates = self
            .cnots()
            .into_iter()
            .map(|(a, b)| GateOp::cnot(a, b))
            .collect();
        Some(c)
    }

    fn write(&self, out: &mut String) {
        out.push_str(&format!(
            "={}\n{}\n{}\n",
            self.name,
            self.kind.token(),
            self.ancillas
        ));
        match &self.body {
            EntryBody::Icm {
                inits,
                fanouts,
                meas,
            } => {
                let row: Vec<&str> = inits.iter().map(|b| init_token(*b)).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
                for f in fanouts {
                    out.push('c');
                    for q in f {
                        out.push_str(&format!(" {q}"));
                    }
                    out.push('\n');
                }
                let row: Vec<&str> = meas.iter().map(|m| m.token()).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
            EntryBody::Nicm { rows } => {
                for r in rows {
                    let row: Vec<&str> = r.iter().map(|t| t.token()).collect();
                    out.push_str(&row.join(" "));
                    out.push('\n');
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Database {
    entries: HashMap<String, DecompEntry>,
    order: Vec<String>,
}

impl Database {
    pub fn seed() -> Self {
        parse_database(SEED_DB).expect("seed database parses")
    }

    pub fn get(&self, name: &str) -> Option<&DecompEntry> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Entries in source order.
    pub fn entries(&self) -> impl Iterator<Item = &DecompEntry> {
        self.order.iter().map(|n| &self.entries[n])
    }

    /// Adds an entry at the end, or replaces it in place when `force` is set.
    pub fn insert(&mut self, entry: DecompEntry, force: bool) -> Result<(), DbError> {
        if self.entries.contains_key(&entry.name) {
            if !force {
                return Err(DbError::Exists(entry.name));
            }
        } else {
            self.order.push(entry.name.clone());
        }
        self.entries.insert(entry.name.clone(), entry);
        Ok(())
    }
}

impl fmt::Display for DecompEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write(&mut s);
        f.write_str(&s)
    }
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_database(self))
    }
}

/// Canonical text: single spaces, no continuations, source order.
pub fn serialize_database(db: &Database) -> String {
    let mut out = String::new();
    for e in db.entries() {
        e.write(&mut out);
    }
    out
}

/// Logical lines with the physical line number they start on.
fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if pending.is_none() && (trimmed.is_empty() || trimmed.starts_with('#')) {
            continue;
        }
        let (start, mut acc) = pending.take().unwrap_or((i + 1, String::new()));
        if let Some(body) = trimmed.strip_suffix('\\') {
            acc.push_str(body);
            acc.push(' ');
            pending = Some((start, acc));
        } else {
            acc.push_str(trimmed);
            out.push((start, acc));
        }
    }
    if let Some(p) = pending {
        out.push(p);
    }
    out
}

pub fn parse_database(text: &str) -> Result<Database, DbError> {
    let lines = logical_lines(text);
    let mut db = Database::default();
    let mut entry_refs: Vec<(usize, String)> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let (line, head) = &lines[i];
        let name = head
            .strip_prefix('=')
            .map(str::trim)
            .filter(|n| !n.is_empty() && !n.contains(char::is_whitespace))
            .ok_or_else(|| DbError::Syntax {
                line: *line,
                msg: format!("expected '=NAME', found '{head}'"),
            })?
            .to_string();
        let entry_line = *line;
        let mut end = i + 1;
        while end < lines.len() && !lines[end].1.starts_with('=') {
            end += 1;
        }
        let body = &lines[i + 1..end];
        if body.len() < 3 {
            return Err(DbError::Syntax {
                line: entry_line,
                msg: format!("entry '{name}' needs kind, ancilla count and body lines"),
            });
        }
        let kind = match body[0].1.as_str() {
            "icm" => DecompKind::Icm,
            "nicm" => DecompKind::Nicm,
            "icmdist" => DecompKind::IcmDist,
            other => {
                return Err(DbError::UnknownToken {
                    line: body[0].0,
                    token: other.to_string(),
                })
            }
        };
        let ancillas: usize = body[1].1.parse().map_err(|_| DbError::Syntax {
            line: body[1].0,
            msg: format!("invalid ancilla count '{}'", body[1].1),
        })?;
        let rows = &body[2..];
        let entry_body = match kind {
            DecompKind::Nicm => parse_grid(rows, ancillas, &mut entry_refs)?,
            _ => parse_icm(rows, ancillas)?,
        };
        if db.contains(&name) {
            return Err(DbError::DuplicateName {
                line: entry_line,
                name,
            });
        }
        db.insert(
            DecompEntry {
                name,
                kind,
                ancillas,
                body: entry_body,
            },
            false,
        )?;
        i = end;
    }
    for (line, token) in entry_refs {
        match db.get(&token) {
            Some(e) if e.arity() == 1 => {}
            _ => return Err(DbError::UnknownToken { line, token }),
        }
    }
    Ok(db)
}

fn split(row: &str) -> Vec<&str> {
    row.split_whitespace().collect()
}

fn parse_grid(
    rows: &[(usize, String)],
    ancillas: usize,
    entry_refs: &mut Vec<(usize, String)>,
) -> Result<EntryBody, DbError> {
    let mut grid = Vec::with_capacity(rows.len());
    let width = split(&rows[0].1).len();
    for (line, text) in rows {
        let toks = split(text);
        if toks.len() != width {
            return Err(DbError::RowWidth {
                line: *line,
                expected: width,
                found: toks.len(),
            });
        }
        let mut row = Vec::with_capacity(width);
        for t in toks {
            let g = GridToken::parse(t);
            if let GridToken::Entry(name) = &g {
                let plausible = name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !plausible {
                    return Err(DbError::UnknownToken {
                        line: *line,
                        token: name.clone(),
                    });
                }
                entry_refs.push((*line, name.clone()));
            }
            row.push(g);
        }
        grid.push(row);
    }
    if ancillas > grid.len() {
        return Err(DbError::AncillaMismatch {
            line: rows[0].0,
            msg: format!("{ancillas} ancillas but only {} qubit rows", grid.len()),
        });
    }
    Ok(EntryBody::Nicm { rows: grid })
}

fn parse_icm(rows: &[(usize, String)], ancillas: usize) -> Result<EntryBody, DbError> {
    let (init_line, init_text) = &rows[0];
    let (meas_line, meas_text) = rows.last().expect("at least three body lines");
    let inits = split(init_text)
        .into_iter()
        .map(|t| {
            parse_init(t).ok_or_else(|| DbError::UnknownToken {
                line: *init_line,
                token: t.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let meas = split(meas_text)
        .into_iter()
        .map(|t| {
            MeasToken::parse(t).ok_or_else(|| DbError::UnknownToken {
                line: *meas_line,
                token: t.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if inits.len() != meas.len() {
        return Err(DbError::RowWidth {
            line: *meas_line,
            expected: inits.len(),
            found: meas.len(),
        });
    }
    let n = inits.len();
    if ancillas > n {
        return Err(DbError::AncillaMismatch {
            line: *init_line,
            msg: format!("{ancillas} ancillas but the rows list {n} qubits"),
        });
    }
    let mut fanouts = Vec::new();
    for (line, text) in &rows[1..rows.len() - 1] {
        let toks = split(text);
        if toks.first() != Some(&"c") {
            return Err(DbError::UnknownToken {
                line: *line,
                token: toks.first().unwrap_or(&"").to_string(),
            });
        }
        let ids = toks[1..]
            .iter()
            .map(|t| match t.parse::<u32>() {
                Ok(q) if q >= 1 && q as usize <= n => Ok(q),
                _ => Err(DbError::AncillaMismatch {
                    line: *line,
                    msg: format!("qubit '{t}' outside 1..{n}"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        expand_fanout(&ids).map_err(|source| DbError::Fanout {
            line: *line,
            source,
        })?;
        fanouts.push(ids);
    }
    Ok(EntryBody::Icm {
        inits,
        fanouts,
        meas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TGATE: &str = "=TGATE\nicm\n1\nEMPTY AA\nc 2 1\nMZ EMPTY\n";

    #[test]
    fn parses_simple_t_entry() {
        let db = parse_database(TGATE).unwrap();
        let e = db.get("TGATE").unwrap();
        assert_eq!(e.kind, DecompKind::Icm);
        assert_eq!(e.ancillas, 1);
        assert_eq!(
            e.body,
            EntryBody::Icm {
                inits: vec![InitBasis::Empty, InitBasis::A],
                fanouts: vec![vec![2, 1]],
                meas: vec![MeasToken::Z, MeasToken::Empty],
            }
        );
        assert_eq!(e.cnots(), vec![(2, 1)]);
        assert_eq!(serialize_database(&db), TGATE);
    }

    #[test]
    fn empty_text_is_empty_database() {
        let db = parse_database("").unwrap();
        assert!(db.is_empty());
        assert_eq!(serialize_database(&db), "");
    }

    #[test]
    fn fanout_expansion() {
        assert_eq!(expand_fanout(&[2, 1]).unwrap(), vec![(2, 1)]);
        let v = expand_fanout(&[15, 3, 5, 6, 9, 10, 12]).unwrap();
        assert_eq!(v.len(), 6);
        assert!(v.iter().all(|(c, _)| *c == 15));
        assert_eq!(expand_fanout(&[4, 4]), Err(FanoutError::ControlIsTarget(4)));
        assert_eq!(
            expand_fanout(&[4, 1, 1]),
            Err(FanoutError::DuplicateTarget(1))
        );
        assert_eq!(expand_fanout(&[4]), Err(FanoutError::TooShort));
    }

    #[test]
    fn continuation_lines_join() {
        let text = "=X2\nicm\n1\nEMPTY \\\n  ZERO\nc 1 2\nMZ EMPTY\n";
        let db = parse_database(text).unwrap();
        assert_eq!(db.get("X2").unwrap().positions(), 2);
        assert!(!serialize_database(&db).contains('\\'));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_database("=A\nicm\n1\nEMPTY BOGUS\nc 2 1\nMZ EMPTY\n").unwrap_err();
        assert_eq!(
            err,
            DbError::UnknownToken {
                line: 4,
                token: "BOGUS".into()
            }
        );
        let err = parse_database(&format!("{TGATE}{TGATE}")).unwrap_err();
        assert!(matches!(err, DbError::DuplicateName { line: 7, .. }));
        let err = parse_database("=G\nnicm\n0\nWIRE CTRL\nTGT\n").unwrap_err();
        assert!(matches!(err, DbError::RowWidth { line: 5, .. }));
        let err = parse_database("=G\nicm\n3\nEMPTY AA\nc 2 1\nMZ EMPTY\n").unwrap_err();
        assert!(matches!(err, DbError::AncillaMismatch { line: 4, .. }));
        let err = parse_database("=G\nicm\n1\nEMPTY AA\nc 2 2\nMZ EMPTY\n").unwrap_err();
        assert!(matches!(err, DbError::Fanout { line: 5, .. }));
        let err = parse_database("=G\nnicm\n0\nFROB\n").unwrap_err();
        assert!(matches!(err, DbError::UnknownToken { line: 4, .. }));
    }

    #[test]
    fn comments_are_stripped() {
        let db = parse_database(&format!("# header\n{TGATE}# trailing\n")).unwrap();
        assert_eq!(db.len(), 1);
    }

    #[test]
    fn seed_contains_expected_entries() {
        let db = Database::seed();
        for name in [
            "toffoli",
            "TGATE",
            "TDAG",
            "TGATE_DET",
            "TDAG_DET",
            "PGATE",
            "PDAG",
            "HGATE",
            "MA",
            "MY",
            "AA",
            "YY",
            "CV",
            "CVDAG",
        ] {
            assert!(db.contains(name), "missing {name}");
        }
        let aa = db.get("AA").unwrap();
        assert_eq!(
            (aa.kind, aa.ancillas, aa.positions()),
            (DecompKind::IcmDist, 15, 16)
        );
        let EntryBody::Icm { fanouts, meas, .. } = &aa.body else {
            panic!()
        };
        assert_eq!(fanouts.len(), 6);
        assert_eq!(fanouts[1], vec![1, 3, 5, 7, 9, 11, 13, 15]);
        assert_eq!(meas.iter().filter(|m| **m == MeasToken::A).count(), 15);
        assert_eq!(db.get("toffoli").unwrap().arity(), 3);
    }

    #[test]
    fn seed_round_trips() {
        let db = Database::seed();
        let text = serialize_database(&db);
        let again = parse_database(&text).unwrap();
        assert_eq!(again, db);
        assert_eq!(serialize_database(&again), text);
    }

    #[test]
    fn icm_entries_validate_as_circuits() {
        let db = Database::seed();
        for e in db.entries().filter(|e| e.kind == DecompKind::Icm) {
            let c = e.to_circuit().unwrap();
            let r = crate::circuit::validate_icm(&c);
            assert!(r.is_ok(), "{}: {r}", e.name);
        }
    }

    #[test]
    fn insert_respects_force() {
        let mut db = parse_database(TGATE).unwrap();
        let e = db.get("TGATE").unwrap().clone();
        assert_eq!(
            db.insert(e.clone(), false),
            Err(DbError::Exists("TGATE".into()))
        );
        db.insert(e, true).unwrap();
        assert_eq!(db.len(), 1);
    }
}
