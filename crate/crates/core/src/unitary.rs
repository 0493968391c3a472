//! `decompose` frontend: single-qubit unitary specifications are recognised
//! exactly as short products of Clifford+T generators and emitted as nicm
//! database entries. Approximate synthesis is left to a pluggable hook.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::circuit::Primitive;
use crate::db::{DecompEntry, GridToken};
use crate::matrix::{c, gate1, pauli1, to_matrix, Matrix, C};

pub const DEFAULT_MAX_LEN: usize = 12;
pub const DEFAULT_TOL: f64 = 1e-9;
const UNITARITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontendError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("header announces {expected} gates but {found} were given")]
    CountMismatch { expected: usize, found: usize },
    #[error("gate '{name}' is not unitary (error {error:.3e})")]
    NotUnitary { name: String, error: f64 },
    #[error("gate '{0}' has no exact Clifford+T form within the search bound")]
    NotRepresentable(String),
    #[error("no approximation algorithm is configured")]
    NotImplemented,
    #[error(
        "approximation for '{name}' misses the target by {residual:.3e} (allowed {epsilon:.3e})"
    )]
    HookOutOfTolerance {
        name: String,
        residual: f64,
        epsilon: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Generator {
    H,
    P,
    Pdag,
    T,
    Tdag,
    X,
    Z,
}

impl Generator {
    pub const ALL: [Generator; 7] = [
        Generator::H,
        Generator::P,
        Generator::Pdag,
        Generator::T,
        Generator::Tdag,
        Generator::X,
        Generator::Z,
    ];

    pub fn matrix(self) -> Matrix {
        use crate::circuit::Pauli;
        to_matrix(&match self {
            Generator::H => gate1(Primitive::H),
            Generator::P => gate1(Primitive::P),
            Generator::Pdag => gate1(Primitive::Pdag),
            Generator::T => gate1(Primitive::T),
            Generator::Tdag => gate1(Primitive::Tdag),
            Generator::X => pauli1(Pauli::X),
            Generator::Z => pauli1(Pauli::Z),
        })
    }

    /// Database tokens realising the generator.
    pub fn tokens(self) -> Vec<GridToken> {
        use GridToken::Gate;
        match self {
            Generator::H => vec![Gate(Primitive::H)],
            Generator::P => vec![Gate(Primitive::P)],
            Generator::Pdag => vec![Gate(Primitive::Pdag)],
            Generator::T => vec![Gate(Primitive::T)],
            Generator::Tdag => vec![Gate(Primitive::Tdag)],
            // X = H Z H and Z = P P
            Generator::X => vec![
                Gate(Primitive::H),
                Gate(Primitive::P),
                Gate(Primitive::P),
                Gate(Primitive::H),
            ],
            Generator::Z => vec![Gate(Primitive::P), Gate(Primitive::P)],
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Generator::H => "H",
            Generator::P => "P",
            Generator::Pdag => "Pdag",
            Generator::T => "T",
            Generator::Tdag => "Tdag",
            Generator::X => "X",
            Generator::Z => "Z",
        };
        f.write_str(s)
    }
}

/// Product of a sequence given in application order (first element acts first).
pub fn sequence_matrix(seq: &[Generator]) -> Matrix {
    seq.iter()
        .fold(Matrix::identity(2), |acc, g| &g.matrix() * &acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitarySpec {
    pub name: String,
    pub matrix: Matrix,
}

impl UnitarySpec {
    pub fn new(name: &str, matrix: Matrix) -> Result<Self, FrontendError> {
        let error = matrix.unitarity_error();
        if matrix.dim() != 2 || error > UNITARITY_TOL {
            return Err(FrontendError::NotUnitary {
                name: name.to_string(),
                error,
            });
        }
        Ok(UnitarySpec {
            name: name.to_string(),
            matrix,
        })
    }
}

/// Parses a gate-spec file: a count line, then per gate a name line and four
/// `[-] radius angle` lines (row-major entries, angles in radians).
pub fn parse_unitary_specs(text: &str) -> Result<Vec<UnitarySpec>, FrontendError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let Some((line, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let expected: usize = header.parse().map_err(|_| FrontendError::Parse {
        line,
        msg: format!("expected gate count, found '{header}'"),
    })?;
    let rest: Vec<(usize, &str)> = lines.collect();
    if !rest.len().is_multiple_of(5) {
        return Err(FrontendError::CountMismatch {
            expected,
            found: rest.len() / 5,
        });
    }
    let found = rest.len() / 5;
    if found != expected {
        return Err(FrontendError::CountMismatch { expected, found });
    }
    let mut specs = Vec::with_capacity(found);
    for chunk in rest.chunks(5) {
        let name = chunk[0].1;
        if name.contains(char::is_whitespace) {
            return Err(FrontendError::Parse {
                line: chunk[0].0,
                msg: format!("gate name '{name}' contains whitespace"),
            });
        }
        let mut entries = [C::new(0.0, 0.0); 4];
        for (k, (line, text)) in chunk[1..].iter().enumerate() {
            entries[k] = parse_polar(text, *line)?;
        }
        let m = Matrix::from_rows(&[&entries[0..2], &entries[2..4]]);
        specs.push(UnitarySpec::new(name, m)?);
    }
    Ok(specs)
}

fn parse_polar(text: &str, line: usize) -> Result<C, FrontendError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    let (sign, nums) = match toks.first() {
        Some(&"-") => (-1.0, &toks[1..]),
        Some(&"+") => (1.0, &toks[1..]),
        _ => (1.0, &toks[..]),
    };
    if nums.len() != 2 {
        return Err(FrontendError::Parse {
            line,
            msg: format!("expected '[-] radius angle', found '{text}'"),
        });
    }
    let num = |s: &str| {
        s.parse::<f64>().map_err(|_| FrontendError::Parse {
            line,
            msg: format!("'{s}' is not a number"),
        })
    };
    Ok(C::from_polar(sign * num(nums[0])?, num(nums[1])?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionResult {
    pub sequence: Vec<Generator>,
    /// `target = phase · product(sequence)`.
    pub phase: C,
    pub residual: f64,
}

/// Matrix rescaled so its first non-negligible entry is real and positive,
/// quantised for hashing.
fn canonical_key(m: &Matrix) -> [i64; 8] {
    let pivot = m
        .data()
        .iter()
        .copied()
        .find(|v| v.norm() > 1e-6)
        .unwrap_or(c(1.0, 0.0));
    let ph = pivot.conj() / pivot.norm();
    let mut key = [0i64; 8];
    for (i, v) in m.data().iter().enumerate() {
        let w = v * ph;
        key[2 * i] = (w.re * 1e7).round() as i64;
        key[2 * i + 1] = (w.im * 1e7).round() as i64;
    }
    key
}

/// Shortest generator sequence equal to the target up to global phase.
/// Among equally short sequences the lexicographically smallest (in the
/// order H < P < Pdag < T < Tdag < X < Z) is returned.
pub fn recognize_unitary(
    spec: &UnitarySpec,
    max_len: usize,
    tol: f64,
) -> Result<RecognitionResult, FrontendError> {
    let target = &spec.matrix;
    let finish = |seq: Vec<Generator>, m: &Matrix| {
        let residual = target.phase_distance(m);
        let t = (&m.adjoint() * target).trace();
        let phase = if t.norm() > 0.0 {
            t / t.norm()
        } else {
            c(1.0, 0.0)
        };
        RecognitionResult {
            sequence: seq,
            phase,
            residual,
        }
    };
    let id = Matrix::identity(2);
    if target.phase_distance(&id) <= tol {
        return Ok(finish(Vec::new(), &id));
    }
    let gens: Vec<(Generator, Matrix)> = Generator::ALL.iter().map(|g| (*g, g.matrix())).collect();
    let mut seen: HashMap<[i64; 8], ()> = HashMap::new();
    seen.insert(canonical_key(&id), ());
    let mut frontier: Vec<(Vec<Generator>, Matrix)> = vec![(Vec::new(), id)];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (seq, m) in &frontier {
            for (g, gm) in &gens {
                let prod = gm * m;
                if seen.insert(canonical_key(&prod), ()).is_some() {
                    continue;
                }
                let mut s = seq.clone();
                s.push(*g);
                if target.phase_distance(&prod) <= tol {
                    return Ok(finish(s, &prod));
                }
                next.push((s, prod));
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Err(FrontendError::NotRepresentable(spec.name.clone()))
}

/// Single-qubit nicm entry listing the sequence in application order.
pub fn emit_nicm_entry(name: &str, result: &RecognitionResult) -> DecompEntry {
    let mut row: Vec<GridToken> = result.sequence.iter().flat_map(|g| g.tokens()).collect();
    if row.is_empty() {
        row.push(GridToken::Wire);
    }
    DecompEntry::nicm(name, vec![row])
}

/// Interface for approximate synthesis of gates without an exact form.
pub trait ApproximationHook {
    fn approximate(
        &self,
        spec: &UnitarySpec,
        epsilon: f64,
    ) -> Result<Vec<Generator>, FrontendError>;
}

/// The default hook: no approximation algorithm.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoApproximation;

impl ApproximationHook for NoApproximation {
    fn approximate(&self, _: &UnitarySpec, _: f64) -> Result<Vec<Generator>, FrontendError> {
        Err(FrontendError::NotImplemented)
    }
}

/// Runs a hook and checks its output against the target.
pub fn checked_approximation(
    hook: &dyn ApproximationHook,
    spec: &UnitarySpec,
    epsilon: f64,
) -> Result<RecognitionResult, FrontendError> {
    let seq = hook.approximate(spec, epsilon)?;
    let m = sequence_matrix(&seq);
    let residual = spec.matrix.phase_distance(&m);
    if residual > epsilon {
        return Err(FrontendError::HookOutOfTolerance {
            name: spec.name.clone(),
            residual,
            epsilon,
        });
    }
    let t = (&m.adjoint() * &spec.matrix).trace();
    Ok(RecognitionResult {
        sequence: seq,
        phase: t / t.norm(),
        residual,
    })
}

/// Exact recognition, falling back to the hook.
pub fn decompose(
    spec: &UnitarySpec,
    hook: &dyn ApproximationHook,
    epsilon: f64,
) -> Result<DecompEntry, FrontendError> {
    let result = match recognize_unitary(spec, DEFAULT_MAX_LEN, DEFAULT_TOL) {
        Ok(r) => r,
        Err(FrontendError::NotRepresentable(name)) => {
            match checked_approximation(hook, spec, epsilon) {
                Ok(r) => r,
                Err(FrontendError::NotImplemented) => {
                    return Err(FrontendError::NotRepresentable(name))
                }
                Err(e) => return Err(e),
            }
        }
        Err(e) => return Err(e),
    };
    Ok(emit_nicm_entry(&spec.name, &result))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HADAMARD: &str =
        "1\nHadamard\n0.70710678118 0\n0.70710678118 0\n0.70710678118 0\n- 0.70710678118 0\n";

    fn spec_of(seq: &[Generator]) -> UnitarySpec {
        UnitarySpec::new("g", sequence_matrix(seq)).unwrap()
    }

    #[test]
    fn parses_hadamard_file() {
        let specs = parse_unitary_specs(HADAMARD).unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].name, "Hadamard");
        assert!(specs[0].matrix.max_abs_diff(&Generator::H.matrix()) < 1e-10);
    }

    #[test]
    fn empty_spec_file() {
        assert!(parse_unitary_specs("0\n").unwrap().is_empty());
        assert!(parse_unitary_specs("").unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_files() {
        let err = parse_unitary_specs("2\nHadamard\n1 0\n0 0\n0 0\n1 0\n").unwrap_err();
        assert_eq!(
            err,
            FrontendError::CountMismatch {
                expected: 2,
                found: 1
            }
        );
        let err = parse_unitary_specs("1\nG\n1 0\nx 0\n0 0\n1 0\n").unwrap_err();
        assert!(matches!(err, FrontendError::Parse { line: 4, .. }));
        let err = parse_unitary_specs("1\nG\n1.1 0\n0 0\n0 0\n1 0\n").unwrap_err();
        assert!(matches!(err, FrontendError::NotUnitary { .. }));
    }

    #[test]
    fn recognises_generators_and_identity() {
        let h = recognize_unitary(&spec_of(&[Generator::H]), 12, 1e-9).unwrap();
        assert_eq!(h.sequence, vec![Generator::H]);
        assert!(h.residual < 1e-12);
        let id = recognize_unitary(&spec_of(&[]), 12, 1e-9).unwrap();
        assert!(id.sequence.is_empty());
    }

    #[test]
    fn recognises_hth_product() {
        let seq = [Generator::H, Generator::T, Generator::H];
        let r = recognize_unitary(&spec_of(&seq), 12, 1e-9).unwrap();
        assert_eq!(r.sequence.len(), 3);
        assert!(sequence_matrix(&r.sequence).phase_distance(&sequence_matrix(&seq)) < 1e-9);
    }

    #[test]
    fn global_phase_is_ignored() {
        let m = sequence_matrix(&[Generator::T, Generator::H]).scale(C::from_polar(1.0, 0.7));
        let r = recognize_unitary(&UnitarySpec::new("g", m).unwrap(), 12, 1e-9).unwrap();
        assert_eq!(r.sequence, vec![Generator::T, Generator::H]);
    }

    #[test]
    fn irrational_rotation_is_not_representable() {
        let m = Matrix::from_rows(&[
            &[c(1.0, 0.0), c(0.0, 0.0)],
            &[c(0.0, 0.0), C::from_polar(1.0, 0.3)],
        ]);
        let spec = UnitarySpec::new("rz", m).unwrap();
        assert_eq!(
            recognize_unitary(&spec, 4, 1e-9),
            Err(FrontendError::NotRepresentable("rz".into()))
        );
    }

    #[test]
    fn emitted_entries() {
        let e = emit_nicm_entry(
            "Hadamard",
            &RecognitionResult {
                sequence: vec![Generator::H],
                phase: c(1.0, 0.0),
                residual: 0.0,
            },
        );
        let mut db = crate::db::Database::default();
        db.insert(e, false).unwrap();
        assert_eq!(
            crate::db::serialize_database(&db),
            "=Hadamard\nnicm\n0\nHGATE\n"
        );
        let e = emit_nicm_entry(
            "I",
            &RecognitionResult {
                sequence: vec![],
                phase: c(1.0, 0.0),
                residual: 0.0,
            },
        );
        assert_eq!(
            e.body,
            crate::db::EntryBody::Nicm {
                rows: vec![vec![GridToken::Wire]]
            }
        );
    }

    struct ExactT;
    impl ApproximationHook for ExactT {
        fn approximate(&self, _: &UnitarySpec, _: f64) -> Result<Vec<Generator>, FrontendError> {
            Ok(vec![Generator::T])
        }
    }

    fn rz(theta: f64) -> UnitarySpec {
        let m = Matrix::from_rows(&[
            &[C::from_polar(1.0, -theta / 2.0), c(0.0, 0.0)],
            &[c(0.0, 0.0), C::from_polar(1.0, theta / 2.0)],
        ]);
        UnitarySpec::new("rz", m).unwrap()
    }

    #[test]
    fn approximation_hooks() {
        let spec = rz(std::f64::consts::FRAC_PI_4);
        assert_eq!(
            NoApproximation.approximate(&spec, 1e-3),
            Err(FrontendError::NotImplemented)
        );
        let r = checked_approximation(&ExactT, &spec, 1e-9).unwrap();
        assert_eq!(r.sequence, vec![Generator::T]);
        let err = checked_approximation(&ExactT, &rz(0.3), 1e-3).unwrap_err();
        assert!(matches!(err, FrontendError::HookOutOfTolerance { .. }));
    }
}
