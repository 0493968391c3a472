//! Oracle checks of database entries against analytic targets.

use crate::circuit::{Circuit, GateOp, MagicKind, MeasBasis, Primitive, QubitId};
use crate::db::{Database, DecompKind};
use crate::matrix::{c, cnot_matrix, gate1, to_matrix, Matrix};
use crate::sim::distill::DistillTable;
use crate::sim::{circuit_unitary, OutcomeAssignment, SimError, SimOptions};
use crate::transform::{
    convert_to_icm, expand_nicm, ConversionOptions, TeleportMode, TransformError,
};

pub const FIDELITY_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("no database entry named '{0}'")]
    Unknown(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Outcome of checking one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryReport {
    pub label: String,
    /// Worst phase-insensitive fidelity over the checked outcome branches.
    pub fidelity: f64,
    pub branches: usize,
    /// `false` when no analytic target is registered for the entry.
    pub has_target: bool,
}

impl EntryReport {
    pub fn passed(&self) -> bool {
        !self.has_target || self.fidelity >= 1.0 - FIDELITY_TOL
    }
}

/// Toffoli on (control, control, target), qubit 1 most significant.
pub fn toffoli_matrix() -> Matrix {
    let mut m = Matrix::identity(8);
    for (i, j) in [(6, 6), (7, 7)] {
        m.set(i, j, c(0.0, 0.0));
    }
    m.set(6, 7, c(1.0, 0.0));
    m.set(7, 6, c(1.0, 0.0));
    m
}

/// Controlled-V with V = √X (or V† when `dagger`).
pub fn controlled_v_matrix(dagger: bool) -> Matrix {
    let s = if dagger { -0.5 } else { 0.5 };
    let (a, b) = (c(0.5, s), c(0.5, -s));
    let mut m = Matrix::identity(4);
    m.set(2, 2, a);
    m.set(2, 3, b);
    m.set(3, 2, b);
    m.set(3, 3, a);
    m
}

/// Registered analytic target of a named entry.
pub fn target(name: &str) -> Option<(&'static str, Matrix)> {
    let p = |g| to_matrix(&gate1(g));
    Some(match name {
        "toffoli" => ("Toffoli", toffoli_matrix()),
        "CV" => ("CV", controlled_v_matrix(false)),
        "CVDAG" => ("CV†", controlled_v_matrix(true)),
        "X" => (
            "X",
            to_matrix(&crate::matrix::pauli1(crate::circuit::Pauli::X)),
        ),
        "Z" => (
            "Z",
            to_matrix(&crate::matrix::pauli1(crate::circuit::Pauli::Z)),
        ),
        "TGATE" | "TGATE_DET" => ("T", p(Primitive::T)),
        "TDAG" | "TDAG_DET" => ("T†", p(Primitive::Tdag)),
        "PGATE" => ("P", p(Primitive::P)),
        "PDAG" => ("P†", p(Primitive::Pdag)),
        "HGATE" | "Hadamard" => ("H", p(Primitive::H)),
        "CNOT" | "cnot" => ("CNOT", cnot_matrix()),
        _ => return None,
    })
}

/// Primitive and teleportation mode realised by a block entry.
fn block_of(name: &str) -> Option<(Primitive, TeleportMode)> {
    use TeleportMode::*;
    Some(match name {
        "TGATE" => (Primitive::T, Simple),
        "TDAG" => (Primitive::Tdag, Simple),
        "TGATE_DET" => (Primitive::T, Deterministic),
        "TDAG_DET" => (Primitive::Tdag, Deterministic),
        "PGATE" => (Primitive::P, Simple),
        "PDAG" => (Primitive::Pdag, Simple),
        "HGATE" => (Primitive::H, Simple),
        _ => return None,
    })
}

/// Worst fidelity of `circuit` against `want` over every outcome branch of
/// positive probability. With `all` false, or more than 12 measurements,
/// only the all-zero branch is checked.
pub fn branch_fidelity(
    circuit: &Circuit,
    want: &Matrix,
    all: bool,
    opts: &SimOptions,
) -> Result<(f64, usize), SimError> {
    let measured: Vec<QubitId> = circuit
        .qubits()
        .filter(|q| *circuit.measurement(*q) != MeasBasis::Empty)
        .collect();
    let branches: u32 = if all && measured.len() <= 12 {
        1 << measured.len()
    } else {
        1
    };
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for bits in 0..branches {
        let mut a = OutcomeAssignment::zeros();
        for (i, q) in measured.iter().enumerate() {
            a = a.with(*q, (bits.checked_shr(i as u32).unwrap_or(0) & 1) as u8);
        }
        match circuit_unitary(circuit, &a, opts) {
            Ok(u) => {
                worst = worst.min(u.phase_fidelity(want));
                count += 1;
            }
            Err(SimError::ZeroProbability(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if count == 0 {
        return Err(SimError::ZeroAccepted);
    }
    Ok((worst, count))
}

/// Simulates an entry and compares it with its registered target.
pub fn verify_entry(db: &Database, name: &str) -> Result<EntryReport, VerifyError> {
    let entry = db
        .get(name)
        .ok_or_else(|| VerifyError::Unknown(name.to_string()))?;
    if entry.kind == DecompKind::IcmDist {
        let kind = if name == "YY" {
            MagicKind::Y
        } else {
            MagicKind::A
        };
        let table = DistillTable::from_entry(kind, entry)?;
        let (acc, inf) = table.exact(0.0);
        return Ok(EntryReport {
            label: format!("{name} distiller"),
            fidelity: 1.0 - inf,
            branches: table.support_size(),
            has_target: (acc - 1.0).abs() < 1e-12,
        });
    }
    let circuit = match block_of(name) {
        Some((p, mode)) => {
            let c = Circuit::from_gates(1, vec![GateOp::single(p, QubitId(1))]);
            convert_to_icm(
                &c,
                db,
                &ConversionOptions {
                    mode,
                    ..Default::default()
                },
            )?
            .into_inner()
        }
        None => {
            let qubits: Vec<u32> = (1..=entry.arity() as u32).collect();
            let c = Circuit::from_gates(qubits.len(), vec![GateOp::named(name, &qubits)]);
            expand_nicm(&c, db)?
        }
    };
    let (label, want, has_target) = match target(name) {
        Some((l, m)) => (l.to_string(), m, true),
        None => {
            let u = circuit_unitary(
                &circuit,
                &OutcomeAssignment::zeros(),
                &SimOptions::default(),
            )?;
            (name.to_string(), u, false)
        }
    };
    let (fidelity, branches) = branch_fidelity(&circuit, &want, true, &SimOptions::default())?;
    Ok(EntryReport {
        label,
        fidelity,
        branches,
        has_target,
    })
}
