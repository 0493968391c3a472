//! Acceptance suite: one PASS/FAIL line per criterion, each pinned at its
//! tolerance and runtime budget. Exits non-zero if any criterion fails.
//!
//! Run alone with `cargo test --release --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{count, random_circuit};
use icm::circuit::{
    compute_stats, order_measurements, validate_icm, Circuit, GateOp, MagicKind, MeasBasis,
    Primitive, QubitId,
};
use icm::db::{parse_database, serialize_database, Database};
use icm::geometry::{
    generate_geometry, parse_geometry, serialize_geometry, validate_geometry, GeometryDesc, IoType,
};
use icm::matrix::{gate1, to_matrix, Matrix};
use icm::par::ExecPolicy;
use icm::sim::distill::{distillation_infidelity, duplicate_failure, loglog_slope, DistillTable};
use icm::sim::{simulate, OutcomeAssignment, SimError, SimOptions, StateVector};
use icm::transform::{convert_to_icm, expand_nicm, ConversionOptions, TeleportMode};
use icm::verify::{branch_fidelity, controlled_v_matrix, toffoli_matrix, FIDELITY_TOL};

const CNOT_CELL: &str = include_str!("data/cnot_cell.geom");
const SWEEP: [f64; 3] = [0.002, 0.005, 0.01];
const TRIALS: usize = 10_000;
const SLOPE_TOL: f64 = 0.3;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn opts(mode: TeleportMode) -> ConversionOptions {
    ConversionOptions {
        mode,
        ..Default::default()
    }
}

fn corpus() -> Vec<Circuit> {
    (0..100).map(|s| random_circuit(s, 5, 20)).collect()
}

fn format_fidelity() -> Check {
    let c = Circuit::from_gates(1, vec![GateOp::single(Primitive::T, QubitId(1))]);
    let icm = convert_to_icm(&c, &Database::seed(), &ConversionOptions::default())
        .map_err(|e| e.to_string())?;
    let text = icm.to_text();
    ensure(text == "init 2 A\ncnot 2 1\nmeasure 1 Z\n", || {
        format!("got {text:?}")
    })?;
    Ok("three-line listing exact".into())
}

fn geometry_golden() -> Check {
    let cnot = Circuit::from_gates(2, vec![GateOp::cnot(1, 2)]);
    let got = generate_geometry(&cnot).map_err(|e| e.to_string())?;
    let want = parse_geometry(CNOT_CELL).map_err(|e| e.to_string())?;
    let text = serialize_geometry(&got);
    let header: Vec<&str> = text.lines().take(4).collect();
    ensure(header == ["4", "23", "23", "3,10,13,16"], || {
        format!("header {header:?}")
    })?;
    let io: Vec<String> = got
        .config
        .iter()
        .map(|c| {
            format!(
                "{}:{}",
                c.point,
                if c.io == IoType::Input { "i" } else { "o" }
            )
        })
        .collect();
    ensure(io == ["3:i", "10:i", "13:o", "16:o"], || {
        format!("io {io:?}")
    })?;
    let d: Vec<i64> = (0..3)
        .map(|k| got.points[0][k] - want.points[0][k])
        .collect();
    ensure(d.iter().all(|v| v % 2 == 0), || format!("odd offset {d:?}"))?;
    let shifted: GeometryDesc = got.translate([-d[0], -d[1], -d[2]]);
    ensure(shifted.points == want.points, || {
        "coordinates differ from the reference".into()
    })?;
    ensure(shifted.segments == want.segments, || {
        "segments differ from the reference".into()
    })?;
    let r = validate_geometry(&got);
    ensure(r.is_ok(), || r.to_string())?;
    Ok(format!("4/23/23, io {}, offset {d:?}", io.join(" ")))
}

fn decomposition_correctness() -> Check {
    let db = Database::seed();
    let sim = SimOptions::default();
    let mut worst = 1.0f64;
    let mut check = |label: &str, c: &Circuit, want: &Matrix, all: bool| -> Result<(), String> {
        let (f, _) = branch_fidelity(c, want, all, &sim).map_err(|e| e.to_string())?;
        worst = worst.min(f);
        ensure(f >= 1.0 - FIDELITY_TOL, || format!("{label} fidelity {f}"))
    };
    let tof = expand_nicm(
        &Circuit::from_gates(3, vec![GateOp::named("toffoli", &[1, 2, 3])]),
        &db,
    )
    .map_err(|e| e.to_string())?;
    check("toffoli", &tof, &toffoli_matrix(), true)?;
    let cv = expand_nicm(
        &Circuit::from_gates(2, vec![GateOp::named("CV", &[1, 2])]),
        &db,
    )
    .map_err(|e| e.to_string())?;
    check("CV", &cv, &controlled_v_matrix(false), true)?;
    let single = |p| Circuit::from_gates(1, vec![GateOp::single(p, QubitId(1))]);
    let h = convert_to_icm(&single(Primitive::H), &db, &ConversionOptions::default())
        .map_err(|e| e.to_string())?;
    let teleports = h
        .qubits()
        .filter(|q| *h.measurement(*q) != MeasBasis::Empty)
        .count();
    ensure(teleports == 3, || {
        format!("H uses {teleports} teleportations")
    })?;
    check("ICM H", &h, &to_matrix(&gate1(Primitive::H)), false)?;
    for mode in [TeleportMode::Simple, TeleportMode::Deterministic] {
        let t =
            convert_to_icm(&single(Primitive::T), &db, &opts(mode)).map_err(|e| e.to_string())?;
        check(
            &format!("{mode:?} T"),
            &t,
            &to_matrix(&gate1(Primitive::T)),
            true,
        )?;
    }
    Ok(format!("worst fidelity 1 - {:.1e}", 1.0 - worst))
}

fn resource_scaling() -> Check {
    let db = Database::seed();
    for (i, c) in corpus().iter().enumerate() {
        for mode in [TeleportMode::Simple, TeleportMode::Deterministic] {
            let icm =
                convert_to_icm(c, &db, &opts(mode)).map_err(|e| format!("circuit {i}: {e}"))?;
            let t = count(c, Primitive::is_t);
            let h = count(c, |p| p == Primitive::H);
            let p = count(c, |p| matches!(p, Primitive::P | Primitive::Pdag));
            let bound = c.qubit_count() + 5 * t + 3 * h + p + 1;
            ensure(icm.qubit_count() <= bound, || {
                format!(
                    "circuit {i} {mode:?}: {} qubits > {bound}",
                    icm.qubit_count()
                )
            })?;
            ensure(icm.gates.len() <= 6 * c.gates.len(), || {
                format!(
                    "circuit {i} {mode:?}: {} gates > 6·{}",
                    icm.gates.len(),
                    c.gates.len()
                )
            })?;
        }
    }
    Ok("100 circuits × 2 modes within bounds".into())
}

fn t_depth_preservation() -> Check {
    let db = Database::seed();
    let cv = expand_nicm(
        &Circuit::from_gates(2, vec![GateOp::named("CV", &[1, 2])]),
        &db,
    )
    .map_err(|e| e.to_string())?;
    let s = compute_stats(&cv);
    ensure((s.t_count, s.t_depth) == (3, 2), || format!("input {s}"))?;
    for mode in [TeleportMode::Simple, TeleportMode::Deterministic] {
        let icm = convert_to_icm(&cv, &db, &opts(mode)).map_err(|e| e.to_string())?;
        let o = compute_stats(&icm);
        ensure((o.t_count, o.t_depth) == (3, 2), || {
            format!("{mode:?} output {o}")
        })?;
    }
    Ok("t_count 3, t_depth 2 before and after".into())
}

fn distillation_scaling() -> Check {
    let db = Database::seed();
    let mut notes = Vec::new();
    for kind in [MagicKind::Y, MagicKind::A] {
        let table = DistillTable::for_kind(kind, &db).map_err(|e| e.to_string())?;
        let zero = distillation_infidelity(&table, 0.0, TRIALS, 1, ExecPolicy::Parallel)
            .map_err(|e| e.to_string())?;
        ensure(zero.acceptance == 1.0 && zero.infidelity == 0.0, || {
            format!(
                "{kind:?} at p=0: acceptance {}, infidelity {}",
                zero.acceptance, zero.infidelity
            )
        })?;
        let mut pts = Vec::new();
        for p in SWEEP {
            let s = distillation_infidelity(&table, p, TRIALS, 1, ExecPolicy::Parallel)
                .map_err(|e| e.to_string())?;
            pts.push((p, s.infidelity));
        }
        let slope = loglog_slope(&pts);
        ensure((slope - 3.0).abs() <= SLOPE_TOL, || {
            format!("{kind:?} slope {slope:.3}")
        })?;
        notes.push(format!("{kind:?} slope {slope:.3}"));
    }
    Ok(notes.join(", "))
}

fn duplicate_recovery() -> Check {
    let table =
        DistillTable::for_kind(MagicKind::Y, &Database::seed()).map_err(|e| e.to_string())?;
    let mut pts = Vec::new();
    for p in SWEEP {
        let s = duplicate_failure(&table, 2, p, TRIALS, 1, ExecPolicy::Parallel)
            .map_err(|e| e.to_string())?;
        pts.push((p, s.failure));
    }
    let slope = loglog_slope(&pts);
    ensure((slope - 2.0).abs() <= SLOPE_TOL, || {
        format!("failure slope {slope:.3}")
    })?;
    Ok(format!("k=2 failure slope {slope:.3}"))
}

fn property_suites() -> Check {
    let db = Database::seed();
    let text = serialize_database(&db);
    let again = parse_database(&text).map_err(|e| e.to_string())?;
    ensure(serialize_database(&again) == text, || {
        "database round trip drifted".into()
    })?;
    let mut branches = 0;
    for (i, c) in corpus().iter().enumerate() {
        let icm =
            convert_to_icm(c, &db, &ConversionOptions::default()).map_err(|e| e.to_string())?;
        let r = validate_icm(&icm);
        ensure(r.is_ok(), || format!("circuit {i}: {r}"))?;

        let order = order_measurements(&icm).map_err(|e| e.to_string())?;
        let pos: BTreeMap<QubitId, usize> = order
            .iter()
            .enumerate()
            .map(|(k, (q, _))| (*q, k))
            .collect();
        for (a, b) in icm.dependency_edges() {
            ensure(pos[&a] < pos[&b], || {
                format!("circuit {i}: {a} not before {b}")
            })?;
        }

        if icm.qubit_count() <= 8 {
            let g = generate_geometry(&icm).map_err(|e| e.to_string())?;
            let s = serialize_geometry(&g);
            let back = parse_geometry(&s).map_err(|e| e.to_string())?;
            ensure(back == g && serialize_geometry(&back) == s, || {
                format!("circuit {i}: geometry round trip")
            })?;
        }

        let measured: Vec<QubitId> = icm
            .qubits()
            .filter(|q| *icm.measurement(*q) != MeasBasis::Empty)
            .collect();
        if measured.len() <= 8 && icm.qubit_count() <= 12 {
            let input = StateVector::zero(icm.inputs().len());
            let mut total = 0.0;
            for bits in 0..1u32 << measured.len() {
                let mut a = OutcomeAssignment::zeros();
                for (k, q) in measured.iter().enumerate() {
                    a = a.with(*q, (bits >> k & 1) as u8);
                }
                match simulate(&icm, &input, &a, &SimOptions::default()) {
                    Ok(r) => {
                        total += r.acceptance;
                        ensure((r.state.norm_sqr() - 1.0).abs() < 1e-9, || {
                            format!("circuit {i}: norm")
                        })?;
                    }
                    Err(SimError::ZeroProbability(_)) => {}
                    Err(e) => return Err(e.to_string()),
                }
            }
            ensure((total - 1.0).abs() < 1e-9, || {
                format!("circuit {i}: branch sum {total}")
            })?;
            branches += 1;
        }
    }
    Ok(format!(
        "100 circuits valid, ordered, round-tripped; {branches} branch sums checked"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 format fidelity", Duration::from_secs(1), format_fidelity),
        ("2 geometry golden", Duration::from_secs(1), geometry_golden),
        (
            "3 decomposition correctness",
            Duration::from_secs(10),
            decomposition_correctness,
        ),
        (
            "4 resource scaling",
            Duration::from_secs(30),
            resource_scaling,
        ),
        (
            "5 t-depth preservation",
            Duration::from_secs(1),
            t_depth_preservation,
        ),
        (
            "6 distillation scaling",
            Duration::from_secs(300),
            distillation_scaling,
        ),
        (
            "7 duplicate recovery",
            Duration::from_secs(300),
            duplicate_recovery,
        ),
        (
            "8 property suites",
            Duration::from_secs(120),
            property_suites,
        ),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let result = match outcome {
            Ok(msg) if took <= budget => Ok(msg),
            Ok(msg) => Err(format!("{msg}; took {took:.2?} > {budget:?}")),
            Err(e) => Err(e),
        };
        match result {
            Ok(msg) => println!("PASS  {name:<30} {took:>10.2?}  {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:<30} {took:>10.2?}  {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
