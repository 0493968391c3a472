//! `icmc`: decomposition database maintenance, circuit expansion, ICM
//! conversion with geometry output, and oracle checks.
//!
//! Exit codes: 0 success, 1 validation or check failure, 2 I/O or parse error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use icm::circuit::{compute_stats, validate_icm, Circuit, MagicKind};
use icm::db::{parse_database, serialize_database, Database};
use icm::geometry::{generate_geometry, serialize_geometry, validate_geometry};
use icm::matrix::Matrix;
use icm::par::ExecPolicy;
use icm::render::render_svg;
use icm::sim::distill::{distillation_infidelity, duplicate_failure, loglog_slope, DistillTable};
use icm::sim::{circuit_unitary, OutcomeAssignment, SimOptions};
use icm::transform::{compile, expand_nicm, ConversionOptions, TeleportMode};
use icm::unitary::{decompose, parse_unitary_specs, NoApproximation};
use icm::verify::{branch_fidelity, verify_entry, FIDELITY_TOL};

#[derive(Parser)]
#[command(name = "icmc", version, about = "Clifford+T to ICM compiler")]
struct Cli {
    /// Decomposition database (defaults to the built-in seed database).
    #[arg(long, global = true)]
    db: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recognise unitary specifications and add them as nicm entries.
    Decompose {
        spec: PathBuf,
        /// Where to write the database (defaults to --db, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
        /// Tolerance forwarded to the approximation hook.
        #[arg(long, default_value_t = 1e-10)]
        epsilon: f64,
    },
    /// Replace non-primitive gates by their nicm decompositions.
    Processraw {
        input: PathBuf,
        /// Output file stem (`STEM.circ`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert to ICM form; writes `.circ`, `.geom` and `.svg`.
    Convertft {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        conv: ConvArgs,
    },
    /// Check entries, circuits or distillers with the statevector oracle.
    Verify {
        #[command(subcommand)]
        what: VerifyCmd,
    },
    /// Draw an ICM circuit (and its geometry) as SVG.
    Render {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct ConvArgs {
    #[arg(long, default_value_t = 0)]
    rounds: usize,
    #[arg(long, default_value_t = 1)]
    dup: usize,
    #[arg(long, value_enum, default_value_t = Mode::Simple)]
    mode: Mode,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Simple,
    Det,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    #[value(name = "Y", alias = "y")]
    Y,
    #[value(name = "A", alias = "a")]
    A,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// A database entry against its registered analytic target.
    Entry { name: String },
    /// A circuit file; pre-ICM circuits are compared with their compiled form.
    Circuit {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Simple)]
        mode: Mode,
    },
    /// Monte-Carlo output infidelity of a distiller around `--p`.
    Distillation {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 0.005)]
        p: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Distiller copies joined by selective-source teleportation.
        #[arg(long, default_value_t = 1)]
        dup: usize,
        /// Run on a single thread.
        #[arg(long)]
        sequential: bool,
    },
}

/// Error carrying its exit code.
struct Fail {
    code: u8,
    err: anyhow::Error,
}

fn io(err: anyhow::Error) -> Fail {
    Fail { code: 2, err }
}

fn invalid(err: anyhow::Error) -> Fail {
    Fail { code: 1, err }
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io)
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(io)
}

fn load_db(path: Option<&Path>) -> Result<Database, Fail> {
    match path {
        None => Ok(Database::seed()),
        Some(p) => parse_database(&read(p)?)
            .with_context(|| format!("parsing {}", p.display()))
            .map_err(io),
    }
}

fn load_circuit(path: &Path) -> Result<Circuit, Fail> {
    read(path)?
        .parse::<Circuit>()
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(io)
}

fn stem(out: Option<&Path>, input: &Path, suffix: &str) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => {
            let mut s = input.with_extension("").into_os_string();
            s.push(suffix);
            PathBuf::from(s)
        }
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn conversion(args: ConvArgs) -> ConversionOptions {
    ConversionOptions {
        mode: match args.mode {
            Mode::Simple => TeleportMode::Simple,
            Mode::Det => TeleportMode::Deterministic,
        },
        rounds: args.rounds,
        duplicates: args.dup,
    }
}

fn run(cli: Cli) -> Result<(), Fail> {
    let db_path = cli.db.as_deref();
    match cli.cmd {
        Cmd::Decompose {
            spec,
            out,
            force,
            epsilon,
        } => {
            let mut db = load_db(db_path)?;
            let specs = parse_unitary_specs(&read(&spec)?)
                .with_context(|| format!("parsing {}", spec.display()))
                .map_err(io)?;
            for s in &specs {
                let entry =
                    decompose(s, &NoApproximation, epsilon).map_err(|e| invalid(e.into()))?;
                println!("{}: {}", s.name, entry_summary(&entry));
                db.insert(entry, force).map_err(|e| invalid(e.into()))?;
            }
            let text = serialize_database(&db);
            match out.as_deref().or(db_path) {
                Some(p) => write(p, &text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Processraw { input, out } => {
            let db = load_db(db_path)?;
            let c = load_circuit(&input)?;
            let e = expand_nicm(&c, &db)
                .with_context(|| format!("expanding {}", input.display()))
                .map_err(invalid)?;
            println!("input  {}", compute_stats(&c));
            println!("output {}", compute_stats(&e));
            let path = with_ext(&stem(out.as_deref(), &input, ".prim"), "circ");
            write(&path, &e.to_text())?;
            println!("wrote {}", path.display());
        }
        Cmd::Convertft { input, out, conv } => {
            let db = load_db(db_path)?;
            let c = load_circuit(&input)?;
            let icm = compile(&c, &db, &conversion(conv))
                .with_context(|| format!("converting {}", input.display()))
                .map_err(invalid)?;
            let geom = generate_geometry(&icm)
                .context("generating geometry")
                .map_err(invalid)?;
            let base = stem(out.as_deref(), &input, "");
            println!("input  {}", compute_stats(&c));
            println!("output {}", compute_stats(&icm));
            println!(
                "geometry points {} segments {} config {}",
                geom.points.len(),
                geom.segments.len(),
                geom.config.len()
            );
            write(&with_ext(&base, "circ"), &icm.to_text())?;
            write(&with_ext(&base, "geom"), &serialize_geometry(&geom))?;
            write(&with_ext(&base, "svg"), &render_svg(&icm, Some(&geom)))?;
            println!("wrote {}.{{circ,geom,svg}}", base.display());
        }
        Cmd::Render { input, out } => {
            let c = load_circuit(&input)?;
            let geom = if validate_icm(&c).is_ok() {
                Some(generate_geometry(&c).map_err(|e| invalid(e.into()))?)
            } else {
                None
            };
            if let Some(g) = &geom {
                let r = validate_geometry(g);
                if !r.is_ok() {
                    return Err(invalid(anyhow!("geometry: {r}")));
                }
            }
            let path = with_ext(&stem(out.as_deref(), &input, ""), "svg");
            write(&path, &render_svg(&c, geom.as_ref()))?;
            println!("wrote {}", path.display());
        }
        Cmd::Verify { what } => verify(what, db_path)?,
    }
    Ok(())
}

fn entry_summary(e: &icm::db::DecompEntry) -> String {
    let text = e.to_string();
    text.lines().last().unwrap_or("").to_string()
}

fn report(label: &str, fidelity: f64) -> Result<(), Fail> {
    let pass = fidelity >= 1.0 - FIDELITY_TOL;
    println!(
        "{label}: fidelity {fidelity:.6}, {}",
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(invalid(anyhow!("{label} does not match its target")))
    }
}

fn verify(what: VerifyCmd, db_path: Option<&Path>) -> Result<(), Fail> {
    match what {
        VerifyCmd::Entry { name } => {
            let db = load_db(db_path)?;
            let r = verify_entry(&db, &name).map_err(|e| invalid(e.into()))?;
            if !r.has_target {
                println!(
                    "{}: unitary over {} branches, no registered target",
                    r.label, r.branches
                );
                return Ok(());
            }
            report(&r.label, r.fidelity)
        }
        VerifyCmd::Circuit { file, mode } => {
            let db = load_db(db_path)?;
            let c = load_circuit(&file)?;
            let sim = |c: &Circuit| {
                circuit_unitary(c, &OutcomeAssignment::zeros(), &SimOptions::default())
                    .map_err(|e| invalid(e.into()))
            };
            if validate_icm(&c).is_ok() && c.gates.iter().all(|g| g.is_cnot()) {
                let u = sim(&c)?;
                let id = Matrix::identity(u.dim());
                let f = u.phase_fidelity(&id);
                if f >= 1.0 - FIDELITY_TOL {
                    return report("identity", f);
                }
                println!(
                    "unitary on {} inputs (zero outcomes), not the identity",
                    c.inputs().len()
                );
                return Ok(());
            }
            let prim = expand_nicm(&c, &db).map_err(|e| invalid(e.into()))?;
            let want = sim(&prim)?;
            let opts = conversion(ConvArgs {
                rounds: 0,
                dup: 1,
                mode,
            });
            let icm = compile(&c, &db, &opts).map_err(|e| invalid(e.into()))?;
            let (f, n) = branch_fidelity(&icm, &want, true, &SimOptions::default())
                .map_err(|e| invalid(e.into()))?;
            println!("{n} outcome branches checked");
            report("ICM form vs input", f)
        }
        VerifyCmd::Distillation {
            kind,
            p,
            trials,
            seed,
            dup,
            sequential,
        } => {
            let db = load_db(db_path)?;
            let kind = match kind {
                Kind::Y => MagicKind::Y,
                Kind::A => MagicKind::A,
            };
            let policy = if sequential {
                ExecPolicy::Sequential
            } else {
                ExecPolicy::Parallel
            };
            let table = DistillTable::for_kind(kind, &db).map_err(|e| invalid(e.into()))?;
            let ps = [0.4 * p, p, 2.0 * p];
            let mut pts = Vec::new();
            let (expected, what) = if dup > 1 {
                (dup as f64, "failure")
            } else {
                (3.0, "infidelity")
            };
            for q in ps {
                let y = if dup > 1 {
                    let s = duplicate_failure(&table, dup, q, trials, seed, policy)
                        .map_err(|e| invalid(e.into()))?;
                    println!(
                        "p {q:.5}  failure {:.4e}  infidelity {:.4e}",
                        s.failure, s.infidelity
                    );
                    s.failure
                } else {
                    let s = distillation_infidelity(&table, q, trials, seed, policy)
                        .map_err(|e| invalid(e.into()))?;
                    println!(
                        "p {q:.5}  acceptance {:.6}  infidelity {:.4e}",
                        s.acceptance, s.infidelity
                    );
                    s.infidelity
                };
                pts.push((q, y));
            }
            let slope = loglog_slope(&pts);
            let pass = (slope - expected).abs() <= 0.3;
            println!(
                "{what} slope {slope:.3} (expected {expected:.1} ± 0.3), {}",
                if pass { "PASS" } else { "FAIL" }
            );
            if !pass {
                return Err(invalid(anyhow!("slope out of range")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
