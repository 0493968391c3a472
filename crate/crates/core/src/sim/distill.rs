//! Monte-Carlo estimates for the distillation circuits.
//!
//! The ideal distiller is simulated once to obtain, for every X-basis
//! outcome pattern `t` of the code qubits, the (unnormalised) output state
//! `φ_t`. A Z error on an injected state commutes to a Z on its code qubit
//! just before the X measurement, so an error mask `e` turns an ideal
//! pattern `t` into the observed pattern `t ⊕ e` while the output stays
//! `φ_t`. A run is accepted when the observed pattern is one the ideal
//! circuit can produce (the trivial syndrome), and the output is then
//! corrected with the Pauli that maps the ideal state for that pattern
//! onto the target.
//!
//! Sampling is stratified by error weight: each weight gets an equal share
//! of the trials and is reweighted by its binomial probability. Plain
//! sampling at 10⁴ trials sees almost no weight-3 events at p = 0.002.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{MagicKind, Pauli, Primitive};
use crate::db::{Database, DecompEntry, EntryBody, MeasToken};
use crate::matrix::{pauli1, C};
use crate::par::{map_indexed, ExecPolicy};

use super::{init_state, SimError, StateVector};

/// Ideal outcome table of a distillation entry.
#[derive(Debug, Clone)]
pub struct DistillTable {
    pub kind: MagicKind,
    code: usize,
    patterns: Vec<[C; 2]>,
    support: Vec<bool>,
    correction: Vec<Pauli>,
    /// Supported patterns and their cumulative probabilities.
    cumulative: Vec<(usize, f64)>,
    target: StateVector,
}

pub fn entry_name(kind: MagicKind) -> &'static str {
    match kind {
        MagicKind::A => "AA",
        MagicKind::Y => "YY",
    }
}

pub fn target_state(kind: MagicKind) -> StateVector {
    match kind {
        MagicKind::A => init_state(crate::circuit::InitBasis::A),
        MagicKind::Y => init_state(crate::circuit::InitBasis::Y),
    }
}

impl DistillTable {
    pub fn for_kind(kind: MagicKind, db: &Database) -> Result<Self, SimError> {
        let entry = db
            .get(entry_name(kind))
            .ok_or_else(|| SimError::Unsupported(format!("missing entry {}", entry_name(kind))))?;
        Self::from_entry(kind, entry)
    }

    pub fn from_entry(kind: MagicKind, entry: &DecompEntry) -> Result<Self, SimError> {
        let EntryBody::Icm { inits, meas, .. } = &entry.body else {
            return Err(SimError::Unsupported(format!(
                "{} is not an icm body",
                entry.name
            )));
        };
        let n = inits.len();
        if n > super::MAX_QUBITS {
            return Err(SimError::TooManyQubits(n));
        }
        let code_pos: Vec<usize> = (0..n)
            .filter(|i| matches!(meas[*i], MeasToken::A | MeasToken::Y))
            .collect();
        let out_pos: Vec<usize> = (0..n).filter(|i| meas[*i] == MeasToken::Empty).collect();
        if out_pos.len() != 1 || code_pos.len() + 1 != n {
            return Err(SimError::Unsupported(format!(
                "{} must have one output and magic-basis measurements elsewhere",
                entry.name
            )));
        }
        let mut state = inits
            .iter()
            .map(|b| init_state(*b))
            .reduce(|a, b| a.kron(&b))
            .expect("nonempty entry");
        for (a, b) in entry.cnots() {
            state.cnot(a as usize - 1, b as usize - 1);
        }
        for &q in &code_pos {
            let g = if meas[q] == MeasToken::A {
                Primitive::T
            } else {
                Primitive::P
            };
            state.apply_primitive(q, g);
            state.apply_primitive(q, Primitive::H);
        }
        let code = code_pos.len();
        let mut patterns = vec![[C::new(0.0, 0.0); 2]; 1 << code];
        for (idx, amp) in state.amplitudes().iter().enumerate() {
            let bit = |q: usize| (idx >> (n - 1 - q)) & 1;
            let t = code_pos
                .iter()
                .enumerate()
                .fold(0usize, |acc, (j, q)| acc | (bit(*q) << (code - 1 - j)));
            patterns[t][bit(out_pos[0])] = *amp;
        }
        let target = target_state(kind);
        let mut support = vec![false; 1 << code];
        let mut correction = vec![Pauli::I; 1 << code];
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (t, ph) in patterns.iter().enumerate() {
            let p = ph[0].norm_sqr() + ph[1].norm_sqr();
            if p < 1e-12 {
                continue;
            }
            support[t] = true;
            let best = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]
                .into_iter()
                .map(|pl| (pl, overlap(&target, &apply(pl, ph))))
                .fold(
                    (Pauli::I, -1.0),
                    |b, x| if x.1 > b.1 + 1e-12 { x } else { b },
                );
            correction[t] = best.0;
            acc += p;
            cumulative.push((t, acc));
        }
        Ok(DistillTable {
            kind,
            code,
            patterns,
            support,
            correction,
            cumulative,
            target,
        })
    }

    /// Number of injected states (code qubits).
    pub fn code_len(&self) -> usize {
        self.code
    }

    pub fn supported(&self, s: usize) -> bool {
        self.support[s]
    }

    pub fn support_size(&self) -> usize {
        self.cumulative.len()
    }

    pub fn correction(&self, s: usize) -> Pauli {
        self.correction[s]
    }

    /// Probability of ideal pattern `t`.
    pub fn probability(&self, t: usize) -> f64 {
        let ph = self.patterns[t];
        ph[0].norm_sqr() + ph[1].norm_sqr()
    }

    /// Normalised ideal output for pattern `t`.
    pub fn output(&self, t: usize) -> StateVector {
        let ph = self.patterns[t];
        let mut s = super::single(ph[0], ph[1]);
        s.normalize();
        s
    }

    /// Infidelity of ideal output `t` after the correction chosen for the
    /// observed pattern `s`.
    pub fn infidelity(&self, t: usize, s: usize) -> f64 {
        let f = overlap(&self.target, &apply(self.correction[s], &self.patterns[t]));
        let v = 1.0 - f;
        if v < 1e-12 {
            0.0
        } else {
            v
        }
    }

    /// Exact acceptance and post-selected infidelity for a fixed error mask.
    pub fn exact_for_mask(&self, e: usize) -> (f64, f64) {
        let mut acc = 0.0;
        let mut bad = 0.0;
        for &(t, _) in &self.cumulative {
            let s = t ^ e;
            if self.support[s] {
                let p = self.probability(t);
                acc += p;
                bad += p * self.infidelity(t, s);
            }
        }
        (acc, bad)
    }

    /// Exact statistics by enumerating every error mask. Only sensible for
    /// small codes.
    pub fn exact(&self, p: f64) -> (f64, f64) {
        let mut acc = 0.0;
        let mut bad = 0.0;
        for e in 0..1usize << self.code {
            let w = e.count_ones() as i32;
            let pe = p.powi(w) * (1.0 - p).powi(self.code as i32 - w);
            let (a, b) = self.exact_for_mask(e);
            acc += pe * a;
            bad += pe * b;
        }
        (acc, if acc > 0.0 { bad / acc } else { 0.0 })
    }

    fn sample_pattern(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = self.cumulative.last().map(|x| x.1).unwrap_or(1.0);
        let u = rng.gen::<f64>() * total;
        let i = self.cumulative.partition_point(|(_, c)| *c <= u);
        self.cumulative[i.min(self.cumulative.len() - 1)].0
    }
}

fn apply(p: Pauli, ph: &[C; 2]) -> [C; 2] {
    let m = pauli1(p);
    [
        m[0][0] * ph[0] + m[0][1] * ph[1],
        m[1][0] * ph[0] + m[1][1] * ph[1],
    ]
}

/// `|⟨target|φ⟩|² / ‖φ‖²`.
fn overlap(target: &StateVector, ph: &[C; 2]) -> f64 {
    let t = target.amplitudes();
    let n = ph[0].norm_sqr() + ph[1].norm_sqr();
    (t[0].conj() * ph[0] + t[1].conj() * ph[1]).norm_sqr() / n
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn weight_probability(n: usize, w: usize, p: f64) -> f64 {
    binomial(n, w) * p.powi(w as i32) * (1.0 - p).powi((n - w) as i32)
}

/// Trials per stratum; earlier strata take the remainder.
fn allocation(trials: usize, strata: usize) -> Vec<usize> {
    let base = trials / strata;
    let extra = trials % strata;
    (0..strata).map(|w| base + usize::from(w < extra)).collect()
}

fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn random_mask(rng: &mut ChaCha8Rng, len: usize, weight: usize) -> usize {
    sample(rng, len, weight)
        .into_iter()
        .fold(0usize, |m, j| m | 1 << (len - 1 - j))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillStats {
    pub p: f64,
    pub trials: usize,
    pub acceptance: f64,
    /// Mean infidelity of accepted outputs.
    pub infidelity: f64,
}

/// Post-selected output infidelity and acceptance rate for injected-state
/// Z-error probability `p`. Deterministic for a given seed, independent of
/// the execution policy.
pub fn distillation_infidelity(
    table: &DistillTable,
    p: f64,
    trials: usize,
    seed: u64,
    policy: ExecPolicy,
) -> Result<DistillStats, SimError> {
    if !(0.0..1.0).contains(&p) {
        return Err(SimError::Unsupported(format!(
            "error probability {p} outside [0, 1)"
        )));
    }
    let n = table.code;
    let alloc = allocation(trials, n + 1);
    let mut offsets = vec![0usize; n + 2];
    for w in 0..=n {
        offsets[w + 1] = offsets[w] + alloc[w];
    }
    let results = map_indexed(policy, trials, |i| {
        let w = offsets.partition_point(|o| *o <= i) - 1;
        let mut rng = trial_rng(seed, i);
        let e = random_mask(&mut rng, n, w);
        let t = table.sample_pattern(&mut rng);
        let s = t ^ e;
        if table.support[s] {
            (true, table.infidelity(t, s))
        } else {
            (false, 0.0)
        }
    });
    let mut acceptance = 0.0;
    let mut bad = 0.0;
    let mut accepted = 0usize;
    for w in 0..=n {
        let range = offsets[w]..offsets[w + 1];
        if range.is_empty() {
            continue;
        }
        let len = range.len() as f64;
        let slice = &results[range];
        let acc_w = slice.iter().filter(|r| r.0).count();
        let bad_w: f64 = slice.iter().map(|r| r.1).sum();
        accepted += acc_w;
        let pw = weight_probability(n, w, p);
        acceptance += pw * acc_w as f64 / len;
        bad += pw * bad_w / len;
    }
    if accepted == 0 || acceptance <= 0.0 {
        return Err(SimError::ZeroAccepted);
    }
    Ok(DistillStats {
        p,
        trials,
        acceptance,
        infidelity: bad / acceptance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuplicateStats {
    pub p: f64,
    pub copies: usize,
    pub trials: usize,
    /// Probability that no copy passes its syndrome check.
    pub failure: f64,
    /// Mean infidelity of the selected output when some copy passes.
    pub infidelity: f64,
}

/// `k` independent distillers joined by selective-source teleportation: the
/// join fails only when every copy rejects.
pub fn duplicate_failure(
    table: &DistillTable,
    copies: usize,
    p: f64,
    trials: usize,
    seed: u64,
    policy: ExecPolicy,
) -> Result<DuplicateStats, SimError> {
    if copies == 0 {
        return Err(SimError::Unsupported(
            "at least one copy is required".into(),
        ));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(SimError::Unsupported(format!(
            "error probability {p} outside [0, 1)"
        )));
    }
    let n = table.code;
    let total = n * copies;
    let alloc = allocation(trials, total + 1);
    let mut offsets = vec![0usize; total + 2];
    for w in 0..=total {
        offsets[w + 1] = offsets[w] + alloc[w];
    }
    let full = (1usize << n) - 1;
    let results = map_indexed(policy, trials, |i| {
        let w = offsets.partition_point(|o| *o <= i) - 1;
        let mut rng = trial_rng(seed, i);
        let e = random_mask(&mut rng, total, w);
        for j in 0..copies {
            let ej = (e >> ((copies - 1 - j) * n)) & full;
            let t = table.sample_pattern(&mut rng);
            let s = t ^ ej;
            if table.support[s] {
                return (false, table.infidelity(t, s));
            }
        }
        (true, 0.0)
    });
    let mut failure = 0.0;
    let mut bad = 0.0;
    for w in 0..=total {
        let range = offsets[w]..offsets[w + 1];
        if range.is_empty() {
            continue;
        }
        let len = range.len() as f64;
        let slice = &results[range];
        let pw = weight_probability(total, w, p);
        failure += pw * slice.iter().filter(|r| r.0).count() as f64 / len;
        bad += pw * slice.iter().map(|r| r.1).sum::<f64>() / len;
    }
    let success = 1.0 - failure;
    Ok(DuplicateStats {
        p,
        copies,
        trials,
        failure,
        infidelity: if success > 0.0 { bad / success } else { 0.0 },
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
