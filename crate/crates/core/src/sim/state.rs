//! Dense statevector. Qubit position 0 is the most significant bit of the
//! amplitude index, so the amplitude order matches the Kronecker product
//! `q0 ⊗ q1 ⊗ ...`.

use num_complex::Complex64;

use crate::circuit::{Basis, Pauli, Primitive};
use crate::matrix::{gate1, pauli1, Gate1, C};
use crate::par::ExecPolicy;

/// Below this many amplitudes the kernels always run sequentially.
const PAR_THRESHOLD: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C>,
    policy: ExecPolicy,
}

impl StateVector {
    /// `|0...0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![C::new(0.0, 0.0); 1 << n];
        amps[index] = C::new(1.0, 0.0);
        StateVector {
            n,
            amps,
            policy: ExecPolicy::default(),
        }
    }

    /// Panics unless the length is a power of two.
    pub fn from_amplitudes(amps: Vec<C>) -> Self {
        assert!(
            amps.len().is_power_of_two(),
            "length must be a power of two"
        );
        let n = amps.len().trailing_zeros() as usize;
        StateVector {
            n,
            amps,
            policy: ExecPolicy::default(),
        }
    }

    pub fn with_policy(mut self, policy: ExecPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn set_policy(&mut self, policy: ExecPolicy) {
        self.policy = policy;
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }

    pub fn inner(&self, other: &StateVector) -> C {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|⟨self|other⟩|²` for normalised states.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn kron(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector::from_amplitudes(amps).with_policy(self.policy)
    }

    fn stride(&self, q: usize) -> usize {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        1 << (self.n - 1 - q)
    }

    fn policy(&self) -> ExecPolicy {
        if self.amps.len() >= PAR_THRESHOLD {
            self.policy
        } else {
            ExecPolicy::Sequential
        }
    }

    /// Calls `f(index_of_low, low, high)` for every amplitude pair that
    /// differs only in the bit with the given stride.
    fn for_pairs<F>(&mut self, stride: usize, f: F)
    where
        F: Fn(usize, &mut C, &mut C) + Sync + Send,
    {
        let chunk = stride * 2;
        let run = |(k, block): (usize, &mut [C])| {
            let (lo, hi) = block.split_at_mut(stride);
            for (i, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                f(k * chunk + i, a, b);
            }
        };
        match self.policy().effective() {
            #[cfg(feature = "parallel")]
            ExecPolicy::Parallel => {
                use rayon::prelude::*;
                if self.amps.len() / chunk >= rayon::current_num_threads() {
                    self.amps.par_chunks_mut(chunk).enumerate().for_each(run);
                } else {
                    // Few large blocks: split inside each block instead.
                    for (k, block) in self.amps.chunks_mut(chunk).enumerate() {
                        let (lo, hi) = block.split_at_mut(stride);
                        lo.par_iter_mut()
                            .zip(hi.par_iter_mut())
                            .enumerate()
                            .for_each(|(i, (a, b))| f(k * chunk + i, a, b));
                    }
                }
            }
            _ => self.amps.chunks_mut(chunk).enumerate().for_each(run),
        }
    }

    pub fn apply(&mut self, q: usize, g: &Gate1) {
        let g = *g;
        self.for_pairs(self.stride(q), move |_, a, b| {
            let (x, y) = (*a, *b);
            *a = g[0][0] * x + g[0][1] * y;
            *b = g[1][0] * x + g[1][1] * y;
        });
    }

    pub fn apply_primitive(&mut self, q: usize, p: Primitive) {
        self.apply(q, &gate1(p));
    }

    pub fn apply_pauli(&mut self, q: usize, p: Pauli) {
        if p != Pauli::I {
            self.apply(q, &pauli1(p));
        }
    }

    pub fn cnot(&mut self, control: usize, target: usize) {
        assert_ne!(control, target, "CNOT control equals target");
        let cmask = self.stride(control);
        self.for_pairs(self.stride(target), move |i, a, b| {
            if i & cmask != 0 {
                std::mem::swap(a, b);
            }
        });
    }

    /// Probability of `outcome` when measuring `q` in `basis`.
    pub fn probability(&self, q: usize, basis: Basis, outcome: u8) -> f64 {
        let s = self.stride(q);
        let total = self.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        let mut p = 0.0;
        for base in (0..self.amps.len()).filter(|i| i & s == 0) {
            let (a, b) = (self.amps[base], self.amps[base | s]);
            p += match (basis, outcome) {
                (Basis::Z, 0) => a.norm_sqr(),
                (Basis::Z, _) => b.norm_sqr(),
                (Basis::X, 0) => (a + b).norm_sqr() / 2.0,
                (Basis::X, _) => (a - b).norm_sqr() / 2.0,
            };
        }
        p / total
    }

    /// Projects `q` onto the outcome, renormalises, and returns the
    /// probability of that outcome. A zero-probability projection leaves a
    /// zero vector.
    pub fn project(&mut self, q: usize, basis: Basis, outcome: u8) -> f64 {
        let before = self.norm_sqr();
        if basis == Basis::X {
            self.apply_primitive(q, Primitive::H);
        }
        let keep_high = outcome != 0;
        self.for_pairs(self.stride(q), move |_, a, b| {
            if keep_high {
                *a = C::new(0.0, 0.0);
            } else {
                *b = C::new(0.0, 0.0);
            }
        });
        if basis == Basis::X {
            self.apply_primitive(q, Primitive::H);
        }
        let after = self.norm_sqr();
        let p = if before > 0.0 { after / before } else { 0.0 };
        if p > 0.0 {
            self.normalize();
        }
        p
    }

    /// Amplitudes of the qubits in `keep` (in the listed order) with every
    /// other qubit fixed to the given bit.
    pub fn slice(&self, keep: &[usize], fixed: &[(usize, u8)]) -> StateVector {
        let mut base = 0usize;
        for (q, b) in fixed {
            if *b != 0 {
                base |= self.stride(*q);
            }
        }
        let strides: Vec<usize> = keep.iter().map(|q| self.stride(*q)).collect();
        let m = keep.len();
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << m];
        for (k, slot) in amps.iter_mut().enumerate() {
            let mut idx = base;
            for (j, s) in strides.iter().enumerate() {
                if k & (1 << (m - 1 - j)) != 0 {
                    idx |= s;
                }
            }
            *slot = self.amps[idx];
        }
        StateVector::from_amplitudes(amps)
    }
}

/// Single-qubit states used by initialisations.
pub fn single(amp0: C, amp1: C) -> StateVector {
    StateVector::from_amplitudes(vec![amp0, amp1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn cnot_flips_target_when_control_set() {
        let mut s = StateVector::basis(2, 0b10);
        s.cnot(0, 1);
        assert_eq!(s.amplitudes()[0b11], c(1.0, 0.0));
        let mut s = StateVector::basis(2, 0b01);
        s.cnot(0, 1);
        assert_eq!(s.amplitudes()[0b01], c(1.0, 0.0));
    }

    #[test]
    fn x_measurement_of_plus() {
        let mut s = StateVector::zero(1);
        s.apply_primitive(0, Primitive::H);
        assert!((s.probability(0, Basis::X, 0) - 1.0).abs() < 1e-15);
        assert!((s.probability(0, Basis::Z, 1) - 0.5).abs() < 1e-15);
        let p = s.project(0, Basis::Z, 1);
        assert!((p - 0.5).abs() < 1e-15);
        assert!((s.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn slice_extracts_subsystem() {
        let plus = single(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        let one = single(c(0.0, 0.0), c(1.0, 0.0));
        let s = one.kron(&plus);
        let sub = s.slice(&[1], &[(0, 1)]);
        assert!((sub.fidelity(&plus) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn policies_give_identical_amplitudes() {
        let mut a = StateVector::zero(13).with_policy(ExecPolicy::Sequential);
        let mut b = StateVector::zero(13).with_policy(ExecPolicy::Parallel);
        for s in [&mut a, &mut b] {
            for q in 0..13 {
                s.apply_primitive(q, Primitive::H);
                s.apply_primitive(q, Primitive::T);
            }
            for q in 0..12 {
                s.cnot(q, q + 1);
            }
            s.cnot(12, 0);
        }
        assert_eq!(a.amplitudes(), b.amplitudes());
    }
}
