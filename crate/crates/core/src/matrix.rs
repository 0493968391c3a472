//! Small dense complex matrices for the oracle and for exact recognition.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

use crate::circuit::{Pauli, Primitive};

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    Complex64::new(re, im)
}

/// Square matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![C::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C]]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "matrix must be square");
            data.extend_from_slice(r);
        }
        Matrix { dim, data }
    }

    pub fn from_columns(dim: usize, cols: &[Vec<C>]) -> Self {
        let mut m = Matrix::zeros(dim);
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m.data[i * dim + j] = *v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C) {
        self.data[i * self.dim + j] = v;
    }

    pub fn data(&self) -> &[C] {
        &self.data
    }

    pub fn adjoint(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[j * self.dim + i] = self.get(i, j).conj();
            }
        }
        m
    }

    pub fn scale(&self, s: C) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn kron(&self, other: &Matrix) -> Matrix {
        let d = self.dim * other.dim;
        let mut m = Matrix::zeros(d);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let a = self.get(i, j);
                for k in 0..other.dim {
                    for l in 0..other.dim {
                        m.data[(i * other.dim + k) * d + j * other.dim + l] = a * other.get(k, l);
                    }
                }
            }
        }
        m
    }

    pub fn trace(&self) -> C {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Matrix::identity(self.dim))
    }

    /// `|tr(U†V)| / d`: 1 iff the matrices agree up to global phase.
    pub fn phase_fidelity(&self, other: &Matrix) -> f64 {
        if self.dim != other.dim || self.dim == 0 {
            return if self.dim == other.dim { 1.0 } else { 0.0 };
        }
        (&self.adjoint() * other).trace().norm() / self.dim as f64
    }

    /// Max-norm distance after removing the best global phase.
    pub fn phase_distance(&self, other: &Matrix) -> f64 {
        let t = (&self.adjoint() * other).trace();
        if t.norm() < 1e-300 {
            return self.max_abs_diff(other);
        }
        let phase = t.conj() / t.norm();
        other.scale(phase).max_abs_diff(self)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        m
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let v = self.get(i, j);
                    format!("{:+.4}{:+.4}i", v.re, v.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// 2×2 gate matrix, row-major.
pub type Gate1 = [[C; 2]; 2];

pub fn gate1(p: Primitive) -> Gate1 {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let h = c(FRAC_1_SQRT_2, 0.0);
    match p {
        Primitive::H => [[h, h], [h, -h]],
        Primitive::P => [[o, z], [z, c(0.0, 1.0)]],
        Primitive::Pdag => [[o, z], [z, c(0.0, -1.0)]],
        Primitive::T => [[o, z], [z, c(FRAC_1_SQRT_2, FRAC_1_SQRT_2)]],
        Primitive::Tdag => [[o, z], [z, c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)]],
    }
}

pub fn pauli1(p: Pauli) -> Gate1 {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    match p {
        Pauli::I => [[o, z], [z, o]],
        Pauli::X => [[z, o], [o, z]],
        Pauli::Y => [[z, c(0.0, -1.0)], [c(0.0, 1.0), z]],
        Pauli::Z => [[o, z], [z, -o]],
    }
}

pub fn to_matrix(g: &Gate1) -> Matrix {
    Matrix::from_rows(&[&g[0], &g[1]])
}

/// Matrix of the controlled-NOT on two qubits, control first.
pub fn cnot_matrix() -> Matrix {
    let mut m = Matrix::zeros(4);
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m.set(i, j, c(1.0, 0.0));
    }
    m
}
